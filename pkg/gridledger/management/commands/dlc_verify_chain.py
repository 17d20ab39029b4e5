import os

from django.core.management.base import CommandError

from ...crypto import PublicKey
from ...ledger import verify_chain_bytes
from ..base import VERIFICATION_FAILURE, GridLedgerCommand, file_failure, read_bytes


class Command(GridLedgerCommand):
    help = 'Verify a chain file and report the first violation.'

    def add_arguments(self, parser):
        parser.add_argument('chain', help='Chain file written by dlc_run.')
        parser.add_argument(
            '--producer-key',
            dest='producer_key',
            help='DISCO public key as hex, or a file holding it. '
                 'Defaults to the issuer of the first genesis in block 0.',
        )

    def producer_key(self, value):
        if value is None:
            return None
        if os.path.exists(value):
            value = read_bytes(value).decode('ascii', 'replace')
        try:
            return PublicKey(bytes.fromhex(value.strip()))
        except ValueError as exc:
            raise file_failure('--producer-key', exc)

    def handle(self, *args, **options):
        data = read_bytes(options['chain'])
        check = verify_chain_bytes(data, self.producer_key(options['producer_key']))
        if check.valid:
            self.stdout.write('{}: valid'.format(options['chain']))
            return
        message = '{}: invalid at height {}: {}'.format(options['chain'], check.height, check.violation.value)
        if check.detail:
            message += ' ({})'.format(check.detail)
        raise CommandError(message, returncode=VERIFICATION_FAILURE)
