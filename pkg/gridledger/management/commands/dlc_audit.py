from ...exceptions import CodecError, KeyFileError
from ...scenario import audit_chain_bytes, load_key_file, render_access_report
from ..base import GridLedgerCommand, file_failure, read_bytes


class Command(GridLedgerCommand):
    help = "List every on-ledger request that touched a participant's nodes."

    def add_arguments(self, parser):
        parser.add_argument('chain', help='Chain file written by dlc_run.')
        parser.add_argument('keys', help="The participant's key file.")

    def handle(self, *args, **options):
        data = read_bytes(options['chain'])
        try:
            keypair = load_key_file(options['keys'])
        except OSError as exc:
            raise file_failure(options['keys'], exc.strerror or exc)
        except KeyFileError as exc:
            raise file_failure(options['keys'], exc)
        try:
            report = audit_chain_bytes(data, keypair.public)
        except CodecError as exc:
            raise file_failure(options['chain'], exc)
        self.stdout.write(render_access_report(report), ending='')
