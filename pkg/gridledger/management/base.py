import logging

from django.core.management.base import BaseCommand, CommandError

from ..exceptions import ConfigError

# CommandError return codes
CONFIG_FAILURE = 2
VERIFICATION_FAILURE = 3
FILE_FAILURE = 4

LOG_LEVELS = {0: logging.ERROR, 1: logging.WARNING, 2: logging.INFO, 3: logging.DEBUG}


class GridLedgerCommand(BaseCommand):
    """Maps ``--verbosity`` onto the ``gridledger`` logger."""

    def execute(self, *args, **options):
        level = LOG_LEVELS.get(options.get('verbosity', 1), logging.DEBUG)
        logging.getLogger('gridledger').setLevel(level)
        return super().execute(*args, **options)

    def write_lines(self, lines):
        for line in lines:
            self.stdout.write(line)


def config_failure(exc):
    if isinstance(exc, ConfigError):
        return CommandError('invalid config:\n  ' + '\n  '.join(exc.diagnostics), returncode=CONFIG_FAILURE)
    return CommandError(str(exc), returncode=CONFIG_FAILURE)


def file_failure(path, exc):
    return CommandError('{}: {}'.format(path, exc), returncode=FILE_FAILURE)


def read_bytes(path):
    try:
        with open(path, 'rb') as handle:
            return handle.read()
    except OSError as exc:
        raise file_failure(path, exc.strerror or exc)
