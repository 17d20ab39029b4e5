from django.core.management.base import CommandError

from ...exceptions import ConfigError
from ...models import ScenarioRun
from ...scenario import read_config, run, summary_lines, write_outputs
from ..base import VERIFICATION_FAILURE, GridLedgerCommand, config_failure, file_failure


class Command(GridLedgerCommand):
    help = 'Run a scenario; write its chain, report and key files and print a summary.'

    def add_arguments(self, parser):
        parser.add_argument('config', help='Scenario TOML file.')
        parser.add_argument('--output-dir', dest='output_dir', help='Overrides [output] directory.')
        parser.add_argument('--trace', action='store_true', help='Also write the delivery trace.')
        parser.add_argument('--persist', action='store_true', help='Store the run and its DL verdicts.')

    def handle(self, *args, **options):
        path = options['config']
        try:
            config, digest = read_config(path)
        except OSError as exc:
            raise file_failure(path, exc.strerror or exc)
        except ConfigError as exc:
            raise config_failure(exc)

        result = run(config)
        directory = options['output_dir'] or config.output_directory
        try:
            paths = write_outputs(result, directory, trace=options['trace'] or config.trace)
        except OSError as exc:
            raise file_failure(directory, exc.strerror or exc)

        self.write_lines(summary_lines(result.report))
        self.stdout.write('wrote {}'.format(', '.join(paths[name] for name in sorted(paths))))
        if options['persist']:
            stored = ScenarioRun.objects.record(result, digest)
            self.stdout.write('stored {}'.format(stored))

        chain = result.report['chain']
        if not chain['valid']:
            raise CommandError(
                'chain failed verification at height {}: {}'.format(chain['violation_height'], chain['violation']),
                returncode=VERIFICATION_FAILURE,
            )
