from ...bench import bench, table_lines
from ...exceptions import ConfigError
from ...scenario import load_config, render_json
from ...serializers import BenchTableSerializer
from ..base import GridLedgerCommand, config_failure, file_failure


class Command(GridLedgerCommand):
    help = 'Time hash-authenticated DL reports against signed reports.'

    def add_arguments(self, parser):
        parser.add_argument('config', help='Scenario TOML file; its [bench] table and seed apply.')
        parser.add_argument('--samples', type=int, help='Overrides [bench] samples.')
        parser.add_argument('--json', action='store_true', help='Print the table as JSON.')

    def handle(self, *args, **options):
        path = options['config']
        try:
            config = load_config(path)
        except OSError as exc:
            raise file_failure(path, exc.strerror or exc)
        except ConfigError as exc:
            raise config_failure(exc)

        samples = config.bench_samples if options['samples'] is None else options['samples']
        table = bench(samples, warmup=config.bench_warmup, seed=config.seed)
        if options['json']:
            self.stdout.write(render_json(BenchTableSerializer(table).data), ending='')
        else:
            self.write_lines(table_lines(table))
