from tgg_sync.conflicts import detect_all, dumps, format_table
from tgg_sync.management.base import DeltaCommand
from tgg_sync.restore import prepare


class Command(DeltaCommand):
    help = 'Detects conflicts between concurrent source and target deltas.'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--format', choices=('json', 'table'),
                            default='json')

    def run(self, **options):
        ops, host, pg = self.load(options)
        state = prepare(ops, host, pg, *self.load_deltas(options))
        conflicts = detect_all(state.dpg, ops)
        if options['format'] == 'table':
            self.stdout.write(format_table(conflicts))
        else:
            self.stdout.write(dumps(conflicts, state.dpg))
