from tgg_sync.dpg import annotation_rows
from tgg_sync.management.base import DeltaCommand
from tgg_sync.restore import prepare


class Command(DeltaCommand):
    help = 'Applies both deltas and prints the delta precedence graph.'

    def run(self, **options):
        ops, host, pg = self.load(options)
        state = prepare(ops, host, pg, *self.load_deltas(options))
        dpg = state.dpg
        self.stdout.write(self.dump({
            'annotations': annotation_rows(dpg),
            'unpropagated': sorted(dpg.unpropagated),
            'touched': sorted(dpg.touched),
        }))
