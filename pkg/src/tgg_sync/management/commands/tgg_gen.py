import os

from tgg_sync import delta, graph
from tgg_sync.management.base import SyncCommand, write_text
from tgg_sync.scenarios import RATIOS, Scenario, gen_scenario


class Command(SyncCommand):
    help = ('Generates a consistent base model of the bundled grammar with '
            'concurrent deltas injecting a known number of conflicts.')

    def add_arguments(self, parser):
        parser.add_argument('--size', type=int, default=1000,
                            help='source and target node count')
        parser.add_argument('--changes', type=int, default=10)
        parser.add_argument('--ratio', type=float, default=1.0,
                            choices=RATIOS,
                            help='share of conflict-inducing changes')
        parser.add_argument('--seed', type=int)
        parser.add_argument('--out-dir', default='.',
                            help='where base.json and the deltas go')

    def run(self, **options):
        scenario = Scenario(options['size'], options['changes'],
                            options['ratio'], options.get('seed'))
        generated = gen_scenario(scenario)
        out = options['out_dir']
        write_text(os.path.join(out, 'base.json'),
                   graph.dumps(generated.host))
        write_text(os.path.join(out, 'source_delta.json'),
                   delta.dumps(generated.delta_s))
        write_text(os.path.join(out, 'target_delta.json'),
                   delta.dumps(generated.delta_t))
        self.stdout.write(self.dump({
            'nodes': sum(1 for n in generated.host.nodes.values()
                         if n.side != graph.CORR),
            'changes': scenario.changes,
            'expected': generated.expected,
        }))
