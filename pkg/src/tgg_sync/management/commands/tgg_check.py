import sys

from tgg_sync.graph import validate
from tgg_sync.management.base import ModelCommand, write_text
from tgg_sync.precedence import verify_pg


class Command(ModelCommand):
    help = ('Parses a precedence graph for a triple graph and verifies it; '
            'exits with 1 when diagnostics are found.')

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--pg-out', help='write the precedence graph here')

    def run(self, **options):
        ops, host, pg = self.load(options)
        diagnostics = validate(host, ops.types)
        diagnostics.extend(verify_pg(ops.tgg, host, pg))
        if options.get('pg_out'):
            write_text(options['pg_out'], self.dump(pg.to_dict()))
        self.stdout.write(self.dump({
            'nodes': len(pg),
            'diagnostics': [d.__dict__ for d in diagnostics],
        }))
        if diagnostics:
            sys.exit(1)
