import json

from tgg_sync import defaults, graph, models, restore
from tgg_sync.management.base import (DeltaCommand, load_orchestration,
                                      read_text, write_text)


class Command(DeltaCommand):
    help = ('Synchronizes concurrent source and target deltas following an '
            'orchestration; the default one takes the source side.')

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--orch', help='orchestration JSON file')
        parser.add_argument('--out-source', help='synchronized source model')
        parser.add_argument('--out-target', help='synchronized target model')
        parser.add_argument('--report', help='run report JSON file')
        parser.add_argument('--store', metavar='SLUG',
                            help='persist the run under this grammar slug')
        parser.add_argument('--format', choices=('json', 'text'),
                            default='text')

    def run(self, **options):
        orch = load_orchestration(options.get('orch'))
        ops, host, pg = self.load(options)
        result = restore.run(ops, host, pg, *self.load_deltas(options),
                             orch=orch)
        for side, key in ((graph.SOURCE, 'out_source'),
                          (graph.TARGET, 'out_target')):
            if options.get(key):
                write_text(options[key], json.dumps(
                    result.model(side), indent=defaults.REPORT_INDENT,
                    sort_keys=True, ensure_ascii=False))
        if options.get('report'):
            write_text(options['report'], result.dumps())
        if options.get('store'):
            grammar, _ = models.Grammar.objects.get_or_create(
                slug=options['store'],
                defaults={'text': read_text(options['grammar'])})
            sync_run = models.SyncRun.objects.record(grammar, result, orch)
            self.stderr.write(f'stored run #{sync_run.pk}')
        if options['format'] == 'json':
            self.stdout.write(result.dumps())
        else:
            self.stdout.write(result.format_text())
