import json
import os
import sys
from typing import Optional, Tuple

from django.core.management import BaseCommand

from tgg_sync import defaults, delta, exceptions, graph, orchestration
from tgg_sync.grammar import Tgg, parse_grammar
from tgg_sync.operationalize import Operationalization, operationalize
from tgg_sync.precedence import PrecedenceGraph, parse_pg

ERROR_EXIT_CODE = 2


def read_text(path: str) -> str:
    try:
        with open(path, encoding='utf-8') as f:
            return f.read()
    except OSError as e:
        raise exceptions.InputError(params={'path': path,
                                            'reason': e.strerror})


def read_json(path: str):
    try:
        return json.loads(read_text(path))
    except ValueError as e:
        raise exceptions.InputError(params={'path': path, 'reason': str(e)})


def load_grammar(path: str) -> Tgg:
    return parse_grammar(read_text(path))


def load_triple(path: str) -> graph.TripleGraph:
    data = read_json(path)
    try:
        return graph.from_dict(data)
    except (KeyError, TypeError, ValueError) as e:
        raise exceptions.InputError(params={'path': path, 'reason': str(e)})


def load_delta(path: Optional[str], side: str) -> Optional[delta.Delta]:
    if not path:
        return None
    return delta.delta_from_dict(read_json(path), side)


def load_orchestration(path: Optional[str]
                       ) -> orchestration.Orchestration:
    if not path:
        return orchestration.default()
    return orchestration.from_dict(read_json(path))


def write_text(path: str, text: str):
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, 'w', encoding='utf-8') as f:
        f.write(text)
        if not text.endswith('\n'):
            f.write('\n')


class SyncCommand(BaseCommand):
    """
    Base for engine commands: module errors are printed to stderr as a JSON
    document and the process exits with code 2.
    """

    def handle(self, *args, **options):
        try:
            return self.run(**options)
        except exceptions.SyncError as e:
            self.stderr.write(json.dumps(e.as_json(), sort_keys=True,
                                         default=str))
            sys.exit(ERROR_EXIT_CODE)

    def run(self, **options):  # pragma: no cover
        raise NotImplementedError

    def dump(self, data) -> str:
        return json.dumps(data, indent=defaults.REPORT_INDENT, sort_keys=True,
                          ensure_ascii=False)


class ModelCommand(SyncCommand):
    """ Commands reading a grammar and a triple graph."""

    def add_arguments(self, parser):
        parser.add_argument('grammar', help='grammar text file')
        parser.add_argument('triple', help='triple graph JSON file')

    def load(self, options) -> Tuple[Operationalization, graph.TripleGraph,
                                     PrecedenceGraph]:
        tgg = load_grammar(options['grammar'])
        ops = operationalize(tgg)
        host = load_triple(options['triple'])
        return ops, host, parse_pg(tgg, host, ops)


class DeltaCommand(ModelCommand):
    """ Commands reading concurrent source and target deltas as well."""

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('source_delta', help='source delta JSON file')
        parser.add_argument('target_delta', help='target delta JSON file')

    def load_deltas(self, options):
        return (load_delta(options['source_delta'], graph.SOURCE),
                load_delta(options['target_delta'], graph.TARGET))
