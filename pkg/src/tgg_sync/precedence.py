"""
Precedence graphs: rule applications covering a triple graph.

Each node is a match of a rule's consistency pattern. An element is created
by exactly one node; a node depends on the nodes creating its context.
"""
import heapq
import logging
import re
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Optional, Set, Tuple

import networkx as nx

from tgg_sync import defaults, exceptions
from tgg_sync.grammar import Tgg, TggRule
from tgg_sync.graph import CORR, AttrValue, Diagnostic, TripleGraph
from tgg_sync.matching import Pattern, PatternMatch, find_matches, iter_matches
from tgg_sync.operationalize import BWD, FWD, Operationalization

logger = logging.getLogger(__name__)

BASE = 'base'

_DIGITS = re.compile(r'\d+')


def label_numbers(ids: Iterable[str]) -> List[int]:
    """ Numbers embedded in element ids, ascending."""
    return sorted(int(d) for x in ids for d in _DIGITS.findall(x))


@dataclass
class ConsistencyMatch:
    id: str
    rule: str
    bindings: Dict[str, str]
    created: FrozenSet[str]
    context: FrozenSet[str]
    kind: str = BASE
    # attribute values of bound nodes when the match was recorded
    attrs: Dict[str, Dict[str, AttrValue]] = field(default_factory=dict)
    src_ann: Set[str] = field(default_factory=set)
    trg_ann: Set[str] = field(default_factory=set)

    @property
    def elements(self) -> FrozenSet[str]:
        return self.created | self.context

    @property
    def is_candidate(self) -> bool:
        return self.kind != BASE

    def to_dict(self) -> dict:
        return {
            'id': self.id,
            'rule': self.rule,
            'kind': self.kind,
            'bindings': dict(sorted(self.bindings.items())),
            'created': sorted(self.created),
            'context': sorted(self.context),
            'attrs': {k: dict(sorted(v.items()))
                      for k, v in sorted(self.attrs.items())},
            'srcAnn': sorted(self.src_ann),
            'trgAnn': sorted(self.trg_ann),
        }

    @classmethod
    def from_dict(cls, data: dict) -> 'ConsistencyMatch':
        return cls(data['id'], data['rule'], dict(data['bindings']),
                   frozenset(data['created']), frozenset(data['context']),
                   data.get('kind', BASE),
                   {k: dict(v) for k, v in data.get('attrs', {}).items()},
                   set(data.get('srcAnn', ())), set(data.get('trgAnn', ())))


def snapshot(host: TripleGraph,
             elements: Iterable[str]) -> Dict[str, Dict[str, AttrValue]]:
    return {x: dict(host.nodes[x].attrs) for x in elements
            if x in host.nodes and host.nodes[x].side != CORR}


def make_match(node_id: str, rule: TggRule, bindings: Dict[str, str],
               host: Optional[TripleGraph] = None,
               kind: str = BASE) -> ConsistencyMatch:
    created = frozenset(bindings[n] for n in rule.create if n in bindings)
    context = frozenset(v for n, v in bindings.items()
                        if n not in rule.create)
    attrs = snapshot(host, bindings.values()) if host is not None else {}
    return ConsistencyMatch(node_id, rule.name, dict(bindings), created,
                            context, kind, attrs)


class PrecedenceGraph:
    """ Nodes with creator/user indexes and a dependency DAG."""

    def __init__(self):
        self.nodes: Dict[str, ConsistencyMatch] = {}
        self.creator: Dict[str, str] = {}
        self.users: Dict[str, Set[str]] = {}
        self.deps = nx.DiGraph()

    def __len__(self):
        return len(self.nodes)

    def __contains__(self, node_id: str) -> bool:
        return node_id in self.nodes

    def __iter__(self):
        return iter(self.nodes.values())

    def new_label(self, rule: str, created: Iterable[str],
                  suffix: str = '') -> str:
        """ Rule name plus the smallest number found in created node ids."""
        numbers = label_numbers(created)
        base = f'{rule}{numbers[0]}' if numbers else f'{rule}{len(self) + 1}'
        label = f'{base}{suffix}'
        index = 1
        while label in self.nodes:
            index += 1
            label = f'{base}_{index}{suffix}'
        return label

    def add(self, node: ConsistencyMatch):
        if node.id in self.nodes:
            raise ValueError(f'duplicate precedence node {node.id}')
        clash = [x for x in node.created if x in self.creator]
        if clash:
            raise ValueError(f'{sorted(clash)} already created by '
                             f'{self.creator[clash[0]]}')
        self.nodes[node.id] = node
        self.deps.add_node(node.id)
        for element in node.created:
            self.creator[element] = node.id
            for user in self.users.get(element, ()):
                self.deps.add_edge(user, node.id)
        for element in node.context:
            self.users.setdefault(element, set()).add(node.id)
            if element in self.creator:
                self.deps.add_edge(node.id, self.creator[element])

    def remove(self, node_id: str) -> ConsistencyMatch:
        node = self.nodes.pop(node_id)
        self.deps.remove_node(node_id)
        for element in node.created:
            if self.creator.get(element) == node_id:
                del self.creator[element]
        for element in node.context:
            users = self.users.get(element)
            if users is not None:
                users.discard(node_id)
                if not users:
                    del self.users[element]
        return node

    def replace(self, node_id: str, node: ConsistencyMatch):
        self.remove(node_id)
        self.add(node)

    def dependencies(self, node_id: str) -> List[str]:
        return sorted(self.deps.successors(node_id))

    def dependents(self, node_id: str) -> List[str]:
        return sorted(self.deps.predecessors(node_id))

    def dependents_closure(self, node_id: str) -> Set[str]:
        return set(nx.ancestors(self.deps, node_id))

    def topological(self) -> List[str]:
        """ Node ids, dependencies before dependents."""
        order = nx.lexicographical_topological_sort(self.deps.reverse(),
                                                    key=str)
        return list(order)

    def covered(self) -> Set[str]:
        return set(self.creator)

    def copy(self) -> 'PrecedenceGraph':
        other = PrecedenceGraph()
        for node in self.nodes.values():
            other.add(ConsistencyMatch.from_dict(node.to_dict()))
        return other

    def to_dict(self) -> dict:
        return {
            'nodes': [self.nodes[k].to_dict() for k in sorted(self.nodes)],
            'edges': sorted([a, b] for a, b in self.deps.edges()),
        }

    @classmethod
    def from_dict(cls, data: dict) -> 'PrecedenceGraph':
        pg = cls()
        for item in data['nodes']:
            pg.add(ConsistencyMatch.from_dict(item))
        return pg


def pg_from_trace(tgg: Tgg, trace, host: Optional[TripleGraph] = None
                  ) -> PrecedenceGraph:
    """ One node per derivation step, labelled by rule and step number."""
    pg = PrecedenceGraph()
    for index, step in enumerate(trace, start=1):
        rule = tgg.rule(step.rule)
        pg.add(make_match(f'{step.rule}{index}', rule, step.bindings, host))
    return pg


class _Parser:
    def __init__(self, tgg: Tgg, host: TripleGraph,
                 ops: Optional[Operationalization], budget: int):
        self.tgg = tgg
        self.host = host
        self.budget = budget
        self.spent = 0
        self.patterns: Dict[str, Pattern] = {}
        for rule in tgg.rules:
            nacs = rule.nacs
            if ops is not None:
                nacs = nacs + ops.filter_nacs.get((rule.name, FWD), ()) + \
                    ops.filter_nacs.get((rule.name, BWD), ())
            self.patterns[rule.name] = Pattern(rule.nodes, rule.edges, nacs,
                                               rule.conds)

    def accept_for(self, rule: TggRule, marked: Set[str]):
        def accept(name: str, host_id: str) -> bool:
            return (host_id in marked) != (name in rule.create)
        return accept

    def matches(self, rule: TggRule, marked: Set[str],
                seed: Optional[Dict[str, str]] = None,
                lazy: bool = False):
        pattern = self.patterns[rule.name]
        accept = self.accept_for(rule, marked)

        def visible(host_id):
            return host_id in marked

        try:
            if lazy:
                return iter_matches(pattern, self.host, self.tgg.types, seed,
                                    accept, visible)
            return find_matches(pattern, self.host, self.tgg.types, seed,
                                accept, visible)
        except exceptions.IncompatibleSeed:
            return iter(()) if lazy else []

    def seeds_for(self, rule: TggRule, element: str) -> List[str]:
        """ Created rule elements that could bind ``element``."""
        host = self.host
        types = self.tgg.types
        names = []
        for name in sorted(rule.create):
            node = rule.pattern.node(name)
            if node is not None:
                host_node = host.nodes.get(element)
                if host_node is None or host_node.side != node.side:
                    continue
                if node.side == CORR:
                    if host_node.type == node.type:
                        names.append(name)
                elif types.is_subtype(node.side, host_node.type, node.type):
                    names.append(name)
            else:
                edge = rule.pattern.edge(name)
                host_edge = host.edges.get(element)
                if host_edge is not None and host_edge.type == edge.type \
                        and host_edge.side == edge.side:
                    names.append(name)
        return names

    def radius(self) -> int:
        return max((len(r.nodes) + len(r.edges) for r in self.tgg.rules),
                   default=1)

    def greedy(self) -> Optional[List[Tuple[TggRule, PatternMatch]]]:
        marked: Set[str] = set()
        chosen = []
        pending = sorted(self.host.elements())
        queued = set(pending)
        heapq.heapify(pending)
        radius = self.radius()
        while pending:
            element = heapq.heappop(pending)
            queued.discard(element)
            if element in marked:
                continue
            match = self.first_at(element, marked)
            if match is None:
                continue
            rule, found = match
            created = {found.bindings[n] for n in rule.create}
            marked |= created
            chosen.append(match)
            for x in self.host.vicinity(created, radius) - marked - queued:
                heapq.heappush(pending, x)
                queued.add(x)
        if len(marked) != len(self.host):
            return None
        return chosen

    def first_at(self, element: str, marked: Set[str]):
        for rule in self.tgg.rules:
            for name in self.seeds_for(rule, element):
                try:
                    for match in self.matches(rule, marked, {name: element},
                                              lazy=True):
                        return rule, match
                except exceptions.IncompatibleSeed:
                    continue
        return None

    def complete(self) -> List[Tuple[TggRule, PatternMatch]]:
        failed: Set[FrozenSet[str]] = set()
        total = len(self.host)

        def search(marked: FrozenSet[str], chosen):
            if len(marked) == total:
                return chosen
            if marked in failed:
                return None
            self.spent += 1
            if self.spent > self.budget:
                raise exceptions.BudgetExhausted(
                    params={'budget': self.budget})
            for rule in self.tgg.rules:
                for match in self.matches(rule, set(marked)):
                    created = frozenset(match.bindings[n]
                                        for n in rule.create)
                    result = search(marked | created,
                                    chosen + [(rule, match)])
                    if result is not None:
                        return result
            failed.add(marked)
            return None

        result = search(frozenset(), [])
        if result is None:
            raise exceptions.NoCover(params={'uncovered': total})
        return result


def parse_pg(tgg: Tgg, host: TripleGraph,
             ops: Optional[Operationalization] = None,
             budget_factor: Optional[int] = None) -> PrecedenceGraph:
    """
    Finds a precedence graph covering ``host``.

    A greedy marking parse is tried first; when it gets stuck a complete
    search over marked sets runs with a budget of ``budget_factor`` times
    the number of elements.
    """
    if budget_factor is None:
        budget_factor = defaults.PARSE_BUDGET_FACTOR
    budget = max(budget_factor * len(host), budget_factor)
    parser = _Parser(tgg, host, ops, budget)
    chosen = parser.greedy()
    if chosen is None:
        logger.info('greedy parse got stuck, running complete search')
        chosen = parser.complete()
    pg = PrecedenceGraph()
    for rule, match in chosen:
        created = [match.bindings[n] for n in rule.create
                   if rule.pattern.node(n) is not None]
        if not created:
            created = [match.bindings[n] for n in rule.create]
        label = pg.new_label(rule.name, created)
        pg.add(make_match(label, rule, match.bindings, host))
    logger.debug('parsed precedence graph with %d nodes', len(pg))
    return pg


def verify_pg(tgg: Tgg, host: TripleGraph,
              pg: PrecedenceGraph) -> List[Diagnostic]:
    """ Acyclicity, coverage, match validity and dependency edges."""
    diagnostics = []
    if not nx.is_directed_acyclic_graph(pg.deps):
        cycle = nx.find_cycle(pg.deps)
        diagnostics.append(Diagnostic('ACYCLICITY', cycle[0][0],
                                      f'cycle through {len(cycle)} nodes'))
    creators: Dict[str, List[str]] = {}
    for node in pg:
        for element in node.created:
            creators.setdefault(element, []).append(node.id)
    for element in sorted(host.elements()):
        owners = creators.get(element, [])
        if not owners:
            diagnostics.append(Diagnostic('COVERAGE', element,
                                          'not created by any node'))
        elif len(owners) > 1:
            diagnostics.append(Diagnostic('COVERAGE', element,
                                          f'created by {sorted(owners)}'))
    for element in sorted(set(creators) - set(host.elements())):
        diagnostics.append(Diagnostic('COVERAGE', element,
                                      'not in the triple graph'))
    for node in sorted(pg, key=lambda n: n.id):
        try:
            rule = tgg.rule(node.rule)
        except KeyError:
            diagnostics.append(Diagnostic('MATCH', node.id, 'unknown rule'))
            continue
        seed = {k: v for k, v in node.bindings.items() if v in host}
        ok = len(seed) == len(rule.names()) and \
            set(node.bindings) == set(rule.names())
        if ok:
            try:
                ok = bool(find_matches(Pattern(rule.nodes, rule.edges, (),
                                               rule.conds),
                                       host, tgg.types, seed))
            except exceptions.IncompatibleSeed:
                ok = False
        if not ok:
            diagnostics.append(Diagnostic('MATCH', node.id,
                                          'bindings are not a match'))
    expected = {(node.id, creators[x][0]) for node in pg
                for x in node.context if x in creators}
    actual = set(pg.deps.edges())
    for a, b in sorted(expected ^ actual):
        diagnostics.append(Diagnostic('DEPENDENCY', a, f'edge to {b}'))
    return diagnostics


def element_dependencies(pg: PrecedenceGraph) -> nx.DiGraph:
    """ x -> y when y is context of the node creating x."""
    graph = nx.DiGraph()
    for node in pg:
        graph.add_nodes_from(node.created)
        for x in node.created:
            for y in node.context:
                graph.add_edge(x, y)
    return graph
