"""
Delta precedence graphs.

Base nodes of a precedence graph are annotated per side with

* ``-`` every element the node created on that side is gone,
* ``/`` some of them are gone, or a context element is missing,
* ``#`` an attribute equation is violated by a value changed on that side,
* ``n`` a filter NAC of the forward/backward rule is now violated.

Candidate nodes are matches of source/target patterns binding unpropagated
elements: ``+`` when all of them are new, ``*`` when one was propagated
before; the untouched side gets ``u``.
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Set, Tuple

import networkx as nx

from tgg_sync import exceptions
from tgg_sync.graph import SIDES, SOURCE, TARGET, TripleGraph
from tgg_sync.matching import (attr_value, conds_hold, find_matches,
                               nac_violated)
from tgg_sync.operationalize import BWD, FWD, Operationalization
from tgg_sync.precedence import (ConsistencyMatch, PrecedenceGraph,
                                 label_numbers)

logger = logging.getLogger(__name__)

PLUS = '+'
MINUS = '-'
STAR = '*'
SLASH = '/'
HASH = '#'
UNTOUCHED = 'u'
NAC = 'n'

SYMBOLS = (PLUS, MINUS, STAR, SLASH, HASH, UNTOUCHED, NAC)
BREAKING = frozenset({MINUS, SLASH, NAC})

Annotation = Tuple[Set[str], Set[str]]


def side_names(ops: Operationalization, rule: str, side: str,
               created: Optional[bool] = None) -> List[str]:
    return ops.tgg.rule(rule).names(side, created)


def node_side_elements(ops: Operationalization, node: ConsistencyMatch,
                       side: str, created: bool) -> List[str]:
    return [node.bindings[n]
            for n in side_names(ops, node.rule, side, created)
            if n in node.bindings]


def changed_slots(ops: Operationalization, node: ConsistencyMatch,
                  host: TripleGraph) -> Dict[str, Set[str]]:
    """ Sides whose slots in violated equations differ from the snapshot."""
    rule = ops.tgg.rule(node.rule)
    result: Dict[str, Set[str]] = {side: set() for side in SIDES}
    for cond in rule.conds:
        if not all(s.element in node.bindings and
                   node.bindings[s.element] in host for s in cond.slots):
            continue
        if conds_hold((cond,), host, node.bindings):
            continue
        for slot in cond.slots:
            host_id = node.bindings[slot.element]
            side = host.side_of(host_id)
            before = node.attrs.get(host_id, {}).get(slot.attr)
            if attr_value(host, node.bindings, slot) != before:
                result[side].add(host_id)
    return result


def annotate_node(ops: Operationalization, node: ConsistencyMatch,
                  host: TripleGraph) -> Annotation:
    """ Annotation pair of a base node against ``host``."""
    result = []
    changed = changed_slots(ops, node, host)
    for side, direction in ((SOURCE, FWD), (TARGET, BWD)):
        ann: Set[str] = set()
        created = node_side_elements(ops, node, side, True)
        context = node_side_elements(ops, node, side, False)
        absent = [x for x in created if x not in host]
        if created and len(absent) == len(created):
            ann.add(MINUS)
        elif absent or any(x not in host for x in context):
            ann.add(SLASH)
        if changed[side]:
            ann.add(HASH)
        binding = {k: v for k, v in node.bindings.items() if v in host}
        for nac in ops.filter_nacs.get((node.rule, direction), ()):
            refs = {e.source for e in nac.edges} | {e.target for e in nac.edges}
            refs -= {n.name for n in nac.nodes}
            if not refs <= set(binding):
                continue
            if nac_violated(nac, host, ops.types, binding):
                ann.add(NAC)
                break
        result.append(ann)
    return result[0], result[1]


@dataclass
class DeltaPrecedenceGraph:
    pg: PrecedenceGraph
    host: TripleGraph
    annotations: Dict[str, Annotation] = field(default_factory=dict)
    candidates: Dict[str, ConsistencyMatch] = field(default_factory=dict)
    unpropagated: Set[str] = field(default_factory=set)
    touched: Set[str] = field(default_factory=set)
    # element -> candidates creating it / using it as context
    cand_creators: Dict[str, Set[str]] = field(default_factory=dict)
    cand_users: Dict[str, Set[str]] = field(default_factory=dict)

    def node(self, node_id: str) -> ConsistencyMatch:
        if node_id in self.candidates:
            return self.candidates[node_id]
        return self.pg.nodes[node_id]

    def __contains__(self, node_id: str) -> bool:
        return node_id in self.candidates or node_id in self.pg

    def ann(self, node_id: str) -> Annotation:
        if node_id in self.candidates:
            node = self.candidates[node_id]
            return node.src_ann, node.trg_ann
        return self.annotations.get(node_id, (set(), set()))

    def is_broken(self, node_id: str) -> bool:
        src, trg = self.ann(node_id)
        return bool((src | trg) & BREAKING)

    def is_intact(self, node_id: str) -> bool:
        return node_id in self.pg and not self.is_broken(node_id)

    def annotated(self) -> List[str]:
        """ Base nodes with a non-empty annotation, sorted."""
        return sorted(k for k, (s, t) in self.annotations.items() if s or t)

    def broken(self) -> List[str]:
        return [k for k in self.annotated() if self.is_broken(k)]

    def covered(self, element: str) -> bool:
        """ Created by an intact base node."""
        creator = self.pg.creator.get(element)
        return creator is not None and not self.is_broken(creator)

    def creators(self, element: str) -> List[str]:
        result = sorted(self.cand_creators.get(element, ()))
        if element in self.pg.creator:
            result.insert(0, self.pg.creator[element])
        return result

    def dependents(self, node_id: str) -> Set[str]:
        node = self.node(node_id)
        result = set()
        for element in node.created:
            result |= self.pg.users.get(element, set())
            result |= self.cand_users.get(element, set())
        result.discard(node_id)
        return result

    def dependencies(self, node_id: str) -> Set[str]:
        node = self.node(node_id)
        result = set()
        for element in node.context:
            result.update(self.creators(element))
        result.discard(node_id)
        return result

    def dependents_closure(self, node_id: str) -> Set[str]:
        seen: Set[str] = set()
        stack = [node_id]
        while stack:
            for other in self.dependents(stack.pop()):
                if other not in seen and other != node_id:
                    seen.add(other)
                    stack.append(other)
        return seen

    def candidate_order(self, ids: Iterable[str]) -> List[str]:
        """ Dependencies first, ties broken by rule name and created ids."""
        ids = set(ids)
        graph = nx.DiGraph()
        graph.add_nodes_from(ids)
        for a in ids:
            for b in self.dependencies(a) & ids:
                graph.add_edge(b, a)

        def key(node_id):
            node = self.node(node_id)
            return node.rule, sorted(node.created), node_id

        try:
            return list(nx.lexicographical_topological_sort(graph, key=key))
        except nx.NetworkXUnfeasible:
            logger.warning('cyclic candidate dependencies among %s',
                           sorted(ids))
            return sorted(ids, key=key)

    def all_ids(self) -> List[str]:
        return sorted(self.pg.nodes) + sorted(self.candidates)

    def to_dict(self) -> dict:
        nodes = []
        for node_id in self.all_ids():
            data = self.node(node_id).to_dict()
            src, trg = self.ann(node_id)
            data['srcAnn'] = sorted(src, key=SYMBOLS.index)
            data['trgAnn'] = sorted(trg, key=SYMBOLS.index)
            nodes.append(data)
        edges = {(a, b) for a, b in self.pg.deps.edges()}
        for node_id in self.candidates:
            for other in self.dependencies(node_id):
                edges.add((node_id, other))
            for other in self.dependents(node_id):
                edges.add((other, node_id))
        return {'nodes': nodes, 'edges': sorted([a, b] for a, b in edges),
                'unpropagated': sorted(self.unpropagated)}


def relevant_nodes(pg: PrecedenceGraph, touched: Iterable[str]) -> Set[str]:
    result = set()
    for element in touched:
        if element in pg.creator:
            result.add(pg.creator[element])
        result |= pg.users.get(element, set())
    return result


def unpropagated(host: TripleGraph, pg: PrecedenceGraph,
                 touched: Iterable[str], ops: Operationalization,
                 annotations: Optional[Dict[str, Annotation]] = None
                 ) -> Set[str]:
    """
    Elements still to be propagated: touched elements without an intact
    creator, and surviving elements created by broken nodes.
    """
    touched = set(touched)
    if annotations is None:
        annotations = {n: annotate_node(ops, pg.nodes[n], host)
                       for n in relevant_nodes(pg, touched)}

    def broken(node_id):
        src, trg = annotations.get(node_id, (set(), set()))
        return bool((src | trg) & BREAKING)

    result = set()
    for element in touched:
        if element not in host:
            continue
        creator = pg.creator.get(element)
        if creator is None or broken(creator):
            result.add(element)
    for node_id, _ in annotations.items():
        if broken(node_id):
            result |= {x for x in pg.nodes[node_id].created if x in host}
    return result


def _candidate_label(taken: Set[str], rule: str, created: Iterable[str],
                     host: TripleGraph, suffix: str) -> str:
    created = sorted(created)
    named = [x for x in created if x in host.nodes] or created
    numbers = label_numbers(named)
    base = f'{rule}{numbers[0]}' if numbers else rule
    label = f'{base}{suffix}'
    index = 1
    while label in taken:
        index += 1
        label = f'{base}_{index}{suffix}'
    return label


def find_candidates(ops: Operationalization, pg: PrecedenceGraph,
                    host: TripleGraph, pending: Set[str]
                    ) -> Dict[str, ConsistencyMatch]:
    """ Side-pattern matches anchored at unpropagated elements."""
    seen = set()
    found: List[ConsistencyMatch] = []
    for element in sorted(pending):
        side = host.side_of(element)
        if side not in SIDES:
            continue
        for rule in ops.tgg.rules:
            op = ops.side_pattern(side, rule.name)
            if not op.translates:
                continue

            def accept(name, host_id, op=op):
                if name in op.translates:
                    return host_id in pending
                return True

            for name in sorted(op.translates):
                try:
                    matches = find_matches(op.pattern, host, ops.types,
                                           {name: element}, accept)
                except exceptions.IncompatibleSeed:
                    continue
                for match in matches:
                    key = (rule.name, side,
                           frozenset(match.bindings.items()))
                    if key in seen:
                        continue
                    seen.add(key)
                    created = frozenset(match.bindings[n]
                                        for n in op.translates)
                    context = frozenset(v for k, v in match.bindings.items()
                                        if k not in op.translates)
                    node = ConsistencyMatch('', rule.name,
                                            dict(match.bindings), created,
                                            context, op.kind)
                    mark = STAR if any(x in pg.creator for x in created) \
                        else PLUS
                    if side == SOURCE:
                        node.src_ann, node.trg_ann = {mark}, {UNTOUCHED}
                    else:
                        node.src_ann, node.trg_ann = {UNTOUCHED}, {mark}
                    found.append(node)
    result: Dict[str, ConsistencyMatch] = {}
    taken = set(pg.nodes)
    found.sort(key=lambda n: (n.rule, sorted(n.created), n.kind))
    for node in found:
        suffix = "'" if node.kind.startswith('SRC') else "''"
        node.id = _candidate_label(taken, node.rule, node.created, host,
                                   suffix)
        taken.add(node.id)
        result[node.id] = node
    return result


def annotate(pg: PrecedenceGraph, host: TripleGraph, touched: Iterable[str],
             ops: Operationalization) -> DeltaPrecedenceGraph:
    """
    Annotates base nodes touching ``touched`` and enumerates candidates.

    Only nodes creating or using a touched element are examined, so cost
    follows the size of the change rather than the model.
    """
    touched = set(touched)
    annotations = {}
    for node_id in sorted(relevant_nodes(pg, touched)):
        src, trg = annotate_node(ops, pg.nodes[node_id], host)
        if src or trg:
            annotations[node_id] = (src, trg)
    pending = unpropagated(host, pg, touched, ops, annotations)
    dpg = DeltaPrecedenceGraph(pg, host, annotations, {}, pending, touched)
    dpg.candidates = find_candidates(ops, pg, host, pending)
    for node in dpg.candidates.values():
        for element in node.created:
            dpg.cand_creators.setdefault(element, set()).add(node.id)
        for element in node.context:
            dpg.cand_users.setdefault(element, set()).add(node.id)
    logger.debug('annotated %d base nodes, %d candidates, %d unpropagated',
                 len(annotations), len(dpg.candidates), len(pending))
    return dpg


def annotation_rows(dpg: DeltaPrecedenceGraph) -> List[dict]:
    """ Annotated base nodes, then candidates, as plain records."""
    rows = []
    for node_id in dpg.annotated() + sorted(dpg.candidates):
        src, trg = dpg.ann(node_id)
        rows.append({
            'node': node_id,
            'rule': dpg.node(node_id).rule,
            'candidate': node_id in dpg.candidates,
            'src': sorted(src, key=SYMBOLS.index),
            'trg': sorted(trg, key=SYMBOLS.index),
        })
    return rows
