"""
Generating consistent triples and deciding membership by brute force.
"""
import logging
import random
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import networkx as nx
from networkx.algorithms import isomorphism

from tgg_sync import defaults, exceptions
from tgg_sync.grammar import Tgg, TggRule
from tgg_sync.graph import TripleGraph, isomorphisms, to_networkx
from tgg_sync.matching import apply, conds_hold, find_matches

logger = logging.getLogger(__name__)

YES = 'YES'
NO = 'NO'
UNKNOWN = 'UNKNOWN'

Selector = Union[int, Dict[str, str]]


@dataclass
class Step:
    """ One rule application: every rule element bound to a host id."""
    rule: str
    bindings: Dict[str, str] = field(default_factory=dict)
    created: Tuple[str, ...] = ()


def _select(rule: TggRule, host: TripleGraph, tgg: Tgg, selector: Selector,
            step: int):
    seed = {}
    ids = {}
    if isinstance(selector, dict):
        for name, host_id in selector.items():
            if name in rule.create:
                ids[name] = host_id
            else:
                seed[name] = host_id
    try:
        matches = find_matches(rule.rule_graph().lhs(), host, tgg.types, seed,
                               check_conds=False)
    except exceptions.IncompatibleSeed:
        matches = []
    index = selector if isinstance(selector, int) else 0
    if index >= len(matches) or index < 0:
        raise exceptions.NotApplicable(params={'rule': rule.name,
                                               'step': step})
    return matches[index], ids


def apply_rule(rule: TggRule, host: TripleGraph, tgg: Tgg, match,
               ids: Optional[Dict[str, str]] = None,
               supplied=None) -> Step:
    application = apply(rule.rule_graph(), match, host, tgg.types,
                        supplied=supplied, ids=ids)
    bindings = dict(match.bindings)
    bindings.update(application.created)
    return Step(rule.name, bindings,
                tuple(sorted(application.created.values())))


def derive(tgg: Tgg,
           schedule: Optional[Sequence[Tuple[str, Selector]]] = None,
           seed: Optional[int] = None, length: int = 0,
           host: Optional[TripleGraph] = None,
           attrs: Optional[Sequence[Dict]] = None
           ) -> Tuple[TripleGraph, List[Step]]:
    """
    Applies scheduled rules, or ``length`` random applications when
    ``schedule`` is None. A random step picks one of the applicable rules
    and applies it at its first canonical match.

    Selectors are indexes into the canonical match list or partial bindings;
    bindings of created elements fix their ids. ``attrs`` optionally supplies
    attribute values per scheduled step as ``{(element, attr): value}``.
    """
    host = host if host is not None else TripleGraph()
    trace: List[Step] = []
    if schedule is not None:
        for index, (rule_name, selector) in enumerate(schedule):
            try:
                rule = tgg.rule(rule_name)
            except KeyError:
                raise exceptions.NotApplicable(params={'rule': rule_name,
                                                       'step': index})
            match, ids = _select(rule, host, tgg, selector, index)
            supplied = attrs[index] if attrs else None
            trace.append(apply_rule(rule, host, tgg, match, ids, supplied))
        return host, trace

    rng = random.Random(defaults.get_seed(seed))
    for index in range(length):
        applicable = []
        for rule in sorted(tgg.rules, key=lambda r: r.name):
            matches = find_matches(rule.rule_graph().lhs(), host, tgg.types,
                                   check_conds=False)
            if matches:
                applicable.append((rule, matches))
        if not applicable:
            logger.info('random derivation stuck after %d steps', index)
            break
        rule, matches = rng.choice(applicable)
        trace.append(apply_rule(rule, host, tgg, matches[0]))
    return host, trace


def _constraint_graph(host: TripleGraph, tgg: Tgg,
                      trace: Iterable[Step]) -> nx.DiGraph:
    """ Structure plus attribute equations as labelled arcs."""
    graph = to_networkx(host)
    for _, data in graph.nodes(data=True):
        data['text'] = '/'.join(data['label'])
    for _, _, data in graph.edges(data=True):
        data['text'] = data['label']
    for step in trace:
        for cond in tgg.rule(step.rule).conds:
            left = step.bindings[cond.left.element]
            if cond.right is None:
                data = graph.nodes[left]
                data['text'] += f'|{cond.left.attr}={cond.constant}'
                continue
            right = step.bindings[cond.right.element]
            label = f'={cond.left.attr}:{cond.right.attr}'
            if graph.has_edge(left, right):
                graph.edges[left, right]['text'] += label
            else:
                graph.add_edge(left, right, text=label)
    return graph


def _same_text(a: dict, b: dict) -> bool:
    return a['text'] == b['text']


class _Oracle:
    def __init__(self, tgg: Tgg, host: TripleGraph, max_depth: int):
        self.tgg = tgg
        self.host = host
        self.max_depth = max_depth
        self.limits = host.counts()
        # hash -> constraint graphs of visited states
        self.seen: Dict[str, List[nx.DiGraph]] = {}
        self.cut = False
        self.rules = sorted((r for r in tgg.rules if r.create),
                            key=lambda r: r.name)

    @property
    def states(self) -> int:
        return sum(len(graphs) for graphs in self.seen.values())

    def visited(self, graph: nx.DiGraph) -> bool:
        """ Whether an isomorphic state was seen; records it otherwise."""
        key = nx.weisfeiler_lehman_graph_hash(graph, node_attr='text',
                                              edge_attr='text')
        graphs = self.seen.setdefault(key, [])
        for other in graphs:
            matcher = isomorphism.DiGraphMatcher(
                graph, other, node_match=_same_text, edge_match=_same_text)
            if matcher.is_isomorphic():
                return True
        graphs.append(graph)
        return False

    def fits(self, current: TripleGraph) -> bool:
        return all(count <= self.limits.get(key, 0)
                   for key, count in current.counts().items())

    def accepts(self, current: TripleGraph, trace: List[Step]) -> bool:
        for iso in isomorphisms(current, self.host):
            if all(conds_hold(self.tgg.rule(step.rule).conds, self.host,
                              {k: iso[v] for k, v in step.bindings.items()})
                   for step in trace):
                return True
        return False

    def search(self, current: TripleGraph, trace: List[Step]) -> bool:
        if current.counts() == self.limits:
            return self.accepts(current, trace)
        if len(trace) >= self.max_depth:
            self.cut = True
            return False
        for rule in self.rules:
            matches = find_matches(rule.rule_graph().lhs(), current,
                                   self.tgg.types, check_conds=False)
            for match in matches:
                child = current.copy()
                step = apply_rule(rule, child, self.tgg, match)
                if not self.fits(child):
                    continue
                if self.visited(_constraint_graph(child, self.tgg,
                                                  trace + [step])):
                    continue
                if self.search(child, trace + [step]):
                    return True
        return False


def member_bruteforce(tgg: Tgg, host: TripleGraph,
                      max_depth: Optional[int] = None) -> str:
    """
    YES if some derivation of at most ``max_depth`` steps yields a triple
    isomorphic to ``host`` whose attributes satisfy the applied equations;
    NO if the search space was exhausted; UNKNOWN if depth cut it short.
    """
    if max_depth is None:
        max_depth = defaults.MEMBERSHIP_MAX_DEPTH
    if not host.is_total():
        return NO
    oracle = _Oracle(tgg, host, max_depth)
    if oracle.search(TripleGraph(), []):
        return YES
    result = UNKNOWN if oracle.cut else NO
    logger.debug('membership search visited %d states: %s',
                 oracle.states, result)
    return result
