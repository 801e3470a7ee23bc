"""
Typed attributed triple graphs.

A triple graph holds source and target nodes/edges plus correspondence nodes
referencing one source and one target node. Element ids are opaque strings
shared by all three parts and stay stable across deltas. A correspondence
reference whose node is missing is *dangling*; such triples are partial.
"""
import json
import logging
from collections import defaultdict
from dataclasses import dataclass, field
from typing import (Dict, FrozenSet, Iterable, Iterator, List, Optional, Set,
                    Tuple, Union)

import networkx as nx
from networkx.algorithms import isomorphism

logger = logging.getLogger(__name__)

SOURCE = 'src'
TARGET = 'trg'
CORR = 'corr'
SIDES = (SOURCE, TARGET)

STRING = 'string'
INTEGER = 'integer'
PRIMITIVES = (STRING, INTEGER)

AttrValue = Union[str, int]


def opposite(side: str) -> str:
    return TARGET if side == SOURCE else SOURCE


@dataclass(frozen=True)
class NodeType:
    name: str
    side: str
    attrs: Tuple[Tuple[str, str], ...] = ()
    parents: Tuple[str, ...] = ()

    def attr_kind(self, attr: str) -> Optional[str]:
        return dict(self.attrs).get(attr)


@dataclass(frozen=True)
class EdgeType:
    name: str
    side: str
    source: str
    target: str


@dataclass(frozen=True)
class CorrType:
    name: str
    source: str
    target: str


@dataclass
class TypeTriple:
    """ Source, target and correspondence type declarations."""
    node_types: Dict[Tuple[str, str], NodeType] = field(default_factory=dict)
    edge_types: Dict[Tuple[str, str], EdgeType] = field(default_factory=dict)
    corr_types: Dict[str, CorrType] = field(default_factory=dict)

    def node_type(self, side: str, name: str) -> Optional[NodeType]:
        return self.node_types.get((side, name))

    def edge_type(self, side: str, name: str) -> Optional[EdgeType]:
        return self.edge_types.get((side, name))

    def ancestors(self, side: str, name: str) -> List[str]:
        """ Type itself and all its super types, nearest first."""
        result = []
        stack = [name]
        while stack:
            current = stack.pop(0)
            if current in result:
                continue
            result.append(current)
            nt = self.node_type(side, current)
            if nt is not None:
                stack.extend(nt.parents)
        return result

    def is_subtype(self, side: str, sub: str, sup: str) -> bool:
        return sup in self.ancestors(side, sub)

    def attr_kind(self, side: str, type_name: str, attr: str) -> Optional[str]:
        for name in self.ancestors(side, type_name):
            nt = self.node_type(side, name)
            if nt is not None and nt.attr_kind(attr):
                return nt.attr_kind(attr)
        return None

    def attributes(self, side: str, type_name: str) -> Dict[str, str]:
        result = {}
        for name in reversed(self.ancestors(side, type_name)):
            nt = self.node_type(side, name)
            if nt is not None:
                result.update(dict(nt.attrs))
        return result

    def subtypes(self, side: str, name: str) -> FrozenSet[str]:
        return frozenset(nt.name for (s, _), nt in self.node_types.items()
                         if s == side and self.is_subtype(side, nt.name, name))

    def check(self) -> List[str]:
        """ Returns problems of the declarations themselves."""
        problems = []
        for et in self.edge_types.values():
            for end in (et.source, et.target):
                if self.node_type(et.side, end) is None:
                    problems.append(f'edge type {et.name} references unknown '
                                    f'{et.side} node type {end}')
        for ct in self.corr_types.values():
            if self.node_type(SOURCE, ct.source) is None:
                problems.append(f'corr type {ct.name} references unknown '
                                f'source type {ct.source}')
            if self.node_type(TARGET, ct.target) is None:
                problems.append(f'corr type {ct.name} references unknown '
                                f'target type {ct.target}')
        hierarchy = {side: nx.DiGraph() for side in SIDES}
        for (side, name), nt in self.node_types.items():
            hierarchy[side].add_node(name)
            for parent in nt.parents:
                if self.node_type(side, parent) is None:
                    problems.append(f'type {name} extends unknown {parent}')
                hierarchy[side].add_edge(name, parent)
        for side, graph in hierarchy.items():
            if not nx.is_directed_acyclic_graph(graph):
                problems.append(f'{side} inheritance is cyclic')
        return problems


@dataclass
class Node:
    id: str
    side: str
    type: str
    attrs: Dict[str, AttrValue] = field(default_factory=dict)
    # correspondence nodes only
    src: Optional[str] = None
    trg: Optional[str] = None

    def copy(self) -> 'Node':
        return Node(self.id, self.side, self.type, dict(self.attrs),
                    self.src, self.trg)


@dataclass(frozen=True)
class Edge:
    id: str
    side: str
    type: str
    source: str
    target: str


@dataclass(frozen=True)
class Diagnostic:
    kind: str
    element: str
    message: str = ''
    partial: bool = False


class TripleGraph:
    """ Mutable triple graph with type and incidence indexes."""

    def __init__(self):
        self.nodes: Dict[str, Node] = {}
        self.edges: Dict[str, Edge] = {}
        self._out: Dict[str, Set[str]] = defaultdict(set)
        self._in: Dict[str, Set[str]] = defaultdict(set)
        self._by_type: Dict[Tuple[str, str], Set[str]] = defaultdict(set)
        self._corr_by_src: Dict[str, Set[str]] = defaultdict(set)
        self._corr_by_trg: Dict[str, Set[str]] = defaultdict(set)
        self._counter = 0

    # construction

    def add_node(self, node_id: str, side: str, type_name: str,
                 attrs: Optional[Dict[str, AttrValue]] = None) -> Node:
        if node_id in self:
            raise ValueError(f'duplicate element id {node_id}')
        node = Node(node_id, side, type_name, dict(attrs or {}))
        self.nodes[node_id] = node
        self._by_type[side, type_name].add(node_id)
        return node

    def add_corr(self, node_id: str, type_name: str, src: Optional[str],
                 trg: Optional[str]) -> Node:
        if node_id in self:
            raise ValueError(f'duplicate element id {node_id}')
        node = Node(node_id, CORR, type_name, {}, src, trg)
        self.nodes[node_id] = node
        self._by_type[CORR, type_name].add(node_id)
        if src is not None:
            self._corr_by_src[src].add(node_id)
        if trg is not None:
            self._corr_by_trg[trg].add(node_id)
        return node

    def add_edge(self, edge_id: str, side: str, type_name: str, source: str,
                 target: str) -> Edge:
        if edge_id in self:
            raise ValueError(f'duplicate element id {edge_id}')
        edge = Edge(edge_id, side, type_name, source, target)
        self.edges[edge_id] = edge
        self._out[source].add(edge_id)
        self._in[target].add(edge_id)
        return edge

    def remove(self, element_id: str):
        """ Removes a node or an edge; correspondence refs are kept dangling."""
        if element_id in self.edges:
            edge = self.edges.pop(element_id)
            self._out[edge.source].discard(element_id)
            self._in[edge.target].discard(element_id)
            return
        node = self.nodes.pop(element_id)
        self._by_type[node.side, node.type].discard(element_id)
        if node.side == CORR:
            if node.src is not None:
                self._corr_by_src[node.src].discard(element_id)
            if node.trg is not None:
                self._corr_by_trg[node.trg].discard(element_id)

    def set_attr(self, node_id: str, attr: str, value: AttrValue):
        self.nodes[node_id].attrs[attr] = value

    def new_id(self, prefix: str = 'x') -> str:
        """ Fresh element id, deterministic for equal histories."""
        while True:
            self._counter += 1
            candidate = f'{prefix}#{self._counter}'
            if candidate not in self:
                return candidate

    def copy(self) -> 'TripleGraph':
        other = TripleGraph()
        for node in self.nodes.values():
            if node.side == CORR:
                other.add_corr(node.id, node.type, node.src, node.trg)
            else:
                other.add_node(node.id, node.side, node.type, node.attrs)
        for edge in self.edges.values():
            other.add_edge(edge.id, edge.side, edge.type, edge.source,
                           edge.target)
        other._counter = self._counter
        return other

    # queries

    def __contains__(self, element_id: str) -> bool:
        return element_id in self.nodes or element_id in self.edges

    def __len__(self) -> int:
        return len(self.nodes) + len(self.edges)

    def elements(self) -> Iterator[str]:
        yield from self.nodes
        yield from self.edges

    def side_of(self, element_id: str) -> Optional[str]:
        if element_id in self.nodes:
            return self.nodes[element_id].side
        if element_id in self.edges:
            return self.edges[element_id].side
        return None

    def nodes_of_type(self, side: str, type_names: Iterable[str]) -> List[str]:
        result = set()
        for name in type_names:
            result |= self._by_type.get((side, name), set())
        return sorted(result)

    def out_edges(self, node_id: str) -> List[str]:
        return sorted(self._out.get(node_id, ()))

    def in_edges(self, node_id: str) -> List[str]:
        return sorted(self._in.get(node_id, ()))

    def incident_edges(self, node_id: str) -> List[str]:
        return sorted(self._out.get(node_id, set()) |
                      self._in.get(node_id, set()))

    def corrs_by_src(self, node_id: str) -> List[str]:
        return sorted(self._corr_by_src.get(node_id, ()))

    def corrs_by_trg(self, node_id: str) -> List[str]:
        return sorted(self._corr_by_trg.get(node_id, ()))

    def is_dangling(self, corr_id: str) -> bool:
        corr = self.nodes[corr_id]
        return corr.src not in self.nodes or corr.trg not in self.nodes

    def is_total(self) -> bool:
        return not any(self.is_dangling(n.id) for n in self.nodes.values()
                       if n.side == CORR)

    def neighbours(self, element_id: str) -> Set[str]:
        """ Elements sharing an incidence or correspondence reference."""
        result = set()
        if element_id in self.edges:
            edge = self.edges[element_id]
            result.update((edge.source, edge.target))
        elif element_id in self.nodes:
            node = self.nodes[element_id]
            if node.side == CORR:
                result.update(x for x in (node.src, node.trg) if x)
            else:
                result.update(self._out.get(element_id, ()))
                result.update(self._in.get(element_id, ()))
                result.update(self._corr_by_src.get(element_id, ()))
                result.update(self._corr_by_trg.get(element_id, ()))
        return {x for x in result if x in self}

    def vicinity(self, seeds: Iterable[str], radius: int) -> Set[str]:
        """ All elements reachable from seeds within ``radius`` incidences."""
        seen = {s for s in seeds if s in self}
        frontier = set(seen)
        for _ in range(radius):
            nxt = set()
            for element_id in frontier:
                nxt |= self.neighbours(element_id)
            nxt -= seen
            seen |= nxt
            frontier = nxt
        return seen

    def counts(self) -> Dict[Tuple[str, str], int]:
        """ Element count per (side, type)."""
        result: Dict[Tuple[str, str], int] = defaultdict(int)
        for node in self.nodes.values():
            result[node.side, node.type] += 1
        for edge in self.edges.values():
            result[edge.side, edge.type] += 1
        return dict(result)

    def __eq__(self, other):
        if not isinstance(other, TripleGraph):
            return NotImplemented
        return to_dict(self) == to_dict(other)

    def __repr__(self):
        return f'<TripleGraph nodes={len(self.nodes)} edges={len(self.edges)}>'


def validate(host: TripleGraph, types: TypeTriple) -> List[Diagnostic]:
    """ Checks typing and incidence invariants; dangling refs are partial."""
    diagnostics = []
    for node in sorted(host.nodes.values(), key=lambda n: n.id):
        if node.side == CORR:
            ct = types.corr_types.get(node.type)
            if ct is None:
                diagnostics.append(Diagnostic('UNKNOWN-TYPE', node.id,
                                              f'corr type {node.type}'))
                continue
            for ref, side, declared in ((node.src, SOURCE, ct.source),
                                        (node.trg, TARGET, ct.target)):
                if ref is None or ref not in host.nodes:
                    diagnostics.append(Diagnostic(
                        'DANGLING-REF', node.id, f'{side} reference {ref}',
                        partial=True))
                    continue
                referenced = host.nodes[ref]
                if referenced.side != side or not types.is_subtype(
                        side, referenced.type, declared):
                    diagnostics.append(Diagnostic(
                        'ILL-TYPED-REF', node.id,
                        f'{side} reference {ref} is not a {declared}'))
            continue
        if node.side not in SIDES:
            diagnostics.append(Diagnostic('BAD-SIDE', node.id, node.side))
            continue
        if types.node_type(node.side, node.type) is None:
            diagnostics.append(Diagnostic('UNKNOWN-TYPE', node.id,
                                          f'{node.side} type {node.type}'))
            continue
        declared = types.attributes(node.side, node.type)
        for attr, value in sorted(node.attrs.items()):
            kind = declared.get(attr)
            if kind is None:
                diagnostics.append(Diagnostic('UNKNOWN-ATTR', node.id, attr))
            elif (kind == INTEGER) != isinstance(value, int):
                diagnostics.append(Diagnostic(
                    'ATTR-KIND', node.id, f'{attr} must be {kind}'))
    for edge in sorted(host.edges.values(), key=lambda e: e.id):
        et = types.edge_type(edge.side, edge.type)
        if et is None:
            diagnostics.append(Diagnostic('UNKNOWN-TYPE', edge.id,
                                          f'{edge.side} edge {edge.type}'))
            continue
        for end, declared in ((edge.source, et.source),
                              (edge.target, et.target)):
            node = host.nodes.get(end)
            if node is None:
                diagnostics.append(Diagnostic('MISSING-END', edge.id, end))
            elif node.side != edge.side:
                diagnostics.append(Diagnostic('CROSS-SIDE', edge.id, end))
            elif not types.is_subtype(edge.side, node.type, declared):
                diagnostics.append(Diagnostic(
                    'ILL-TYPED-END', edge.id, f'{end} is not a {declared}'))
    return diagnostics


def to_dict(host: TripleGraph) -> dict:
    """ JSON document; dangling correspondence references become null."""
    result = {}
    for side, key in ((SOURCE, 'source'), (TARGET, 'target')):
        result[key] = {
            'nodes': [{'id': n.id, 'type': n.type, 'attrs': dict(n.attrs)}
                      for n in sorted(host.nodes.values(), key=lambda n: n.id)
                      if n.side == side],
            'edges': [{'id': e.id, 'type': e.type, 'from': e.source,
                       'to': e.target}
                      for e in sorted(host.edges.values(), key=lambda e: e.id)
                      if e.side == side],
        }
    result['corr'] = [
        {'id': n.id, 'type': n.type,
         'src': n.src if n.src in host.nodes else None,
         'trg': n.trg if n.trg in host.nodes else None}
        for n in sorted(host.nodes.values(), key=lambda n: n.id)
        if n.side == CORR]
    return result


def from_dict(data: dict) -> TripleGraph:
    host = TripleGraph()
    for side, key in ((SOURCE, 'source'), (TARGET, 'target')):
        part = data.get(key) or {}
        for node in part.get('nodes', ()):
            host.add_node(node['id'], side, node['type'],
                          node.get('attrs') or {})
    for side, key in ((SOURCE, 'source'), (TARGET, 'target')):
        part = data.get(key) or {}
        for edge in part.get('edges', ()):
            host.add_edge(edge['id'], side, edge['type'], edge['from'],
                          edge['to'])
    for corr in data.get('corr', ()):
        host.add_corr(corr['id'], corr['type'], corr.get('src'),
                      corr.get('trg'))
    return host


def dumps(host: TripleGraph, indent: Optional[int] = 2) -> str:
    return json.dumps(to_dict(host), indent=indent, ensure_ascii=False,
                      sort_keys=True)


def loads(text: str) -> TripleGraph:
    return from_dict(json.loads(text))


def to_networkx(host: TripleGraph) -> nx.DiGraph:
    """
    Incidence graph: every element becomes a vertex labelled by side and
    type; edges and correspondence refs become labelled arcs.
    """
    graph = nx.DiGraph()
    for node in host.nodes.values():
        graph.add_node(node.id, label=(node.side, node.type))
    for edge in host.edges.values():
        graph.add_node(edge.id, label=(edge.side, edge.type))
        graph.add_edge(edge.source, edge.id, label='out')
        graph.add_edge(edge.id, edge.target, label='in')
    for node in host.nodes.values():
        if node.side == CORR:
            if node.src in host.nodes:
                graph.add_edge(node.id, node.src, label=SOURCE)
            if node.trg in host.nodes:
                graph.add_edge(node.id, node.trg, label=TARGET)
    return graph


def _same_label(a: dict, b: dict) -> bool:
    return a['label'] == b['label']


def isomorphisms(first: TripleGraph,
                 second: TripleGraph) -> Iterator[Dict[str, str]]:
    """ Typed isomorphisms first -> second, attribute values ignored."""
    if first.counts() != second.counts():
        return
    matcher = isomorphism.DiGraphMatcher(
        to_networkx(first), to_networkx(second),
        node_match=_same_label, edge_match=_same_label)
    yield from matcher.isomorphisms_iter()


def structure_hash(host: TripleGraph) -> str:
    """ Isomorphism-invariant hash (Weisfeiler-Lehman) of the structure."""
    graph = to_networkx(host)
    for _, data in graph.nodes(data=True):
        data['text'] = '/'.join(data['label'])
    for _, _, data in graph.edges(data=True):
        data['text'] = data['label']
    return nx.weisfeiler_lehman_graph_hash(graph, node_attr='text',
                                           edge_attr='text')
