"""
Patterns, injective typed matching with NACs, and rule application.
"""
import logging
from dataclasses import dataclass, field
from typing import (Callable, Dict, FrozenSet, Iterable, Iterator, List,
                    Optional, Set, Tuple, Union)

from tgg_sync import exceptions
from tgg_sync.graph import (CORR, INTEGER, AttrValue, TripleGraph,
                            TypeTriple)

logger = logging.getLogger(__name__)

CONTEXT = 'context'
CREATE = 'create'
DELETE = 'delete'

Accept = Callable[[str, str], bool]
Visible = Callable[[str], bool]


@dataclass(frozen=True)
class PNode:
    name: str
    side: str
    type: str
    # correspondence pattern nodes reference pattern node names
    src: Optional[str] = None
    trg: Optional[str] = None


@dataclass(frozen=True)
class PEdge:
    name: str
    side: str
    type: str
    source: str
    target: str


@dataclass(frozen=True)
class Slot:
    element: str
    attr: str

    def __str__(self):
        return f'{self.element}.{self.attr}'


@dataclass(frozen=True)
class AttrCond:
    """ Equation ``left == right`` where right is a slot or a constant."""
    left: Slot
    right: Optional[Slot] = None
    constant: Optional[AttrValue] = None

    @property
    def slots(self) -> Tuple[Slot, ...]:
        return (self.left,) if self.right is None else (self.left, self.right)

    def elements(self) -> Set[str]:
        return {s.element for s in self.slots}


@dataclass(frozen=True)
class Nac:
    """
    Forbidden extension of a pattern on one side.

    NAC elements may reference pattern node names; ``filter`` NACs are derived
    to avoid translation dead-ends and are always checked on the whole host.
    """
    side: str
    nodes: Tuple[PNode, ...] = ()
    edges: Tuple[PEdge, ...] = ()
    filter: bool = False

    def extension(self) -> 'Pattern':
        return Pattern(self.nodes, self.edges)


@dataclass(frozen=True)
class Pattern:
    nodes: Tuple[PNode, ...] = ()
    edges: Tuple[PEdge, ...] = ()
    nacs: Tuple[Nac, ...] = ()
    conds: Tuple[AttrCond, ...] = ()

    @property
    def names(self) -> List[str]:
        return [n.name for n in self.nodes] + [e.name for e in self.edges]

    def node(self, name: str) -> Optional[PNode]:
        for n in self.nodes:
            if n.name == name:
                return n
        return None

    def edge(self, name: str) -> Optional[PEdge]:
        for e in self.edges:
            if e.name == name:
                return e
        return None

    def side_of(self, name: str) -> Optional[str]:
        element = self.node(name) or self.edge(name)
        return element.side if element else None

    def restrict(self, names: Iterable[str], nacs: Iterable[Nac] = (),
                 keep_conds: bool = True) -> 'Pattern':
        """ Sub-pattern over ``names``; conditions keep only bound slots."""
        keep = set(names)
        nodes = tuple(n for n in self.nodes if n.name in keep)
        edges = tuple(e for e in self.edges if e.name in keep)
        conds = ()
        if keep_conds:
            conds = tuple(c for c in self.conds if c.elements() <= keep)
        return Pattern(nodes, edges, tuple(nacs), conds)


@dataclass
class PatternMatch:
    pattern: Pattern
    bindings: Dict[str, str]
    satisfied_nacs: Tuple[int, ...] = ()
    attr_ok: bool = True

    def key(self) -> Tuple[str, ...]:
        return tuple(self.bindings[k] for k in sorted(self.bindings))


def sort_key(match: PatternMatch):
    return sorted(match.bindings.values()), match.key()


class _Search:
    """ Backtracking over pattern nodes, edges bound as soon as possible."""

    def __init__(self, pattern: Pattern, host: TripleGraph,
                 types: TypeTriple, accept: Optional[Accept],
                 used: Set[str]):
        self.pattern = pattern
        self.host = host
        self.types = types
        self.accept = accept
        self.used = set(used)
        self._subtypes: Dict[Tuple[str, str], FrozenSet[str]] = {}

    def subtypes(self, side: str, name: str) -> FrozenSet[str]:
        key = (side, name)
        if key not in self._subtypes:
            if side == CORR:
                self._subtypes[key] = frozenset({name})
            else:
                self._subtypes[key] = self.types.subtypes(side, name) or \
                    frozenset({name})
        return self._subtypes[key]

    def plan(self, bound: Set[str]) -> List[Tuple[str, object]]:
        """ Variable order: connected expansion from bound nodes."""
        pattern = self.pattern
        order: List[Tuple[str, object]] = []
        placed = set(bound)
        pending_nodes = [n for n in pattern.nodes if n.name not in placed]
        pending_edges = [e for e in pattern.edges if e.name not in placed]

        def connected(node: PNode) -> bool:
            for e in pattern.edges:
                if e.source == node.name and e.target in placed:
                    return True
                if e.target == node.name and e.source in placed:
                    return True
            if node.side == CORR and (node.src in placed or
                                      node.trg in placed):
                return True
            for c in pattern.nodes:
                if c.side == CORR and c.name in placed and \
                        node.name in (c.src, c.trg):
                    return True
            return False

        def flush_edges():
            for e in list(pending_edges):
                if e.source in placed and e.target in placed:
                    order.append(('edge', e))
                    placed.add(e.name)
                    pending_edges.remove(e)

        flush_edges()
        while pending_nodes:
            nxt = next((n for n in pending_nodes if connected(n)), None)
            if nxt is None:
                nxt = min(pending_nodes, key=lambda n: (
                    len(self.host.nodes_of_type(
                        n.side, self.subtypes(n.side, n.type))), n.name))
            pending_nodes.remove(nxt)
            order.append(('node', nxt))
            placed.add(nxt.name)
            flush_edges()
        return order

    def node_candidates(self, node: PNode,
                        binding: Dict[str, str]) -> Iterable[str]:
        host = self.host
        pattern = self.pattern
        if node.side == CORR:
            if node.src in binding:
                return host.corrs_by_src(binding[node.src])
            if node.trg in binding:
                return host.corrs_by_trg(binding[node.trg])
        else:
            for e in pattern.edges:
                if e.target == node.name and e.source in binding:
                    return [host.edges[x].target
                            for x in host.out_edges(binding[e.source])
                            if host.edges[x].type == e.type]
                if e.source == node.name and e.target in binding:
                    return [host.edges[x].source
                            for x in host.in_edges(binding[e.target])
                            if host.edges[x].type == e.type]
            for c in pattern.nodes:
                if c.side == CORR and c.name in binding:
                    corr = host.nodes[binding[c.name]]
                    if c.src == node.name:
                        return [corr.src] if corr.src in host.nodes else []
                    if c.trg == node.name:
                        return [corr.trg] if corr.trg in host.nodes else []
        return host.nodes_of_type(node.side,
                                  self.subtypes(node.side, node.type))

    def node_fits(self, node: PNode, host_id: str,
                  binding: Dict[str, str]) -> bool:
        host_node = self.host.nodes.get(host_id)
        if host_node is None or host_id in self.used:
            return False
        if host_node.side != node.side:
            return False
        if host_node.type not in self.subtypes(node.side, node.type):
            return False
        if node.side == CORR:
            if node.src in binding and host_node.src != binding[node.src]:
                return False
            if node.trg in binding and host_node.trg != binding[node.trg]:
                return False
        else:
            for c in self.pattern.nodes:
                if c.side == CORR and c.name in binding:
                    corr = self.host.nodes[binding[c.name]]
                    if c.src == node.name and corr.src != host_id:
                        return False
                    if c.trg == node.name and corr.trg != host_id:
                        return False
        if self.accept is not None and not self.accept(node.name, host_id):
            return False
        return True

    def edge_candidates(self, edge: PEdge,
                        binding: Dict[str, str]) -> Iterator[str]:
        source = binding[edge.source]
        target = binding[edge.target]
        for edge_id in self.host.out_edges(source):
            host_edge = self.host.edges[edge_id]
            if host_edge.type != edge.type or host_edge.target != target:
                continue
            if host_edge.side != edge.side or edge_id in self.used:
                continue
            if self.accept is not None and not self.accept(edge.name,
                                                           edge_id):
                continue
            yield edge_id

    def run(self, binding: Dict[str, str]) -> Iterator[Dict[str, str]]:
        order = self.plan(set(binding))
        yield from self._step(order, 0, dict(binding))

    def _step(self, order, index, binding) -> Iterator[Dict[str, str]]:
        if index == len(order):
            yield dict(binding)
            return
        kind, element = order[index]
        if kind == 'node':
            candidates = self.node_candidates(element, binding)
            for host_id in sorted(set(candidates)):
                if not self.node_fits(element, host_id, binding):
                    continue
                binding[element.name] = host_id
                self.used.add(host_id)
                yield from self._step(order, index + 1, binding)
                self.used.discard(host_id)
                del binding[element.name]
        else:
            for edge_id in list(self.edge_candidates(element, binding)):
                binding[element.name] = edge_id
                self.used.add(edge_id)
                yield from self._step(order, index + 1, binding)
                self.used.discard(edge_id)
                del binding[element.name]


def _normalize_seed(pattern: Pattern, host: TripleGraph,
                    seed: Dict[str, str]) -> Dict[str, str]:
    """ Adds endpoints of seeded edges; raises on incompatible seeds."""
    binding = dict(seed)
    for name, host_id in seed.items():
        node = pattern.node(name)
        edge = pattern.edge(name)
        if node is None and edge is None:
            raise exceptions.IncompatibleSeed(
                params={'element': name, 'host': host_id})
        if edge is not None:
            host_edge = host.edges.get(host_id)
            if host_edge is None or host_edge.type != edge.type or \
                    host_edge.side != edge.side:
                raise exceptions.IncompatibleSeed(
                    params={'element': name, 'host': host_id})
            for end, host_end in ((edge.source, host_edge.source),
                                  (edge.target, host_edge.target)):
                if binding.setdefault(end, host_end) != host_end:
                    raise exceptions.IncompatibleSeed(
                        params={'element': end, 'host': host_end})
        elif host.nodes.get(host_id) is None or \
                host.nodes[host_id].side != node.side:
            raise exceptions.IncompatibleSeed(
                params={'element': name, 'host': host_id})
    if len(set(binding.values())) != len(binding):
        raise exceptions.IncompatibleSeed(
            params={'element': ','.join(sorted(binding)),
                    'host': 'non-injective'})
    return binding


def _seed_fits(search: _Search, binding: Dict[str, str]) -> bool:
    pattern = search.pattern
    checked: Dict[str, str] = {}
    for node in pattern.nodes:
        if node.name in binding:
            search.used.discard(binding[node.name])
            if not search.node_fits(node, binding[node.name], checked):
                return False
            checked[node.name] = binding[node.name]
    for node in pattern.nodes:
        if node.name in binding and node.side == CORR:
            corr = search.host.nodes[binding[node.name]]
            if node.src in binding and corr.src != binding[node.src]:
                return False
            if node.trg in binding and corr.trg != binding[node.trg]:
                return False
    for edge in pattern.edges:
        if edge.name in binding:
            host_edge = search.host.edges[binding[edge.name]]
            if search.accept is not None and not search.accept(
                    edge.name, host_edge.id):
                return False
            if binding.get(edge.source) != host_edge.source or \
                    binding.get(edge.target) != host_edge.target:
                return False
    return True


def attr_value(host: TripleGraph, binding: Dict[str, str],
               slot: Slot) -> Optional[AttrValue]:
    node = host.nodes.get(binding.get(slot.element, ''))
    if node is None:
        return None
    return node.attrs.get(slot.attr)


def conds_hold(conds: Iterable[AttrCond], host: TripleGraph,
               binding: Dict[str, str]) -> bool:
    for cond in conds:
        left = attr_value(host, binding, cond.left)
        if cond.right is None:
            right = cond.constant
        else:
            right = attr_value(host, binding, cond.right)
        if left != right:
            return False
    return True


def nac_violated(nac: Nac, host: TripleGraph, types: TypeTriple,
                 binding: Dict[str, str],
                 visible: Optional[Visible] = None) -> bool:
    """ True when the forbidden extension exists in the host."""
    accept = None
    if visible is not None and not nac.filter:
        def accept(name, host_id):
            return visible(host_id)
    referenced = set()
    for e in nac.edges:
        referenced.update((e.source, e.target))
    for n in nac.nodes:
        referenced.update(x for x in (n.src, n.trg) if x)
    own = {n.name for n in nac.nodes} | {e.name for e in nac.edges}
    seed = {k: v for k, v in binding.items() if k in referenced - own}
    # pattern nodes referenced by the NAC take part as pre-bound context
    context_nodes = tuple(PNode(k, _side(host, v), host.nodes[v].type)
                          for k, v in sorted(seed.items())
                          if v in host.nodes)
    extension = Pattern(context_nodes + nac.nodes, nac.edges)
    used = set(binding.values()) - set(seed.values())
    search = _Search(extension, host, types, accept, used)
    for _ in search.run(seed):
        return True
    return False


def _side(host: TripleGraph, host_id: str) -> str:
    return host.side_of(host_id)


def iter_matches(pattern: Pattern, host: TripleGraph, types: TypeTriple,
                 seed: Optional[Dict[str, str]] = None,
                 accept: Optional[Accept] = None,
                 visible: Optional[Visible] = None,
                 check_conds: bool = True) -> Iterator[PatternMatch]:
    """ Lazy variant of find_matches without canonical ordering."""
    binding = _normalize_seed(pattern, host, seed or {})
    search = _Search(pattern, host, types, accept, set(binding.values()))
    if not _seed_fits(search, binding):
        return
    search.used = set(binding.values())
    for candidate in search.run(binding):
        if check_conds and not conds_hold(pattern.conds, host, candidate):
            continue
        if any(nac_violated(nac, host, types, candidate, visible)
               for nac in pattern.nacs):
            continue
        yield PatternMatch(pattern, candidate,
                           tuple(range(len(pattern.nacs))), True)


def find_matches(pattern: Pattern, host: TripleGraph, types: TypeTriple,
                 seed: Optional[Dict[str, str]] = None,
                 accept: Optional[Accept] = None,
                 visible: Optional[Visible] = None,
                 check_conds: bool = True) -> List[PatternMatch]:
    """
    Injective, type- and incidence-preserving extensions of ``seed``.

    :param accept: extra per-element filter ``(pattern name, host id)``,
        used for translation markings.
    :param visible: restricts which host elements grammar NACs may use;
        filter NACs always see the whole host.
    :return: matches in canonical order.
    """
    matches = list(iter_matches(pattern, host, types, seed, accept, visible,
                                check_conds))
    matches.sort(key=sort_key)
    return matches


@dataclass(frozen=True)
class RuleGraph:
    """
    A rule as one graph: every element is context unless listed in
    ``create`` or ``delete``.
    """
    name: str
    pattern: Pattern
    create: FrozenSet[str] = frozenset()
    delete: FrozenSet[str] = frozenset()

    def lhs(self) -> Pattern:
        names = [n for n in self.pattern.names if n not in self.create]
        return self.pattern.restrict(names, self.pattern.nacs)


@dataclass
class Application:
    host: TripleGraph
    created: Dict[str, str] = field(default_factory=dict)
    deleted: List[str] = field(default_factory=list)
    assigned: Dict[Tuple[str, str], AttrValue] = field(default_factory=dict)

    @property
    def bindings(self) -> Dict[str, str]:
        return dict(self.created)


class _Slots:
    """ Union-find over attribute slots and constants."""

    def __init__(self):
        self.parent: Dict[object, object] = {}

    def find(self, key):
        self.parent.setdefault(key, key)
        while self.parent[key] != key:
            self.parent[key] = self.parent[self.parent[key]]
            key = self.parent[key]
        return key

    def union(self, a, b):
        self.parent[self.find(a)] = self.find(b)

    def groups(self) -> List[List[object]]:
        result: Dict[object, List[object]] = {}
        for key in sorted(self.parent, key=repr):
            result.setdefault(self.find(key), []).append(key)
        return list(result.values())


def solve_attributes(rule: RuleGraph, binding: Dict[str, str],
                     host: TripleGraph, types: TypeTriple,
                     created_nodes: Dict[str, str],
                     supplied: Optional[Dict[Tuple[str, str], AttrValue]] = None
                     ) -> Dict[Tuple[str, str], AttrValue]:
    """
    Values for created attribute slots.

    Equations are propagated from fixed values (matched elements, constants,
    ``supplied``) to created slots; free slots get defaults (the node id for
    strings, 0 for integers).
    """
    supplied = supplied or {}
    slots = _Slots()
    for cond in rule.pattern.conds:
        if cond.right is None:
            slots.union(cond.left, ('const', cond.constant))
        else:
            slots.union(cond.left, cond.right)
    for name in sorted(created_nodes):
        node = rule.pattern.node(name)
        if node.side == CORR:
            continue
        for attr in sorted(types.attributes(node.side, node.type)):
            slots.find(Slot(name, attr))

    result: Dict[Tuple[str, str], AttrValue] = {}
    for group in slots.groups():
        targets = [k for k in group if not isinstance(k, tuple) and
                   k.element in created_nodes]
        if not targets:
            continue
        fixed = []
        for key in group:
            if isinstance(key, tuple):
                fixed.append(key[1])
                continue
            if (key.element, key.attr) in supplied:
                fixed.append(supplied[key.element, key.attr])
            elif key.element in binding and key.element not in created_nodes:
                value = attr_value(host, binding, key)
                if value is not None:
                    fixed.append(value)
        if len(set(fixed)) > 1:
            raise exceptions.AttrUnsolvable(params={
                'slots': ', '.join(str(k) for k in group
                                   if not isinstance(k, tuple)),
                'values': ', '.join(sorted(str(v) for v in set(fixed)))})
        if fixed:
            value = fixed[0]
        else:
            first = targets[0]
            node = rule.pattern.node(first.element)
            kind = types.attr_kind(node.side, node.type, first.attr)
            value = 0 if kind == INTEGER else created_nodes[first.element]
        for slot in targets:
            result[slot.element, slot.attr] = value
    return result


def apply(rule: RuleGraph, match: PatternMatch, host: TripleGraph,
          types: TypeTriple,
          supplied: Optional[Dict[Tuple[str, str], AttrValue]] = None,
          ids: Optional[Dict[str, str]] = None) -> Application:
    """
    Applies ``rule`` at ``match`` in place.

    Deleted elements must be bound; deleting a node with an incident edge
    that is not deleted as well raises DanglingEdge before any mutation.
    ``ids`` may fix host ids for created elements.
    """
    binding = dict(match.bindings)
    ids = ids or {}
    to_delete = [binding[name] for name in sorted(rule.delete)
                 if name in binding and binding[name] in host]
    doomed = set(to_delete)
    for element_id in to_delete:
        if element_id in host.nodes:
            for edge_id in host.incident_edges(element_id):
                if edge_id not in doomed:
                    raise exceptions.DanglingEdge(
                        params={'node': element_id, 'edge': edge_id})

    created_nodes: Dict[str, str] = {}
    for node in rule.pattern.nodes:
        if node.name in rule.create:
            created_nodes[node.name] = ids.get(node.name) or \
                host.new_id(node.name)
    values = solve_attributes(rule, binding, host, types, created_nodes,
                              supplied)

    application = Application(host)
    for element_id in sorted(doomed, key=lambda x: x not in host.edges):
        host.remove(element_id)
        application.deleted.append(element_id)
    binding.update(created_nodes)
    for node in rule.pattern.nodes:
        if node.name not in rule.create or node.side == CORR:
            continue
        attrs = {attr: value for (name, attr), value in values.items()
                 if name == node.name}
        host.add_node(created_nodes[node.name], node.side, node.type, attrs)
    for node in rule.pattern.nodes:
        if node.name in rule.create and node.side == CORR:
            host.add_corr(created_nodes[node.name], node.type,
                          binding.get(node.src), binding.get(node.trg))
    for edge in rule.pattern.edges:
        if edge.name in rule.create:
            edge_id = ids.get(edge.name) or host.new_id(edge.name)
            host.add_edge(edge_id, edge.side, edge.type, binding[edge.source],
                          binding[edge.target])
            binding[edge.name] = edge_id
            application.created[edge.name] = edge_id
    application.created.update(created_nodes)
    application.assigned = values
    logger.debug('applied %s creating %s deleting %s', rule.name,
                 sorted(application.created.values()), application.deleted)
    return application
