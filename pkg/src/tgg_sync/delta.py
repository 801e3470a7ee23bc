"""
Per-side model deltas and their application.
"""
import json
import logging
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Set, Tuple, Union

from tgg_sync import exceptions
from tgg_sync.graph import (SIDES, SOURCE, TARGET, AttrValue,
                            TripleGraph, TypeTriple)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class AddNode:
    id: str
    type: str
    attrs: Tuple[Tuple[str, AttrValue], ...] = ()


@dataclass(frozen=True)
class AddEdge:
    id: str
    type: str
    source: str
    target: str


@dataclass(frozen=True)
class DeleteNode:
    id: str
    # filled in when applied, so the deletion can be revoked
    type: Optional[str] = None
    attrs: Optional[Tuple[Tuple[str, AttrValue], ...]] = None


@dataclass(frozen=True)
class DeleteEdge:
    id: str
    type: Optional[str] = None
    source: Optional[str] = None
    target: Optional[str] = None


@dataclass(frozen=True)
class SetAttr:
    node: str
    attr: str
    old: Optional[AttrValue]
    new: AttrValue


Op = Union[AddNode, AddEdge, DeleteNode, DeleteEdge, SetAttr]


def op_ids(op: Op) -> Set[str]:
    """ Element ids an op touches, edge endpoints included."""
    if isinstance(op, SetAttr):
        return {op.node}
    ids = {op.id}
    if isinstance(op, (AddEdge, DeleteEdge)):
        ids.update(x for x in (op.source, op.target) if x)
    return ids


def op_name(op: Op) -> str:
    return type(op).__name__


@dataclass(frozen=True)
class Delta:
    side: str
    ops: Tuple[Op, ...] = ()

    def __len__(self):
        return len(self.ops)

    def to_list(self) -> List[dict]:
        return [op_to_dict(op) for op in self.ops]

    def to_dict(self) -> dict:
        return {'side': self.side, 'ops': self.to_list()}


def op_to_dict(op: Op) -> dict:
    data = {'op': op_name(op)}
    for key, value in op.__dict__.items():
        if value is None:
            continue
        data[key] = dict(value) if key == 'attrs' else value
    return data


_OPS = {cls.__name__: cls for cls in (AddNode, AddEdge, DeleteNode,
                                      DeleteEdge, SetAttr)}


def op_from_dict(data: dict) -> Op:
    data = dict(data)
    try:
        cls = _OPS[data.pop('op')]
    except KeyError as e:
        raise exceptions.StaleDelta(params={
            'index': '-', 'op': str(e), 'reason': 'unknown operation'})
    if 'attrs' in data:
        data['attrs'] = tuple(sorted(data['attrs'].items()))
    if cls is SetAttr:
        data.setdefault('old', None)
    return cls(**data)


def delta_from_dict(data: Union[dict, list], side: Optional[str] = None
                    ) -> Delta:
    """ Accepts ``{"side": ..., "ops": [...]}`` or a bare op list."""
    if isinstance(data, list):
        ops = data
    else:
        side = data.get('side', side)
        ops = data.get('ops', [])
    if side not in SIDES:
        raise exceptions.StaleDelta(params={
            'index': '-', 'op': '-', 'reason': f'unknown side {side}'})
    return Delta(side, tuple(op_from_dict(x) for x in ops))


def loads(text: str, side: Optional[str] = None) -> Delta:
    return delta_from_dict(json.loads(text), side)


def dumps(delta: Delta, indent: Optional[int] = 2) -> str:
    return json.dumps(delta.to_dict(), indent=indent, sort_keys=True)


def invert(op: Op) -> Op:
    """ Operation revoking ``op``; deletions must carry their content."""
    if isinstance(op, AddNode):
        return DeleteNode(op.id, op.type, op.attrs)
    if isinstance(op, AddEdge):
        return DeleteEdge(op.id, op.type, op.source, op.target)
    if isinstance(op, SetAttr):
        return SetAttr(op.node, op.attr, op.new, op.old)
    if isinstance(op, DeleteNode):
        if op.type is None:
            raise ValueError(f'deletion of {op.id} carries no content')
        return AddNode(op.id, op.type, op.attrs or ())
    if op.type is None:
        raise ValueError(f'deletion of {op.id} carries no content')
    return AddEdge(op.id, op.type, op.source, op.target)


@dataclass
class AppliedDelta:
    """ Result of applying both deltas to a copy of the base triple."""
    host: TripleGraph
    ops: List[Tuple[str, Op]] = field(default_factory=list)
    added: Set[str] = field(default_factory=set)
    deleted: Set[str] = field(default_factory=set)
    changed: Dict[str, Set[str]] = field(default_factory=dict)
    # value before the first change per (node, attr)
    old_values: Dict[Tuple[str, str], Optional[AttrValue]] = \
        field(default_factory=dict)

    @property
    def touched(self) -> Set[str]:
        result = set()
        for _, op in self.ops:
            result |= op_ids(op)
        return result

    def side_ops(self, side: str) -> List[Op]:
        return [op for s, op in self.ops if s == side]


def _stale(index: int, op: Op, reason: str):
    return exceptions.StaleDelta(params={'index': index, 'op': op_name(op),
                                         'reason': reason})


def apply_op(host: TripleGraph, side: str, op: Op, index: int = 0,
             types: Optional[TypeTriple] = None) -> Op:
    """ Applies one op in place; returns it completed with deleted content."""
    if isinstance(op, AddNode):
        if op.id in host:
            raise _stale(index, op, f'{op.id} already exists')
        if types is not None and types.node_type(side, op.type) is None:
            raise _stale(index, op, f'unknown type {op.type}')
        host.add_node(op.id, side, op.type, dict(op.attrs))
        return op
    if isinstance(op, AddEdge):
        if op.id in host:
            raise _stale(index, op, f'{op.id} already exists')
        for end in (op.source, op.target):
            if end not in host.nodes or host.nodes[end].side != side:
                raise _stale(index, op, f'missing {side} node {end}')
        if types is not None and types.edge_type(side, op.type) is None:
            raise _stale(index, op, f'unknown edge type {op.type}')
        host.add_edge(op.id, side, op.type, op.source, op.target)
        return op
    if isinstance(op, DeleteNode):
        node = host.nodes.get(op.id)
        if node is None or node.side != side:
            raise _stale(index, op, f'missing {side} node {op.id}')
        live = host.incident_edges(op.id)
        if live:
            raise _stale(index, op, f'incident edges {sorted(live)} remain')
        host.remove(op.id)
        return DeleteNode(op.id, node.type, tuple(sorted(node.attrs.items())))
    if isinstance(op, DeleteEdge):
        edge = host.edges.get(op.id)
        if edge is None or edge.side != side:
            raise _stale(index, op, f'missing {side} edge {op.id}')
        host.remove(op.id)
        return DeleteEdge(op.id, edge.type, edge.source, edge.target)
    node = host.nodes.get(op.node)
    if node is None or node.side != side:
        raise _stale(index, op, f'missing {side} node {op.node}')
    current = node.attrs.get(op.attr)
    if current != op.old:
        raise _stale(index, op, f'{op.node}.{op.attr} is {current!r}, '
                                f'expected {op.old!r}')
    host.set_attr(op.node, op.attr, op.new)
    return op


def apply_delta(host: TripleGraph, delta_s: Optional[Delta] = None,
                delta_t: Optional[Delta] = None,
                types: Optional[TypeTriple] = None) -> AppliedDelta:
    """
    Applies the source delta, then the target delta, to a copy of ``host``.

    Correspondences referencing deleted nodes are kept dangling.
    """
    result = AppliedDelta(host.copy())
    for side, delta in ((SOURCE, delta_s), (TARGET, delta_t)):
        if delta is None:
            continue
        if delta.side != side:
            raise exceptions.StaleDelta(params={
                'index': '-', 'op': '-',
                'reason': f'{delta.side} delta given as {side} delta'})
        for index, op in enumerate(delta.ops):
            if isinstance(op, SetAttr):
                key = (op.node, op.attr)
                if key not in result.old_values:
                    result.old_values[key] = op.old
            done = apply_op(result.host, side, op, index, types)
            result.ops.append((side, done))
            _track(result, done)
    logger.debug('applied %d delta operations', len(result.ops))
    return result


def _track(result: AppliedDelta, op: Op):
    if isinstance(op, (AddNode, AddEdge)):
        if op.id in result.deleted:
            result.deleted.discard(op.id)
        else:
            result.added.add(op.id)
    elif isinstance(op, (DeleteNode, DeleteEdge)):
        if op.id in result.added:
            result.added.discard(op.id)
        else:
            result.deleted.add(op.id)
    else:
        result.changed.setdefault(op.node, set()).add(op.attr)


def normalize(delta: Delta, host: TripleGraph) -> Delta:
    """ Inserts missing edge deletions in front of node deletions."""
    work = host.copy()
    ops: List[Op] = []
    for op in delta.ops:
        if isinstance(op, DeleteNode) and op.id in work.nodes:
            for edge_id in work.incident_edges(op.id):
                extra = DeleteEdge(edge_id)
                apply_op(work, delta.side, extra)
                ops.append(extra)
        apply_op(work, delta.side, op)
        ops.append(op)
    return replace(delta, ops=tuple(ops))


def diff_snapshots(old: TripleGraph, new: TripleGraph
                   ) -> Tuple[Delta, Delta]:
    """ Source and target deltas turning ``old`` into ``new``, by id."""
    deltas = []
    for side in SIDES:
        ops: List[Op] = []
        old_edges = {k: e for k, e in old.edges.items() if e.side == side}
        new_edges = {k: e for k, e in new.edges.items() if e.side == side}
        old_nodes = {k: n for k, n in old.nodes.items() if n.side == side}
        new_nodes = {k: n for k, n in new.nodes.items() if n.side == side}
        for k in sorted(old_edges):
            if k not in new_edges or new_edges[k] != old_edges[k]:
                ops.append(DeleteEdge(k))
        for k in sorted(old_nodes):
            if k not in new_nodes or new_nodes[k].type != old_nodes[k].type:
                ops.append(DeleteNode(k))
        for k in sorted(new_nodes):
            node = new_nodes[k]
            before = old_nodes.get(k)
            if before is None or before.type != node.type:
                ops.append(AddNode(k, node.type,
                                   tuple(sorted(node.attrs.items()))))
                continue
            for attr in sorted(set(before.attrs) | set(node.attrs)):
                if before.attrs.get(attr) != node.attrs.get(attr) and \
                        attr in node.attrs:
                    ops.append(SetAttr(k, attr, before.attrs.get(attr),
                                       node.attrs[attr]))
        for k in sorted(new_edges):
            if k not in old_edges or new_edges[k] != old_edges[k]:
                edge = new_edges[k]
                ops.append(AddEdge(k, edge.type, edge.source, edge.target))
        deltas.append(Delta(side, tuple(ops)))
    return deltas[0], deltas[1]
