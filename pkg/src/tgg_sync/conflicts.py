"""
Conflict detection over delta precedence graphs.

Detection is static: it only looks at annotations, dependencies and the
current host, never propagates anything.
"""
import json
import logging
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Optional, Set, Tuple

from tgg_sync import defaults, exceptions
from tgg_sync.dpg import (HASH, MINUS, NAC, SLASH, STAR, SYMBOLS,
                          DeltaPrecedenceGraph, changed_slots,
                          node_side_elements)
from tgg_sync.graph import CORR, SOURCE, TARGET, opposite
from tgg_sync.matching import find_matches
from tgg_sync.operationalize import Operationalization

logger = logging.getLogger(__name__)

PRESERVE_DELETE = 'preserve-delete'
CORRESPONDENCE_PRESERVATION = 'correspondence-preservation'
ATTRIBUTE_CHANGE = 'attribute-change'

KINDS = (PRESERVE_DELETE, CORRESPONDENCE_PRESERVATION, ATTRIBUTE_CHANGE)

PDC = frozenset({PRESERVE_DELETE})
CPC = frozenset({CORRESPONDENCE_PRESERVATION})
ACC = frozenset({ATTRIBUTE_CHANGE})
BOTH = PDC | CPC

NONE = ''

# (source symbol, target symbol) -> potential conflict kinds; missing
# pairs carry no potential conflict.
TABLE: Dict[Tuple[str, str], FrozenSet[str]] = {
    (NONE, MINUS): PDC, (NONE, SLASH): BOTH, (NONE, NAC): CPC,
    (MINUS, NONE): PDC, (MINUS, SLASH): BOTH, (MINUS, HASH): PDC,
    (MINUS, NAC): BOTH,
    (SLASH, NONE): BOTH, (SLASH, MINUS): BOTH, (SLASH, SLASH): BOTH,
    (SLASH, HASH): BOTH, (SLASH, NAC): BOTH,
    (HASH, MINUS): PDC, (HASH, SLASH): BOTH, (HASH, HASH): ACC,
    (HASH, NAC): CPC,
    (NAC, NONE): CPC, (NAC, MINUS): BOTH, (NAC, SLASH): BOTH,
    (NAC, HASH): CPC, (NAC, NAC): CPC,
}

_RELEVANT = (MINUS, SLASH, HASH, NAC)


@dataclass
class Conflict:
    kind: str
    anchor: str
    scope: Tuple[str, ...]
    evidence: Tuple[str, ...] = ()
    details: Tuple[str, ...] = ()
    # elements created by the scope nodes; restoration stays inside them
    scope_elements: FrozenSet[str] = frozenset()
    stats: Dict[str, int] = field(default_factory=dict)
    id: str = ''

    def to_dict(self) -> dict:
        return {
            'id': self.id,
            'kind': self.kind,
            'anchor': self.anchor,
            'scope': list(self.scope),
            'evidence': list(self.evidence),
            'details': list(self.details),
            'stats': dict(sorted(self.stats.items())),
        }


def kinds_for(src: Iterable[str], trg: Iterable[str]) -> FrozenSet[str]:
    """ Union of table entries over every symbol pair of the annotation."""
    src = [s for s in _RELEVANT if s in src] or [NONE]
    trg = [t for t in _RELEVANT if t in trg] or [NONE]
    result = frozenset()
    for s in src:
        for t in trg:
            result |= TABLE.get((s, t), frozenset())
    return result


def potential_conflicts(dpg: DeltaPrecedenceGraph
                        ) -> List[Tuple[str, FrozenSet[str]]]:
    """ Annotated base nodes with the conflict kinds they may take part in."""
    result = []
    for node_id in dpg.annotated():
        kinds = kinds_for(*dpg.ann(node_id))
        if kinds:
            result.append((node_id, kinds))
    return result


class _Detector:
    def __init__(self, dpg: DeltaPrecedenceGraph, ops: Operationalization):
        self.dpg = dpg
        self.ops = ops
        self.host = dpg.host
        self.pg = dpg.pg

    def added(self, element: str) -> bool:
        return element in self.host and element not in self.pg.creator

    def changed(self, element: str) -> bool:
        node = self.host.nodes.get(element)
        if node is None or node.side == CORR:
            return False
        owners = [self.pg.creator.get(element)]
        owners += sorted(self.pg.users.get(element, ()))
        for owner in owners:
            if owner is None:
                continue
            before = self.pg.nodes[owner].attrs.get(element)
            if before is not None:
                return before != node.attrs
        return False

    def side_of(self, element: str) -> Optional[str]:
        return self.host.side_of(element) if element in self.host else \
            self._recorded_side(element)

    def _recorded_side(self, element: str) -> Optional[str]:
        creator = self.pg.creator.get(element)
        if creator is None:
            return None
        node = self.pg.nodes[creator]
        rule = self.ops.tgg.rule(node.rule)
        for name, host_id in node.bindings.items():
            if host_id == element:
                return rule.element(name).side
        return None

    def scope_of(self, anchor: str) -> Tuple[str, ...]:
        return tuple(sorted({anchor} | self.dpg.dependents_closure(anchor)))

    def scope_elements(self, scope: Iterable[str]) -> FrozenSet[str]:
        result = set()
        for node_id in scope:
            result |= self.dpg.node(node_id).created
        return frozenset(result)

    def stats(self, scope: Iterable[str]) -> Dict[str, int]:
        bound: Set[str] = set()
        created: Set[str] = set()
        for node_id in scope:
            node = self.dpg.node(node_id)
            bound |= set(node.bindings.values())
            if not node.is_candidate:
                created |= node.created
        result = {}
        for side, suffix in ((SOURCE, 'Src'), (TARGET, 'Trg')):
            result[f'deleted{suffix}'] = sum(
                1 for x in created
                if x not in self.host and self.side_of(x) == side)
            result[f'added{suffix}'] = sum(
                1 for x in bound
                if self.added(x) and self.host.side_of(x) == side)
            result[f'changed{suffix}'] = sum(
                1 for x in bound
                if self.changed(x) and self.host.side_of(x) == side)
        result['scopeSize'] = len(tuple(scope))
        return result

    # preserve-delete

    def doomed(self, node_id: str, side: str) -> Set[str]:
        """
        Opposite-side elements that propagating the deletion on ``side``
        removes: all of them after a full deletion, and after a partial
        one unless the surviving remnant is re-accounted by a candidate.
        """
        node = self.dpg.node(node_id)
        src, trg = self.dpg.ann(node_id)
        ann = src if side == SOURCE else trg
        other = opposite(side)
        victims = set(node_side_elements(self.ops, node, other, True))
        if MINUS in ann:
            return victims
        if SLASH not in ann:
            return set()
        survivors = [x for x in node_side_elements(self.ops, node, side, True)
                     if x in self.host]
        for element in survivors:
            if any(self.dpg.node(c).is_candidate
                   for c in self.dpg.creators(element)):
                return set()
        return victims

    def vanishing(self, doomed: Set[str], anchor: str) -> Set[str]:
        result: Set[str] = set()
        for element in doomed:
            users = set(self.pg.users.get(element, ()))
            users |= self.dpg.cand_users.get(element, set())
            for user in users - {anchor}:
                result.add(user)
                result |= self.dpg.dependents_closure(user)
        return result

    def preserve_delete(self, node_id: str) -> Optional[Conflict]:
        src, trg = self.dpg.ann(node_id)
        if src == {MINUS} and trg == {MINUS}:
            return None
        evidence: Set[str] = set()
        for side, ann in ((SOURCE, src), (TARGET, trg)):
            if not ann & {MINUS, SLASH}:
                continue
            doomed = {x for x in self.doomed(node_id, side) if x in self.host}
            if not doomed:
                continue
            gone = self.vanishing(doomed, node_id)
            other = opposite(side)
            for element in doomed:
                if self.changed(element):
                    evidence.add(element)
            for element in sorted(self.dpg.touched):
                if self.host.side_of(element) != other:
                    continue
                if not (self.added(element) or self.changed(element)):
                    continue
                creators = [c for c in self.dpg.creators(element)
                            if c != self.pg.creator.get(element)]
                if creators and set(creators) <= gone:
                    evidence.add(element)
        if not evidence:
            return None
        scope = self.scope_of(node_id)
        return Conflict(PRESERVE_DELETE, node_id, scope, tuple(sorted(evidence)))

    # correspondence preservation

    def survivors(self, node_id: str, side: str) -> List[Tuple[str, str]]:
        node = self.dpg.node(node_id)
        rule = self.ops.tgg.rule(node.rule)
        return [(name, node.bindings[name])
                for name in rule.names(side, True)
                if rule.is_node(name) and node.bindings.get(name) in self.host]

    def relates(self, src_id: str, trg_id: str) -> bool:
        """ Some consistency pattern covers both elements at once."""
        for rule in self.ops.tgg.rules:
            for s_name in rule.names(SOURCE, True):
                if not rule.is_node(s_name):
                    continue
                for t_name in rule.names(TARGET, True):
                    if not rule.is_node(t_name):
                        continue
                    try:
                        matches = find_matches(
                            rule.pattern, self.host, self.ops.types,
                            {s_name: src_id, t_name: trg_id})
                    except exceptions.IncompatibleSeed:
                        continue
                    if matches:
                        return True
        return False

    def correspondence(self, node_id: str) -> Optional[Conflict]:
        src, trg = self.dpg.ann(node_id)
        if not (src & {SLASH, NAC} and trg & {SLASH, NAC}):
            return None
        sources = self.survivors(node_id, SOURCE)
        targets = self.survivors(node_id, TARGET)
        if not sources or not targets:
            return None
        if self.relates(sources[0][1], targets[0][1]):
            return None
        created = self.dpg.node(node_id).created
        scope = {node_id}
        for cand_id, cand in self.dpg.candidates.items():
            if cand.created & created and \
                    STAR in (cand.src_ann | cand.trg_ann):
                scope.add(cand_id)
        evidence = (sources[0][1], targets[0][1])
        return Conflict(CORRESPONDENCE_PRESERVATION, node_id,
                        tuple(sorted(scope)), evidence)

    # attribute change

    def attribute_change(self, node_id: str) -> Optional[Conflict]:
        node = self.dpg.node(node_id)
        changed = changed_slots(self.ops, node, self.host)
        if not (changed[SOURCE] and changed[TARGET]):
            return None
        evidence = sorted(changed[SOURCE] | changed[TARGET])
        details = []
        for element in evidence:
            before = node.attrs.get(element, {})
            after = self.host.nodes[element].attrs
            for attr in sorted(set(before) | set(after)):
                if before.get(attr) != after.get(attr):
                    details.append(f'{element}.{attr}: {before.get(attr)!r}'
                                   f' -> {after.get(attr)!r}')
        return Conflict(ATTRIBUTE_CHANGE, node_id, (node_id,),
                        tuple(evidence), tuple(details))

    def confirm(self, node_id: str, kind: str) -> Optional[Conflict]:
        check = {
            PRESERVE_DELETE: self.preserve_delete,
            CORRESPONDENCE_PRESERVATION: self.correspondence,
            ATTRIBUTE_CHANGE: self.attribute_change,
        }[kind]
        conflict = check(node_id)
        if conflict is not None:
            conflict.scope_elements = self.scope_elements(conflict.scope)
            conflict.stats = self.stats(conflict.scope)
        return conflict


def confirm(dpg: DeltaPrecedenceGraph, ops: Operationalization, node_id: str,
            kind: str) -> Optional[Conflict]:
    """ The confirmed conflict, or None when ``node_id`` is not one."""
    return _Detector(dpg, ops).confirm(node_id, kind)


def detect_all(dpg: DeltaPrecedenceGraph,
               ops: Operationalization) -> List[Conflict]:
    """ Confirmed conflicts ordered by anchor and kind, numbered C1, C2..."""
    detector = _Detector(dpg, ops)
    result = []
    for node_id, kinds in potential_conflicts(dpg):
        for kind in KINDS:
            if kind not in kinds:
                continue
            conflict = detector.confirm(node_id, kind)
            if conflict is not None:
                result.append(conflict)
    result.sort(key=lambda c: (c.anchor, KINDS.index(c.kind)))
    for index, conflict in enumerate(result, 1):
        conflict.id = f'C{index}'
    logger.info('detected %d conflicts among %d annotated nodes',
                len(result), len(dpg.annotated()))
    return result


def report(conflicts: List[Conflict], dpg: Optional[DeltaPrecedenceGraph] = None
           ) -> List[dict]:
    result = []
    for conflict in conflicts:
        data = conflict.to_dict()
        if dpg is not None:
            src, trg = dpg.ann(conflict.anchor)
            data['srcAnn'] = sorted(src, key=SYMBOLS.index)
            data['trgAnn'] = sorted(trg, key=SYMBOLS.index)
        result.append(data)
    return result


def dumps(conflicts: List[Conflict],
          dpg: Optional[DeltaPrecedenceGraph] = None) -> str:
    return json.dumps(report(conflicts, dpg), indent=defaults.REPORT_INDENT,
                      sort_keys=True)


def format_table(conflicts: List[Conflict]) -> str:
    """ Human-readable conflict overview."""
    header = ('id', 'kind', 'anchor', 'scope', 'evidence')
    rows = [header]
    for c in conflicts:
        rows.append((c.id, c.kind, c.anchor, ', '.join(c.scope),
                     ', '.join(c.evidence)))
    widths = [max(len(row[i]) for row in rows) for i in range(len(header))]
    lines = ['  '.join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip()
             for row in rows]
    lines.insert(1, '  '.join('-' * w for w in widths))
    return '\n'.join(lines)
