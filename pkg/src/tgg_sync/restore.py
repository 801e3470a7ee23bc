"""
Consistency restoration: the fragment catalog and the interpreter running an
orchestration of fragments over a delta precedence graph.

Every fragment mutates a :class:`SyncState` in place and re-annotates it at
the end. Outside conflict resolution fragments leave the scopes of pending
conflicts alone; while a conflict is resolved they only touch its scope.
"""
import json
import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, FrozenSet, Iterable, List, Optional, Set, \
    Tuple

from tgg_sync import defaults, exceptions, signals
from tgg_sync.conflicts import PRESERVE_DELETE, Conflict, detect_all
from tgg_sync.conflicts import report as conflict_report
from tgg_sync.delta import (AddEdge, AddNode, Delta, DeleteEdge, DeleteNode,
                            Op, SetAttr, apply_delta, apply_op, invert,
                            op_ids, op_name)
from tgg_sync.dpg import (HASH, MINUS, NAC, PLUS, SLASH, SYMBOLS, UNTOUCHED,
                          DeltaPrecedenceGraph, annotate, annotation_rows)
from tgg_sync.graph import (CORR, SOURCE, TARGET, Diagnostic, TripleGraph,
                            TypeTriple)
from tgg_sync.graph import to_dict as graph_to_dict
from tgg_sync.matching import (PatternMatch, apply, attr_value, conds_hold,
                               find_matches)
from tgg_sync.operationalize import (BWD, FWD, Operationalization,
                                     OperationalRule)
from tgg_sync.orchestration import (CLEAN_UP, LOCAL_CC, PRESERVE, PROPAGATE,
                                    REPAIR, RESOLVE, ROLLBACK, TAKE_SOURCE,
                                    TAKE_TARGET, TRANSLATE, Orchestration,
                                    Plan, default, validate_steps)
from tgg_sync.precedence import (ConsistencyMatch, PrecedenceGraph,
                                 make_match, verify_pg)

logger = logging.getLogger(__name__)

STRATEGY_NO_EFFECT = 'STRATEGY-NO-EFFECT'
REVERT_FAILED = 'REVERT-FAILED'


@dataclass
class LogEntry:
    fragment: str
    rule: str
    node: str
    created: Tuple[str, ...] = ()
    deleted: Tuple[str, ...] = ()
    changed: Tuple[str, ...] = ()
    conflict: str = ''

    def to_dict(self) -> dict:
        data = {'fragment': self.fragment, 'rule': self.rule,
                'node': self.node, 'created': list(self.created),
                'deleted': list(self.deleted)}
        if self.changed:
            data['changed'] = list(self.changed)
        if self.conflict:
            data['conflict'] = self.conflict
        return data


@dataclass
class SyncState:
    ops: Operationalization
    host: TripleGraph
    pg: PrecedenceGraph
    # completed delta operations as applied, source side first
    delta_ops: List[Tuple[str, Op]] = field(default_factory=list)
    touched: Set[str] = field(default_factory=set)
    dpg: Optional[DeltaPrecedenceGraph] = None
    conflicts: List[Conflict] = field(default_factory=list)
    resolved: List[Tuple[Conflict, str]] = field(default_factory=list)
    unresolved: List[Conflict] = field(default_factory=list)
    reverted: Set[int] = field(default_factory=set)
    log: List[LogEntry] = field(default_factory=list)
    warnings: List[dict] = field(default_factory=list)
    removed: List[str] = field(default_factory=list)
    # annotations of the delta precedence graph conflicts were detected on
    initial: List[dict] = field(default_factory=list)
    # scope elements of the conflict under resolution
    restrict: Optional[FrozenSet[str]] = None
    current: str = ''

    @property
    def types(self) -> TypeTriple:
        return self.ops.types

    def refresh(self) -> DeltaPrecedenceGraph:
        self.dpg = annotate(self.pg, self.host, self.touched, self.ops)
        return self.dpg

    def blocked(self) -> Set[str]:
        result: Set[str] = set()
        for conflict in self.conflicts:
            result |= conflict.scope_elements
        return result

    def allowed(self, element: str, blocked: Set[str]) -> bool:
        """ Scopes of other pending conflicts stay untouched."""
        return element not in blocked

    def eligible(self, node: ConsistencyMatch, blocked: Set[str]) -> bool:
        if self.restrict is not None:
            return bool(node.created & self.restrict)
        return not (node.created & blocked)

    def record(self, fragment: str, rule: str, node: str,
               created: Iterable[str] = (), deleted: Iterable[str] = (),
               changed: Iterable[str] = ()):
        entry = LogEntry(fragment, rule, node, tuple(sorted(created)),
                         tuple(sorted(deleted)), tuple(sorted(changed)),
                         self.current)
        self.log.append(entry)
        self.touched.update(entry.created, entry.deleted, entry.changed)
        logger.debug('%s: %s at %s', fragment, rule, node)

    def warn(self, code: str, message: str, conflict: str = ''):
        logger.warning('%s: %s', code, message)
        self.warnings.append({'code': code, 'message': message,
                              'conflict': conflict or self.current})


def _first_match(state: SyncState, rule: OperationalRule,
                 seed: Dict[str, str], consumed: Set[str],
                 new_only: bool = False) -> Optional[PatternMatch]:
    """
    First match of the rule's left-hand side extending ``seed``.

    Translated elements must be unpropagated, unconsumed and outside the
    scopes of other pending conflicts; remaining context must be covered
    by intact nodes.
    """
    dpg = state.dpg
    names = set(rule.pattern.names)
    seed = {k: v for k, v in seed.items() if k in names and v in state.host}
    blocked = state.blocked()

    def accept(name: str, host_id: str) -> bool:
        if seed.get(name) == host_id:
            return True
        if name in rule.translates:
            if new_only and host_id in state.pg.creator:
                return False
            return (host_id in dpg.unpropagated and host_id not in consumed
                    and state.allowed(host_id, blocked))
        return dpg.covered(host_id)

    try:
        matches = find_matches(rule.lhs(), state.host, state.types, seed,
                               accept)
    except exceptions.IncompatibleSeed:
        return None
    return matches[0] if matches else None


def _rule_match(state: SyncState, rule_name: str, node_id: str,
                bindings: Dict[str, str]) -> ConsistencyMatch:
    rule = state.ops.tgg.rule(rule_name)
    names = rule.names()
    return make_match(node_id, rule,
                      {k: bindings[k] for k in names if k in bindings},
                      state.host)


def _apply_new(state: SyncState, fragment: str, rule: OperationalRule,
               match: PatternMatch, label_from: Iterable[str]) -> str:
    """ Applies a rule adding one precedence node for its TGG rule."""
    application = apply(rule.graph, match, state.host, state.types)
    bindings = dict(match.bindings)
    bindings.update(application.created)
    base = rule.base[-1]
    node_id = state.pg.new_label(base, label_from)
    state.pg.add(_rule_match(state, base, node_id, bindings))
    state.record(fragment, rule.name, node_id,
                 set(application.created.values()) | set(label_from),
                 application.deleted)
    return node_id


def _candidates(state: SyncState, annotation) -> List[ConsistencyMatch]:
    dpg = state.dpg
    blocked = state.blocked()
    result = []
    for cand_id in dpg.candidate_order(dpg.candidates):
        cand = dpg.candidates[cand_id]
        if (cand.src_ann, cand.trg_ann) in annotation and \
                state.eligible(cand, blocked):
            result.append(cand)
    return result


# fragments

def local_cc(state: SyncState) -> SyncState:
    """ Correlates newly added source and target elements."""
    state.refresh()
    consumed: Set[str] = set()
    for cand in _candidates(state, [({PLUS}, {UNTOUCHED})]):
        if cand.created & consumed:
            continue
        rule = state.ops.cc[cand.rule]
        match = _first_match(state, rule, cand.bindings, consumed,
                             new_only=True)
        if match is None:
            continue
        _apply_new(state, LOCAL_CC, rule, match,
                   [match.bindings[n] for n in sorted(rule.translates)])
        consumed |= {match.bindings[n] for n in rule.translates}
    state.refresh()
    return state


def translate(state: SyncState) -> SyncState:
    """ Translates newly added elements with forward and backward rules."""
    state.refresh()
    consumed: Set[str] = set()
    pending = _candidates(state, [({PLUS}, {UNTOUCHED}),
                                  ({UNTOUCHED}, {PLUS})])
    progress = True
    # context created within the pass unlocks later candidates
    while progress:
        progress = False
        for cand in pending:
            if cand.created & consumed:
                continue
            direction = FWD if cand.src_ann == {PLUS} else BWD
            rule = state.ops.directed(direction, cand.rule)
            match = _first_match(state, rule, cand.bindings, consumed)
            if match is None:
                continue
            _apply_new(state, TRANSLATE, rule, match, cand.created)
            consumed |= cand.created
            progress = True
    state.refresh()
    return state


def _repair_seed(rule: OperationalRule, node: ConsistencyMatch,
                 host: TripleGraph) -> Optional[Dict[str, str]]:
    names = set(rule.pattern.names)
    absent = {x.name for x in rule.absent + rule.absent_edges}
    seed = {}
    for replaced, name in rule.origin:
        host_id = node.bindings.get(replaced)
        if host_id is None:
            continue
        if name in absent:
            if host_id in host:
                return None
            continue
        if name not in names:
            continue
        if host_id not in host:
            return None
        seed[name] = host_id
    return seed


def _replace_structure(state: SyncState, node: ConsistencyMatch,
                       changed: Tuple[str, ...], consumed: Set[str]) -> bool:
    ops = state.ops
    if changed == (SOURCE,):
        table = ops.repair_fwd
    elif changed == (TARGET,):
        table = ops.repair_bwd
    else:
        table = ops.sc_cc
    for sc_name in ops.shortcuts_replacing(node.rule):
        rule = table[sc_name]
        seed = _repair_seed(rule, node, state.host)
        if seed is None:
            continue
        match = _first_match(state, rule, seed, consumed)
        if match is None:
            continue
        application = apply(rule.graph, match, state.host, state.types)
        full = dict(match.bindings)
        full.update(application.created)
        bindings = {target: full[name] for name, target in rule.result
                    if name in full}
        replacing = rule.base[-1]
        state.pg.remove(node.id)
        node_id = node.id if replacing == node.rule else \
            state.pg.new_label(replacing, node.created)
        state.pg.add(_rule_match(state, replacing, node_id, bindings))
        translated = {full[n] for n in rule.translates if n in full}
        consumed |= translated
        state.record(REPAIR, rule.name, node_id,
                     set(application.created.values()) | translated,
                     application.deleted, node.elements)
        return True
    return False


def _transfer(state: SyncState, node: ConsistencyMatch, side: str) -> bool:
    """ Copies values changed on ``side`` over violated equations."""
    rule = state.ops.tgg.rule(node.rule)
    changed = []
    for cond in rule.conds:
        if cond.right is None or conds_hold((cond,), state.host,
                                            node.bindings):
            continue
        sides = {state.host.side_of(node.bindings.get(s.element, ''))
                 for s in cond.slots}
        if sides != {SOURCE, TARGET}:
            continue
        source, target = cond.slots
        if state.host.side_of(node.bindings[source.element]) != side:
            source, target = target, source
        value = attr_value(state.host, node.bindings, source)
        host_id = node.bindings[target.element]
        state.host.set_attr(host_id, target.attr, value)
        changed.append(host_id)
    if not changed:
        return False
    state.pg.replace(node.id, _rule_match(state, node.rule, node.id,
                                          node.bindings))
    state.record(REPAIR, f'{node.rule} transfer', node.id, changed=changed)
    return True


def repair(state: SyncState) -> SyncState:
    """
    Fixes broken matches in place: short-cut repairs for structural breaks,
    value transfer for equations broken on one side only.
    """
    dpg = state.refresh()
    blocked = state.blocked()
    consumed: Set[str] = set()
    for node_id in state.pg.topological():
        node = state.pg.nodes.get(node_id)
        if node is None or not state.eligible(node, blocked):
            continue
        src, trg = dpg.ann(node_id)
        if MINUS in src | trg:
            continue
        changed = tuple(side for side, ann in ((SOURCE, src), (TARGET, trg))
                        if ann & {SLASH, NAC})
        if changed:
            _replace_structure(state, node, changed, consumed)
        elif (HASH in src) != (HASH in trg):
            _transfer(state, node, SOURCE if HASH in src else TARGET)
    state.refresh()
    return state


def _removal_order(host: TripleGraph, element: str):
    if element in host.edges:
        return 0, element
    return (1 if host.nodes[element].side == CORR else 2), element


def rollback(state: SyncState) -> SyncState:
    """ Revokes rule applications whose created elements are all deleted
    on one or both sides, dependents first."""
    dpg = state.refresh()
    blocked = state.blocked()
    eligible = set()
    for node_id in dpg.annotated():
        src, trg = dpg.ann(node_id)
        if (src | trg) <= {MINUS} and \
                state.eligible(state.pg.nodes[node_id], blocked):
            eligible.add(node_id)
    for node_id in reversed(state.pg.topological()):
        if node_id not in eligible:
            continue
        node = state.pg.nodes[node_id]
        remaining = [x for x in node.created if x in state.host]
        own = set(remaining)
        stuck = [e for x in remaining if x in state.host.nodes
                 for e in state.host.incident_edges(x) if e not in own]
        if stuck:
            logger.debug('rollback of %s blocked by %s', node_id, stuck)
            continue
        for element in sorted(remaining,
                              key=lambda x: _removal_order(state.host, x)):
            state.host.remove(element)
        state.pg.remove(node_id)
        state.record(ROLLBACK, node.rule, node_id, deleted=remaining)
    state.refresh()
    return state


def propagate(state: SyncState) -> SyncState:
    """
    Repair, then Rollback, then Translate, repeated until a pass records
    nothing. Translation may enable a short-cut repair on the next pass.
    """
    while True:
        recorded = len(state.log)
        repair(state)
        rollback(state)
        translate(state)
        if len(state.log) == recorded:
            return state
        logger.debug('propagate pass recorded %d steps',
                     len(state.log) - recorded)


def clean_up(state: SyncState) -> SyncState:
    """
    Deletes everything no intact rule application accounts for. Pending
    conflicts are given up.
    """
    state.unresolved.extend(state.conflicts)
    state.conflicts = []
    while True:
        dpg = state.refresh()
        broken = dpg.annotated()
        for node_id in broken:
            node = state.pg.remove(node_id)
            state.touched |= node.created
            state.record(CLEAN_UP, node.rule, node_id)
        if broken:
            dpg = state.refresh()
        stray = sorted((x for x in dpg.unpropagated if x in state.host),
                       key=lambda x: _removal_order(state.host, x))
        if not broken and not stray:
            break
        for element in stray:
            if element not in state.host:
                continue
            doomed = []
            if element in state.host.nodes:
                doomed = state.host.incident_edges(element)
            for x in doomed + [element]:
                state.host.remove(x)
                state.removed.append(x)
                state.touched.add(x)
        logger.debug('clean-up removed %d nodes and %d elements',
                     len(broken), len(stray))
    return state


FRAGMENTS: Dict[str, Callable[[SyncState], SyncState]] = {
    LOCAL_CC: local_cc,
    TRANSLATE: translate,
    REPAIR: repair,
    ROLLBACK: rollback,
    PROPAGATE: propagate,
    CLEAN_UP: clean_up,
}


# conflict resolution strategies

def _primary(op: Op) -> str:
    return op.node if isinstance(op, SetAttr) else op.id


def _revert(state: SyncState, strategy: str,
            pick: Callable[[str, Op], bool]):
    """ Replays inverses of the picked delta ops, latest first."""
    picked = [i for i, (side, op) in enumerate(state.delta_ops)
              if i not in state.reverted and pick(side, op)]
    for index in reversed(picked):
        side, op = state.delta_ops[index]
        inverse = invert(op)
        try:
            apply_op(state.host, side, inverse, index, state.types)
        except exceptions.SyncError as e:
            state.warn(REVERT_FAILED, f'{op_name(op)} {_primary(op)}: {e}')
            continue
        state.reverted.add(index)
        created = [inverse.id] if isinstance(inverse, (AddNode, AddEdge)) \
            else []
        deleted = [inverse.id] if isinstance(inverse, (DeleteNode,
                                                       DeleteEdge)) else []
        state.record(strategy, f'revert {op_name(op)}', _primary(op),
                     created, deleted, op_ids(op) - set(created + deleted))


def take_side(state: SyncState, conflict: Conflict, keep: str):
    """ Revokes the other side's changes inside the conflict scope."""
    strategy = TAKE_SOURCE if keep == SOURCE else TAKE_TARGET
    scope = conflict.scope_elements
    _revert(state, strategy,
            lambda side, op: side != keep and _primary(op) in scope)
    state.refresh()


def take_source(state: SyncState, conflict: Conflict):
    take_side(state, conflict, SOURCE)


def take_target(state: SyncState, conflict: Conflict):
    take_side(state, conflict, TARGET)


def _blocking_deletions(state: SyncState, anchor: ConsistencyMatch
                        ) -> Set[str]:
    """ Deleted elements of the anchor, closed under the creators of
    deleted context."""
    result: Set[str] = set()
    stack = [anchor]
    seen = set()
    while stack:
        node = stack.pop()
        if node.id in seen:
            continue
        seen.add(node.id)
        for element in node.elements:
            if element in state.host:
                continue
            result.add(element)
            creator = state.pg.creator.get(element)
            if element in node.context and creator is not None:
                stack.append(state.pg.nodes[creator])
    return result


def preserve(state: SyncState, conflict: Conflict):
    """ Restores the deletions that block propagating additions."""
    if conflict.kind != PRESERVE_DELETE:
        state.warn(STRATEGY_NO_EFFECT,
                   f'preserve has no effect on {conflict.kind} at '
                   f'{conflict.anchor}', conflict.id)
        return
    anchor = state.pg.nodes.get(conflict.anchor)
    if anchor is None:
        state.warn(STRATEGY_NO_EFFECT,
                   f'{conflict.anchor} was already revoked', conflict.id)
        return
    wanted = _blocking_deletions(state, anchor)
    _revert(state, PRESERVE,
            lambda side, op: isinstance(op, (DeleteNode, DeleteEdge))
            and op.id in wanted)
    state.refresh()


STRATEGIES = {
    TAKE_SOURCE: take_source,
    TAKE_TARGET: take_target,
    PRESERVE: preserve,
}


def resolve_conflict(state: SyncState, conflict: Conflict,
                     plan: Plan) -> SyncState:
    """ Runs the plan's fragments and strategy confined to the scope."""
    if conflict in state.conflicts:
        state.conflicts.remove(conflict)
    logger.info('resolving %s (%s at %s) with %s', conflict.id,
                conflict.kind, conflict.anchor, plan.strategy)
    state.restrict = conflict.scope_elements
    state.current = conflict.id
    try:
        for step in plan.pre:
            FRAGMENTS[step](state)
        STRATEGIES[plan.strategy](state, conflict)
        for step in plan.post:
            FRAGMENTS[step](state)
    finally:
        state.restrict = None
        state.current = ''
    state.resolved.append((conflict, plan.strategy))
    return state


def _conflict_order(state: SyncState) -> List[Conflict]:
    position = {n: i for i, n in enumerate(state.pg.topological())}
    return sorted(state.conflicts,
                  key=lambda c: (position.get(c.anchor, len(position)),
                                 c.id))


def resolve_conflicts(state: SyncState, orch: Orchestration) -> SyncState:
    for conflict in _conflict_order(state):
        plan = orch.plan_for(conflict)
        if plan is None:
            if CLEAN_UP not in orch.steps:
                raise exceptions.UnresolvedConflict(params={
                    'conflict': conflict.id, 'kind': conflict.kind})
            logger.info('no plan for %s, left to clean-up', conflict.id)
            continue
        resolve_conflict(state, conflict, plan)
    return state


@dataclass
class SyncResult:
    host: TripleGraph
    pg: PrecedenceGraph
    conflicts: List[Conflict]
    strategies: Dict[str, str]
    unresolved: List[str]
    log: List[LogEntry]
    warnings: List[dict]
    removed: List[str]
    annotations: Dict[str, Tuple[List[str], List[str]]]
    diagnostics: List[Diagnostic]
    initial: List[dict] = field(default_factory=list)

    def summary(self) -> Dict[str, int]:
        return {
            'conflicts': len(self.conflicts),
            'resolved': len(self.strategies),
            'unresolved': len(self.unresolved),
            'applied': sum(1 for e in self.log
                           if not e.rule.startswith('revert')),
            'removed': len(self.removed),
            'diagnostics': len(self.diagnostics),
        }

    def model(self, side: str) -> dict:
        key = 'source' if side == SOURCE else 'target'
        return graph_to_dict(self.host)[key]

    def to_dict(self) -> dict:
        conflicts = conflict_report(self.conflicts)
        for item in conflicts:
            item['strategy'] = self.strategies.get(item['id'])
        return {
            'summary': self.summary(),
            'conflicts': conflicts,
            'unresolved': list(self.unresolved),
            'log': [e.to_dict() for e in self.log],
            'warnings': list(self.warnings),
            'removed': list(self.removed),
            'annotations': {k: {'srcAnn': s, 'trgAnn': t}
                            for k, (s, t) in sorted(self.annotations.items())},
            'diagnostics': [d.__dict__ for d in self.diagnostics],
            'initialAnnotations': list(self.initial),
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=defaults.REPORT_INDENT,
                          sort_keys=True)

    def format_text(self) -> str:
        lines = ['conflicts:']
        for c in self.conflicts:
            lines.append(f'  {c.id} {c.kind} at {c.anchor}: '
                         f'{self.strategies.get(c.id, "unresolved")}')
        lines.append('log:')
        for e in self.log:
            tag = f' [{e.conflict}]' if e.conflict else ''
            lines.append(f'  {e.fragment} {e.rule} {e.node}{tag}')
        for w in self.warnings:
            lines.append(f'warning {w["code"]}: {w["message"]}')
        if self.removed:
            lines.append(f'removed: {", ".join(self.removed)}')
        lines.append('diagnostics: ' + (', '.join(
            f'{d.kind} {d.element}' for d in self.diagnostics) or 'none'))
        return '\n'.join(lines)


def _sorted_ann(ann: Set[str]) -> List[str]:
    return sorted(ann, key=SYMBOLS.index)


def prepare(ops: Operationalization, host: TripleGraph, pg: PrecedenceGraph,
            delta_s: Optional[Delta] = None,
            delta_t: Optional[Delta] = None) -> SyncState:
    """ Applies both deltas to a copy and annotates; nothing is detected."""
    applied = apply_delta(host, delta_s, delta_t, ops.types)
    state = SyncState(ops, applied.host, pg.copy(), list(applied.ops),
                      set(applied.touched))
    state.refresh()
    return state


def detect(state: SyncState) -> List[Conflict]:
    """ Detects every conflict on the initial delta precedence graph."""
    detected = detect_all(state.dpg, state.ops)
    state.initial = annotation_rows(state.dpg)
    state.conflicts = list(detected)
    signals.conflicts_detected.send(sender=SyncState, conflicts=detected)
    return detected


def execute(state: SyncState, orch: Orchestration,
            detected: List[Conflict]) -> SyncResult:
    """ Runs the orchestration steps in order over a detected state."""
    for step in orch.steps:
        logger.debug('running %s', step)
        if step == RESOLVE:
            resolve_conflicts(state, orch)
        else:
            FRAGMENTS[step](state)
    if state.conflicts and CLEAN_UP not in orch.steps:
        conflict = state.conflicts[0]
        raise exceptions.UnresolvedConflict(params={
            'conflict': conflict.id, 'kind': conflict.kind})
    dpg = state.refresh()
    result = SyncResult(
        host=state.host, pg=state.pg, conflicts=detected,
        strategies={c.id: s for c, s in state.resolved},
        unresolved=sorted(c.id for c in state.unresolved),
        log=state.log, warnings=state.warnings, removed=state.removed,
        annotations={k: (_sorted_ann(s), _sorted_ann(t))
                     for k, (s, t) in dpg.annotations.items() if s or t},
        diagnostics=verify_pg(state.ops.tgg, state.host, state.pg),
        initial=state.initial)
    signals.sync_finished.send(sender=SyncState, result=result)
    return result


def run(ops: Operationalization, host: TripleGraph, pg: PrecedenceGraph,
        delta_s: Optional[Delta] = None, delta_t: Optional[Delta] = None,
        orch: Optional[Orchestration] = None) -> SyncResult:
    """
    Synchronizes concurrent deltas of a consistent triple.

    All conflicts are detected on the initial delta precedence graph; the
    orchestration steps then run in order. Inputs are not modified.
    """
    orch = orch or default()
    validate_steps(orch.steps)
    state = prepare(ops, host, pg, delta_s, delta_t)
    return execute(state, orch, detect(state))
