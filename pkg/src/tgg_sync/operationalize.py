"""
Operational rules derived from TGG rules.

Markings: an element tagged *translates* must still be untranslated when the
rule is applied and is translated afterwards; *requires* elements must already
be translated.
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, List, Tuple

from tgg_sync import exceptions
from tgg_sync.grammar import (ShortcutDecl, Tgg, TggRule, print_cond,
                              print_element, print_nac)
from tgg_sync.graph import CORR, SIDES, SOURCE, TARGET, TypeTriple
from tgg_sync.matching import Nac, Pattern, PEdge, PNode, RuleGraph

logger = logging.getLogger(__name__)

FWD = 'FWD'
BWD = 'BWD'
CC = 'CC'
SRC_PATTERN = 'SRC-PATTERN'
TRG_PATTERN = 'TRG-PATTERN'
SHORT_CUT = 'SHORT-CUT'
REPAIR_FWD = 'REPAIR-FWD'
REPAIR_BWD = 'REPAIR-BWD'
SC_CC = 'SC-CC'

DIRECTION_SIDE = {FWD: SOURCE, BWD: TARGET}


@dataclass(frozen=True)
class OperationalRule:
    name: str
    kind: str
    base: Tuple[str, ...]
    graph: RuleGraph
    translates: FrozenSet[str] = frozenset()
    requires: FrozenSet[str] = frozenset()
    # elements of the replaced application that must already be gone
    absent: Tuple[PNode, ...] = ()
    absent_edges: Tuple[PEdge, ...] = ()
    # replaced rule element -> short-cut element
    origin: Tuple[Tuple[str, str], ...] = ()
    # short-cut element -> replacing rule element
    result: Tuple[Tuple[str, str], ...] = ()

    @property
    def pattern(self) -> Pattern:
        return self.graph.pattern

    @property
    def create(self) -> FrozenSet[str]:
        return self.graph.create

    @property
    def delete(self) -> FrozenSet[str]:
        return self.graph.delete

    def lhs(self) -> Pattern:
        return self.graph.lhs()


def _names(rule: TggRule, side: str, created: bool) -> FrozenSet[str]:
    return frozenset(rule.names(side, created))


def _grammar_nacs(rule: TggRule, sides=SIDES) -> Tuple[Nac, ...]:
    return tuple(n for n in rule.nacs if n.side in sides)


def forward_rule(rule: TggRule, filter_nacs: Tuple[Nac, ...] = (),
                 direction: str = FWD) -> OperationalRule:
    """ FWD (or BWD) rule: the translated side becomes context."""
    side = DIRECTION_SIDE[direction]
    translates = _names(rule, side, True)
    pattern = Pattern(rule.nodes, rule.edges,
                      rule.nacs + tuple(filter_nacs), rule.conds)
    return OperationalRule(
        name=f'{rule.name}_{direction}', kind=direction, base=(rule.name,),
        graph=RuleGraph(f'{rule.name}_{direction}', pattern,
                        rule.create - translates),
        translates=translates, requires=_names(rule, side, False))


def backward_rule(rule: TggRule,
                  filter_nacs: Tuple[Nac, ...] = ()) -> OperationalRule:
    return forward_rule(rule, filter_nacs, BWD)


def cc_rule(rule: TggRule) -> OperationalRule:
    """ Consistency-check rule: only correspondences are created."""
    translates = _names(rule, SOURCE, True) | _names(rule, TARGET, True)
    requires = _names(rule, SOURCE, False) | _names(rule, TARGET, False)
    return OperationalRule(
        name=f'{rule.name}_CC', kind=CC, base=(rule.name,),
        graph=RuleGraph(f'{rule.name}_CC', rule.pattern,
                        _names(rule, CORR, True)),
        translates=translates, requires=requires)


def side_pattern(rule: TggRule, side: str,
                 filter_nacs: Tuple[Nac, ...] = ()) -> OperationalRule:
    kind = SRC_PATTERN if side == SOURCE else TRG_PATTERN
    names = rule.names(side)
    pattern = rule.pattern.restrict(
        names, _grammar_nacs(rule, (side,)) + tuple(filter_nacs))
    return OperationalRule(
        name=f'{rule.name}_{kind}', kind=kind, base=(rule.name,),
        graph=RuleGraph(f'{rule.name}_{kind}', pattern),
        translates=_names(rule, side, True),
        requires=_names(rule, side, False))


def side_patterns(rule: TggRule, fwd_nacs: Tuple[Nac, ...] = (),
                  bwd_nacs: Tuple[Nac, ...] = ()
                  ) -> Tuple[OperationalRule, OperationalRule]:
    return (side_pattern(rule, SOURCE, fwd_nacs),
            side_pattern(rule, TARGET, bwd_nacs))


def compute_filter_nacs(tgg: Tgg) -> Dict[Tuple[str, str], Tuple[Nac, ...]]:
    """
    Filter NACs per ``(rule, FWD|BWD)``.

    A translated node of type T gets a NAC on an incident edge type when the
    rule itself does not create that edge at the node and no rule creates
    such an edge at a context node whose type is related to T.
    """
    types = tgg.types
    result = {}
    for rule in tgg.rules:
        for direction, side in DIRECTION_SIDE.items():
            nacs = []
            for name in rule.names(side, True):
                node = rule.pattern.node(name)
                if node is None:
                    continue
                for et in _edge_types(types, side):
                    for incoming in (False, True):
                        end = et.target if incoming else et.source
                        if not types.is_subtype(side, node.type, end):
                            continue
                        if _creates_at(rule, node.name, et.name, incoming):
                            continue
                        if _translatable(tgg, side, node.type, et.name,
                                         incoming):
                            continue
                        nacs.append(_edge_nac(side, node.name, et, incoming))
            result[rule.name, direction] = tuple(nacs)
    return result


def _edge_types(types: TypeTriple, side: str):
    return [et for (s, _), et in sorted(types.edge_types.items())
            if s == side]


def _creates_at(rule: TggRule, node: str, edge_type: str,
                incoming: bool) -> bool:
    for edge in rule.edges:
        if edge.name not in rule.create or edge.type != edge_type:
            continue
        if (edge.target if incoming else edge.source) == node:
            return True
    return False


def _translatable(tgg: Tgg, side: str, type_name: str, edge_type: str,
                  incoming: bool) -> bool:
    types = tgg.types
    for rule in tgg.rules:
        for edge in rule.edges:
            if edge.name not in rule.create or edge.type != edge_type or \
                    edge.side != side:
                continue
            end = rule.pattern.node(edge.target if incoming else edge.source)
            if end.name in rule.create:
                continue
            if types.is_subtype(side, type_name, end.type) or \
                    types.is_subtype(side, end.type, type_name):
                return True
    return False


def _edge_nac(side: str, node: str, et, incoming: bool) -> Nac:
    suffix = 'in' if incoming else 'out'
    other = PNode(f'_{node}_{et.name}_{suffix}', side,
                  et.source if incoming else et.target)
    if incoming:
        edge = PEdge(f'_{node}_{et.name}_{suffix}_e', side, et.name,
                     other.name, node)
    else:
        edge = PEdge(f'_{node}_{et.name}_{suffix}_e', side, et.name, node,
                     other.name)
    return Nac(side, (other,), (edge,), filter=True)


def _rename(element, mapping: Dict[str, str]):
    if isinstance(element, PEdge):
        return PEdge(mapping[element.name], element.side, element.type,
                     mapping[element.source], mapping[element.target])
    return PNode(mapping[element.name], element.side, element.type,
                 mapping.get(element.src) if element.src else None,
                 mapping.get(element.trg) if element.trg else None)


def _ill_typed(decl: ShortcutDecl, source: str, target: str, reason: str):
    return exceptions.OverlapIllTyped(params={
        'shortcut': decl.name, 'source': source, 'target': target,
        'reason': reason})


def _check_overlap(decl: ShortcutDecl, replaced: TggRule,
                   replacing: TggRule, types: TypeTriple):
    overlap = dict(decl.overlap)
    if len(set(overlap.values())) != len(overlap) or \
            len(overlap) != len(decl.overlap):
        raise _ill_typed(decl, '-', '-', 'overlap is not injective')
    for a, b in decl.overlap:
        old, new = replaced.element(a), replacing.element(b)
        if old is None or new is None:
            raise _ill_typed(decl, a, b, 'unknown element')
        if (a in replaced.create) != (b in replacing.create):
            raise _ill_typed(decl, a, b,
                             'created and context elements mixed')
        if old.side != new.side or type(old) is not type(new):
            raise _ill_typed(decl, a, b, 'different kinds of elements')
        if old.side == CORR or isinstance(old, PEdge):
            if old.type != new.type:
                raise _ill_typed(decl, a, b, 'different types')
        elif not types.is_subtype(old.side, old.type, new.type):
            raise _ill_typed(decl, a, b, f'{old.type} is not a {new.type}')
        if isinstance(old, PEdge):
            ends = ((old.source, new.source), (old.target, new.target))
        elif old.side == CORR:
            ends = ((old.src, new.src), (old.trg, new.trg))
        else:
            ends = ()
        for x, y in ends:
            if overlap.get(x) != y:
                raise _ill_typed(decl, a, b,
                                 f'endpoint {x} is not mapped to {y}')


def shortcut_rule(replaced: TggRule, replacing: TggRule,
                  decl: ShortcutDecl, types: TypeTriple) -> OperationalRule:
    """
    Rule replacing an application of ``replaced`` by one of ``replacing``.

    Overlap elements are preserved; replaced-only created elements are
    deleted and replacing-only created elements are created. Elements of
    the replaced rule outside the overlap are renamed with an ``old_``
    prefix.
    """
    _check_overlap(decl, replaced, replacing, types)
    overlap = dict(decl.overlap)
    taken = set(replacing.names())
    origin: Dict[str, str] = {}
    for name in replaced.names():
        if name in overlap:
            origin[name] = overlap[name]
            continue
        renamed = f'old_{name}'
        while renamed in taken:
            renamed = f'_{renamed}'
        origin[name] = renamed
        taken.add(renamed)

    nodes, edges = [], []
    create, delete = set(), set()
    for element in replacing.nodes + replacing.edges:
        (edges if isinstance(element, PEdge) else nodes).append(element)
        if element.name in replacing.create and \
                element.name not in overlap.values():
            create.add(element.name)
    for element in replaced.nodes + replaced.edges:
        if element.name in overlap:
            continue
        renamed = _rename(element, origin)
        (edges if isinstance(element, PEdge) else nodes).append(renamed)
        if element.name in replaced.create:
            delete.add(renamed.name)

    conds = tuple(replacing.conds)
    pattern = Pattern(tuple(nodes), tuple(edges), (), conds)
    return OperationalRule(
        name=decl.name, kind=SHORT_CUT, base=(replaced.name, replacing.name),
        graph=RuleGraph(decl.name, pattern, frozenset(create),
                        frozenset(delete)),
        origin=tuple(sorted(origin.items())),
        result=tuple(sorted((n, n) for n in replacing.names())))


def repair_rules(sc: OperationalRule
                 ) -> Tuple[OperationalRule, OperationalRule, OperationalRule]:
    """
    REPAIR-FWD, REPAIR-BWD and SC-CC of a short-cut rule.

    On a changed side deleted elements move to ``absent`` and created
    elements become translated context; the other side keeps the short-cut
    effect. Correspondences are always rewritten.
    """
    return (_repair(sc, (SOURCE,), REPAIR_FWD, 'FWD'),
            _repair(sc, (TARGET,), REPAIR_BWD, 'BWD'),
            _repair(sc, SIDES, SC_CC, 'CC'))


def _repair(sc: OperationalRule, changed: Tuple[str, ...], kind: str,
            suffix: str) -> OperationalRule:
    pattern = sc.pattern
    absent = tuple(n for n in pattern.nodes
                   if n.side in changed and n.name in sc.delete)
    absent_edges = tuple(e for e in pattern.edges
                         if e.side in changed and e.name in sc.delete)
    gone = {n.name for n in absent} | {e.name for e in absent_edges}
    translates = frozenset(n for n in sc.create
                           if pattern.side_of(n) in changed)
    edges = [e for e in pattern.edges if e.name not in gone]
    # old context is only kept where a remaining edge needs an endpoint
    old_context = set(dict(sc.origin).values()) - set(dict(sc.result)) - \
        set(sc.delete)
    needed = {e.source for e in edges} | {e.target for e in edges}
    gone |= {n for n in old_context if n not in needed}
    nodes = []
    for node in pattern.nodes:
        if node.name in gone:
            continue
        if node.side == CORR and (node.src in gone or node.trg in gone):
            # references resolved from the replaced application
            node = PNode(node.name, node.side, node.type,
                         None if node.src in gone else node.src,
                         None if node.trg in gone else node.trg)
        nodes.append(node)
    requires = frozenset(
        n.name for n in nodes + edges
        if n.side in changed and n.name not in sc.create)
    name = f'{sc.name}_{suffix}'
    conds = tuple(c for c in pattern.conds if not (c.elements() & gone))
    graph = RuleGraph(name, Pattern(tuple(nodes), tuple(edges), (), conds),
                      sc.create - translates, sc.delete - gone)
    return OperationalRule(
        name=name, kind=kind, base=sc.base, graph=graph,
        translates=translates, requires=requires, absent=absent,
        absent_edges=absent_edges, origin=sc.origin, result=sc.result)


@dataclass
class Operationalization:
    """ All operational rules of a grammar, computed once."""
    tgg: Tgg
    filter_nacs: Dict[Tuple[str, str], Tuple[Nac, ...]] = \
        field(default_factory=dict)
    fwd: Dict[str, OperationalRule] = field(default_factory=dict)
    bwd: Dict[str, OperationalRule] = field(default_factory=dict)
    cc: Dict[str, OperationalRule] = field(default_factory=dict)
    src_patterns: Dict[str, OperationalRule] = field(default_factory=dict)
    trg_patterns: Dict[str, OperationalRule] = field(default_factory=dict)
    shortcuts: Dict[str, OperationalRule] = field(default_factory=dict)
    repair_fwd: Dict[str, OperationalRule] = field(default_factory=dict)
    repair_bwd: Dict[str, OperationalRule] = field(default_factory=dict)
    sc_cc: Dict[str, OperationalRule] = field(default_factory=dict)

    @property
    def types(self) -> TypeTriple:
        return self.tgg.types

    def side_pattern(self, side: str, rule: str) -> OperationalRule:
        table = self.src_patterns if side == SOURCE else self.trg_patterns
        return table[rule]

    def directed(self, direction: str, rule: str) -> OperationalRule:
        return (self.fwd if direction == FWD else self.bwd)[rule]

    def shortcuts_replacing(self, rule: str) -> List[str]:
        return [d.name for d in self.tgg.shortcuts if d.replaced == rule]

    def all_rules(self) -> List[OperationalRule]:
        result = []
        for table in (self.fwd, self.bwd, self.cc, self.src_patterns,
                      self.trg_patterns, self.shortcuts, self.repair_fwd,
                      self.repair_bwd, self.sc_cc):
            result.extend(table.values())
        return result


def operationalize(tgg: Tgg) -> Operationalization:
    bundle = Operationalization(tgg, compute_filter_nacs(tgg))
    for rule in tgg.rules:
        fwd_nacs = bundle.filter_nacs[rule.name, FWD]
        bwd_nacs = bundle.filter_nacs[rule.name, BWD]
        bundle.fwd[rule.name] = forward_rule(rule, fwd_nacs)
        bundle.bwd[rule.name] = backward_rule(rule, bwd_nacs)
        bundle.cc[rule.name] = cc_rule(rule)
        src, trg = side_patterns(rule, fwd_nacs, bwd_nacs)
        bundle.src_patterns[rule.name] = src
        bundle.trg_patterns[rule.name] = trg
    for decl in tgg.shortcuts:
        sc = shortcut_rule(tgg.rule(decl.replaced), tgg.rule(decl.replacing),
                           decl, tgg.types)
        bundle.shortcuts[decl.name] = sc
        (bundle.repair_fwd[decl.name], bundle.repair_bwd[decl.name],
         bundle.sc_cc[decl.name]) = repair_rules(sc)
    logger.debug('operationalized %d rules and %d short-cuts',
                 len(tgg.rules), len(tgg.shortcuts))
    return bundle


def print_operational(rule: OperationalRule) -> str:
    """ Debug rendering: ``++`` create, ``--`` delete, ``[mark]`` translates,
    ``[marked]`` requires translated, ``absent`` for vanished elements."""
    lines = [f'rule {rule.name} [{rule.kind}] {{']
    for element in rule.pattern.nodes + rule.pattern.edges:
        text = print_element(element, element.name in rule.create)
        if element.name in rule.delete:
            text = '--' + text
        if element.name in rule.translates:
            text += ' [mark]'
        elif element.name in rule.requires:
            text += ' [marked]'
        lines.append(f'    {text};')
    for element in rule.absent + rule.absent_edges:
        lines.append(f'    absent {print_element(element)};')
    for nac in rule.pattern.nacs:
        head = print_nac(nac)
        if nac.filter:
            head[0] = head[0].replace('nac ', 'nac filter ', 1)
        lines.extend(head)
    for cond in rule.pattern.conds:
        lines.append(f'    {print_cond(cond)};')
    lines.append('}')
    return '\n'.join(lines)
