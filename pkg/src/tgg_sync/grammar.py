"""
Triple graph grammars and their text format.

Example::

    metamodel {
        src Class { name: string }
        trg Doc { name: string; version: integer }
        src edge subClass: Class -> Class;
        corr C2D: Class -> Doc;
    }
    rule CD {
        ++src c: Class;
        ++trg d: Doc;
        ++corr cd: C2D(c, d);
        eq c.name == d.name;
    }
    shortcut CD-To-CD: CD -> CD overlap { c -> c, d -> d, cd -> cd }

Elements prefixed with ``++`` are created, the others are context. Edges are
written ``e: a -type-> b`` with whitespace around the arrow.
"""
import logging
import re
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, List, Optional, Tuple

from tgg_sync import exceptions
from tgg_sync.graph import (CORR, INTEGER, PRIMITIVES, SIDES, SOURCE, TARGET,
                            AttrValue, CorrType, EdgeType, NodeType,
                            TypeTriple)
from tgg_sync.matching import (AttrCond, Nac, Pattern, PEdge, PNode,
                               RuleGraph, Slot)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TggRule:
    name: str
    nodes: Tuple[PNode, ...] = ()
    edges: Tuple[PEdge, ...] = ()
    create: FrozenSet[str] = frozenset()
    nacs: Tuple[Nac, ...] = ()
    conds: Tuple[AttrCond, ...] = ()

    @property
    def pattern(self) -> Pattern:
        return Pattern(self.nodes, self.edges, self.nacs, self.conds)

    def rule_graph(self) -> RuleGraph:
        return RuleGraph(self.name, self.pattern, self.create)

    def element(self, name: str):
        return self.pattern.node(name) or self.pattern.edge(name)

    def names(self, side: Optional[str] = None,
              created: Optional[bool] = None) -> List[str]:
        """ Element names filtered by side and by CREATE/CONTEXT tag."""
        result = []
        for element in self.nodes + self.edges:
            if side is not None and element.side != side:
                continue
            if created is not None and (element.name in self.create) != created:
                continue
            result.append(element.name)
        return result

    def is_node(self, name: str) -> bool:
        return self.pattern.node(name) is not None


@dataclass(frozen=True)
class ShortcutDecl:
    name: str
    replaced: str
    replacing: str
    overlap: Tuple[Tuple[str, str], ...] = ()


@dataclass
class Tgg:
    types: TypeTriple = field(default_factory=TypeTriple)
    rules: List[TggRule] = field(default_factory=list)
    shortcuts: List[ShortcutDecl] = field(default_factory=list)

    def rule(self, name: str) -> TggRule:
        for r in self.rules:
            if r.name == name:
                return r
        raise KeyError(name)

    @property
    def rule_names(self) -> List[str]:
        return [r.name for r in self.rules]

    def without(self, name: str) -> 'Tgg':
        """ Copy without rule ``name`` and the short-cuts built on it."""
        return Tgg(self.types, [r for r in self.rules if r.name != name],
                   [s for s in self.shortcuts
                    if name not in (s.replaced, s.replacing)])


TOKEN_RE = re.compile(r'''
    (?P<ws>\s+|//[^\n]*|\#[^\n]*)
   |(?P<arrow>-(?P<label>[A-Za-z_]\w*)->)
   |(?P<to>->)
   |(?P<plus>\+\+)
   |(?P<eq>==)
   |(?P<string>"(?:[^"\\]|\\.)*")
   |(?P<int>-?\d+)
   |(?P<ident>[A-Za-z_]\w*(?:-[A-Za-z_]\w*)*)
   |(?P<punct>[{}();:,.])
''', re.VERBOSE)


@dataclass(frozen=True)
class Token:
    kind: str
    value: str
    line: int
    col: int


def tokenize(text: str) -> List[Token]:
    tokens = []
    pos = 0
    line, line_start = 1, 0
    while pos < len(text):
        m = TOKEN_RE.match(text, pos)
        if m is None:
            raise exceptions.GrammarParseError(params={
                'line': line, 'col': pos - line_start + 1,
                'reason': f'unexpected character {text[pos]!r}'})
        kind = m.lastgroup
        if kind == 'label':
            kind = 'arrow'
        if kind != 'ws':
            value = m.group('label') if kind == 'arrow' else m.group()
            tokens.append(Token(kind, value, line, pos - line_start + 1))
        chunk = m.group()
        if '\n' in chunk:
            line += chunk.count('\n')
            line_start = pos + chunk.rindex('\n') + 1
        pos = m.end()
    tokens.append(Token('eof', '', line, pos - line_start + 1))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = tokenize(text)
        self.pos = 0
        self.types = TypeTriple()
        self.rules: List[TggRule] = []
        self.shortcuts: List[ShortcutDecl] = []

    @property
    def current(self) -> Token:
        return self.tokens[self.pos]

    def error(self, reason: str, token: Optional[Token] = None):
        token = token or self.current
        return exceptions.GrammarParseError(params={
            'line': token.line, 'col': token.col, 'reason': reason})

    def peek(self, value: str, offset: int = 0) -> bool:
        token = self.tokens[min(self.pos + offset, len(self.tokens) - 1)]
        return token.value == value and token.kind in ('ident', 'punct',
                                                       'to', 'plus', 'eq')

    def accept(self, value: str) -> bool:
        if self.peek(value):
            self.pos += 1
            return True
        return False

    def expect(self, value: str) -> Token:
        if not self.peek(value):
            shown = self.current.value or 'end of input'
            raise self.error(f'expected {value!r}, found {shown!r}')
        token = self.current
        self.pos += 1
        return token

    def expect_kind(self, kind: str, what: str) -> Token:
        token = self.current
        if token.kind != kind:
            shown = token.value or 'end of input'
            raise self.error(f'expected {what}, found {shown!r}')
        self.pos += 1
        return token

    def ident(self, what: str = 'identifier') -> str:
        return self.expect_kind('ident', what).value

    def side(self, allowed=SIDES + (CORR,)) -> str:
        token = self.current
        if token.kind != 'ident' or token.value not in allowed:
            raise self.error(f'expected one of {", ".join(allowed)}')
        self.pos += 1
        return token.value

    def terminator(self):
        if not self.peek('}'):
            self.expect(';')

    def parse(self) -> Tgg:
        while self.current.kind != 'eof':
            if self.accept('metamodel'):
                self.metamodel()
            elif self.accept('rule'):
                self.rules.append(self.rule())
            elif self.accept('shortcut'):
                self.shortcuts.append(self.shortcut())
            else:
                raise self.error('expected metamodel, rule or shortcut')
        return Tgg(self.types, self.rules, self.shortcuts)

    def metamodel(self):
        self.expect('{')
        while not self.accept('}'):
            side = self.side()
            if side == CORR:
                name = self.ident('corr type name')
                self.expect(':')
                source = self.ident()
                self.expect('->')
                target = self.ident()
                self.terminator()
                self.types.corr_types[name] = CorrType(name, source, target)
            elif self.accept('edge'):
                name = self.ident('edge type name')
                self.expect(':')
                source = self.ident()
                self.expect('->')
                target = self.ident()
                self.terminator()
                self.types.edge_types[side, name] = EdgeType(name, side,
                                                             source, target)
            else:
                self.node_type(side)

    def node_type(self, side: str):
        token = self.current
        name = self.ident('node type name')
        parents = []
        if self.accept('extends'):
            parents.append(self.ident())
            while self.accept(','):
                parents.append(self.ident())
        attrs = []
        self.expect('{')
        while not self.accept('}'):
            attr = self.ident('attribute name')
            self.expect(':')
            kind_token = self.current
            kind = self.ident('attribute kind')
            if kind not in PRIMITIVES:
                raise self.error(f'unknown attribute kind {kind}', kind_token)
            attrs.append((attr, kind))
            if not self.peek('}'):
                if not self.accept(';'):
                    self.expect(',')
        if (side, name) in self.types.node_types:
            raise self.error(f'duplicate type {name}', token)
        self.types.node_types[side, name] = NodeType(name, side, tuple(attrs),
                                                     tuple(parents))

    def rule(self) -> TggRule:
        name = self.ident('rule name')
        nodes, edges, nacs, conds = [], [], [], []
        create = set()
        self.expect('{')
        while not self.accept('}'):
            if self.accept('nac'):
                nacs.append(self.nac())
            elif self.accept('eq'):
                conds.append(self.equation())
            else:
                created = self.accept('++')
                side = self.side()
                element = self.element(side)
                if created:
                    create.add(element.name)
                (edges if isinstance(element, PEdge) else nodes).append(
                    element)
            self.terminator()
        return TggRule(name, tuple(nodes), tuple(edges), frozenset(create),
                       tuple(nacs), tuple(conds))

    def element(self, side: str):
        name = self.ident('element name')
        self.expect(':')
        first = self.ident()
        if self.current.kind == 'arrow':
            label = self.current.value
            self.pos += 1
            target = self.ident()
            if side == CORR:
                raise self.error('correspondence edges are not supported')
            return PEdge(name, side, label, first, target)
        if side == CORR:
            self.expect('(')
            src = self.ident()
            self.expect(',')
            trg = self.ident()
            self.expect(')')
            return PNode(name, CORR, first, src, trg)
        return PNode(name, side, first)

    def nac(self) -> Nac:
        side = self.side(SIDES)
        nodes, edges = [], []
        self.expect('{')
        while not self.accept('}'):
            element = self.element(side)
            (edges if isinstance(element, PEdge) else nodes).append(element)
            self.terminator()
        return Nac(side, tuple(nodes), tuple(edges))

    def slot(self) -> Slot:
        element = self.ident()
        self.expect('.')
        return Slot(element, self.ident('attribute name'))

    def equation(self) -> AttrCond:
        left = self.slot()
        self.expect('==')
        token = self.current
        if token.kind == 'int':
            self.pos += 1
            return AttrCond(left, constant=int(token.value))
        if token.kind == 'string':
            self.pos += 1
            return AttrCond(left, constant=_unquote(token.value))
        return AttrCond(left, self.slot())

    def shortcut(self) -> ShortcutDecl:
        name = self.ident('short-cut name')
        self.expect(':')
        replaced = self.ident()
        self.expect('->')
        replacing = self.ident()
        self.expect('overlap')
        self.expect('{')
        overlap = []
        while not self.accept('}'):
            a = self.ident()
            self.expect('->')
            overlap.append((a, self.ident()))
            if not self.peek('}'):
                self.expect(',')
        self.accept(';')
        return ShortcutDecl(name, replaced, replacing, tuple(overlap))


def _unquote(value: str) -> str:
    return re.sub(r'\\(.)', r'\1', value[1:-1])


def _quote(value: AttrValue) -> str:
    if isinstance(value, int):
        return str(value)
    return '"' + value.replace('\\', '\\\\').replace('"', '\\"') + '"'


def _type_error(rule: str, element: str, reason: str):
    return exceptions.GrammarTypeError(
        params={'rule': rule, 'element': element, 'reason': reason})


def check_rule(rule: TggRule, types: TypeTriple):
    """ Raises GrammarTypeError for the first ill-typed element of ``rule``."""
    seen = set()
    for element in rule.nodes + rule.edges:
        if element.name in seen:
            raise _type_error(rule.name, element.name, 'duplicate name')
        seen.add(element.name)
    nodes = {n.name: n for n in rule.nodes}
    for node in rule.nodes:
        _check_node(rule.name, node, nodes, types)
        if node.side == CORR and node.name not in rule.create:
            if {node.src, node.trg} & rule.create:
                raise _type_error(rule.name, node.name,
                                  'context correspondence references a '
                                  'created node')
    for edge in rule.edges:
        _check_edge(rule.name, edge, nodes, types)
        if edge.name not in rule.create and \
                {edge.source, edge.target} & rule.create:
            raise _type_error(rule.name, edge.name,
                              'context edge has a created endpoint')
    for cond in rule.conds:
        for slot in cond.slots:
            node = nodes.get(slot.element)
            if node is None or node.side == CORR:
                raise _type_error(rule.name, slot.element,
                                  'equation references an unknown node')
            kind = types.attr_kind(node.side, node.type, slot.attr)
            if kind is None:
                raise _type_error(rule.name, slot.element,
                                  f'type {node.type} has no attribute '
                                  f'{slot.attr}')
            if cond.right is None and cond.constant is not None:
                expected = INTEGER if isinstance(cond.constant, int) else \
                    'string'
                if kind != expected:
                    raise _type_error(rule.name, slot.element,
                                      f'constant is not of kind {kind}')
    for nac in rule.nacs:
        scope = dict(nodes)
        for node in nac.nodes:
            if node.name in scope:
                raise _type_error(rule.name, node.name,
                                  'NAC element shadows a rule element')
            if node.side != nac.side:
                raise _type_error(rule.name, node.name,
                                  'NAC element on the wrong side')
            scope[node.name] = node
        for node in nac.nodes:
            _check_node(rule.name, node, scope, types)
        for edge in nac.edges:
            _check_edge(rule.name, edge, scope, types)
            for end in (edge.source, edge.target):
                if end in rule.create:
                    raise _type_error(rule.name, edge.name,
                                      'NAC references a created element')


def _check_node(rule: str, node: PNode, nodes: Dict[str, PNode],
                types: TypeTriple):
    if node.side == CORR:
        ct = types.corr_types.get(node.type)
        if ct is None:
            raise _type_error(rule, node.name,
                              f'unknown corr type {node.type}')
        for ref, side, expected in ((node.src, SOURCE, ct.source),
                                    (node.trg, TARGET, ct.target)):
            end = nodes.get(ref)
            if end is None:
                raise _type_error(rule, node.name,
                                  f'undeclared node {ref}')
            if end.side != side or not types.is_subtype(side, end.type,
                                                        expected):
                raise _type_error(rule, node.name,
                                  f'{ref} is not a {side} {expected}')
    elif types.node_type(node.side, node.type) is None:
        raise _type_error(rule, node.name,
                          f'unknown {node.side} type {node.type}')


def _check_edge(rule: str, edge: PEdge, nodes: Dict[str, PNode],
                types: TypeTriple):
    et = types.edge_type(edge.side, edge.type)
    if et is None:
        raise _type_error(rule, edge.name,
                          f'unknown {edge.side} edge type {edge.type}')
    for ref, expected in ((edge.source, et.source), (edge.target, et.target)):
        end = nodes.get(ref)
        if end is None:
            raise _type_error(rule, edge.name, f'undeclared node {ref}')
        if end.side != edge.side or not types.is_subtype(
                edge.side, end.type, expected):
            raise _type_error(rule, edge.name,
                              f'{ref} is not a {edge.side} {expected}')


def check_grammar(tgg: Tgg):
    problems = tgg.types.check()
    if problems:
        raise _type_error('metamodel', '-', problems[0])
    names = set()
    for rule in tgg.rules:
        if rule.name in names:
            raise _type_error(rule.name, '-', 'duplicate rule name')
        names.add(rule.name)
        check_rule(rule, tgg.types)
    for sc in tgg.shortcuts:
        for ref in (sc.replaced, sc.replacing):
            if ref not in names:
                raise _type_error(sc.name, ref, 'unknown rule')


def parse_grammar(text: str) -> Tgg:
    """ Parses and type-checks grammar text."""
    tgg = _Parser(text).parse()
    check_grammar(tgg)
    logger.debug('parsed grammar with rules %s', tgg.rule_names)
    return tgg


def print_element(element, created: bool = False,
                  with_side: bool = True) -> str:
    prefix = '++' if created else ''
    side = f'{element.side} ' if with_side else ''
    if isinstance(element, PEdge):
        body = f'{element.name}: {element.source} -{element.type}-> ' \
               f'{element.target}'
    elif element.side == CORR:
        body = f'{element.name}: {element.type}({element.src}, {element.trg})'
    else:
        body = f'{element.name}: {element.type}'
    return f'{prefix}{side}{body}'


def print_cond(cond: AttrCond) -> str:
    right = _quote(cond.constant) if cond.right is None else str(cond.right)
    return f'eq {cond.left} == {right}'


def print_nac(nac: Nac, indent: str = '    ') -> List[str]:
    lines = [f'{indent}nac {nac.side} {{']
    for element in nac.nodes + nac.edges:
        lines.append(f'{indent}    {print_element(element, with_side=False)};')
    lines.append(f'{indent}}}')
    return lines


def print_rule(rule: TggRule) -> str:
    lines = [f'rule {rule.name} {{']
    for element in rule.nodes + rule.edges:
        lines.append(f'    {print_element(element, element.name in rule.create)};')
    for nac in rule.nacs:
        lines.extend(print_nac(nac))
    for cond in rule.conds:
        lines.append(f'    {print_cond(cond)};')
    lines.append('}')
    return '\n'.join(lines)


def print_types(types: TypeTriple) -> str:
    lines = ['metamodel {']
    for nt in types.node_types.values():
        extends = f' extends {", ".join(nt.parents)}' if nt.parents else ''
        attrs = '; '.join(f'{a}: {k}' for a, k in nt.attrs)
        body = f' {attrs} ' if attrs else ' '
        lines.append(f'    {nt.side} {nt.name}{extends} {{{body}}}')
    for et in types.edge_types.values():
        lines.append(f'    {et.side} edge {et.name}: {et.source} -> '
                     f'{et.target};')
    for ct in types.corr_types.values():
        lines.append(f'    corr {ct.name}: {ct.source} -> {ct.target};')
    lines.append('}')
    return '\n'.join(lines)


def print_shortcut(sc: ShortcutDecl) -> str:
    overlap = ', '.join(f'{a} -> {b}' for a, b in sc.overlap)
    return f'shortcut {sc.name}: {sc.replaced} -> {sc.replacing} ' \
           f'overlap {{ {overlap} }}'


def print_grammar(tgg: Tgg) -> str:
    parts = [print_types(tgg.types)]
    parts.extend(print_rule(r) for r in tgg.rules)
    parts.extend(print_shortcut(s) for s in tgg.shortcuts)
    return '\n\n'.join(parts) + '\n'
