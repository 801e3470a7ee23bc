"""
Orchestration documents: which fragments run in which order and how each
conflict gets resolved.
"""
import json
import operator
import re
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Tuple

from tgg_sync import exceptions
from tgg_sync.conflicts import KINDS, Conflict

LOCAL_CC = 'local-cc'
TRANSLATE = 'translate'
REPAIR = 'repair'
ROLLBACK = 'rollback'
PROPAGATE = 'propagate'
RESOLVE = 'resolve-conflict'
CLEAN_UP = 'clean-up'

STEPS = (LOCAL_CC, TRANSLATE, REPAIR, ROLLBACK, PROPAGATE, RESOLVE, CLEAN_UP)
INNER_STEPS = (REPAIR, TRANSLATE, PROPAGATE)

TAKE_SOURCE = 'take-source'
TAKE_TARGET = 'take-target'
PRESERVE = 'preserve'

STRATEGIES = (TAKE_SOURCE, TAKE_TARGET, PRESERVE)

# fields a condition may refer to besides ``kind``
FIELDS = ('deletedSrc', 'deletedTrg', 'addedSrc', 'addedTrg', 'changedSrc',
          'changedTrg', 'scopeSize')


def _invalid(reason: str) -> exceptions.OrchestrationInvalid:
    return exceptions.OrchestrationInvalid(params={'reason': reason})


_TOKEN_RE = re.compile(r"""
    \s*(?:
        (?P<num>\d+)
      | (?P<str>'[^']*'|"[^"]*")
      | (?P<op><=|>=|==|!=|<|>)
      | (?P<paren>[()])
      | (?P<name>[A-Za-z_][A-Za-z0-9_-]*)
    )""", re.VERBOSE)

_COMPARE = {
    '<': operator.lt, '<=': operator.le, '>': operator.gt,
    '>=': operator.ge, '==': operator.eq, '!=': operator.ne,
}

Condition = Callable[[Dict[str, Any]], bool]


class _ConditionParser:
    """
    Recursive descent over::

        expr := conj ('or' conj)*
        conj := neg ('and' neg)*
        neg  := 'not' neg | '(' expr ')' | value (cmp value)?
    """

    def __init__(self, text: str):
        self.text = text
        self.tokens: List[Tuple[str, str]] = []
        pos = 0
        text = text.rstrip()
        while pos < len(text):
            m = _TOKEN_RE.match(text, pos)
            if m is None or m.end() == pos:
                raise _invalid(f'bad condition {self.text!r} at {pos}')
            kind = m.lastgroup
            self.tokens.append((kind, m.group(kind)))
            pos = m.end()
        self.pos = 0

    def peek(self) -> Tuple[str, str]:
        if self.pos < len(self.tokens):
            return self.tokens[self.pos]
        return '', ''

    def take(self) -> Tuple[str, str]:
        token = self.peek()
        if not token[0]:
            raise _invalid(f'condition {self.text!r} ends early')
        self.pos += 1
        return token

    def parse(self) -> Condition:
        result = self.expr()
        if self.pos != len(self.tokens):
            raise _invalid(f'trailing input in condition {self.text!r}')
        return result

    def expr(self) -> Condition:
        parts = [self.conj()]
        while self.peek() == ('name', 'or'):
            self.take()
            parts.append(self.conj())
        if len(parts) == 1:
            return parts[0]
        return lambda env: any(p(env) for p in parts)

    def conj(self) -> Condition:
        parts = [self.neg()]
        while self.peek() == ('name', 'and'):
            self.take()
            parts.append(self.neg())
        if len(parts) == 1:
            return parts[0]
        return lambda env: all(p(env) for p in parts)

    def neg(self) -> Condition:
        if self.peek() == ('name', 'not'):
            self.take()
            inner = self.neg()
            return lambda env: not inner(env)
        if self.peek() == ('paren', '('):
            self.take()
            inner = self.expr()
            if self.take() != ('paren', ')'):
                raise _invalid(f'unbalanced parenthesis in {self.text!r}')
            return inner
        left = self.value()
        if self.peek()[0] != 'op':
            return lambda env: bool(left(env))
        compare = _COMPARE[self.take()[1]]
        right = self.value()
        return lambda env: compare(left(env), right(env))

    def value(self) -> Callable[[Dict[str, Any]], Any]:
        kind, text = self.take()
        if kind == 'num':
            number = int(text)
            return lambda env: number
        if kind == 'str':
            literal = text[1:-1]
            return lambda env: literal
        if kind == 'name' and (text == 'kind' or text in FIELDS):
            return lambda env: env[text]
        raise _invalid(f'unexpected {text!r} in condition {self.text!r}')


def parse_condition(text: str) -> Condition:
    return _ConditionParser(text).parse()


def conflict_env(conflict: Conflict) -> Dict[str, Any]:
    env: Dict[str, Any] = {f: 0 for f in FIELDS}
    env.update(conflict.stats)
    env['kind'] = conflict.kind
    return env


@dataclass(frozen=True)
class Plan:
    strategy: str
    pre: Tuple[str, ...] = ()
    post: Tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {'pre': list(self.pre), 'strategy': self.strategy,
                'post': list(self.post)}


@dataclass
class Evaluator:
    when: str
    strategy: str
    condition: Condition = field(repr=False, compare=False, default=None)

    def __post_init__(self):
        if self.condition is None:
            self.condition = parse_condition(self.when)

    def matches(self, conflict: Conflict) -> bool:
        return bool(self.condition(conflict_env(conflict)))


@dataclass
class Orchestration:
    steps: Tuple[str, ...]
    resolve: Dict[str, Plan] = field(default_factory=dict)
    evaluators: List[Evaluator] = field(default_factory=list)

    def plan_for(self, conflict: Conflict) -> Optional[Plan]:
        """
        Plan configured for the conflict's kind; the first matching evaluator
        swaps in its strategy and keeps the surrounding steps.
        """
        plan = self.resolve.get(conflict.kind)
        for evaluator in self.evaluators:
            if evaluator.matches(conflict):
                if plan is None:
                    return Plan(evaluator.strategy)
                return Plan(evaluator.strategy, plan.pre, plan.post)
        return plan

    def to_dict(self) -> dict:
        return {
            'steps': list(self.steps),
            'resolve': {k: v.to_dict() for k, v in sorted(self.resolve.items())},
            'evaluators': [{'when': e.when, 'strategy': e.strategy}
                           for e in self.evaluators],
        }


def _inner(value, where: str) -> Tuple[str, ...]:
    if value is None:
        return ()
    steps = (value,) if isinstance(value, str) else tuple(value)
    for step in steps:
        if step not in INNER_STEPS:
            raise _invalid(f'{where}: {step!r} cannot run inside a conflict')
    return steps


def _strategy(value, where: str) -> str:
    if value not in STRATEGIES:
        raise _invalid(f'{where}: unknown strategy {value!r}')
    return value


def validate_steps(steps: Tuple[str, ...]):
    for step in steps:
        if step not in STEPS:
            raise _invalid(f'unknown step {step!r}')
    if LOCAL_CC in steps and TRANSLATE in steps and \
            steps.index(LOCAL_CC) > steps.index(TRANSLATE):
        raise _invalid('local-cc must precede translate')
    if CLEAN_UP in steps and steps.index(CLEAN_UP) != len(steps) - 1:
        raise _invalid('clean-up must be the last step')


def from_dict(data: dict) -> Orchestration:
    if not isinstance(data, dict) or 'steps' not in data:
        raise _invalid('orchestration needs a "steps" list')
    steps = tuple(data['steps'])
    validate_steps(steps)
    resolve = {}
    for kind, item in data.get('resolve', {}).items():
        if kind not in KINDS:
            raise _invalid(f'unknown conflict kind {kind!r}')
        resolve[kind] = Plan(_strategy(item.get('strategy'), kind),
                             _inner(item.get('pre'), kind),
                             _inner(item.get('post'), kind))
    evaluators = []
    for index, item in enumerate(data.get('evaluators', [])):
        where = f'evaluator {index}'
        if 'when' not in item:
            raise _invalid(f'{where}: missing "when"')
        evaluators.append(Evaluator(item['when'],
                                    _strategy(item.get('strategy'), where)))
    return Orchestration(steps, resolve, evaluators)


def loads(text: str) -> Orchestration:
    try:
        data = json.loads(text)
    except ValueError as e:
        raise _invalid(f'malformed JSON: {e}')
    return from_dict(data)


def default() -> Orchestration:
    """ The typical orchestration: every conflict taken from the source."""
    plan = Plan(TAKE_SOURCE, (REPAIR,), (PROPAGATE,))
    return Orchestration(
        (LOCAL_CC, TRANSLATE, REPAIR, RESOLVE, PROPAGATE, CLEAN_UP),
        {kind: plan for kind in KINDS})
