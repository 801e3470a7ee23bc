"""
Synthetic synchronization scenarios over the class diagram / documentation
grammar, and the benchmark sweeps run on them.

Models are built block by block: every block is one class with its doc, two
methods (the first with a parameter) and two fields (the first linked to a
glossary entry). Each injected change owns one block, so changes never
overlap and the number of conflicts is known up front.

"Initialization" in benchmark rows is the time to parse a precedence graph
for the base model; there is no incremental matcher collecting matches.
"""
import csv
import io
import logging
import math
import os
import random
import time
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from tgg_sync import defaults
from tgg_sync.conflicts import (ATTRIBUTE_CHANGE, CORRESPONDENCE_PRESERVATION,
                                PRESERVE_DELETE)
from tgg_sync.delta import (AddEdge, AddNode, Delta, DeleteEdge, DeleteNode,
                            Op, SetAttr)
from tgg_sync.derivation import derive
from tgg_sync.grammar import Tgg, parse_grammar
from tgg_sync.graph import CORR, SOURCE, TARGET, TripleGraph
from tgg_sync.operationalize import Operationalization, operationalize
from tgg_sync.orchestration import Orchestration, default
from tgg_sync.precedence import PrecedenceGraph, parse_pg, pg_from_trace
from tgg_sync.restore import detect, execute, prepare

logger = logging.getLogger(__name__)

FIXTURES_DIR = os.path.join(os.path.dirname(__file__), 'fixtures')

RATIOS = (0.25, 0.5, 0.75, 1.0)

# conflict templates, cycled in this order
TEMPLATES = (PRESERVE_DELETE, CORRESPONDENCE_PRESERVATION, ATTRIBUTE_CHANGE)

BENIGN = ('add-field', 'rename-field', 'link-entry')

REQUIRED_RULES = ('CD', 'ME', 'FE', 'P', 'G', 'GE', 'GL')

BLOCK_SIZE = 11

CSV_COLUMNS = ('scenario', 'size', 'changes', 'ratio', 'run', 'init_ms',
               'detect_ms', 'resolve_ms')


def fixture_path(name: str, *parts: str) -> str:
    return os.path.join(FIXTURES_DIR, name, *parts)


def load_grammar(name: str = 'running_example') -> Tgg:
    with open(fixture_path(name, 'grammar.tgg')) as f:
        return parse_grammar(f.read())


@dataclass(frozen=True)
class Scenario:
    size: int
    changes: int
    ratio: float = 1.0
    seed: Optional[int] = None
    grammar: str = 'running_example'

    @property
    def conflicts(self) -> int:
        return math.ceil(round(self.ratio * self.changes, 6))


@dataclass
class Block:
    cls: str
    doc: str
    # (node, entry, source edge, target edge)
    methods: List[Tuple[str, str, str, str]] = field(default_factory=list)
    fields: List[Tuple[str, str, str, str]] = field(default_factory=list)


@dataclass
class GeneratedScenario:
    scenario: Scenario
    host: TripleGraph
    pg: PrecedenceGraph
    delta_s: Delta
    delta_t: Delta
    expected: int
    # one (template, anchor node ids) pair per injected change
    changes: List[Tuple[str, Tuple[str, ...]]] = field(default_factory=list)


class _Builder:
    """ Collects a derivation schedule with explicit element ids."""

    def __init__(self):
        self.schedule: List[Tuple[str, Dict[str, str]]] = []
        self.counter = 0

    def step(self, rule: str, context: Dict[str, str],
             created: Iterable[str]) -> Dict[str, str]:
        self.counter += 1
        ids = {name: f'{name.upper() if len(name) == 1 else name}'
                     f'{self.counter}'
               for name in created}
        selector = dict(context)
        selector.update(ids)
        self.schedule.append((rule, selector))
        return ids


def _build_schedule(blocks: int, entries: int):
    builder = _Builder()
    glossary = builder.step('G', {}, ['g'])['g']
    pool = []
    for _ in range(entries):
        pool.append(builder.step('GE', {'g': glossary}, ['ge', 'gge'])['ge'])
    result = []
    for index in range(blocks):
        cd = builder.step('CD', {}, ['c', 'd', 'cd'])
        context = {'c': cd['c'], 'd': cd['d'], 'cd': cd['cd']}
        block = Block(cd['c'], cd['d'])
        for number in range(2):
            me = builder.step('ME', context, ['m', 'e', 'me', 'cm', 'de'])
            block.methods.append((me['m'], me['e'], me['cm'], me['de']))
            if number == 0:
                builder.step('P', {'m': me['m'], 'e': me['e'],
                                   'me': me['me']}, ['p', 'pe', 'mp'])
        for number in range(2):
            fe = builder.step('FE', context, ['f', 'e', 'fe', 'cf', 'de'])
            block.fields.append((fe['f'], fe['e'], fe['cf'], fe['de']))
            if number == 0:
                builder.step('GL', {'e': fe['e'],
                                    'ge': pool[index % len(pool)]},
                             ['link'])
        result.append(block)
    return builder.schedule, result, pool


def build_model(tgg: Tgg, size: int, min_blocks: int = 0
                ) -> Tuple[TripleGraph, PrecedenceGraph, List[Block],
                           List[str]]:
    """
    Derives a consistent triple with at least ``size`` source and target
    nodes, together with the precedence graph of its derivation.
    """
    missing = [r for r in REQUIRED_RULES if r not in tgg.rule_names]
    if missing:
        raise ValueError(f'grammar lacks rules {", ".join(missing)}')
    blocks = max(math.ceil(size / BLOCK_SIZE), min_blocks, 1)
    entries = max(4, blocks // 4)
    schedule, layout, pool = _build_schedule(blocks, entries)
    host, trace = derive(tgg, schedule)
    logger.debug('derived %d blocks in %d steps', blocks, len(trace))
    return host, pg_from_trace(tgg, trace, host), layout, pool


def _name(host: TripleGraph, node: str):
    return host.nodes[node].attrs.get('name')


def inject_conflict(kind: str, number: int, host: TripleGraph, block: Block,
                    neighbours: Sequence[Block], pool: Sequence[str]
                    ) -> Tuple[List[Op], List[Op], Tuple[str, ...]]:
    """ Paired source and target edits inducing one conflict of ``kind``."""
    if kind == PRESERVE_DELETE:
        method, entry, edge, _ = block.methods[1]
        glossary_entry = pool[number % len(pool)]
        return ([DeleteEdge(edge), DeleteNode(method)],
                [AddEdge(f'xgl{number}', 'glossaryLink', entry,
                         glossary_entry)],
                (method, entry))
    if kind == CORRESPONDENCE_PRESERVATION:
        node, entry, src_edge, trg_edge = block.fields[1]
        return ([DeleteEdge(src_edge),
                 AddEdge(f'xcf{number}', 'fields', neighbours[0].cls, node)],
                [DeleteEdge(trg_edge),
                 AddEdge(f'xde{number}', 'entries', neighbours[1].doc,
                         entry)],
                (node, entry))
    if kind == ATTRIBUTE_CHANGE:
        method, entry, _, _ = block.methods[0]
        return ([SetAttr(method, 'name', _name(host, method), f'a{number}')],
                [SetAttr(entry, 'name', _name(host, entry), f'b{number}')],
                (method, entry))
    raise ValueError(f'unknown conflict kind {kind}')


def inject_benign(kind: str, number: int, host: TripleGraph, block: Block,
                  pool: Sequence[str]
                  ) -> Tuple[List[Op], List[Op], Tuple[str, ...]]:
    """ A change on one side only, which propagation carries over."""
    if kind == 'add-field':
        node = f'NF{number}'
        return ([AddNode(node, 'Field', (('name', f'nf{number}'),)),
                 AddEdge(f'ncf{number}', 'fields', block.cls, node)],
                [], (node,))
    if kind == 'rename-field':
        node = block.fields[0][0]
        return ([SetAttr(node, 'name', _name(host, node), f'r{number}')],
                [], (node,))
    if kind == 'link-entry':
        entry = block.fields[1][1]
        edge = f'ngl{number}'
        return ([], [AddEdge(edge, 'glossaryLink', entry,
                             pool[number % len(pool)])], (edge,))
    raise ValueError(f'unknown change {kind}')


def gen_scenario(scenario: Scenario, tgg: Optional[Tgg] = None
                 ) -> GeneratedScenario:
    """
    Derives a base triple and injects ``scenario.changes`` paired edits, of
    which ``scenario.conflicts`` induce exactly one conflict each.
    """
    tgg = tgg or load_grammar(scenario.grammar)
    rng = random.Random(defaults.get_seed(scenario.seed))
    host, pg, layout, pool = build_model(tgg, scenario.size,
                                         min_blocks=scenario.changes + 2)
    chosen = rng.sample(range(len(layout)), scenario.changes)
    conflicting = set(rng.sample(range(scenario.changes), scenario.conflicts))
    source: List[Op] = []
    target: List[Op] = []
    changes = []
    conflicts = benign = 0
    for number, index in enumerate(chosen):
        block = layout[index]
        if number in conflicting:
            kind = TEMPLATES[conflicts % len(TEMPLATES)]
            conflicts += 1
            neighbours = [layout[(index + 1) % len(layout)],
                          layout[(index + 2) % len(layout)]]
            src, trg, anchors = inject_conflict(kind, number, host, block,
                                                neighbours, pool)
        else:
            kind = BENIGN[benign % len(BENIGN)]
            benign += 1
            src, trg, anchors = inject_benign(kind, number, host, block, pool)
        source.extend(src)
        target.extend(trg)
        changes.append((kind, anchors))
    logger.info('scenario with %d nodes: %d changes, %d conflicts',
                sum(1 for n in host.nodes.values() if n.side != CORR),
                scenario.changes, conflicts)
    return GeneratedScenario(scenario, host, pg,
                             Delta(SOURCE, tuple(source)),
                             Delta(TARGET, tuple(target)),
                             conflicts, changes)


@dataclass
class Timing:
    init_ms: float
    detect_ms: float
    resolve_ms: float


def _ms(start: float) -> float:
    return (time.perf_counter() - start) * 1000


def time_run(ops: Operationalization, generated: GeneratedScenario,
             orch: Optional[Orchestration] = None) -> Timing:
    """
    One timed repetition on a fresh copy of the generated scenario; the
    generated host and precedence graph are left untouched.
    """
    orch = orch or default()
    start = time.perf_counter()
    parse_pg(ops.tgg, generated.host, ops)
    init_ms = _ms(start)
    start = time.perf_counter()
    state = prepare(ops, generated.host, generated.pg, generated.delta_s,
                    generated.delta_t)
    detected = detect(state)
    detect_ms = _ms(start)
    start = time.perf_counter()
    execute(state, orch, detected)
    return Timing(init_ms, detect_ms, _ms(start))


@dataclass(frozen=True)
class Point:
    name: str
    scenario: Scenario


def size_sweep(sizes: Sequence[int] = (5000, 10000, 20000, 50000),
               conflicts: int = 20, seed: Optional[int] = None
               ) -> List[Point]:
    """ Growing model, fixed number of conflicts."""
    return [Point('size', Scenario(size, conflicts, 1.0, seed))
            for size in sizes]


def changes_sweep(size: int = 50000,
                  changes: Sequence[int] = (100, 250, 500, 750, 1000),
                  ratios: Sequence[float] = RATIOS,
                  seed: Optional[int] = None) -> List[Point]:
    """ Fixed model, growing changes, one series per conflict ratio."""
    return [Point(f'changes-{int(ratio * 100)}',
                  Scenario(size, count, ratio, seed))
            for ratio in ratios for count in changes]


def bench(points: Sequence[Point], repetitions: Optional[int] = None,
          tgg: Optional[Tgg] = None) -> List[dict]:
    """ One row per point, timings averaged over the repetitions."""
    repetitions = repetitions or defaults.BENCH_REPETITIONS
    tgg = tgg or load_grammar()
    ops = operationalize(tgg)
    rows = []
    for point in points:
        generated = gen_scenario(point.scenario, tgg)
        timings = [time_run(ops, generated) for _ in range(repetitions)]
        row = {
            'scenario': point.name,
            'size': point.scenario.size,
            'changes': point.scenario.changes,
            'ratio': point.scenario.ratio,
            'run': repetitions,
        }
        for key in ('init_ms', 'detect_ms', 'resolve_ms'):
            row[key] = round(
                sum(getattr(t, key) for t in timings) / repetitions, 3)
        logger.info('%(scenario)s size=%(size)d changes=%(changes)d '
                    'resolve=%(resolve_ms).1fms', row)
        rows.append(row)
    return rows


def to_csv(rows: Iterable[dict]) -> str:
    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=CSV_COLUMNS,
                            lineterminator='\r\n')
    writer.writeheader()
    for row in rows:
        writer.writerow(row)
    return buffer.getvalue()


def linear_fit(xs: Sequence[float], ys: Sequence[float]
               ) -> Tuple[float, float, float]:
    """ Least squares ``y = slope * x + intercept``; returns R² last."""
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if len(x) < 2 or x.shape != y.shape:
        raise ValueError('need at least two paired samples')
    if np.ptp(x) == 0:
        raise ValueError('x values are all equal')
    slope, intercept = np.polyfit(x, y, 1)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    ss_res = float(np.sum((y - (slope * x + intercept)) ** 2))
    r2 = 1.0 if not ss_tot else 1 - ss_res / ss_tot
    return float(slope), float(intercept), r2
