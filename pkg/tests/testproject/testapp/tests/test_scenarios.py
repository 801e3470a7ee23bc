from django.test import SimpleTestCase, tag
from hypothesis import given, settings, strategies as st

from tgg_sync import conflicts, graph, scenarios
from tgg_sync.conflicts import KINDS
from tgg_sync.orchestration import default
from tgg_sync.precedence import verify_pg
from tgg_sync.restore import detect, execute, prepare
from tgg_sync.tests.mixins import RunningExampleMixin


class ScenarioMixin(RunningExampleMixin):

    def sync(self, generated: scenarios.GeneratedScenario):
        state = prepare(self.ops, generated.host, generated.pg,
                        generated.delta_s, generated.delta_t)
        detected = detect(state)
        return detected, execute(state, default(), detected)

    def assert_benign_kept(self, generated: scenarios.GeneratedScenario,
                           host: graph.TripleGraph):
        """ One-sided changes are carried over to the other side."""
        for number, (kind, anchors) in enumerate(generated.changes):
            if kind == 'add-field':
                self.assertTrue(host.corrs_by_src(anchors[0]))
            elif kind == 'rename-field':
                name = f'r{number}'
                node = anchors[0]
                self.assertEqual(name, host.nodes[node].attrs['name'])
                entry = host.nodes[host.corrs_by_src(node)[0]].trg
                self.assertEqual(name, host.nodes[entry].attrs['name'])
            elif kind == 'link-entry':
                self.assertIn(anchors[0], host)



class ScenarioTestCase(ScenarioMixin, SimpleTestCase):
    """ Synthetic scenario generation."""

    def test_conflict_count(self):
        """ Scenario ratio determines the number of conflicts."""
        self.assertEqual(3, scenarios.Scenario(100, 3).conflicts)
        self.assertEqual(2, scenarios.Scenario(100, 4, 0.5).conflicts)
        self.assertEqual(1, scenarios.Scenario(100, 3, 0.25).conflicts)
        self.assertEqual(0, scenarios.Scenario(100, 0, 0.75).conflicts)

    def test_build_model(self):
        """ Derived base model is consistent and big enough."""
        host, pg, layout, pool = scenarios.build_model(self.tgg, 44)

        self.assertEqual(4, len(layout))
        self.assertEqual(4, len(pool))
        nodes = [n for n in host.nodes.values() if n.side != graph.CORR]
        self.assertGreaterEqual(len(nodes), 44)
        self.assertEqual([], graph.validate(host, self.tgg.types))
        self.assertEqual([], verify_pg(self.tgg, host, pg))

    def test_missing_rules(self):
        """ Grammars lacking the building rules are rejected."""
        with self.assertRaises(ValueError):
            scenarios.build_model(self.tgg.without('GL'), 10)

    def test_no_changes(self):
        """ Zero changes give empty deltas and nothing to resolve."""
        generated = scenarios.gen_scenario(scenarios.Scenario(22, 0),
                                           self.tgg)

        self.assertEqual(0, len(generated.delta_s))
        self.assertEqual(0, len(generated.delta_t))
        detected, result = self.sync(generated)
        self.assertEqual([], detected)
        self.assertEqual(generated.host, result.host)

    def test_one_conflict_per_template(self):
        """ Every conflict template yields exactly one conflict."""
        generated = scenarios.gen_scenario(
            scenarios.Scenario(33, 3, seed=7), self.tgg)

        detected, result = self.sync(generated)

        self.assertEqual(3, generated.expected)
        self.assertEqual(sorted(KINDS), sorted(c.kind for c in detected))
        self.assertEqual(sorted(KINDS),
                         sorted(kind for kind, _ in generated.changes))
        self.assertEqual([], result.diagnostics)

    def test_benign_changes(self):
        """ One-sided changes propagate without conflicts."""
        generated = scenarios.gen_scenario(
            scenarios.Scenario(33, 3, ratio=0.0, seed=2), self.tgg)

        detected, result = self.sync(generated)

        self.assertEqual([], detected)
        self.assertEqual(set(scenarios.BENIGN),
                         {kind for kind, _ in generated.changes})
        self.assertEqual([], result.diagnostics)
        self.assertEqual([], result.removed)
        self.assert_benign_kept(generated, result.host)

    def test_seeded(self):
        """ Equal seeds generate equal scenarios."""
        scenario = scenarios.Scenario(44, 4, 0.5, seed=3)

        first = scenarios.gen_scenario(scenario, self.tgg)
        second = scenarios.gen_scenario(scenario, self.tgg)

        self.assertEqual(first.delta_s, second.delta_s)
        self.assertEqual(first.delta_t, second.delta_t)
        self.assertEqual(first.changes, second.changes)

    def test_deterministic(self):
        """ Repeated runs of a generated scenario are byte-identical."""
        for seed in range(20):
            generated = scenarios.gen_scenario(
                scenarios.Scenario(22, 3, 0.5, seed), self.tgg)
            detected, reports = set(), set()
            for _ in range(10):
                state = prepare(self.ops, generated.host, generated.pg,
                                generated.delta_s, generated.delta_t)
                found = detect(state)
                detected.add(conflicts.dumps(found, state.dpg))
                reports.add(execute(state, default(), found).dumps())

            with self.subTest(seed=seed):
                self.assertEqual(1, len(detected))
                self.assertEqual(1, len(reports))

    @settings(max_examples=10, deadline=None)
    @given(seed=st.integers(min_value=0, max_value=10_000),
           changes=st.integers(min_value=0, max_value=5),
           ratio=st.sampled_from(scenarios.RATIOS))
    def test_detected_matches_expected(self, seed, changes, ratio):
        """ Injected conflicts are detected, the rest is propagated."""
        generated = scenarios.gen_scenario(
            scenarios.Scenario(22, changes, ratio, seed), self.tgg)

        detected, result = self.sync(generated)

        self.assertEqual(generated.expected, len(detected))
        self.assertEqual([], result.diagnostics)
        self.assert_benign_kept(generated, result.host)

    @tag('slow')
    def test_large_model(self):
        """ Detection stays exact on a model with a thousand nodes."""
        generated = scenarios.gen_scenario(
            scenarios.Scenario(1000, 20, 0.5, seed=1), self.tgg)

        detected, result = self.sync(generated)

        self.assertEqual(10, len(detected))
        self.assertEqual([], result.diagnostics)


class BenchmarkTestCase(ScenarioMixin, SimpleTestCase):
    """ Timing sweeps and their reports."""

    def test_sweeps(self):
        """ Sweeps enumerate their points in order."""
        points = scenarios.size_sweep((100, 200), conflicts=5)
        self.assertEqual([100, 200], [p.scenario.size for p in points])
        self.assertEqual({'size'}, {p.name for p in points})

        points = scenarios.changes_sweep(500, (10, 20), (0.5, 1.0))
        self.assertEqual(['changes-50', 'changes-50', 'changes-100',
                          'changes-100'], [p.name for p in points])
        self.assertEqual([5, 10, 10, 20],
                         [p.scenario.conflicts for p in points])

    def test_time_run(self):
        """ Timed repetitions leave the generated scenario untouched."""
        generated = scenarios.gen_scenario(
            scenarios.Scenario(22, 2, seed=1), self.tgg)
        before = graph.to_dict(generated.host)

        timing = scenarios.time_run(self.ops, generated)

        self.assertGreaterEqual(timing.init_ms, 0)
        self.assertGreaterEqual(timing.detect_ms, 0)
        self.assertGreaterEqual(timing.resolve_ms, 0)
        self.assertEqual(before, graph.to_dict(generated.host))

    def test_bench_csv(self):
        """ Benchmark rows are written as CSV."""
        points = [scenarios.Point('size', scenarios.Scenario(22, 1, seed=1))]

        rows = scenarios.bench(points, repetitions=2, tgg=self.tgg)
        text = scenarios.to_csv(rows)

        self.assertEqual(1, len(rows))
        self.assertEqual(2, rows[0]['run'])
        lines = text.split('\r\n')
        self.assertEqual(','.join(scenarios.CSV_COLUMNS), lines[0])
        self.assertTrue(lines[1].startswith('size,22,1,1.0,2,'))

    def test_linear_fit(self):
        """ Linear fit recovers exact lines."""
        slope, intercept, r2 = scenarios.linear_fit([1, 2, 3, 4],
                                                    [3, 5, 7, 9])

        self.assertAlmostEqual(2.0, slope)
        self.assertAlmostEqual(1.0, intercept)
        self.assertAlmostEqual(1.0, r2)

        with self.assertRaises(ValueError):
            scenarios.linear_fit([1], [2])
        with self.assertRaises(ValueError):
            scenarios.linear_fit([1, 1], [2, 3])
