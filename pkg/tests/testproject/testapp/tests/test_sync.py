from django.test import SimpleTestCase

from tgg_sync import conflicts, exceptions, graph, orchestration, signals
from tgg_sync.conflicts import (ATTRIBUTE_CHANGE, BOTH,
                                CORRESPONDENCE_PRESERVATION, CPC, NONE, PDC,
                                PRESERVE_DELETE, TABLE,
                                confirm, format_table, kinds_for,
                                potential_conflicts, report)
from tgg_sync.delta import delta_from_dict
from tgg_sync.dpg import (HASH, MINUS, NAC, SLASH, DeltaPrecedenceGraph,
                          annotation_rows)
from tgg_sync.orchestration import (Orchestration, Plan, TAKE_SOURCE,
                                    TAKE_TARGET)
from tgg_sync.restore import (FRAGMENTS, detect, execute, local_cc, prepare,
                              propagate, rollback, run, translate)
from tgg_sync.tests.mixins import RunningExampleMixin


def ann(dpg, node_id):
    src, trg = dpg.ann(node_id)
    return ''.join(sorted(src)), ''.join(sorted(trg))


class AnnotationTestCase(RunningExampleMixin, SimpleTestCase):
    """ Annotating the precedence graph with concurrent deltas."""

    def setUp(self):
        super().setUp()
        self.dpg = self.prepare_example().dpg

    def test_base_annotations(self):
        """ Broken and changed base nodes are annotated per side."""
        self.assertEqual(['CD2', 'FE7', 'ME6', 'ME8', 'P10', 'P9'],
                         self.dpg.annotated())
        self.assertEqual(('n', ''), ann(self.dpg, 'CD2'))
        self.assertEqual(('-', ''), ann(self.dpg, 'ME6'))
        self.assertEqual(('/', '/'), ann(self.dpg, 'FE7'))
        self.assertEqual(('#', '#'), ann(self.dpg, 'ME8'))
        self.assertEqual(('-', ''), ann(self.dpg, 'P9'))
        self.assertEqual(('/', ''), ann(self.dpg, 'P10'))
        self.assertFalse(self.dpg.is_broken('ME8'))
        self.assertTrue(self.dpg.is_intact('CD1'))

    def test_candidates(self):
        """ Unpropagated elements get source and target candidates."""
        self.assertEqual(('+', 'u'), ann(self.dpg, "CD3'"))
        self.assertEqual(('*', 'u'), ann(self.dpg, "ICD2'"))
        self.assertEqual(('+', 'u'), ann(self.dpg, "FE4'"))
        self.assertEqual(('*', 'u'), ann(self.dpg, "FE7'"))
        self.assertEqual(('*', 'u'), ann(self.dpg, "P10'"))
        self.assertEqual(('u', '+'), ann(self.dpg, "FE4''"))
        self.assertEqual(('u', '+'), ann(self.dpg, "ME4''"))
        self.assertEqual(('u', '*'), ann(self.dpg, "ME6''"))
        for label in ("GL4''", "GL5''", "GL6''", "GL7''"):
            self.assertEqual(('u', '+'), ann(self.dpg, label))
        self.assertNotIn("CD2'", self.dpg)

    def test_unpropagated(self):
        """ New elements and leftovers of broken nodes are unpropagated."""
        self.assertTrue({'C3', 'F4', 'E4', 'gl6', 'P10', 'E6'}
                        <= self.dpg.unpropagated)
        self.assertNotIn('M8', self.dpg.unpropagated)
        self.assertNotIn('P9', self.dpg.unpropagated)

    def test_dependencies(self):
        """ Candidates hang below the nodes creating their context."""
        self.assertIn('ME6', self.dpg.dependencies("GL6''"))
        self.assertIn("GL6''", self.dpg.dependents_closure('CD1'))
        order = self.dpg.candidate_order(["FE7'", "CD3'"])
        self.assertEqual(["CD3'", "FE7'"], order)

    def test_rows(self):
        """ Annotation rows list base nodes before candidates."""
        rows = annotation_rows(self.dpg)

        self.assertEqual({'node': 'CD2', 'rule': 'CD', 'candidate': False,
                          'src': ['n'], 'trg': []}, rows[0])
        self.assertTrue(all(r['candidate'] for r in rows[6:]))
        data = self.dpg.to_dict()
        self.assertEqual(len(rows), sum(
            1 for n in data['nodes'] if n['srcAnn'] or n['trgAnn']))


class ConflictTestCase(RunningExampleMixin, SimpleTestCase):
    """ Conflict detection on the running example."""

    def setUp(self):
        super().setUp()
        self.conflicts = self.detect_example()
        self.by = self.by_anchor(self.conflicts)

    def test_detected(self):
        """ Three conflicts, numbered in anchor order."""
        self.assertEqual([('C1', 'FE7'), ('C2', 'ME6'), ('C3', 'ME8')],
                         [(c.id, c.anchor) for c in self.conflicts])

    def test_preserve_delete(self):
        """ Deleted method whose entry got a new glossary link."""
        conflict = self.by['ME6']

        self.assertEqual(PRESERVE_DELETE, conflict.kind)
        self.assertEqual(("GL6''", 'ME6', 'P10', 'P9'), conflict.scope)
        self.assertEqual(('gl6',), conflict.evidence)
        self.assertIn('M6', conflict.scope_elements)
        self.assertEqual(1, conflict.stats['addedTrg'])

    def test_correspondence_preservation(self):
        """ Field and entry moved to different containers."""
        conflict = self.by['FE7']

        self.assertEqual(CORRESPONDENCE_PRESERVATION, conflict.kind)
        self.assertEqual(('F7', 'E7'), conflict.evidence)
        self.assertIn("FE7'", conflict.scope)

    def test_attribute_change(self):
        """ Method and entry renamed differently."""
        conflict = self.by['ME8']

        self.assertEqual(ATTRIBUTE_CHANGE, conflict.kind)
        self.assertEqual(('ME8',), conflict.scope)
        self.assertEqual(('E8', 'M8'), conflict.evidence)
        self.assertEqual(("E8.name: 'm8' -> 'b8'",
                          "M8.name: 'm8' -> 'a8'"), conflict.details)

    def test_potential_and_confirm(self):
        """ Table kinds are confirmed one node at a time."""
        dpg = self.prepare_example().dpg
        potential = dict(potential_conflicts(dpg))

        self.assertIn(PRESERVE_DELETE, potential['ME6'])
        self.assertIn(ATTRIBUTE_CHANGE, potential['ME8'])
        self.assertNotIn('CD1', potential)

        conflict = confirm(dpg, self.ops, 'ME8', ATTRIBUTE_CHANGE)
        self.assertEqual(('E8', 'M8'), conflict.evidence)
        self.assertIsNone(confirm(dpg, self.ops, 'ME8', PRESERVE_DELETE))

    def test_kinds_table(self):
        """ Annotation pairs map to the conflict kinds they may signal."""
        self.assertEqual(frozenset({ATTRIBUTE_CHANGE}),
                         kinds_for({'#'}, {'#'}))
        self.assertEqual(frozenset(), kinds_for({'-'}, {'-'}))
        self.assertEqual(frozenset(), kinds_for(set(), set()))

    def test_report(self):
        """ Reports and tables list every conflict."""
        data = report(self.conflicts)
        self.assertEqual(['C1', 'C2', 'C3'], [c['id'] for c in data])

        table = format_table(self.conflicts).splitlines()
        self.assertEqual(2 + len(self.conflicts), len(table))
        self.assertTrue(table[0].startswith('id'))


class PotentialConflictTestCase(RunningExampleMixin, SimpleTestCase):
    """ Single-sided edits of the base triple and the kinds they signal."""

    def annotate(self, side, *ops):
        host = self.load_base()
        delta = delta_from_dict({'side': side, 'ops': list(ops)})
        deltas = (delta, None) if side == 'src' else (None, delta)
        return prepare(self.ops, host, self.load_pg(host), *deltas).dpg

    def test_deleted(self):
        """ Deleting everything a node created on one side."""
        dpg = self.annotate('src', {'op': 'DeleteEdge', 'id': 'mp9'},
                            {'op': 'DeleteNode', 'id': 'P9'})

        self.assertEqual(('-', ''), ann(dpg, 'P9'))
        self.assertEqual([('P9', PDC)], potential_conflicts(dpg))

    def test_deleted_target(self):
        """ Deleted entry also damages the parameters hanging below it."""
        dpg = self.annotate('trg', {'op': 'DeleteEdge', 'id': 'de6'},
                            {'op': 'DeleteNode', 'id': 'E6'})

        self.assertEqual(('', '-'), ann(dpg, 'ME6'))
        self.assertEqual(('', '/'), ann(dpg, 'P9'))
        self.assertEqual([('ME6', PDC), ('P10', BOTH), ('P9', BOTH)],
                         potential_conflicts(dpg))

    def test_damaged(self):
        """ Deleting part of the created elements."""
        dpg = self.annotate('src', {'op': 'DeleteEdge', 'id': 'cf7'})

        self.assertEqual(('/', ''), ann(dpg, 'FE7'))
        self.assertEqual([('FE7', BOTH)], potential_conflicts(dpg))

    def test_changed(self):
        """ One-sided attribute change is no conflict on its own."""
        dpg = self.annotate('src', {'op': 'SetAttr', 'node': 'M8',
                                    'attr': 'name', 'old': 'm8',
                                    'new': 'a8'})

        self.assertEqual(('#', ''), ann(dpg, 'ME8'))
        self.assertEqual([], potential_conflicts(dpg))

    def test_nac_violated(self):
        """ A new super class turns a root class into a sub class."""
        dpg = self.annotate(
            'src',
            {'op': 'AddNode', 'id': 'C3', 'type': 'Class',
             'attrs': {'name': 'c3'}},
            {'op': 'AddEdge', 'id': 'sub3', 'type': 'subClass',
             'source': 'C3', 'target': 'C2'})

        self.assertEqual(('n', ''), ann(dpg, 'CD2'))
        self.assertEqual([('CD2', CPC)], potential_conflicts(dpg))

    def test_added(self):
        """ Added elements only produce candidates."""
        dpg = self.annotate(
            'src',
            {'op': 'AddNode', 'id': 'F4', 'type': 'Field',
             'attrs': {'name': 'f4'}},
            {'op': 'AddEdge', 'id': 'cf4', 'type': 'fields',
             'source': 'C1', 'target': 'F4'})

        self.assertEqual(('+', 'u'), ann(dpg, "FE4'"))
        self.assertEqual([], dpg.annotated())
        self.assertEqual([], potential_conflicts(dpg))

    def test_repropagated(self):
        """ Moved field is a leftover of its broken node."""
        dpg = self.annotate(
            'src', {'op': 'DeleteEdge', 'id': 'cf7'},
            {'op': 'AddEdge', 'id': 'c1f7', 'type': 'fields',
             'source': 'C1', 'target': 'F7'})
        moved = [k for k, node in dpg.candidates.items()
                 if 'F7' in node.created]

        self.assertEqual(1, len(moved))
        self.assertEqual(('*', 'u'), ann(dpg, moved[0]))
        self.assertEqual([('FE7', BOTH)], potential_conflicts(dpg))

    def test_table_rows(self):
        """ Every symbol pair yields exactly its table entry."""
        host = self.load_base()
        pg = self.load_pg(host)
        symbols = (NONE, MINUS, SLASH, HASH, NAC)
        for s in symbols:
            for t in symbols:
                with self.subTest(src=s, trg=t):
                    annotation = ({s} - {NONE}, {t} - {NONE})
                    dpg = DeltaPrecedenceGraph(pg, host,
                                               {'ME8': annotation})
                    kinds = TABLE.get((s, t), frozenset())

                    self.assertEqual(kinds, kinds_for(*annotation))
                    expected = [('ME8', kinds)] if kinds else []
                    self.assertEqual(expected, potential_conflicts(dpg))

    def test_combined_symbols(self):
        """ Several symbols on a side join their entries."""
        self.assertEqual(PDC | {ATTRIBUTE_CHANGE},
                         kinds_for({'-', '#'}, {'#'}))
        self.assertEqual(frozenset(), kinds_for({'+'}, {'u'}))
        self.assertEqual(frozenset(), kinds_for({'*'}, {'u'}))


class OrchestrationTestCase(RunningExampleMixin, SimpleTestCase):
    """ Orchestration documents and evaluator conditions."""

    def test_fixture(self):
        """ Bundled orchestration takes every conflict from the source."""
        orch = self.load_orchestration()

        self.assertEqual(orchestration.default().to_dict(), orch.to_dict())

    def test_condition(self):
        """ Conditions compare conflict statistics and kinds."""
        check = orchestration.parse_condition(
            'not (deletedSrc > 1 or kind != "attribute-change")')

        self.assertTrue(check({'deletedSrc': 0, 'kind': ATTRIBUTE_CHANGE}))
        self.assertFalse(check({'deletedSrc': 2, 'kind': ATTRIBUTE_CHANGE}))
        self.assertFalse(check({'deletedSrc': 0, 'kind': PRESERVE_DELETE}))

    def test_evaluator_swaps_strategy(self):
        """ Evaluators replace the strategy and keep the steps around it."""
        orch = orchestration.from_dict({
            'steps': ['resolve-conflict'],
            'resolve': {ATTRIBUTE_CHANGE: {'pre': 'repair',
                                           'strategy': 'take-source'}},
            'evaluators': [{'when': 'changedTrg >= 1',
                            'strategy': 'take-target'}],
        })
        conflict = self.by_anchor(self.detect_example())['ME8']

        self.assertEqual(Plan(TAKE_TARGET, ('repair',)),
                         orch.plan_for(conflict))

    def test_invalid(self):
        """ Malformed documents raise ORCH-INVALID."""
        documents = [
            {'resolve': {}},
            {'steps': ['shuffle']},
            {'steps': ['translate', 'local-cc']},
            {'steps': ['clean-up', 'propagate']},
            {'steps': [], 'resolve': {'merge': {'strategy': 'take-source'}}},
            {'steps': [], 'resolve': {PRESERVE_DELETE: {'strategy': 'merge'}}},
            {'steps': [], 'resolve': {PRESERVE_DELETE: {
                'strategy': 'preserve', 'post': ['clean-up']}}},
            {'steps': [], 'evaluators': [{'strategy': 'preserve'}]},
            {'steps': [], 'evaluators': [{'when': 'size > 1',
                                          'strategy': 'preserve'}]},
        ]
        for data in documents:
            with self.subTest(data=data):
                with self.assertRaises(exceptions.OrchestrationInvalid) as ctx:
                    orchestration.from_dict(data)
                self.assertEqual('ORCH-INVALID', ctx.exception.code)

        with self.assertRaises(exceptions.OrchestrationInvalid):
            orchestration.loads('{steps')


class RestoreTestCase(RunningExampleMixin, SimpleTestCase):
    """ Consistency restoration of the running example."""

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.result = cls.run_example()
        cls.host = cls.result.host

    def test_consistent(self):
        """ Every conflict is resolved and the result is consistent."""
        self.assertEqual([], self.result.diagnostics)
        self.assertEqual([], self.result.unresolved)
        self.assertEqual({'C1': TAKE_SOURCE, 'C2': TAKE_SOURCE,
                          'C3': TAKE_SOURCE}, self.result.strategies)
        self.assertEqual({}, self.result.annotations)

    def test_deletion_wins(self):
        """ Source deletion is propagated and the new link is revoked."""
        for element in ('M6', 'P9', 'E6', 'gl6'):
            self.assertNotIn(element, self.host)
        for element in ('gl4', 'gl5', 'gl7'):
            self.assertIn(element, self.host)

    def test_moved_parameter(self):
        """ Moved parameter now belongs to the entry of its new method."""
        self.assertEqual('M8', self.container(self.host, 'P10', 'params'))
        self.assertTrue(self.corr_between(self.host, 'P10', 'E8'))

    def test_rename(self):
        """ Source rename is taken over by the entry."""
        self.assertEqual('a8', self.host.nodes['M8'].attrs['name'])
        self.assertEqual('a8', self.host.nodes['E8'].attrs['name'])

    def test_local_correlation(self):
        """ Field and entry added on both sides are correlated."""
        self.assertTrue(self.corr_between(self.host, 'F4', 'E4'))

    def test_moved_field(self):
        """ Field moved to a new class keeps its entry under a new doc."""
        doc = self.container(self.host, 'E7', 'entries')
        self.assertNotIn(doc, ('D1', 'D2'))
        self.assertTrue(self.corr_between(self.host, 'C3', doc))
        self.assertEqual('C3', self.container(self.host, 'F7', 'fields'))
        self.assertEqual(doc, self.container(self.host, 'D2', 'href'))

    def test_report(self):
        """ Reports carry the initial annotations and the resolution log."""
        data = self.result.to_dict()

        self.assertEqual(3, data['summary']['conflicts'])
        self.assertEqual(3, data['summary']['resolved'])
        self.assertIn({'node': 'ME6', 'rule': 'ME', 'candidate': False,
                       'src': ['-'], 'trg': []}, data['initialAnnotations'])
        self.assertTrue(any(e.get('conflict') == 'C3' for e in data['log']))
        self.assertIn('diagnostics: none', self.result.format_text())

    def test_deterministic(self):
        """ Repeated runs give identical conflict lists and reports."""
        orch = self.load_orchestration()
        detected, reports = set(), set()
        for _ in range(10):
            state = self.prepare_example()
            found = detect(state)
            detected.add(conflicts.dumps(found, state.dpg))
            reports.add(execute(state, orch, found).dumps())

        self.assertEqual(1, len(detected))
        self.assertEqual(1, len(reports))

    def test_inputs_untouched(self):
        """ Base triple and precedence graph are not modified."""
        host = self.load_base()
        pg = self.load_pg(host)
        before = graph.to_dict(host), pg.to_dict()

        run(self.ops, host, pg, *self.load_deltas())

        self.assertEqual(before, (graph.to_dict(host), pg.to_dict()))


class RollbackTestCase(RunningExampleMixin, SimpleTestCase):
    """ Revoking rule applications whose created elements were deleted."""

    def test_rollback(self):
        """ The dangling correspondence of a deleted parameter is removed."""
        host = self.load_base()
        delta_s = delta_from_dict({'side': 'src', 'ops': [
            {'op': 'DeleteEdge', 'id': 'mp9'},
            {'op': 'DeleteNode', 'id': 'P9'},
        ]})
        state = prepare(self.ops, host, self.load_pg(host), delta_s)

        self.assertEqual(('-', ''), ann(state.dpg, 'P9'))

        rollback(state)

        self.assertNotIn('pe9', state.host)
        self.assertNotIn('P9', state.pg)
        entry = state.log[-1]
        self.assertEqual(('rollback', 'P', 'P9', ('pe9',)),
                         (entry.fragment, entry.rule, entry.node,
                          entry.deleted))
        self.assertEqual([], state.dpg.annotated())
        self.assertIn('pe9', host)


class FragmentTestCase(RunningExampleMixin, SimpleTestCase):
    """ Single fragments over the detected running example."""

    def detected_state(self):
        state = self.prepare_example()
        detect(state)
        return state

    def test_applied_twice(self):
        """ Applying a fragment again changes nothing."""
        for name, fragment in FRAGMENTS.items():
            with self.subTest(fragment=name):
                state = self.detected_state()
                fragment(state)
                steps = len(state.log)
                before = graph.to_dict(state.host), state.pg.to_dict()

                fragment(state)

                self.assertEqual(steps, len(state.log))
                self.assertEqual(before, (graph.to_dict(state.host),
                                          state.pg.to_dict()))

    def test_propagate_repairs_translated_context(self):
        """ Short-cut repair waiting for a translated class is applied."""
        state = self.detected_state()

        propagate(state)

        self.assertIn(('repair', 'CD-To-ICD_FWD'),
                      {(e.fragment, e.rule) for e in state.log})

    def test_translate_without_local_correlation(self):
        """ Field and entry added on both sides get a counterpart each."""
        duplicated = self.prepare_example()
        translate(duplicated)
        correlated = self.prepare_example()
        local_cc(correlated)
        translate(correlated)
        base = self.load_base()

        self.assertTrue(self.corr_between(correlated.host, 'F4', 'E4'))
        self.assertEqual(1, len(correlated.host.corrs_by_src('F4')))
        self.assertFalse(self.corr_between(duplicated.host, 'F4', 'E4'))
        host = duplicated.host
        entry = host.nodes[host.corrs_by_src('F4')[0]].trg
        field = host.nodes[host.corrs_by_trg('E4')[0]].src
        for element in (entry, field):
            self.assertNotIn(element, base)
            self.assertEqual('f4', host.nodes[element].attrs['name'])
        self.assertGreater(len(duplicated.host), len(correlated.host))


class OrchestrationVariantsTestCase(RunningExampleMixin, SimpleTestCase):
    """ Restoration under other orchestrations."""

    def test_without_plans_and_clean_up(self):
        """ Conflicts without a plan abort the run."""
        orch = Orchestration(('local-cc', 'translate', 'repair',
                              'resolve-conflict', 'propagate'))

        with self.assertRaises(exceptions.UnresolvedConflict):
            self.run_example(orch)

    def test_clean_up_gives_up(self):
        """ Clean-up restores consistency leaving conflicts unresolved."""
        orch = Orchestration(('local-cc', 'translate', 'repair',
                              'resolve-conflict', 'propagate', 'clean-up'))

        result = self.run_example(orch)

        self.assertEqual(['C1', 'C2', 'C3'], result.unresolved)
        self.assertEqual([], result.diagnostics)
        self.assertTrue(result.removed)

    def test_take_target(self):
        """ Target rename wins when the target is taken."""
        orch = orchestration.from_dict(dict(
            self.read_json('orchestration.json'),
            evaluators=[{'when': 'kind == "attribute-change"',
                         'strategy': 'take-target'}]))

        result = self.run_example(orch)

        self.assertEqual(TAKE_TARGET, result.strategies['C3'])
        self.assertEqual('b8', result.host.nodes['E8'].attrs['name'])
        self.assertEqual('b8', result.host.nodes['M8'].attrs['name'])

    def test_no_deltas(self):
        """ Empty deltas leave a consistent triple as it is."""
        host = self.load_base()

        result = run(self.ops, host, self.load_pg(host))

        self.assertEqual([], result.conflicts)
        self.assertEqual(host, result.host)

    def test_signals(self):
        """ Detection and completion are announced."""
        received = []

        def on_detected(sender, *, conflicts, **kwargs):
            received.append(len(conflicts))

        signals.conflicts_detected.connect(on_detected)
        try:
            self.run_example()
        finally:
            signals.conflicts_detected.disconnect(on_detected)

        self.assertEqual([3], received)
