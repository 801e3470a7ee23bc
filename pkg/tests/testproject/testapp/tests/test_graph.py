from django.test import SimpleTestCase

from tgg_sync import exceptions, graph
from tgg_sync.matching import (AttrCond, Nac, PEdge, PNode, Pattern,
                               RuleGraph, Slot, apply, find_matches)
from tgg_sync.tests.mixins import RunningExampleMixin


class TripleGraphTestCase(RunningExampleMixin, SimpleTestCase):
    """ Triple graph construction, indexes and serialization."""

    def setUp(self):
        super().setUp()
        self.host = self.load_base()

    def test_base_is_valid(self):
        """ The bundled base model type-checks without diagnostics."""
        self.assertEqual([], graph.validate(self.host, self.tgg.types))
        self.assertTrue(self.host.is_total())

    def test_indexes(self):
        """ Incidence and correspondence indexes follow the elements."""
        self.assertEqual(['cf5', 'cm6'], self.host.out_edges('C1'))
        self.assertEqual(['cd2'], self.host.corrs_by_src('C2'))
        self.assertEqual(['me8', 'pe11'], self.host.corrs_by_trg('E8'))
        self.assertEqual(['M6', 'M8'],
                         self.host.nodes_of_type(graph.SOURCE, ['Method']))

    def test_remove_keeps_dangling_corr(self):
        """ Removing a node leaves its correspondence partial."""
        for edge_id in self.host.incident_edges('P9'):
            self.host.remove(edge_id)
        self.host.remove('P9')

        self.assertFalse(self.host.is_total())
        self.assertTrue(self.host.is_dangling('pe9'))
        diagnostics = graph.validate(self.host, self.tgg.types)
        self.assertEqual(1, len(diagnostics))
        self.assertEqual('DANGLING-REF', diagnostics[0].kind)
        self.assertTrue(diagnostics[0].partial)
        data = graph.to_dict(self.host)
        corr = {c['id']: c for c in data['corr']}
        self.assertIsNone(corr['pe9']['src'])

    def test_validate_types(self):
        """ Unknown types, attribute kinds and cross-side edges are found."""
        self.host.add_node('X1', graph.SOURCE, 'Interface')
        self.host.set_attr('D1', 'version', 'one')
        self.host.add_edge('bad', graph.SOURCE, 'fields', 'C1', 'E5')

        kinds = {(d.kind, d.element)
                 for d in graph.validate(self.host, self.tgg.types)}

        self.assertEqual({('UNKNOWN-TYPE', 'X1'), ('ATTR-KIND', 'D1'),
                          ('CROSS-SIDE', 'bad')}, kinds)

    def test_duplicate_id(self):
        """ One id space is shared by nodes, edges and correspondences."""
        with self.assertRaises(ValueError):
            self.host.add_node('cf5', graph.SOURCE, 'Class')

    def test_json(self):
        """ JSON documents load back into an equal triple graph."""
        copy = graph.loads(graph.dumps(self.host))
        self.assertEqual(self.host, copy)
        self.assertEqual(self.host, self.host.copy())

    def test_isomorphic_copy(self):
        """ Renaming ids keeps the structure hash and finds an isomorphism."""
        data = graph.to_dict(self.host)
        text = graph.dumps(self.host).replace('"C1"', '"K1"')
        renamed = graph.loads(text)

        self.assertNotEqual(data, graph.to_dict(renamed))
        self.assertEqual(graph.structure_hash(self.host),
                         graph.structure_hash(renamed))
        self.assertTrue(list(graph.isomorphisms(self.host, renamed)))

    def test_vicinity(self):
        """ Vicinity expands through edges and correspondences."""
        self.assertEqual({'P10', 'mp10', 'pe10'},
                         self.host.vicinity(['P10'], 1))
        self.assertIn('E6', self.host.vicinity(['P10'], 2))


class MatchingTestCase(RunningExampleMixin, SimpleTestCase):
    """ Pattern matching and rule application."""

    def setUp(self):
        super().setUp()
        self.host = self.load_base()
        self.method_entry = Pattern(
            nodes=(PNode('m', graph.SOURCE, 'Method'),
                   PNode('e', graph.TARGET, 'Entry'),
                   PNode('me', graph.CORR, 'M2E', 'm', 'e')),
            conds=(AttrCond(Slot('m', 'name'), Slot('e', 'name')),))

    def test_find_matches(self):
        """ Matches are injective, typed and in canonical order."""
        matches = find_matches(self.method_entry, self.host, self.tgg.types)

        self.assertEqual([{'m': 'M6', 'e': 'E6', 'me': 'me6'},
                          {'m': 'M8', 'e': 'E8', 'me': 'me8'}],
                         [m.bindings for m in matches])

    def test_seed(self):
        """ Seeds restrict matches; incompatible seeds raise."""
        matches = find_matches(self.method_entry, self.host, self.tgg.types,
                               seed={'m': 'M8'})
        self.assertEqual(['me8'], [m.bindings['me'] for m in matches])

        with self.assertRaises(exceptions.IncompatibleSeed):
            find_matches(self.method_entry, self.host, self.tgg.types,
                         seed={'m': 'E8'})

    def test_attribute_conditions(self):
        """ Equations filter matches unless switched off."""
        self.host.set_attr('E8', 'name', 'b8')
        matches = find_matches(self.method_entry, self.host, self.tgg.types)
        self.assertEqual(['M6'], [m.bindings['m'] for m in matches])

        matches = find_matches(self.method_entry, self.host, self.tgg.types,
                               check_conds=False)
        self.assertEqual(2, len(matches))

    def test_nac(self):
        """ A NAC forbids methods having parameters."""
        no_params = Pattern(
            nodes=(PNode('m', graph.SOURCE, 'Method'),),
            nacs=(Nac(graph.SOURCE,
                      (PNode('p', graph.SOURCE, 'Parameter'),),
                      (PEdge('mp', graph.SOURCE, 'params', 'm', 'p'),)),))

        self.assertEqual([], find_matches(no_params, self.host,
                                          self.tgg.types))

        self.host.remove('mp11')
        matches = find_matches(no_params, self.host, self.tgg.types)
        self.assertEqual(['M8'], [m.bindings['m'] for m in matches])

    def test_apply_dangling_edge(self):
        """ Deleting a node with a surviving incident edge is refused."""
        pattern = Pattern(nodes=(PNode('m', graph.SOURCE, 'Method'),))
        rule = RuleGraph('drop', pattern, delete=frozenset({'m'}))
        match = find_matches(pattern, self.host, self.tgg.types,
                             seed={'m': 'M8'})[0]

        with self.assertRaises(exceptions.DanglingEdge):
            apply(rule, match, self.host, self.tgg.types)

        self.assertIn('M8', self.host)

    def test_apply_creates_with_equations(self):
        """ Created attributes follow equations from matched values."""
        pattern = Pattern(
            nodes=(PNode('c', graph.SOURCE, 'Class'),
                   PNode('f', graph.SOURCE, 'Field')),
            edges=(PEdge('cf', graph.SOURCE, 'fields', 'c', 'f'),),
            conds=(AttrCond(Slot('f', 'name'), Slot('c', 'name')),))
        rule = RuleGraph('field', pattern, frozenset({'f', 'cf'}))
        match = find_matches(rule.lhs(), self.host, self.tgg.types,
                             seed={'c': 'C2'})[0]

        application = apply(rule, match, self.host, self.tgg.types,
                            ids={'f': 'F99'})

        self.assertEqual('F99', application.created['f'])
        self.assertEqual('c2', self.host.nodes['F99'].attrs['name'])
        edge = self.host.edges[application.created['cf']]
        self.assertEqual(('C2', 'F99'), (edge.source, edge.target))
