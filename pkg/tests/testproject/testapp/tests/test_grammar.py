import random

import networkx as nx
from django.test import SimpleTestCase

from tgg_sync import derivation, exceptions, graph, precedence
from tgg_sync.grammar import parse_grammar, print_grammar
from tgg_sync.operationalize import (BWD, FWD, SHORT_CUT, operationalize,
                                     print_operational)
from tgg_sync.tests.mixins import RunningExampleMixin

METAMODEL = 'metamodel {\n    src Class { name: string }\n}\n'


class GrammarTestCase(RunningExampleMixin, SimpleTestCase):
    """ Grammar text parsing, type checking and printing."""

    def test_running_example(self):
        """ Bundled grammar declares eight rules and four short-cuts."""
        self.assertEqual(['CD', 'ICD', 'ME', 'FE', 'P', 'G', 'GE', 'GL'],
                         self.tgg.rule_names)
        self.assertEqual(['CD-To-ICD', 'FE-To-FE', 'ME-To-ME', 'P-To-P'],
                         [s.name for s in self.tgg.shortcuts])
        self.assertEqual(frozenset({'c', 'd', 'cd'}),
                         self.tgg.rule('CD').create)

    def test_print_parse(self):
        """ Printed grammar parses back to the same rules."""
        text = print_grammar(self.tgg)
        parsed = parse_grammar(text)

        self.assertEqual(self.tgg.rules, parsed.rules)
        self.assertEqual(self.tgg.shortcuts, parsed.shortcuts)
        self.assertEqual(text, print_grammar(parsed))

    def test_parse_error_position(self):
        """ Syntax errors report line and column."""
        with self.assertRaises(exceptions.GrammarParseError) as ctx:
            parse_grammar('rule X {\n  ++src c Class;\n}')

        e = ctx.exception
        self.assertEqual('PARSE-ERROR', e.code)
        self.assertEqual(2, e.params['line'])
        self.assertEqual(11, e.params['col'])
        self.assertEqual('PARSE-ERROR', e.as_json()['error'])

    def test_unexpected_character(self):
        """ Characters outside the grammar alphabet are rejected."""
        with self.assertRaises(exceptions.GrammarParseError) as ctx:
            parse_grammar('rule X { ++src c: Class @ }')

        self.assertEqual(1, ctx.exception.params['line'])

    def test_unknown_type(self):
        """ Rule elements must use declared types."""
        text = METAMODEL + 'rule X {\n    ++src c: Klass;\n}\n'

        with self.assertRaises(exceptions.GrammarTypeError) as ctx:
            parse_grammar(text)

        self.assertEqual('TYPE-ERROR', ctx.exception.code)
        self.assertEqual('X', ctx.exception.params['rule'])
        self.assertEqual('c', ctx.exception.params['element'])

    def test_unknown_attribute(self):
        """ Equations must reference declared attributes."""
        text = METAMODEL + ('rule X {\n    ++src c: Class;\n'
                            '    eq c.title == "x";\n}\n')

        with self.assertRaises(exceptions.GrammarTypeError):
            parse_grammar(text)

    def test_duplicate_rule(self):
        """ Rule names are unique."""
        text = METAMODEL + 'rule X { ++src c: Class; }\n' * 2

        with self.assertRaises(exceptions.GrammarTypeError) as ctx:
            parse_grammar(text)

        self.assertEqual('duplicate rule name', ctx.exception.params['reason'])

    def test_without(self):
        """ Dropping a rule drops the short-cuts built on it."""
        tgg = self.tgg.without('P')

        self.assertNotIn('P', tgg.rule_names)
        self.assertEqual(['CD-To-ICD', 'FE-To-FE', 'ME-To-ME'],
                         [s.name for s in tgg.shortcuts])


class OperationalizeTestCase(RunningExampleMixin, SimpleTestCase):
    """ Operational rules derived from grammar rules."""

    def test_directed_rules(self):
        """ Forward rules translate the source side and create the rest."""
        fe = self.ops.fwd['FE']

        self.assertEqual('FE_FWD', fe.name)
        self.assertEqual(frozenset({'f', 'cf'}), fe.translates)
        self.assertEqual(frozenset({'e', 'de', 'fe'}), fe.create)
        self.assertEqual(frozenset({'c'}), fe.requires)
        self.assertEqual(frozenset({'e', 'de'}), self.ops.bwd['FE'].translates)
        self.assertEqual(frozenset({'fe'}), self.ops.cc['FE'].create)

    def test_filter_nacs(self):
        """ Nodes that no rule can attach an edge to get filter NACs."""
        (nac,) = self.ops.filter_nacs['CD', FWD]
        self.assertTrue(nac.filter)
        self.assertEqual([('subClass', 'c')],
                         [(e.type, e.target) for e in nac.edges])

        (nac,) = self.ops.filter_nacs['CD', BWD]
        self.assertEqual([('href', 'd')],
                         [(e.type, e.target) for e in nac.edges])

        self.assertEqual((), self.ops.filter_nacs['ICD', FWD])
        self.assertEqual((), self.ops.filter_nacs['FE', FWD])

    def test_shortcut(self):
        """ Short-cut keeps the overlap and re-creates the rest."""
        sc = self.ops.shortcuts['ME-To-ME']

        self.assertEqual(SHORT_CUT, sc.kind)
        self.assertEqual(('ME', 'ME'), sc.base)
        self.assertEqual(frozenset({'cm', 'de'}), sc.create)
        self.assertEqual(frozenset({'old_cm', 'old_de'}), sc.delete)
        origin = dict(sc.origin)
        self.assertEqual('m', origin['m'])
        self.assertEqual('old_c', origin['c'])

    def test_repair_rules(self):
        """ Forward repair expects the old source edge gone."""
        repair = self.ops.repair_fwd['ME-To-ME']

        self.assertEqual(['old_cm'], [e.name for e in repair.absent_edges])
        self.assertEqual(frozenset({'cm'}), repair.translates)
        self.assertEqual(frozenset({'de'}), repair.create)
        self.assertEqual(frozenset({'old_de'}), repair.delete)
        self.assertIn('absent', print_operational(repair))

    def test_all_rules(self):
        """ Every rule and short-cut yields its operational variants."""
        rules = self.ops.all_rules()

        self.assertEqual(8 * 5 + 4 * 4, len(rules))
        self.assertEqual(len(rules), len({r.name for r in rules}))

    def test_overlap_ill_typed(self):
        """ Overlaps must map created to created elements of one type."""
        text = print_grammar(self.tgg).replace(
            'CD-To-ICD: CD -> ICD overlap { c -> sc,',
            'CD-To-ICD: CD -> ICD overlap { c -> c,')

        with self.assertRaises(exceptions.OverlapIllTyped):
            operationalize(parse_grammar(text))


class DerivationTestCase(RunningExampleMixin, SimpleTestCase):
    """ Scheduled derivations and brute-force membership."""

    def test_schedule(self):
        """ Scheduled steps fix ids and bind context by selector."""
        host, trace = derivation.derive(self.tgg, [
            ('CD', {'c': 'C1', 'd': 'D1', 'cd': 'cd1'}),
            ('ME', {'c': 'C1', 'm': 'M2', 'e': 'E2', 'me': 'me2'}),
        ])

        self.assertEqual(['CD', 'ME'], [s.rule for s in trace])
        self.assertEqual('D1', trace[1].bindings['d'])
        self.assertEqual(host.nodes['M2'].attrs['name'],
                         host.nodes['E2'].attrs['name'])
        self.assertEqual([], graph.validate(host, self.tgg.types))

    def test_not_applicable(self):
        """ Steps without a match raise NotApplicable."""
        with self.assertRaises(exceptions.NotApplicable) as ctx:
            derivation.derive(self.tgg, [('ME', 0)])

        self.assertEqual(0, ctx.exception.params['step'])

    def test_random_derivation_is_seeded(self):
        """ Equal seeds give equal random derivations."""
        first, _ = derivation.derive(self.tgg, seed=3, length=6)
        second, _ = derivation.derive(self.tgg, seed=3, length=6)

        self.assertEqual(first, second)

    def test_membership(self):
        """ Derived triples are members; broken ones are not."""
        host, _ = derivation.derive(self.tgg, [('CD', 0)])
        self.assertEqual(derivation.YES,
                         derivation.member_bruteforce(self.tgg, host))

        host.set_attr(host.nodes_of_type(graph.TARGET, ['Doc'])[0],
                      'name', 'other')
        self.assertEqual(derivation.NO,
                         derivation.member_bruteforce(self.tgg, host))

    def test_membership_partial(self):
        """ Partial triples and unmatched nodes are not members."""
        host = graph.TripleGraph()
        host.add_node('C1', graph.SOURCE, 'Class', {'name': 'c1'})
        self.assertEqual(derivation.NO,
                         derivation.member_bruteforce(self.tgg, host))

        host.add_corr('cd1', 'C2D', 'C1', 'D1')
        self.assertEqual(derivation.NO,
                         derivation.member_bruteforce(self.tgg, host))

    def test_membership_depth(self):
        """ A depth cut yields UNKNOWN."""
        host, _ = derivation.derive(self.tgg, [('CD', 0), ('G', 0)])

        self.assertEqual(derivation.UNKNOWN, derivation.member_bruteforce(
            self.tgg, host, max_depth=1))

    def test_random_derivation_takes_first_match(self):
        """ Random steps replay as a schedule of first matches."""
        host, trace = derivation.derive(self.tgg, seed=3, length=6)

        replayed, _ = derivation.derive(self.tgg, [(s.rule, 0) for s in trace])

        self.assertEqual(host, replayed)

    def test_visited_states(self):
        """ States sharing a structure hash are told apart."""
        ring = nx.cycle_graph(6, create_using=nx.DiGraph)
        pair = nx.disjoint_union(nx.cycle_graph(3, create_using=nx.DiGraph),
                                 nx.cycle_graph(3, create_using=nx.DiGraph))
        for g in (ring, pair):
            nx.set_node_attributes(g, 'Class', 'text')
            nx.set_edge_attributes(g, 'subClass', 'text')
        oracle = derivation._Oracle(self.tgg, graph.TripleGraph(), 4)

        self.assertEqual(
            nx.weisfeiler_lehman_graph_hash(ring, node_attr='text',
                                            edge_attr='text'),
            nx.weisfeiler_lehman_graph_hash(pair, node_attr='text',
                                            edge_attr='text'))
        self.assertFalse(oracle.visited(ring))
        self.assertFalse(oracle.visited(pair))
        self.assertTrue(oracle.visited(ring.copy()))
        self.assertEqual(2, oracle.states)

    @staticmethod
    def mutate(host: graph.TripleGraph, rng: random.Random
               ) -> graph.TripleGraph:
        """ Removes an element, renames a node or adds a stray class."""
        elements = sorted(host.elements())
        nodes = [x for x in elements
                 if x in host.nodes and host.nodes[x].side != graph.CORR]
        choice = rng.randrange(3)
        if choice == 0:
            element = rng.choice(elements)
            if element in nodes:
                for edge in host.incident_edges(element):
                    host.remove(edge)
            host.remove(element)
        elif choice == 1 and nodes:
            host.set_attr(rng.choice(nodes), 'name', 'mutated')
        else:
            host.add_node('X1', graph.SOURCE, 'Class', {'name': 'x1'})
        return host

    def test_membership_matches_parser(self):
        """ Parsing succeeds exactly for brute-force members."""
        rng = random.Random(5)
        hosts = []
        for seed in range(400):
            host, _ = derivation.derive(self.tgg, seed=seed,
                                        length=rng.randint(1, 4))
            if len(host) > 11:
                continue
            hosts.append(host)
            hosts.append(self.mutate(host.copy(), rng))
            if len(hosts) >= 200:
                break
        checked = 0
        for index, host in enumerate(hosts):
            member = derivation.member_bruteforce(self.tgg, host)
            if member == derivation.UNKNOWN:
                continue
            try:
                precedence.parse_pg(self.tgg, host, self.ops)
            except exceptions.BudgetExhausted:
                continue
            except exceptions.NoCover:
                parsed = False
            else:
                parsed = True
            checked += 1
            with self.subTest(host=index, member=member):
                self.assertEqual(member == derivation.YES, parsed)
        self.assertGreater(checked, 100)
