from admin_smoke.tests import AdminTests, AdminBaseTestCase, BaseTestCase
from django.core.exceptions import ValidationError

from tgg_sync import admin, models
from tgg_sync.grammar import print_grammar
from tgg_sync.orchestration import Orchestration
from tgg_sync.tests.mixins import RunningExampleMixin

try:
    from tgg_sync.tests.factories import (ConflictRecordFactory,
                                          NodeAnnotationFactory)
except ImportError:  # pragma: no cover
    ConflictRecordFactory = models.ConflictRecord.objects
    NodeAnnotationFactory = models.NodeAnnotation.objects


class SyncBaseTestCase(RunningExampleMixin, BaseTestCase):
    """ Common methods for test cases."""

    @classmethod
    def setUpTestData(cls):
        super().setUpTestData()
        cls.grammar = cls.create_grammar()
        cls.sync_run = models.SyncRun.objects.create(grammar=cls.grammar)
        cls.conflict = ConflictRecordFactory.create(
            run=cls.sync_run, conflict_id='C1', anchor='FE7',
            kind='correspondence-preservation', scope=['FE7'],
            strategy='take-source')
        cls.annotation = NodeAnnotationFactory.create(
            run=cls.sync_run, node='X1', rule='CD',
            src=models.annotation_mask('-/'), trg=models.annotation_mask('u'))


class GrammarTestCase(SyncBaseTestCase):

    def test_tgg(self):
        """ Check stored grammar text is parsed."""
        self.assertEqual(self.grammar.tgg().rule_names, self.tgg.rule_names)
        self.assertEqual(str(self.grammar), 'running-example')

    def test_validate_syntax(self):
        """ Grammar with syntax error can't be saved."""
        grammar = models.Grammar(slug='broken',
                                 text='rule X {\n  ++src c Class;\n}')

        with self.assertRaises(ValidationError) as ctx:
            grammar.full_clean()

        self.assertIn('text', ctx.exception.message_dict)

    def test_validate_shortcut(self):
        """ Ill-typed short-cut overlap is rejected."""
        text = print_grammar(self.tgg).replace(
            'CD-To-ICD: CD -> ICD overlap { c -> sc,',
            'CD-To-ICD: CD -> ICD overlap { c -> c,')
        grammar = models.Grammar(slug='overlap', text=text)

        with self.assertRaises(ValidationError) as ctx:
            grammar.full_clean()

        self.assertEqual(ctx.exception.error_dict['text'][0].code,
                         'OVERLAP-ILLTYPED')

    def test_validate_orchestration(self):
        """ Orchestration JSON is checked on save."""
        self.sync_run.full_clean()

        self.sync_run.orchestration = self.read_json('orchestration.json')
        self.sync_run.full_clean()

        self.sync_run.orchestration = {'steps': ['clean-up', 'translate']}
        with self.assertRaises(ValidationError) as ctx:
            self.sync_run.full_clean()
        self.assertIn('orchestration', ctx.exception.message_dict)


class SyncRunTestCase(SyncBaseTestCase):

    @classmethod
    def setUpTestData(cls):
        super().setUpTestData()
        cls.result = cls.run_example()

    def test_record(self):
        """ Check finished run is stored with conflicts and annotations."""
        orch = self.load_orchestration()

        run = models.SyncRun.objects.record(self.grammar, self.result, orch)

        self.assertEqual(run.status, models.SyncRun.CONSISTENT)
        self.assertEqual(run.report, self.result.to_dict())
        self.assertEqual(run.orchestration, orch.to_dict())
        conflicts = run.conflicts.order_by('conflict_id')
        self.assertEqual(
            [(c.conflict_id, c.anchor, c.strategy) for c in conflicts],
            [('C1', 'FE7', 'take-source'), ('C2', 'ME6', 'take-source'),
             ('C3', 'ME8', 'take-source')])
        self.assertEqual(run.annotations.count(), len(self.result.initial))

    def test_record_unresolved(self):
        """ Conflicts left by clean-up mark the run unresolved."""
        result = self.run_example(Orchestration((
            'local-cc', 'translate', 'repair', 'resolve-conflict',
            'propagate', 'clean-up')))

        run = models.SyncRun.objects.record(self.grammar, result)

        self.assertEqual(run.status, models.SyncRun.UNRESOLVED)
        self.assertEqual(run.orchestration, {})
        self.assertEqual(set(run.conflicts.values_list('strategy', flat=True)),
                         {''})

    def test_annotation_label(self):
        """ Check annotation bit fields render as symbols."""
        run = models.SyncRun.objects.record(self.grammar, self.result)
        labels = dict(run.annotations.values_list('node', 'id'))

        def label(node):
            return models.NodeAnnotation.objects.get(pk=labels[node]).label()

        self.assertEqual(label('ME6'), '(-|)')
        self.assertEqual(label('FE7'), '(/|/)')
        self.assertEqual(label('ME8'), '(#|#)')
        self.assertEqual(label("FE7'"), '(*|u)')

    def test_annotation_mask(self):
        """ Check symbol to bit mask mapping."""
        annotation = NodeAnnotationFactory.create(
            run=self.sync_run, src=models.annotation_mask('+'),
            trg=models.annotation_mask('u'))
        annotation.refresh_from_db()

        self.assertTrue(annotation.src.added)
        self.assertFalse(annotation.src.deleted)
        self.assertEqual(annotation.label(), '(+|u)')
        self.assertEqual(models.annotation_mask(''), 0)


class GrammarAdminTestCase(SyncBaseTestCase, AdminTests, AdminBaseTestCase):
    model_admin = admin.GrammarAdmin
    model = models.Grammar
    object_name = 'grammar'

    def transform_to_new(self, data: dict) -> dict:
        data['slug'] = 'copy'
        return data


class SyncRunAdminTestCase(SyncBaseTestCase, AdminTests, AdminBaseTestCase):
    model_admin = admin.SyncRunAdmin
    model = models.SyncRun
    object_name = 'sync_run'
    prefix = 'conflicts'

    def transform_to_new(self, data: dict) -> dict:
        self.reset_inline_data(data, self.prefix, 'run')
        self.reset_inline_data(data, 'annotations', 'run')
        return data

    def test_conflict_inline(self):
        """ Conflict rows are editable from the run page."""
        r = self.post_changeform(fields={f'{self.prefix}-0-strategy':
                                         'take-target'})

        self.assertFalse(self.get_errors_from_response(r))
        self.assertEqual(r.status_code, 302)
        self.assert_object_fields(self.conflict, strategy='take-target')

    def test_annotation_inline(self):
        """ Annotation flags are saved from checkboxes."""
        r = self.post_changeform(fields={
            'annotations-0-trg': ['changed', 'damaged'],
            'annotations-0-candidate': True,
        })

        self.assertFalse(self.get_errors_from_response(r))
        self.assertEqual(r.status_code, 302)
        self.annotation.refresh_from_db()
        self.assertEqual(self.annotation.label(), '(-/|/#)')
        self.assertTrue(self.annotation.candidate)
