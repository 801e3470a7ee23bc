from typing import Iterable, Optional

import django
if django.VERSION >= (4, 0, 0):
    # Fix django-bitfield-2.1.0 incompatibility with django-4.0
    import django.utils.encoding
    django.utils.encoding.force_text = django.utils.encoding.force_str

from bitfield import BitField
from django.db import models, transaction
from django.utils.translation import gettext_lazy as _

from tgg_sync import validators
from tgg_sync.conflicts import KINDS
from tgg_sync.dpg import SYMBOLS
from tgg_sync.grammar import Tgg, parse_grammar
from tgg_sync.orchestration import STRATEGIES, Orchestration

# bit positions follow SYMBOLS
ANNOTATION_FLAGS = (
    ('added', '+'),
    ('deleted', '-'),
    ('repropagated', '*'),
    ('damaged', '/'),
    ('changed', '#'),
    ('untouched', 'u'),
    ('nac_violated', 'n'),
)


def annotation_mask(symbols: Iterable[str]) -> int:
    """ Bit mask of annotation symbols for the source/target bit fields."""
    mask = 0
    for symbol in symbols:
        mask |= 1 << SYMBOLS.index(symbol)
    return mask


class Grammar(models.Model):
    slug = models.SlugField(verbose_name=_('Slug'), unique=True)
    text = models.TextField(verbose_name=_('Grammar'),
                            validators=[validators.GrammarValidator()])

    class Meta:
        verbose_name = _('Grammar')
        verbose_name_plural = _('Grammars')

    def __str__(self):
        return self.slug

    def tgg(self) -> Tgg:
        return parse_grammar(self.text)


class SyncRunManager(models.Manager):
    def record(self, grammar: Grammar, result,
               orchestration: Optional[Orchestration] = None) -> 'SyncRun':
        """ Persists a finished run with its conflicts and annotations."""
        if result.diagnostics:
            status = SyncRun.INCONSISTENT
        elif result.unresolved:
            status = SyncRun.UNRESOLVED
        else:
            status = SyncRun.CONSISTENT
        with transaction.atomic():
            run = self.create(
                grammar=grammar, status=status, report=result.to_dict(),
                orchestration=orchestration.to_dict() if orchestration else {})
            ConflictRecord.objects.bulk_create([
                ConflictRecord(run=run, conflict_id=c.id, kind=c.kind,
                               anchor=c.anchor, scope=list(c.scope),
                               strategy=result.strategies.get(c.id, ''))
                for c in result.conflicts])
            NodeAnnotation.objects.bulk_create([
                NodeAnnotation(run=run, node=row['node'], rule=row['rule'],
                               candidate=row['candidate'],
                               src=annotation_mask(row['src']),
                               trg=annotation_mask(row['trg']))
                for row in result.initial])
        return run


class SyncRun(models.Model):
    CONSISTENT = 'consistent'
    UNRESOLVED = 'unresolved'
    INCONSISTENT = 'inconsistent'
    STATUS_CHOICES = (
        (CONSISTENT, _('Consistent')),
        (UNRESOLVED, _('Unresolved conflicts')),
        (INCONSISTENT, _('Inconsistent')),
    )

    grammar = models.ForeignKey(Grammar, models.CASCADE,
                                verbose_name=_('Grammar'),
                                related_name='runs')
    orchestration = models.JSONField(
        verbose_name=_('Orchestration'), default=dict, blank=True,
        validators=[validators.OrchestrationValidator()])
    report = models.JSONField(verbose_name=_('Report'), default=dict,
                              blank=True)
    status = models.CharField(verbose_name=_('Status'), max_length=16,
                              choices=STATUS_CHOICES, default=CONSISTENT)
    created = models.DateTimeField(verbose_name=_('Created'),
                                   auto_now_add=True)

    objects = SyncRunManager()

    class Meta:
        verbose_name = _('Synchronization Run')
        verbose_name_plural = _('Synchronization Runs')
        ordering = ('-created',)

    def __str__(self):
        return f'{self.grammar} #{self.pk}'


class ConflictRecord(models.Model):
    KIND_CHOICES = [(k, k) for k in KINDS]
    STRATEGY_CHOICES = [(s, s) for s in STRATEGIES]

    run = models.ForeignKey(SyncRun, models.CASCADE, verbose_name=_('Run'),
                            related_name='conflicts')
    conflict_id = models.CharField(verbose_name=_('Conflict'), max_length=16)
    kind = models.CharField(verbose_name=_('Kind'), max_length=32,
                            choices=KIND_CHOICES)
    anchor = models.CharField(verbose_name=_('Anchor'), max_length=64)
    scope = models.JSONField(verbose_name=_('Scope'), default=list)
    strategy = models.CharField(verbose_name=_('Strategy'), max_length=16,
                                choices=STRATEGY_CHOICES, blank=True)

    class Meta:
        verbose_name = _('Conflict')
        verbose_name_plural = _('Conflicts')
        constraints = (
            models.UniqueConstraint(fields=('run', 'conflict_id'),
                                    name='unique_run_conflict'),
        )

    def __str__(self):
        return f'{self.conflict_id} {self.kind} at {self.anchor}'


class NodeAnnotation(models.Model):
    run = models.ForeignKey(SyncRun, models.CASCADE, verbose_name=_('Run'),
                            related_name='annotations')
    node = models.CharField(verbose_name=_('Node'), max_length=64)
    rule = models.CharField(verbose_name=_('Rule'), max_length=64)
    candidate = models.BooleanField(verbose_name=_('Candidate'),
                                    default=False)
    src = BitField(verbose_name=_('Source annotation'),
                   flags=ANNOTATION_FLAGS, default=0)
    trg = BitField(verbose_name=_('Target annotation'),
                   flags=ANNOTATION_FLAGS, default=0)

    class Meta:
        verbose_name = _('Node Annotation')
        verbose_name_plural = _('Node Annotations')

    def __str__(self):
        return self.node

    @staticmethod
    def symbols(value) -> str:
        return ''.join(SYMBOLS[i] for i, (key, _label) in
                       enumerate(ANNOTATION_FLAGS) if getattr(value, key))

    def label(self) -> str:
        """ ``(+|u)`` style rendering."""
        return f'({self.symbols(self.src)}|{self.symbols(self.trg)})'
