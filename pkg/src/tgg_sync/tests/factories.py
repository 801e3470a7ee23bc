import factory
from factory.django import DjangoModelFactory

from tgg_sync import models
from tgg_sync.scenarios import fixture_path

__all__ = ['GrammarFactory', 'SyncRunFactory', 'ConflictRecordFactory',
           'NodeAnnotationFactory']


def running_example_text() -> str:
    with open(fixture_path('running_example', 'grammar.tgg')) as f:
        return f.read()


class GrammarFactory(DjangoModelFactory):
    class Meta:
        model = models.Grammar
        django_get_or_create = ('slug',)

    slug = factory.Sequence(lambda n: f'grammar-{n}')
    text = factory.LazyFunction(running_example_text)


class SyncRunFactory(DjangoModelFactory):
    class Meta:
        model = models.SyncRun

    grammar = factory.SubFactory(GrammarFactory)


class ConflictRecordFactory(DjangoModelFactory):
    class Meta:
        model = models.ConflictRecord

    run = factory.SubFactory(SyncRunFactory)
    conflict_id = factory.Sequence(lambda n: f'C{n + 1}')
    kind = models.KINDS[0]
    anchor = 'ME6'
    scope = factory.LazyAttribute(lambda o: [o.anchor])


class NodeAnnotationFactory(DjangoModelFactory):
    class Meta:
        model = models.NodeAnnotation

    run = factory.SubFactory(SyncRunFactory)
    node = factory.Sequence(lambda n: f'ME{n}')
    rule = 'ME'
