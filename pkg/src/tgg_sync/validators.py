from django.core.exceptions import ValidationError
from django.utils.deconstruct import deconstructible

from tgg_sync import exceptions
from tgg_sync.grammar import parse_grammar
from tgg_sync.operationalize import operationalize
from tgg_sync.orchestration import from_dict


@deconstructible
class GrammarValidator:
    """ Grammar text validator: syntax, typing and declared short-cuts."""

    def __call__(self, value: str):
        if not value:
            # blank values are handled by the field itself
            return
        try:
            operationalize(parse_grammar(value))
        except exceptions.SyncError as e:
            raise ValidationError(str(e), code=e.code)


@deconstructible
class OrchestrationValidator:

    def __call__(self, value):
        if not value:
            return
        try:
            from_dict(value)
        except exceptions.SyncError as e:
            raise ValidationError(str(e), code=e.code)
