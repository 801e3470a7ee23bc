from typing import Any, Dict, Optional

from django.core.exceptions import ValidationError
from django.utils.translation import gettext_lazy as _

__all__ = [
    'SyncError',
    'GrammarParseError',
    'GrammarTypeError',
    'IncompatibleSeed',
    'DanglingEdge',
    'AttrUnsolvable',
    'NotApplicable',
    'OverlapIllTyped',
    'NoCover',
    'BudgetExhausted',
    'StaleDelta',
    'OrchestrationInvalid',
    'UnresolvedConflict',
    'InputError',
]


class SyncError(ValidationError):
    """
    Base class for engine failures.

    Carries an upper-case ``code`` (``PARSE-ERROR``, ``STALE-DELTA``...) and
    ``params`` describing the offending element, so that errors can be shown
    in forms as well as dumped as JSON by management commands.
    """
    default_code = 'SYNC-ERROR'
    default_message = _('Synchronization failed')

    def __init__(self, message=None, code: Optional[str] = None,
                 params: Optional[Dict[str, Any]] = None):
        super().__init__(message or self.default_message,
                         code=code or self.default_code,
                         params=params or {})

    def __str__(self):
        return self.messages[0]

    def as_json(self) -> dict:
        return {
            'error': self.code,
            'message': str(self),
            'params': {k: v for k, v in self.params.items()},
        }


class GrammarParseError(SyncError):
    default_code = 'PARSE-ERROR'
    default_message = _('Syntax error at line %(line)s, column %(col)s: '
                        '%(reason)s')


class GrammarTypeError(SyncError):
    default_code = 'TYPE-ERROR'
    default_message = _('Type error in %(rule)s.%(element)s: %(reason)s')


class IncompatibleSeed(SyncError):
    default_code = 'INCOMPATIBLE-SEED'
    default_message = _('Seed binding %(element)s -> %(host)s is not '
                        'compatible with the pattern')


class DanglingEdge(SyncError):
    default_code = 'DANGLING-EDGE'
    default_message = _('Deleting %(node)s would orphan edge %(edge)s')


class AttrUnsolvable(SyncError):
    default_code = 'ATTR-UNSOLVABLE'
    default_message = _('Attribute equation over %(slots)s has conflicting '
                        'values %(values)s')


class NotApplicable(SyncError):
    default_code = 'NOT-APPLICABLE'
    default_message = _('Rule %(rule)s is not applicable at step %(step)s')


class OverlapIllTyped(SyncError):
    default_code = 'OVERLAP-ILLTYPED'
    default_message = _('Overlap %(source)s -> %(target)s of short-cut '
                        '%(shortcut)s is ill-typed: %(reason)s')


class NoCover(SyncError):
    default_code = 'NO-COVER'
    default_message = _('No precedence graph covers the triple graph '
                        '(%(uncovered)s elements left)')


class BudgetExhausted(SyncError):
    default_code = 'BUDGET-EXHAUSTED'
    default_message = _('Parsing budget of %(budget)s steps exhausted')


class StaleDelta(SyncError):
    default_code = 'STALE-DELTA'
    default_message = _('Delta operation %(index)s (%(op)s) does not fit the '
                        'model: %(reason)s')


class OrchestrationInvalid(SyncError):
    default_code = 'ORCH-INVALID'
    default_message = _('Invalid orchestration: %(reason)s')


class UnresolvedConflict(SyncError):
    default_code = 'UNRESOLVED-CONFLICT'
    default_message = _('No resolution handler for conflict %(conflict)s '
                        '(%(kind)s)')


class InputError(SyncError):
    default_code = 'INPUT-ERROR'
    default_message = _('Cannot read %(path)s: %(reason)s')
