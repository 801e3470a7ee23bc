import logging

from django.dispatch import Signal, receiver

logger = logging.getLogger(__name__)

# sent by restore.run once the initial delta precedence graph is analyzed;
# providing ``conflicts`` (list of Conflict)
conflicts_detected = Signal()

# sent by restore.run at the end; providing ``result`` (SyncResult)
sync_finished = Signal()


# noinspection PyUnusedLocal
@receiver(conflicts_detected)
def log_conflicts(sender, *, conflicts, **kwargs):
    """ One INFO line per detected conflict."""
    for conflict in conflicts:
        logger.info('%s %s at %s, scope %s', conflict.id, conflict.kind,
                    conflict.anchor, ', '.join(conflict.scope))


# noinspection PyUnusedLocal
@receiver(sync_finished)
def log_summary(sender, *, result, **kwargs):
    summary = result.summary()
    logger.info('synchronization finished: %(applied)d rule applications, '
                '%(resolved)d resolved, %(unresolved)d unresolved conflicts, '
                '%(removed)d elements cleaned up', summary)
