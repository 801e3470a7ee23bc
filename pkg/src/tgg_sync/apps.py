from django.apps import AppConfig
from django.utils.translation import gettext_lazy as _


class TggSyncConfig(AppConfig):
    name = 'tgg_sync'
    verbose_name = _("TGG synchronization")
    default_auto_field = 'django.db.models.AutoField'

    def ready(self):
        __import__('tgg_sync.signals')
