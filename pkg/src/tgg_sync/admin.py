from bitfield import BitField
from bitfield.forms import BitFieldCheckboxSelectMultiple, BitFormField
from bitfield.types import BitHandler
from django.contrib import admin

from tgg_sync import models


class AnnotationFormField(BitFormField):
    """ Bit field rendered and posted as a list of set flag names."""

    def prepare_value(self, value):
        if isinstance(value, BitHandler):
            return [key for key, enabled in value if enabled]
        return value


@admin.register(models.Grammar)
class GrammarAdmin(admin.ModelAdmin):
    list_display = ('slug',)
    search_fields = ('slug',)


class ConflictInline(admin.TabularInline):
    model = models.ConflictRecord
    extra = 0


class AnnotationInline(admin.TabularInline):
    model = models.NodeAnnotation
    extra = 0
    formfield_overrides = {
        BitField: {'form_class': AnnotationFormField,
                   'widget': BitFieldCheckboxSelectMultiple},
    }


@admin.register(models.SyncRun)
class SyncRunAdmin(admin.ModelAdmin):
    list_display = ('id', 'grammar', 'status', 'created')
    list_filter = ('status',)
    inlines = (ConflictInline, AnnotationInline)
