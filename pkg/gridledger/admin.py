from django.contrib import admin
from django.contrib.admin.filters import ChoicesFieldListFilter
from django.utils.encoding import force_str
from django.utils.translation import gettext_lazy as _

from .models import ScenarioRun, VerdictRecord


class EnumFieldListFilter(ChoicesFieldListFilter):
    @property
    def selected_value(self):
        # a list of values on newer Django versions
        value = self.lookup_val
        if isinstance(value, (list, tuple)):
            return value[-1] if value else None
        return value

    def choices(self, changelist):
        yield {
            'selected': self.selected_value is None,
            'query_string': changelist.get_query_string({}, [self.lookup_kwarg]),
            'display': _('All'),
        }
        for enum_value in self.field.enum:
            str_value = force_str(enum_value.value)
            yield {
                'selected': str_value == self.selected_value,
                'query_string': changelist.get_query_string({self.lookup_kwarg: str_value}),
                'display': getattr(enum_value, 'label', None) or force_str(enum_value),
            }


class ReadOnlyAdmin(admin.ModelAdmin):
    def has_add_permission(self, request):
        return False

    def has_change_permission(self, request, obj=None):
        return False


@admin.register(ScenarioRun)
class ScenarioRunAdmin(ReadOnlyAdmin):
    list_display = ('id', 'seed', 'chain_valid', 'violation', 'created')
    list_filter = ('chain_valid', ('violation', EnumFieldListFilter))
    readonly_fields = ('seed', 'config_digest', 'chain_head', 'chain_valid', 'violation', 'report', 'created')


@admin.register(VerdictRecord)
class VerdictRecordAdmin(ReadOnlyAdmin):
    list_display = ('run', 'tick', 'period', 'verdict', 'reason', 'flag', 'origin')
    list_filter = (
        ('verdict', EnumFieldListFilter),
        ('reason', EnumFieldListFilter),
        ('flag', EnumFieldListFilter),
        'origin',
    )
    readonly_fields = list_display
