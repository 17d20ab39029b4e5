from django.apps import AppConfig
from django.core import checks


class GridLedgerConfig(AppConfig):
    name = 'gridledger'
    verbose_name = 'Grid ledger'
    default_auto_field = 'django.db.models.AutoField'

    def ready(self):
        from .checks import check_settings
        checks.register(check_settings)
