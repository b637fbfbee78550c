from django.apps import AppConfig


class ReadoutConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'readout'
    verbose_name = 'Readout'
