from django.apps import AppConfig


class NeuronsConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'neurons'
    verbose_name = 'LIF neurons and plasticity'
