from django.apps import AppConfig


class InhibitionConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'inhibition'
    verbose_name = 'Lattice inhibition'
