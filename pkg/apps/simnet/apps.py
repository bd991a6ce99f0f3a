from django.apps import AppConfig


class SimnetConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'apps.simnet'
    verbose_name = 'Oracle Network Simulator'
