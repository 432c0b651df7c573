from django.apps import AppConfig


class DunesProjectConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'dunes_project'
    verbose_name = 'Dune dynamics project'
