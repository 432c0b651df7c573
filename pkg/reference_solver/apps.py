from django.apps import AppConfig


class ReferenceSolverConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'reference_solver'
    verbose_name = 'Oscillatory reference solver'
