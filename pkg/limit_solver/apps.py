from django.apps import AppConfig


class LimitSolverConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'limit_solver'
    verbose_name = 'Two-scale limit solver'
