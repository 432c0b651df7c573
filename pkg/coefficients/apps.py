from django.apps import AppConfig


class CoefficientsConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'coefficients'
    verbose_name = 'PDE coefficients'
