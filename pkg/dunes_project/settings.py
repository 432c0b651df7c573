"""
Django settings for dunes_project project.

The project hosts the two-scale dune dynamics solvers as Django apps so that
run configuration, logging, persisted comparison records and the command-line
front-end share one settings module.

For more information on this file, see
https://docs.djangoproject.com/en/4.2/topics/settings/
"""

from pathlib import Path
from decouple import config
import dj_database_url

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent


# SECURITY WARNING: keep the secret key used in production secret!
SECRET_KEY = config('SECRET_KEY', default='django-insecure-dunes-local-only-3v#w0x^k1!p7q9r2s4t6u8')

DEBUG = config('DEBUG', default=True, cast=bool)

ALLOWED_HOSTS = ['localhost', '127.0.0.1', 'testserver']


# Application definition

INSTALLED_APPS = [
    'django.contrib.admin',
    'django.contrib.auth',
    'django.contrib.contenttypes',
    'django.contrib.sessions',
    'django.contrib.messages',
    'django.contrib.staticfiles',

    # Third party apps
    'rest_framework',

    # Local apps
    'dunes_project',
    'spectral',
    'coefficients',
    'limit_solver',
    'reference_solver',
    'oracle',
    'analysis',
]

MIDDLEWARE = [
    'django.middleware.security.SecurityMiddleware',
    'django.contrib.sessions.middleware.SessionMiddleware',
    'django.middleware.common.CommonMiddleware',
    'django.middleware.csrf.CsrfViewMiddleware',
    'django.contrib.auth.middleware.AuthenticationMiddleware',
    'django.contrib.messages.middleware.MessageMiddleware',
    'django.middleware.clickjacking.XFrameOptionsMiddleware',
]

ROOT_URLCONF = 'dunes_project.urls'

TEMPLATES = [
    {
        'BACKEND': 'django.template.backends.django.DjangoTemplates',
        'DIRS': [],
        'APP_DIRS': True,
        'OPTIONS': {
            'context_processors': [
                'django.template.context_processors.debug',
                'django.template.context_processors.request',
                'django.contrib.auth.context_processors.auth',
                'django.contrib.messages.context_processors.messages',
            ],
        },
    },
]

WSGI_APPLICATION = 'dunes_project.wsgi.application'


# Database
# Comparison records go to DATABASE_URL when set, otherwise to a local SQLite file
DATABASES = {
    'default': dj_database_url.parse(
        config('DATABASE_URL', default=f"sqlite:///{BASE_DIR / 'db.sqlite3'}")
    )
}


# Internationalization

LANGUAGE_CODE = 'en-us'

TIME_ZONE = 'UTC'

USE_I18N = True

USE_TZ = True


# Static files (admin only)

STATIC_URL = '/static/'
STATIC_ROOT = BASE_DIR / 'staticfiles'

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'


# Solver defaults
# Run configuration files override these per run; the environment overrides them per process.
DUNES = {
    'GRID_N': config('DUNES_GRID_N', default=64, cast=int),
    # 0 selects max(64, 8P) samples per axis
    'N_QUAD': config('DUNES_N_QUAD', default=0, cast=int),
    'RTOL': config('DUNES_RTOL', default=1e-8, cast=float),
    'ATOL': config('DUNES_ATOL', default=1e-10, cast=float),
    'MAX_STEPS': config('DUNES_MAX_STEPS', default=5_000_000, cast=int),
    'SWEEP_WORKERS': config('DUNES_SWEEP_WORKERS', default=4, cast=int),
    'OUTPUT_DIR': config('DUNES_OUTPUT_DIR', default='runs'),
    'RECORD_RESULTS': config('DUNES_RECORD_RESULTS', default=True, cast=bool),
}


# Logging
LOG_LEVEL = config('DUNES_LOG_LEVEL', default='INFO')

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'plain': {
            'format': '{asctime} {levelname} {name}: {message}',
            'style': '{',
        },
        'audit': {
            'format': '{message}',
            'style': '{',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'plain',
        },
        'audit_console': {
            'class': 'logging.StreamHandler',
            'formatter': 'audit',
        },
    },
    'loggers': {
        'dunes': {
            'handlers': ['audit_console'],
            'level': LOG_LEVEL,
            'propagate': False,
        },
        'spectral': {'handlers': ['console'], 'level': LOG_LEVEL},
        'coefficients': {'handlers': ['console'], 'level': LOG_LEVEL},
        'limit_solver': {'handlers': ['console'], 'level': LOG_LEVEL},
        'reference_solver': {'handlers': ['console'], 'level': LOG_LEVEL},
        'oracle': {'handlers': ['console'], 'level': LOG_LEVEL},
        'analysis': {'handlers': ['console'], 'level': LOG_LEVEL},
        'dunes_project': {'handlers': ['console'], 'level': LOG_LEVEL},
    },
}
