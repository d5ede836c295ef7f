"""
Django settings for the equations-of-state laboratory.

Monte Carlo replication studies of Bayes/Gibbs losses, the functional
variance, WAIC and TIC for small misspecified parametric models.
There is no database: results are persisted as CSV/JSON files.
"""

import os
from pathlib import Path

from decouple import Csv, config

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

# SECURITY WARNING: keep the secret key used in production secret!
SECRET_KEY = config("SECRET_KEY", default="eos-lab-local-secret-key")

DEBUG = config("DEBUG", default=False, cast=bool)

ALLOWED_HOSTS = config("ALLOWED_HOSTS", default="localhost,127.0.0.1", cast=Csv())


# ============================================================================
# Application definition
# ============================================================================
DJANGO_APPS = [
    "django.contrib.contenttypes",
    "django.contrib.auth",
]

THIRD_PARTY_APPS = [
    "rest_framework",
]

LOCAL_APPS = [
    "scenarios",
    "geometry",
    "posterior",
    "functionals",
    "experiments",
    "runs",
]

INSTALLED_APPS = DJANGO_APPS + THIRD_PARTY_APPS + LOCAL_APPS

MIDDLEWARE = [
    "django.middleware.security.SecurityMiddleware",
    "django.middleware.common.CommonMiddleware",
]

ROOT_URLCONF = "config.urls"

WSGI_APPLICATION = "config.wsgi.application"

# No persistence layer: studies write rows.csv / aggregate.json / verdicts.json
DATABASES = {}

TIME_ZONE = "UTC"
USE_TZ = True

DEFAULT_AUTO_FIELD = "django.db.models.BigAutoField"

# ============================================================================
# REST Framework Configuration (read-only scenario API)
# ============================================================================
REST_FRAMEWORK = {
    "DEFAULT_AUTHENTICATION_CLASSES": [],
    "DEFAULT_PERMISSION_CLASSES": ("rest_framework.permissions.AllowAny",),
    "DEFAULT_RENDERER_CLASSES": ("rest_framework.renderers.JSONRenderer",),
    "UNAUTHENTICATED_USER": None,
}

# ============================================================================
# Cache Configuration (Local Memory)
# ============================================================================
CACHES = {
    "default": {
        "BACKEND": "django.core.cache.backends.locmem.LocMemCache",
        "LOCATION": "eos-lab",
        "KEY_PREFIX": "eos",
        "TIMEOUT": config("EOS_CACHE_TIMEOUT", default=3600, cast=int),
    }
}

# ============================================================================
# Laboratory Settings
# ============================================================================
# Worker processes for replication studies; 0 means os.cpu_count().
EOS_WORKERS = config("EOS_WORKERS", default=0, cast=int) or (os.cpu_count() or 1)

EOS_DEFAULT_MASTER_SEED = config("EOS_DEFAULT_MASTER_SEED", default=20090611, cast=int)

# Composite Gauss-Legendre rule used for per-replication E_X integrals
EOS_QUADRATURE_PANELS = config("EOS_QUADRATURE_PANELS", default=24, cast=int)
EOS_QUADRATURE_ORDER = config("EOS_QUADRATURE_ORDER", default=20, cast=int)

# A study aborts when more than this share of its rows fail
EOS_ABORT_FAILURE_RATE = config("EOS_ABORT_FAILURE_RATE", default=0.01, cast=float)

EOS_LOG_LEVEL = config("EOS_LOG_LEVEL", default="INFO")

# ============================================================================
# Logging Configuration
# ============================================================================
LOGGING = {
    "version": 1,
    "disable_existing_loggers": False,
    "formatters": {
        "verbose": {
            "format": "{levelname} {asctime} {module} {process:d} {thread:d} {message}",
            "style": "{",
        },
    },
    "handlers": {
        "console": {
            "class": "logging.StreamHandler",
            "formatter": "verbose",
        },
    },
    "root": {
        "handlers": ["console"],
        "level": "WARNING",
    },
    "loggers": {
        "django": {
            "handlers": ["console"],
            "level": config("DJANGO_LOG_LEVEL", default="INFO"),
            "propagate": False,
        },
        **{
            app: {
                "handlers": ["console"],
                "level": EOS_LOG_LEVEL,
                "propagate": False,
            }
            for app in LOCAL_APPS + ["config"]
        },
    },
}
