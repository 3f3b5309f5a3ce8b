"""
Django settings for the trackcull project.

Only the management-command machinery, settings and logging configuration of
Django are used; there is no web surface and no database.

For the full list of settings and their values, see
https://docs.djangoproject.com/en/5.2/ref/settings/
"""

import os
from pathlib import Path

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

# Nothing is signed; Django only insists that the setting exists.
SECRET_KEY = os.environ.get("DJANGO_SECRET_KEY", "trackcull-local-only")

DEBUG = os.environ.get("DJANGO_DEBUG", "").lower() == "true"

ALLOWED_HOSTS: list[str] = []


# Application definition

INSTALLED_APPS = [
    "core",
]

DATABASES: dict = {}

LANGUAGE_CODE = "en-gb"

TIME_ZONE = "UTC"

USE_I18N = False

USE_TZ = True


LOG_LEVEL = os.environ.get("TRACKCULL_LOG_LEVEL", "INFO").upper()

LOGGING = {
    "version": 1,
    "disable_existing_loggers": False,
    "formatters": {
        "console": {
            "format": "%(asctime)s %(levelname)s %(name)s: %(message)s",
        },
    },
    "handlers": {
        "console": {
            "class": "logging.StreamHandler",
            "formatter": "console",
        },
    },
    "root": {
        "handlers": ["console"],
        "level": "WARNING",
    },
    "loggers": {
        "django": {
            "handlers": ["console"],
            "level": "WARNING",
            "propagate": False,
        },
        "core": {
            "handlers": ["console"],
            "level": LOG_LEVEL,
            "propagate": False,
        },
    },
}


# Threads for event generation, dataset extraction and tree building
TRACKCULL_THREADS = int(os.environ.get("TRACKCULL_THREADS") or os.cpu_count() or 1)

TRACKCULL_OUTPUT_DIR = Path(os.environ.get("TRACKCULL_OUTPUT_DIR") or ".")

TRACKCULL_SEED = int(os.environ.get("TRACKCULL_SEED") or 0)

# Rows timed one at a time when `evaluate` samples inference latency
TRACKCULL_LATENCY_ROWS = int(os.environ.get("TRACKCULL_LATENCY_ROWS") or 1000)
