"""Settings for the standalone ``gridledger`` command."""
import os

SECRET_KEY = 'gridledger-standalone'
DEBUG = False

INSTALLED_APPS = (
    'django.contrib.contenttypes',
    'django.contrib.auth',
    'gridledger',
)

DATABASES = {
    'default': {
        'ENGINE': 'django.db.backends.sqlite3',
        'NAME': os.environ.get('GRIDLEDGER_DB', 'gridledger.sqlite3'),
    }
}

USE_TZ = True

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'plain': {'format': '%(levelname)s %(name)s: %(message)s'},
    },
    'handlers': {
        'console': {'class': 'logging.StreamHandler', 'formatter': 'plain'},
    },
    'loggers': {
        'gridledger': {'handlers': ['console'], 'level': 'WARNING'},
    },
}

GRIDLEDGER = {}
