"""
App settings, read from the ``GRIDLEDGER`` dict in Django settings.

    GRIDLEDGER = {
        'PERIOD_TICKS': 10,
        'RESYNC_WINDOW': 0,
    }

Keys not given there fall back to `DEFAULTS`.
"""
from django.conf import settings

DEFAULTS = {
    'PERIOD_TICKS': 10,
    'RESYNC_WINDOW': 0,
    'REPLAY_MAX_DELAY': 5,
    'BENCH_SAMPLES': 10000,
    'BENCH_WARMUP': 200,
    'EAVESDROPPER_WINDOW': 64,
    'OUTPUT_DIRECTORY': 'gridledger-out',
}


def get_setting(name):
    if name not in DEFAULTS:
        raise KeyError('Unknown gridledger setting: {}'.format(name))
    overrides = (getattr(settings, 'GRIDLEDGER', None) or {}) if settings.configured else {}
    return overrides.get(name, DEFAULTS[name])
