from django.core import checks

from .conf import get_setting


def check_settings(app_configs=None, **kwargs):
    errors = []
    period_ticks = get_setting('PERIOD_TICKS')
    if not isinstance(period_ticks, int) or period_ticks < 1:
        errors.append(checks.Error(
            "GRIDLEDGER['PERIOD_TICKS'] must be an integer >= 1, got {!r}.".format(period_ticks),
            hint="The default reporting period is 10 ticks.",
            id="gridledger.E001",
        ))
    window = get_setting('RESYNC_WINDOW')
    if not isinstance(window, int) or window < 0:
        errors.append(checks.Error(
            "GRIDLEDGER['RESYNC_WINDOW'] must be an integer >= 0, got {!r}.".format(window),
            hint="0 keeps the strict drop rule for unknown ids.",
            id="gridledger.E002",
        ))
    samples = get_setting('BENCH_SAMPLES')
    if isinstance(samples, int) and 0 < samples < 10000:
        errors.append(checks.Warning(
            "GRIDLEDGER['BENCH_SAMPLES'] is {}; timings below 10000 samples per path are noisy.".format(samples),
            hint="Setting BENCH_SAMPLES=10000 will resolve this.",
            id="gridledger.W001",
        ))
    return errors
