"""
The ``gridledger`` console script.

    gridledger run scenario.toml [--output-dir DIR] [--trace] [--persist]
    gridledger bench scenario.toml
    gridledger audit chain.bin keys/home.json
    gridledger verify-chain chain.bin [--producer-key disco.pub]

Each subcommand runs the matching ``dlc_*`` management command under
`gridledger.default_settings` unless DJANGO_SETTINGS_MODULE says otherwise.
"""
import os
import sys

SUBCOMMANDS = {
    'run': 'dlc_run',
    'bench': 'dlc_bench',
    'audit': 'dlc_audit',
    'verify-chain': 'dlc_verify_chain',
}


def usage():
    return 'usage: gridledger {{{}}} ...'.format(','.join(SUBCOMMANDS))


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    if not argv or argv[0] not in SUBCOMMANDS:
        sys.stderr.write(usage() + '\n')
        return 2

    os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'gridledger.default_settings')
    import django
    from django.core.management import call_command
    from django.core.management.base import CommandError

    django.setup()
    command = SUBCOMMANDS[argv[0]]
    try:
        if '--persist' in argv:
            call_command('migrate', verbosity=0, interactive=False)
        call_command(command, *argv[1:])
    except CommandError as exc:
        sys.stderr.write('gridledger {}: {}\n'.format(argv[0], exc))
        return exc.returncode
    return 0
