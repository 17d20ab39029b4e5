import io
import json

import pytest
from django.core.management import call_command
from django.core.management.base import CommandError
from gridledger.cli import main
from gridledger.crypto import PublicKey
from gridledger.models import ScenarioRun, VerdictRecord
from gridledger.scenario import load_config, render_access_report, run

from .conftest import SCENARIO, make_keypair


def command(name, *args, **options):
    out = io.StringIO()
    call_command(name, *args, stdout=out, **options)
    return out.getvalue()


def failure(name, *args, **options):
    with pytest.raises(CommandError) as excinfo:
        command(name, *args, **options)
    return excinfo.value


@pytest.fixture(scope='module')
def outputs(tmp_path_factory):
    directory = tmp_path_factory.mktemp('run')
    config = directory / 'scenario.toml'
    config.write_text(SCENARIO)
    stdout = command('dlc_run', str(config), output_dir=str(directory / 'out'))
    return directory, stdout


def test_run_writes_outputs(outputs):
    directory, stdout = outputs
    out = directory / 'out'
    assert (out / 'chain.bin').exists()
    assert (out / 'disco.pub').read_text().strip() == run(load_config(directory / 'scenario.toml')).disco.public.hex()
    report = json.loads((out / 'report.json').read_text())
    assert report['chain']['valid'] is True
    assert report['seed'] == 7
    key_file = json.loads((out / 'keys' / 'home-0.json').read_text())
    assert key_file['role'] == 'consumer'
    assert not (out / 'trace.jsonl').exists()
    assert stdout.startswith('DL: ')
    assert 'wrote ' in stdout


def test_run_uses_configured_directory_and_trace(scenario_file, tmp_path):
    command('dlc_run', str(scenario_file), trace=True)
    lines = (tmp_path / 'out' / 'trace.jsonl').read_text().splitlines()
    assert lines
    assert {'tick', 'seq', 'sender', 'recipient', 'kind', 'origin', 'outcome', 'size', 'digest'} == set(
        json.loads(lines[0]))


@pytest.mark.django_db
def test_run_persists(scenario_file):
    stdout = command('dlc_run', str(scenario_file), persist=True)
    stored = ScenarioRun.objects.get()
    assert 'stored {}'.format(stored) in stdout
    assert stored.chain_valid
    assert stored.violation is None
    assert stored.seed == 7
    assert len(stored.config_digest) == 64
    assert stored.verdicts.count() == stored.report['dl']['delivered']
    assert VerdictRecord.objects.filter(verdict='drop').count() == 0


def test_run_config_errors(tmp_path):
    path = tmp_path / 'bad.toml'
    path.write_text('seed = 1\n')
    error = failure('dlc_run', str(path))
    assert error.returncode == 2
    assert 'ticks: This field is required.' in str(error)
    assert failure('dlc_run', str(tmp_path / 'missing.toml')).returncode == 4


def test_verify_chain(outputs):
    directory, _ = outputs
    chain = str(directory / 'out' / 'chain.bin')
    key_path = directory / 'out' / 'disco.pub'
    assert command('dlc_verify_chain', chain).strip() == '{}: valid'.format(chain)
    assert 'valid' in command('dlc_verify_chain', chain, producer_key=str(key_path))
    assert 'valid' in command('dlc_verify_chain', chain, producer_key=key_path.read_text().strip())


def test_verify_chain_with_the_wrong_key(outputs):
    directory, _ = outputs
    error = failure('dlc_verify_chain', str(directory / 'out' / 'chain.bin'),
                    producer_key=make_keypair('impostor').public.hex())
    assert error.returncode == 3
    assert 'invalid at height 0: bad_producer_sig' in str(error)


def test_verify_tampered_chain(outputs, tmp_path):
    directory, _ = outputs
    data = bytearray((directory / 'out' / 'chain.bin').read_bytes())
    data[-1] ^= 0x01
    tampered = tmp_path / 'chain.bin'
    tampered.write_bytes(bytes(data))
    error = failure('dlc_verify_chain', str(tampered))
    assert error.returncode == 3
    assert 'invalid at height' in str(error)


def test_verify_chain_file_errors(outputs, tmp_path):
    directory, _ = outputs
    assert failure('dlc_verify_chain', str(tmp_path / 'missing.bin')).returncode == 4
    error = failure('dlc_verify_chain', str(directory / 'out' / 'chain.bin'), producer_key='not hex')
    assert error.returncode == 4


def test_audit_matches_participant_view(outputs):
    directory, _ = outputs
    out = directory / 'out'
    printed = command('dlc_audit', str(out / 'chain.bin'), str(out / 'keys' / 'home-0.json'))
    result = run(load_config(directory / 'scenario.toml'))
    home = result.agent('home-0').participant
    assert printed == render_access_report(home.audit(result.disco.chain))

    report = json.loads(printed)
    assert report['owner_pk'] == PublicKey(home.public).hex()
    assert {row['action'] for row in report['rows']} >= {'sample'}
    assert all(row['count'] == 1 for row in report['rows'])


def test_audit_of_an_uninvolved_key(outputs):
    directory, _ = outputs
    out = directory / 'out'
    report = json.loads(command('dlc_audit', str(out / 'chain.bin'), str(out / 'keys' / 'solar.json')))
    assert report['rows'] == []
    assert report['requesters'] == []


def test_audit_file_errors(outputs, tmp_path):
    directory, _ = outputs
    out = directory / 'out'
    bad_key = tmp_path / 'key.json'
    bad_key.write_text('{"seed": "abc"}')
    assert failure('dlc_audit', str(out / 'chain.bin'), str(bad_key)).returncode == 4
    assert failure('dlc_audit', str(out / 'chain.bin'), str(tmp_path / 'nope.json')).returncode == 4
    garbage = tmp_path / 'chain.bin'
    garbage.write_bytes(b'\x00\x00\x00\x09abc')
    assert failure('dlc_audit', str(garbage), str(out / 'keys' / 'home-0.json')).returncode == 4


def test_mismatched_key_file(outputs, tmp_path):
    directory, _ = outputs
    key_file = json.loads((directory / 'out' / 'keys' / 'home-0.json').read_text())
    key_file['public_key'] = make_keypair('other').public.hex()
    path = tmp_path / 'key.json'
    path.write_text(json.dumps(key_file))
    error = failure('dlc_audit', str(directory / 'out' / 'chain.bin'), str(path))
    assert error.returncode == 4
    assert 'does not match the seed' in str(error)


def test_bench(scenario_file):
    lines = command('dlc_bench', str(scenario_file), samples=20).splitlines()
    assert lines[0].split() == ['path', 'samples', 'median', 'ns', 'p95', 'ns']
    assert [line.split()[:2] for line in lines[1:3]] == [['hash', '20'], ['signature', '20']]
    assert lines[3].startswith('signature/hash median ratio:')


def test_bench_json(scenario_file):
    table = json.loads(command('dlc_bench', str(scenario_file), samples=5, json=True))
    assert [row['path'] for row in table['rows']] == ['hash', 'signature']
    assert table['ratio'] > 0


def test_bench_without_samples(scenario_file):
    assert command('dlc_bench', str(scenario_file), samples=0).strip() == 'no samples'
    assert json.loads(command('dlc_bench', str(scenario_file), samples=0, json=True)) == {'rows': [], 'ratio': None}


def test_cli(outputs, capsys):
    directory, _ = outputs
    chain = str(directory / 'out' / 'chain.bin')
    assert main(['verify-chain', chain]) == 0
    assert main(['verify-chain', chain, '--producer-key', make_keypair('impostor').public.hex()]) == 3
    assert 'invalid at height 0' in capsys.readouterr().err
    assert main(['frobnicate']) == 2
    assert main([]) == 2
    assert capsys.readouterr().err.startswith('usage: gridledger')
