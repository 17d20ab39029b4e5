import pytest

from gridledger.contracts import ContractTerms, SensorAllowance
from gridledger.crypto import keygen
from gridledger.disco import Disco, LoadControlPolicy
from gridledger.enums import Role
from gridledger.identity import NodeCredentials
from gridledger.participant import AcceptancePolicy, Participant
from gridledger.seeding import derive_bytes


def make_keypair(label):
    return keygen(derive_bytes(0, 'test', label))


def make_credentials(label, current_id=None, pattern_delta=7):
    if current_id is None:
        current_id = int.from_bytes(derive_bytes(0, 'id', label, size=16), 'big')
    return NodeCredentials(
        current_id=current_id, pattern_delta=pattern_delta, secret_value=derive_bytes(0, 'secret', label))


TERMS = ContractTerms(
    device_classes=('heat-pump', 'ev-charger'),
    allowed_hours=(0, 24),
    sensors=(SensorAllowance('thermostat', 1, 'decicelsius'),),
)

ACCEPT_ALL = AcceptancePolicy(
    device_classes={'heat-pump', 'ev-charger', 'pool-pump'},
    hours=(0, 24),
    max_sensors=4,
)


@pytest.fixture
def disco():
    return Disco(make_keypair('disco'), LoadControlPolicy(capacity_threshold=100, per_device_reduction=50))


@pytest.fixture
def customer(disco):
    node = Participant(
        'home', Role.CONSUMER, make_keypair('home'), credentials=make_credentials('home', current_id=5000),
        ledger=disco.chain, acceptance=ACCEPT_ALL,
    )
    disco.register(node.credentials, node.public)
    disco.admit(node.public, Role.CONSUMER)
    disco.commit_period()
    return node


def sign_contract(disco, customer, terms=TERMS):
    """Offer, countersign and commit a contract; returns its on-ledger transaction."""
    offer = disco.initiate_contract(customer.public, terms)
    signed = customer.countersign_contract(offer)
    assert disco.receive_load_control(signed)
    disco.commit_period()
    assert customer.current_contract() is not None
    return signed


def confirm(disco, node, request):
    """Countersign a request, commit it and let the node act on it; returns the response."""
    countersigned = node.accept_request(request)
    assert countersigned is not None
    assert disco.receive_load_control(countersigned)
    disco.commit_period()
    return node.execute_action(request)


def install(disco, customer, label, role, node_class, reporting=False):
    """Install a sensor or device through the dual-signed genesis workflow and commit it."""
    node = Participant(
        label, role, make_keypair(label),
        credentials=make_credentials(label) if reporting else None,
        ledger=disco.chain, node_class=node_class,
    )
    if reporting:
        disco.register(node.credentials, node.public)
    contract_tid = disco.contract_for(customer.public)
    genesis = disco.issue_sensor_genesis(node.public, contract_tid, node_class, role)
    countersigned = customer.countersign_genesis(genesis)
    assert countersigned is not None
    assert disco.receive_genesis(countersigned)
    node.provision(*customer.current_contract())
    disco.commit_period()
    return node


@pytest.fixture
def contracted(disco, customer):
    sign_contract(disco, customer)
    return customer


SCENARIO = '''
seed = 7
ticks = 120
period_ticks = 10

[policy]
capacity_threshold = 2500
curtailment_order = ["ev-charger", "heat-pump"]
per_device_reduction = 1000

[[participants]]
name = "solar"
role = "producer"
flag = "demand"
data = { mean = 800, spread = 100 }

[[participants]]
name = "home"
role = "consumer"
count = 3
data = { mean = 1500, spread = 200 }

[participants.contract]
device_classes = ["heat-pump", "ev-charger"]
allowed_hours = [0, 24]
sensors = [{ type = "thermostat", max_installs = 1, unit = "decicelsius" }]

[participants.accept]
device_classes = ["heat-pump", "ev-charger"]
max_sensors = 2

[[participants.install]]
role = "sensor"
type = "thermostat"
data = { mean = 215, spread = 10 }

[[participants.install]]
role = "device"
type = "heat-pump"

[[participants]]
name = "picky"
role = "consumer"
data = { mean = 300 }

[participants.contract]
device_classes = ["ev-charger"]

[participants.accept]
device_classes = ["heat-pump"]
'''


def adversary_table(mode, intensity=1.0, seed=1, kinds=None):
    table = '\n[[adversaries]]\nmode = "{}"\nintensity = {}\nseed = {}\n'.format(mode, intensity, seed)
    if kinds is not None:
        table += 'kinds = [{}]\n'.format(', '.join('"{}"'.format(kind) for kind in kinds))
    return table


@pytest.fixture
def scenario_file(tmp_path):
    path = tmp_path / 'scenario.toml'
    path.write_text(SCENARIO + '\n[output]\ndirectory = "{}"\n'.format(tmp_path / 'out'))
    return path
