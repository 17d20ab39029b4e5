"""
Scenario files, end-to-end runs and their outputs.

A scenario is a TOML document (see ``docs/config.md``). `run` builds DISCO,
the roster and the adversaries from it, drives the simulator for the
configured number of ticks and returns a `RunResult`; `write_outputs`
persists the chain file, the JSON report, key files and the optional trace.
"""
import hashlib
import json
import logging
import os
import sys
from collections import Counter
from dataclasses import dataclass, field
from typing import Optional

from .agents import DISCO_NAME, DiscoAgent, Installation, ParticipantAgent, Tally
from .conf import get_setting
from .contracts import ContractTerms, ControlAction, SealedContract, SensorAllowance
from .crypto import keygen
from .disco import Disco, LoadControlPolicy
from .enums import AdversaryMode, DlFlag, DropReason, Role
from .exceptions import ConfigError, KeyFileError, TransactionNotFound
from .identity import NodeCredentials
from .ledger import dump_chain, load_chain, verify_chain_bytes
from .netsim import NODE_ORIGIN, Adversary, World
from .participant import AcceptancePolicy, Participant, audit
from .seeding import derive_bytes, rng_for
from .serializers import AccessReportSerializer, RunReportSerializer, ScenarioConfigSerializer, flatten_errors
from .transactions import DlTransaction, LoadControlTransaction, decode_metadata

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

logger = logging.getLogger(__name__)

CHAIN_FILE = 'chain.bin'
REPORT_FILE = 'report.json'
TRACE_FILE = 'trace.jsonl'
PRODUCER_KEY_FILE = 'disco.pub'
KEYS_DIRECTORY = 'keys'


@dataclass(frozen=True)
class DataProfile:
    mean: int
    spread: int = 0

    def generator(self, rng):
        return lambda: max(0, self.mean + rng.randint(-self.spread, self.spread))


@dataclass(frozen=True)
class InstallSpec:
    role: Role
    node_class: str
    count: int = 1
    cadence: Optional[int] = None
    data: Optional[DataProfile] = None


@dataclass(frozen=True)
class RosterEntry:
    name: str
    role: Role
    data: DataProfile
    count: int = 1
    cadence: Optional[int] = None
    flag: DlFlag = DlFlag.LOAD
    contract: Optional[ContractTerms] = None
    acceptance: AcceptancePolicy = AcceptancePolicy()
    installs: tuple = ()


@dataclass(frozen=True)
class AdversarySpec:
    mode: AdversaryMode
    intensity: float = 1.0
    seed: int = 0
    kinds: tuple = ()
    max_delay: int = 5


@dataclass(frozen=True)
class ScenarioConfig:
    seed: int
    ticks: int
    period_ticks: int
    resync_window: int
    participants: tuple
    policy: LoadControlPolicy
    adversaries: tuple = ()
    loss: float = 0.0
    output_directory: str = 'gridledger-out'
    trace: bool = False
    bench_samples: int = 10000
    bench_warmup: int = 200


def _data_profile(data):
    return DataProfile(mean=data['mean'], spread=data['spread']) if data else None


def config_from_data(data):
    """Validate a parsed scenario document; raises `ConfigError` with one line per problem."""
    serializer = ScenarioConfigSerializer(data=data)
    if not serializer.is_valid():
        raise ConfigError(flatten_errors(serializer.errors))
    values = serializer.validated_data

    roster = []
    for entry in values['participants']:
        name = entry.get('name') or entry['role'].name.lower()
        if name == DISCO_NAME:
            raise ConfigError(['participants: {!r} is reserved'.format(DISCO_NAME)])
        contract = entry.get('contract')
        accept = entry.get('accept')
        roster.append(RosterEntry(
            name=name,
            role=entry['role'],
            count=entry['count'],
            cadence=entry.get('cadence'),
            flag=entry['flag'],
            data=_data_profile(entry['data']),
            contract=ContractTerms(
                device_classes=contract['device_classes'],
                allowed_hours=contract['allowed_hours'],
                sensors=[SensorAllowance(s['type'], s['max_installs'], s['unit']) for s in contract['sensors']],
            ) if contract else None,
            acceptance=AcceptancePolicy(
                device_classes=accept['device_classes'],
                hours=accept['hours'],
                sensor_types=accept.get('sensor_types'),
                max_sensors=accept['max_sensors'],
            ) if accept else AcceptancePolicy(),
            installs=tuple(
                InstallSpec(
                    role=install['role'],
                    node_class=install['type'],
                    count=install['count'],
                    cadence=install.get('cadence'),
                    data=_data_profile(install.get('data')),
                )
                for install in entry['install']
            ),
        ))

    policy = values['policy']
    return ScenarioConfig(
        seed=values['seed'],
        ticks=values['ticks'],
        period_ticks=values['period_ticks'],
        resync_window=values['resync_window'],
        participants=tuple(roster),
        policy=LoadControlPolicy(
            capacity_threshold=policy['capacity_threshold'],
            curtailment_order=policy['curtailment_order'],
            per_device_reduction=policy['per_device_reduction'],
            action=policy['action'],
        ),
        adversaries=tuple(
            AdversarySpec(
                mode=adversary['mode'],
                intensity=adversary['intensity'],
                seed=adversary['seed'],
                kinds=tuple(adversary['kinds']),
                max_delay=adversary['max_delay'],
            )
            for adversary in values['adversaries']
        ),
        loss=values['network']['loss'],
        output_directory=values['output']['directory'],
        trace=values['output']['trace'],
        bench_samples=values['bench']['samples'],
        bench_warmup=values['bench']['warmup'],
    )


def parse_config(text):
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(['syntax: {}'.format(exc)])
    return config_from_data(data)


def read_config(path):
    """The config at `path` and the SHA-256 hex digest of its bytes."""
    with open(path, 'rb') as handle:
        raw = handle.read()
    try:
        text = raw.decode('utf-8')
    except UnicodeDecodeError as exc:
        raise ConfigError(['syntax: {}'.format(exc)])
    return parse_config(text), config_digest(raw)


def load_config(path):
    return read_config(path)[0]


def config_digest(data):
    if isinstance(data, str):
        data = data.encode('utf-8')
    return hashlib.sha256(data).hexdigest()


def node_credentials(seed, name):
    rng = rng_for(seed, 'credentials', name)
    return NodeCredentials(
        current_id=rng.getrandbits(128),
        # odd, so the identifier never repeats within 2**128 steps
        pattern_delta=rng.getrandbits(128) | 1,
        secret_value=derive_bytes(seed, 'secret', name),
    )


def node_seed(seed, name):
    return derive_bytes(seed, 'key', name)


@dataclass
class RunResult:
    config: ScenarioConfig
    report: dict
    chain: bytes
    disco: Disco
    world: World
    agents: list
    verdicts: list
    key_files: dict = field(default_factory=dict)

    def agent(self, name):
        for agent in self.agents:
            if agent.name == name:
                return agent
        raise KeyError(name)


class Scenario:
    def __init__(self, config):
        self.config = config
        self.tally = Tally()
        self.disco = Disco(
            keygen(node_seed(config.seed, DISCO_NAME)), config.policy, resync_window=config.resync_window)
        self.world = World(seed=config.seed, loss=config.loss)
        self.agents = []
        self.key_files = {}
        self.disco_agent = DiscoAgent(self.disco, (), config.period_ticks, self.tally)
        self.world.add_node(self.disco_agent)

    def _participant(self, name, role, cadence, flag, data, acceptance=None, node_class=''):
        seed = node_seed(self.config.seed, name)
        participant = Participant(
            name=name,
            role=role,
            keypair=keygen(seed),
            credentials=node_credentials(self.config.seed, name),
            ledger=self.disco.chain,
            acceptance=acceptance,
            node_class=node_class,
        )
        self.disco.register(participant.credentials, participant.public)
        agent = ParticipantAgent(
            participant,
            self.tally,
            cadence=cadence or self.config.period_ticks,
            flag=flag,
            data=data.generator(rng_for(self.config.seed, 'data', name)) if data else None,
            phase=1 + len(self.agents) % (cadence or self.config.period_ticks),
        )
        self.agents.append(agent)
        self.disco_agent.directory[participant.public] = agent
        self.world.add_node(agent)
        self.key_files[name] = {
            'name': name,
            'role': role.name.lower(),
            'seed': seed.hex(),
            'public_key': participant.public.hex(),
        }
        return agent

    def build(self):
        for entry in self.config.participants:
            for index in range(entry.count):
                name = entry.name if entry.count == 1 else '{}-{}'.format(entry.name, index)
                customer = self._participant(
                    name, entry.role, entry.cadence, entry.flag, entry.data, acceptance=entry.acceptance)
                self.disco.admit(customer.participant.public, entry.role)
                if entry.contract is None:
                    continue
                installations = []
                for install in entry.installs:
                    for number in range(install.count):
                        node = self._participant(
                            '{}.{}-{}'.format(name, install.node_class, number),
                            install.role,
                            install.cadence,
                            DlFlag.LOAD,
                            install.data,
                            node_class=install.node_class,
                        )
                        if install.role == Role.DEVICE:
                            node.cadence = None
                        customer.attach(node)
                        installations.append(Installation(node, install.role, install.node_class))
                self.disco_agent.plan(customer, entry.contract, installations)
        for adversary in self.config.adversaries:
            self.world.add_adversary(Adversary(
                adversary.mode,
                seed=adversary.seed,
                intensity=adversary.intensity,
                kinds=adversary.kinds,
                max_delay=adversary.max_delay,
                window=get_setting('EAVESDROPPER_WINDOW'),
            ))
        return self

    def execute(self):
        self.world.run(self.config.ticks)
        self.world.drain()
        self._settle()
        if self.disco.pending_dl or self.disco.staged:
            self.disco_agent.commit()
        chain = dump_chain(self.disco.chain)
        return RunResult(
            config=self.config,
            report=build_report(self, chain),
            chain=chain,
            disco=self.disco,
            world=self.world,
            agents=self.agents,
            verdicts=self.disco_agent.verdicts,
            key_files=self.key_files,
        )

    def _settle(self):
        """Let countersigned requests reach the ledger and be answered, without starting new work."""
        self._answer_confirmed()
        if self.disco.countersigned:
            self.disco_agent.commit()
            self._answer_confirmed()

    def _answer_confirmed(self):
        for agent in self.agents:
            for envelope in agent.answer_confirmed():
                self.world.send(envelope)
        self.world.drain()


def run(config):
    """Run a scenario end to end. Identical configs give byte-identical results."""
    logger.info('running scenario seed=%d ticks=%d', config.seed, config.ticks)
    return Scenario(config).build().execute()


def _status_changes(scenario):
    """Count device status changes, and those not backed by a conforming request on the ledger."""
    total = ungated = 0
    disco = scenario.disco
    for agent in scenario.agents:
        node = agent.participant
        if node.role != Role.DEVICE:
            continue
        for t_id, _, _ in node.status_log:
            total += 1
            if not _is_gated(disco, node, t_id):
                ungated += 1
    return total, ungated


def _is_gated(disco, node, t_id):
    ledger = disco.chain
    try:
        _, request = ledger.find_transaction(t_id)
    except TransactionNotFound:
        return False
    if not isinstance(request, LoadControlTransaction) or not request.is_fully_signed:
        return False
    if request.pk_gen != disco.public or request.pk_rec != node.public:
        return False
    installed = disco.installed.get(node.public)
    if installed is None or installed.owner_pk not in disco.contracts:
        return False
    contract_id, terms = disco.contracts[installed.owner_pk]
    contract = ledger.find(contract_id)
    if contract is None or decode_metadata(contract, SealedContract).terms_digest != terms.digest:
        return False
    return terms.covers(decode_metadata(request, ControlAction))


def _dangling_refs(ledger):
    dangling = 0
    for _, _, entry in ledger.entries():
        if isinstance(entry, LoadControlTransaction) and entry.pk_gen != ledger.disco_pk:
            if ledger.find(entry.ref_disco_id) is None:
                dangling += 1
    return dangling


def build_report(scenario, chain):
    tally = scenario.tally
    disco = scenario.disco
    ledger = disco.chain
    check = verify_chain_bytes(chain, disco.public)

    by_origin = {}
    for origin in sorted(set(tally.dl_by_origin) | {NODE_ORIGIN}):
        by_origin[origin] = {
            'delivered': tally.dl_by_origin[origin],
            'accepted': tally.accepted_by_origin[origin],
        }

    status_changes, ungated = _status_changes(scenario)
    reporters = [agent.participant for agent in scenario.agents if agent.participant.credentials is not None]
    in_sync = sum(
        1 for node in reporters
        if disco.registry.get(node.public).credentials.current_id == node.credentials.current_id
        and disco.registry.get(node.public).nonce == node.credentials.nonce
    )
    verified = sum(node.verify_receipts() for node in reporters)
    rejected = Counter(tally.rejected)
    rejected.update({reason.value: count for reason, count in disco.rejections.items()})

    report = {
        'seed': scenario.config.seed,
        'ticks': scenario.config.ticks,
        'periods': disco.period_id,
        'dl': {
            'sent': tally.dl_sent,
            'delivered': tally.dl_delivered,
            'accepted': tally.dl_accepted,
            'dropped': {reason.value: tally.dl_dropped[reason.value] for reason in DropReason},
            'by_origin': by_origin,
        },
        'chain': {
            'valid': check.valid,
            'blocks': len(ledger),
            'merkle_roots': sum(len(block.merkle_roots) for block in ledger),
            'dl_entries': sum(
                1 for _, _, entry in ledger.entries() if isinstance(entry, DlTransaction)),
            'head': ledger.head_hash,
            'violation': check.violation,
            'violation_height': check.height,
        },
        'workflow': {
            'contracts_offered': tally.contracts_offered,
            'contracts_signed': len(disco.contracts),
            'contracts_refused': tally.contracts_refused,
            'geneses_issued': tally.geneses_issued,
            'nodes_installed': len(disco.installed),
            'samples_requested': tally.samples_requested,
            'actions_requested': tally.actions_requested,
            'actions_executed': tally.actions_executed,
            'actions_refused': tally.actions_refused,
            'status_changes': status_changes,
            'ungated_status_changes': ungated,
            'dangling_refs': _dangling_refs(ledger),
            'rejected': dict(sorted(rejected.items())),
        },
        'receipts': {
            'issued': tally.receipts_issued,
            'verified': verified,
            'rate': verified / tally.receipts_issued if tally.receipts_issued else None,
        },
        'lockstep': {
            'nodes': len(reporters),
            'in_sync': in_sync,
        },
        'adversaries': [
            {
                'mode': adversary.mode,
                'intensity': adversary.intensity,
                'actions': dict(sorted(adversary.actions.items())),
                'linkage_score': adversary.linkage_score,
                'distinct_public_keys': (
                    len(adversary.public_keys) if adversary.mode == AdversaryMode.EAVESDROPPER else None),
            }
            for adversary in scenario.world.adversaries
        ],
    }
    return RunReportSerializer(report).data


def render_json(data):
    return json.dumps(data, indent=2, sort_keys=True) + '\n'


def summary_lines(report):
    dl = report['dl']
    dropped = ', '.join('{} {}'.format(count, reason) for reason, count in dl['dropped'].items() if count)
    chain = report['chain']
    workflow = report['workflow']
    lines = [
        'DL: {} sent, {} delivered, {} accepted, {} dropped{}'.format(
            dl['sent'], dl['delivered'], dl['accepted'], sum(dl['dropped'].values()),
            ' ({})'.format(dropped) if dropped else ''),
        'chain: {} blocks, {} Merkle roots, {}'.format(
            chain['blocks'], chain['merkle_roots'],
            'valid' if chain['valid'] else 'INVALID at height {} ({})'.format(
                chain['violation_height'], chain['violation'])),
        'contracts: {} signed of {} offered; {} nodes installed'.format(
            workflow['contracts_signed'], workflow['contracts_offered'], workflow['nodes_installed']),
        'actions: {} requested, {} executed, {} refused'.format(
            workflow['actions_requested'], workflow['actions_executed'], workflow['actions_refused']),
    ]
    receipts = report['receipts']
    if receipts['issued']:
        lines.append('receipts: {}/{} verify'.format(receipts['verified'], receipts['issued']))
    for adversary in report['adversaries']:
        if adversary['linkage_score'] is not None:
            lines.append('eavesdropper linkage score: {:.3f} ({} public keys seen)'.format(
                adversary['linkage_score'], adversary['distinct_public_keys']))
    return lines


def write_outputs(result, directory, trace=False):
    """Write the run's files into `directory`; returns their paths by name."""
    os.makedirs(os.path.join(directory, KEYS_DIRECTORY), exist_ok=True)
    paths = {
        'chain': os.path.join(directory, CHAIN_FILE),
        'report': os.path.join(directory, REPORT_FILE),
        'producer_key': os.path.join(directory, PRODUCER_KEY_FILE),
        'keys': os.path.join(directory, KEYS_DIRECTORY),
    }
    with open(paths['chain'], 'wb') as handle:
        handle.write(result.chain)
    with open(paths['report'], 'w', encoding='utf-8') as handle:
        handle.write(render_json(result.report))
    with open(paths['producer_key'], 'w', encoding='utf-8') as handle:
        handle.write(result.disco.public.hex() + '\n')
    for name, key_file in result.key_files.items():
        with open(os.path.join(paths['keys'], '{}.json'.format(name)), 'w', encoding='utf-8') as handle:
            handle.write(render_json(key_file))
    if trace:
        paths['trace'] = os.path.join(directory, TRACE_FILE)
        with open(paths['trace'], 'w', encoding='utf-8') as handle:
            result.world.export_trace(handle)
    return paths


def load_key_file(path):
    """The key pair in a participant key file; raises `KeyFileError` on bad content."""
    with open(path, 'r', encoding='utf-8') as handle:
        text = handle.read()
    try:
        data = json.loads(text)
        keypair = keygen(bytes.fromhex(data['seed']))
    except (ValueError, KeyError, TypeError) as exc:
        raise KeyFileError('{}: not a key file ({})'.format(path, exc))
    if 'public_key' in data and data['public_key'] != keypair.public.hex():
        raise KeyFileError('{}: public_key does not match the seed'.format(path))
    return keypair


def audit_chain_bytes(data, public_key):
    """Audit a serialized chain for `public_key`; raises `CodecError` on an unreadable chain."""
    return audit(public_key, load_chain(data))


def render_access_report(report):
    return render_json(AccessReportSerializer(report).data)
