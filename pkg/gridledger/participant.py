"""
Node-side protocol: producers, consumers and storage report DL transactions,
customers countersign contracts and installations, installed sensors and
devices execute DISCO's requests, and any customer can audit who accessed
its nodes.
"""
import logging
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

from . import codec
from .contracts import ActionReceipt, ControlAction, SealedContract, hour_of, open_terms
from .crypto import PublicKey, verify
from .enums import DeviceAction, DeviceState, Role
from .exceptions import CodecError, DecryptError
from .ledger import MerkleRootEntry
from .merkle import leaf_digest, verify_proof
from .transactions import (
    GenesisTransaction, LoadControlTransaction, build_load_control, countersign_as_owner, countersign_as_receiver,
    decode_metadata, is_contract, make_dl, sign_as_generator,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class AcceptancePolicy:
    """What a customer agrees to: device classes, an hour span and a sensor cap."""

    device_classes: frozenset = frozenset()
    hours: tuple = (0, 24)
    sensor_types: Optional[frozenset] = None
    max_sensors: int = 0

    def __post_init__(self):
        object.__setattr__(self, 'device_classes', frozenset(self.device_classes))
        object.__setattr__(self, 'hours', tuple(self.hours))
        if self.sensor_types is not None:
            object.__setattr__(self, 'sensor_types', frozenset(self.sensor_types))

    def accepts(self, terms):
        start, end = self.hours
        if not set(terms.device_classes) <= self.device_classes:
            return False
        if not (start <= terms.allowed_hours[0] and terms.allowed_hours[1] <= end):
            return False
        if self.sensor_types is not None and not {s.sensor_type for s in terms.sensors} <= self.sensor_types:
            return False
        return sum(s.max_installs for s in terms.sensors) <= self.max_sensors


class StoredReceipt(NamedTuple):
    tx: object
    proof: object
    period_id: int


class Participant:
    def __init__(self, name, role, keypair, credentials=None, ledger=None, acceptance=None, node_class=''):
        self.name = name
        self.role = Role(role)
        self.keypair = keypair
        self.credentials = credentials
        self.ledger = ledger
        self.acceptance = acceptance or AcceptancePolicy()
        self.node_class = node_class
        self.receipts = []
        # pk -> (role, class) of installations this customer countersigned
        self.owned_sensors = {}
        self.device_status = DeviceState.ON
        self.reduced_by = 0
        # (contract t_id, plaintext terms); offered until it is on the ledger
        self.contract = None
        self.offered = {}
        # requests countersigned and waiting to reach the ledger, by t_id
        self.accepted = {}
        self.executed = set()
        self.status_log = []
        self._unconfirmed = {}
        self._responses = []

    def __repr__(self):
        return 'Participant({!r}, {})'.format(self.name, self.role.name)

    @property
    def public(self):
        return self.keypair.public

    @property
    def disco_pk(self):
        return self.ledger.disco_pk

    @property
    def admitted(self):
        return self.ledger is not None and self.ledger.genesis_for(self.public) is not None

    # -- reporting -----------------------------------------------------------

    def report(self, data, dl_flag):
        """A DL transaction for `data`; local credentials advance at send time."""
        tx = make_dl(self.credentials, data, dl_flag)
        self.credentials = self.credentials.advance()
        self._unconfirmed[leaf_digest(tx)] = tx
        return tx

    def accept_receipt(self, receipt):
        """Keep an inclusion receipt if it verifies against the committed root."""
        tx = self._unconfirmed.get(receipt.leaf)
        entry = self.ledger.root_for(receipt.period_id)
        if tx is None or not isinstance(entry, MerkleRootEntry):
            return False
        if not verify_proof(entry.root, receipt.leaf, receipt.proof, leaf_count=entry.leaf_count):
            logger.warning('%s: receipt for period %d does not verify', self.name, receipt.period_id)
            return False
        del self._unconfirmed[receipt.leaf]
        self.receipts.append(StoredReceipt(tx, receipt.proof, receipt.period_id))
        return True

    def verify_receipts(self):
        """Count of stored receipts that verify against the current chain."""
        verified = 0
        for stored in self.receipts:
            entry = self.ledger.root_for(stored.period_id)
            if entry is not None and verify_proof(
                    entry.root, leaf_digest(stored.tx), stored.proof, leaf_count=entry.leaf_count):
                verified += 1
        return verified

    # -- customer side of the contract workflow -----------------------------

    def countersign_contract(self, tx):
        """
        Open a contract offer and countersign it if the terms are acceptable.

        Returns the countersigned transaction, or None when the offer is not
        for this node, is not signed by DISCO, cannot be opened or is refused.
        """
        if tx.pk_rec != self.public or tx.pk_gen != self.disco_pk or tx.sign_gen is None:
            return None
        if not verify(tx.pk_gen, codec.encode_preimage(tx), tx.sign_gen):
            logger.warning('%s: contract offer with a bad DISCO signature', self.name)
            return None
        try:
            sealed = decode_metadata(tx, SealedContract)
            terms = open_terms(self.keypair, sealed)
        except (CodecError, DecryptError) as exc:
            logger.warning('%s: cannot open contract offer: %s', self.name, exc)
            return None
        if not self.acceptance.accepts(terms):
            logger.info('%s: refused contract terms %r', self.name, terms)
            return None
        self.offered[tx.t_id] = terms
        return countersign_as_receiver(tx, self.keypair)

    def current_contract(self):
        """The accepted contract once it is on the ledger, else None."""
        if self.contract is None:
            for t_id, terms in self.offered.items():
                if is_contract(self.ledger.find(t_id)):
                    self.contract = (t_id, terms)
                    self.offered.clear()
                    break
        return self.contract

    def countersign_genesis(self, genesis):
        """Countersign DISCO's genesis for a node installed at this site, within contract."""
        contract = self.current_contract()
        if genesis.owner_pk != self.public or genesis.issuer_pk != self.disco_pk or contract is None:
            return None
        if genesis.issuer_sig is None or not verify(
                genesis.issuer_pk, codec.encode_preimage(genesis), genesis.issuer_sig):
            return None
        t_id, terms = contract
        is_sensor = genesis.role == Role.SENSOR
        if genesis.contract_ref != t_id or not terms.allows_install(is_sensor, genesis.node_class):
            logger.info('%s: refused installation of %s %r', self.name, genesis.role.label, genesis.node_class)
            return None
        if is_sensor:
            installed = sum(
                1 for role, node_class in self.owned_sensors.values()
                if role == Role.SENSOR and node_class == genesis.node_class
            )
            if installed >= terms.sensor_allowance(genesis.node_class).max_installs:
                logger.info('%s: %r install limit reached', self.name, genesis.node_class)
                return None
        self.owned_sensors[genesis.subject_pk] = (genesis.role, genesis.node_class)
        return countersign_as_owner(genesis, self.keypair)

    # -- installed nodes -----------------------------------------------------

    def provision(self, contract_tid, terms):
        """Hand an installed node its owner's contract."""
        self.contract = (contract_tid, terms)

    def accept_request(self, request):
        """
        Countersign a DISCO request addressed to this node.

        The node acts only once the countersigned request is on the ledger;
        see `execute_action`. Returns None when the request is refused.
        """
        if request.t_id in self.accepted or request.t_id in self.executed:
            refusal = 'already accepted'
        else:
            refusal = self._refusal(request)
        if refusal is not None:
            logger.warning('%s: refused request %s: %s', self.name, request.t_id.hex()[:16], refusal)
            return None
        countersigned = countersign_as_receiver(request, self.keypair)
        self.accepted[request.t_id] = countersigned
        return countersigned

    def execute_action(self, request):
        """
        Execute a request whose countersigned copy is on the ledger.

        Returns the response, or None when the request is refused. Refusal
        leaves the node's state untouched.
        """
        on_ledger = self.ledger.find(request.t_id)
        if request.t_id in self.executed:
            refusal = 'already executed'
        elif (
            not isinstance(on_ledger, LoadControlTransaction)
            or on_ledger.pk_rec != self.public
            or not on_ledger.is_fully_signed
        ):
            refusal = 'not on the ledger'
        else:
            refusal = self._refusal(on_ledger)
        if refusal is not None:
            logger.warning('%s: refused request %s: %s', self.name, request.t_id.hex()[:16], refusal)
            return None
        action = decode_metadata(on_ledger, ControlAction)
        self.executed.add(request.t_id)
        self.accepted.pop(request.t_id, None)
        self._apply(action)
        self.status_log.append((request.t_id, action.action, self.device_status))

        receipt = ActionReceipt(
            action=action.action, state=self.device_status, amount=action.amount, period_id=action.period_id)
        response = sign_as_generator(
            build_load_control(
                pk_gen=self.public,
                pk_rec=self.disco_pk,
                p_t_id=self._chain_head(),
                metadata=receipt,
                ref_disco_id=request.t_id,
            ),
            self.keypair,
        )
        self._responses.append(response.t_id)
        return response

    def execute_confirmed(self):
        """``(request, response)`` for every accepted request that has reached the ledger."""
        done = []
        for t_id, request in list(self.accepted.items()):
            if self.ledger.find(t_id) is None:
                continue
            response = self.execute_action(request)
            if response is None:
                del self.accepted[t_id]
            else:
                done.append((request, response))
        return done

    def _refusal(self, request):
        if not isinstance(request, LoadControlTransaction) or request.pk_rec != self.public:
            return 'not addressed to this node'
        if request.pk_gen != self.disco_pk or request.sign_gen is None or not verify(
                request.pk_gen, codec.encode_preimage(request), request.sign_gen):
            return 'not signed by DISCO'
        try:
            action = decode_metadata(request, ControlAction)
        except CodecError:
            return 'no control action'
        if action.target_pk != self.public or action.target_class != self.node_class:
            return 'targets another node'
        if (action.action == DeviceAction.SAMPLE) != (self.role == Role.SENSOR):
            return '{} is not a {} action'.format(action.action.label, self.role.label)
        if self.contract is None:
            return 'no contract'
        t_id, terms = self.contract
        contract = self.ledger.find(t_id)
        if not is_contract(contract) or decode_metadata(contract, SealedContract).terms_digest != terms.digest:
            return 'contract not on the ledger'
        if not terms.covers(action):
            return 'outside contract terms (hour {})'.format(hour_of(action.period_id))
        return None

    def _apply(self, action):
        if action.action == DeviceAction.OFF:
            self.device_status, self.reduced_by = DeviceState.OFF, 0
        elif action.action == DeviceAction.REDUCE:
            self.device_status, self.reduced_by = DeviceState.REDUCED, action.amount
        elif action.action == DeviceAction.ON:
            self.device_status, self.reduced_by = DeviceState.ON, 0
        else:
            self.device_status = DeviceState.SAMPLING

    def _chain_head(self):
        # latest own response on the ledger, else this node's genesis
        for t_id in reversed(self._responses):
            if self.ledger.find(t_id) is not None:
                return t_id
        return self.ledger.genesis_for(self.public).gid

    @property
    def sampling(self):
        return self.role == Role.SENSOR and self.device_status == DeviceState.SAMPLING

    def audit(self, chain):
        return audit(self.public, chain)


@dataclass
class AccessRow:
    requester_pk: PublicKey
    target_pk: PublicKey
    target_role: Role
    target_class: str
    action: DeviceAction
    t_id: bytes
    height: int
    first_period: int
    last_period: int
    count: int = 0


@dataclass
class RequesterSummary:
    requester_pk: PublicKey
    requests: int = 0
    responses: int = 0
    first_period: Optional[int] = None
    last_period: Optional[int] = None


@dataclass
class AccessReport:
    owner_pk: PublicKey
    rows: list = field(default_factory=list)
    requesters: list = field(default_factory=list)

    def __len__(self):
        return len(self.rows)


def _chain_entries(chain):
    for block in chain:
        for entry in block.entries:
            yield block.height, block.period_id, entry


def audit(owner_pk, chain):
    """
    Every on-ledger request that targets `owner_pk` or a node it owns, with
    the number of responses it drew.

    `chain` is a `Ledger` or any iterable of blocks. Installed nodes are
    found through geneses whose owner key is `owner_pk`.
    """
    owner_pk = PublicKey(owner_pk)
    targets = {owner_pk: (None, '')}
    rows = {}
    for height, period_id, entry in _chain_entries(chain):
        if isinstance(entry, GenesisTransaction):
            if entry.owner_pk == owner_pk:
                targets[entry.subject_pk] = (entry.role, entry.node_class)
            continue
        if not isinstance(entry, LoadControlTransaction):
            continue
        if entry.ref_disco_id in rows and entry.pk_gen in targets:
            row = rows[entry.ref_disco_id]
            row.count += 1
            row.last_period = max(row.last_period, period_id)
            continue
        try:
            action = decode_metadata(entry, ControlAction)
        except CodecError:
            continue
        if action.target_pk not in targets:
            continue
        role, node_class = targets[action.target_pk]
        rows[entry.t_id] = AccessRow(
            requester_pk=entry.pk_gen,
            target_pk=action.target_pk,
            target_role=role,
            target_class=node_class or action.target_class,
            action=action.action,
            t_id=entry.t_id,
            height=height,
            first_period=period_id,
            last_period=period_id,
        )

    summaries = {}
    for row in rows.values():
        summary = summaries.setdefault(row.requester_pk, RequesterSummary(row.requester_pk))
        summary.requests += 1
        summary.responses += row.count
        summary.first_period = row.first_period if summary.first_period is None else min(
            summary.first_period, row.first_period)
        summary.last_period = row.last_period if summary.last_period is None else max(
            summary.last_period, row.last_period)
    return AccessReport(owner_pk=owner_pk, rows=list(rows.values()), requesters=list(summaries.values()))
