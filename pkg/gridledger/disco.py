"""
DISCO's side of the protocol.

`Disco` verifies DL reports against its registry, commits each period's
accepted reports as a Merkle root, runs the contract and installation
workflows, and issues load-control requests chosen by a `LoadControlPolicy`.
"""
import hmac
import logging
import math
from collections import Counter
from dataclasses import dataclass
from typing import NamedTuple

from . import codec
from .contracts import ControlAction, seal_terms
from .crypto import NULL_DIGEST, PublicKey, verify
from .enums import DeviceAction, DeviceState, DlFlag, DropReason, Reason, Role, Verdict
from .exceptions import BadRefError, CodecError, KeyMismatchError, NotAdmittedError, RecordNotFound
from .identity import Registry
from .ledger import Ledger, MerkleRootEntry
from .merkle import MerkleProof, MerkleTree, leaf_digest
from .transactions import (
    Admission, DlTransaction, GenesisTransaction, LoadControlTransaction, build_load_control, compute_secret,
    countersign_as_receiver, decode_metadata, is_admissible, is_contract, sign_as_generator, sign_as_issuer,
)

logger = logging.getLogger(__name__)

CURTAILING_ACTIONS = (DeviceAction.OFF, DeviceAction.REDUCE)


@dataclass(frozen=True)
class LoadControlPolicy:
    """
    Threshold curtailment.

    When a period's reported load exceeds `capacity_threshold`, curtail
    ``ceil(excess / per_device_reduction)`` devices, taking device classes in
    `curtailment_order` (then any other class) and devices of one class in
    installation order.
    """

    capacity_threshold: int
    curtailment_order: tuple = ()
    per_device_reduction: int = 1000
    action: DeviceAction = DeviceAction.OFF

    def __post_init__(self):
        object.__setattr__(self, 'curtailment_order', tuple(self.curtailment_order))
        object.__setattr__(self, 'action', DeviceAction(self.action))
        if self.capacity_threshold <= 0:
            raise ValueError('capacity_threshold must be > 0')
        if self.per_device_reduction <= 0:
            raise ValueError('per_device_reduction must be > 0')
        if self.action not in CURTAILING_ACTIONS:
            raise ValueError('policy action must be OFF or REDUCE, got {}'.format(self.action.name))

    def devices_needed(self, total_load):
        excess = total_load - self.capacity_threshold
        if excess <= 0:
            return 0
        return math.ceil(excess / self.per_device_reduction)


def plan_curtailment(policy, total_load, candidates):
    """
    Pick the devices to curtail.

    `candidates` is a sequence of `InstalledNode`; the result is the ordered
    prefix the policy asks for, possibly shorter if not enough are eligible.
    """
    needed = policy.devices_needed(total_load)
    if not needed:
        return []
    rank = {device_class: position for position, device_class in enumerate(policy.curtailment_order)}
    # unlisted classes follow the listed ones
    ordered = sorted(candidates, key=lambda node: (rank.get(node.node_class, len(rank)), node.sequence))
    return ordered[:needed]


class Accept(NamedTuple):
    owner: PublicKey
    offset: int = 0

    verdict = Verdict.ACCEPT
    reason = None

    def __bool__(self):
        return True


class Drop(NamedTuple):
    reason: DropReason

    verdict = Verdict.DROP
    owner = None

    def __bool__(self):
        return False


class Receipt(NamedTuple):
    owner: PublicKey
    leaf: bytes
    proof: MerkleProof
    period_id: int


class PeriodSummary(NamedTuple):
    period_id: int
    total_demand: int = 0
    total_load: int = 0
    sensor_readings: int = 0
    accepted: int = 0


@dataclass
class InstalledNode:
    public_key: PublicKey
    owner_pk: PublicKey
    role: Role
    node_class: str
    genesis_id: bytes
    sequence: int
    state: DeviceState = DeviceState.ON


class Disco:
    def __init__(self, keypair, policy, resync_window=0):
        self.keypair = keypair
        self.policy = policy
        self.registry = Registry(window=resync_window)
        self.chain = Ledger(keypair.public)
        self.period_id = 0
        self.pending_dl = []
        self.staged = []
        # t_id -> (request, period) until answered; the period restarts once the target countersigns
        self.outstanding_requests = {}
        # outstanding requests whose countersigned copy is staged or on the ledger
        self.countersigned = set()
        # t_id -> (customer pk, terms) until the contract is on-ledger
        self.pending_contracts = {}
        # customer pk -> (contract t_id, terms)
        self.contracts = {}
        self.pending_geneses = {}
        self.installed = {}
        self.refused = []
        self.rejections = Counter()
        self.last_summary = None
        self._last_tid = NULL_DIGEST

    @property
    def public(self):
        return self.keypair.public

    def view(self):
        return self.chain.view(self.staged)

    # -- bootstrap -----------------------------------------------------------

    def register(self, credentials, owner_pk):
        """Share a node's identifier pattern and secret value with DISCO."""
        return self.registry.register(
            credentials.current_id, credentials.pattern_delta, credentials.secret_value, owner_pk)

    def admit(self, public_key, role, node_class=''):
        """Stage a DISCO-signed genesis admitting a producer, consumer or storage node."""
        role = Role(role)
        if role.is_installed:
            raise ValueError('{} nodes are admitted through issue_sensor_genesis'.format(role.label))
        genesis = sign_as_issuer(
            GenesisTransaction(subject_pk=public_key, role=role, node_class=node_class, issuer_pk=self.public),
            self.keypair,
        )
        admission = self._stage(genesis)
        if not admission:
            raise NotAdmittedError('cannot admit {!r}: {}'.format(PublicKey(public_key), admission.reason.label))
        return genesis

    # -- DL reports ----------------------------------------------------------

    def verify_dl(self, tx):
        """Accept or drop one DL report. Never raises."""
        try:
            record, offset = self.registry.locate(tx.id)
        except RecordNotFound:
            logger.debug('drop: unknown id %032x', tx.id)
            return Drop(DropReason.UNKNOWN_ID)
        if offset < 0:
            logger.debug('drop: id %032x is %d steps behind', tx.id, -offset)
            return Drop(DropReason.DUPLICATE_NONCE)
        expected = compute_secret(record.secret_value, record.nonce + offset, tx.data, tx.dl_flag)
        if not hmac.compare_digest(expected, tx.secret):
            logger.debug('drop: secret mismatch for id %032x', tx.id)
            return Drop(DropReason.BAD_SECRET)
        if offset:
            logger.info('resynchronised %r, skipped %d ids', record.owner_pk, offset)
        self.pending_dl.append((tx, record.owner_pk))
        self.registry.advance(record.owner_pk, steps=offset + 1)
        return Accept(record.owner_pk, offset)

    def verify_dl_bytes(self, payload):
        try:
            tx = codec.decode(payload, expect=DlTransaction)
        except CodecError as exc:
            logger.debug('drop: malformed DL payload: %s', exc)
            return Drop(DropReason.MALFORMED)
        return self.verify_dl(tx)

    def summarize(self):
        summary = Counter()
        for tx, owner in self.pending_dl:
            node = self.installed.get(owner)
            if node is not None and node.role == Role.SENSOR:
                summary['sensor_readings'] += 1
            elif tx.dl_flag == DlFlag.LOAD:
                summary['total_load'] += tx.data
            else:
                summary['total_demand'] += tx.data
        return PeriodSummary(period_id=self.period_id, accepted=len(self.pending_dl), **summary)

    # -- commit --------------------------------------------------------------

    def commit_period(self):
        """
        Close the current period: append a block holding the Merkle root of
        the accepted reports plus every staged transaction.

        Returns ``(block, receipts)`` with one receipt per accepted report.
        """
        summary = self.summarize()
        entries = []
        receipts = []
        if self.pending_dl:
            tree = MerkleTree.build(leaf_digest(tx) for tx, _ in self.pending_dl)
            entries.append(MerkleRootEntry(period_id=self.period_id, root=tree.root, leaf_count=len(tree)))
            receipts = [
                Receipt(owner=owner, leaf=leaf, proof=tree.prove(index), period_id=self.period_id)
                for index, ((tx, owner), leaf) in enumerate(zip(self.pending_dl, tree.leaves))
            ]
        entries.extend(self.staged)
        block = self.chain.next_block(self.period_id, entries, self.keypair)
        self.chain.append(block)
        self._finalise(block)

        expired = [t_id for t_id, (_, since) in self.outstanding_requests.items() if since < self.period_id]
        self.refused = [self.outstanding_requests.pop(t_id)[0] for t_id in expired]
        self.countersigned.difference_update(expired)
        for request in self.refused:
            logger.warning('request %s went unanswered', request.t_id.hex()[:16])

        logger.info(
            'committed period %d: block %d, %d reports, %d transactions',
            self.period_id, block.height, len(receipts), len(self.staged))
        self.pending_dl = []
        self.staged = []
        self.last_summary = summary
        self.period_id += 1
        return block, receipts

    def _finalise(self, block):
        for entry in block.transactions:
            if isinstance(entry, GenesisTransaction):
                self.pending_geneses.pop(entry.gid, None)
                if entry.role.is_installed:
                    self.installed[entry.subject_pk] = InstalledNode(
                        public_key=entry.subject_pk,
                        owner_pk=entry.owner_pk,
                        role=entry.role,
                        node_class=entry.node_class,
                        genesis_id=entry.gid,
                        sequence=len(self.installed),
                    )
            elif entry.t_id in self.pending_contracts:
                customer_pk, terms = self.pending_contracts.pop(entry.t_id)
                self.contracts[customer_pk] = (entry.t_id, terms)
                logger.info('contract %s with %r is on the ledger', entry.t_id.hex()[:16], customer_pk)

    def _stage(self, tx):
        admission = is_admissible(tx, self.view())
        if admission:
            self.staged.append(tx)
            if isinstance(tx, LoadControlTransaction) and tx.pk_gen == self.public:
                self._last_tid = tx.t_id
        else:
            self.rejections[admission.reason] += 1
            logger.debug('rejected %s: %s', type(tx).__name__, admission.reason.label)
        return admission

    # -- contracts and installation -----------------------------------------

    def initiate_contract(self, customer_pk, terms):
        """A DISCO-signed contract offer awaiting the customer's countersignature."""
        customer_pk = PublicKey(customer_pk)
        genesis = self.view().genesis_for(customer_pk)
        if genesis is None or genesis.role.is_installed:
            raise NotAdmittedError('{!r} has no genesis on the ledger'.format(customer_pk))
        tx = sign_as_generator(
            build_load_control(
                pk_gen=self.public,
                pk_rec=customer_pk,
                p_t_id=self._last_tid,
                metadata=seal_terms(customer_pk, terms),
            ),
            self.keypair,
        )
        self.pending_contracts[tx.t_id] = (customer_pk, terms)
        logger.info('offered contract %s to %r', tx.t_id.hex()[:16], customer_pk)
        return tx

    def issue_sensor_genesis(self, subject_pk, contract_tid, node_class='', role=Role.SENSOR):
        """
        A DISCO-signed genesis for a sensor or controllable device, linked
        to the customer's on-ledger contract and awaiting their countersignature.
        """
        role = Role(role)
        if not role.is_installed:
            raise ValueError('{} nodes are not installed at a customer site'.format(role.label))
        contract = self.chain.find(contract_tid)
        if not is_contract(contract) or not contract.is_fully_signed or contract.pk_gen != self.public:
            raise BadRefError('{} does not resolve to a signed contract on the ledger'.format(
                bytes(contract_tid).hex()))
        genesis = sign_as_issuer(
            GenesisTransaction(
                subject_pk=subject_pk,
                role=role,
                node_class=node_class,
                issuer_pk=self.public,
                owner_pk=contract.pk_rec,
                contract_ref=contract_tid,
            ),
            self.keypair,
        )
        self.pending_geneses[genesis.gid] = genesis
        return genesis

    def receive_genesis(self, genesis):
        """Stage a genesis the owner has countersigned."""
        if genesis.gid not in self.pending_geneses:
            self.rejections[Reason.BAD_REF] += 1
            return Admission(False, Reason.BAD_REF)
        return self._stage(genesis)

    # -- requests and responses ---------------------------------------------

    def issue_request(self, node, action, amount=0):
        """A signed request to an installed node, recorded as outstanding."""
        metadata = ControlAction(
            target_pk=node.public_key,
            target_class=node.node_class,
            action=action,
            amount=amount,
            period_id=self.period_id,
        )
        request = sign_as_generator(
            build_load_control(pk_gen=self.public, pk_rec=node.public_key, p_t_id=self._last_tid, metadata=metadata),
            self.keypair,
        )
        self.outstanding_requests[request.t_id] = (request, self.period_id)
        return request

    def request_sampling(self, sensor_pk):
        return self.issue_request(self.installed[sensor_pk], DeviceAction.SAMPLE)

    def determine_actions(self, summary=None):
        """Requests curtailing devices after a period whose load ran over capacity."""
        summary = summary if summary is not None else self.last_summary
        if summary is None:
            return []
        busy = {request.pk_rec for request, _ in self.outstanding_requests.values()}
        candidates = [node for node in self.installed.values() if self._eligible(node, busy)]
        chosen = plan_curtailment(self.policy, summary.total_load, candidates)
        amount = self.policy.per_device_reduction if self.policy.action == DeviceAction.REDUCE else 0
        requests = [self.issue_request(node, self.policy.action, amount) for node in chosen]
        if requests:
            logger.info(
                'period %d load %d over capacity %d: %d requests',
                summary.period_id, summary.total_load, self.policy.capacity_threshold, len(requests))
        return requests

    def _eligible(self, node, busy):
        if node.role != Role.DEVICE or node.state != DeviceState.ON or node.public_key in busy:
            return False
        contract = self.contracts.get(node.owner_pk)
        if contract is None:
            return False
        action = ControlAction(node.public_key, node.node_class, self.policy.action, 0, self.period_id)
        return contract[1].covers(action)

    def receive_load_control(self, tx):
        """
        Handle a load-control transaction sent to DISCO.

        DISCO-generated transactions come back countersigned and are staged
        as they are; a staged request then waits for its response. Responses
        from installed nodes are countersigned by DISCO first, and only for a
        request that is on the ledger and still unanswered.
        """
        if tx.pk_gen == self.public:
            if tx.t_id in self.pending_contracts:
                return self._stage(tx)
            if tx.t_id not in self.outstanding_requests or tx.t_id in self.countersigned:
                self.rejections[Reason.BAD_REF] += 1
                return Admission(False, Reason.BAD_REF)
            admission = self._stage(tx)
            if admission:
                request, _ = self.outstanding_requests[tx.t_id]
                self.outstanding_requests[tx.t_id] = (request, self.period_id)
                self.countersigned.add(tx.t_id)
            return admission
        ref = tx.ref_disco_id
        if ref not in self.outstanding_requests or ref not in self.countersigned or self.chain.find(ref) is None:
            self.rejections[Reason.BAD_REF] += 1
            logger.debug('response %s answers no request on the ledger', tx.t_id.hex()[:16])
            return Admission(False, Reason.BAD_REF)
        if tx.sign_gen is None:
            self.rejections[Reason.MISSING_SIGNATURE] += 1
            return Admission(False, Reason.MISSING_SIGNATURE)
        if not verify(tx.pk_gen, codec.encode_preimage(tx), tx.sign_gen):
            self.rejections[Reason.BAD_SIGNATURE] += 1
            return Admission(False, Reason.BAD_SIGNATURE)
        try:
            countersigned = countersign_as_receiver(tx, self.keypair)
        except KeyMismatchError:
            self.rejections[Reason.BAD_REF] += 1
            return Admission(False, Reason.BAD_REF)
        admission = self._stage(countersigned)
        if admission:
            del self.outstanding_requests[ref]
            self.countersigned.discard(ref)
            self._record_response(countersigned)
        return admission

    def _record_response(self, response):
        node = self.installed.get(response.pk_gen)
        if node is None:
            return
        try:
            receipt = decode_metadata(response)
        except CodecError:
            return
        state = getattr(receipt, 'state', None)
        if state is not None and node.role == Role.DEVICE:
            node.state = DeviceState(state)

    def contract_for(self, customer_pk):
        found = self.contracts.get(PublicKey(customer_pk))
        return found[0] if found is not None else None

