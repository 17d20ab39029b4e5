"""
Simulator adapters around `Disco` and `Participant`.

Agents decode envelopes, call the protocol objects and wrap what they emit
back into envelopes. They also keep the tallies a run report is built from.
"""
import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Optional

from . import codec
from .contracts import ControlAction, SealedContract
from .enums import DeviceAction, DlFlag, MessageKind, Role
from .exceptions import BadRefError, CodecError, NotAdmittedError
from .netsim import NODE_ORIGIN, Envelope
from .transactions import GenesisTransaction, LoadControlTransaction, decode_metadata, is_contract

logger = logging.getLogger(__name__)

DISCO_NAME = 'disco'


@dataclass
class VerdictEntry:
    tick: int
    period_id: int
    verdict: object
    reason: object
    flag: Optional[DlFlag]
    origin: str
    sender: str


@dataclass
class Installation:
    """A sensor or device DISCO installs once the customer's contract is on the ledger."""

    agent: object
    role: Role
    node_class: str


@dataclass
class Tally:
    dl_sent: int = 0
    dl_delivered: int = 0
    dl_accepted: int = 0
    dl_dropped: Counter = field(default_factory=Counter)
    dl_by_origin: Counter = field(default_factory=Counter)
    accepted_by_origin: Counter = field(default_factory=Counter)
    contracts_offered: int = 0
    contracts_refused: int = 0
    geneses_issued: int = 0
    geneses_refused: int = 0
    samples_requested: int = 0
    actions_requested: int = 0
    actions_executed: int = 0
    actions_refused: int = 0
    responses_staged: int = 0
    receipts_issued: int = 0
    receipts_verified: int = 0
    rejected: Counter = field(default_factory=Counter)


class DiscoAgent:
    def __init__(self, disco, participants, period_ticks, tally, name=DISCO_NAME):
        self.name = name
        self.disco = disco
        self.period_ticks = period_ticks
        self.tally = tally
        # public key -> ParticipantAgent
        self.directory = {agent.participant.public: agent for agent in participants}
        # customer pk -> (terms, [Installation])
        self.plans = {}
        self.verdicts = []

    def plan(self, customer, terms, installations=()):
        self.plans[customer.participant.public] = (terms, list(installations))
        for installation in installations:
            self.directory[installation.agent.participant.public] = installation.agent

    def _to(self, public_key, kind, record):
        return Envelope(self.name, self.directory[public_key].name, kind, codec.encode(record))

    def handle(self, envelope, tick):
        if envelope.kind == MessageKind.DL:
            self._handle_dl(envelope, tick)
            return []
        try:
            record = codec.decode(envelope.payload)
        except CodecError as exc:
            logger.debug('malformed %s from %s: %s', envelope.kind.value, envelope.sender, exc)
            self.tally.rejected['malformed'] += 1
            return []
        if isinstance(record, GenesisTransaction):
            self.disco.receive_genesis(record)
        elif isinstance(record, LoadControlTransaction):
            if self.disco.receive_load_control(record) and record.pk_gen != self.disco.public:
                self.tally.responses_staged += 1
        return []

    def _handle_dl(self, envelope, tick):
        self.tally.dl_delivered += 1
        self.tally.dl_by_origin[envelope.origin] += 1
        flag = None
        try:
            flag = DlFlag(envelope.payload[29])
        except (IndexError, ValueError):
            pass
        verdict = self.disco.verify_dl_bytes(envelope.payload)
        if verdict:
            self.tally.dl_accepted += 1
            self.tally.accepted_by_origin[envelope.origin] += 1
        else:
            self.tally.dl_dropped[verdict.reason.value] += 1
        self.verdicts.append(VerdictEntry(
            tick=tick,
            period_id=self.disco.period_id,
            verdict=verdict.verdict,
            reason=verdict.reason,
            flag=flag,
            origin=envelope.origin,
            sender=envelope.sender,
        ))

    def on_tick(self, tick):
        if tick == 0 or tick % self.period_ticks:
            return []
        return self.close_period()

    def commit(self):
        """Commit the period and hand out receipts."""
        block, receipts = self.disco.commit_period()
        self.tally.actions_refused += len(self.disco.refused)
        for receipt in receipts:
            self.tally.receipts_issued += 1
            agent = self.directory.get(receipt.owner)
            if agent is not None and agent.participant.accept_receipt(receipt):
                self.tally.receipts_verified += 1
        return block

    def close_period(self):
        """Commit the period, then start the workflows the new block enables."""
        block = self.commit()
        outbox = []
        for entry in block.transactions:
            if isinstance(entry, GenesisTransaction):
                if entry.subject_pk in self.plans:
                    outbox.append(self._offer(entry.subject_pk))
                elif entry.role == Role.SENSOR:
                    self.tally.samples_requested += 1
                    outbox.append(self._to(
                        entry.subject_pk, MessageKind.LOAD_CONTROL, self.disco.request_sampling(entry.subject_pk)))
            elif is_contract(entry):
                outbox.extend(self._install(entry))
        for request in self.disco.determine_actions():
            self.tally.actions_requested += 1
            outbox.append(self._to(request.pk_rec, MessageKind.LOAD_CONTROL, request))
        return [envelope for envelope in outbox if envelope is not None]

    def _offer(self, customer_pk):
        terms, _ = self.plans[customer_pk]
        try:
            tx = self.disco.initiate_contract(customer_pk, terms)
        except NotAdmittedError as exc:
            logger.warning('%s', exc)
            return None
        self.tally.contracts_offered += 1
        return self._to(customer_pk, MessageKind.LOAD_CONTROL, tx)

    def _install(self, contract):
        _, installations = self.plans.get(contract.pk_rec, (None, ()))
        outbox = []
        for installation in installations:
            node = installation.agent.participant
            try:
                genesis = self.disco.issue_sensor_genesis(
                    node.public, contract.t_id, installation.node_class, installation.role)
            except BadRefError as exc:
                logger.warning('%s', exc)
                continue
            self.tally.geneses_issued += 1
            outbox.append(self._to(contract.pk_rec, MessageKind.GENESIS, genesis))
        return outbox


class ParticipantAgent:
    def __init__(self, participant, tally, cadence=None, flag=DlFlag.LOAD, data=None, phase=0,
                 disco_name=DISCO_NAME):
        self.participant = participant
        self.tally = tally
        self.cadence = cadence
        self.flag = DlFlag(flag)
        self.data = data
        self.phase = phase
        self.disco_name = disco_name
        # installations this customer is waiting to provision, by public key
        self.site = {}

    @property
    def name(self):
        return self.participant.name

    def attach(self, agent):
        self.site[agent.participant.public] = agent

    def _to_disco(self, kind, record):
        return Envelope(self.name, self.disco_name, kind, codec.encode(record), NODE_ORIGIN)

    def handle(self, envelope, tick):
        try:
            record = codec.decode(envelope.payload)
        except CodecError as exc:
            logger.debug('%s: malformed %s: %s', self.name, envelope.kind.value, exc)
            return []
        if isinstance(record, GenesisTransaction):
            return self._on_genesis(record)
        if isinstance(record, LoadControlTransaction):
            return self._on_load_control(record)
        return []

    def _on_genesis(self, genesis):
        countersigned = self.participant.countersign_genesis(genesis)
        if countersigned is None:
            self.tally.geneses_refused += 1
            return []
        agent = self.site.get(genesis.subject_pk)
        if agent is not None:
            agent.participant.provision(*self.participant.current_contract())
        return [self._to_disco(MessageKind.GENESIS, countersigned)]

    def _on_load_control(self, tx):
        try:
            kind = type(decode_metadata(tx))
        except CodecError:
            kind = None
        if kind is SealedContract:
            countersigned = self.participant.countersign_contract(tx)
            if countersigned is None:
                self.tally.contracts_refused += 1
                return []
            return [self._to_disco(MessageKind.LOAD_CONTROL, countersigned)]
        countersigned = self.participant.accept_request(tx)
        if countersigned is None:
            return []
        return [self._to_disco(MessageKind.LOAD_CONTROL, countersigned)]

    def reporting(self):
        if self.cadence is None or self.participant.credentials is None:
            return False
        if self.participant.role.is_installed:
            return self.participant.sampling
        return self.participant.admitted

    def answer_confirmed(self):
        """Act on every accepted request now on the ledger; returns the responses."""
        outbox = []
        for request, response in self.participant.execute_confirmed():
            if decode_metadata(request, ControlAction).action != DeviceAction.SAMPLE:
                self.tally.actions_executed += 1
            outbox.append(self._to_disco(MessageKind.LOAD_CONTROL, response))
        return outbox

    def on_tick(self, tick):
        outbox = self.answer_confirmed()
        if not self.reporting() or (tick - self.phase) % self.cadence:
            return outbox
        value = self.data() if self.data is not None else 0
        tx = self.participant.report(value, self.flag)
        self.tally.dl_sent += 1
        outbox.append(self._to_disco(MessageKind.DL, tx))
        return outbox
