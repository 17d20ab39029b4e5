"""
Deterministic discrete-event message fabric.

Time is a logical tick. Events run in ``(tick, insertion order)`` and every
random draw comes from a stream seeded by the scenario, so a run is a pure
function of its seed and configuration. Adversaries sit on the send path:
each may observe, alter, or schedule extra copies of a message.
"""
import heapq
import json
import logging
from collections import Counter, OrderedDict, deque
from dataclasses import dataclass, replace

from . import codec
from .crypto import digest
from .enums import AdversaryMode, MessageKind, Outcome
from .exceptions import CodecError
from .identity import ID_MODULUS, SECRET_VALUE_SIZE
from .seeding import rng_for
from .transactions import DlTransaction, compute_secret

logger = logging.getLogger(__name__)

NODE_ORIGIN = 'node'


@dataclass(frozen=True)
class Envelope:
    sender: str
    recipient: str
    kind: MessageKind
    payload: bytes
    # ground truth for accounting; nodes never read it
    origin: str = NODE_ORIGIN


@dataclass(frozen=True)
class Event:
    tick: int
    seq: int
    envelope: Envelope
    outcome: Outcome


def inject_tamper(envelope, position, value=None):
    """A copy of `envelope` with the payload byte at `position` replaced."""
    payload = bytearray(envelope.payload)
    if not 0 <= position < len(payload):
        raise IndexError('position {} outside a {}-byte payload'.format(position, len(payload)))
    payload[position] = payload[position] ^ 0xFF if value is None else value
    if payload[position] == envelope.payload[position]:
        raise ValueError('tamper at {} leaves the byte unchanged'.format(position))
    return replace(envelope, payload=bytes(payload), origin=AdversaryMode.TAMPERER.value)


class LinkageTracker:
    """
    Links rotating DL identifiers without registry knowledge.

    Any two recent unlinked ids suggest a constant increment; the pair is
    confirmed as a track when a later id matches the predicted next one.
    Tracks then absorb every id they predict.
    """

    def __init__(self, window=64):
        self.window = window
        self.observations = []
        self.tracks = []
        self._pending = deque(maxlen=window)
        self._linked = set()
        self._predictions = {}
        self._candidates = OrderedDict()

    def observe(self, id, sender):
        index = len(self.observations)
        self.observations.append((id, sender))

        track = self._predictions.pop(id, None)
        if track is not None:
            self._extend(track, index)
            return

        candidate = self._candidates.pop(id, None)
        if candidate is not None:
            members, delta = candidate
            if not self._linked.intersection(members):
                self.tracks.append((list(members), delta))
                self._linked.update(members)
                self._extend(len(self.tracks) - 1, index)
                return

        for previous in self._pending:
            if previous in self._linked:
                continue
            delta = (id - self.observations[previous][0]) % ID_MODULUS
            if delta:
                self._candidates[(id + delta) % ID_MODULUS] = ((previous, index), delta)
        while len(self._candidates) > self.window * self.window:
            self._candidates.popitem(last=False)
        self._pending.append(index)

    def _extend(self, track, index):
        members, delta = self.tracks[track]
        members.append(index)
        self._linked.add(index)
        self._predictions[(self.observations[index][0] + delta) % ID_MODULUS] = track

    @property
    def score(self):
        """Fraction of observed ids placed in a track that belongs to a single sender."""
        if not self.observations:
            return 0.0
        correct = sum(
            len(members) for members, _ in self.tracks
            if len({self.observations[i][1] for i in members}) == 1
        )
        return correct / len(self.observations)


class Adversary:
    def __init__(self, mode, seed=0, intensity=1.0, kinds=(MessageKind.DL,), max_delay=5, window=64):
        self.mode = AdversaryMode(mode)
        self.seed = seed
        self.intensity = intensity
        self.kinds = frozenset(MessageKind(kind) for kind in kinds)
        self.max_delay = max(1, max_delay)
        self.rng = rng_for(seed, 'adversary', self.mode.value)
        self.recorded = []
        self.actions = Counter()
        self.tracker = LinkageTracker(window) if self.mode == AdversaryMode.EAVESDROPPER else None
        self.public_keys = set()

    def __repr__(self):
        return 'Adversary({}, intensity={})'.format(self.mode.value, self.intensity)

    def _targets(self, envelope):
        return envelope.kind in self.kinds and self.rng.random() < self.intensity

    def intercept(self, envelope):
        """
        Returns ``(envelope to deliver, extras)`` where extras are
        ``(delay, envelope, outcome)`` triples to schedule alongside.
        """
        if self.mode == AdversaryMode.EAVESDROPPER:
            self._eavesdrop(envelope)
            return envelope, []
        if not self._targets(envelope):
            return envelope, []
        self.recorded.append(envelope)
        if self.mode == AdversaryMode.REPLAYER:
            self.actions['replayed'] += 1
            return envelope, [self.inject_replay(envelope)]
        if self.mode == AdversaryMode.TAMPERER:
            position = self.rng.randrange(len(envelope.payload))
            value = (envelope.payload[position] + self.rng.randint(1, 255)) % 256
            self.actions['tampered'] += 1
            return inject_tamper(envelope, position, value), []
        forged = self.forge(envelope)
        if forged is None:
            return envelope, []
        self.actions['forged'] += 1
        return envelope, [(self.rng.randint(1, self.max_delay), forged, Outcome.FORGE)]

    def inject_replay(self, envelope):
        """A byte-identical copy scheduled a few ticks later."""
        delay = self.rng.randint(1, self.max_delay)
        return delay, replace(envelope, origin=AdversaryMode.REPLAYER.value), Outcome.DUPLICATE

    def forge(self, envelope):
        """A DL transaction with a random id, or a seen id with a guessed secret_value."""
        if envelope.kind != MessageKind.DL:
            return None
        try:
            seen = codec.decode(envelope.payload, expect=DlTransaction)
        except CodecError:
            return None
        secret_value = bytes(self.rng.getrandbits(8) for _ in range(SECRET_VALUE_SIZE))
        if self.rng.random() < 0.5:
            id = self.rng.getrandbits(128)
            secret = digest(bytes(self.rng.getrandbits(8) for _ in range(32)))
        else:
            id = seen.id
            secret = compute_secret(secret_value, self.rng.getrandbits(16), seen.data, seen.dl_flag)
        tx = DlTransaction(id=id, data=seen.data, dl_flag=seen.dl_flag, secret=secret)
        return replace(envelope, payload=codec.encode(tx), origin=AdversaryMode.FORGER.value)

    def _eavesdrop(self, envelope):
        if envelope.kind == MessageKind.DL:
            try:
                tx = codec.decode(envelope.payload, expect=DlTransaction)
            except CodecError:
                return
            self.tracker.observe(tx.id, envelope.sender)
            self.actions['observed'] += 1
            return
        try:
            record = codec.decode(envelope.payload)
        except CodecError:
            return
        for name in ('pk_gen', 'pk_rec', 'subject_pk', 'issuer_pk', 'owner_pk'):
            value = getattr(record, name, None)
            if value is not None:
                self.public_keys.add(value)

    @property
    def linkage_score(self):
        return self.tracker.score if self.tracker is not None else None


class World:
    """
    Nodes are objects with a ``name``, ``handle(envelope, tick)`` and
    ``on_tick(tick)``; both return the envelopes the node sends.
    """

    def __init__(self, seed=0, loss=0.0):
        self.tick = 0
        self.loss = loss
        self.nodes = {}
        self.adversaries = []
        self.trace = []
        self.counts = Counter()
        self._queue = []
        self._seq = 0
        self._rng = rng_for(seed, 'network')

    def add_node(self, node):
        if node.name in self.nodes:
            raise ValueError('duplicate node name {!r}'.format(node.name))
        self.nodes[node.name] = node
        return node

    def add_adversary(self, adversary):
        self.adversaries.append(adversary)
        return adversary

    @property
    def pending(self):
        return len(self._queue)

    def schedule(self, envelope, delay=1, outcome=Outcome.DELIVER):
        """Queue `envelope` directly, past the loss model and adversaries."""
        event = Event(tick=self.tick + delay, seq=self._seq, envelope=envelope, outcome=outcome)
        self._seq += 1
        heapq.heappush(self._queue, (event.tick, event.seq, event))
        self.counts[(envelope.kind, outcome)] += 1
        return event

    def send(self, envelope, delay=1):
        if self.loss and self._rng.random() < self.loss:
            self.counts[(envelope.kind, Outcome.DROP)] += 1
            self._record(self.tick + delay, -1, envelope, Outcome.DROP)
            return None
        extras = []
        for adversary in self.adversaries:
            envelope, added = adversary.intercept(envelope)
            extras.extend(added)
        outcome = Outcome.TAMPER if envelope.origin == AdversaryMode.TAMPERER.value else Outcome.DELIVER
        event = self.schedule(envelope, delay, outcome)
        for extra_delay, extra, extra_outcome in extras:
            self.schedule(extra, delay + extra_delay, extra_outcome)
        return event

    def step(self):
        """Deliver everything due this tick, then let every node act, then advance."""
        self._deliver_due()
        for node in list(self.nodes.values()):
            for envelope in node.on_tick(self.tick) or ():
                self.send(envelope)
        self.tick += 1
        return self

    def drain(self, limit=1000):
        """Deliver what is still in flight without letting nodes start anything new."""
        while self._queue and limit > 0:
            self._deliver_due()
            self.tick += 1
            limit -= 1
        return self

    def _deliver_due(self):
        while self._queue and self._queue[0][0] <= self.tick:
            _, _, event = heapq.heappop(self._queue)
            self._record(event.tick, event.seq, event.envelope, event.outcome)
            node = self.nodes.get(event.envelope.recipient)
            if node is None:
                logger.debug('no node %r for %s', event.envelope.recipient, event.envelope.kind.value)
                continue
            for envelope in node.handle(event.envelope, self.tick) or ():
                self.send(envelope)

    def run(self, ticks):
        for _ in range(ticks):
            self.step()
        return self

    def _record(self, tick, seq, envelope, outcome):
        self.trace.append({
            'tick': tick,
            'seq': seq,
            'sender': envelope.sender,
            'recipient': envelope.recipient,
            'kind': envelope.kind.value,
            'origin': envelope.origin,
            'outcome': outcome.value,
            'size': len(envelope.payload),
            'digest': digest(envelope.payload).hex(),
        })

    def export_trace(self, handle):
        """Write the delivery trace as JSON lines."""
        for entry in self.trace:
            handle.write(json.dumps(entry, sort_keys=True))
            handle.write('\n')
