"""
Permissioned, hash-chained, append-only block store.

DISCO is the only block producer. Each block holds Merkle root entries for
DL reports (never the reports themselves) plus finalised load-control and
genesis transactions, and is signed by DISCO over its canonical encoding
with the signature body zero-filled.

On disk a chain is a sequence of 4-byte big-endian length-prefixed block
encodings.
"""
import logging
from dataclasses import dataclass, replace
from typing import NamedTuple, Optional

from . import codec
from .codec import Tag
from .crypto import NULL_DIGEST, SIGNATURE_SIZE, Digest, PublicKey, Signature, digest, sign, verify
from .enums import Violation
from .exceptions import (
    BadHeight, BadPrevHash, BadProducerSig, CodecError, InadmissibleEntry, InvalidFieldError, TransactionNotFound,
)
from .transactions import GenesisTransaction, LoadControlTransaction, is_admissible

logger = logging.getLogger(__name__)


@codec.record(Tag.MERKLE_ROOT)
@dataclass(frozen=True)
class MerkleRootEntry:
    period_id: int
    root: Digest
    leaf_count: int

    def __post_init__(self):
        object.__setattr__(self, 'root', Digest(self.root))
        if self.leaf_count < 1:
            raise ValueError('a Merkle root entry commits at least one leaf')

    def write_fields(self, writer, preimage=False):
        writer.u64(self.period_id)
        writer.digest(self.root)
        writer.u32(self.leaf_count)

    @classmethod
    def read_fields(cls, reader):
        return cls(period_id=reader.u64(), root=reader.digest(), leaf_count=reader.u32())


ENTRY_TYPES = (MerkleRootEntry, LoadControlTransaction, GenesisTransaction)


@codec.record(Tag.BLOCK)
@dataclass(frozen=True)
class Block:
    height: int
    prev_hash: Digest
    period_id: int
    entries: tuple = ()
    producer_sig: Optional[Signature] = None

    def __post_init__(self):
        object.__setattr__(self, 'prev_hash', Digest(self.prev_hash))
        object.__setattr__(self, 'entries', tuple(self.entries))
        if self.producer_sig is not None:
            object.__setattr__(self, 'producer_sig', Signature(self.producer_sig))

    @property
    def hash(self):
        return digest(codec.encode(self))

    @property
    def merkle_roots(self):
        return [entry for entry in self.entries if isinstance(entry, MerkleRootEntry)]

    @property
    def transactions(self):
        return [entry for entry in self.entries if not isinstance(entry, MerkleRootEntry)]

    def write_fields(self, writer, preimage=False):
        writer.u64(self.height)
        writer.digest(self.prev_hash)
        writer.u64(self.period_id)
        writer.u32(len(self.entries))
        for entry in self.entries:
            writer.record(entry)
        if preimage:
            writer.zeroed(SIGNATURE_SIZE)
        else:
            writer.optional(self.producer_sig, SIGNATURE_SIZE)

    @classmethod
    def read_fields(cls, reader):
        height = reader.u64()
        prev_hash = reader.digest()
        period_id = reader.u64()
        count = reader.u32()
        if count * 5 > reader.remaining:
            raise InvalidFieldError('{} entries do not fit in {} bytes'.format(count, reader.remaining))
        entries = []
        for _ in range(count):
            # rejects a nested block by tag before decoding it
            entries.append(reader.record(expect=ENTRY_TYPES))
        return cls(
            height=height,
            prev_hash=prev_hash,
            period_id=period_id,
            entries=tuple(entries),
            producer_sig=reader.optional(SIGNATURE_SIZE),
        )


def sign_block(block, keypair):
    return replace(block, producer_sig=sign(keypair, codec.encode_preimage(block)))


class StagedView:
    """A ledger plus entries accepted for the block under construction."""

    def __init__(self, ledger, staged=()):
        self.ledger = ledger
        self._staged = {}
        self._genesis = {}
        for entry in staged:
            self.add(entry)

    @property
    def disco_pk(self):
        return self.ledger.disco_pk

    def add(self, entry):
        if isinstance(entry, MerkleRootEntry):
            return
        self._staged[entry.t_id] = entry
        if isinstance(entry, GenesisTransaction):
            self._genesis[entry.subject_pk] = entry

    def find(self, t_id):
        found = self._staged.get(t_id)
        return found if found is not None else self.ledger.find(t_id)

    def genesis_for(self, public_key):
        found = self._genesis.get(public_key)
        return found if found is not None else self.ledger.genesis_for(public_key)


class Ledger:
    def __init__(self, producer_pk):
        self.producer_pk = PublicKey(producer_pk)
        self._blocks = []
        self._index = {}
        self._genesis = {}
        self._roots = {}

    @property
    def disco_pk(self):
        return self.producer_pk

    def __len__(self):
        return len(self._blocks)

    def __iter__(self):
        return iter(self._blocks)

    def __getitem__(self, height):
        return self._blocks[height]

    @property
    def blocks(self):
        return tuple(self._blocks)

    @property
    def head(self):
        return self._blocks[-1] if self._blocks else None

    @property
    def head_hash(self):
        return self._blocks[-1].hash if self._blocks else NULL_DIGEST

    def find(self, t_id):
        found = self._index.get(t_id)
        return found[1] if found is not None else None

    def genesis_for(self, public_key):
        return self._genesis.get(public_key)

    def root_for(self, period_id):
        """The `MerkleRootEntry` committed for `period_id`, if any."""
        return self._roots.get(period_id)

    def find_transaction(self, t_id):
        try:
            return self._index[t_id]
        except KeyError:
            raise TransactionNotFound('no transaction {} on the ledger'.format(Digest(t_id).hex()))

    def view(self, staged=()):
        return StagedView(self, staged)

    def entries(self):
        """Yield ``(height, period_id, entry)`` for every entry in chain order."""
        for block in self._blocks:
            for entry in block.entries:
                yield block.height, block.period_id, entry

    def next_block(self, period_id, entries, keypair):
        block = Block(height=len(self._blocks), prev_hash=self.head_hash, period_id=period_id, entries=entries)
        return sign_block(block, keypair)

    def append(self, block):
        height = len(self._blocks)
        if block.height != height:
            raise BadHeight('expected height {}, got {}'.format(height, block.height), height=height)
        if block.prev_hash != self.head_hash:
            raise BadPrevHash('prev_hash does not match the head', height=height)
        if block.producer_sig is None or not verify(
                self.producer_pk, codec.encode_preimage(block), block.producer_sig):
            raise BadProducerSig('block is not signed by the producer', height=height)
        view = self.view()
        for position, entry in enumerate(block.entries):
            if isinstance(entry, MerkleRootEntry):
                if entry.period_id != block.period_id:
                    raise InadmissibleEntry(
                        'entry {} commits period {} in a block for period {}'.format(
                            position, entry.period_id, block.period_id),
                        height=height)
                continue
            if not isinstance(entry, ENTRY_TYPES):
                raise InadmissibleEntry('entry {} is a {}'.format(position, type(entry).__name__), height=height)
            admission = is_admissible(entry, view)
            if not admission:
                raise InadmissibleEntry(
                    'entry {} is inadmissible: {}'.format(position, admission.reason.label),
                    height=height, detail=admission.reason)
            view.add(entry)

        self._blocks.append(block)
        for entry in block.entries:
            if isinstance(entry, MerkleRootEntry):
                self._roots[entry.period_id] = entry
                continue
            self._index[entry.t_id] = (height, entry)
            if isinstance(entry, GenesisTransaction):
                self._genesis[entry.subject_pk] = entry
        logger.debug('appended block %d with %d entries', height, len(block.entries))
        return self


class ChainCheck(NamedTuple):
    valid: bool
    height: Optional[int] = None
    violation: Optional[Violation] = None
    detail: str = ''

    def __bool__(self):
        return self.valid


def verify_chain(blocks, producer_pk):
    """Replay `blocks` onto an empty ledger; report the first violation."""
    ledger = Ledger(producer_pk)
    for block in blocks:
        try:
            ledger.append(block)
        except (BadHeight, BadPrevHash, BadProducerSig, InadmissibleEntry) as exc:
            height = exc.height if exc.height is not None else len(ledger)
            return ChainCheck(False, height, exc.reason, str(exc))
    return ChainCheck(True)


def dump_chain(blocks):
    writer = codec.Writer()
    for block in blocks:
        writer.record(block)
    return writer.getvalue()


def split_chain(data):
    """Yield raw block encodings; raises a `CodecError` on broken framing."""
    reader = codec.Reader(data)
    while reader.remaining:
        yield reader.var()


def load_chain(data):
    return [codec.decode(raw, expect=Block) for raw in split_chain(data)]


def write_chain_file(path, blocks):
    with open(path, 'wb') as handle:
        handle.write(dump_chain(blocks))


def read_chain_file(path):
    with open(path, 'rb') as handle:
        return handle.read()


def producer_from_chain(data):
    """
    The issuer key of the first genesis entry in block 0.

    Used when no producer key is supplied: a tampered key cannot verify the
    block signature it came with.
    """
    try:
        first = next(split_chain(data), None)
        block = codec.decode(first, expect=Block) if first is not None else None
    except CodecError:
        return None
    if block is None:
        return None
    for entry in block.entries:
        if isinstance(entry, GenesisTransaction):
            return entry.issuer_pk
    return None


def verify_chain_bytes(data, producer_pk=None):
    """
    Verify a serialized chain, framing and decoding included.

    Framing or decoding failures are reported as `Violation.MALFORMED` at
    the height of the first block that cannot be read.
    """
    blocks = []
    try:
        for raw in split_chain(data):
            try:
                blocks.append(codec.decode(raw, expect=Block))
            except CodecError as exc:
                return ChainCheck(False, len(blocks), Violation.MALFORMED, str(exc))
    except CodecError as exc:
        return ChainCheck(False, len(blocks), Violation.MALFORMED, str(exc))
    if not blocks:
        return ChainCheck(True)
    if producer_pk is None:
        producer_pk = producer_from_chain(data)
        if producer_pk is None:
            return ChainCheck(False, 0, Violation.BAD_PRODUCER_SIG, 'no producer key supplied or found in block 0')
    return verify_chain(blocks, producer_pk)
