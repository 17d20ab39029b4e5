"""
Rotating identifiers and DISCO's registry of per-node secrets.

A node's identifier advances by a constant `pattern_delta` (mod 2**128) and
its nonce by one for every accepted DL transaction. DISCO keeps the same four
values per node and advances its copy in lockstep.
"""
import logging
from dataclasses import dataclass, replace

from .crypto import PublicKey
from .exceptions import DuplicateIdError, RecordNotFound

logger = logging.getLogger(__name__)

ID_SIZE = 16
ID_MODULUS = 1 << (8 * ID_SIZE)
NONCE_LIMIT = 1 << 64
SECRET_VALUE_SIZE = 32


@dataclass(frozen=True)
class NodeCredentials:
    current_id: int
    pattern_delta: int
    secret_value: bytes
    nonce: int = 0

    def __post_init__(self):
        if not 0 <= self.current_id < ID_MODULUS:
            raise ValueError('current_id must fit in {} bytes'.format(ID_SIZE))
        if not 0 <= self.pattern_delta < ID_MODULUS:
            raise ValueError('pattern_delta must fit in {} bytes'.format(ID_SIZE))
        if len(self.secret_value) != SECRET_VALUE_SIZE:
            raise ValueError('secret_value must be {} bytes'.format(SECRET_VALUE_SIZE))
        if not 0 <= self.nonce < NONCE_LIMIT:
            raise ValueError('nonce must fit in 64 bits')

    def id_at(self, offset):
        return (self.current_id + offset * self.pattern_delta) % ID_MODULUS

    def advance(self, steps=1):
        return replace(self, current_id=self.id_at(steps), nonce=self.nonce + steps)

    def __repr__(self):
        return 'NodeCredentials(current_id={:032x}, nonce={})'.format(self.current_id, self.nonce)


def advance(credentials):
    return credentials.advance()


@dataclass(frozen=True)
class RegistryRecord:
    credentials: NodeCredentials
    owner_pk: PublicKey

    @property
    def current_id(self):
        return self.credentials.current_id

    @property
    def pattern_delta(self):
        return self.credentials.pattern_delta

    @property
    def secret_value(self):
        return self.credentials.secret_value

    @property
    def nonce(self):
        return self.credentials.nonce


class Registry:
    """
    DISCO-side records keyed by owner public key, indexed by identifier.

    With a resync window W > 0 the index also holds the W identifiers before
    and after each record's current one, tagged with their offset, so that
    `locate` can tell a stale identifier (replay) from one a few steps ahead
    (lost messages). A current identifier takes precedence over another
    node's window entry, so `register` rejects only ids that are current.
    """

    def __init__(self, window=0):
        if window < 0:
            raise ValueError('resync window must be >= 0')
        self.window = window
        self._records = {}
        self._index = {}

    def __len__(self):
        return len(self._records)

    def __contains__(self, owner_pk):
        return owner_pk in self._records

    def __iter__(self):
        return iter(self._records.values())

    def get(self, owner_pk):
        try:
            return self._records[owner_pk]
        except KeyError:
            raise RecordNotFound('no record for {!r}'.format(owner_pk))

    def register(self, id, pattern_delta, secret_value, owner_pk):
        credentials = NodeCredentials(current_id=id, pattern_delta=pattern_delta, secret_value=secret_value)
        owner_pk = PublicKey(owner_pk)
        if owner_pk in self._records:
            raise DuplicateIdError('{!r} is already registered'.format(owner_pk))
        if self._index.get(id, (None, None))[1] == 0:
            raise DuplicateIdError('id {:032x} is already registered'.format(id))
        registered = RegistryRecord(credentials=credentials, owner_pk=owner_pk)
        self._records[owner_pk] = registered
        self._index_record(registered)
        logger.debug('registered %r with id %032x', owner_pk, id)
        return registered

    def lookup(self, id):
        entry = self._index.get(id)
        if entry is None or entry[1] != 0:
            raise RecordNotFound('id {:032x} is not current for any node'.format(id))
        return self._records[entry[0]]

    def locate(self, id):
        """
        Return ``(record, offset)`` for `id` within the resync window.

        Offset 0 is the current identifier, negative offsets are identifiers
        already consumed, positive ones lie ahead of DISCO's copy.
        """
        entry = self._index.get(id)
        if entry is None:
            raise RecordNotFound('id {:032x} is not within the window of any node'.format(id))
        return self._records[entry[0]], entry[1]

    def advance(self, owner_pk, steps=1):
        current = self.get(owner_pk)
        self._unindex_record(current)
        updated = replace(current, credentials=current.credentials.advance(steps))
        self._records[owner_pk] = updated
        self._index_record(updated)
        return updated

    def _offsets(self, record):
        # offset 0 last so a zero pattern keeps the current id at offset 0
        past = [-k for k in range(1, self.window + 1) if record.nonce - k >= 0]
        ahead = list(range(1, self.window + 1))
        return past + ahead + [0]

    def _index_record(self, record):
        for offset in self._offsets(record):
            id = record.credentials.id_at(offset)
            existing = self._index.get(id)
            if existing is not None and existing[0] != record.owner_pk and existing[1] == 0:
                continue
            self._index[id] = (record.owner_pk, offset)

    def _unindex_record(self, record):
        for offset in self._offsets(record):
            id = record.credentials.id_at(offset)
            existing = self._index.get(id)
            if existing is not None and existing[0] == record.owner_pk:
                del self._index[id]
