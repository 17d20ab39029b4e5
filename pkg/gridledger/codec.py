"""
Canonical byte encoding for every record that is hashed, signed, sent or stored.

Integers are fixed-width big-endian, variable-length fields carry a 4-byte
big-endian length prefix, and every record starts with a 1-byte `Tag`.
Nothing is padded. The layout of each record is documented in
``docs/byte-format.md``.
"""
from .crypto import DIGEST_SIZE, Digest
from .enums import IntEnum
from .exceptions import (
    CodecError, CryptoError, InvalidFieldError, LengthError, TrailingBytesError, TruncatedError, UnknownTagError,
)

MAX_FIELD_LENGTH = 1 << 24


class Tag(IntEnum):
    DL = 0x01
    LOAD_CONTROL = 0x02
    GENESIS = 0x03
    BLOCK = 0x04
    MERKLE_PROOF = 0x05
    MERKLE_ROOT = 0x06
    SEALED_CONTRACT = 0x07
    CONTROL_ACTION = 0x08
    ACTION_RECEIPT = 0x09
    CONTRACT_TERMS = 0x0A

    class Labels:
        DL = 'DL transaction'
        LOAD_CONTROL = 'Load control transaction'
        GENESIS = 'Genesis transaction'
        MERKLE_PROOF = 'Merkle proof'
        MERKLE_ROOT = 'Merkle root entry'


_records = {}


def record(tag):
    """
    Class decorator registering a record type under `tag`.

    The class provides ``write_fields(writer, preimage=False)`` and a
    ``read_fields(reader)`` classmethod; the tag byte is handled here.
    """
    tag = Tag(tag)

    def register(cls):
        if tag in _records:
            raise ValueError('Tag {!r} is already bound to {}'.format(tag, _records[tag].__name__))
        cls.tag = tag
        _records[tag] = cls
        return cls

    return register


class Writer:
    def __init__(self):
        self._parts = []

    def u8(self, value):
        self._parts.append(int(value).to_bytes(1, 'big'))

    def u32(self, value):
        self._parts.append(int(value).to_bytes(4, 'big'))

    def u64(self, value):
        self._parts.append(int(value).to_bytes(8, 'big'))

    def u128(self, value):
        self._parts.append(int(value).to_bytes(16, 'big'))

    def fixed(self, value, size):
        value = bytes(value)
        if len(value) != size:
            raise ValueError('expected {} bytes, got {}'.format(size, len(value)))
        self._parts.append(value)

    def digest(self, value):
        self.fixed(value, DIGEST_SIZE)

    def var(self, value):
        value = bytes(value)
        self.u32(len(value))
        self._parts.append(value)

    def optional(self, value, size):
        """A variable field that is either empty (absent) or exactly `size` bytes."""
        if value is None:
            self.u32(0)
        else:
            self.u32(size)
            self.fixed(value, size)

    def zeroed(self, size):
        self.u32(size)
        self._parts.append(bytes(size))

    def text(self, value):
        self.var(value.encode('utf-8'))

    def record(self, value):
        self.var(encode(value))

    def getvalue(self):
        return b''.join(self._parts)


class Reader:
    def __init__(self, data):
        self._data = bytes(data)
        self._pos = 0

    @property
    def remaining(self):
        return len(self._data) - self._pos

    def _take(self, size):
        if size > self.remaining:
            raise TruncatedError('needed {} bytes at offset {}, {} left'.format(size, self._pos, self.remaining))
        chunk = self._data[self._pos:self._pos + size]
        self._pos += size
        return chunk

    def u8(self):
        return self._take(1)[0]

    def u32(self):
        return int.from_bytes(self._take(4), 'big')

    def u64(self):
        return int.from_bytes(self._take(8), 'big')

    def u128(self):
        return int.from_bytes(self._take(16), 'big')

    def fixed(self, size):
        return self._take(size)

    def digest(self):
        return Digest(self._take(DIGEST_SIZE))

    def var(self, sizes=None, max_length=MAX_FIELD_LENGTH):
        offset = self._pos
        length = self.u32()
        if length > max_length:
            raise LengthError('field at offset {} declares {} bytes (limit {})'.format(offset, length, max_length))
        if sizes is not None and length not in sizes:
            raise LengthError('field at offset {} has length {}, expected one of {}'.format(
                offset, length, sorted(sizes)))
        return self._take(length)

    def optional(self, size):
        value = self.var(sizes=(0, size))
        return value or None

    def text(self):
        raw = self.var()
        try:
            return raw.decode('utf-8')
        except UnicodeDecodeError as exc:
            raise InvalidFieldError('invalid UTF-8 text: {}'.format(exc))

    def record(self, expect=None):
        return decode(self.var(), expect=expect)

    def done(self):
        if self.remaining:
            raise TrailingBytesError('{} trailing bytes at offset {}'.format(self.remaining, self._pos))


def _load_record_types():
    # Record classes register themselves on import.
    from . import contracts, ledger, merkle, transactions  # noqa: F401


def encode(value):
    writer = Writer()
    writer.u8(value.tag)
    value.write_fields(writer)
    return writer.getvalue()


def encode_preimage(value):
    """
    The bytes a record's identifier and signatures are computed over: the
    canonical encoding with identifier and signature bodies zero-filled.
    """
    writer = Writer()
    writer.u8(value.tag)
    value.write_fields(writer, preimage=True)
    return writer.getvalue()


def decode(data, expect=None):
    if not _records.get(Tag.BLOCK):
        _load_record_types()
    reader = Reader(data)
    tag = reader.u8()
    try:
        cls = _records[Tag(tag)]
    except (ValueError, KeyError):
        raise UnknownTagError('unknown record tag 0x{:02x}'.format(tag))
    if expect is not None and not issubclass(cls, expect):
        names = ' or '.join(kind.__name__ for kind in (expect if isinstance(expect, tuple) else (expect,)))
        raise UnknownTagError('expected {}, found tag 0x{:02x}'.format(names, tag))
    try:
        value = cls.read_fields(reader)
    except CodecError:
        raise
    except (ValueError, CryptoError) as exc:
        raise InvalidFieldError('invalid {} field: {}'.format(cls.__name__, exc))
    reader.done()
    return value
