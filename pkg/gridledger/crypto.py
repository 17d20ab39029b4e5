"""
Cryptographic building blocks.

The rest of the package only talks to the names defined here:

* `digest` is SHA-256 (32 bytes).
* Signatures are Ed25519 (64 bytes).
* `seal` / `open_sealed` is an X25519 + HKDF-SHA256 + ChaCha20-Poly1305 envelope.

A `PublicKey` is 64 bytes: the Ed25519 verification key followed by the
X25519 key envelopes are sealed to. Both halves derive from one 32-byte seed,
so `keygen` is deterministic.
"""
import hashlib
from dataclasses import dataclass

from cryptography.exceptions import InvalidSignature, InvalidTag
from cryptography.hazmat.primitives import hashes, serialization
from cryptography.hazmat.primitives.asymmetric.ed25519 import Ed25519PrivateKey, Ed25519PublicKey
from cryptography.hazmat.primitives.asymmetric.x25519 import X25519PrivateKey, X25519PublicKey
from cryptography.hazmat.primitives.ciphers.aead import ChaCha20Poly1305
from cryptography.hazmat.primitives.kdf.hkdf import HKDF

from .exceptions import CryptoFormatError, DecryptError, SeedLengthError

DIGEST_SIZE = 32
SEED_SIZE = 32
SIGNING_KEY_SIZE = 32
BOX_KEY_SIZE = 32
PUBLIC_KEY_SIZE = SIGNING_KEY_SIZE + BOX_KEY_SIZE
SIGNATURE_SIZE = 64
AEAD_TAG_SIZE = 16

BOX_KEY_LABEL = b'gridledger/box-key'
SEAL_EPHEMERAL_LABEL = b'gridledger/seal-ephemeral'
SEAL_INFO = b'gridledger/seal'
# every seal uses a fresh ephemeral key, hence a fresh AEAD key
SEAL_NONCE = bytes(12)


class FixedBytes(bytes):
    size = None

    def __new__(cls, value=b''):
        try:
            value = bytes(value)
        except TypeError:
            raise CryptoFormatError('{} needs bytes, got {}'.format(cls.__name__, type(value).__name__))
        if len(value) != cls.size:
            raise CryptoFormatError('{} must be {} bytes, got {}'.format(cls.__name__, cls.size, len(value)))
        return super().__new__(cls, value)

    def __repr__(self):
        return '{}({}…)'.format(type(self).__name__, self.hex()[:16])


class Digest(FixedBytes):
    size = DIGEST_SIZE


class PublicKey(FixedBytes):
    size = PUBLIC_KEY_SIZE

    @property
    def signing_key(self):
        return bytes(self[:SIGNING_KEY_SIZE])

    @property
    def box_key(self):
        return bytes(self[SIGNING_KEY_SIZE:])


class Signature(FixedBytes):
    size = SIGNATURE_SIZE


NULL_DIGEST = Digest(bytes(DIGEST_SIZE))


def digest(data):
    return Digest(hashlib.sha256(bytes(data)).digest())


def _raw_public(key):
    return key.public_bytes(encoding=serialization.Encoding.Raw, format=serialization.PublicFormat.Raw)


class KeyPair:
    """
    Signing and envelope keys derived from a single 32-byte seed.

    The seed is the private half; it is what key files store.
    """

    __slots__ = ('seed', 'public', '_signing', '_box')

    def __init__(self, seed):
        self.seed = bytes(seed)
        self._signing = Ed25519PrivateKey.from_private_bytes(self.seed)
        self._box = X25519PrivateKey.from_private_bytes(hashlib.sha256(BOX_KEY_LABEL + self.seed).digest())
        self.public = PublicKey(_raw_public(self._signing.public_key()) + _raw_public(self._box.public_key()))

    @property
    def private(self):
        return self.seed

    def __eq__(self, other):
        return isinstance(other, KeyPair) and other.seed == self.seed

    def __hash__(self):
        return hash(self.public)

    def __repr__(self):
        return 'KeyPair(public={!r})'.format(self.public)


def keygen(seed):
    try:
        seed = bytes(seed)
    except TypeError:
        raise SeedLengthError('seed must be {} bytes'.format(SEED_SIZE))
    if len(seed) != SEED_SIZE:
        raise SeedLengthError('seed must be {} bytes, got {}'.format(SEED_SIZE, len(seed)))
    return KeyPair(seed)


def sign(keypair, message):
    return Signature(keypair._signing.sign(bytes(message)))


def verify(public_key, message, signature):
    """
    Check an Ed25519 signature.

    Key or signature bytes of the wrong length raise `CryptoFormatError`.
    Anything else that does not verify returns False.
    """
    public_key = PublicKey(public_key)
    signature = Signature(signature)
    try:
        Ed25519PublicKey.from_public_bytes(public_key.signing_key).verify(bytes(signature), bytes(message))
    except (InvalidSignature, ValueError):
        return False
    return True


@dataclass(frozen=True)
class SealedBox:
    ephemeral: bytes
    ciphertext: bytes

    def to_bytes(self):
        return bytes(self.ephemeral) + bytes(self.ciphertext)

    @classmethod
    def from_bytes(cls, raw):
        raw = bytes(raw)
        if len(raw) < BOX_KEY_SIZE + AEAD_TAG_SIZE:
            raise DecryptError('sealed box too short ({} bytes)'.format(len(raw)))
        return cls(ephemeral=raw[:BOX_KEY_SIZE], ciphertext=raw[BOX_KEY_SIZE:])


def _seal_key(shared, ephemeral, recipient):
    return HKDF(
        algorithm=hashes.SHA256(),
        length=32,
        salt=None,
        info=SEAL_INFO + ephemeral + recipient,
    ).derive(shared)


def seal(public_key, plaintext):
    public_key = PublicKey(public_key)
    plaintext = bytes(plaintext)
    # Deterministic ephemeral key: equal (recipient, plaintext) pairs seal to equal boxes.
    ephemeral = X25519PrivateKey.from_private_bytes(
        hashlib.sha256(SEAL_EPHEMERAL_LABEL + public_key + plaintext).digest()
    )
    ephemeral_public = _raw_public(ephemeral.public_key())
    try:
        shared = ephemeral.exchange(X25519PublicKey.from_public_bytes(public_key.box_key))
    except ValueError as exc:
        raise CryptoFormatError('unusable recipient key: {}'.format(exc))
    key = _seal_key(shared, ephemeral_public, public_key.box_key)
    ciphertext = ChaCha20Poly1305(key).encrypt(SEAL_NONCE, plaintext, ephemeral_public)
    return SealedBox(ephemeral=ephemeral_public, ciphertext=ciphertext)


def open_sealed(keypair, box):
    if not isinstance(box, SealedBox):
        box = SealedBox.from_bytes(box)
    try:
        shared = keypair._box.exchange(X25519PublicKey.from_public_bytes(bytes(box.ephemeral)))
        key = _seal_key(shared, bytes(box.ephemeral), keypair.public.box_key)
        return ChaCha20Poly1305(key).decrypt(SEAL_NONCE, bytes(box.ciphertext), bytes(box.ephemeral))
    except (InvalidTag, ValueError) as exc:
        raise DecryptError('cannot open sealed box: {}'.format(exc or 'authentication failed'))
