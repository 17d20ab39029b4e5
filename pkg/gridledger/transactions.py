"""
The three transaction kinds.

* `DlTransaction`: ``ID || Data || DLFlag || Secret``. A demand/load report
  authenticated by a shared-secret digest. It carries no key, no signature
  and no nonce.
* `LoadControlTransaction`: ``T_ID || P_T_ID || PKGen || SignGen || PKRec ||
  SignRec || Ref.DISCO.ID || Metadata``. A two-party signed transaction.
* `GenesisTransaction` admits a node. Sensors and devices installed at a
  customer site need the customer's countersignature too.
"""
from dataclasses import dataclass, replace
from typing import NamedTuple, Optional

from . import codec
from .codec import Tag
from .contracts import SealedContract
from .crypto import NULL_DIGEST, PUBLIC_KEY_SIZE, SIGNATURE_SIZE, Digest, PublicKey, Signature, digest, sign, verify
from .enums import DlFlag, Reason, Role
from .exceptions import CodecError, KeyMismatchError
from .identity import ID_MODULUS, ID_SIZE

DATA_SIZE = 8
DATA_LIMIT = 1 << (8 * DATA_SIZE)


def data_bytes(data, dl_flag):
    """Canonical bytes of a report's payload: the 8-byte quantity, then the flag."""
    if not 0 <= data < DATA_LIMIT:
        raise ValueError('data must fit in {} bytes'.format(DATA_SIZE))
    return int(data).to_bytes(DATA_SIZE, 'big') + bytes([DlFlag(dl_flag)])


def compute_secret(secret_value, nonce, data, dl_flag):
    return digest(bytes(secret_value) + int(nonce).to_bytes(8, 'big') + data_bytes(data, dl_flag))


@codec.record(Tag.DL)
@dataclass(frozen=True)
class DlTransaction:
    id: int
    data: int
    dl_flag: DlFlag
    secret: Digest

    def __post_init__(self):
        if not 0 <= self.id < ID_MODULUS:
            raise ValueError('id must fit in {} bytes'.format(ID_SIZE))
        if not 0 <= self.data < DATA_LIMIT:
            raise ValueError('data must fit in {} bytes'.format(DATA_SIZE))
        object.__setattr__(self, 'dl_flag', DlFlag(self.dl_flag))
        object.__setattr__(self, 'secret', Digest(self.secret))

    def write_fields(self, writer, preimage=False):
        writer.u128(self.id)
        writer.var(self.data.to_bytes(DATA_SIZE, 'big'))
        writer.u8(self.dl_flag)
        writer.digest(self.secret)

    @classmethod
    def read_fields(cls, reader):
        id = reader.u128()
        data = int.from_bytes(reader.var(sizes=(DATA_SIZE,)), 'big')
        return cls(id=id, data=data, dl_flag=reader.u8(), secret=reader.digest())


def make_dl(credentials, data, dl_flag):
    return DlTransaction(
        id=credentials.current_id,
        data=data,
        dl_flag=dl_flag,
        secret=compute_secret(credentials.secret_value, credentials.nonce, data, dl_flag),
    )


@codec.record(Tag.LOAD_CONTROL)
@dataclass(frozen=True)
class LoadControlTransaction:
    t_id: Digest
    p_t_id: Digest
    pk_gen: PublicKey
    sign_gen: Optional[Signature]
    pk_rec: PublicKey
    sign_rec: Optional[Signature]
    ref_disco_id: Digest
    metadata: bytes

    def __post_init__(self):
        for name, kind in (('t_id', Digest), ('p_t_id', Digest), ('ref_disco_id', Digest),
                           ('pk_gen', PublicKey), ('pk_rec', PublicKey)):
            object.__setattr__(self, name, kind(getattr(self, name)))
        for name in ('sign_gen', 'sign_rec'):
            value = getattr(self, name)
            if value is not None:
                object.__setattr__(self, name, Signature(value))
        object.__setattr__(self, 'metadata', bytes(self.metadata))

    @property
    def is_fully_signed(self):
        return self.sign_gen is not None and self.sign_rec is not None

    def write_fields(self, writer, preimage=False):
        writer.digest(NULL_DIGEST if preimage else self.t_id)
        writer.digest(self.p_t_id)
        writer.var(self.pk_gen)
        if preimage:
            writer.zeroed(SIGNATURE_SIZE)
        else:
            writer.optional(self.sign_gen, SIGNATURE_SIZE)
        writer.var(self.pk_rec)
        if preimage:
            writer.zeroed(SIGNATURE_SIZE)
        else:
            writer.optional(self.sign_rec, SIGNATURE_SIZE)
        writer.digest(self.ref_disco_id)
        writer.var(self.metadata)

    @classmethod
    def read_fields(cls, reader):
        return cls(
            t_id=reader.digest(),
            p_t_id=reader.digest(),
            pk_gen=reader.var(sizes=(PUBLIC_KEY_SIZE,)),
            sign_gen=reader.optional(SIGNATURE_SIZE),
            pk_rec=reader.var(sizes=(PUBLIC_KEY_SIZE,)),
            sign_rec=reader.optional(SIGNATURE_SIZE),
            ref_disco_id=reader.digest(),
            metadata=reader.var(),
        )


def compute_tid(tx):
    """Digest of the canonical encoding with T_ID and both signature bodies zeroed."""
    return digest(codec.encode_preimage(tx))


def build_load_control(pk_gen, pk_rec, p_t_id=NULL_DIGEST, metadata=b'', ref_disco_id=NULL_DIGEST):
    """An unsigned load-control transaction with its T_ID filled in."""
    tx = LoadControlTransaction(
        t_id=NULL_DIGEST,
        p_t_id=p_t_id,
        pk_gen=pk_gen,
        sign_gen=None,
        pk_rec=pk_rec,
        sign_rec=None,
        ref_disco_id=ref_disco_id,
        metadata=codec.encode(metadata) if hasattr(metadata, 'tag') else metadata,
    )
    return replace(tx, t_id=compute_tid(tx))


def sign_as_generator(tx, keypair):
    if keypair.public != tx.pk_gen:
        raise KeyMismatchError('signing key does not match PKGen')
    return replace(tx, sign_gen=sign(keypair, codec.encode_preimage(tx)))


def countersign_as_receiver(tx, keypair):
    if keypair.public != tx.pk_rec:
        raise KeyMismatchError('signing key does not match PKRec')
    return replace(tx, sign_rec=sign(keypair, codec.encode_preimage(tx)))


def decode_metadata(tx, expect=None):
    return codec.decode(tx.metadata, expect=expect)


def is_contract(tx):
    """Whether `tx` is a load-control transaction carrying sealed contract terms."""
    if not isinstance(tx, LoadControlTransaction):
        return False
    try:
        decode_metadata(tx, expect=SealedContract)
    except CodecError:
        return False
    return True


@codec.record(Tag.GENESIS)
@dataclass(frozen=True)
class GenesisTransaction:
    """
    Admission of a node. `owner_pk`/`owner_sig` and `contract_ref` are only
    set for sensors and devices, which belong to a customer.
    """

    subject_pk: PublicKey
    role: Role
    node_class: str
    issuer_pk: PublicKey
    issuer_sig: Optional[Signature] = None
    owner_pk: Optional[PublicKey] = None
    owner_sig: Optional[Signature] = None
    contract_ref: Digest = NULL_DIGEST

    def __post_init__(self):
        object.__setattr__(self, 'subject_pk', PublicKey(self.subject_pk))
        object.__setattr__(self, 'issuer_pk', PublicKey(self.issuer_pk))
        object.__setattr__(self, 'role', Role(self.role))
        object.__setattr__(self, 'contract_ref', Digest(self.contract_ref))
        if self.owner_pk is not None:
            object.__setattr__(self, 'owner_pk', PublicKey(self.owner_pk))
        for name in ('issuer_sig', 'owner_sig'):
            value = getattr(self, name)
            if value is not None:
                object.__setattr__(self, name, Signature(value))

    @property
    def gid(self):
        return digest(codec.encode_preimage(self))

    @property
    def t_id(self):
        return self.gid

    def write_fields(self, writer, preimage=False):
        writer.var(self.subject_pk)
        writer.u8(self.role)
        writer.text(self.node_class)
        writer.var(self.issuer_pk)
        if preimage:
            writer.zeroed(SIGNATURE_SIZE)
        else:
            writer.optional(self.issuer_sig, SIGNATURE_SIZE)
        writer.optional(self.owner_pk, PUBLIC_KEY_SIZE)
        if preimage:
            writer.zeroed(SIGNATURE_SIZE)
        else:
            writer.optional(self.owner_sig, SIGNATURE_SIZE)
        writer.digest(self.contract_ref)

    @classmethod
    def read_fields(cls, reader):
        return cls(
            subject_pk=reader.var(sizes=(PUBLIC_KEY_SIZE,)),
            role=reader.u8(),
            node_class=reader.text(),
            issuer_pk=reader.var(sizes=(PUBLIC_KEY_SIZE,)),
            issuer_sig=reader.optional(SIGNATURE_SIZE),
            owner_pk=reader.optional(PUBLIC_KEY_SIZE),
            owner_sig=reader.optional(SIGNATURE_SIZE),
            contract_ref=reader.digest(),
        )


def sign_as_issuer(genesis, keypair):
    if keypair.public != genesis.issuer_pk:
        raise KeyMismatchError('signing key does not match the genesis issuer')
    return replace(genesis, issuer_sig=sign(keypair, codec.encode_preimage(genesis)))


def countersign_as_owner(genesis, keypair):
    if genesis.owner_pk is None or keypair.public != genesis.owner_pk:
        raise KeyMismatchError('signing key does not match the genesis owner')
    return replace(genesis, owner_sig=sign(keypair, codec.encode_preimage(genesis)))


class Admission(NamedTuple):
    admissible: bool
    reason: Optional[Reason] = None

    def __bool__(self):
        return self.admissible


ADMISSIBLE = Admission(True)


def _reject(reason):
    return Admission(False, reason)


def is_admissible(tx, view):
    """
    Check a load-control or genesis transaction against a ledger view.

    `view` provides ``disco_pk``, ``find(t_id)`` and ``genesis_for(pk)``; it
    may include entries staged for the block under construction. Returns an
    `Admission`, never raises.
    """
    if isinstance(tx, GenesisTransaction):
        return _genesis_admission(tx, view)
    return _load_control_admission(tx, view)


def _load_control_admission(tx, view):
    if not tx.is_fully_signed:
        return _reject(Reason.MISSING_SIGNATURE)
    if compute_tid(tx) != tx.t_id:
        return _reject(Reason.BAD_TID)
    preimage = codec.encode_preimage(tx)
    if not (verify(tx.pk_gen, preimage, tx.sign_gen) and verify(tx.pk_rec, preimage, tx.sign_rec)):
        return _reject(Reason.BAD_SIGNATURE)
    if view.find(tx.t_id) is not None:
        return _reject(Reason.DUPLICATE)

    from_disco = tx.pk_gen == view.disco_pk
    if not _chains_to_signer(tx, view, from_disco):
        return _reject(Reason.BAD_CHAIN)

    if from_disco:
        if tx.ref_disco_id != NULL_DIGEST or view.genesis_for(tx.pk_rec) is None:
            return _reject(Reason.BAD_REF)
        return ADMISSIBLE
    request = view.find(tx.ref_disco_id) if tx.ref_disco_id != NULL_DIGEST else None
    if (
        not isinstance(request, LoadControlTransaction)
        or request.pk_gen != view.disco_pk
        or request.pk_rec != tx.pk_gen
    ):
        return _reject(Reason.BAD_REF)
    return ADMISSIBLE


def _chains_to_signer(tx, view, from_disco):
    if from_disco and tx.p_t_id == NULL_DIGEST:
        return True
    if not from_disco and view.genesis_for(tx.pk_gen) is None:
        return False
    previous = view.find(tx.p_t_id)
    if isinstance(previous, GenesisTransaction):
        return previous.subject_pk == tx.pk_gen
    if isinstance(previous, LoadControlTransaction):
        return previous.pk_gen == tx.pk_gen
    return False


def _genesis_admission(genesis, view):
    installed = genesis.role.is_installed
    if genesis.issuer_sig is None or (installed and (genesis.owner_pk is None or genesis.owner_sig is None)):
        return _reject(Reason.MISSING_SIGNATURE)
    preimage = codec.encode_preimage(genesis)
    if genesis.issuer_pk != view.disco_pk or not verify(genesis.issuer_pk, preimage, genesis.issuer_sig):
        return _reject(Reason.BAD_SIGNATURE)
    if installed and not verify(genesis.owner_pk, preimage, genesis.owner_sig):
        return _reject(Reason.BAD_SIGNATURE)
    if view.find(genesis.gid) is not None or view.genesis_for(genesis.subject_pk) is not None:
        return _reject(Reason.DUPLICATE)

    if not installed:
        if genesis.owner_pk is not None or genesis.owner_sig is not None or genesis.contract_ref != NULL_DIGEST:
            return _reject(Reason.BAD_REF)
        return ADMISSIBLE
    contract = view.find(genesis.contract_ref) if genesis.contract_ref != NULL_DIGEST else None
    if (
        not is_contract(contract)
        or contract.pk_gen != view.disco_pk
        or contract.pk_rec != genesis.owner_pk
        or view.genesis_for(genesis.owner_pk) is None
    ):
        return _reject(Reason.BAD_REF)
    return ADMISSIBLE
