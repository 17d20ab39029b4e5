import random
from dataclasses import replace

import pytest
from gridledger import codec
from gridledger.codec import Reader, Tag, Writer
from gridledger.contracts import ActionReceipt, ContractTerms, ControlAction, SensorAllowance
from gridledger.crypto import NULL_DIGEST, SIGNATURE_SIZE, digest
from gridledger.enums import DeviceAction, DeviceState, DlFlag, Role, Violation
from gridledger.exceptions import (
    CodecError, InvalidFieldError, LengthError, TrailingBytesError, TruncatedError, UnknownTagError,
)
from gridledger.ledger import Block, MerkleRootEntry, verify_chain_bytes
from gridledger.transactions import (
    DlTransaction, GenesisTransaction, LoadControlTransaction, build_load_control, compute_tid, sign_as_generator,
    sign_as_issuer,
)

from .conftest import make_keypair

GOLDEN_DL = DlTransaction(
    id=0x000102030405060708090a0b0c0d0e0f,
    data=1500,
    dl_flag=DlFlag.LOAD,
    secret=digest(b''),
)

GOLDEN_DL_HEX = (
    '01'
    '000102030405060708090a0b0c0d0e0f'
    '00000008' '00000000000005dc'
    '01'
    'e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855'
)


def test_dl_golden_encoding():
    raw = codec.encode(GOLDEN_DL)
    assert raw.hex() == GOLDEN_DL_HEX
    assert len(raw) == 62
    assert raw[29] == DlFlag.LOAD


def test_dl_golden_decoding():
    assert codec.decode(bytes.fromhex(GOLDEN_DL_HEX)) == GOLDEN_DL


def test_integers_are_big_endian():
    writer = Writer()
    writer.u8(1)
    writer.u32(2)
    writer.u64(3)
    writer.var(b'ab')
    assert writer.getvalue().hex() == '01' '00000002' '0000000000000003' '00000002' '6162'

    reader = Reader(writer.getvalue())
    assert (reader.u8(), reader.u32(), reader.u64(), reader.var()) == (1, 2, 3, b'ab')
    reader.done()


def test_optional_fields():
    writer = Writer()
    writer.optional(None, 4)
    writer.optional(b'wxyz', 4)
    reader = Reader(writer.getvalue())
    assert reader.optional(4) is None
    assert reader.optional(4) == b'wxyz'


@pytest.mark.parametrize('raw, error', [
    (b'', TruncatedError),
    (b'\xee', UnknownTagError),
    (bytes.fromhex(GOLDEN_DL_HEX)[:-1], TruncatedError),
    (bytes.fromhex(GOLDEN_DL_HEX) + b'\x00', TrailingBytesError),
    (bytes.fromhex(GOLDEN_DL_HEX[:34] + '00000007' + GOLDEN_DL_HEX[42:]), LengthError),
    (bytes.fromhex(GOLDEN_DL_HEX[:58] + '07' + GOLDEN_DL_HEX[60:]), InvalidFieldError),
])
def test_decode_errors(raw, error):
    with pytest.raises(error):
        codec.decode(raw)


def test_decode_errors_are_codec_errors():
    assert issubclass(UnknownTagError, CodecError)
    assert issubclass(CodecError, ValueError)


def test_decode_expect():
    with pytest.raises(UnknownTagError):
        codec.decode(codec.encode(GOLDEN_DL), expect=LoadControlTransaction)


def test_tags():
    assert [tag.value for tag in Tag] == list(range(0x01, 0x0B))
    assert codec.encode(GOLDEN_DL)[0] == Tag.DL


def test_preimage_zeroes_tid_and_signatures():
    disco = make_keypair('disco')
    tx = build_load_control(disco.public, make_keypair('home').public, metadata=b'meta')
    plain = codec.encode_preimage(tx)
    assert codec.encode_preimage(replace(tx, t_id=digest(b'x'))) == plain
    assert plain[1:33] == bytes(32)
    assert compute_tid(tx) == tx.t_id
    assert tx.t_id != NULL_DIGEST


def test_metadata_records():
    terms = ContractTerms(('heat-pump',), (6, 22), (SensorAllowance('thermostat', 2, 'decicelsius'),))
    action = ControlAction(make_keypair('device').public, 'heat-pump', DeviceAction.REDUCE, 500, 30)
    receipt = ActionReceipt(DeviceAction.REDUCE, DeviceState.REDUCED, 500, 30)
    for value in (terms, action, receipt):
        assert codec.decode(codec.encode(value)) == value


def test_contract_terms_validation():
    with pytest.raises(ValueError):
        ContractTerms(allowed_hours=(10, 10))
    with pytest.raises(ValueError):
        ContractTerms(sensors=(SensorAllowance('t', 1), SensorAllowance('t', 2)))


def nested_blocks(depth):
    """Block-in-block encoding built bottom-up, without recursing."""
    raw = codec.encode(Block(height=0, prev_hash=NULL_DIGEST, period_id=0))
    for height in range(1, depth + 1):
        writer = Writer()
        writer.u8(Tag.BLOCK)
        writer.u64(height)
        writer.digest(NULL_DIGEST)
        writer.u64(0)
        writer.u32(1)
        writer.var(raw)
        writer.optional(None, SIGNATURE_SIZE)
        raw = writer.getvalue()
    return raw


def dump_raw_chain(*blocks):
    writer = Writer()
    for raw in blocks:
        writer.var(raw)
    return writer.getvalue()


@pytest.mark.parametrize('depth', (1, 2000))
def test_block_cannot_hold_a_block(depth):
    raw = nested_blocks(depth)
    with pytest.raises(UnknownTagError):
        codec.decode(raw)
    check = verify_chain_bytes(dump_raw_chain(raw))
    assert not check
    assert check.violation == Violation.MALFORMED


def valid_encodings():
    disco, home = make_keypair('disco'), make_keypair('home')
    tx = sign_as_generator(build_load_control(disco.public, home.public, metadata=b'meta'), disco)
    genesis = sign_as_issuer(GenesisTransaction(home.public, Role.CONSUMER, 'home', disco.public), disco)
    block = Block(
        height=1,
        prev_hash=digest(b'parent'),
        period_id=3,
        entries=(MerkleRootEntry(3, digest(b'root'), 5), tx, genesis),
    )
    terms = ContractTerms(('heat-pump',), (6, 22), (SensorAllowance('thermostat', 2, 'decicelsius'),))
    return [codec.encode(value) for value in (GOLDEN_DL, tx, genesis, block, terms)]


def test_random_bytes_decode_canonically_or_fail():
    rng = random.Random(1337)
    samples = valid_encodings()
    accepted = 0
    for index in range(100000):
        if index % 2:
            raw = bytearray(rng.choice(samples))
            for _ in range(rng.randint(1, 3)):
                raw[rng.randrange(len(raw))] = rng.randrange(256)
            raw = bytes(raw)
        else:
            raw = bytes([rng.randint(1, 0x0B)]) + bytes(rng.getrandbits(8) for _ in range(rng.randint(0, 96)))
        try:
            value = codec.decode(raw)
        except CodecError:
            continue
        accepted += 1
        assert codec.encode(value) == raw
    assert accepted > 0


def test_valid_encodings_are_canonical():
    for raw in valid_encodings():
        assert codec.encode(codec.decode(raw)) == raw
