"""
Load-control contract terms and the metadata payloads load-control
transactions carry.

A contract names the device classes DISCO may control, the hours of the day
it may act in, and how many sensors of each type it may install (with the
unit their readings are reported in). The terms travel sealed to the
customer inside a `SealedContract`; only their digest is readable on-ledger.
"""
from dataclasses import dataclass, field

from . import codec
from .codec import Tag
from .crypto import PUBLIC_KEY_SIZE, Digest, PublicKey, digest, open_sealed, seal
from .enums import DeviceAction, DeviceState
from .exceptions import InvalidFieldError

HOURS_PER_DAY = 24


def hour_of(period_id):
    """Each reporting period stands for one hour of the day."""
    return period_id % HOURS_PER_DAY


@dataclass(frozen=True)
class SensorAllowance:
    sensor_type: str
    max_installs: int
    unit: str = ''

    def write_fields(self, writer, preimage=False):
        writer.text(self.sensor_type)
        writer.u32(self.max_installs)
        writer.text(self.unit)

    @classmethod
    def read_fields(cls, reader):
        return cls(sensor_type=reader.text(), max_installs=reader.u32(), unit=reader.text())


@codec.record(Tag.CONTRACT_TERMS)
@dataclass(frozen=True)
class ContractTerms:
    device_classes: tuple = ()
    allowed_hours: tuple = (0, HOURS_PER_DAY)
    sensors: tuple = field(default=())

    def __post_init__(self):
        object.__setattr__(self, 'device_classes', tuple(self.device_classes))
        object.__setattr__(self, 'allowed_hours', tuple(self.allowed_hours))
        object.__setattr__(self, 'sensors', tuple(
            s if isinstance(s, SensorAllowance) else SensorAllowance(*s) for s in self.sensors
        ))
        start, end = self.allowed_hours
        if not 0 <= start < end <= HOURS_PER_DAY:
            raise ValueError('allowed_hours must satisfy 0 <= start < end <= 24, got {}'.format(self.allowed_hours))
        types = [s.sensor_type for s in self.sensors]
        if len(set(types)) != len(types):
            raise ValueError('sensor types must be unique')

    def allows_hour(self, hour):
        start, end = self.allowed_hours
        return start <= hour < end

    def allows_device(self, device_class):
        return device_class in self.device_classes

    def sensor_allowance(self, sensor_type):
        for allowance in self.sensors:
            if allowance.sensor_type == sensor_type:
                return allowance
        return None

    def allows_sensor(self, sensor_type):
        allowance = self.sensor_allowance(sensor_type)
        return allowance is not None and allowance.max_installs > 0

    def allows_install(self, role_is_sensor, node_class):
        if role_is_sensor:
            return self.allows_sensor(node_class)
        return self.allows_device(node_class)

    def covers(self, action):
        """Whether a `ControlAction` falls within these terms."""
        if action.action == DeviceAction.SAMPLE:
            return self.allows_sensor(action.target_class)
        return self.allows_device(action.target_class) and self.allows_hour(hour_of(action.period_id))

    def write_fields(self, writer, preimage=False):
        writer.u32(len(self.device_classes))
        for device_class in self.device_classes:
            writer.text(device_class)
        writer.u8(self.allowed_hours[0])
        writer.u8(self.allowed_hours[1])
        writer.u32(len(self.sensors))
        for allowance in self.sensors:
            allowance.write_fields(writer)

    @classmethod
    def read_fields(cls, reader):
        device_classes = tuple(reader.text() for _ in range(_count(reader)))
        allowed_hours = (reader.u8(), reader.u8())
        sensors = tuple(SensorAllowance.read_fields(reader) for _ in range(_count(reader)))
        return cls(device_classes=device_classes, allowed_hours=allowed_hours, sensors=sensors)

    @property
    def digest(self):
        return digest(codec.encode(self))


def _count(reader):
    count = reader.u32()
    # each counted item takes at least 4 bytes
    if count * 4 > reader.remaining:
        raise InvalidFieldError('count {} exceeds remaining {} bytes'.format(count, reader.remaining))
    return count


@codec.record(Tag.SEALED_CONTRACT)
@dataclass(frozen=True)
class SealedContract:
    terms_digest: Digest
    box: bytes

    def write_fields(self, writer, preimage=False):
        writer.digest(self.terms_digest)
        writer.var(self.box)

    @classmethod
    def read_fields(cls, reader):
        return cls(terms_digest=reader.digest(), box=reader.var())


def seal_terms(customer_pk, terms):
    return SealedContract(terms_digest=terms.digest, box=seal(customer_pk, codec.encode(terms)).to_bytes())


def open_terms(keypair, sealed):
    """Open sealed terms; raises `DecryptError` on tampering or the wrong key."""
    terms = codec.decode(open_sealed(keypair, sealed.box), expect=ContractTerms)
    if terms.digest != sealed.terms_digest:
        raise InvalidFieldError('sealed terms do not match their digest')
    return terms


@codec.record(Tag.CONTROL_ACTION)
@dataclass(frozen=True)
class ControlAction:
    target_pk: PublicKey
    target_class: str
    action: DeviceAction
    amount: int
    period_id: int

    def __post_init__(self):
        object.__setattr__(self, 'target_pk', PublicKey(self.target_pk))
        object.__setattr__(self, 'action', DeviceAction(self.action))

    def write_fields(self, writer, preimage=False):
        writer.var(self.target_pk)
        writer.text(self.target_class)
        writer.u8(self.action)
        writer.u64(self.amount)
        writer.u64(self.period_id)

    @classmethod
    def read_fields(cls, reader):
        return cls(
            target_pk=reader.var(sizes=(PUBLIC_KEY_SIZE,)),
            target_class=reader.text(),
            action=reader.u8(),
            amount=reader.u64(),
            period_id=reader.u64(),
        )


@codec.record(Tag.ACTION_RECEIPT)
@dataclass(frozen=True)
class ActionReceipt:
    action: DeviceAction
    state: DeviceState
    amount: int
    period_id: int

    def __post_init__(self):
        object.__setattr__(self, 'action', DeviceAction(self.action))
        object.__setattr__(self, 'state', DeviceState(self.state))

    def write_fields(self, writer, preimage=False):
        writer.u8(self.action)
        writer.u8(self.state)
        writer.u64(self.amount)
        writer.u64(self.period_id)

    @classmethod
    def read_fields(cls, reader):
        return cls(action=reader.u8(), state=reader.u8(), amount=reader.u64(), period_id=reader.u64())
