import inspect
from enum import Enum as BaseEnum
from enum import EnumMeta as BaseEnumMeta

from django.utils.encoding import force_str


class EnumMeta(BaseEnumMeta):
    def __new__(mcs, name, bases, attrs, **kwargs):
        Labels = attrs.get('Labels')

        if Labels is not None and inspect.isclass(Labels):
            del attrs['Labels']
            member_names = getattr(attrs, '_member_names', None)
            # a list before Python 3.11, a dict since
            if isinstance(member_names, dict):
                member_names.pop('Labels', None)
            elif member_names is not None and 'Labels' in member_names:
                member_names.remove('Labels')

        obj = BaseEnumMeta.__new__(mcs, name, bases, attrs, **kwargs)
        for m in obj:
            try:
                m.label = getattr(Labels, m.name)
            except AttributeError:
                m.label = m.name.replace('_', ' ').title()

        return obj


class Enum(BaseEnum, metaclass=EnumMeta):
    @classmethod
    def choices(cls):
        """
        Returns a list formatted for use as model field choices.
        """
        return tuple((m.value, m.label) for m in cls)

    def __str__(self):
        """
        Show our label when the enum is displayed in reports or the admin.
        """
        return force_str(self.label)


class IntEnum(int, Enum):
    def __str__(self):  # See Enum.__str__
        return force_str(self.label)


class DlFlag(IntEnum):
    DEMAND = 0
    LOAD = 1


class Role(IntEnum):
    PRODUCER = 1
    CONSUMER = 2
    STORAGE = 3
    SENSOR = 4
    DEVICE = 5

    class Labels:
        STORAGE = 'Battery storage'

    @property
    def is_installed(self):
        """Sensors and devices are installed by DISCO at a customer site."""
        return self in (Role.SENSOR, Role.DEVICE)


class Verdict(Enum):
    ACCEPT = 'accept'
    DROP = 'drop'


class DropReason(Enum):
    UNKNOWN_ID = 'unknown_id'
    BAD_SECRET = 'bad_secret'
    DUPLICATE_NONCE = 'duplicate_nonce'
    MALFORMED = 'malformed'

    class Labels:
        UNKNOWN_ID = 'Unknown ID'


class Reason(Enum):
    """Why a load-control or genesis transaction is not ledger-admissible."""

    MISSING_SIGNATURE = 'missing_signature'
    BAD_SIGNATURE = 'bad_signature'
    BAD_TID = 'bad_tid'
    BAD_CHAIN = 'bad_chain'
    BAD_REF = 'bad_ref'
    DUPLICATE = 'duplicate'

    class Labels:
        BAD_TID = 'Bad T_ID'


class Violation(Enum):
    BAD_PREV_HASH = 'bad_prev_hash'
    BAD_HEIGHT = 'bad_height'
    BAD_PRODUCER_SIG = 'bad_producer_sig'
    INADMISSIBLE_ENTRY = 'inadmissible_entry'
    MALFORMED = 'malformed'


class DeviceAction(IntEnum):
    ON = 0
    OFF = 1
    REDUCE = 2
    SAMPLE = 3

    class Labels:
        REDUCE = 'Reduce by'


class DeviceState(IntEnum):
    ON = 0
    OFF = 1
    REDUCED = 2
    SAMPLING = 3


class Side(IntEnum):
    LEFT = 0
    RIGHT = 1


class MessageKind(Enum):
    DL = 'dl'
    LOAD_CONTROL = 'load_control'
    GENESIS = 'genesis'

    class Labels:
        DL = 'DL'


class AdversaryMode(Enum):
    REPLAYER = 'replayer'
    TAMPERER = 'tamperer'
    FORGER = 'forger'
    EAVESDROPPER = 'eavesdropper'


class Outcome(Enum):
    DELIVER = 'deliver'
    DROP = 'drop'
    DUPLICATE = 'duplicate'
    TAMPER = 'tamper'
    FORGE = 'forge'
