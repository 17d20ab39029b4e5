import pytest
from gridledger.drf.fields import EnumField, HexField
from gridledger.drf.serializers import EnumSupportSerializerMixin
from gridledger.enums import DlFlag, DropReason, Role, Verdict
from gridledger.models import ScenarioRun, VerdictRecord
from gridledger.serializers import VerdictRecordSerializer
from rest_framework import serializers

from .models import Reading


class ReadingSerializer(EnumSupportSerializerMixin, serializers.ModelSerializer):
    class Meta:
        model = Reading
        fields = '__all__'


class LenientIntNameSerializer(ReadingSerializer):
    enumfield_options = {
        'lenient': True,
        'ints_as_names': True,
    }


@pytest.mark.parametrize('int_names', (False, True))
def test_serialize(int_names):
    inst = Reading(
        verdict=Verdict.DROP,
        verdict_not_editable=Verdict.DROP,
        reason=DropReason.BAD_SECRET,
        flag=DlFlag.LOAD,
        role=Role.STORAGE,
        role_not_editable=Role.STORAGE,
    )
    data = (LenientIntNameSerializer if int_names else ReadingSerializer)(inst).data
    assert data['verdict'] == data['verdict_not_editable'] == 'drop'
    assert data['reason'] == 'bad_secret'
    if int_names:
        assert data['flag'] == 'load'
        assert data['role'] == data['role_not_editable'] == 'storage'
    else:
        assert data['flag'] == 1
        assert data['role'] == data['role_not_editable'] == 3


@pytest.mark.django_db
@pytest.mark.parametrize('lenient_serializer', (False, True))
@pytest.mark.parametrize('lenient_data', (False, True))
def test_deserialize(lenient_data, lenient_serializer):
    data = {
        'verdict': Verdict.DROP,
        'reason': DropReason.MALFORMED.value,
        'flag': DlFlag.LOAD.value,
        'role': Role.SENSOR.value,
        'note': 'deserialize',
    }
    if lenient_data:
        data.update({
            'verdict': 'DROP',
            'reason': 'Malformed',
            'flag': 'load',
            'role': 'Sensor',
        })
    serializer_cls = (LenientIntNameSerializer if lenient_serializer else ReadingSerializer)
    serializer = serializer_cls(data=data)
    if lenient_data and not lenient_serializer:
        assert not serializer.is_valid()
        return
    assert serializer.is_valid(), serializer.errors

    validated_data = serializer.validated_data
    assert validated_data['verdict'] == Verdict.DROP
    assert validated_data['reason'] == DropReason.MALFORMED
    assert validated_data['flag'] == DlFlag.LOAD
    assert validated_data['role'] == Role.SENSOR

    serializer.save()
    inst = Reading.objects.get(note='deserialize')  # will raise if fails
    assert inst.verdict == Verdict.DROP
    assert inst.reason == DropReason.MALFORMED
    assert inst.flag == DlFlag.LOAD
    assert inst.role == Role.SENSOR


@pytest.mark.django_db
def test_verdict_record_export():
    run = ScenarioRun.objects.create(seed=1, config_digest='a' * 64)
    record = VerdictRecord.objects.create(
        run=run, tick=11, period=1, verdict=Verdict.DROP, reason=DropReason.DUPLICATE_NONCE, flag=DlFlag.LOAD,
        origin='replayer')
    assert VerdictRecordSerializer(record).data == {
        'tick': 11,
        'period': 1,
        'verdict': 'drop',
        'reason': 'duplicate_nonce',
        'flag': 1,
        'origin': 'replayer',
    }


def test_hex_field():
    field = HexField()
    assert field.to_representation(b'\x00\xff') == '00ff'
    assert field.run_validation('00ff') == b'\x00\xff'
    with pytest.raises(serializers.ValidationError):
        field.run_validation('not hex')


@pytest.mark.parametrize('data, expected', [
    ('consumer', Role.CONSUMER),
    ('CONSUMER', Role.CONSUMER),
    (2, Role.CONSUMER),
    ('Battery Storage', None),
    ('storage', Role.STORAGE),
])
def test_lenient_enum_field(data, expected):
    field = EnumField(Role, lenient=True)
    if expected is None:
        with pytest.raises(serializers.ValidationError):
            field.run_validation(data)
    else:
        assert field.run_validation(data) is expected
