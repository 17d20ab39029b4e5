"""
DRF serializers for scenario files (validated input) and run reports,
audit reports and benchmark tables (JSON output).
"""
from rest_framework import serializers

from .conf import get_setting
from .drf import EnumField, EnumSupportSerializerMixin
from .drf.fields import HexField
from .enums import AdversaryMode, DeviceAction, DlFlag, MessageKind, Role, Violation
from .models import VerdictRecord

REPORTING_ROLES = (Role.PRODUCER, Role.CONSUMER, Role.STORAGE)


def flatten_errors(errors, prefix=''):
    """DRF's nested error structure as ``path.to.field: message`` lines."""
    if isinstance(errors, dict):
        lines = []
        for key, value in errors.items():
            path = prefix if key == 'non_field_errors' else ('{}.{}'.format(prefix, key) if prefix else str(key))
            lines.extend(flatten_errors(value, path))
        return lines
    if isinstance(errors, list):
        if all(isinstance(item, str) for item in errors):
            return ['{}: {}'.format(prefix or 'config', item) for item in errors]
        lines = []
        for index, item in enumerate(errors):
            if item:
                lines.extend(flatten_errors(item, '{}.{}'.format(prefix, index) if prefix else str(index)))
        return lines
    return ['{}: {}'.format(prefix or 'config', errors)]


class HourSpanField(serializers.ListField):
    def __init__(self, **kwargs):
        kwargs.setdefault('default', [0, 24])
        super().__init__(child=serializers.IntegerField(min_value=0, max_value=24), min_length=2, max_length=2,
                         **kwargs)

    def to_internal_value(self, data):
        start, end = super().to_internal_value(data)
        if start >= end:
            raise serializers.ValidationError('start hour must be before end hour')
        return (start, end)


class DataProfileSerializer(serializers.Serializer):
    mean = serializers.IntegerField(min_value=0)
    spread = serializers.IntegerField(min_value=0, default=0)

    def validate(self, attrs):
        if attrs['spread'] > attrs['mean']:
            raise serializers.ValidationError('spread cannot exceed mean')
        return attrs


class SensorAllowanceSerializer(serializers.Serializer):
    type = serializers.CharField()
    max_installs = serializers.IntegerField(min_value=0)
    unit = serializers.CharField(default='', allow_blank=True)


class ContractSerializer(serializers.Serializer):
    device_classes = serializers.ListField(child=serializers.CharField(), default=list)
    allowed_hours = HourSpanField()
    sensors = SensorAllowanceSerializer(many=True, default=list)

    def validate_sensors(self, value):
        types = [allowance['type'] for allowance in value]
        if len(set(types)) != len(types):
            raise serializers.ValidationError('sensor types must be unique')
        return value


class AcceptanceSerializer(serializers.Serializer):
    device_classes = serializers.ListField(child=serializers.CharField(), default=list)
    hours = HourSpanField()
    sensor_types = serializers.ListField(child=serializers.CharField(), required=False)
    max_sensors = serializers.IntegerField(min_value=0, default=0)


class InstallSerializer(serializers.Serializer):
    role = EnumField(Role, lenient=True)
    type = serializers.CharField()
    count = serializers.IntegerField(min_value=1, default=1)
    cadence = serializers.IntegerField(min_value=1, required=False)
    data = DataProfileSerializer(required=False)

    def validate_role(self, value):
        if not value.is_installed:
            raise serializers.ValidationError('installed nodes are sensors or devices')
        return value

    def validate(self, attrs):
        if attrs['role'] == Role.SENSOR and 'data' not in attrs:
            raise serializers.ValidationError({'data': ['sensors need a data profile']})
        return attrs


class ParticipantSerializer(serializers.Serializer):
    name = serializers.RegexField(r'^[a-z0-9][a-z0-9_-]*$', required=False)
    role = EnumField(Role, lenient=True)
    count = serializers.IntegerField(min_value=1, default=1)
    cadence = serializers.IntegerField(min_value=1, required=False)
    flag = EnumField(DlFlag, lenient=True, default=DlFlag.LOAD)
    data = DataProfileSerializer()
    contract = ContractSerializer(required=False)
    accept = AcceptanceSerializer(required=False)
    install = InstallSerializer(many=True, default=list)

    def validate_role(self, value):
        if value not in REPORTING_ROLES:
            raise serializers.ValidationError('roster roles are producer, consumer or storage')
        return value

    def validate(self, attrs):
        if attrs['install'] and 'contract' not in attrs:
            raise serializers.ValidationError({'install': ['installations need a contract']})
        if 'contract' in attrs and attrs['role'] != Role.CONSUMER:
            raise serializers.ValidationError({'contract': ['only consumers sign load-control contracts']})
        return attrs


class PolicySerializer(serializers.Serializer):
    capacity_threshold = serializers.IntegerField(min_value=1)
    curtailment_order = serializers.ListField(child=serializers.CharField(), default=list)
    per_device_reduction = serializers.IntegerField(min_value=1, default=1000)
    action = EnumField(DeviceAction, lenient=True, default=DeviceAction.OFF)

    def validate_action(self, value):
        if value not in (DeviceAction.OFF, DeviceAction.REDUCE):
            raise serializers.ValidationError('policy action must be off or reduce')
        return value


class AdversarySerializer(serializers.Serializer):
    mode = EnumField(AdversaryMode, lenient=True)
    intensity = serializers.FloatField(min_value=0.0, max_value=1.0, default=1.0)
    seed = serializers.IntegerField(min_value=0, default=0)
    kinds = serializers.ListField(child=EnumField(MessageKind, lenient=True), default=lambda: [MessageKind.DL])
    max_delay = serializers.IntegerField(min_value=1, default=lambda: get_setting('REPLAY_MAX_DELAY'))


class NetworkSerializer(serializers.Serializer):
    loss = serializers.FloatField(min_value=0.0, max_value=1.0, default=0.0)


class OutputSerializer(serializers.Serializer):
    directory = serializers.CharField(default=lambda: get_setting('OUTPUT_DIRECTORY'))
    trace = serializers.BooleanField(default=False)


class BenchSerializer(serializers.Serializer):
    samples = serializers.IntegerField(min_value=0, default=lambda: get_setting('BENCH_SAMPLES'))
    warmup = serializers.IntegerField(min_value=0, default=lambda: get_setting('BENCH_WARMUP'))


class ScenarioConfigSerializer(serializers.Serializer):
    OPTIONAL_SECTIONS = ('network', 'output', 'bench')

    seed = serializers.IntegerField(min_value=0)
    ticks = serializers.IntegerField(min_value=1)
    period_ticks = serializers.IntegerField(min_value=1, default=lambda: get_setting('PERIOD_TICKS'))
    resync_window = serializers.IntegerField(min_value=0, default=lambda: get_setting('RESYNC_WINDOW'))
    participants = ParticipantSerializer(many=True, allow_empty=False)
    policy = PolicySerializer()
    adversaries = AdversarySerializer(many=True, default=list)
    network = NetworkSerializer()
    output = OutputSerializer()
    bench = BenchSerializer()

    def to_internal_value(self, data):
        if isinstance(data, dict):
            # optional sections still get their defaults
            data = {**{section: {} for section in self.OPTIONAL_SECTIONS}, **data}
        return super().to_internal_value(data)

    def validate_participants(self, value):
        names = [entry.get('name') or entry['role'].name.lower() for entry in value]
        if len(set(names)) != len(names):
            raise serializers.ValidationError('participant names must be unique')
        return value


class CountsSerializer(serializers.Serializer):
    sent = serializers.IntegerField()
    delivered = serializers.IntegerField()
    accepted = serializers.IntegerField()
    dropped = serializers.DictField(child=serializers.IntegerField())
    by_origin = serializers.DictField(child=serializers.DictField(child=serializers.IntegerField()))


class ChainSummarySerializer(serializers.Serializer):
    valid = serializers.BooleanField()
    blocks = serializers.IntegerField()
    merkle_roots = serializers.IntegerField()
    dl_entries = serializers.IntegerField()
    head = HexField()
    violation = EnumField(Violation, allow_null=True)
    violation_height = serializers.IntegerField(allow_null=True)


class WorkflowSerializer(serializers.Serializer):
    contracts_offered = serializers.IntegerField()
    contracts_signed = serializers.IntegerField()
    contracts_refused = serializers.IntegerField()
    geneses_issued = serializers.IntegerField()
    nodes_installed = serializers.IntegerField()
    samples_requested = serializers.IntegerField()
    actions_requested = serializers.IntegerField()
    actions_executed = serializers.IntegerField()
    actions_refused = serializers.IntegerField()
    status_changes = serializers.IntegerField()
    ungated_status_changes = serializers.IntegerField()
    dangling_refs = serializers.IntegerField()
    rejected = serializers.DictField(child=serializers.IntegerField())


class ReceiptsSerializer(serializers.Serializer):
    issued = serializers.IntegerField()
    verified = serializers.IntegerField()
    rate = serializers.FloatField(allow_null=True)


class LockstepSerializer(serializers.Serializer):
    nodes = serializers.IntegerField()
    in_sync = serializers.IntegerField()


class AdversaryReportSerializer(serializers.Serializer):
    mode = EnumField(AdversaryMode)
    intensity = serializers.FloatField()
    actions = serializers.DictField(child=serializers.IntegerField())
    linkage_score = serializers.FloatField(allow_null=True)
    distinct_public_keys = serializers.IntegerField(allow_null=True)


class RunReportSerializer(serializers.Serializer):
    seed = serializers.IntegerField()
    ticks = serializers.IntegerField()
    periods = serializers.IntegerField()
    dl = CountsSerializer()
    chain = ChainSummarySerializer()
    workflow = WorkflowSerializer()
    receipts = ReceiptsSerializer()
    lockstep = LockstepSerializer()
    adversaries = AdversaryReportSerializer(many=True)


class AccessRowSerializer(serializers.Serializer):
    requester_pk = HexField()
    target_pk = HexField()
    target_role = EnumField(Role, ints_as_names=True, allow_null=True)
    target_class = serializers.CharField()
    action = EnumField(DeviceAction, ints_as_names=True)
    t_id = HexField()
    height = serializers.IntegerField()
    first_period = serializers.IntegerField()
    last_period = serializers.IntegerField()
    count = serializers.IntegerField()


class RequesterSummarySerializer(serializers.Serializer):
    requester_pk = HexField()
    requests = serializers.IntegerField()
    responses = serializers.IntegerField()
    first_period = serializers.IntegerField(allow_null=True)
    last_period = serializers.IntegerField(allow_null=True)


class AccessReportSerializer(serializers.Serializer):
    owner_pk = HexField()
    rows = AccessRowSerializer(many=True)
    requesters = RequesterSummarySerializer(many=True)


class BenchRowSerializer(serializers.Serializer):
    path = serializers.CharField()
    samples = serializers.IntegerField()
    median_ns = serializers.IntegerField()
    p95_ns = serializers.IntegerField()


class BenchTableSerializer(serializers.Serializer):
    rows = BenchRowSerializer(many=True)
    ratio = serializers.FloatField(allow_null=True)


class VerdictRecordSerializer(EnumSupportSerializerMixin, serializers.ModelSerializer):
    class Meta:
        model = VerdictRecord
        fields = ('tick', 'period', 'verdict', 'reason', 'flag', 'origin')
