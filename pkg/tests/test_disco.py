import random

import pytest
from gridledger import codec
from gridledger.contracts import ActionReceipt
from gridledger.crypto import digest
from gridledger.disco import Disco, InstalledNode, LoadControlPolicy, plan_curtailment
from gridledger.enums import (
    AdversaryMode, DeviceAction, DeviceState, DlFlag, DropReason, MessageKind, Reason, Role, Verdict,
)
from gridledger.exceptions import BadRefError, NotAdmittedError
from gridledger.ledger import MerkleRootEntry
from gridledger.netsim import Adversary, Envelope
from gridledger.participant import Participant
from gridledger.transactions import DlTransaction, build_load_control, sign_as_generator

from .conftest import confirm, install, make_credentials, make_keypair


def meter(disco, label='meter', role=Role.PRODUCER):
    node = Participant(label, role, make_keypair(label), credentials=make_credentials(label), ledger=disco.chain)
    disco.register(node.credentials, node.public)
    return node


def test_accepts_fresh_report(disco, customer):
    tx = customer.report(1500, DlFlag.LOAD)
    verdict = disco.verify_dl(tx)
    assert verdict
    assert verdict.verdict == Verdict.ACCEPT
    assert verdict.owner == customer.public
    assert disco.registry.get(customer.public).current_id == customer.credentials.current_id


def test_replay_is_unknown_without_a_window(disco, customer):
    tx = customer.report(1500, DlFlag.LOAD)
    assert disco.verify_dl(tx)
    verdict = disco.verify_dl(tx)
    assert not verdict
    assert verdict.reason == DropReason.UNKNOWN_ID


def test_reports_stay_in_lockstep(disco, customer):
    for value in range(1000):
        assert disco.verify_dl(customer.report(value, DlFlag.DEMAND))
    assert disco.registry.get(customer.public).current_id == customer.credentials.current_id
    assert disco.registry.get(customer.public).nonce == customer.credentials.nonce == 1000


@pytest.mark.parametrize('flag', (DlFlag.DEMAND, DlFlag.LOAD))
def test_flipped_flag_is_rejected(disco, customer, flag):
    tx = customer.report(42, flag)
    other = DlFlag.LOAD if flag == DlFlag.DEMAND else DlFlag.DEMAND
    forged = DlTransaction(id=tx.id, data=tx.data, dl_flag=other, secret=tx.secret)
    assert disco.verify_dl(forged).reason == DropReason.BAD_SECRET
    assert disco.verify_dl(tx)


def test_resync_window():
    disco = Disco(make_keypair('disco'), LoadControlPolicy(capacity_threshold=100), resync_window=2)
    node = meter(disco)
    first, second, third = (node.report(value, DlFlag.LOAD) for value in (1, 2, 3))

    verdict = disco.verify_dl(third)
    assert verdict and verdict.offset == 2
    assert disco.verify_dl(third).reason == DropReason.DUPLICATE_NONCE
    assert disco.verify_dl(second).reason == DropReason.DUPLICATE_NONCE
    assert disco.verify_dl(first).reason == DropReason.UNKNOWN_ID
    assert disco.verify_dl(node.report(4, DlFlag.LOAD))


def test_resync_window_is_bounded():
    disco = Disco(make_keypair('disco'), LoadControlPolicy(capacity_threshold=100), resync_window=2)
    node = meter(disco)
    for value in range(3):
        node.report(value, DlFlag.LOAD)
    assert disco.verify_dl(node.report(3, DlFlag.LOAD)).reason == DropReason.UNKNOWN_ID


def test_malformed_payload(disco):
    assert disco.verify_dl_bytes(b'\x01\x02').reason == DropReason.MALFORMED
    assert disco.verify_dl_bytes(b'').reason == DropReason.MALFORMED


def test_every_single_byte_tamper_is_dropped(disco, customer):
    tx = customer.report(1500, DlFlag.LOAD)
    payload = codec.encode(tx)
    for position in range(len(payload)):
        tampered = bytearray(payload)
        tampered[position] ^= 0xFF
        assert not disco.verify_dl_bytes(bytes(tampered)), position
    assert disco.verify_dl_bytes(payload)


def test_random_tampers_are_dropped(disco, customer):
    rng = random.Random(7)
    tx = customer.report(1500, DlFlag.LOAD)
    payload = codec.encode(tx)
    reasons = set()
    for _ in range(10000):
        tampered = bytearray(payload)
        position = rng.randrange(len(payload))
        tampered[position] = (tampered[position] + rng.randint(1, 255)) % 256
        verdict = disco.verify_dl_bytes(bytes(tampered))
        assert not verdict
        reasons.add(verdict.reason)
    assert reasons <= {DropReason.MALFORMED, DropReason.UNKNOWN_ID, DropReason.BAD_SECRET}
    assert disco.verify_dl_bytes(payload)


def test_forgeries_are_dropped(disco, customer):
    tx = customer.report(1500, DlFlag.LOAD)
    envelope = Envelope('home', 'disco', MessageKind.DL, codec.encode(tx))
    forger = Adversary(AdversaryMode.FORGER, seed=3)
    for _ in range(10000):
        assert not disco.verify_dl_bytes(forger.forge(envelope).payload)
    assert disco.verify_dl_bytes(envelope.payload)


def test_commit_puts_only_the_root_on_the_ledger(disco, customer):
    for value in (10, 20, 30):
        assert disco.verify_dl(customer.report(value, DlFlag.LOAD))
    period = disco.period_id
    block, receipts = disco.commit_period()

    assert block.merkle_roots == [disco.chain.root_for(period)]
    assert block.merkle_roots[0].leaf_count == 3
    assert not any(isinstance(entry, DlTransaction) for entry in block.entries)
    assert len(receipts) == 3
    assert all(customer.accept_receipt(receipt) for receipt in receipts)
    assert customer.verify_receipts() == 3
    assert disco.pending_dl == []
    assert disco.period_id == period + 1


def test_commit_without_reports(disco):
    block, receipts = disco.commit_period()
    assert receipts == []
    assert not any(isinstance(entry, MerkleRootEntry) for entry in block.entries)


def test_receipt_for_someone_else(disco, customer):
    disco.verify_dl(customer.report(10, DlFlag.LOAD))
    _, receipts = disco.commit_period()
    other = Participant('other', Role.CONSUMER, make_keypair('other'), ledger=disco.chain)
    assert not other.accept_receipt(receipts[0])


def test_summary(disco, contracted):
    sensor = install(disco, contracted, 'thermo', Role.SENSOR, 'thermostat', reporting=True)
    disco.verify_dl(contracted.report(1500, DlFlag.LOAD))
    disco.verify_dl(contracted.report(700, DlFlag.DEMAND))
    disco.verify_dl(sensor.report(215, DlFlag.DEMAND))
    summary = disco.summarize()
    assert summary.total_load == 1500
    assert summary.total_demand == 700
    assert summary.sensor_readings == 1
    assert summary.accepted == 3


def test_admission_errors(disco, customer):
    with pytest.raises(ValueError):
        disco.admit(make_keypair('thermo').public, Role.SENSOR)
    with pytest.raises(NotAdmittedError):
        disco.admit(customer.public, Role.CONSUMER)
    with pytest.raises(NotAdmittedError):
        disco.initiate_contract(make_keypair('stranger').public, None)
    with pytest.raises(BadRefError):
        disco.issue_sensor_genesis(make_keypair('thermo').public, digest(b'no contract'), 'thermostat')
    with pytest.raises(ValueError):
        disco.issue_sensor_genesis(make_keypair('thermo').public, digest(b'no contract'), role=Role.PRODUCER)


def test_unsolicited_transactions(disco, contracted):
    tx = sign_as_generator(build_load_control(disco.public, contracted.public), disco.keypair)
    assert disco.receive_load_control(tx).reason == Reason.BAD_REF
    genesis = disco.issue_sensor_genesis(
        make_keypair('thermo').public, disco.contract_for(contracted.public), 'thermostat')
    disco.pending_geneses.clear()
    assert disco.receive_genesis(contracted.countersign_genesis(genesis)).reason == Reason.BAD_REF
    assert disco.rejections[Reason.BAD_REF] == 2


def test_request_and_response(disco, contracted):
    device = install(disco, contracted, 'pump', Role.DEVICE, 'heat-pump')
    node = disco.installed[device.public]
    request = disco.issue_request(node, DeviceAction.OFF)
    countersigned = device.accept_request(request)

    assert disco.receive_load_control(countersigned)
    assert disco.receive_load_control(countersigned).reason == Reason.BAD_REF
    assert request.t_id in disco.outstanding_requests
    block, _ = disco.commit_period()
    assert [tx.t_id for tx in block.transactions] == [countersigned.t_id]

    response = device.execute_action(request)
    assert disco.receive_load_control(response)
    assert request.t_id not in disco.outstanding_requests
    assert node.state == DeviceState.OFF
    assert disco.receive_load_control(response).reason == Reason.BAD_REF

    block, _ = disco.commit_period()
    assert [tx.t_id for tx in block.transactions] == [response.t_id]
    assert disco.refused == []


def test_response_needs_its_request_on_the_ledger(disco, contracted):
    device = install(disco, contracted, 'pump', Role.DEVICE, 'heat-pump')
    request = disco.issue_request(disco.installed[device.public], DeviceAction.OFF)
    receipt = ActionReceipt(action=DeviceAction.OFF, state=DeviceState.OFF, amount=0, period_id=disco.period_id)
    early = sign_as_generator(
        build_load_control(
            device.public, disco.public, p_t_id=disco.chain.genesis_for(device.public).gid,
            metadata=receipt, ref_disco_id=request.t_id,
        ),
        device.keypair,
    )
    assert disco.receive_load_control(early).reason == Reason.BAD_REF
    assert disco.receive_load_control(device.accept_request(request))
    assert disco.receive_load_control(early).reason == Reason.BAD_REF
    disco.commit_period()
    assert disco.receive_load_control(early)


def test_unanswered_request_is_refused_after_a_full_period(disco, contracted):
    device = install(disco, contracted, 'pump', Role.DEVICE, 'heat-pump')
    request = disco.issue_request(disco.installed[device.public], DeviceAction.OFF)
    disco.commit_period()
    assert disco.refused == []
    disco.commit_period()
    assert disco.refused == [request]
    assert disco.outstanding_requests == {}


def test_committed_request_waits_one_period_for_its_response(disco, contracted):
    device = install(disco, contracted, 'pump', Role.DEVICE, 'heat-pump')
    request = disco.issue_request(disco.installed[device.public], DeviceAction.OFF)
    disco.commit_period()
    assert disco.receive_load_control(device.accept_request(request))
    disco.commit_period()
    assert disco.refused == []
    disco.commit_period()
    assert disco.refused == [request]
    assert disco.outstanding_requests == {}
    assert disco.countersigned == set()
    assert disco.receive_load_control(device.execute_action(request)).reason == Reason.BAD_REF


def test_requests_in_one_period_are_independent(disco, contracted):
    first = install(disco, contracted, 'pump', Role.DEVICE, 'heat-pump')
    second = install(disco, contracted, 'charger', Role.DEVICE, 'ev-charger')
    dropped = disco.issue_request(disco.installed[first.public], DeviceAction.OFF)
    request = disco.issue_request(disco.installed[second.public], DeviceAction.OFF)
    assert request.p_t_id == dropped.p_t_id
    # the first request never arrives; the second still stands on its own
    assert disco.receive_load_control(second.accept_request(request))
    block, _ = disco.commit_period()
    assert [tx.t_id for tx in block.transactions] == [request.t_id]
    assert disco.receive_load_control(second.execute_action(request))


def test_determine_actions(disco, contracted):
    first = install(disco, contracted, 'pump', Role.DEVICE, 'heat-pump')
    second = install(disco, contracted, 'charger', Role.DEVICE, 'ev-charger')
    install(disco, contracted, 'thermo', Role.SENSOR, 'thermostat')
    assert disco.determine_actions() == []

    disco.verify_dl(contracted.report(1500, DlFlag.LOAD))
    disco.commit_period()
    requests = disco.determine_actions()
    assert [request.pk_rec for request in requests] == [first.public, second.public]
    # devices with a request outstanding are skipped
    assert disco.determine_actions() == []


def test_demand_does_not_trigger_curtailment(disco, contracted):
    install(disco, contracted, 'pump', Role.DEVICE, 'heat-pump')
    disco.verify_dl(contracted.report(1500, DlFlag.DEMAND))
    disco.commit_period()
    assert disco.determine_actions() == []


def make_node(label, node_class, sequence):
    keypair = make_keypair(label)
    return InstalledNode(keypair.public, keypair.public, Role.DEVICE, node_class, digest(label.encode()), sequence)


def test_plan_curtailment_order():
    policy = LoadControlPolicy(
        capacity_threshold=100, curtailment_order=('ev-charger', 'heat-pump'), per_device_reduction=50)
    nodes = [
        make_node('a', 'heat-pump', 0),
        make_node('b', 'pool-pump', 1),
        make_node('c', 'ev-charger', 2),
        make_node('d', 'heat-pump', 3),
    ]
    assert plan_curtailment(policy, 100, nodes) == []
    assert [n.sequence for n in plan_curtailment(policy, 101, nodes)] == [2]
    assert [n.sequence for n in plan_curtailment(policy, 250, nodes)] == [2, 0, 3]
    assert [n.sequence for n in plan_curtailment(policy, 10000, nodes)] == [2, 0, 3, 1]


@pytest.mark.parametrize('kwargs', (
    {'capacity_threshold': 0},
    {'capacity_threshold': 10, 'per_device_reduction': 0},
    {'capacity_threshold': 10, 'action': DeviceAction.SAMPLE},
    {'capacity_threshold': 10, 'action': DeviceAction.ON},
))
def test_policy_validation(kwargs):
    with pytest.raises(ValueError):
        LoadControlPolicy(**kwargs)


def test_reduce_policy_sends_amount(contracted, disco):
    disco.policy = LoadControlPolicy(capacity_threshold=100, per_device_reduction=500, action=DeviceAction.REDUCE)
    device = install(disco, contracted, 'pump', Role.DEVICE, 'heat-pump')
    disco.verify_dl(contracted.report(400, DlFlag.LOAD))
    disco.commit_period()
    request, = disco.determine_actions()
    assert confirm(disco, device, request) is not None
    assert device.device_status == DeviceState.REDUCED
    assert device.reduced_by == 500
