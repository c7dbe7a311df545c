import json

import numpy as np
import pytest

from swapqkd import bell, protocol
from swapqkd.adversary import ZlgAttack
from swapqkd.bell import LABELS, derive_swap_table
from swapqkd.protocol import (
    EXPECTED_TABLE1,
    AmbiguityError,
    GateStep,
    MalformedAdversaryError,
    MeasureStep,
    Procedure,
    RoundTranscript,
    TableMismatchError,
    TransitPlan,
    WrongProtocolError,
    build_four_plan,
    build_six_plan,
    derive_inference_table,
    four_qubit_protocol,
    mark_compared,
    protocol_driver,
    reproduce_table1,
    run_four_qubit_round,
    run_six_qubit_round,
    six_qubit_protocol,
    transcripts_to_csv,
)
from swapqkd.qstate import GATES, RandomSource


@pytest.fixture(scope="module", params=["six", "four"])
def driver(request, conv):
    return protocol_driver(conv, request.param)


# --- adversary-free correctness ----------------------------------------------


def test_inferred_key_equals_key_on_every_branch(driver):
    for procedure in Procedure:
        branches = driver.enumerate_branches(procedure)
        assert abs(sum(p for p, _ in branches) - 1.0) < 1e-10
        for _prob, out in branches:
            inferred = driver.inference[procedure].infer(out["secret"], out.get("public"))
            assert inferred == out["key"]


def test_key_is_uniform(driver):
    for procedure in Procedure:
        dist = driver.key_distribution(procedure)
        assert np.allclose(dist, 0.25, atol=1e-10)


def test_six_qubit_branch_counts(conv):
    drv = six_qubit_protocol(conv)
    for procedure in Procedure:
        branches = drv.enumerate_branches(procedure)
        # 4 keys x 4 publics, secret fully determined
        assert len(branches) == 16
        for prob, _ in branches:
            assert abs(prob - 1 / 16) < 1e-10


def test_four_qubit_branch_counts(conv):
    drv = four_qubit_protocol(conv)
    for procedure in Procedure:
        branches = drv.enumerate_branches(procedure)
        assert len(branches) == 4
        for prob, out in branches:
            assert abs(prob - 1 / 4) < 1e-10
            assert out["secret"] == out["key"]  # derived: secret pins the key


# --- inference tables ---------------------------------------------------------


def test_six_inference_tables_are_total_and_balanced(conv):
    for procedure in Procedure:
        table = derive_inference_table(conv, "six", procedure).as_dict()
        assert len(table) == 16  # every (public, secret) combination reachable
        for key in LABELS:
            assert sum(1 for v in table.values() if v == key) == 4


def test_four_inference_tables_are_total(conv):
    for procedure in Procedure:
        table = derive_inference_table(conv, "four", procedure).as_dict()
        assert len(table) == 4
        assert sorted(table.values()) == sorted(LABELS)


def test_inference_rejects_unknown_protocol(conv):
    with pytest.raises(ValueError):
        derive_inference_table(conv, "five", Procedure.P_I)


def test_inference_lookup_unknown_observation(conv):
    table = derive_inference_table(conv, "six", Procedure.P_I)
    with pytest.raises(KeyError):
        table.infer("00", None)


def test_six_p1_inference_is_swap_table_composition(conv):
    # The (i) inference must equal two chained swap lookups: the key
    # measurement swaps (2,5) out of the first two pairs, the public
    # measurement swaps (2,4) out of (2,5) and (4,6).
    swap = derive_swap_table(conv)
    table = derive_inference_table(conv, "six", Procedure.P_I)
    for key in LABELS:
        middle = swap.lookup("00", "00", key)
        for public in LABELS:
            secret = swap.lookup(middle, "00", public)
            assert table.infer(secret, public) == key


# --- published outcome table ---------------------------------------------------


def test_reproduce_table1_rows(conv):
    rows = reproduce_table1(conv)
    assert len(rows) == 8
    assert rows[0] == ("(i)", "00", "00", "00", "00")
    assert rows[6] == ("(ii)", "00", "01", "10", "00")
    assert tuple(rows) == EXPECTED_TABLE1


def test_table_mismatch_diff_is_row_level():
    err = TableMismatchError("probe", ["row 3: expected a, got b"])
    assert err.diff == ["row 3: expected a, got b"]
    assert "row 3" in str(err)


# --- specific published rows ----------------------------------------------------


def test_p1_key00_public01_row(conv):
    drv = six_qubit_protocol(conv)
    outs = [o for _p, o in drv.enumerate_branches(Procedure.P_I)
            if o["key"] == "00" and o["public"] == "01"]
    assert len(outs) == 1
    assert outs[0]["secret"] == "01"
    assert drv.inference[Procedure.P_I].infer("01", "01") == "00"


def test_p2_key00_public10_row(conv):
    drv = six_qubit_protocol(conv)
    outs = [o for _p, o in drv.enumerate_branches(Procedure.P_II)
            if o["key"] == "00" and o["public"] == "10"]
    assert len(outs) == 1
    assert outs[0]["secret"] == "01"
    assert drv.inference[Procedure.P_II].infer("01", "10") == "00"


# --- transcripts -----------------------------------------------------------------


def test_round_transcript_events_order(conv):
    transcript = run_six_qubit_round(conv, Procedure.P_II, None, RandomSource(5))
    events = list(transcript.events)
    announce = events.index("alice:announce procedure and public result")
    key_measure = events.index("alice:measure key pair (1,3)")
    bob_rotate = events.index("bob:apply S to qubit 4")
    bob_measure = events.index("bob:measure secret pair (2,4)")
    alice_rotate = events.index("alice:apply S to qubit 3")
    assert key_measure < announce
    assert alice_rotate < key_measure
    assert announce < bob_rotate < bob_measure


def test_four_qubit_rotation_precedes_key_measurement(conv):
    transcript = run_four_qubit_round(conv, Procedure.P_II, None, RandomSource(5))
    events = list(transcript.events)
    assert events.index("alice:apply S to qubit 1") < events.index("alice:measure key pair (1,3)")
    assert events.index("alice:measure key pair (1,3)") < events.index("alice:announce procedure")
    assert events.index("bob:apply S to qubit 2") < events.index("bob:measure secret pair (2,4)")


def test_transcript_flags_and_comparison(conv):
    transcript = run_six_qubit_round(conv, Procedure.P_I, None, RandomSource(0))
    assert not transcript.compared and not transcript.detected
    compared = mark_compared(transcript)
    assert compared.compared
    assert not compared.detected  # no adversary: inference always correct
    with pytest.raises(ValueError):
        RoundTranscript(
            protocol="six", procedure=Procedure.P_I, key="00", public_result="00",
            bob_secret="00", bob_inferred_key="00", compared=False, detected=True,
        )


def test_transcript_json_and_csv(conv):
    rng = RandomSource(12)
    transcripts = [run_six_qubit_round(conv, Procedure.P_I, None, rng) for _ in range(3)]
    for t in transcripts:
        doc = json.loads(json.dumps(t.to_json_dict()))
        assert doc["protocol"] == "six"
        assert doc["procedure"] == "i"
        assert doc["eve"] is None
        assert doc["key"] in LABELS
    csv_text = transcripts_to_csv(transcripts)
    lines = csv_text.strip().split("\n")
    assert lines[0] == "procedure,key,public,secret,inferred"
    assert len(lines) == 4
    jsonl = protocol.transcripts_to_jsonl(transcripts).strip().split("\n")
    assert len(jsonl) == 3
    assert all(json.loads(line)["protocol"] == "six" for line in jsonl)


def test_wiring_partitions_register():
    for wiring, qubits in ((protocol.SIX_WIRING, 6), (protocol.FOUR_WIRING, 4)):
        roles = (wiring.alice_kept + wiring.alice_sends
                 + wiring.bob_kept + wiring.bob_sends)
        assert sorted(roles) == list(range(1, qubits + 1))
        assert sorted(wiring.key_pair + wiring.bob_pair
                      + (wiring.public_pair or ())) == sorted(
            set(wiring.key_pair) | set(wiring.bob_pair) | set(wiring.public_pair or ())
        )


def test_transcript_json_includes_eve(conv):
    attack = ZlgAttack(conv)
    transcript = run_six_qubit_round(conv, Procedure.P_I, attack, RandomSource(3))
    doc = transcript.to_json_dict()
    assert doc["eve"]["attack"] == "zlg"
    assert doc["eve"]["transformation"] in ("I", "X", "Y", "Z")
    assert doc["eve"]["inferred_keys"] == [transcript.key]


def test_round_functions_are_deterministic(conv):
    a = run_six_qubit_round(conv, Procedure.P_II, None, RandomSource(42))
    b = run_six_qubit_round(conv, Procedure.P_II, None, RandomSource(42))
    assert a == b


# --- channel contract ------------------------------------------------------------


class _BadAttack:
    protocol = "six"
    kind = "bad"
    cache_key = ("bad",)

    def __init__(self, transit):
        self._transit = transit

    def transit_plan(self):
        return self._transit

    def eve_record(self, outcome, procedure, public):  # pragma: no cover
        return None


def test_attack_may_not_touch_protected_qubits(conv):
    bad = _BadAttack(TransitPlan(steps=(GateStep(1, GATES["X"]),)))
    with pytest.raises(MalformedAdversaryError):
        six_qubit_protocol(conv).run_round(Procedure.P_I, bad, RandomSource(0))


def test_attack_ancillas_must_extend_register(conv):
    bad = _BadAttack(TransitPlan(ancilla_pairs=((9, 10),)))
    with pytest.raises(MalformedAdversaryError):
        six_qubit_protocol(conv).run_round(Procedure.P_I, bad, RandomSource(0))


def test_attack_may_not_reuse_reserved_names(conv):
    bad = _BadAttack(TransitPlan(steps=(MeasureStep("key", (2, 6)),)))
    with pytest.raises(MalformedAdversaryError):
        six_qubit_protocol(conv).run_round(Procedure.P_I, bad, RandomSource(0))


def test_attack_may_not_forward_same_qubit_twice(conv):
    bad = _BadAttack(TransitPlan(alice_receives=2, bob_receives=2))
    with pytest.raises(MalformedAdversaryError):
        six_qubit_protocol(conv).run_round(Procedure.P_I, bad, RandomSource(0))


def test_wrong_protocol_attack_is_rejected(conv):
    with pytest.raises(WrongProtocolError):
        four_qubit_protocol(conv).run_round(Procedure.P_I, ZlgAttack(conv), RandomSource(0))


def test_plan_builders_reject_malformed_transit(conv):
    with pytest.raises(MalformedAdversaryError):
        build_six_plan(conv, Procedure.P_I, TransitPlan(steps=(GateStep(3, GATES["X"]),)))
    with pytest.raises(MalformedAdversaryError):
        build_four_plan(conv, Procedure.P_I, TransitPlan(steps=(GateStep(6, GATES["X"]),)))


# --- ambiguity guard ----------------------------------------------------------


def test_ambiguity_error_type():
    with pytest.raises(AmbiguityError):
        raise AmbiguityError("probe")
