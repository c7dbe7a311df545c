import time

import numpy as np
import pytest

from swapqkd import adversary, bell, protocol
from swapqkd.bell import (
    LABELS,
    BellConvention,
    ConventionError,
    all_conventions,
    bell_measure,
    bell_probabilities,
    bell_state,
    convention_residuals,
    derive_convention,
    derive_swap_table,
    label_xor,
    rotated_states,
)
from swapqkd.qstate import GATES, RandomSource, prepare_pairs


def reduced_single_qubit(amps: np.ndarray, keep_first: bool) -> np.ndarray:
    rho = np.outer(amps, amps.conj()).reshape(2, 2, 2, 2)
    # pair index 2*b_first + b_second: axis 0/2 is the first qubit
    return np.trace(rho, axis1=1, axis2=3) if keep_first else np.trace(rho, axis1=0, axis2=2)


def test_derivation_matches_frozen_convention():
    assert derive_convention() == bell.FROZEN_CONVENTION


def test_derivation_enumeration_is_fast_and_exhaustive():
    start = time.monotonic()
    found = all_conventions()
    elapsed = time.monotonic() - start
    assert elapsed < 1.0
    assert len(found) == 64  # regression: count observed for this constraint set
    for conv in found:
        r1, r2 = convention_residuals(conv)
        assert r1 < 1e-10 and r2 < 1e-10


def test_residuals_of_frozen_convention(conv):
    r1, r2 = convention_residuals(conv)
    assert r1 < 1e-10
    assert r2 < 1e-10


def test_convention_basis_is_orthonormal(conv):
    gram = conv.basis_matrix @ conv.basis_matrix.conj().T
    assert np.allclose(gram, np.eye(4), atol=1e-12)


def test_bell_states_are_maximally_entangled(conv):
    for label in LABELS:
        amps = bell_state(conv, label).amplitudes
        for keep_first in (True, False):
            rho = reduced_single_qubit(amps, keep_first)
            assert np.allclose(rho, np.eye(2) / 2, atol=1e-12)


def test_bell_state_rejects_unknown_label(conv):
    with pytest.raises(ValueError):
        bell_state(conv, "2")


def test_rotation_of_label00_expands_as_01_plus_10(conv):
    # Expansion coefficients of the rotated 00 state in the Bell basis.
    rotated = bell._act(GATES["S"], conv.acting_factor, conv.states["00"])
    coeffs = conv.basis_matrix.conj() @ rotated
    phase = coeffs[1] / abs(coeffs[1])
    assert np.allclose(coeffs / phase, [0, 2**-0.5, 2**-0.5, 0], atol=1e-12)


def test_rotated_states_are_orthonormal(conv):
    mats = rotated_states(conv)
    assert sorted(mats) == sorted(bell.ROTATED_LABELS)
    stack = np.vstack([mats[k] for k in bell.ROTATED_LABELS])
    assert np.allclose(stack @ stack.conj().T, np.eye(4), atol=1e-10)


def test_bell_measure_on_fresh_state_is_deterministic(conv):
    state = prepare_pairs(2, [(0, 1, conv.states["01"])])
    label, collapsed = bell_measure(conv, state, (0, 1), RandomSource(0))
    assert label == "01"
    assert collapsed.equals_up_to_phase(state)


def test_bell_measure_uniform_across_independent_pairs(conv):
    vec = conv.states["00"]
    state = prepare_pairs(4, [(0, 1, vec), (2, 3, vec)])
    probs = bell_probabilities(conv, state, (0, 2))
    assert np.allclose(probs, 0.25, atol=1e-10)


# --- swap algebra -----------------------------------------------------------


def test_swap_table_is_total_uniform_and_bijective(conv):
    table = derive_swap_table(conv).as_dict()
    assert len(table) == 64
    for a in LABELS:
        for b in LABELS:
            images = [table[(a, b, m)] for m in LABELS]
            assert sorted(images) == sorted(LABELS)


def test_swap_table_xor_structure_finding(conv):
    # Property discovery, recorded as a regression: for this convention the
    # remainder label is exactly a xor b xor m (identity permutation).
    perm = derive_swap_table(conv).xor_permutation()
    assert perm == {lab: lab for lab in LABELS}


def test_label_xor():
    assert label_xor("01", "10") == "11"
    assert label_xor("11", "11", "01") == "01"


def test_bad_convention_raises_on_swap_derivation():
    # A labeling that fails the defining constraints still yields a valid
    # orthonormal basis, so the swap table must still be derivable; a truly
    # broken "basis" must be rejected earlier by measurement validation.
    conv_bad = BellConvention(
        assignment=(("phi+", 1), ("phi-", 1), ("psi+", 1), ("psi-", -1)),
        acting_factor="first",
    )
    table = derive_swap_table(conv_bad)
    assert len(table.as_dict()) == 64


def test_convention_error_message():
    with pytest.raises(ConventionError):
        raise ConventionError("probe")


# --- convention invariance ---------------------------------------------------


def _strip_transformation(rows):
    return tuple(r[:6] + r[7:] for r in rows)


def test_outcome_tables_across_all_conventions():
    """Recorded finding: the published tables constrain beyond the equations.

    All 64 labelings satisfying the two defining identities fall into clean
    halves: those whose label-00 state lies on a ray preserved by the
    two-sided rotation (phi+ or psi-) reproduce both outcome tables'
    label columns; the others (label 00 on phi- or psi+) do not, because
    the narrative's claim about the post-measurement state of the
    undisturbed pair fails for them.  Among the reproducing half, exactly
    those with the published outcome-to-Pauli naming (I, Z, X, Y) match
    the attack table bit for bit.  The first convention in enumeration
    order, the frozen one, reproduces everything.
    """
    expected2_outcomes = _strip_transformation(adversary.EXPECTED_TABLE2)
    izxy = {"00": "I", "01": "Z", "10": "X", "11": "Y"}
    full_matches = 0
    for candidate in all_conventions():
        symmetric_ray = candidate.assignment[0][0] in ("phi+", "psi-")
        t1 = tuple(protocol.six_qubit_outcome_rows(candidate)) == protocol.EXPECTED_TABLE1
        rows2 = tuple(adversary.zlg_outcome_rows(candidate))
        t2_outcomes = _strip_transformation(rows2) == expected2_outcomes
        assert t1 == symmetric_ray
        assert t2_outcomes == symmetric_ray
        t2_full = rows2 == adversary.EXPECTED_TABLE2
        assert t2_full == (symmetric_ray and adversary.pauli_for_label(candidate) == izxy)
        full_matches += t2_full
    assert full_matches == 16
    assert tuple(adversary.zlg_outcome_rows(derive_convention())) == adversary.EXPECTED_TABLE2
