"""Exact statevector simulation for registers of up to eight qubits.

Conventions, fixed once for the whole package:

* Amplitude indexing: qubit ``q`` occupies bit ``q`` of the basis-state
  index, i.e. qubit 0 is the least significant bit.  The bit string passed
  to :func:`init_basis_state` reads like a binary literal (leftmost
  character is the highest-numbered qubit).
* Pair addressing: operations on a qubit pair ``(i, j)`` index the four
  two-qubit amplitudes as ``2 * bit_i + bit_j`` — the first-listed qubit
  is the high bit of the pair index.

States are dense complex128 vectors; at 8 qubits (256 amplitudes) there is
no reason for anything cleverer.  All operations are pure: they return new
:class:`StateVector` instances and never mutate their inputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

MAX_QUBITS = 8

# Tolerances: 1e-12 for algebraic identities (norms, unitarity), 1e-10 for
# composed or measured quantities (orthonormality of supplied bases,
# probability completeness).
ATOL_ALGEBRA = 1e-12
ATOL_MEASURE = 1e-10

# Probability floor below which a measurement outcome is treated as
# unreachable; for valid normalized inputs at least one outcome always
# clears it by a huge margin.
DEGENERACY_FLOOR = 1e-14

_SQRT2_INV = 1.0 / np.sqrt(2.0)

# Single-qubit gate library.  "S" is the protocol's basis-change gate (the
# Hadamard matrix); two-letter names are matrix products applied right to
# left, e.g. "XS" means: apply S, then X.
GATES: dict[str, np.ndarray] = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
    "S": np.array([[1, 1], [1, -1]], dtype=complex) * _SQRT2_INV,
}
for _m in GATES.values():
    _m.setflags(write=False)


class DegenerateMeasurementError(RuntimeError):
    """All outcome probabilities vanished; impossible for valid input."""


def gate(name: str) -> np.ndarray:
    """Look up a gate by name; compound names compose right to left."""
    if name in GATES:
        return GATES[name]
    if name and all(c in GATES for c in name):
        out = np.eye(2, dtype=complex)
        for c in name:
            out = out @ GATES[c]
        return out
    raise ValueError(f"unknown gate name {name!r}")


def is_unitary(matrix: np.ndarray, atol: float = ATOL_ALGEBRA) -> bool:
    matrix = np.asarray(matrix, dtype=complex)
    if matrix.shape != (2, 2):
        return False
    return bool(np.allclose(matrix @ matrix.conj().T, np.eye(2), rtol=0.0, atol=atol))


# Validation memo keyed by array identity: gate matrices and measurement
# bases are long-lived module- or convention-level constants, so caching
# their (expensive) unitarity/orthonormality checks takes them off the
# per-measurement hot path.  Values hold strong references to keep ids
# stable.
_KNOWN_GOOD_GATES: dict[int, np.ndarray] = {}
_KNOWN_GOOD_BASES: dict[int, np.ndarray] = {}


@dataclass(frozen=True)
class StateVector:
    """Normalized pure state of ``num_qubits`` qubits.

    ``amplitudes`` has length ``2**num_qubits`` and unit L2 norm within
    1e-12; both are validated on construction.
    """

    num_qubits: int
    amplitudes: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        if not 1 <= self.num_qubits <= MAX_QUBITS:
            raise ValueError(f"num_qubits must be in 1..{MAX_QUBITS}, got {self.num_qubits}")
        amps = np.asarray(self.amplitudes, dtype=complex)
        if amps.shape != (2**self.num_qubits,):
            raise ValueError(
                f"expected {2**self.num_qubits} amplitudes, got shape {amps.shape}"
            )
        # A non-finite amplitude makes the norm non-finite, so this one
        # check enforces both normalization and finiteness.
        norm = float(np.vdot(amps, amps).real) ** 0.5
        if not abs(norm - 1.0) <= ATOL_ALGEBRA:
            raise ValueError(
                f"state norm {norm!r} is not 1 within {ATOL_ALGEBRA} "
                "(non-finite amplitudes also land here)"
            )
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    def overlap(self, other: "StateVector") -> complex:
        """Inner product <self|other>."""
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def equals_up_to_phase(self, other: "StateVector", atol: float = ATOL_MEASURE) -> bool:
        """Ray equality: |<self|other>| == 1 within ``atol``."""
        return abs(abs(self.overlap(other)) - 1.0) <= atol


def init_basis_state(num_qubits: int, bits: str) -> StateVector:
    """Computational basis state |bits>, e.g. ``init_basis_state(2, "10")``."""
    if len(bits) != num_qubits:
        raise ValueError(f"bit string {bits!r} does not match num_qubits={num_qubits}")
    if any(c not in "01" for c in bits):
        raise ValueError(f"bit string {bits!r} must contain only 0 and 1")
    amps = np.zeros(2**num_qubits, dtype=complex)
    amps[int(bits, 2)] = 1.0
    return StateVector(num_qubits, amps)


def prepare_pairs(num_qubits: int, pairs: list[tuple[int, int, np.ndarray]]) -> StateVector:
    """Tensor product of two-qubit states placed on disjoint pairs.

    Each entry is ``(i, j, vec4)`` where ``vec4`` is indexed ``2*bit_i + bit_j``.
    Every qubit of the register must be covered by exactly one pair.
    """
    seen: set[int] = set()
    for i, j, _ in pairs:
        for q in (i, j):
            if not 0 <= q < num_qubits or q in seen:
                raise ValueError(f"pairs must partition 0..{num_qubits - 1}, bad qubit {q}")
            seen.add(q)
    if len(seen) != num_qubits:
        raise ValueError("pairs do not cover the whole register")

    # einsum: one axis letter per qubit, output axes ordered high qubit first
    # to match the amplitude-index convention.
    letters = "abcdefgh"
    subs, operands = [], []
    for i, j, vec in pairs:
        subs.append(letters[i] + letters[j])
        operands.append(np.asarray(vec, dtype=complex).reshape(2, 2))
    out = "".join(letters[q] for q in range(num_qubits - 1, -1, -1))
    amps = np.einsum(",".join(subs) + "->" + out, *operands).reshape(-1)
    return StateVector(num_qubits, amps)


def _axis(state: StateVector, qubit: int) -> int:
    # qubit q is bit q of the index, i.e. axis (n-1-q) of the reshaped array
    return state.num_qubits - 1 - qubit


# Memoized axis permutations for moving a qubit (or pair) to the front of
# the reshaped state and back; keyed by (num_qubits, qubits...).
_PERM_MEMO: dict[tuple[int, ...], tuple[tuple[int, ...], tuple[int, ...]]] = {}


def _front_perm(n: int, front_axes: tuple[int, ...]) -> tuple[tuple[int, ...], tuple[int, ...]]:
    key = (n,) + front_axes
    if key not in _PERM_MEMO:
        fwd = front_axes + tuple(k for k in range(n) if k not in front_axes)
        inv = [0] * n
        for pos, ax in enumerate(fwd):
            inv[ax] = pos
        _PERM_MEMO[key] = (fwd, tuple(inv))
    return _PERM_MEMO[key]


def apply_gate(state: StateVector, gate_matrix: np.ndarray, qubit: int) -> StateVector:
    """Apply a single-qubit unitary to one tensor factor."""
    if not 0 <= qubit < state.num_qubits:
        raise ValueError(f"qubit {qubit} out of range for {state.num_qubits}-qubit state")
    matrix = np.asarray(gate_matrix, dtype=complex)
    if id(matrix) not in _KNOWN_GOOD_GATES:
        if not is_unitary(matrix):
            raise ValueError("gate is not unitary within 1e-12")
        matrix.setflags(write=False)
        if len(_KNOWN_GOOD_GATES) > 1024:
            _KNOWN_GOOD_GATES.clear()
        _KNOWN_GOOD_GATES[id(matrix)] = matrix
    n = state.num_qubits
    fwd, inv = _front_perm(n, (_axis(state, qubit),))
    arr = state.amplitudes.reshape((2,) * n).transpose(fwd).reshape(2, -1)
    out = (matrix @ arr).reshape((2,) * n).transpose(inv)
    return StateVector(n, out.reshape(-1))


def _pair_matrix(state: StateVector, pair: tuple[int, int]) -> np.ndarray:
    """View the state as a (4, rest) matrix, row index = 2*bit_i + bit_j."""
    i, j = pair
    n = state.num_qubits
    fwd, _ = _front_perm(n, (_axis(state, i), _axis(state, j)))
    return state.amplitudes.reshape((2,) * n).transpose(fwd).reshape(4, -1)


def _pair_unmatrix(state: StateVector, pair: tuple[int, int], mat: np.ndarray) -> np.ndarray:
    i, j = pair
    n = state.num_qubits
    _, inv = _front_perm(n, (_axis(state, i), _axis(state, j)))
    return mat.reshape((2,) * n).transpose(inv).reshape(-1)


def _check_pair(state: StateVector, pair: tuple[int, int]) -> None:
    i, j = pair
    if i == j:
        raise ValueError("pair indices must be distinct")
    for q in (i, j):
        if not 0 <= q < state.num_qubits:
            raise ValueError(f"qubit {q} out of range for {state.num_qubits}-qubit state")


def _check_basis(basis: np.ndarray) -> np.ndarray:
    basis = np.asarray(basis, dtype=complex)
    if id(basis) in _KNOWN_GOOD_BASES:
        return basis
    if basis.shape != (4, 4):
        raise ValueError("basis must be four two-qubit states (a 4x4 array of rows)")
    if not np.allclose(basis @ basis.conj().T, np.eye(4), rtol=0.0, atol=ATOL_MEASURE):
        raise ValueError("basis states are not orthonormal within 1e-10")
    basis.setflags(write=False)
    if len(_KNOWN_GOOD_BASES) > 1024:
        _KNOWN_GOOD_BASES.clear()
    _KNOWN_GOOD_BASES[id(basis)] = basis
    return basis


def basis_probabilities(
    state: StateVector, basis: np.ndarray, pair: tuple[int, int]
) -> np.ndarray:
    """Born probabilities of the four basis outcomes on the given pair.

    ``basis`` is a 4x4 array whose rows are orthonormal two-qubit states in
    the pair-index convention.  The result sums to 1 within 1e-10.
    """
    _check_pair(state, pair)
    basis = _check_basis(basis)
    mat = _pair_matrix(state, pair)
    amps = basis.conj() @ mat
    return np.einsum("kr,kr->k", amps, amps.conj()).real


def _collapse_from_mat(
    state: StateVector, basis: np.ndarray, pair: tuple[int, int], mat: np.ndarray, outcome: int
) -> tuple[float, StateVector]:
    amps_k = basis[outcome].conj() @ mat
    prob = float(np.real(np.vdot(amps_k, amps_k)))
    if prob < DEGENERACY_FLOOR:
        raise DegenerateMeasurementError(
            f"outcome {outcome} has probability {prob:.3e}, below {DEGENERACY_FLOOR}"
        )
    new_mat = np.outer(basis[outcome], amps_k) / np.sqrt(prob)
    return prob, StateVector(state.num_qubits, _pair_unmatrix(state, pair, new_mat))


def collapse_onto(
    state: StateVector, basis: np.ndarray, pair: tuple[int, int], outcome: int
) -> tuple[float, StateVector]:
    """Project the pair onto one basis state and renormalize.

    Returns ``(probability, collapsed_state)``.  Raises
    :class:`DegenerateMeasurementError` if the outcome has no weight.
    """
    _check_pair(state, pair)
    basis = _check_basis(basis)
    if not 0 <= outcome < 4:
        raise ValueError(f"outcome must be 0..3, got {outcome}")
    mat = _pair_matrix(state, pair)
    return _collapse_from_mat(state, basis, pair, mat, outcome)


class RandomSource:
    """Deterministic uniform stream: identical seed, identical stream.

    Backed by numpy's PCG64; the seed is reduced to 64 bits.
    """

    def __init__(self, seed: int):
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self._gen = np.random.Generator(np.random.PCG64(self.seed))

    def uniform(self) -> float:
        """Next uniform float in [0, 1)."""
        return float(self._gen.random())

    def __repr__(self) -> str:
        return f"RandomSource(seed={self.seed})"


def sample_index(probabilities: np.ndarray, rng: RandomSource) -> int:
    """Sample an index by inverse CDF; ties broken toward lower index."""
    u = rng.uniform()
    acc = 0.0
    last_live = 0
    for k, p in enumerate(probabilities):
        if p > 0.0:
            last_live = k
        acc += max(float(p), 0.0)
        if u < acc:
            return k
    return last_live  # u landed in the rounding gap above the last bucket


def measure_in_basis(
    state: StateVector, basis: np.ndarray, pair: tuple[int, int], rng: RandomSource
) -> tuple[int, StateVector]:
    """Projective measurement of a pair in an arbitrary orthonormal basis.

    Returns ``(outcome index 0..3, collapsed state)``; the outcome is sampled
    from the Born probabilities using ``rng``.
    """
    _check_pair(state, pair)
    basis = _check_basis(basis)
    mat = _pair_matrix(state, pair)
    amps = basis.conj() @ mat
    probs = np.einsum("kr,kr->k", amps, amps.conj()).real
    if float(np.max(probs)) < DEGENERACY_FLOOR:
        raise DegenerateMeasurementError("all four outcome probabilities are ~0")
    outcome = sample_index(probs, rng)
    prob_k = float(probs[outcome])
    new_mat = np.outer(basis[outcome], amps[outcome]) / np.sqrt(prob_k)
    return outcome, StateVector(state.num_qubits, _pair_unmatrix(state, pair, new_mat))
