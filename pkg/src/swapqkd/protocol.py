"""Round state machines for the two entanglement-swapping key protocols.

Six-qubit protocol: Alice prepares pairs (1,2) and (3,5), Bob prepares
(4,6), all in the state labeled 00.  Qubit 2 travels to Bob and qubit 6 to
Alice.  Alice either Bell-measures directly (procedure i) or first applies
the basis-change gate S to qubit 3 (procedure ii); her (1,3) result is the
key, her (5,6) result is announced publicly together with the procedure.
Bob, applying S to qubit 4 first under procedure ii, Bell-measures (2,4)
and infers the key from his result plus the announcement.

Four-qubit protocol: Alice prepares (1,2) and (3,4) and sends qubits 2 and
4 to Bob.  She either does nothing (procedure I) or applies S to qubit 1
(procedure II), measures (1,3) for the key, and announces the procedure.
Bob, applying S to qubit 2 first under procedure II, measures (2,4); his
result alone determines the key.

Rounds are driven from declarative step plans so that the same sequence
can be executed two ways: sampled with a RandomSource for Monte Carlo
runs, or exhaustively enumerated over every measurement branch for exact
tables and probabilities.  Key-inference tables are derived by exhaustive
enumeration of adversary-free rounds, never assumed in closed form.

Qubits are numbered 1..8 as in the protocol narrative; conversion to the
0-based register happens only at the physics boundary.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from enum import Enum
from functools import lru_cache
from typing import TYPE_CHECKING, Iterable

import numpy as np

from . import qstate
from .bell import LABELS, BellConvention
from .qstate import GATES, RandomSource, StateVector

if TYPE_CHECKING:  # pragma: no cover
    from .adversary import EveRecord

# Branch probabilities in these protocols are multiples of 1/4 per
# measurement; anything below this is numerical dust, not a branch.
PROB_CUTOFF = 1e-9

EXACT_ATOL = 1e-10


class Procedure(Enum):
    """Alice's per-round choice: plain swapping or the S-rotated variant."""

    P_I = "i"
    P_II = "ii"

    @property
    def printed(self) -> str:
        return f"({self.value})"


class AmbiguityError(RuntimeError):
    """A (public, secret) combination is consistent with two keys."""


class MalformedAdversaryError(RuntimeError):
    """An attack violated the channel contract."""


class WrongProtocolError(ValueError):
    """An attack was attached to a round of the other protocol."""


class TableMismatchError(RuntimeError):
    """A reproduced table differs from the expected rows."""

    def __init__(self, message: str, diff: list[str]):
        super().__init__(message + "\n" + "\n".join(diff))
        self.diff = diff


@dataclass(frozen=True)
class Wiring:
    """Role assignment of protocol qubit indices."""

    alice_kept: tuple[int, ...]
    alice_sends: tuple[int, ...]
    bob_kept: tuple[int, ...]
    bob_sends: tuple[int, ...]
    eve_ancillas: tuple[int, ...]
    key_pair: tuple[int, int]
    public_pair: tuple[int, int] | None
    bob_pair: tuple[int, int]


# With Eve present, her ancillas are 7 and 8; the pair Alice publicly
# measures is then physically (5, 2) and Bob's pair is physically (7, 4),
# because Eve swaps her qubit 7 into the Alice->Bob channel and returns
# the captured qubit 2 to Alice.
SIX_WIRING = Wiring(
    alice_kept=(1, 3, 5),
    alice_sends=(2,),
    bob_kept=(4,),
    bob_sends=(6,),
    eve_ancillas=(7, 8),
    key_pair=(1, 3),
    public_pair=(5, 6),
    bob_pair=(2, 4),
)

FOUR_WIRING = Wiring(
    alice_kept=(1, 3),
    alice_sends=(2, 4),
    bob_kept=(),
    bob_sends=(),
    eve_ancillas=(),
    key_pair=(1, 3),
    public_pair=None,
    bob_pair=(2, 4),
)


# --- step plans -----------------------------------------------------------


@dataclass(frozen=True)
class GateStep:
    qubit: int
    matrix: np.ndarray


@dataclass(frozen=True)
class MeasureStep:
    name: str
    pair: tuple[int, int]


@dataclass(frozen=True)
class ConditionalGateStep:
    """Gate on one qubit chosen by the outcome of an earlier measurement."""

    qubit: int
    on: str
    gates: tuple[tuple[str, np.ndarray], ...]  # outcome label -> matrix

    def gate_for(self, label: str) -> np.ndarray:
        return dict(self.gates)[label]


Step = GateStep | MeasureStep | ConditionalGateStep


@dataclass(frozen=True)
class TransitPlan:
    """What an eavesdropper does while qubits are in flight.

    ``steps`` run at the interception point, before any announcement
    exists; the channel structurally cannot leak Alice's procedure choice
    to them.  ``ancilla_pairs`` are extra qubit pairs prepared in the
    labeled-00 state and appended to the register.  For the six-qubit
    protocol ``alice_receives``/``bob_receives`` name the physical qubits
    delivered in place of the honest 6 and 2.
    """

    steps: tuple[Step, ...] = ()
    ancilla_pairs: tuple[tuple[int, int], ...] = ()
    alice_receives: int = 6
    bob_receives: int = 2


_NO_ATTACK_TRANSIT = TransitPlan()


@dataclass(frozen=True)
class Plan:
    """A fully wired round: register size, initial pairs, ordered steps."""

    num_qubits: int
    pairs: tuple[tuple[int, int], ...]
    steps: tuple[Step, ...]
    public_pair: tuple[int, int] | None
    events: tuple[str, ...]


def _touched_qubits(step: Step) -> tuple[int, ...]:
    if isinstance(step, GateStep):
        return (step.qubit,)
    if isinstance(step, MeasureStep):
        return step.pair
    return (step.qubit,)


def _validate_transit(transit: TransitPlan, protocol: str) -> None:
    base = 6 if protocol == "six" else 4
    in_flight = {2, 6} if protocol == "six" else {2, 4}
    ancilla = [q for pair in transit.ancilla_pairs for q in pair]
    if sorted(ancilla) != list(range(base + 1, base + 1 + len(ancilla))):
        raise MalformedAdversaryError(
            f"ancilla pairs must extend the register contiguously, got {transit.ancilla_pairs}"
        )
    allowed = in_flight | set(ancilla)
    reserved = {"key", "public", "secret"}
    for step in transit.steps:
        bad = set(_touched_qubits(step)) - allowed
        if bad:
            raise MalformedAdversaryError(f"attack touches protected qubits {sorted(bad)}")
        if isinstance(step, MeasureStep) and step.name in reserved:
            raise MalformedAdversaryError(f"attack reuses reserved measurement name {step.name!r}")
    if protocol == "six":
        for q in (transit.alice_receives, transit.bob_receives):
            if q not in allowed:
                raise MalformedAdversaryError(f"attack forwards a protected qubit {q}")
        if transit.alice_receives == transit.bob_receives:
            raise MalformedAdversaryError("attack forwards the same qubit to both parties")


def build_six_plan(
    conv: BellConvention, procedure: Procedure, transit: TransitPlan | None
) -> Plan:
    transit = transit or _NO_ATTACK_TRANSIT
    _validate_transit(transit, "six")
    pairs = ((1, 2), (3, 5), (4, 6)) + transit.ancilla_pairs
    num_qubits = 6 + 2 * len(transit.ancilla_pairs)

    steps: list[Step] = list(transit.steps)
    events = [
        "alice:prepare pairs (1,2) and (3,5)",
        "bob:prepare pair (4,6)",
        "channel:alice sends qubit 2, bob sends qubit 6",
    ]
    if transit.steps or transit.ancilla_pairs:
        events.append("eve:intercept in-flight qubits")
    if procedure is Procedure.P_II:
        steps.append(GateStep(3, GATES["S"]))
        events.append("alice:apply S to qubit 3")
    steps.append(MeasureStep("key", (1, 3)))
    events.append("alice:measure key pair (1,3)")
    public_pair = (5, transit.alice_receives)
    steps.append(MeasureStep("public", public_pair))
    events.append(f"alice:measure public pair (5,{transit.alice_receives})")
    events.append("alice:announce procedure and public result")
    if procedure is Procedure.P_II:
        steps.append(GateStep(4, GATES["S"]))
        events.append("bob:apply S to qubit 4")
    steps.append(MeasureStep("secret", (transit.bob_receives, 4)))
    events.append(f"bob:measure secret pair ({transit.bob_receives},4)")
    events.append("bob:infer key")
    return Plan(num_qubits, pairs, tuple(steps), public_pair, tuple(events))


def build_four_plan(
    conv: BellConvention, procedure: Procedure, transit: TransitPlan | None
) -> Plan:
    transit = transit or _NO_ATTACK_TRANSIT
    _validate_transit(transit, "four")
    pairs = ((1, 2), (3, 4)) + transit.ancilla_pairs
    num_qubits = 4 + 2 * len(transit.ancilla_pairs)

    steps: list[Step] = list(transit.steps)
    events = [
        "alice:prepare pairs (1,2) and (3,4)",
        "channel:alice sends qubits 2 and 4",
    ]
    if transit.steps or transit.ancilla_pairs:
        events.append("eve:intercept in-flight qubits")
    if procedure is Procedure.P_II:
        steps.append(GateStep(1, GATES["S"]))
        events.append("alice:apply S to qubit 1")
    steps.append(MeasureStep("key", (1, 3)))
    events.append("alice:measure key pair (1,3)")
    events.append("alice:announce procedure")
    if procedure is Procedure.P_II:
        steps.append(GateStep(2, GATES["S"]))
        events.append("bob:apply S to qubit 2")
    steps.append(MeasureStep("secret", (2, 4)))
    events.append("bob:measure secret pair (2,4)")
    events.append("bob:infer key")
    return Plan(num_qubits, pairs, tuple(steps), None, tuple(events))


# --- plan execution -------------------------------------------------------


def _initial_state(conv: BellConvention, plan: Plan) -> StateVector:
    vec = conv.states["00"]
    return qstate.prepare_pairs(
        plan.num_qubits, [(i - 1, j - 1, vec) for i, j in plan.pairs]
    )


def _engine_pair(pair: tuple[int, int]) -> tuple[int, int]:
    return (pair[0] - 1, pair[1] - 1)


def run_plan(
    conv: BellConvention, plan: Plan, rng: RandomSource, initial: StateVector | None = None
) -> tuple[dict[str, str], StateVector]:
    """Execute a plan once, sampling measurement outcomes with ``rng``."""
    state = initial if initial is not None else _initial_state(conv, plan)
    outcomes: dict[str, str] = {}
    basis = conv.basis_matrix
    for step in plan.steps:
        if isinstance(step, GateStep):
            state = qstate.apply_gate(state, step.matrix, step.qubit - 1)
        elif isinstance(step, ConditionalGateStep):
            state = qstate.apply_gate(state, step.gate_for(outcomes[step.on]), step.qubit - 1)
        else:
            idx, state = qstate.measure_in_basis(state, basis, _engine_pair(step.pair), rng)
            outcomes[step.name] = LABELS[idx]
    return outcomes, state


def enumerate_plan(
    conv: BellConvention, plan: Plan, initial: StateVector | None = None
) -> list[tuple[float, dict[str, str]]]:
    """All measurement branches of a plan with their exact probabilities."""
    basis = conv.basis_matrix
    start = initial if initial is not None else _initial_state(conv, plan)
    branches: list[tuple[float, dict[str, str]]] = []

    def walk(state: StateVector, step_idx: int, prob: float, outcomes: dict[str, str]) -> None:
        if step_idx == len(plan.steps):
            branches.append((prob, outcomes))
            return
        step = plan.steps[step_idx]
        if isinstance(step, GateStep):
            walk(qstate.apply_gate(state, step.matrix, step.qubit - 1), step_idx + 1, prob, outcomes)
        elif isinstance(step, ConditionalGateStep):
            matrix = step.gate_for(outcomes[step.on])
            walk(qstate.apply_gate(state, matrix, step.qubit - 1), step_idx + 1, prob, outcomes)
        else:
            pair = _engine_pair(step.pair)
            probs = qstate.basis_probabilities(state, basis, pair)
            for k, p in enumerate(probs):
                if p <= PROB_CUTOFF:
                    continue
                _, collapsed = qstate.collapse_onto(state, basis, pair, k)
                walk(collapsed, step_idx + 1, prob * float(p), {**outcomes, step.name: LABELS[k]})

    walk(start, 0, 1.0, {})
    return branches


# --- key inference --------------------------------------------------------


@dataclass(frozen=True)
class InferenceTable:
    """Bob's key inference, derived by exhaustive adversary-free simulation.

    Six-qubit entries are keyed (public, secret); four-qubit entries are
    keyed by secret alone.
    """

    protocol: str
    procedure: Procedure
    entries: tuple[tuple[tuple[str, ...], str], ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "_map", dict(self.entries))

    def infer(self, secret: str, public: str | None = None) -> str:
        key = (public, secret) if self.protocol == "six" else (secret,)
        table: dict = self._map  # type: ignore[attr-defined]
        if key not in table:
            raise KeyError(f"no inference entry for {key}")
        return table[key]

    def as_dict(self) -> dict[tuple[str, ...], str]:
        return dict(self.entries)


def derive_inference_table(
    conv: BellConvention, protocol: str, procedure: Procedure
) -> InferenceTable:
    """Build the inference table from every adversary-free branch."""
    if protocol == "six":
        plan = build_six_plan(conv, procedure, None)
    elif protocol == "four":
        plan = build_four_plan(conv, procedure, None)
    else:
        raise ValueError(f"unknown protocol {protocol!r}")
    mapping: dict[tuple[str, ...], str] = {}
    for _prob, outcome in enumerate_plan(conv, plan):
        obs = (
            (outcome["public"], outcome["secret"])
            if protocol == "six"
            else (outcome["secret"],)
        )
        key = outcome["key"]
        if mapping.get(obs, key) != key:
            raise AmbiguityError(
                f"{protocol}/{procedure.printed}: observation {obs} is consistent "
                f"with keys {mapping[obs]} and {key}; the protocol could not work"
            )
        mapping[obs] = key
    entries = tuple(sorted(mapping.items()))
    return InferenceTable(protocol, procedure, entries)


# --- transcripts ----------------------------------------------------------


@dataclass(frozen=True)
class RoundTranscript:
    """Everything observable about one protocol round."""

    protocol: str
    procedure: Procedure
    key: str
    public_result: str | None
    bob_secret: str
    bob_inferred_key: str
    eve_record: "EveRecord | None" = None
    compared: bool = False
    detected: bool = False
    events: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.detected and not self.compared:
            raise ValueError("a round cannot be detected without being compared")

    def to_json_dict(self) -> dict:
        eve = None
        if self.eve_record is not None:
            eve = {
                "attack": self.eve_record.attack,
                "secret": self.eve_record.secret,
                "transformation": self.eve_record.transformation,
                "inferred_keys": list(self.eve_record.inferred_keys),
            }
        return {
            "protocol": self.protocol,
            "procedure": self.procedure.value,
            "key": self.key,
            "public_result": self.public_result,
            "bob_secret": self.bob_secret,
            "bob_inferred_key": self.bob_inferred_key,
            "eve": eve,
            "compared": self.compared,
            "detected": self.detected,
        }


def mark_compared(transcript: RoundTranscript) -> RoundTranscript:
    """Alice and Bob publicly compare this round's key bits."""
    return replace(
        transcript,
        compared=True,
        detected=transcript.bob_inferred_key != transcript.key,
    )


TABLE1_COLUMNS = ("procedure", "key", "public", "secret", "inferred")


def transcripts_to_csv(transcripts: Iterable[RoundTranscript]) -> str:
    """CSV export in the outcome-table column order."""
    lines = [",".join(TABLE1_COLUMNS)]
    for t in transcripts:
        lines.append(
            ",".join(
                [t.procedure.printed, t.key, t.public_result or "", t.bob_secret, t.bob_inferred_key]
            )
        )
    return "\n".join(lines) + "\n"


def transcripts_to_jsonl(transcripts: Iterable[RoundTranscript]) -> str:
    """One JSON object per round, newline separated."""
    return "".join(json.dumps(t.to_json_dict(), sort_keys=True) + "\n" for t in transcripts)


# --- protocol drivers -----------------------------------------------------


class _ProtocolBase:
    name: str

    def __init__(self, conv: BellConvention):
        self.conv = conv
        self.inference = {
            p: derive_inference_table(conv, self.name, p) for p in Procedure
        }
        self._plans: dict[tuple, Plan] = {}
        self._initials: dict[tuple, StateVector] = {}

    def _build(self, procedure: Procedure, transit: TransitPlan | None) -> Plan:
        raise NotImplementedError

    def _plan_for(self, procedure: Procedure, attack) -> Plan:
        key = (procedure, attack.cache_key if attack is not None else None)
        if key not in self._plans:
            transit = None
            if attack is not None:
                if attack.protocol != self.name:
                    raise WrongProtocolError(
                        f"attack {attack.kind!r} targets the {attack.protocol}-qubit "
                        f"protocol, not {self.name}"
                    )
                transit = attack.transit_plan()
            self._plans[key] = self._build(procedure, transit)
        return self._plans[key]

    def _initial_for(self, plan: Plan) -> StateVector:
        key = (plan.num_qubits, plan.pairs)
        if key not in self._initials:
            self._initials[key] = _initial_state(self.conv, plan)
        return self._initials[key]

    def enumerate_branches(
        self, procedure: Procedure, attack=None
    ) -> list[tuple[float, dict[str, str]]]:
        """Exact distribution over (eve?, key, public?, secret) outcomes."""
        plan = self._plan_for(procedure, attack)
        return enumerate_plan(self.conv, plan, self._initial_for(plan))

    def run_round(self, procedure: Procedure, attack, rng: RandomSource) -> RoundTranscript:
        plan = self._plan_for(procedure, attack)
        outcomes, state = run_plan(self.conv, plan, rng, self._initial_for(plan))
        public = outcomes.get("public")
        secret = outcomes["secret"]
        inferred = self.inference[procedure].infer(secret, public)
        eve_record = None
        if attack is not None:
            eve_record = attack.eve_record(outcomes["eve"], procedure, public)
        return RoundTranscript(
            protocol=self.name,
            procedure=procedure,
            key=outcomes["key"],
            public_result=public,
            bob_secret=secret,
            bob_inferred_key=inferred,
            eve_record=eve_record,
            events=plan.events,
        )

    def key_distribution(self, procedure: Procedure, attack=None) -> np.ndarray:
        """Exact marginal probability of each key label."""
        probs = dict.fromkeys(LABELS, 0.0)
        for prob, outcome in self.enumerate_branches(procedure, attack):
            probs[outcome["key"]] += prob
        return np.array([probs[lab] for lab in LABELS])


class SixQubitProtocol(_ProtocolBase):
    name = "six"
    wiring = SIX_WIRING

    def _build(self, procedure: Procedure, transit: TransitPlan | None) -> Plan:
        return build_six_plan(self.conv, procedure, transit)


class FourQubitProtocol(_ProtocolBase):
    name = "four"
    wiring = FOUR_WIRING

    def _build(self, procedure: Procedure, transit: TransitPlan | None) -> Plan:
        return build_four_plan(self.conv, procedure, transit)


@lru_cache(maxsize=8)
def six_qubit_protocol(conv: BellConvention) -> SixQubitProtocol:
    return SixQubitProtocol(conv)


@lru_cache(maxsize=8)
def four_qubit_protocol(conv: BellConvention) -> FourQubitProtocol:
    return FourQubitProtocol(conv)


def protocol_driver(conv: BellConvention, protocol: str) -> _ProtocolBase:
    if protocol == "six":
        return six_qubit_protocol(conv)
    if protocol == "four":
        return four_qubit_protocol(conv)
    raise ValueError(f"unknown protocol {protocol!r}")


def run_six_qubit_round(
    conv: BellConvention, procedure: Procedure, adversary, rng: RandomSource
) -> RoundTranscript:
    return six_qubit_protocol(conv).run_round(procedure, adversary, rng)


def run_four_qubit_round(
    conv: BellConvention, procedure: Procedure, adversary, rng: RandomSource
) -> RoundTranscript:
    return four_qubit_protocol(conv).run_round(procedure, adversary, rng)


# --- published outcome table ----------------------------------------------

# The adversary-free six-qubit outcome table, restricted to key 00: columns
# procedure, key, public, secret, inferred key.  Rows are ordered by
# (procedure, secret), which is the published order.
EXPECTED_TABLE1: tuple[tuple[str, str, str, str, str], ...] = (
    ("(i)", "00", "00", "00", "00"),
    ("(i)", "00", "01", "01", "00"),
    ("(i)", "00", "10", "10", "00"),
    ("(i)", "00", "11", "11", "00"),
    ("(ii)", "00", "00", "00", "00"),
    ("(ii)", "00", "10", "01", "00"),
    ("(ii)", "00", "01", "10", "00"),
    ("(ii)", "00", "11", "11", "00"),
)


def six_qubit_outcome_rows(conv: BellConvention) -> list[tuple[str, str, str, str, str]]:
    """All distinct adversary-free six-qubit rows with key 00."""
    driver = six_qubit_protocol(conv)
    rows = set()
    for procedure in Procedure:
        table = driver.inference[procedure]
        for prob, out in driver.enumerate_branches(procedure):
            if out["key"] != "00":
                continue
            inferred = table.infer(out["secret"], out["public"])
            rows.add((procedure.printed, out["key"], out["public"], out["secret"], inferred))
    return sorted(rows, key=lambda r: (r[0], r[3], r[2]))


def reproduce_table1(conv: BellConvention) -> list[tuple[str, str, str, str, str]]:
    """Reproduce the adversary-free outcome table; raise on any drift."""
    rows = six_qubit_outcome_rows(conv)
    if tuple(rows) != EXPECTED_TABLE1:
        diff = _row_diff(EXPECTED_TABLE1, rows)
        raise TableMismatchError("six-qubit outcome table mismatch", diff)
    return rows


def _row_diff(expected: Iterable[tuple], actual: Iterable[tuple]) -> list[str]:
    diff = []
    expected, actual = list(expected), list(actual)
    for idx in range(max(len(expected), len(actual))):
        want = expected[idx] if idx < len(expected) else None
        got = actual[idx] if idx < len(actual) else None
        if want != got:
            diff.append(f"row {idx + 1}: expected {want}, got {got}")
    return diff
