"""Monte Carlo execution of many rounds and detection statistics.

Seeding is splittable and documented: the seed of round ``i`` of a run is
``splitmix64(master_seed, i)``, where splitmix64 is the standard SplitMix64
finalizer applied to ``master_seed + (i + 1) * 0x9E3779B97F4A7C15`` (mod
2^64).  Curve experiments nest the same scheme: experiment ``r`` of curve
point ``n`` draws its per-round seeds from
``splitmix64(splitmix64(master_seed, n), r)``.  Serial and concurrent
execution therefore see identical per-round streams.

Within one round the uniform stream is consumed in a fixed order: the
attack-selection coin (only for strategies that need one), Alice's
procedure coin, the round's measurement samples in protocol order, and
finally the key-comparison coin.

A compared round counts as a detection when Bob's inferred key differs
from Alice's key; no error-rate thresholding is layered on top.  The
reference curve for the eavesdropper mixtures is ``1 - (3/4)**n`` for
``n`` compared key pairs, equivalently ``1 - (3/4)**(N/2)`` for ``N``
compared bits.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Sequence

from . import bell
from .adversary import AttackStrategy, FourSwapAttack, TailoredAttack, ZlgAttack
from .protocol import Procedure, RoundTranscript, mark_compared, protocol_driver
from .qstate import RandomSource

_MASK64 = 0xFFFFFFFFFFFFFFFF
_GOLDEN = 0x9E3779B97F4A7C15


def splitmix64(master_seed: int, index: int) -> int:
    """Deterministic 64-bit mix of a master seed and a stream index."""
    z = (master_seed + (index + 1) * _GOLDEN) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


@dataclass(frozen=True)
class SimulationConfig:
    """One Monte Carlo run: protocol, attack, coin biases, seeding."""

    protocol: str = "six"
    rounds: int = 1000
    attack: AttackStrategy = field(default_factory=lambda: AttackStrategy("none"))
    procedure_policy: float = 0.5  # probability Alice picks procedure (i)
    test_fraction: float = 0.5  # fraction of rounds publicly compared
    master_seed: int = 0

    def __post_init__(self) -> None:
        if self.protocol not in ("six", "four"):
            raise ValueError(f"unknown protocol {self.protocol!r}")
        if self.rounds < 1:
            raise ValueError("rounds must be >= 1")
        if not 0.0 <= self.procedure_policy <= 1.0:
            raise ValueError("procedure_policy must be a probability")
        if not 0.0 <= self.test_fraction <= 1.0:
            raise ValueError("test_fraction must be a probability")
        if self.protocol not in self.attack.compatible_protocols():
            raise ValueError(
                f"attack {self.attack.kind!r} does not apply to the "
                f"{self.protocol}-qubit protocol"
            )


@dataclass(frozen=True)
class SimulationReport:
    """Aggregate statistics of one run.

    ``empirical_detection_prob`` is the mismatch fraction among compared
    rounds, with a 95% normal-approximation confidence interval;
    ``theoretical_detection_prob`` is the reference ``1 - (3/4)**compared``
    for at least one detection over that many compared pairs under the
    attack mixtures.
    """

    rounds_run: int
    compared: int
    agreement_rate: float
    detected_any: bool
    empirical_detection_prob: float
    detection_ci: tuple[float, float]
    theoretical_detection_prob: float
    eve_key_information: float
    key_bits_per_transmitted_qubit: float

    def __post_init__(self) -> None:
        if self.compared > self.rounds_run:
            raise ValueError("compared rounds cannot exceed rounds run")

    def to_json_dict(self) -> dict:
        return {
            "rounds_run": self.rounds_run,
            "compared": self.compared,
            "agreement_rate": self.agreement_rate,
            "detected_any": self.detected_any,
            "empirical_detection_prob": self.empirical_detection_prob,
            "detection_ci_low": self.detection_ci[0],
            "detection_ci_high": self.detection_ci[1],
            "theoretical_detection_prob": self.theoretical_detection_prob,
            "eve_key_information": self.eve_key_information,
            "key_bits_per_transmitted_qubit": self.key_bits_per_transmitted_qubit,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2, sort_keys=True)


def _binomial_ci(successes: int, trials: int) -> tuple[float, float]:
    if trials == 0:
        return (0.0, 1.0)
    p = successes / trials
    half = 1.96 * (p * (1.0 - p) / trials) ** 0.5
    return (max(0.0, p - half), min(1.0, p + half))


def _attack_picker(strategy: AttackStrategy) -> Callable[[RandomSource], object]:
    """Per-round attack materialization; draws at most one coin from rng."""
    conv = bell.convention()
    if strategy.kind == "none":
        return lambda rng: None
    if strategy.kind == "zlg":
        attack = ZlgAttack(conv)
        return lambda rng: attack
    if strategy.kind == "tailored":
        attack = TailoredAttack(conv, strategy.tailored)
        return lambda rng: attack
    if strategy.kind == "mixed":
        zlg = ZlgAttack(conv)
        tailored = TailoredAttack(conv, strategy.tailored)
        weight = strategy.weight_zlg
        return lambda rng: zlg if rng.uniform() < weight else tailored
    if strategy.kind == "four-swap":
        guesses = {p: FourSwapAttack(conv, p) for p in Procedure}
        return lambda rng: (
            guesses[Procedure.P_I] if rng.uniform() < 0.5 else guesses[Procedure.P_II]
        )
    raise ValueError(f"unknown attack kind {strategy.kind!r}")


def _run_one_round(driver, picker, policy: float, rng: RandomSource) -> RoundTranscript:
    attack = picker(rng)
    procedure = Procedure.P_I if rng.uniform() < policy else Procedure.P_II
    return driver.run_round(procedure, attack, rng)


def run_simulation(config: SimulationConfig) -> SimulationReport:
    """Run ``config.rounds`` independently seeded rounds and aggregate."""
    driver = protocol_driver(bell.convention(), config.protocol)
    picker = _attack_picker(config.attack)

    compared = detected = agreed = eve_informed = 0
    for i in range(config.rounds):
        rng = RandomSource(splitmix64(config.master_seed, i))
        transcript = _run_one_round(driver, picker, config.procedure_policy, rng)
        if rng.uniform() < config.test_fraction:
            transcript = mark_compared(transcript)
            compared += 1
            detected += transcript.detected
        agreed += transcript.bob_inferred_key == transcript.key
        record = transcript.eve_record
        if record is not None and record.inferred_keys == (transcript.key,):
            eve_informed += 1

    return SimulationReport(
        rounds_run=config.rounds,
        compared=compared,
        agreement_rate=agreed / config.rounds,
        detected_any=detected > 0,
        empirical_detection_prob=(detected / compared) if compared else 0.0,
        detection_ci=_binomial_ci(detected, compared),
        theoretical_detection_prob=1.0 - 0.75**compared,
        eve_key_information=eve_informed / config.rounds,
        # Each round transmits two qubits and delivers a two-bit key.
        key_bits_per_transmitted_qubit=1.0,
    )


@dataclass(frozen=True)
class CurvePoint:
    """Detection probability after comparing exactly n key pairs."""

    n: int
    empirical: float
    theoretical: float
    ci_low: float
    ci_high: float


CURVE_COLUMNS = ("n", "empirical", "theoretical", "ci_low", "ci_high")


def curve_to_csv(points: Sequence[CurvePoint]) -> str:
    lines = [",".join(CURVE_COLUMNS)]
    for pt in points:
        lines.append(
            f"{pt.n},{pt.empirical:.6f},{pt.theoretical:.6f},{pt.ci_low:.6f},{pt.ci_high:.6f}"
        )
    return "\n".join(lines) + "\n"


def detection_curve(
    config: SimulationConfig, n_values: Sequence[int], repetitions: int
) -> list[CurvePoint]:
    """Empirical vs theoretical probability of catching the eavesdropper.

    For each ``n``, runs ``repetitions`` independent experiments of exactly
    ``n`` compared rounds under ``config``'s attack and procedure policy;
    an experiment scores as a detection when at least one compared round
    mismatches.  The reference curve is ``1 - (3/4)**n``.
    """
    if repetitions < 100:
        raise ValueError("repetitions must be >= 100")
    if any(n < 0 for n in n_values):
        raise ValueError("n values must be >= 0")
    driver = protocol_driver(bell.convention(), config.protocol)
    picker = _attack_picker(config.attack)

    points = []
    for n in n_values:
        hits = 0
        point_seed = splitmix64(config.master_seed, n)
        for rep in range(repetitions):
            rng = RandomSource(splitmix64(point_seed, rep))
            for _ in range(n):
                transcript = _run_one_round(driver, picker, config.procedure_policy, rng)
                if transcript.bob_inferred_key != transcript.key:
                    hits += 1
                    break
        empirical = hits / repetitions
        ci = _binomial_ci(hits, repetitions)
        points.append(CurvePoint(n, empirical, 1.0 - 0.75**n, ci[0], ci[1]))
    return points


def bits_tested_curve(
    config: SimulationConfig, bit_counts: Sequence[int], repetitions: int
) -> list[CurvePoint]:
    """Detection probability as a function of the number of tested bits.

    Each compared key pair reveals two bits, so ``N`` tested bits means
    ``N/2`` compared pairs; the reference curve is ``1 - (3/4)**(N/2)``.
    ``N`` must be even.
    """
    for n_bits in bit_counts:
        if n_bits < 0 or n_bits % 2:
            raise ValueError(f"bit counts must be even and >= 0, got {n_bits}")
    return detection_curve(config, [n_bits // 2 for n_bits in bit_counts], repetitions)
