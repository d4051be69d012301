"""Fixed-budget strategies: block allocation schedules, EBA, and Successive Rejects.

Trial kernels are vectorized over a batch of independent trials that share one
``numpy.random.Generator``; the single-trial helpers are batches of one.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence, Union

import numpy as np

from .allocation import check_weights, solve_gna, solve_h_gna, solve_oo
from .model import BanditInstance, ValidationError

GNA_EBA = "gna_eba"
H_GNA_EBA = "h_gna_eba"
UNIFORM_EBA = "uniform_eba"
SR = "sr"
OO_EBA = "oo_eba"
KINDS = (GNA_EBA, H_GNA_EBA, UNIFORM_EBA, SR, OO_EBA)

ADAPTIVE = "adaptive"

# cap on standard normals materialized at once by the trial kernels
_DRAW_CHUNK = 1 << 22
# boundaries within this of an integer are snapped before taking the ceiling
_CEIL_SNAP = 1e-9


class ScheduleWarning(UserWarning):
    """Some arm receives no samples under the block schedule."""


@dataclass(frozen=True)
class StrategySpec:
    """A strategy by kind; ``conjectured_arm`` (0-based) is set only for H-GNA-EBA."""

    kind: str
    conjectured_arm: Optional[int] = None
    variances_known: bool = True

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValidationError(f"unknown strategy kind {self.kind!r}")
        if (self.kind == H_GNA_EBA) != (self.conjectured_arm is not None):
            raise ValidationError("conjectured_arm is required for h_gna_eba and only for it")
        if self.conjectured_arm is not None and self.conjectured_arm < 0:
            raise ValidationError("conjectured_arm must be non-negative")

    @property
    def name(self) -> str:
        """Config/CSV name; the conjectured arm is written 1-based."""
        if self.kind == H_GNA_EBA:
            return f"{H_GNA_EBA}:{self.conjectured_arm + 1}"
        return self.kind

    @classmethod
    def parse(cls, name: str) -> "StrategySpec":
        kind, sep, arm = name.strip().partition(":")
        if kind == H_GNA_EBA:
            if not sep or not arm.strip().isdigit() or int(arm) < 1:
                raise ValidationError(f"h_gna_eba needs a 1-based arm, as in 'h_gna_eba:1'; got {name!r}")
            return cls(H_GNA_EBA, int(arm) - 1)
        if sep:
            raise ValidationError(f"strategy {kind!r} takes no argument")
        return cls(kind)


@dataclass(frozen=True)
class AllocationSchedule:
    """Contiguous blocks of rounds, arm 0 first; ``counts`` sums to ``budget``."""

    counts: np.ndarray
    budget: int

    @property
    def empty_arms(self) -> list[int]:
        return [int(a) for a in np.flatnonzero(self.counts == 0)]

    def arm_at(self, t: int) -> int:
        """Arm pulled in round ``t`` (1-based, as rounds are counted)."""
        if not 1 <= t <= self.budget:
            raise ValidationError(f"round {t} outside 1..{self.budget}")
        return int(np.searchsorted(np.cumsum(self.counts), t))


@dataclass(frozen=True)
class TrialOutcome:
    recommended: int
    sample_means: np.ndarray
    counts: np.ndarray


def build_schedule(w: Sequence[float], T: int) -> AllocationSchedule:
    """Block schedule: arm ``a`` ends at round ``ceil(T * sum(w[:a+1]))``, the last at ``T``."""
    w = check_weights(w)
    T = int(T)
    if T < 1:
        raise ValidationError("budget T must be positive")
    raw = np.cumsum(w)[:-1] * T
    snapped = np.where(np.abs(raw - np.round(raw)) < _CEIL_SNAP, np.round(raw), raw)
    ends = np.minimum(np.ceil(snapped), T).astype(np.int64)
    ends = np.append(ends, T)
    counts = np.diff(ends, prepend=0)
    schedule = AllocationSchedule(counts=counts, budget=T)
    if schedule.empty_arms:
        warnings.warn(
            f"arms {schedule.empty_arms} get no samples at T={T}; EBA will skip them",
            ScheduleWarning,
            stacklevel=2,
        )
    return schedule


def eba_recommend(sample_means: Sequence[float], counts: Sequence[int]) -> int:
    """Empirical best arm among sampled arms; ties go to the lowest index."""
    means = np.asarray(sample_means, dtype=float)
    counts = np.asarray(counts)
    if not np.any(counts >= 1):
        raise ValidationError("no arm has been sampled")
    return int(np.argmax(np.where(counts >= 1, means, -np.inf)))


def _normal_sums(rng: np.random.Generator, n_rows: int, n_cols: int) -> np.ndarray:
    """Row sums of an (n_rows, n_cols) block of standard normals, drawn in column chunks."""
    total = np.zeros(n_rows)
    step = max(1, _DRAW_CHUNK // max(n_rows, 1))
    for start in range(0, n_cols, step):
        total += rng.standard_normal((n_rows, min(step, n_cols - start))).sum(axis=1)
    return total


def block_sample_means(
    counts: Sequence[int], instance: BanditInstance, n_trials: int, rng: np.random.Generator
) -> np.ndarray:
    """Sample means of ``n_trials`` independent runs of a fixed schedule, shape (n, K).

    Arm ``a`` contributes ``counts[a]`` Gaussian outcomes per trial; unsampled
    arms are NaN.
    """
    counts = np.asarray(counts, dtype=np.int64)
    means = np.full((n_trials, instance.K), np.nan)
    for a in range(instance.K):
        c = int(counts[a])
        if c == 0:
            continue
        z = _normal_sums(rng, n_trials, c)
        means[:, a] = instance.means[a] + instance.stds[a] * z / c
    return means


def block_recommendations(
    counts: Sequence[int], instance: BanditInstance, n_trials: int, rng: np.random.Generator
) -> np.ndarray:
    """EBA recommendation of each of ``n_trials`` runs of a fixed schedule."""
    means = block_sample_means(counts, instance, n_trials, rng)
    return np.argmax(np.where(np.isnan(means), -np.inf, means), axis=1)


def run_block_strategy(
    w: Sequence[float], instance: BanditInstance, T: int, rng: np.random.Generator
) -> TrialOutcome:
    """One trial of a fixed-ratio EBA strategy (GNA-EBA and its relatives)."""
    schedule = build_schedule(w, T)
    means = block_sample_means(schedule.counts, instance, 1, rng)[0]
    return TrialOutcome(
        recommended=eba_recommend(means, schedule.counts),
        sample_means=means,
        counts=schedule.counts,
    )


def sr_phase_lengths(K: int, T: int) -> np.ndarray:
    """Cumulative per-arm pulls ``n_1..n_{K-1}`` at the end of each SR phase."""
    if T < K:
        raise ValidationError(f"successive rejects needs T >= K (got T={T}, K={K})")
    # exact rationals: float noise must not push an integer phase length up by one
    log_bar = Fraction(1, 2) + sum(Fraction(1, i) for i in range(2, K + 1))
    return np.array(
        [math.ceil(Fraction(T - K) / (log_bar * (K + 1 - k))) for k in range(1, K)],
        dtype=np.int64,
    )


def sr_trials(instance: BanditInstance, T: int, n_trials: int, rng: np.random.Generator):
    """Run Successive Rejects ``n_trials`` times.

    Each phase pulls every surviving arm up to the phase's cumulative count,
    then drops the surviving arm with the lowest sample mean (on ties, the
    highest index goes). Outcomes are drawn for every arm in every phase so
    the random stream does not depend on which arms survive.

    Returns:
        (survivor per trial, sample means (n, K), pull counts (n, K))
    """
    K = instance.K
    lengths = sr_phase_lengths(K, T)
    sums = np.zeros((n_trials, K))
    pulls = np.zeros((n_trials, K), dtype=np.int64)
    active = np.ones((n_trials, K), dtype=bool)
    rows = np.arange(n_trials)
    prev = 0
    for n_k in lengths:
        add = int(n_k) - prev
        prev = int(n_k)
        for a in range(K):
            if add == 0:
                break
            z = _normal_sums(rng, n_trials, add)
            draws = add * instance.means[a] + instance.stds[a] * z
            sums[:, a] += np.where(active[:, a], draws, 0.0)
            pulls[:, a] += np.where(active[:, a], add, 0)
        with np.errstate(invalid="ignore", divide="ignore"):
            means = np.where(pulls > 0, sums / np.maximum(pulls, 1), -np.inf)
        # reversed argmin picks the highest index among tied minima
        masked = np.where(active, means, np.inf)[:, ::-1]
        worst = K - 1 - np.argmin(masked, axis=1)
        active[rows, worst] = False
    survivor = np.argmax(active, axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        means = np.where(pulls > 0, sums / np.maximum(pulls, 1), np.nan)
    return survivor, means, pulls


def successive_rejects(instance: BanditInstance, T: int, rng: np.random.Generator) -> TrialOutcome:
    """One trial of Successive Rejects; its pulls never exceed ``T``."""
    survivor, means, pulls = sr_trials(instance, T, 1, rng)
    return TrialOutcome(recommended=int(survivor[0]), sample_means=means[0], counts=pulls[0])


def make_strategy_weights(spec: StrategySpec, instance: BanditInstance) -> Union[np.ndarray, str]:
    """Target allocation of a fixed-ratio strategy, or ``ADAPTIVE`` for SR."""
    if spec.kind == GNA_EBA:
        return solve_gna(instance.variances).weights
    if spec.kind == H_GNA_EBA:
        if spec.conjectured_arm >= instance.K:
            raise ValidationError(
                f"conjectured arm {spec.conjectured_arm + 1} out of range for K={instance.K}"
            )
        return solve_h_gna(instance.variances, spec.conjectured_arm)
    if spec.kind == UNIFORM_EBA:
        return np.full(instance.K, 1.0 / instance.K)
    if spec.kind == OO_EBA:
        return solve_oo(instance).weights
    return ADAPTIVE
