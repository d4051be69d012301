"""Seeded Monte Carlo estimation of misidentification probabilities.

Seeding: trials are grouped in fixed blocks of ``TRIALS_PER_BLOCK``. Block
``b`` of the cell (strategy, T) draws from

    SeedSequence(entropy=master_seed, spawn_key=(crc32(strategy name), T, b))

so every estimate depends only on the master seed and the cell, never on the
number of workers or the order in which blocks finish. Instances generated
from a rule use ``spawn_key=(INSTANCE_STREAM, K)``.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import re
import zlib
from concurrent.futures import Executor, ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .bounds import chernoff_misid_bound, instance_rate
from .model import BanditInstance, GapBounds, ValidationError, best_arm
from .strategies import (
    ADAPTIVE,
    StrategySpec,
    block_recommendations,
    build_schedule,
    make_strategy_weights,
    sr_trials,
)

log = logging.getLogger(__name__)

TRIALS_PER_BLOCK = 1024
INSTANCE_STREAM = 0x1D5  # spawn-key tag reserved for instance generation

CSV_COLUMNS = (
    "strategy",
    "K",
    "T",
    "trials",
    "p_hat",
    "std_err",
    "complexity",
    "censored",
    "theoretical_rate",
    "master_seed",
    # appended columns
    "chernoff_bound",
    "error",
)

_FIXED_RULE = re.compile(r"^fixed-(?P<x>[-+0-9.eE]+)$")
_UNIFORM_RULE = re.compile(r"^uniform-\[(?P<lo>[-+0-9.eE]+),\s*(?P<hi>[-+0-9.eE]+)\]$")


def _seed_sequence(master_seed: int, *key: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(entropy=int(master_seed) % 2**64, spawn_key=tuple(key))


def strategy_key(name: str) -> int:
    return zlib.crc32(name.encode("utf-8"))


def block_rng(master_seed: int, strategy_name: str, T: int, block: int) -> np.random.Generator:
    """Generator for trial block ``block`` of the cell (strategy, T)."""
    return np.random.Generator(
        np.random.PCG64(_seed_sequence(master_seed, strategy_key(strategy_name), T, block))
    )


def instance_rng(master_seed: int, K: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(_seed_sequence(master_seed, INSTANCE_STREAM, K)))


def generate_instance(
    K: int, mean_rule: str, variance_support: Sequence[float], rng: np.random.Generator
) -> BanditInstance:
    """Random instance with best arm 0 at mean 1.

    ``mean_rule`` is ``"fixed-<x>"`` (every other arm at ``x``) or
    ``"uniform-[lo,hi]"`` (arm 1 at ``lo``, arms 2.. uniform on ``[lo, hi]``).
    Means are drawn before variances, which are i.i.d. uniform on the support.
    """
    K = int(K)
    if K < 2:
        raise ValidationError("need at least two arms")
    lo_var, hi_var = (float(v) for v in variance_support)
    if not 0 < lo_var <= hi_var:
        raise ValidationError("variance support needs 0 < lo <= hi")

    fixed = _FIXED_RULE.match(mean_rule.strip())
    uniform = _UNIFORM_RULE.match(mean_rule.strip())
    if fixed:
        lo = hi = float(fixed["x"])
    elif uniform:
        lo, hi = float(uniform["lo"]), float(uniform["hi"])
        if lo > hi:
            raise ValidationError("mean rule needs lo <= hi")
    else:
        raise ValidationError(f"unknown mean rule {mean_rule!r}")
    # a rule reaching 1 could tie or overtake the best arm
    if not (math.isfinite(lo) and hi < 1.0):
        raise ValidationError("mean rule must keep every other arm below the best arm's mean 1")
    rest = np.full(K - 1, lo) if fixed else np.concatenate([[lo], rng.uniform(lo, hi, K - 2)])

    variances = rng.uniform(lo_var, hi_var, K)
    return BanditInstance(np.concatenate([[1.0], rest]), variances)


@dataclass(frozen=True)
class InstanceGenerator:
    K: int
    mean_rule: str
    variance_support: tuple[float, float]

    def build(self, master_seed: int) -> BanditInstance:
        return generate_instance(self.K, self.mean_rule, self.variance_support, instance_rng(master_seed, self.K))


@dataclass(frozen=True)
class ExperimentConfig:
    """A simulation or design request.

    ``instance`` is absent only for pure design requests that give variances
    without means (``solve`` / ``bounds``).
    """

    variances: tuple[float, ...]
    instance: Optional[BanditInstance] = None
    generator: Optional[InstanceGenerator] = None
    strategies: tuple[StrategySpec, ...] = ()
    budgets: tuple[int, ...] = ()
    trials: int = 1
    master_seed: int = 0
    gap_bounds: Optional[GapBounds] = None
    workers: int = 1

    def __post_init__(self):
        if self.trials < 1:
            raise ValidationError("trials must be >= 1")
        if any(T < 1 for T in self.budgets):
            raise ValidationError("budgets must be positive")
        if any(later <= earlier for earlier, later in zip(self.budgets, self.budgets[1:])):
            raise ValidationError("budgets must be strictly increasing")
        if self.strategies and self.instance is None:
            raise ValidationError("simulation needs means (or a mean rule) as well as variances")
        if self.workers < 1:
            raise ValidationError("workers must be >= 1")

    @property
    def K(self) -> int:
        return len(self.variances)


@dataclass
class SweepResult:
    strategy: str
    K: int
    T: int
    trials: int
    p_hat: float
    std_err: float
    complexity: float
    censored: bool
    theoretical_rate: Optional[float]
    master_seed: int
    chernoff_bound: Optional[float] = None
    error: Optional[str] = None
    counts: Optional[list] = field(default=None, repr=False, compare=False)

    def row(self) -> dict:
        d = asdict(self)
        d.pop("counts")
        return d


def _complexity(p_hat: float, T: int, trials: int) -> tuple[float, bool]:
    if p_hat > 0:
        return -math.log(p_hat) / T, False
    # censored: report the rate implied by the one-sided floor 1/(trials+1)
    return math.log(trials + 1) / T, True


def _blocks(trials: int) -> list[tuple[int, int]]:
    n_blocks = -(-trials // TRIALS_PER_BLOCK)
    return [(b, min(TRIALS_PER_BLOCK, trials - b * TRIALS_PER_BLOCK)) for b in range(n_blocks)]


def _count_block(task) -> int:
    """Misidentifications in one trial block; top-level so process pools can pickle it."""
    kind_counts, instance, T, size, rng_args = task
    rng = block_rng(*rng_args)
    if kind_counts is None:
        rec = sr_trials(instance, T, size, rng)[0]
    else:
        rec = block_recommendations(kind_counts, instance, size, rng)
    return int(np.count_nonzero(rec != best_arm(instance)))


def _map(tasks: list, executor: Optional[Executor]) -> list:
    if executor is None:
        return [_count_block(t) for t in tasks]
    return list(executor.map(_count_block, tasks))


def estimate_misid(
    spec: StrategySpec,
    instance: BanditInstance,
    T: int,
    trials: int,
    master_seed: int,
    weights=None,
    executor: Optional[Executor] = None,
) -> SweepResult:
    """Monte Carlo misidentification frequency of one strategy at one budget.

    ``weights`` skips re-solving the allocation when a sweep already has it;
    SR ignores it.
    """
    T, trials = int(T), int(trials)
    if trials < 1:
        raise ValidationError("trials must be >= 1")
    if weights is None:
        weights = make_strategy_weights(spec, instance)

    adaptive = isinstance(weights, str) and weights == ADAPTIVE
    counts = None if adaptive else build_schedule(weights, T).counts
    tasks = [
        (counts, instance, T, size, (master_seed, spec.name, T, b)) for b, size in _blocks(trials)
    ]
    errors = sum(_map(tasks, executor))

    p_hat = errors / trials
    complexity, censored = _complexity(p_hat, T, trials)
    return SweepResult(
        strategy=spec.name,
        K=instance.K,
        T=T,
        trials=trials,
        p_hat=p_hat,
        std_err=math.sqrt(p_hat * (1.0 - p_hat) / trials),
        complexity=complexity,
        censored=censored,
        theoretical_rate=None if adaptive else instance_rate(instance, weights),
        master_seed=int(master_seed),
        chernoff_bound=None if adaptive else chernoff_misid_bound(instance, counts / T, T),
        counts=None if adaptive else counts.tolist(),
    )


def _failed(spec: StrategySpec, config: ExperimentConfig, T: int, exc: Exception) -> SweepResult:
    return SweepResult(
        strategy=spec.name,
        K=config.K,
        T=T,
        trials=config.trials,
        p_hat=math.nan,
        std_err=math.nan,
        complexity=math.nan,
        censored=False,
        theoretical_rate=None,
        master_seed=config.master_seed,
        error=f"{type(exc).__name__}: {exc}",
    )


def run_sweep(config: ExperimentConfig, workers: Optional[int] = None) -> list[SweepResult]:
    """Every (strategy, T) cell of ``config``, in strategy-major order.

    A failing cell becomes a row with ``error`` set; the rest of the sweep runs.
    """
    workers = config.workers if workers is None else workers
    instance = config.instance
    if instance is None:
        raise ValidationError("sweep needs a bandit instance")
    executor = ProcessPoolExecutor(max_workers=workers) if workers > 1 else None
    results = []
    try:
        for spec in config.strategies:
            try:
                weights = make_strategy_weights(spec, instance)
            except Exception as exc:  # noqa: BLE001 - recorded per cell
                log.warning("strategy %s failed: %s", spec.name, exc)
                results.extend(_failed(spec, config, T, exc) for T in config.budgets)
                continue
            for T in config.budgets:
                try:
                    results.append(
                        estimate_misid(
                            spec, instance, T, config.trials, config.master_seed, weights, executor
                        )
                    )
                except Exception as exc:  # noqa: BLE001 - recorded per cell
                    log.warning("cell %s T=%d failed: %s", spec.name, T, exc)
                    results.append(_failed(spec, config, T, exc))
                log.info("%s T=%d done", spec.name, T)
    finally:
        if executor is not None:
            executor.shutdown()
    return results


def _csv_value(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def results_to_csv(results: Iterable[SweepResult]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in results:
        row = r.row()
        writer.writerow([_csv_value(row[c]) for c in CSV_COLUMNS])
    return buf.getvalue()


def results_to_json(results: Iterable[SweepResult]) -> str:
    rows = []
    for r in results:
        row = r.row()
        rows.append({c: (None if isinstance(row[c], float) and math.isnan(row[c]) else row[c]) for c in CSV_COLUMNS})
    return json.dumps(rows, indent=2) + "\n"
