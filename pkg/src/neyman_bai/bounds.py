"""Large-deviation rates and misidentification probability bounds.

Rates are exponents ``-(1/T) log P(wrong arm)`` in nats per round.
"""

from __future__ import annotations

import math
from typing import Optional, Sequence

import numpy as np
from scipy.special import ndtr

from .allocation import SolverReport, _arm, _variances, solve_gna
from .model import BanditInstance, ValidationError, best_arm, gaps


def _positive(value: float, name: str) -> float:
    value = float(value)
    if not (value > 0 and math.isfinite(value)):
        raise ValidationError(f"{name} must be positive and finite")
    return value


def worst_case_lower_bound(
    delta_hi: float, variances: Sequence[float], report: Optional[SolverReport] = None
) -> float:
    """Best achievable rate when the best arm and the means are unknown.

    Equals ``delta_hi**2`` times the GNA objective. Pass ``report`` to reuse a
    solve; the same report then gives bit-identical lower and upper bounds.
    """
    delta_hi = _positive(delta_hi, "delta_hi")
    if report is None:
        report = solve_gna(variances)
    return delta_hi**2 * report.objective


def gna_upper_bound(
    delta_lo: float, variances: Sequence[float], report: Optional[SolverReport] = None
) -> float:
    """Rate guaranteed by the GNA-EBA strategy when every gap is at least ``delta_lo``."""
    delta_lo = _positive(delta_lo, "delta_lo")
    if report is None:
        report = solve_gna(variances)
    return delta_lo**2 * report.objective


def uniform_lower_bound(delta_hi: float, variances: Sequence[float], a_star: int) -> float:
    """Rate ceiling when the best arm ``a_star`` is known in advance."""
    delta_hi = _positive(delta_hi, "delta_hi")
    var = _variances(variances)
    a_star = _arm(a_star, var.size)
    rest = math.sqrt(var.sum() - var[a_star])
    return delta_hi**2 / (2.0 * (math.sqrt(var[a_star]) + rest) ** 2)


def _omega_vs_best(instance: BanditInstance, w) -> tuple[np.ndarray, np.ndarray]:
    w = np.asarray(w, dtype=float)
    if w.shape != (instance.K,):
        raise ValidationError(f"weights must have length {instance.K}")
    b = best_arm(instance)
    others = np.delete(np.arange(instance.K), b)
    var = instance.variances
    with np.errstate(divide="ignore"):
        om = var[b] / w[b] + var[others] / w[others]
    return gaps(instance)[others], om


def instance_rate(instance: BanditInstance, w) -> float:
    """``min_a gap_a**2 / (2 Omega(best, a))``: the EBA error exponent under ``w``."""
    g, om = _omega_vs_best(instance, w)
    return float(np.min(g**2 / (2.0 * om)))


def chernoff_misid_bound(instance: BanditInstance, w, T: int) -> float:
    """Union of per-arm Chernoff bounds on the EBA misidentification probability.

    ``min(1, sum_a exp(-T gap_a**2 / (2 Omega(best, a))))``. It is a rigorous
    bound when ``w`` is the realized allocation ``counts / T``.
    """
    if T < 0:
        raise ValidationError("T must be non-negative")
    g, om = _omega_vs_best(instance, w)
    return float(min(1.0, np.sum(np.exp(-T * g**2 / (2.0 * om)))))


def misorder_probability(gap: float, var_best: float, var_other: float, n_best: int, n_other: int) -> float:
    """``P(mean_hat_best <= mean_hat_other)`` for two independent Gaussian sample means.

    The difference of sample means is ``N(gap, var_best/n_best + var_other/n_other)``.
    """
    if n_best < 1 or n_other < 1:
        raise ValidationError("both arms need at least one sample")
    sd = math.sqrt(var_best / n_best + var_other / n_other)
    return float(ndtr(-gap / sd))


def exact_two_arm_misid(instance: BanditInstance, counts: Sequence[int]) -> float:
    """Exact EBA misidentification probability on a two-armed instance with fixed counts."""
    if instance.K != 2:
        raise ValidationError("exact_two_arm_misid needs K == 2")
    n = [int(c) for c in counts]
    if len(n) != 2:
        raise ValidationError("counts must have two entries")
    b = best_arm(instance)
    o = 1 - b
    var = instance.variances
    return misorder_probability(gaps(instance)[o], var[b], var[o], n[b], n[o])
