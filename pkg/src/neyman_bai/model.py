"""Gaussian bandit instances and gap bookkeeping."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np


class ValidationError(ValueError):
    """An input violates a model invariant."""


def _frozen(values: Sequence[float], name: str) -> np.ndarray:
    arr = np.array(values, dtype=float)
    if arr.ndim != 1:
        raise ValidationError(f"{name} must be a 1-d sequence")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class BanditInstance:
    """K-armed Gaussian bandit: arm ``a`` yields ``N(means[a], variances[a])``.

    Arms are indexed from 0.
    """

    means: np.ndarray
    variances: np.ndarray

    def __post_init__(self):
        means = _frozen(self.means, "means")
        variances = _frozen(self.variances, "variances")
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "variances", variances)

        if means.size < 2:
            raise ValidationError("need at least two arms")
        if variances.size != means.size:
            raise ValidationError(
                f"means has {means.size} entries but variances has {variances.size}"
            )
        if not np.all(np.isfinite(means)):
            raise ValidationError("means must be finite")
        if not np.all(np.isfinite(variances)):
            raise ValidationError("variance must be finite")
        if np.any(variances <= 0):
            raise ValidationError("variance must be > 0")
        top = means.max()
        if np.count_nonzero(means == top) > 1:
            raise ValidationError("best arm not unique")

    @property
    def K(self) -> int:
        return int(self.means.size)

    @property
    def stds(self) -> np.ndarray:
        return np.sqrt(self.variances)

    def __eq__(self, other):
        if not isinstance(other, BanditInstance):
            return NotImplemented
        return np.array_equal(self.means, other.means) and np.array_equal(
            self.variances, other.variances
        )

    def __hash__(self):
        return hash((self.means.tobytes(), self.variances.tobytes()))

    def __repr__(self):
        return f"BanditInstance(means={self.means.tolist()}, variances={self.variances.tolist()})"


@dataclass(frozen=True)
class GapBounds:
    """Assumed range ``[delta_lo, delta_hi]`` for every suboptimal gap."""

    delta_lo: float
    delta_hi: float

    def __post_init__(self):
        lo, hi = float(self.delta_lo), float(self.delta_hi)
        if not (np.isfinite(lo) and np.isfinite(hi)):
            raise ValidationError("gap bounds must be finite")
        if not 0 < lo <= hi:
            raise ValidationError("gap bounds need 0 < delta_lo <= delta_hi")
        object.__setattr__(self, "delta_lo", lo)
        object.__setattr__(self, "delta_hi", hi)


def best_arm(instance: BanditInstance) -> int:
    """Index of the arm with the highest mean."""
    # uniqueness is enforced at construction
    return int(np.argmax(instance.means))


def gaps(instance: BanditInstance) -> np.ndarray:
    """Per-arm gap ``mu[best] - mu[a]``; the best arm's entry is exactly 0."""
    return instance.means[best_arm(instance)] - instance.means


def validate_gap_bounds(instance: BanditInstance, bounds: GapBounds) -> bool:
    """True iff every suboptimal gap lies inside ``[delta_lo, delta_hi]``.

    Inconsistent bounds are reported, not raised: the bound formulas stay
    computable either way.
    """
    g = np.delete(gaps(instance), best_arm(instance))
    return bool(np.all((g >= bounds.delta_lo) & (g <= bounds.delta_hi)))
