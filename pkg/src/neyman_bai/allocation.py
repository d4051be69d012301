"""Target allocation ratios over the probability simplex.

Every max-min program here has the form

    maximize_w  min_p  1 / (2 * s_p * Omega_p(w)),
    Omega_p(w) = var[i_p] / w[i_p] + var[j_p] / w[j_p],

over a set of arm pairs ``p = (i_p, j_p)`` with positive pair scales ``s_p``
(1 for the worst-case program, ``1 / gap**2`` for the known-instance one).
Omega is homogeneous of degree -1 in ``w``, so with ``v = M * w`` and
``x = 1 / v`` the program is equivalent to

    minimize  sum_i 1 / x_i   subject to   G x <= 1,

where row ``p`` of ``G`` holds ``s_p * var[i_p]`` and ``s_p * var[j_p]``.
That problem has a strictly convex objective and linear constraints, so its
optimum is unique; :func:`solve_minimax` finds it with a primal active-set
Newton method and maps it back to ``w = v / sum(v)``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .model import BanditInstance, ValidationError, best_arm, gaps

WEIGHT_SUM_TOL = 1e-12

_FACE_TOL = 1e-9
_MULTIPLIER_TOL = 1e-12
_BLOCK_TOL = 1e-10
_POLISH_STEPS = 3
_MAX_RECENTER = 100
_REFINE_RADIUS = {2: 60, 3: 60, 4: 12}


class SolverError(RuntimeError):
    """The allocation solver failed to reach its tolerance."""


@dataclass(frozen=True)
class SolverReport:
    weights: np.ndarray
    objective: float
    iterations: int
    converged: bool
    residual: float

    def to_dict(self) -> dict:
        return {
            "weights": self.weights.tolist(),
            "objective": self.objective,
            "converged": self.converged,
            "iterations": self.iterations,
        }


def _variances(variances: Sequence[float]) -> np.ndarray:
    var = np.asarray(variances, dtype=float)
    if var.ndim != 1 or var.size < 2:
        raise ValidationError("need at least two variances")
    if not np.all(np.isfinite(var)) or np.any(var <= 0):
        raise ValidationError("variance must be > 0")
    return var


def _arm(index: int, K: int) -> int:
    if not 0 <= int(index) < K:
        raise ValidationError(f"arm index {index} out of range for K={K}")
    return int(index)


def check_weights(w: Sequence[float], K: Optional[int] = None) -> np.ndarray:
    """Validate a point of the open simplex and return it as an array."""
    w = np.asarray(w, dtype=float)
    if w.ndim != 1 or (K is not None and w.size != K):
        raise ValidationError(f"weights must be a vector of length {K}")
    if np.any(~np.isfinite(w)) or np.any(w <= 0) or np.any(w >= 1):
        raise ValidationError("weights must lie strictly inside (0, 1)")
    if abs(w.sum() - 1.0) > WEIGHT_SUM_TOL:
        raise ValidationError(f"weights sum to {w.sum()!r}, not 1")
    return w


def omega(w: Sequence[float], variances: Sequence[float], i: int, j: int) -> float:
    """Pairwise variance cost ``var[i]/w[i] + var[j]/w[j]``."""
    if i == j:
        raise ValidationError("omega needs two distinct arms")
    w = np.asarray(w, dtype=float)
    var = np.asarray(variances, dtype=float)
    return float(var[i] / w[i] + var[j] / w[j])


def all_pairs(K: int) -> np.ndarray:
    """Every unordered arm pair; the worst-case program ranges over these."""
    return np.array(list(itertools.combinations(range(K), 2)), dtype=int).reshape(-1, 2)


def star_pairs(K: int, center: int) -> np.ndarray:
    """Pairs ``(center, a)`` for every other arm ``a``."""
    return np.array([(center, a) for a in range(K) if a != center], dtype=int)


def pair_costs(w, variances, pairs, scales=None) -> np.ndarray:
    """``s_p * Omega_p(w)`` for every pair; ``w`` may be a batch of shape (N, K)."""
    w = np.asarray(w, dtype=float)
    var = np.asarray(variances, dtype=float)
    pairs = np.asarray(pairs, dtype=int)
    i, j = pairs[:, 0], pairs[:, 1]
    costs = var[i] / w[..., i] + var[j] / w[..., j]
    if scales is not None:
        costs = costs * np.asarray(scales, dtype=float)
    return costs


def max_min_rate(w, variances, pairs, scales=None) -> float:
    """``min_p 1 / (2 s_p Omega_p(w))``, the quantity every program maximizes."""
    return float(1.0 / (2.0 * pair_costs(w, variances, pairs, scales).max()))


def _newton_direction(x, A, r):
    grad = -1.0 / x**2
    hinv = x**3 / 2.0
    if A.shape[0] == 0:
        return -hinv * grad, np.zeros(0)
    # Schur complement of the KKT system [H A^T; A 0][d; lam] = [-grad; r]
    S = (A * hinv) @ A.T
    rhs = A @ (-hinv * grad) - r
    try:
        lam = np.linalg.solve(S, rhs)
    except np.linalg.LinAlgError:
        lam = np.linalg.lstsq(S, rhs, rcond=None)[0]
    d = hinv * (-grad - A.T @ lam)
    return d, lam


def solve_minimax(
    variances: Sequence[float],
    pairs,
    scales=None,
    tol: float = 1e-10,
    max_iter: int = 1_000_000,
) -> SolverReport:
    """Minimize ``max_p s_p * Omega_p(w)`` over the simplex.

    Args:
        variances: per-arm outcome variances.
        pairs: integer array of shape (m, 2); every arm must appear in a pair.
        scales: optional positive per-pair multipliers (default 1).
        tol: convergence tolerance on the final change in weights.
        max_iter: iteration cap.

    Returns:
        SolverReport whose ``objective`` is ``min_p 1/(2 s_p Omega_p(w))``
        evaluated at the returned weights.

    Raises:
        SolverError: if the tolerance is not met within ``max_iter`` iterations.
    """
    var = _variances(variances)
    K = var.size
    pairs = np.asarray(pairs, dtype=int).reshape(-1, 2)
    m = pairs.shape[0]
    s = np.ones(m) if scales is None else np.asarray(scales, dtype=float)
    if s.shape != (m,) or np.any(~np.isfinite(s)) or np.any(s <= 0):
        raise ValidationError("pair scales must be positive and finite, one per pair")
    if np.any(pairs[:, 0] == pairs[:, 1]):
        raise ValidationError("a pair needs two distinct arms")
    if set(pairs.ravel().tolist()) != set(range(K)):
        raise ValidationError("every arm must appear in at least one pair")

    rows = np.arange(m)
    G = np.zeros((m, K))
    np.add.at(G, (rows, pairs[:, 0]), s * var[pairs[:, 0]])
    np.add.at(G, (rows, pairs[:, 1]), s * var[pairs[:, 1]])

    def to_weights(x):
        v = 1.0 / x
        return v / v.sum()

    x = np.full(K, 0.5 / G.sum(axis=1).max())
    working: list[int] = []
    w_prev = to_weights(x)
    residual = math.inf
    converged = False
    it = 0
    while it < max_iter:
        it += 1
        A = G[working]
        d, lam = _newton_direction(x, A, 1.0 - A @ x)

        if np.max(np.abs(d) / x) < _FACE_TOL:
            # stationary on the current face; a few quadratic Newton steps
            # take x to rounding level before the multipliers are trusted
            for _ in range(_POLISH_STEPS):
                x = x + d
                w = to_weights(x)
                residual = float(np.max(np.abs(w - w_prev)))
                w_prev = w
                d, lam = _newton_direction(x, A, 1.0 - A @ x)
                if residual == 0.0 or np.max(np.abs(d) / x) > _FACE_TOL:
                    break
            if lam.size == 0 or lam.min() >= -_MULTIPLIER_TOL * max(1.0, np.abs(lam).max()):
                converged = True
                break
            working.pop(int(np.argmin(lam)))
            continue

        alpha = 1.0
        shrinking = d < 0
        if np.any(shrinking):
            alpha = min(alpha, 0.9 * float(np.min(x[shrinking] / -d[shrinking])))
        blocking = None
        Gd = G @ d
        # rows dependent on the working set see only rounding noise in G @ d
        moving = Gd > _BLOCK_TOL * np.abs(G).sum(axis=1) * np.abs(d).max()
        rank = np.linalg.matrix_rank(A) if working else 0
        for p in np.flatnonzero(moving):
            if p in working:
                continue
            step = max(0.0, 1.0 - G[p] @ x) / Gd[p]
            if step < alpha and np.linalg.matrix_rank(np.vstack([A, G[p]])) > rank:
                alpha, blocking = step, int(p)

        x = x + alpha * d
        if blocking is not None:
            working.append(blocking)

        w = to_weights(x)
        residual = float(np.max(np.abs(w - w_prev)))
        w_prev = w

    weights = w_prev
    weights = weights / weights.sum()
    converged = converged and residual <= tol
    if not converged:
        raise SolverError(
            f"allocation solver stopped after {it} iterations with residual {residual:.3g}"
        )
    return SolverReport(
        weights=weights,
        objective=max_min_rate(weights, var, pairs, s),
        iterations=it,
        converged=True,
        residual=residual,
    )


def solve_gna(variances: Sequence[float], tol: float = 1e-10) -> SolverReport:
    """Generalized Neyman allocation: the best worst-case pairwise rate over all pairs."""
    var = _variances(variances)
    return solve_minimax(var, all_pairs(var.size), tol=tol)


def solve_known_best(variances: Sequence[float], a_star: int) -> np.ndarray:
    """Closed-form allocation when the best arm is known to be ``a_star``.

    The best arm gets ``sd* / (sd* + sqrt(S))`` with ``S`` the summed variance
    of the other arms; they split the remainder in proportion to variance.
    """
    var = _variances(variances)
    a_star = _arm(a_star, var.size)
    rest = np.delete(np.arange(var.size), a_star)
    S = var[rest].sum()
    sd_star = math.sqrt(var[a_star])
    w = np.empty(var.size)
    w[a_star] = sd_star / (sd_star + math.sqrt(S))
    w[rest] = (1.0 - w[a_star]) * var[rest] / S
    return w


def solve_h_gna(variances: Sequence[float], conjectured: int) -> np.ndarray:
    """Allocation under a conjectured best arm, fixed before the experiment."""
    return solve_known_best(variances, conjectured)


def oo_program(instance: BanditInstance):
    """Pairs and scales of the full-information program for ``instance``."""
    a_star = best_arm(instance)
    pairs = star_pairs(instance.K, a_star)
    return pairs, 1.0 / gaps(instance)[pairs[:, 1]] ** 2


def solve_oo(instance: BanditInstance, tol: float = 1e-10) -> SolverReport:
    """Oracle allocation maximizing ``min_a gap_a**2 / (2 Omega(best, a))``.

    Uses the true means, so it is only available in simulation.
    """
    pairs, scales = oo_program(instance)
    return solve_minimax(instance.variances, pairs, scales, tol=tol)


def _lattice(n: int, K: int) -> np.ndarray:
    # positive compositions of n into K parts, in lexicographic order
    free = np.stack(np.meshgrid(*[np.arange(1, n)] * (K - 1), indexing="ij"), -1)
    free = free.reshape(-1, K - 1)
    last = n - free.sum(axis=1)
    keep = last >= 1
    return np.column_stack([free[keep], last[keep]])


def grid_oracle(
    objective: str,
    variances: Sequence[float],
    means: Optional[Sequence[float]] = None,
    resolution: float = 1e-3,
    refine: int = 0,
) -> np.ndarray:
    """Brute-force maximizer of a max-min program on a simplex lattice.

    ``objective`` is ``"gna"`` (all pairs) or ``"oo"`` (pairs with the best
    arm, scaled by inverse squared gaps; needs ``means``). The lattice holds
    every point with coordinates that are positive multiples of
    ``resolution``; ties go to the lexicographically smallest point. Each of
    the ``refine`` rounds then searches a lattice ten times finer in a box
    around the incumbent, re-centering until the box stops improving.
    Cost grows like ``resolution**-(K-1)``, so K is capped at 4.
    """
    var = _variances(variances)
    K = var.size
    if K > 4:
        raise ValidationError("grid_oracle supports K <= 4")
    n = int(round(1.0 / resolution))
    if n < K or abs(n * resolution - 1.0) > 1e-9:
        raise ValidationError("resolution must divide 1 into at least K steps")

    if objective == "gna":
        pairs, scales = all_pairs(K), None
    elif objective == "oo":
        if means is None:
            raise ValidationError("the oo objective needs means")
        pairs, scales = oo_program(BanditInstance(means, var))
    else:
        raise ValidationError(f"unknown objective {objective!r}")

    def cost(points):
        return pair_costs(points, var, pairs, scales).max(axis=-1)

    points = _lattice(n, K) / n
    best = points[int(np.argmin(cost(points)))]

    step = 1.0 / n
    # wide boxes resolve narrow descent cones along ridges where pair costs tie
    offsets = _centered_offsets(K, _REFINE_RADIUS[K])
    for _ in range(refine):
        step /= 10.0
        # re-center until the box around the incumbent stops improving
        for _ in range(_MAX_RECENTER):
            cand = best + step * offsets
            cand = cand[np.all(cand > 0, axis=1)]
            c = cost(cand)
            if not c.min() < cost(best[None])[0]:
                break
            best = cand[int(np.argmin(c))]
    return best / best.sum()


def _centered_offsets(K: int, radius: int) -> np.ndarray:
    grid = np.stack(
        np.meshgrid(*[np.arange(-radius, radius + 1)] * (K - 1), indexing="ij"), -1
    ).reshape(-1, K - 1)
    return np.column_stack([grid, -grid.sum(axis=1)])
