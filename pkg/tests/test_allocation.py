import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from neyman_bai.allocation import (
    SolverError,
    all_pairs,
    check_weights,
    grid_oracle,
    max_min_rate,
    omega,
    pair_costs,
    solve_gna,
    solve_h_gna,
    solve_known_best,
    solve_minimax,
    solve_oo,
    star_pairs,
)
from neyman_bai.model import BanditInstance, ValidationError

import oracles

variance_lists = st.lists(st.floats(0.05, 20.0), min_size=2, max_size=8)

EQ5_111 = [1 / (1 + math.sqrt(2)), 1 / (2 + math.sqrt(2)), 1 / (2 + math.sqrt(2))]
EQ5_144 = [math.sqrt(8) / (math.sqrt(8) + 8), 4 / (math.sqrt(8) + 8), 4 / (math.sqrt(8) + 8)]


# omega ---------------------------------------------------------------------


def test_omega_examples():
    assert omega([0.5, 0.5], [1, 1], 0, 1) == pytest.approx(4.0)
    assert omega([2 / 3, 1 / 3], [4, 1], 0, 1) == pytest.approx(9.0)


def test_omega_same_arm_rejected():
    with pytest.raises(ValidationError):
        omega([0.5, 0.5], [1, 1], 1, 1)


@given(variance_lists, st.data())
def test_omega_symmetric(variances, data):
    K = len(variances)
    w = np.array(data.draw(st.lists(st.floats(0.01, 1.0), min_size=K, max_size=K)))
    w /= w.sum()
    i, j = data.draw(st.sampled_from([(i, j) for i in range(K) for j in range(K) if i != j]))
    assert omega(w, variances, i, j) == omega(w, variances, j, i)


@pytest.mark.parametrize("w", [[0.5, 0.6], [1.0, 0.0], [-0.1, 1.1], [0.5, np.nan]])
def test_invalid_weights(w):
    with pytest.raises(ValidationError):
        check_weights(w)


# solve_gna -----------------------------------------------------------------


def test_gna_two_arm_neyman():
    r = solve_gna([4, 1])
    np.testing.assert_allclose(r.weights, [2 / 3, 1 / 3], atol=1e-12)
    assert r.converged and r.residual <= 1e-10
    assert r.objective == pytest.approx(1 / 18)


def test_gna_equal_variances_uniform():
    r = solve_gna([1, 1, 1])
    np.testing.assert_allclose(r.weights, [1 / 3] * 3, atol=1e-6)
    assert r.objective == pytest.approx(1 / 12)


def test_gna_144_equalizes_pairs():
    r = solve_gna([1, 4, 4])
    assert r.weights[1] == pytest.approx(r.weights[2], abs=1e-6)
    costs = pair_costs(r.weights, [1, 4, 4], all_pairs(3))
    assert np.ptp(costs) < 1e-6
    np.testing.assert_allclose(r.weights, [1 / 9, 4 / 9, 4 / 9], atol=1e-12)


@settings(max_examples=200, deadline=None)
@given(variance_lists)
def test_gna_matches_closed_form_oracle(variances):
    r = solve_gna(variances)
    np.testing.assert_allclose(r.weights, oracles.gna_weights(variances), rtol=1e-9, atol=1e-12)
    w = oracles.gna_weights(variances)
    assert r.objective == pytest.approx(1 / (2 * oracles.max_pair_cost(w, variances)), rel=1e-9)


@settings(max_examples=100, deadline=None)
@given(variance_lists)
def test_gna_weights_valid(variances):
    w = solve_gna(variances).weights
    assert np.all(w > 0) and np.all(w < 1)
    assert abs(w.sum() - 1) <= 1e-12


@settings(max_examples=100, deadline=None)
@given(variance_lists, st.randoms(use_true_random=False))
def test_gna_permutation_equivariant(variances, rnd):
    perm = list(range(len(variances)))
    rnd.shuffle(perm)
    base = solve_gna(variances)
    permuted = solve_gna([variances[p] for p in perm])
    np.testing.assert_allclose(permuted.weights, base.weights[perm], atol=1e-10)
    assert permuted.objective == pytest.approx(base.objective, rel=1e-10)


@settings(max_examples=100, deadline=None)
@given(variance_lists, st.floats(1e-3, 1e3))
def test_scale_invariance(variances, c):
    scaled = [c * v for v in variances]
    np.testing.assert_allclose(solve_gna(scaled).weights, solve_gna(variances).weights, atol=1e-10)
    np.testing.assert_allclose(solve_known_best(scaled, 0), solve_known_best(variances, 0), atol=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.01, 100), st.floats(0.01, 100))
def test_two_arm_agreement(v1, v2):
    s1, s2 = math.sqrt(v1), math.sqrt(v2)
    neyman = [s1 / (s1 + s2), s2 / (s1 + s2)]
    np.testing.assert_allclose(solve_gna([v1, v2]).weights, neyman, atol=1e-8)
    np.testing.assert_allclose(solve_known_best([v1, v2], 0), neyman, atol=1e-8)
    np.testing.assert_allclose(solve_known_best([v1, v2], 1), neyman, atol=1e-8)


@settings(max_examples=50, deadline=None)
@given(variance_lists, st.integers(0, 2**32 - 1))
def test_gna_is_local_optimum(variances, seed):
    r = solve_gna(variances)
    rng = np.random.default_rng(seed)
    pairs = all_pairs(len(variances))
    for _ in range(20):
        z = r.weights * np.exp(rng.normal(0, 1e-3, len(variances)))
        z /= z.sum()
        assert max_min_rate(z, variances, pairs) <= r.objective * (1 + 1e-12)


def test_solver_reports_nonconvergence():
    with pytest.raises(SolverError):
        solve_minimax(np.array([1.0, 2.0, 5.0, 7.0]), all_pairs(4), max_iter=1)


def test_report_to_dict_schema():
    d = solve_gna([4, 1]).to_dict()
    assert set(d) == {"weights", "objective", "converged", "iterations"}
    assert d["converged"] is True


# known best / H-GNA ----------------------------------------------------------


def test_known_best_examples():
    np.testing.assert_allclose(solve_known_best([1, 1, 1], 0), EQ5_111, atol=1e-12)
    np.testing.assert_allclose(solve_known_best([1, 4, 4], 0), EQ5_144, atol=1e-12)
    np.testing.assert_allclose(solve_known_best([1, 4, 4], 0), [0.261204, 0.369398, 0.369398], atol=1e-6)
    np.testing.assert_allclose(solve_known_best([4, 1], 0), [2 / 3, 1 / 3], atol=1e-12)


def test_h_gna_examples():
    np.testing.assert_allclose(solve_h_gna([1, 1, 1], 1), [0.292893, 0.414214, 0.292893], atol=1e-6)
    np.testing.assert_allclose(solve_h_gna([1, 1], 0), [0.5, 0.5], atol=1e-12)
    np.testing.assert_allclose(solve_h_gna([1, 4, 4], 0), EQ5_144, atol=1e-12)


def test_known_best_arm_range():
    with pytest.raises(ValidationError):
        solve_known_best([1, 1, 1], 3)


@settings(max_examples=200, deadline=None)
@given(variance_lists, st.data())
def test_star_program_reproduces_closed_form(variances, data):
    a = data.draw(st.integers(0, len(variances) - 1))
    numeric = solve_minimax(np.array(variances), star_pairs(len(variances), a)).weights
    np.testing.assert_allclose(numeric, oracles.known_best_weights(variances, a), atol=1e-9)
    np.testing.assert_allclose(solve_known_best(variances, a), oracles.known_best_weights(variances, a), atol=1e-12)


# solve_oo ------------------------------------------------------------------------


def test_oo_examples():
    np.testing.assert_allclose(solve_oo(BanditInstance([1, 0.75], [1, 1])).weights, [0.5, 0.5], atol=1e-12)
    np.testing.assert_allclose(
        solve_oo(BanditInstance([1, 0.75, 0.75], [1, 1, 1])).weights, EQ5_111, atol=1e-9
    )


def test_oo_matches_grid_oracle():
    inst = BanditInstance([1, 0.9, 0.5], [1, 1, 1])
    r = solve_oo(inst)
    grid = grid_oracle("oo", [1, 1, 1], means=[1, 0.9, 0.5], resolution=1e-3, refine=2)
    pairs = star_pairs(3, 0)
    scales = 1 / np.array([0.1, 0.5]) ** 2
    g_obj = max_min_rate(grid, [1, 1, 1], pairs, scales)
    assert g_obj <= r.objective * (1 + 1e-12)
    assert g_obj == pytest.approx(r.objective, rel=1e-4)
    # both suboptimal arms are binding at the optimum
    rates = 1 / (2 * pair_costs(r.weights, [1, 1, 1], pairs, scales))
    assert np.ptp(rates) <= 1e-9 * rates.max()


@settings(max_examples=100, deadline=None)
@given(variance_lists, st.floats(0.01, 5.0))
def test_oo_equal_gaps_is_known_best(variances, gap):
    means = [1.0] + [1.0 - gap] * (len(variances) - 1)
    r = solve_oo(BanditInstance(means, variances))
    np.testing.assert_allclose(r.weights, oracles.known_best_weights(variances, 0), atol=1e-6)


# grid oracle ---------------------------------------------------------------------


def test_grid_examples():
    np.testing.assert_allclose(grid_oracle("gna", [1, 1], resolution=1e-3), [0.5, 0.5])
    w = grid_oracle("gna", [1, 1, 1], resolution=1e-2)
    assert np.abs(w - 1 / 3).max() <= 0.01 + 1e-12
    assert max_min_rate(w, [1, 1, 1], all_pairs(3)) == pytest.approx(1 / 12, abs=1e-3)
    # lexicographically smallest among the symmetric optima
    np.testing.assert_allclose(w, [0.33, 0.33, 0.34])
    w = grid_oracle("oo", [1, 1, 1], means=[1, 0.75, 0.75], resolution=1e-3)
    np.testing.assert_allclose(w, EQ5_111, atol=1e-3)


def test_grid_rejects_large_k_and_bad_resolution():
    with pytest.raises(ValidationError):
        grid_oracle("gna", [1] * 5, resolution=0.1)
    with pytest.raises(ValidationError):
        grid_oracle("gna", [1, 1], resolution=0.3)
    with pytest.raises(ValidationError):
        grid_oracle("oo", [1, 1])


def test_grid_never_beats_solver():
    rng = np.random.default_rng(3)
    for _ in range(10):
        v = rng.uniform(0.5, 10, 3)
        g = max_min_rate(grid_oracle("gna", v, resolution=1e-2), v, all_pairs(3))
        assert g <= solve_gna(v).objective * (1 + 1e-12)
