import itertools
import math

import numpy as np
import pytest

from slra.core import OracleInfeasible, ParameterError, frobenius_sq, materialize, spectral_norm
from slra.gaussian import (CALIBRATED_SMALL_S, SampledAccess, _best_rank1_net, calibration_seeds,
                           detect, detect_large_s, detect_small_s, estimate_signal,
                           estimation_condition, estimation_measurements, flat_decomposition,
                           flat_level, gaussian_noise, gen_planted, gen_sparse_vector,
                           large_s_plan, min_valid_n, scan_count, small_s_regime,
                           small_s_schedule, sketched_scores_real, sketched_scores_surrogate,
                           sparse_rank1_scan)
from slra.nets import sphere_net_array


def test_sparse_vector_support_is_uniform():
    n, trials = 10, 5000
    counts = np.zeros(n)
    for sd in range(trials):
        counts[np.flatnonzero(gen_sparse_vector(n, 1, sd))] += 1
    chi2 = np.sum((counts - trials / n) ** 2 / (trials / n))
    assert chi2 < 27.88          # 0.999 quantile of chi-square with 9 degrees of freedom


def test_sparse_vector_norm_mean():
    sq = [float(np.sum(gen_sparse_vector(50, 3, sd) ** 2)) for sd in range(3000)]
    assert abs(np.mean(sq) - 3) < 0.2
    assert all(np.count_nonzero(gen_sparse_vector(50, 3, sd)) == 3 for sd in range(20))
    with pytest.raises(ParameterError):
        gen_sparse_vector(3, 4, 0)


def test_planted_instance_structure():
    inst = gen_planted(30, 3, 3, seed=4)
    comps = inst.X.components
    rows = [set(c.x_idx.tolist()) for c in comps]
    cols = [set(c.y_idx.tolist()) for c in comps]
    for a, b in itertools.combinations(range(3), 2):
        assert not rows[a] & rows[b] and not cols[a] & cols[b]
    X = inst.dense_signal()
    taus = np.array([c.tau for c in comps])
    assert max(taus) == pytest.approx(1.0)
    assert spectral_norm(X) == pytest.approx(1.0)
    assert frobenius_sq(X) == pytest.approx(float(np.sum(taus ** 2)))
    assert np.allclose(inst.A - math.sqrt(30) * X, gaussian_noise(30, 4))
    assert np.array_equal(gen_planted(30, 3, 3, lam=0.0, seed=4).A, gaussian_noise(30, 4))
    with pytest.raises(ParameterError):
        gen_planted(5, 3, 2)


def test_flat_level_examples():
    v = np.zeros(8)
    v[3] = 2.0
    assert flat_level(v) == (1, pytest.approx(4.0 / 4.0))
    s, thr = flat_level(np.ones(8))
    assert (s, thr) == (2, pytest.approx(1.0))
    with pytest.raises(ParameterError):
        flat_level(np.zeros(4))


def test_flat_level_is_minimal_by_direct_count():
    rng = np.random.default_rng(0)
    for _ in range(200):
        m = int(rng.integers(1, 300))
        v = rng.standard_normal(m) * rng.exponential(1, m) ** 3
        s, thr = flat_level(v)
        L = 1 + math.log2(m)
        tot = float(v @ v)
        assert thr == pytest.approx(tot / (s * L))
        assert np.sum(v * v >= thr) >= s / 2
        for smaller in (2 ** i for i in range(int(math.log2(s)))):
            assert np.sum(v * v >= tot / (smaller * L)) < smaller / 2


def test_flat_decomposition_partitions_vector():
    v = np.random.default_rng(1).standard_normal(100) * np.logspace(0, -4, 100)
    v[5] = 0.0
    parts = flat_decomposition(v)
    assert np.array_equal(sum(p for _, p in parts), v)
    top = float(np.max(v * v))
    for ell, p in parts:
        sq = p[p != 0] ** 2
        assert np.all(sq <= top * 2.0 ** -ell) and np.all(sq > top * 2.0 ** -(ell + 1))
    assert flat_decomposition(np.zeros(3)) == []


def test_sampled_access_charges_ledger():
    acc = SampledAccess(np.arange(9.0).reshape(3, 3))
    assert acc.entries([0, 4]).tolist() == [0.0, 4.0]
    acc.entries([1], name="x", charge=7)
    assert acc.submatrix([0, 2], [1]).tolist() == [[1.0], [7.0]]
    assert acc.ledger.total() == 2 + 7 + 2


def test_small_s_schedule_values():
    sch = small_s_schedule(128, 2, 1)
    lb = math.log(4)
    assert [p["s_prime"] for p in sch] == [1, 2, 4]
    for p in sch:
        a = 1 / (p["s_prime"] ** 2 * lb)
        assert p["m"] == math.ceil(128 * 128 * a * a)
        assert p["trials"] == math.ceil(25 * p["s_prime"] ** 2 * lb * lb)
    assert small_s_regime(128, 2, 1) and not small_s_regime(64, 8, 1)


def test_small_s_detection_separates_null_and_planted():
    assert len(CALIBRATED_SMALL_S[(128, 2, 1)]) == 3
    null = [detect_small_s(gaussian_noise(128, 500 + i), 128, 2, 1, 500 + i).signal
            for i in range(20)]
    hit = [detect(gen_planted(128, 2, 1, seed=500 + i).A, 128, 2, 1, 500 + i).signal
           for i in range(20)]
    assert sum(null) <= 5 and sum(hit) >= 18


def test_small_s_is_deterministic_and_charges_cost():
    A = gaussian_noise(128, 1)
    a = detect_small_s(A, 128, 2, 1, 9)
    b = detect_small_s(A, 128, 2, 1, 9)
    assert a.to_dict() == b.to_dict()
    assert a.ledger.total() > 0
    with pytest.raises(ParameterError):
        detect_small_s(A, 128, 2, 1, 9, c_tau=(1.0, 2.0))


def test_calibration_seeds_avoid_test_seeds():
    seeds = calibration_seeds(200)
    assert len(set(seeds)) == 200
    assert not set(seeds) & set(range(10_000))


def test_large_s_plan_and_budget():
    plan = large_s_plan(64, 8, 1)
    assert {p["branch"] for p in plan} == {"large_frob", "small_frob"}
    assert not any(p["sparse"] for p in plan)
    assert all(1 <= p["t1"] <= p["n1"] <= 64 for p in plan)
    assert scan_count(10, 10, 1, 3, 0.5, 100) == 10
    with pytest.raises(OracleInfeasible):
        detect_large_s(gaussian_noise(64, 0), 64, 8, 1, 0, budget=10, strict=True)
    rep = detect_large_s(gaussian_noise(64, 0), 64, 8, 1, 0, budget=10)
    assert rep.statistics == [] or all(s["evaluations"] <= 10 for s in rep.statistics)
    assert all(s["status"] in ("infeasible", "delegated") for s in rep.info["skipped"])


def test_sparse_rank1_scan_against_submatrix_svd():
    rng = np.random.default_rng(3)
    M = rng.standard_normal((6, 7))
    eps = 0.3
    score, count = sparse_rank1_scan(M, 2, 3, eps, 10 ** 6)
    opt = max(np.linalg.svd(M[np.ix_(S, T)], compute_uv=False)[0]
              for S in itertools.combinations(range(6), 2)
              for T in itertools.combinations(range(7), 3))
    assert (1 - eps / 2) * opt <= score <= (1 + eps / 2) * opt
    assert count == math.comb(6, 2) * len(sphere_net_array(2, eps / 2))
    assert sparse_rank1_scan(M, 2, 3, eps, 5) is None


def test_best_rank1_net_matches_brute_force():
    rng = np.random.default_rng(4)
    U = rng.standard_normal((5, 6))
    X = sphere_net_array(2, 0.25)
    brute = max(float(x @ U[np.ix_(S, T)] @ y)
                for S in itertools.combinations(range(5), 2)
                for T in itertools.combinations(range(6), 2)
                for x in X for y in X)
    (score, S, x, T, y), visited = _best_rank1_net(U, 2, 0.5, 10 ** 7)
    assert score == pytest.approx(brute)
    assert float(x @ U[np.ix_(S, T)] @ y) == pytest.approx(score)
    assert 1 <= visited <= math.comb(5, 2)


@pytest.mark.parametrize("mode", ["real", "surrogate"])
def test_sketched_scores_follow_the_analytic_law(mode):
    rng = np.random.default_rng(5)
    A = rng.standard_normal((3, 3))
    B = rng.standard_normal((3, 3)) + 0.5 * A
    m, reps = 40, 1500
    fn = sketched_scores_real if mode == "real" else sketched_scores_surrogate
    vals = np.array([float(np.sum(fn(A, m, sd) * B)) for sd in range(reps)])
    ab = float(np.sum(A * B))
    var = (frobenius_sq(A) * frobenius_sq(B) + ab * ab) / m
    assert abs(vals.mean() - ab) < 4 * math.sqrt(var / reps)
    assert abs(vals.var() / var - 1) < 0.15


def test_estimation_condition_threshold():
    assert not estimation_condition(64, 2, 0.5)
    assert min_valid_n(2, 0.5, 64) == 537
    assert estimation_condition(537, 2, 0.5) and not estimation_condition(536, 2, 0.5)
    assert estimation_measurements(537, 2, 1, 0.5) == math.ceil(
        537 * 2 / 0.0625 * math.log(537 / 1.0))
    with pytest.raises(ParameterError, match="need n >= 537"):
        estimate_signal(gaussian_noise(64, 0), 64, 2, 1, 0.5, 0)


def test_estimation_recovers_noiseless_signal():
    for sd in range(3):
        inst = gen_planted(12, 2, 1, seed=sd)
        X = inst.dense_signal()
        res = estimate_signal(X, 12, 2, 1, 0.5, sd, sketch="real", check_condition=False)
        assert res.info["sketch"] == "real"
        assert spectral_norm(X - materialize(res.factor, 12, 12)) <= 0.5


def test_inner_product_controls_spectral_error():
    # for unit-Frobenius rank-1 X, X': <X, X'> >= 1 - eps^2/2 implies ||X - X'||_2 <= eps
    rng = np.random.default_rng(6)
    for _ in range(500):
        x, y, u, v = (w / np.linalg.norm(w) for w in rng.standard_normal((4, 5)))
        u = x + rng.uniform(0, 1) * u
        v = y + rng.uniform(0, 1) * v
        X, Xp = np.outer(x, y), np.outer(u / np.linalg.norm(u), v / np.linalg.norm(v))
        eps = math.sqrt(max(2 - 2 * float(np.sum(X * Xp)), 0.0))
        assert spectral_norm(X - Xp) <= eps + 1e-12
