import math

import numpy as np
import pytest

from slra.core import OracleInfeasible, ParameterError, brute_force_sparse_lra, materialize
from slra.nets import (NetSpec, component_resolution, net_oracle, snap_tau, sparse_rank1_count,
                       sparse_rank1_net, sphere_net, sphere_net_array, ssk_net, ssk_net_size,
                       tau_grid)


def test_sphere_net_d1():
    assert sorted(p[0] for p in sphere_net(1, 0.5)) == [-1.0, 1.0]


def test_sphere_net_d2_covers_circle():
    X = sphere_net_array(2, 0.5)
    theta = np.deg2rad(np.arange(360))
    probes = np.stack([np.cos(theta), np.sin(theta)], axis=1)
    dist = np.linalg.norm(probes[:, None] - X[None], axis=2).min(axis=1)
    assert dist.max() <= 0.5
    assert np.allclose(np.linalg.norm(X, axis=1), 1.0)


@pytest.mark.parametrize("d,eps", [(2, 0.5), (2, 0.25), (3, 0.5), (4, 0.9)])
def test_sphere_net_covering_and_size(d, eps):
    X = sphere_net_array(d, eps)
    assert len(X) <= (12 / eps) ** d
    g = np.random.default_rng(d).standard_normal((2000, d))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    dist = np.linalg.norm(g[:, None] - X[None], axis=2).min(axis=1)
    assert dist.max() <= eps


def test_sphere_net_budget_and_determinism():
    with pytest.raises(OracleInfeasible):
        sphere_net_array(6, 0.1, budget=1000)
    assert np.array_equal(sphere_net_array(3, 0.5), sphere_net_array(3, 0.5))
    with pytest.raises(ParameterError):
        sphere_net_array(0, 0.5)


def test_sparse_rank1_net_small_patterns():
    pts = {(int(xi[0]), float(x[0]), int(ti[0]), float(y[0]))
           for xi, x, ti, y in sparse_rank1_net(2, 2, 1, 0.5)}
    for i in range(2):
        for j in range(2):
            for a in (-1.0, 1.0):
                for b in (-1.0, 1.0):
                    assert (i, a, j, b) in pts


def test_sparse_rank1_net_covers_random_targets():
    rng = np.random.default_rng(0)
    n, s, eps = 4, 2, 0.5
    pts = []
    for xi, x, ti, y in sparse_rank1_net(n, n, s, eps):
        B = np.zeros((n, n))
        B[np.ix_(xi, ti)] = np.outer(x, y)
        pts.append(B.ravel())
    pts = np.array(pts)
    for _ in range(20):
        x = np.zeros(n)
        y = np.zeros(n)
        x[rng.choice(n, s, replace=False)] = rng.standard_normal(s)
        y[rng.choice(n, s, replace=False)] = rng.standard_normal(s)
        M = np.outer(x / np.linalg.norm(x), y / np.linalg.norm(y)).ravel()
        assert np.linalg.norm(pts - M, axis=1).min() <= eps


def test_sparse_rank1_count_bound():
    n, s, eps = 6, 2, 0.5
    count = sparse_rank1_count(n, n, s, eps)
    assert count == sum(1 for _ in sparse_rank1_net(n, n, s, eps))
    # constructive grid over-counts the volume bound by a constant base
    assert count <= (12 * math.e * n / (eps * s)) ** (2 * s)


def test_tau_grid_and_snap():
    g = tau_grid(0.5, 1, 1.0)
    assert np.allclose(g, [-1.0, -0.75, -0.5, -0.25, 0.0, 0.25, 0.5, 0.75, 1.0])
    assert snap_tau(0.6, 0.5, 1, 1.0) == pytest.approx(0.5)
    assert snap_tau(9.0, 0.5, 1, 1.0) == pytest.approx(1.0)
    assert component_resolution(0.5, 1, 1.0) == pytest.approx(0.25)


def test_ssk_net_covers_planted_s11():
    spec = NetSpec(3, 3, 1, 1, 0.5, tau_max=1.0)
    assert ssk_net_size(spec) == sum(1 for _ in ssk_net(spec))
    rng = np.random.default_rng(1)
    for _ in range(10):
        B = np.zeros((3, 3))
        B[rng.integers(3), rng.integers(3)] = rng.choice([-1.0, 1.0])
        best = min(np.linalg.norm(B - materialize(F, 3, 3)) for F in ssk_net(spec))
        assert best <= 0.5


def test_osk_filter_is_strict_subset():
    ssk = NetSpec(2, 2, 1, 2, 0.5, tau_max=0.5)
    osk = NetSpec(2, 2, 1, 2, 0.5, tau_max=0.5, structure="osk")
    n_ssk = sum(1 for _ in ssk_net(ssk))
    emitted = list(ssk_net(osk))
    assert 0 < len(emitted) < n_ssk
    assert all(F.disjoint() for F in emitted)


def test_netspec_validation():
    with pytest.raises(ParameterError):
        NetSpec(3, 3, 4, 1, 0.5)
    with pytest.raises(ParameterError):
        NetSpec(3, 3, 1, 1, 1.5)
    with pytest.raises(ParameterError):
        list(ssk_net(NetSpec(3, 3, 1, 1, 0.5, structure="sphere")))


def test_net_oracle_close_to_exact_submatrix_oracle():
    rng = np.random.default_rng(2)
    A = 0.05 * rng.standard_normal((4, 4))
    A[1, 3] += 1.0
    res = net_oracle(A, 1, 1, grid=0.25, tau_max=2.0)
    exact = brute_force_sparse_lra(A, 1, 1).cost
    assert exact <= res.cost <= exact + 0.25 ** 2
