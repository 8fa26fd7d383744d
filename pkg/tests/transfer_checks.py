"""Random instantiations of three deterministic Frobenius-norm transfer inequalities.

Each check draws matrices that meet the hypothesis (often tightly) and returns the
number of instances where the conclusion fails by more than `slack` (relative).
"""
import numpy as np


def _fro2(M):
    return float(np.sum(M * M))


def _rank_k(M, k):
    U, s, Vt = np.linalg.svd(M, full_matrices=False)
    return (U[:, :k] * s[:k]) @ Vt[:k]


def _pair(rng):
    n, d = rng.integers(2, 12, size=2)
    A = rng.standard_normal((n, d)) * 10.0 ** rng.uniform(-3, 3)
    E = rng.standard_normal((n, d)) * 10.0 ** rng.uniform(-4, 1) * np.sqrt(_fro2(A) / (n * d))
    return A, A + E


def projection_transfer_violations(count=1000, seed=0, slack=1e-9):
    rng = np.random.default_rng(seed)
    bad = 0
    for t in range(count):
        A, Ah = _pair(rng)
        d = A.shape[1]
        k = int(rng.integers(1, d + 1))
        if t % 2:
            V = np.linalg.svd(Ah, full_matrices=False)[2][:k].T
        else:
            V = np.linalg.qr(rng.standard_normal((d, k)))[0]
        delta = _fro2(Ah - A) * (1 + rng.uniform(0, 0.5) * (t % 3 == 0))
        P = V @ V.T
        lhs = _fro2(A - A @ P)
        r = np.sqrt(_fro2(A - Ah @ P))
        rhs = r * r + delta + 2 * np.sqrt(delta) * r
        bad += lhs > rhs + slack * max(rhs, 1e-300)
    return int(bad)


def low_rank_transfer_violations(count=1000, seed=1, slack=1e-9):
    rng = np.random.default_rng(seed)
    bad = 0
    for t in range(count):
        A, Ah = _pair(rng)
        k = int(rng.integers(1, min(A.shape) + 1))
        D = _rank_k(Ah, k)
        if t % 2:
            n, d = A.shape
            D = D + _rank_k(rng.standard_normal((n, d)), k) * rng.uniform(0, 1) * np.sqrt(_fro2(A) / (n * d))
            D = _rank_k(D, k)
        delta = _fro2(Ah - A)
        eta = max(_fro2(Ah - D) - _fro2(Ah - _rank_k(Ah, k)), 0.0)
        F = np.sqrt(_fro2(A))
        lhs = _fro2(A - D)
        rhs = (_fro2(A - _rank_k(A, k)) + 2 * np.sqrt(delta) * F + 2 * delta + eta
               + 2 * np.sqrt(delta * (2 * delta + 2 * F * F + eta)))
        bad += lhs > rhs + slack * max(rhs, 1e-300)
    return int(bad)


def row_wise_violations(count=1000, seed=2, slack=1e-9, shrink=1.0):
    rng = np.random.default_rng(seed)
    bad = 0
    for _ in range(count):
        n, d = rng.integers(1, 12, size=2)
        A = rng.standard_normal((n, d)) * 10.0 ** rng.uniform(-3, 3)
        eps = rng.uniform(0.001, 1.0)
        E = rng.standard_normal((n, d))
        # scale each error row to use a random fraction of its allowance
        row = np.sqrt(np.sum(A * A, axis=1) * eps * rng.uniform(0, 1, n))
        E *= (row / np.maximum(np.linalg.norm(E, axis=1), 1e-300))[:, None]
        Ah = A + E
        lhs = _fro2(Ah - A)
        rhs = shrink * eps * _fro2(A)
        bad += lhs > rhs * (1 + slack)
    return int(bad)
