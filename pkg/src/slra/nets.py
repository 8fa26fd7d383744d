"""Constructive eps-nets over unit spheres, sparse rank-1 matrices and sums of them.

All enumerations are deterministic and budget-checked. Array forms
(`sphere_net_array`, `support_pairs`) are provided for vectorized consumers.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .core import (TAU_MAX_DEFAULT, Component, OracleInfeasible, OracleResult, ParameterError,
                   SparseRankKFactor, SupportPair, as_matrix, enumeration_budget, frobenius_sq,
                   materialize)


@dataclass(frozen=True)
class NetSpec:
    n: int
    d: int
    s: int
    k: int
    eps: float
    tau_max: float = TAU_MAX_DEFAULT
    structure: str = "ssk"

    def __post_init__(self):
        if not 0 < self.eps < 1:
            raise ParameterError("eps must lie in (0, 1)")
        if min(self.n, self.d, self.s, self.k) < 1 or self.s > min(self.n, self.d):
            raise ParameterError("invalid net dimensions")
        if self.structure not in ("sphere", "sparse_rank1", "ssk", "osk"):
            raise ParameterError(f"unknown net structure {self.structure!r}")


def sphere_net_array(d: int, eps: float, budget: int | None = None) -> np.ndarray:
    """Rows are unit vectors; every unit vector in R^d is within eps of one."""
    if d < 1 or not 0 < eps < 2:
        raise ParameterError("need d >= 1 and eps in (0, 2)")
    if d == 1:
        return np.array([[-1.0], [1.0]])
    budget = enumeration_budget() if budget is None else budget
    h = eps / math.sqrt(d)
    m = math.ceil(1.0 / h)
    if (2 * m + 1) ** d > budget:
        raise OracleInfeasible(f"sphere grid of size {(2 * m + 1) ** d} exceeds budget {budget}")
    axis = np.arange(-m, m + 1) * h
    grid = np.stack(np.meshgrid(*([axis] * d), indexing="ij"), axis=-1).reshape(-1, d)
    r = np.linalg.norm(grid, axis=1)
    # nearest-point rounding leaves norms in [1 - eps/2, 1 + eps/2]
    keep = (r >= 1 - eps) & (r <= 1 + eps)
    pts = grid[keep] / r[keep, None]
    _, first = np.unique(np.round(pts, 12), axis=0, return_index=True)
    return pts[np.sort(first)]


def sphere_net(d: int, eps: float, budget: int | None = None):
    for p in sphere_net_array(d, eps, budget):
        yield p


def support_pairs(n: int, d: int, s: int):
    for S in itertools.combinations(range(n), s):
        for T in itertools.combinations(range(d), s):
            yield S, T


def sparse_rank1_count(n: int, d: int, s: int, eps: float, budget: int | None = None) -> int:
    p = len(sphere_net_array(s, eps / 2, budget))
    return math.comb(n, s) * math.comb(d, s) * p * p


def sparse_rank1_net(n: int, d: int, s: int, eps: float, budget: int | None = None):
    """Yields (x_idx, x_val, y_idx, y_val); x y^T covers unit-Frobenius s x s-sparse rank-1 within eps."""
    budget = enumeration_budget() if budget is None else budget
    if s < 1 or s > min(n, d):
        raise ParameterError(f"invalid sparsity s={s}")
    X = sphere_net_array(s, eps / 2, budget)
    total = math.comb(n, s) * math.comb(d, s) * len(X) ** 2
    if total > budget:
        raise OracleInfeasible(f"sparse rank-1 net of size {total} exceeds budget {budget}")
    for S, T in support_pairs(n, d, s):
        si, ti = np.array(S), np.array(T)
        for x in X:
            for y in X:
                yield si, x, ti, y


def tau_grid(eps: float, k: int, tau_max: float) -> np.ndarray:
    step = eps / (2 * k)
    m = math.floor(tau_max / step + 1e-9)
    return np.arange(-m, m + 1) * step


def snap_tau(tau, eps: float, k: int, tau_max: float):
    """Nearest point of the tau grid (clipped to the grid's range)."""
    step = eps / (2 * k)
    m = math.floor(tau_max / step + 1e-9)
    return np.clip(np.rint(np.asarray(tau) / step), -m, m) * step


def component_resolution(eps: float, k: int, tau_max: float) -> float:
    return min(0.5, eps / (2 * k * tau_max))


def ssk_net_size(spec: NetSpec, budget: int | None = None) -> int:
    res = component_resolution(spec.eps, spec.k, spec.tau_max)
    r1 = sparse_rank1_count(spec.n, spec.d, spec.s, res, budget)
    return (r1 * len(tau_grid(spec.eps, spec.k, spec.tau_max))) ** spec.k


def ssk_net(spec: NetSpec, budget: int | None = None):
    """Factors of the net over S_{s,k} (or its disjoint-support subset for structure='osk')."""
    budget = enumeration_budget() if budget is None else budget
    if spec.structure in ("sphere", "sparse_rank1"):
        raise ParameterError("ssk_net needs structure 'ssk' or 'osk'")
    size = ssk_net_size(spec, budget)
    if size > budget:
        raise OracleInfeasible(f"S_(s,k) net of size {size} exceeds budget {budget}")
    res = component_resolution(spec.eps, spec.k, spec.tau_max)
    rank1 = list(sparse_rank1_net(spec.n, spec.d, spec.s, res, budget))
    taus = tau_grid(spec.eps, spec.k, spec.tau_max)
    atoms = [(t, r) for r in rank1 for t in taus]
    for combo in itertools.product(atoms, repeat=spec.k):
        comps = [Component(float(t), xi, xv, yi, yv) for t, (xi, xv, yi, yv) in combo]
        F = SparseRankKFactor(comps, s=spec.s, k=spec.k, tau_max=spec.tau_max)
        if spec.structure == "osk" and not F.disjoint():
            continue
        yield F


# ---------------------------------------------------------------- net oracle

def rank1_atoms(n: int, d: int, s: int, eps: float, budget: int | None = None):
    """All net rank-1 atoms as (flat indices (N, s*s), values (N, s*s))."""
    budget = enumeration_budget() if budget is None else budget
    X = sphere_net_array(s, eps / 2, budget)
    p = len(X)
    pairs = list(support_pairs(n, d, s))
    if len(pairs) * p * p > budget:
        raise OracleInfeasible(f"{len(pairs) * p * p} rank-1 atoms exceed budget {budget}")
    S = np.array([a for a, _ in pairs]).reshape(len(pairs), s)
    T = np.array([b for _, b in pairs]).reshape(len(pairs), s)
    flat = (S[:, :, None] * d + T[:, None, :]).reshape(len(pairs), s * s)
    outer = (X[:, None, :, None] * X[None, :, None, :]).reshape(p * p, s * s)
    idx = np.repeat(flat, p * p, axis=0)
    val = np.tile(outer, (len(pairs), 1))
    return idx, val, S, T, X


def best_taus(inner: np.ndarray, gram: np.ndarray, eps: float, k: int, tau_max: float):
    """Grid taus minimizing ||a||^2 - 2 tau.inner + tau^T gram tau (exact for k = 1)."""
    if k == 1:
        g = gram[..., 0, 0]
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.where(g > 0, inner[..., 0] / g, 0.0)
        t = snap_tau(t, eps, k, tau_max)[..., None]
        return t
    t0 = np.linalg.lstsq(gram, inner, rcond=None)[0]
    base = snap_tau(np.floor(t0 / (eps / (2 * k))) * (eps / (2 * k)), eps, k, tau_max)
    best, bestv = None, None
    for bits in itertools.product((0, 1), repeat=k):
        cand = snap_tau(base + np.array(bits) * (eps / (2 * k)), eps, k, tau_max)
        v = -2 * cand @ inner + cand @ gram @ cand
        if bestv is None or v < bestv - 1e-15:
            best, bestv = cand, v
    return best


def net_oracle(A, s: int, k: int, grid: float, budget: int | None = None,
               tau_max: float = TAU_MAX_DEFAULT) -> OracleResult:
    """Best point of the constructive S_(s,k) net at resolution `grid`."""
    A = as_matrix(A)
    n, d = A.shape
    if not 0 < grid < 1:
        raise ParameterError("grid must lie in (0, 1)")
    budget = enumeration_budget() if budget is None else budget
    res = component_resolution(grid, k, tau_max)
    idx, val, _, _, _ = rank1_atoms(n, d, s, res, budget)
    N = idx.shape[0]
    if N ** k > budget:
        raise OracleInfeasible(f"{N}^{k} atom tuples exceed budget {budget}")
    a = A.ravel()
    proj = np.sum(a[idx] * val, axis=1)               # <A, x y^T>
    total = frobenius_sq(A)
    best_cost, best_combo, best_t = math.inf, None, None
    if k == 1:
        t = snap_tau(proj, grid, 1, tau_max)
        cost = total - 2 * t * proj + t * t
        j = int(np.argmin(cost))
        best_cost, best_combo, best_t = float(cost[j]), (j,), np.array([t[j]])
    else:
        dense = np.zeros((N, n * d))
        np.put_along_axis(dense, idx, val, axis=1)
        for combo in itertools.product(range(N), repeat=k):
            c = list(combo)
            G = dense[c] @ dense[c].T
            t = best_taus(proj[c], G, grid, k, tau_max)
            cost = total - 2 * t @ proj[c] + t @ G @ t
            if cost < best_cost - 1e-12 * max(1.0, total):
                best_cost, best_combo, best_t = float(cost), c, t
    comps = []
    for j, t in zip(best_combo, best_t):
        if t == 0:
            continue
        fi = idx[j]
        rows, cols = np.unique(fi // d), np.unique(fi % d)
        block = val[j].reshape(s, s)
        # recover x, y from the rank-1 outer product (unit-norm factors)
        x = block[:, int(np.argmax(np.abs(block).sum(axis=0)))]
        x = x / np.linalg.norm(x)
        y = x @ block
        comps.append(Component(float(t), rows, x, cols, y / np.linalg.norm(y)))
    F = SparseRankKFactor(comps, s=s, k=k, tau_max=tau_max)
    cost = frobenius_sq(A - materialize(F, n, d))
    sup = SupportPair.of(comps[0].x_idx, comps[0].y_idx) if comps else None
    return OracleResult(F, cost, "general", resolution=grid, support=sup)
