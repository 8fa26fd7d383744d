"""Dense matrix primitives, exact SVD, tails, restriction and brute-force oracles.

Matrices are plain 2-D float64 numpy arrays. Everything here is a pure
function of its inputs.
"""
from __future__ import annotations

import itertools
import math
import os
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

TAU_MAX_DEFAULT = 1e6
DEFAULT_BUDGET = 10**7


class ParameterError(ValueError):
    pass


class OracleInfeasible(RuntimeError):
    """Raised when an exhaustive enumeration would exceed its budget."""


def enumeration_budget(default: int = DEFAULT_BUDGET) -> int:
    raw = os.environ.get("SLRA_BUDGET")
    if raw is None or raw.strip() == "":
        return default
    try:
        return int(float(raw))
    except ValueError as exc:
        raise ParameterError(f"SLRA_BUDGET must be an integer, got {raw!r}") from exc


def as_matrix(A) -> np.ndarray:
    M = np.asarray(A, dtype=np.float64)
    if M.ndim != 2:
        raise ParameterError(f"expected a 2-D matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ParameterError("matrix has non-finite entries")
    return M


@dataclass(frozen=True)
class SvdResult:
    U: np.ndarray
    sigma: np.ndarray
    V: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.U * self.sigma) @ self.V.T


@dataclass(frozen=True)
class SupportPair:
    S: tuple
    T: tuple

    @staticmethod
    def of(S: Iterable[int], T: Iterable[int]) -> "SupportPair":
        S = tuple(sorted(int(i) for i in S))
        T = tuple(sorted(int(j) for j in T))
        if len(set(S)) != len(S) or len(set(T)) != len(T):
            raise ParameterError("support sets contain duplicates")
        return SupportPair(S, T)

    def check(self, n: int, d: int) -> None:
        if any(i < 0 or i >= n for i in self.S) or any(j < 0 or j >= d for j in self.T):
            raise ParameterError(f"support indices out of range for {n}x{d}")


@dataclass(frozen=True)
class Component:
    tau: float
    x_idx: np.ndarray
    x_val: np.ndarray
    y_idx: np.ndarray
    y_val: np.ndarray

    @staticmethod
    def from_dense(tau: float, x: np.ndarray, y: np.ndarray) -> "Component":
        xi = np.flatnonzero(x)
        yi = np.flatnonzero(y)
        return Component(float(tau), xi, np.asarray(x, float)[xi], yi, np.asarray(y, float)[yi])


@dataclass
class SparseRankKFactor:
    """Sum of k terms tau_i * x_i y_i^T with sparse unit vectors."""

    components: list = field(default_factory=list)
    s: int = 1
    k: int = 1
    tau_max: float = TAU_MAX_DEFAULT

    def validate(self, n: int | None = None, d: int | None = None, tol: float = 1e-10) -> None:
        if len(self.components) > self.k:
            raise ParameterError(f"{len(self.components)} components exceed k={self.k}")
        for c in self.components:
            for idx, val in ((c.x_idx, c.x_val), (c.y_idx, c.y_val)):
                if len(idx) > self.s:
                    raise ParameterError(f"component support {len(idx)} exceeds s={self.s}")
                if len(idx) and abs(np.linalg.norm(val) - 1.0) > tol:
                    raise ParameterError("component vector is not unit norm")
            if abs(c.tau) > self.tau_max:
                raise ParameterError(f"|tau|={abs(c.tau)} exceeds tau_max={self.tau_max}")
            if n is not None and len(c.x_idx) and (c.x_idx.min() < 0 or c.x_idx.max() >= n):
                raise ParameterError("x support out of range")
            if d is not None and len(c.y_idx) and (c.y_idx.min() < 0 or c.y_idx.max() >= d):
                raise ParameterError("y support out of range")

    def disjoint(self) -> bool:
        rows, cols = set(), set()
        for c in self.components:
            xs, ys = set(c.x_idx.tolist()), set(c.y_idx.tolist())
            if rows & xs or cols & ys:
                return False
            rows |= xs
            cols |= ys
        return True


def materialize(F: SparseRankKFactor, n: int, d: int) -> np.ndarray:
    B = np.zeros((n, d))
    for c in F.components:
        if len(c.x_idx) and len(c.y_idx):
            B[np.ix_(c.x_idx, c.y_idx)] += c.tau * np.outer(c.x_val, c.y_val)
    return B


# ---------------------------------------------------------------- SVD

def _canonical_signs(U: np.ndarray, V: np.ndarray) -> None:
    # make the largest-magnitude entry of each left vector positive
    for j in range(U.shape[1]):
        col = U[:, j] if U.shape[0] else V[:, j]
        if col.size == 0:
            continue
        p = int(np.argmax(np.abs(col)))
        if col[p] < 0:
            U[:, j] *= -1
            V[:, j] *= -1


def svd_truncated(A, k: int) -> SvdResult:
    """Top-k singular triplets of A, deterministic for a fixed input.

    Backed by LAPACK (gesdd); `jacobi_svd` is an independent dependency-free
    implementation used to cross-check it.
    """
    A = as_matrix(A)
    n, d = A.shape
    if not 1 <= k <= min(n, d):
        raise ParameterError(f"k={k} outside [1, {min(n, d)}]")
    U, s, Vt = np.linalg.svd(A, full_matrices=False)
    U = U[:, :k].copy()
    V = Vt[:k].T.copy()
    _canonical_signs(U, V)
    return SvdResult(U, s[:k].copy(), V)


def jacobi_svd(A, tol: float = 1e-12, max_sweeps: int = 80) -> SvdResult:
    """One-sided Jacobi SVD on the smaller Gram dimension (full rank r = min(n, d))."""
    A = as_matrix(A)
    n, d = A.shape
    if d > n:
        r = jacobi_svd(A.T, tol, max_sweeps)
        return SvdResult(r.V, r.sigma, r.U)
    W = A.copy()
    V = np.eye(d)
    for _ in range(max_sweeps):
        rotated = False
        for p in range(d - 1):
            for q in range(p + 1, d):
                a = W[:, p] @ W[:, p]
                b = W[:, q] @ W[:, q]
                g = W[:, p] @ W[:, q]
                if abs(g) <= tol * math.sqrt(a * b) or g == 0.0:
                    continue
                rotated = True
                zeta = (b - a) / (2.0 * g)
                t = math.copysign(1.0, zeta) / (abs(zeta) + math.sqrt(1.0 + zeta * zeta))
                c = 1.0 / math.sqrt(1.0 + t * t)
                sn = c * t
                wp, wq = W[:, p].copy(), W[:, q].copy()
                W[:, p] = c * wp - sn * wq
                W[:, q] = sn * wp + c * wq
                vp, vq = V[:, p].copy(), V[:, q].copy()
                V[:, p] = c * vp - sn * vq
                V[:, q] = sn * vp + c * vq
        if not rotated:
            break
    sigma = np.linalg.norm(W, axis=0)
    order = np.argsort(-sigma, kind="stable")
    sigma = sigma[order]
    W = W[:, order]
    V = V[:, order]
    U = np.zeros_like(W)
    scale = sigma[0] if sigma.size and sigma[0] > 0 else 1.0
    for j in range(d):
        if sigma[j] > 1e-300 and sigma[j] > 1e-15 * scale:
            U[:, j] = W[:, j] / sigma[j]
    # complete U for (numerically) zero singular values
    missing = [j for j in range(d) if not U[:, j].any()]
    if missing:
        basis = U[:, [j for j in range(d) if U[:, j].any()]]
        for j in missing:
            for e in range(n):
                v = np.zeros(n)
                v[e] = 1.0
                v -= basis @ (basis.T @ v)
                nv = np.linalg.norm(v)
                if nv > 1e-8:
                    U[:, j] = v / nv
                    basis = np.column_stack([basis, U[:, j]])
                    break
    _canonical_signs(U, V)
    return SvdResult(U, sigma, V)


def singular_values(A) -> np.ndarray:
    return np.linalg.svd(as_matrix(A), compute_uv=False)


def spectral_norm(A) -> float:
    A = as_matrix(A)
    if A.size == 0:
        return 0.0
    return float(np.linalg.norm(A, 2))


def frobenius_sq(A) -> float:
    A = np.asarray(A, dtype=float)
    return float(np.sum(A * A))


def rank_k_residual_sq(A, k: int) -> float:
    """||A - A_k||_F^2 via the tail of the spectrum."""
    s = singular_values(A)
    return float(np.sum(s[k:] ** 2))


# ---------------------------------------------------------------- restriction and tails

def restrict(A, sup: SupportPair, mode: str = "extract") -> np.ndarray:
    A = as_matrix(A)
    sup.check(*A.shape)
    S, T = list(sup.S), list(sup.T)
    if mode == "extract":
        return A[np.ix_(S, T)].copy()
    if mode == "project":
        out = np.zeros_like(A)
        out[np.ix_(S, T)] = A[np.ix_(S, T)]
        return out
    raise ParameterError(f"unknown restrict mode {mode!r}")


def top_indices(values: np.ndarray, count: int) -> np.ndarray:
    """Indices of the `count` largest values; ties go to the smaller index."""
    values = np.asarray(values)
    order = np.argsort(-values, kind="stable")
    return order[: max(0, min(count, values.size))]


def entry_tail_frobenius(A, B: int) -> float:
    A = as_matrix(A)
    if not 0 <= B <= A.size:
        raise ParameterError(f"B={B} outside [0, {A.size}]")
    flat = np.abs(A).ravel()
    keep = np.ones(flat.size, bool)
    keep[top_indices(flat, B)] = False
    return float(np.sqrt(np.sum(flat[keep] ** 2)))


def row_tail_frobenius(A, B: int) -> float:
    A = as_matrix(A)
    if not 0 <= B <= A.shape[0]:
        raise ParameterError(f"B={B} outside [0, {A.shape[0]}]")
    norms = np.sum(A * A, axis=1)
    keep = np.ones(A.shape[0], bool)
    keep[top_indices(norms, B)] = False
    return float(np.sqrt(np.sum(norms[keep])))


# ---------------------------------------------------------------- brute-force oracles

@dataclass
class OracleResult:
    factor: SparseRankKFactor
    cost: float
    variant: str
    resolution: float = 0.0
    support: SupportPair | None = None


def _factor_from_block(A: np.ndarray, S: Sequence[int], T: Sequence[int], k: int,
                       s: int, tau_max: float) -> SparseRankKFactor:
    block = A[np.ix_(S, T)]
    kk = min(k, len(S), len(T))
    comps = []
    if kk > 0:
        r = svd_truncated(block, kk)
        for i in range(kk):
            if r.sigma[i] <= 0:
                continue
            comps.append(Component(float(r.sigma[i]), np.asarray(S), r.U[:, i].copy(),
                                   np.asarray(T), r.V[:, i].copy()))
    return SparseRankKFactor(comps, s=s, k=k, tau_max=tau_max)


def _topk_sq_sum_batched(blocks: np.ndarray, k: int) -> np.ndarray:
    """Sum of the top-k squared singular values of each block in a batch."""
    m, p, q = blocks.shape[-3:]
    if k >= min(p, q):
        return np.sum(blocks * blocks, axis=(-2, -1))
    if p <= q:
        gram = blocks @ np.swapaxes(blocks, -1, -2)
    else:
        gram = np.swapaxes(blocks, -1, -2) @ blocks
    ev = np.linalg.eigvalsh(gram)
    return np.sum(ev[..., -k:], axis=-1)


def brute_force_sparse_lra(A, s: int, k: int, variant: str = "submatrix",
                           grid: float = 0.25, budget: int | None = None,
                           tau_max: float = TAU_MAX_DEFAULT) -> OracleResult:
    """Exhaustive oracle for small sparse low-rank approximation instances.

    submatrix: best rank-k approximation supported on one s x s block (exact).
    components: best sum of k rank-1 terms on pairwise row/column-disjoint
        s x s blocks (exact over the disjoint class).
    general: best point of the constructive net at resolution `grid`.
    """
    A = as_matrix(A)
    n, d = A.shape
    if s < 1 or k < 1 or s > min(n, d):
        raise ParameterError(f"invalid s={s}, k={k} for {n}x{d}")
    budget = enumeration_budget() if budget is None else budget
    total = frobenius_sq(A)
    if variant == "submatrix":
        return _oracle_submatrix(A, s, k, budget, total, tau_max)
    if variant == "components":
        return _oracle_components(A, s, k, budget, total, tau_max)
    if variant == "general":
        from . import nets
        return nets.net_oracle(A, s, k, grid, budget=budget, tau_max=tau_max)
    raise ParameterError(f"unknown oracle variant {variant!r}")


def _oracle_submatrix(A, s, k, budget, total, tau_max) -> OracleResult:
    n, d = A.shape
    rows = list(itertools.combinations(range(n), s))
    cols = list(itertools.combinations(range(d), s))
    if len(rows) * len(cols) > budget:
        raise OracleInfeasible(f"{len(rows) * len(cols)} blocks exceed budget {budget}")
    kk = min(k, s)
    best_val, best_S, best_T = -1.0, None, None
    sq = A * A
    if kk >= s:
        # the whole block is captured: pick the s heaviest columns per row set
        for S in rows:
            colmass = sq[list(S)].sum(axis=0)
            T = np.sort(top_indices(colmass, s))
            val = float(colmass[T].sum())
            if val > best_val + 1e-15 * max(1.0, total):
                best_val, best_S, best_T = val, S, tuple(int(t) for t in T)
    else:
        col_idx = np.array(cols)
        for S in rows:
            sub = A[list(S)]                                  # s x d
            blocks = np.transpose(sub[:, col_idx], (1, 0, 2))  # (#cols, s, s)
            vals = _topk_sq_sum_batched(blocks, kk)
            j = int(np.argmax(vals))
            if vals[j] > best_val + 1e-15 * max(1.0, total):
                best_val, best_S, best_T = float(vals[j]), S, cols[j]
    F = _factor_from_block(A, best_S, best_T, k, s, tau_max)
    cost = frobenius_sq(A - materialize(F, *A.shape))
    return OracleResult(F, cost, "submatrix", 0.0, SupportPair.of(best_S, best_T))


def _oracle_components(A, s, k, budget, total, tau_max) -> OracleResult:
    n, d = A.shape
    rows = list(itertools.combinations(range(n), s))
    cols = list(itertools.combinations(range(d), s))
    nblocks = len(rows) * len(cols)
    if nblocks ** k > budget:
        raise OracleInfeasible(f"{nblocks}^{k} block tuples exceed budget {budget}")
    gains = {}
    for S in rows:
        for T in cols:
            gains[(S, T)] = float(singular_values(A[np.ix_(S, T)])[0] ** 2)
    keys = list(gains)
    best, best_combo = -1.0, ()
    for m in range(1, k + 1):
        for combo in itertools.combinations(keys, m):
            rs = [i for S, _ in combo for i in S]
            cs = [j for _, T in combo for j in T]
            if len(set(rs)) != len(rs) or len(set(cs)) != len(cs):
                continue
            g = sum(gains[c] for c in combo)
            if g > best + 1e-15 * max(1.0, total):
                best, best_combo = g, combo
    comps = []
    for S, T in best_combo:
        r = svd_truncated(A[np.ix_(S, T)], 1)
        comps.append(Component(float(r.sigma[0]), np.asarray(S), r.U[:, 0].copy(),
                               np.asarray(T), r.V[:, 0].copy()))
    F = SparseRankKFactor(comps, s=s, k=k, tau_max=tau_max)
    return OracleResult(F, frobenius_sq(A - materialize(F, n, d)), "components")
