"""Spectral-norm rank-k approximation for matrices whose top singular vectors are sparse.

Pipeline: power iteration to find heavy coordinates, a certified search for the
(k+1)-th singular value, a sweep of gap-amplifying Chebyshev combinations of
the stored Krylov iterates, and finally an SVD of the selected submatrix.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .core import (Component, ParameterError, SparseRankKFactor, SupportPair, as_matrix,
                   svd_truncated, top_indices)
from .sketch import counter_normals, derive_seed

MAX_CHEB_DEGREE = 64
RIGHT_SEED_OFFSET = 0x5EED
CERT_FACTOR = 20.0


@dataclass
class OpCounter:
    """Counts products of A (or A^T) with a vector and the implied nnz work."""

    nnz: int = 0
    matmuls: int = 0
    flops: int = 0

    def mult(self, times: int = 1) -> None:
        self.matmuls += times
        self.flops += times * self.nnz


def counter_for(A) -> OpCounter:
    return OpCounter(nnz=int(np.count_nonzero(A)))


# ---------------------------------------------------------------- Krylov iterates

@dataclass
class KrylovIterates:
    """Iterates (A A^T)^i A g stored as unit vectors plus log-norms."""

    q: int
    units: np.ndarray
    log_norms: np.ndarray
    g_seed: int
    side: str = "left"

    @property
    def vectors(self) -> np.ndarray:
        with np.errstate(over="ignore"):
            return self.units * np.exp(self.log_norms)[:, None]


def _start_vector(dim: int, seed: int) -> np.ndarray:
    return counter_normals(seed, [0], np.arange(dim))[0]


def krylov_build(A, q: int, seed: int, side: str = "left",
                 counter: OpCounter | None = None) -> KrylovIterates:
    """Left: (A A^T)^i A g, g in R^d. Right: (A^T A)^i A^T g, g in R^n."""
    A = as_matrix(A)
    if q < 0:
        raise ParameterError("q must be nonnegative")
    M = A if side == "left" else A.T
    if side not in ("left", "right"):
        raise ParameterError(f"unknown side {side!r}")
    g = _start_vector(M.shape[1], seed)
    units = np.zeros((q + 1, M.shape[0]))
    logs = np.full(q + 1, -np.inf)
    v = M @ g
    if counter is not None:
        counter.mult(1)
    acc = 0.0
    for i in range(q + 1):
        if i > 0:
            v = M @ (M.T @ v)
            if counter is not None:
                counter.mult(2)
        nv = np.linalg.norm(v)
        if nv == 0.0 or not np.isfinite(nv):
            # invariant subspace hit zero: all later iterates vanish
            break
        acc += math.log(nv)
        units[i] = v / nv
        logs[i] = acc
        v = units[i]
    return KrylovIterates(q, units, logs, int(seed), side)


def krylov_degree(n: int, d: int, k: int, s: int, eps: float, C: float = 1.0) -> int:
    r = min(n, d)
    inner = s * k * k * math.sqrt(s * r * max(math.log(max(n, 2)), 1.0)) / eps
    return max(1, math.ceil(C / math.sqrt(eps) * math.log(max(inner, math.e))))


def power_support(A, k: int, s: int, eps: float, seed: int, C: float = 1.0,
                  counter: OpCounter | None = None) -> SupportPair:
    S, T, _, _ = _power_support(A, k, s, eps, seed, C, counter)
    return S


def _power_support(A, k, s, eps, seed, C, counter):
    A = as_matrix(A)
    if not 0 < eps < 0.5:
        raise ParameterError("eps must lie in (0, 1/2)")
    n, d = A.shape
    q = krylov_degree(n, d, k, s, eps, C)
    left = krylov_build(A, q, seed, "left", counter)
    right = krylov_build(A, q, derive_seed(seed, RIGHT_SEED_OFFSET), "right", counter)
    S = top_indices(np.abs(_last(left)), s * k)
    T = top_indices(np.abs(_last(right)), s * k)
    return SupportPair.of(S, T), left, right, q


def _last(it: KrylovIterates) -> np.ndarray:
    ok = np.flatnonzero(np.isfinite(it.log_norms))
    return it.units[ok[-1]] if ok.size else it.units[0]


# ---------------------------------------------------------------- Chebyshev polynomials

def chebyshev_T_coeffs(q: int) -> list:
    """Exact integer monomial coefficients of the degree-q Chebyshev polynomial T_q."""
    prev, cur = [1], [0, 1]
    if q == 0:
        return prev
    for _ in range(q - 1):
        nxt = [0] * (len(cur) + 1)
        for i, c in enumerate(cur):
            nxt[i + 1] += 2 * c
        for i, c in enumerate(prev):
            nxt[i] -= c
        prev, cur = cur, nxt
    return cur


def _two_sum(a, b):
    s = a + b
    bb = s - a
    return s, (a - (s - bb)) + (b - bb)


def _split(a):
    c = 134217729.0 * a
    hi = c - (c - a)
    return hi, a - hi


def _two_prod(a, b):
    p = a * b
    ah, al = _split(a)
    bh, bl = _split(b)
    return p, ((ah * bh - p) + ah * bl + al * bh) + al * bl


def dd_horner(hi: np.ndarray, lo: np.ndarray, x) -> np.ndarray:
    """Evaluate sum_m (hi_m + lo_m) x^m in double-double arithmetic."""
    x = np.asarray(x, dtype=float)
    rh = np.full(x.shape, hi[-1])
    rl = np.full(x.shape, lo[-1])
    for m in range(len(hi) - 2, -1, -1):
        p, e = _two_prod(rh, x)
        e = e + rl * x
        sh, sl = _two_sum(p, hi[m])
        sl = sl + e + lo[m]
        rh, rl = _two_sum(sh, sl)
    return rh + rl


@dataclass
class ChebyshevPoly:
    """p(x) = (1+gamma) alpha T_q(x/alpha) / T_q(1+gamma) in monomial form."""

    degree: int
    alpha: float
    gamma: float
    coeffs: np.ndarray
    coeffs_lo: np.ndarray = field(repr=False)
    exact: list = field(repr=False, default_factory=list)

    def __call__(self, x) -> np.ndarray:
        return dd_horner(self.coeffs, self.coeffs_lo, x)

    def bound_low(self) -> float:
        return self.alpha / 2.0 ** (self.degree * math.sqrt(self.gamma) - 1)

    def check(self, points: int = 50, slack: float = 1e-9) -> dict:
        a, g = self.alpha, self.gamma
        top = (1 + g) * a
        fixed = abs(float(self(np.array([top]))[0]) - top) <= slack * top
        hi_x = np.linspace(top, 2 * top, points)
        above = bool(np.all(self(hi_x) >= hi_x * (1 - slack)))
        lo_x = np.linspace(0.0, a, points)
        small = bool(np.all(np.abs(self(lo_x)) <= self.bound_low() * (1 + slack)))
        parity = True
        if self.degree % 2:
            parity = all(c == 0 for c in self.exact[0::2])
        return {"fixed_point": fixed, "dominates": above, "small_below": small, "parity": parity}


def chebyshev_poly(q: int, alpha: float, gamma: float) -> ChebyshevPoly:
    if q < 1 or q > MAX_CHEB_DEGREE:
        raise ParameterError(f"degree {q} outside [1, {MAX_CHEB_DEGREE}]")
    if not alpha > 0 or not 0 < gamma <= 1:
        raise ParameterError("need alpha > 0 and gamma in (0, 1]")
    t = chebyshev_T_coeffs(q)
    a = Fraction(alpha)
    y = 1 + Fraction(gamma)
    Ty = sum(c * y ** m for m, c in enumerate(t))
    lead = y * a / Ty
    exact = [lead * c / a ** m for m, c in enumerate(t)]
    hi = np.array([float(c) for c in exact])
    lo = np.array([float(c - Fraction(h)) if math.isfinite(h) else 0.0
                   for c, h in zip(exact, hi)])
    return ChebyshevPoly(q, float(alpha), float(gamma), hi, lo, exact)


def sweep_degree(q: int) -> int:
    """Largest odd degree usable with q+1 stored iterates (capped below 64)."""
    deg = min(2 * q + 1, MAX_CHEB_DEGREE - 1)
    return deg if deg % 2 else deg - 1


def chebyshev_combination(it: KrylovIterates, alpha: float, gamma: float, degree: int) -> np.ndarray:
    """Direction of U p(Sigma) V^T g built only from stored iterates (a positive multiple)."""
    t = chebyshev_T_coeffs(degree)
    ok = np.isfinite(it.log_norms)
    terms, logs, signs = [], [], []
    for i in range((degree - 1) // 2 + 1):
        m = 2 * i + 1
        if not ok[i] or t[m] == 0:
            continue
        logs.append(math.log(abs(t[m])) + it.log_norms[i] - m * math.log(alpha))
        signs.append(1.0 if t[m] > 0 else -1.0)
        terms.append(it.units[i])
    if not terms:
        return np.zeros(it.units.shape[1])
    logs = np.array(logs)
    w = np.array(signs) * np.exp(logs - logs.max())
    return w @ np.array(terms)


# ---------------------------------------------------------------- certified bounds

@dataclass(frozen=True)
class SvBounds:
    j: int
    L: float
    U: float

    @property
    def ratio(self) -> float:
        if self.L > 0:
            return self.U / self.L
        return 1.0 if self.U == 0 else math.inf


def norm_depth(d: int, eps: float) -> int:
    return max(4, math.ceil(math.log(max(d, 2)) / math.sqrt(eps)))


def residual_norm_estimate(A, B, depth: int, seed: int,
                           counter: OpCounter | None = None) -> float:
    """Lanczos (full reorthogonalization) estimate of ||A - B||_2; never exceeds it."""
    A = as_matrix(A)
    d = A.shape[1]
    R = A if B is None else A - B
    v = _start_vector(d, seed)
    v /= np.linalg.norm(v)
    Q = [v]
    alphas, betas = [], []
    for it in range(min(depth, d)):
        w = R.T @ (R @ Q[-1])
        if counter is not None:
            counter.mult(2)
        a = float(Q[-1] @ w)
        alphas.append(a)
        Qm = np.array(Q)
        w = w - Qm.T @ (Qm @ w)
        w = w - Qm.T @ (Qm @ w)
        b = float(np.linalg.norm(w))
        if b <= 1e-13 * max(abs(a), 1e-300) or it == min(depth, d) - 1:
            break
        betas.append(b)
        Q.append(w / b)
    Tm = np.diag(alphas)
    for i, b in enumerate(betas[: len(alphas) - 1]):
        Tm[i, i + 1] = Tm[i + 1, i] = b
    theta = float(np.linalg.eigvalsh(Tm)[-1]) if alphas else 0.0
    return math.sqrt(max(theta, 0.0))


def _block_approx(A, sup: SupportPair, rank: int):
    """Best rank-`rank` approximation supported on S x T, embedded in n x d."""
    n, d = A.shape
    B = np.zeros((n, d))
    S, T = list(sup.S), list(sup.T)
    if rank <= 0 or not S or not T:
        return B, np.zeros(0)
    block = A[np.ix_(S, T)]
    sv = np.linalg.svd(block, compute_uv=False)
    r = min(rank, len(S), len(T))
    res = svd_truncated(block, r)
    B[np.ix_(S, T)] = res.reconstruct()
    return B, sv


def sv_bounds(A, sup: SupportPair, j: int, eps: float, seed: int = 0,
              counter: OpCounter | None = None, depth: int | None = None) -> SvBounds:
    """L <= sigma_j(A)^2 <= U from the S x T block and a residual norm estimate."""
    A = as_matrix(A)
    sup.check(*A.shape)
    if j < 1:
        raise ParameterError("j must be >= 1")
    depth = norm_depth(A.shape[1], eps) if depth is None else depth
    block = A[np.ix_(list(sup.S), list(sup.T))]
    sv = np.linalg.svd(block, compute_uv=False) if block.size else np.zeros(0)
    L = float(sv[j - 1] ** 2) if j <= sv.size else 0.0
    B, _ = _block_approx(A, sup, j - 1)
    est = residual_norm_estimate(A, B, depth, derive_seed(seed, j, 11), counter)
    U = ((1 + eps) * est) ** 2
    return SvBounds(j, L, max(U, L))


def certified(b: SvBounds, eps: float) -> bool:
    return b.ratio <= 1 + CERT_FACTOR * eps


def find_sigma_k1(A, sup: SupportPair, k: int, eps: float, seed: int = 0,
                  counter: OpCounter | None = None, info: dict | None = None):
    """Interval [lo, hi] around sigma_(k+1)(A) with hi/lo <= (1 + sqrt(eps))^2."""
    A = as_matrix(A)
    n, d = A.shape
    info = {} if info is None else info
    info["calls"] = 0
    if k >= min(n, d):
        info["case"] = "rank"
        return 0.0, 1e-12
    depth = norm_depth(d, eps)
    r = math.sqrt(eps)

    def bounds(j):
        info["calls"] += 1
        return sv_bounds(A, sup, j, eps, seed, counter, depth)

    bk = bounds(k)
    if bk.U == 0:
        info["case"] = "zero"
        return 0.0, 0.0
    if certified(bk, eps):
        B, _ = _block_approx(A, sup, k)
        est = residual_norm_estimate(A, B, depth, derive_seed(seed, k + 1, 13), counter)
        info["case"] = "deflate"
        return est / (1 + r), est * (1 + eps)
    # smallest uncertified index; index k is known to be uncertified
    lo_j, hi_j, hi_b = 1, k, bk
    while lo_j < hi_j:
        mid = (lo_j + hi_j) // 2
        bm = bounds(mid)
        if certified(bm, eps):
            lo_j = mid + 1
        else:
            hi_j, hi_b = mid, bm
    info["case"] = "search"
    info["j_star"] = hi_j
    hi = math.sqrt(hi_b.U)
    return hi / (1 + r) ** 2, hi


# ---------------------------------------------------------------- bucket sweep and pipeline

def bucket_alphas(lo: float, eps: float) -> np.ndarray:
    nb = math.ceil(2 / math.sqrt(eps))
    return lo * (1 + eps) ** np.arange(-1, nb + 2)


def bucket_sweep(A, iterates, lo: float, eps: float, s: int, k: int,
                 base: SupportPair | None = None) -> SupportPair:
    """Add the top-sk coordinates of each Chebyshev combination to the support.

    `iterates` is a (left, right) pair of KrylovIterates; A is not multiplied here.
    """
    left, right = iterates
    S = set() if base is None else set(base.S)
    T = set() if base is None else set(base.T)
    if not lo > 0:
        return SupportPair.of(S, T)
    deg = sweep_degree(min(left.q, right.q))
    for a in bucket_alphas(lo, eps):
        u = chebyshev_combination(left, a, eps, deg)
        v = chebyshev_combination(right, a, eps, deg)
        S.update(int(i) for i in top_indices(np.abs(u), s * k))
        T.update(int(i) for i in top_indices(np.abs(v), s * k))
    return SupportPair.of(S, T)


@dataclass
class SpectralResult:
    factor: SparseRankKFactor
    err: float
    support: SupportPair
    interval: tuple
    counter: OpCounter
    q: int
    info: dict


def op_budget(n: int, d: int, k: int, s: int, eps: float, C: float = 16.0) -> float:
    """C (1/sqrt(eps)) ln(s r k ln n / eps), r = min(n, d)."""
    r = min(n, d)
    return C / math.sqrt(eps) * math.log(s * r * k * math.log(max(n, 2)) / eps)


def sparse_spectral_lra(A, k: int, s: int, eps: float, seed: int, C: float = 1.0,
                        sweep: bool = True) -> SpectralResult:
    A = as_matrix(A)
    n, d = A.shape
    if k < 1 or s < 1:
        raise ParameterError("k and s must be positive")
    counter = counter_for(A)
    sup, left, right, q = _power_support(A, k, s, eps, seed, C, counter)
    info: dict = {}
    lo, hi = find_sigma_k1(A, sup, k, eps, derive_seed(seed, 3), counter, info)
    full = sup
    if sweep:
        full = bucket_sweep(A, (left, right), lo, eps, s, k, base=sup)
    S, T = list(full.S), list(full.T)
    block = A[np.ix_(S, T)]
    kk = min(k, len(S), len(T))
    comps = []
    B = np.zeros((n, d))
    if kk > 0 and np.any(block):
        res = svd_truncated(block, kk)
        for i in range(kk):
            if res.sigma[i] > 0:
                comps.append(Component(float(res.sigma[i]), np.array(S), res.U[:, i].copy(),
                                       np.array(T), res.V[:, i].copy()))
        B[np.ix_(S, T)] = res.reconstruct()
    err = 0.0
    if np.any(A):
        err = residual_norm_estimate(A, B, norm_depth(d, eps), derive_seed(seed, 5), counter)
    F = SparseRankKFactor(comps, s=max(len(S), len(T), 1), k=k, tau_max=math.inf)
    return SpectralResult(F, err, full, (lo, hi), counter, q, info)


def planted_sparse_spectral(n: int, d: int, s: int, k: int, gap: float, seed: int):
    """Block instance: k disjoint s-sparse rank-1 parts plus unit-norm Gaussian noise.

    Noise lives on the complementary rows and columns, so the top-k singular
    vectors are exactly s-sparse; sigma_(k+1) = 1 and sigma_k = gap.
    Returns (A, sigma, row supports, column supports).
    """
    if s * k >= min(n, d):
        raise ParameterError("supports do not fit")
    rng = np.random.default_rng(seed)
    rows = rng.permutation(n)
    cols = rng.permutation(d)
    sig = np.sort(gap * (1 + rng.uniform(size=k)))[::-1]
    sig[-1] = gap
    A = np.zeros((n, d))
    Ss, Ts = [], []
    for i in range(k):
        S = np.sort(rows[i * s:(i + 1) * s])
        T = np.sort(cols[i * s:(i + 1) * s])
        x = rng.standard_normal(s)
        y = rng.standard_normal(s)
        A[np.ix_(S, T)] = sig[i] * np.outer(x / np.linalg.norm(x), y / np.linalg.norm(y))
        Ss.append(S)
        Ts.append(T)
    R, C = np.sort(rows[s * k:]), np.sort(cols[s * k:])
    E = rng.standard_normal((R.size, C.size))
    A[np.ix_(R, C)] = E / np.linalg.norm(E, 2)
    return A, sig, Ss, Ts
