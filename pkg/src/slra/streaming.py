"""One-pass streaming sparse low-rank approximation from linear sketches.

Three recoveries share one ingestion path:

* net_recover: Gaussian sketch + exhaustive search over a net of sparse
  low-rank matrices (tiny instances only).
* rel_err_recover: heavy rows/columns from norm sketches, entries of the
  heavy submatrix from an entrywise CountSketch, then a rank-k SVD.
* add_err_recover: heavy rows/columns, a one-pass approximate l2 row sample
  from row-subsampled CountSketches, LinearTimeSVD, and a factorization
  assembled from approximate-matrix-product sketches.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import (Component, OracleInfeasible, ParameterError, SparseRankKFactor, SupportPair,
                   TAU_MAX_DEFAULT, enumeration_budget, svd_truncated, top_indices)
from .nets import best_taus, component_resolution, rank1_atoms, snap_tau
from .sketch import (CountSketch, GaussianSketch, MeasurementLedger, RowSketch, StreamUpdate,
                     derive_seed, hash_uniform, odd, row_norm_estimates)

ALGOS = ("net", "rel", "add")

# seed tags for the individual sketches
_T_GAUSS, _T_NORMS, _T_CS, _T_LEVEL, _T_LEVELHASH, _T_AMM, _T_FROB = range(1, 8)


@dataclass
class StreamConstants:
    """Hidden constants of the sketch sizes (all default to 4)."""

    net_m: float = 4.0
    norm_buckets: float = 4.0
    norm_reps: float = 4.0
    norm_delta: float = 0.1
    cs_buckets: float = 4.0
    level_buckets: float = 4.0
    level_reps: float = 4.0
    amm_r: float = 4.0
    amm_t: float = 4.0
    qualify: float = 0.25
    frob_m: int = 400
    sample_cap: float = 25.0 / 4.0 + 1.0


@dataclass
class BicriteriaOutput:
    S: np.ndarray
    T: np.ndarray
    left: np.ndarray          # |S| x k
    right: np.ndarray         # |T| x k
    cost_estimate: float
    info: dict = field(default_factory=dict)

    def dense(self, n: int, d: int) -> np.ndarray:
        D = np.zeros((n, d))
        if self.S.size and self.T.size and self.left.size:
            D[np.ix_(self.S, self.T)] = self.left @ self.right.T
        return D

    @property
    def rank(self) -> int:
        return int(self.left.shape[1]) if self.left.ndim == 2 else 0


@dataclass
class NetOutput:
    factor: SparseRankKFactor
    cost_estimate: float


class StreamContext:
    """Registered sketches of an n x d matrix fed by entrywise updates."""

    def __init__(self, algo: str, n: int, d: int, s: int, k: int, eps: float, seed: int,
                 consts: StreamConstants | None = None, tau_max: float = TAU_MAX_DEFAULT):
        if algo not in ALGOS:
            raise ParameterError(f"unknown algorithm {algo!r}")
        if min(n, d, s, k) < 1 or not 0 < eps < 1:
            raise ParameterError("need positive n, d, s, k and eps in (0, 1)")
        self.algo, self.n, self.d, self.s, self.k = algo, int(n), int(d), int(s), int(k)
        self.eps, self.seed = float(eps), int(seed)
        self.c = consts or StreamConstants()
        self.tau_max = float(tau_max)
        self.ledger = MeasurementLedger()
        self.states: dict = {}
        self.routes: dict = {}
        self.finalized = False
        getattr(self, f"_setup_{algo}")()

    # ---------------------------------------------------------- configuration
    def _reg(self, name, state, route):
        self.states[name] = state
        self.routes[name] = route

    def net_measurements(self) -> int:
        return math.ceil(self.c.net_m * (self.s * self.k / self.eps ** 2)
                         * math.log(max(self.n / self.s, math.e)))

    def _setup_net(self):
        m = self.net_measurements()
        self._reg("gaussian", GaussianSketch(m, self.n * self.d, derive_seed(self.seed, _T_GAUSS),
                                             self.ledger, "gaussian"), "flat")

    def _norm_sketches(self, eps_prime):
        c = self.c
        buckets = math.ceil(c.norm_buckets / eps_prime)
        width = math.ceil(math.log(max(self.n, self.d) / c.norm_delta) * 16)  # alpha = 1/4
        reps = odd(math.ceil(c.norm_reps * math.log(1 / c.norm_delta)))
        # one seed for both sides so that transposing the stream swaps the sketches
        sd = derive_seed(self.seed, _T_NORMS)
        self._reg("row_norms", RowSketch(self.n, self.d, buckets, reps, sd, "gaussian", width,
                                         self.ledger, "row_norms"), "row")
        self._reg("col_norms", RowSketch(self.d, self.n, buckets, reps, sd, "gaussian", width,
                                         self.ledger, "col_norms"), "col")

    def rel_buckets(self) -> int:
        return math.ceil(self.c.cs_buckets * self.s ** 2 * self.k ** 2 / self.eps ** 4)

    def _setup_rel(self):
        self._norm_sketches(self.eps / (100 * self.s * self.k))
        reps = odd(math.ceil(math.log(self.n * self.d)))
        self._reg("entries", CountSketch(self.n * self.d, self.rel_buckets(), reps,
                                         derive_seed(self.seed, _T_CS), self.ledger, "entries"),
                  "flat")

    def levels(self) -> np.ndarray:
        L = math.ceil(math.log2(self.n ** 2 / self.eps ** 2))
        return 2.0 ** -np.arange(L + 1)

    def level_buckets(self) -> int:
        return math.ceil(self.c.level_buckets * self.s * self.k ** 2
                         * math.log(self.n / self.eps) / self.eps ** 6)

    def _setup_add(self):
        c = self.c
        self._reg("frob", GaussianSketch(c.frob_m, self.n * self.d,
                                         derive_seed(self.seed, _T_FROB), self.ledger, "frob"),
                  "flat")
        self._norm_sketches(self.eps / (4 * self.s * self.k))
        self.level_seed = derive_seed(self.seed, _T_LEVELHASH)
        reps = odd(math.ceil(c.level_reps * math.log(math.log(self.n / self.eps))))
        for ell, _ in enumerate(self.levels()):
            name = f"level{ell}"
            self._reg(name, CountSketch(self.n * self.d, self.level_buckets(), reps,
                                        derive_seed(self.seed, _T_LEVEL, ell), self.ledger, name),
                      ("level", ell))
        w = math.ceil(c.amm_r * self.k / self.eps ** 2)
        tb = math.ceil(c.amm_t * self.s * self.k / self.eps ** 3)
        J = odd(math.ceil(math.log(self.n * self.s * self.k / self.eps)))
        self._reg("amm", RowSketch(self.n, self.d, tb, J, derive_seed(self.seed, _T_AMM),
                                   "countsketch", w, self.ledger, "amm"), "row")

    def level_of_rows(self, rows) -> np.ndarray:
        """Deepest level whose subsample contains each row.

        Level l keeps row i iff u_i < 2^-l with u_i a seeded hash of i, so the
        subsamples are nested and every row is in level 0.
        """
        u = hash_uniform(self.level_seed, np.asarray(rows, dtype=np.int64))
        last = np.ceil(-np.log2(u)).astype(np.int64) - 1
        return np.clip(last, 0, len(self.levels()) - 1)

    # ---------------------------------------------------------- ingestion
    def ingest(self, rows, cols=None, vals=None) -> None:
        if isinstance(rows, StreamUpdate):
            rows, cols, vals = [rows.row], [rows.col], [rows.delta]
        if self.finalized:
            raise RuntimeError("stream already finalized; no further updates accepted")
        i = np.atleast_1d(np.asarray(rows, dtype=np.int64))
        j = np.atleast_1d(np.asarray(cols, dtype=np.int64))
        v = np.atleast_1d(np.asarray(vals, dtype=float))
        if not (i.shape == j.shape == v.shape):
            raise ParameterError("rows, cols and vals must have equal length")
        if i.size == 0:
            return
        if i.min() < 0 or i.max() >= self.n or j.min() < 0 or j.max() >= self.d:
            raise ParameterError("update index out of range")
        flat = i * self.d + j
        lvl = self.level_of_rows(i) if self.algo == "add" else None
        for name, st in self.states.items():
            route = self.routes[name]
            if route == "flat":
                st.update(flat, v)
            elif route == "row":
                st.update(i, j, v)
            elif route == "col":
                st.update(j, i, v)
            else:
                keep = lvl >= route[1]
                if keep.any():
                    st.update(flat[keep], v[keep])

    def ingest_matrix(self, A, order_seed: int | None = None) -> None:
        A = np.asarray(A, dtype=float)
        r, c = np.nonzero(A)
        if order_seed is not None:
            p = np.random.default_rng(order_seed).permutation(r.size)
            r, c = r[p], c[p]
        self.ingest(r, c, A[r, c])

    def finalize(self) -> "StreamContext":
        self.finalized = True
        return self

    def fresh(self) -> "StreamContext":
        return StreamContext(self.algo, self.n, self.d, self.s, self.k, self.eps, self.seed,
                             self.c, self.tau_max)

    def merge(self, other: "StreamContext") -> "StreamContext":
        if (self.algo, self.n, self.d, self.s, self.k, self.eps, self.seed) != \
                (other.algo, other.n, other.d, other.s, other.k, other.eps, other.seed):
            raise ParameterError("cannot merge contexts with different configurations")
        out = StreamContext.__new__(StreamContext)
        out.__dict__.update(self.__dict__)
        out.states = {name: st.merge(other.states[name]) for name, st in self.states.items()}
        out.finalized = False
        return out

    def same_state(self, other: "StreamContext") -> bool:
        return all(st.same_state(other.states[name]) for name, st in self.states.items())


def ingest(ctx: StreamContext, u) -> None:
    ctx.ingest(u)


# ---------------------------------------------------------------- net recovery

def net_recover(ctx: StreamContext, budget: int | None = None) -> NetOutput:
    """Net point minimizing the sketched distance ||G vec(A) - G vec(X)||."""
    if ctx.algo != "net":
        raise ParameterError("context was not configured for net recovery")
    budget = enumeration_budget() if budget is None else budget
    G = ctx.states["gaussian"]
    y = G.values()
    n, d, s, k, eps = ctx.n, ctx.d, ctx.s, ctx.k, ctx.eps
    res = component_resolution(eps, k, ctx.tau_max)
    idx, val, _, _, _ = rank1_atoms(n, d, s, res, budget)
    N = idx.shape[0]
    if N ** k > budget:
        raise OracleInfeasible(f"{N}^{k} net tuples exceed budget {budget}")
    # G vec(x y^T) for every atom, from columns regenerated on demand
    uniq = np.unique(idx)
    Gc = G.columns(uniq)
    pos = np.searchsorted(uniq, idx)
    V = np.einsum("mnj,nj->nm", Gc[:, pos], val) if N else np.zeros((0, G.m))
    inner = V @ y
    yy = float(y @ y)
    if k == 1:
        gram = np.sum(V * V, axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.where(gram > 0, inner / gram, 0.0)
        t = snap_tau(t, eps, 1, ctx.tau_max)
        cost = yy - 2 * t * inner + t * t * gram
        j = int(np.argmin(cost))
        combo, taus, best = (j,), [float(t[j])], float(cost[j])
    else:
        import itertools
        best, combo, taus = math.inf, None, None
        for c in itertools.product(range(N), repeat=k):
            c = list(c)
            Gm = V[c] @ V[c].T
            t = best_taus(inner[c], Gm, eps, k, ctx.tau_max)
            cost = yy - 2 * t @ inner[c] + t @ Gm @ t
            if cost < best - 1e-12 * max(yy, 1.0):
                best, combo, taus = float(cost), c, list(t)
    comps = []
    for j, t in zip(combo, taus):
        if t == 0:
            continue
        fi = idx[j]
        block = val[j].reshape(s, s)
        x = block[:, int(np.argmax(np.abs(block).sum(axis=0)))]
        x = x / np.linalg.norm(x)
        yv = x @ block
        comps.append(Component(float(t), np.unique(fi // d), x, np.unique(fi % d),
                               yv / np.linalg.norm(yv)))
    F = SparseRankKFactor(comps, s=s, k=k, tau_max=ctx.tau_max)
    return NetOutput(F, best / G.m)


# ---------------------------------------------------------------- heavy rows and columns

def select_heavy(v: np.ndarray, scale: float, eps: float, s: int, k: int, cap: int) -> np.ndarray:
    """Indices with estimate >= (5/8) sqrt(eps/sk) * scale, at most `cap` of them."""
    thr = 0.625 * math.sqrt(eps / (s * k)) * scale
    cand = np.flatnonzero((v > 0) & (v >= thr))
    if cand.size > cap:
        cand = cand[top_indices(v[cand], cap)]
    return np.sort(cand)


def _tail_scale(v: np.ndarray, drop: int) -> float:
    keep = np.ones(v.size, bool)
    keep[top_indices(v, drop)] = False
    return float(np.sqrt(np.sum(v[keep] ** 2)))


def _heavy_sets(ctx: StreamContext, scale_rows=None, scale_cols=None):
    vr = row_norm_estimates(ctx.states["row_norms"])
    vc = row_norm_estimates(ctx.states["col_norms"])
    sk = ctx.s * ctx.k
    drop = math.ceil(sk / ctx.eps)
    if scale_rows is None:
        scale_rows, scale_cols = _tail_scale(vr, drop), _tail_scale(vc, drop)
    cap = math.ceil(ctx.c.sample_cap * sk / ctx.eps)
    S = select_heavy(vr, scale_rows, ctx.eps, ctx.s, ctx.k, cap)
    T = select_heavy(vc, scale_cols, ctx.eps, ctx.s, ctx.k, cap)
    return S, T, vr, vc


def _recover_block(cs: CountSketch, S, T, d) -> np.ndarray:
    if S.size == 0 or T.size == 0:
        return np.zeros((S.size, T.size))
    flat = (S[:, None] * d + T[None, :]).ravel()
    return cs.recover(flat).reshape(S.size, T.size)


def _empty(S=None, T=None, k=0, info=None) -> BicriteriaOutput:
    S = np.zeros(0, np.int64) if S is None else S
    T = np.zeros(0, np.int64) if T is None else T
    return BicriteriaOutput(S, T, np.zeros((S.size, k)), np.zeros((T.size, k)), 0.0, info or {})


# ---------------------------------------------------------------- relative error

def rel_err_recover(ctx: StreamContext) -> BicriteriaOutput:
    if ctx.algo != "rel":
        raise ParameterError("context was not configured for relative-error recovery")
    S, T, _, _ = _heavy_sets(ctx)
    if S.size == 0 or T.size == 0:
        return _empty(S, T, 0, {"reason": "no heavy rows or columns"})
    Ahat = _recover_block(ctx.states["entries"], S, T, ctx.d)
    kk = min(ctx.k, S.size, T.size)
    if not np.any(Ahat):
        return _empty(S, T, 0, {"reason": "recovered block is zero"})
    r = svd_truncated(Ahat, kk)
    left = r.U * r.sigma
    resid = float(np.sum(Ahat ** 2) - np.sum(r.sigma ** 2))
    return BicriteriaOutput(S, T, left, r.V, max(resid, 0.0), {"block_shape": Ahat.shape})


# ---------------------------------------------------------------- additive error

def linear_time_svd(rows: np.ndarray, probs, k: int, c: float = 1.0) -> np.ndarray:
    """Top-k right singular vectors of the sample with rows scaled by 1/sqrt(c p_i)."""
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    probs = np.asarray(probs, dtype=float)
    dim = rows.shape[1]
    if rows.shape[0] == 0:
        return np.zeros((dim, k))
    if np.any(probs <= 0):
        raise ParameterError("sampling probabilities must be positive")
    C = rows / np.sqrt(c * probs)[:, None]
    if C.shape[0] < k:
        C = np.vstack([C, np.zeros((k - C.shape[0], dim))])
    kk = min(k, dim)
    V = np.zeros((dim, k))
    if np.any(C):
        V[:, :kk] = svd_truncated(C, kk).V
    return V


def l2_sample(ctx: StreamContext, S: np.ndarray, T: np.ndarray, N_hat: float):
    """One-pass approximate l2 row sample of A restricted to S x T.

    Row i qualifies at level l if it is in that level's subsample and its row
    recovered from that level has squared norm >= qualify * eps^2/k * 2^-l * N_hat.
    It is kept with inclusion probability equal to the largest qualifying 2^-l.
    Returns (sampled rows of S, recovered rows, inclusion probabilities).
    """
    lv = ctx.levels()
    last = ctx.level_of_rows(S)
    thr = ctx.c.qualify * ctx.eps ** 2 / ctx.k * N_hat
    chosen, vecs, probs = [], [], []
    for pos, i in enumerate(S):
        for ell in range(int(last[pos]) + 1):
            row = _recover_block(ctx.states[f"level{ell}"], np.array([i]), T, ctx.d)[0]
            if float(row @ row) >= thr * lv[ell] and float(row @ row) > 0:
                chosen.append(int(i))
                vecs.append(row)
                probs.append(float(lv[ell]))
                break
    vecs = np.array(vecs).reshape(len(chosen), T.size)
    return np.array(chosen, dtype=np.int64), vecs, np.array(probs)


def add_err_recover(ctx: StreamContext) -> BicriteriaOutput:
    if ctx.algo != "add":
        raise ParameterError("context was not configured for additive-error recovery")
    F2 = ctx.states["frob"].frob_sq_estimate()
    if F2 <= 0:
        return _empty(k=ctx.k, info={"reason": "zero matrix"})
    F = math.sqrt(F2)
    S, T, _, _ = _heavy_sets(ctx, F, F)
    info = {"frob_sq_estimate": F2}
    if S.size == 0 or T.size == 0:
        return _empty(S, T, ctx.k, dict(info, reason="no heavy rows or columns"))
    N_hat = float(np.sum(_recover_block(ctx.states["level0"], S, T, ctx.d) ** 2))
    info["block_sq_estimate"] = N_hat
    if N_hat < ctx.eps * F2:
        return _empty(S, T, ctx.k, dict(info, reason="heavy block below eps * ||A||_F^2"))
    rows, vecs, probs = l2_sample(ctx, S, T, N_hat)
    info["sampled_rows"] = rows.tolist()
    V = linear_time_svd(vecs, probs, ctx.k) if rows.size else np.zeros((T.size, ctx.k))
    amm = ctx.states["amm"]
    ARt = amm.recover_rows(S)                       # rows of A R^T (|S| x w)
    RT = amm.column_map()[T].T                      # columns T of the column sketch R
    left = ARt @ RT @ V
    D = left @ V.T
    cost = float(F2 - np.sum(D * D))
    return BicriteriaOutput(S, T, left, V, cost, info)


# ---------------------------------------------------------------- instances

def planted_block(n: int, d: int, s: int, k: int, seed: int, scale: float = 5.0,
                  noise: float = 0.1):
    """Rank-k s x s block (singular values scale, 0.7 scale, ...) plus dense Gaussian noise."""
    if k > s or s > min(n, d):
        raise ParameterError("need k <= s <= min(n, d)")
    rng = np.random.default_rng(seed)
    S = np.sort(rng.choice(n, s, replace=False))
    T = np.sort(rng.choice(d, s, replace=False))
    U = np.linalg.qr(rng.standard_normal((s, k)))[0]
    V = np.linalg.qr(rng.standard_normal((s, k)))[0]
    sig = scale * 0.7 ** np.arange(k)
    A = noise * rng.standard_normal((n, d))
    A[np.ix_(S, T)] += (U * sig) @ V.T
    return A, S, T
