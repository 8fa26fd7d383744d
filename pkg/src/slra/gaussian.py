"""Planted sparse low-rank signals in Gaussian noise: generators, detection and estimation.

Instances are A = lam * X + G with G i.i.d. N(0, 1) and X a sum of k rank-1
blocks on pairwise disjoint s x s supports with ||X||_2 = 1.

Detection algorithms see A only through `SampledAccess`, which charges every
entry read (or the equivalent sketch cost) to a measurement ledger.
"""
from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .core import (Component, OracleInfeasible, ParameterError, SparseRankKFactor, as_matrix,
                   enumeration_budget, materialize)
from .nets import NetSpec, sphere_net_array, ssk_net
from .sketch import GaussianSketch, MeasurementLedger, derive_seed

# seed tags
_T_SUPPORT, _T_VALUES, _T_NOISE, _T_TAU = 1, 2, 3, 4
_T_SMALL, _T_LARGE, _T_SKETCH, _T_SURROGATE = 11, 12, 13, 14

# Detection constants. Thresholds are calibrated on null-only seeds by
# scripts/calibrate_detection.py and frozen here per (n, s, k); other shapes
# fall back to the conservative defaults.
SMALL_S_C_ALPHA = 1.0
SMALL_S_C_TRIALS = 25.0
SMALL_S_C_TAU = 20.0
LARGE_S_C_N = 1.0
LARGE_S_C_G = 1.6
LARGE_S_NET_EPS = 0.5
CALIBRATION_TAG = 0xCA11B
CALIBRATED_SMALL_S: dict = {(128, 2, 1): (3.32341, 5.17581, 19.1088)}
CALIBRATED_LARGE_S: dict = {(64, 8, 1): 1.30109}


def _rng(seed: int, *tags: int) -> np.random.Generator:
    return np.random.default_rng(derive_seed(seed, *tags))


# ---------------------------------------------------------------- generators

def gen_sparse_vector(n: int, s: int, seed: int) -> np.ndarray:
    """s uniformly random coordinates carrying i.i.d. N(0, 1) values, zeros elsewhere."""
    if not 1 <= s <= n:
        raise ParameterError("need 1 <= s <= n")
    rng = _rng(seed, _T_SUPPORT)
    v = np.zeros(n)
    v[rng.choice(n, s, replace=False)] = rng.standard_normal(s)
    return v


@dataclass
class PlantedInstance:
    n: int
    s: int
    k: int
    lam: float
    X: SparseRankKFactor
    A: np.ndarray
    seed: int

    def dense_signal(self) -> np.ndarray:
        return materialize(self.X, self.n, self.n)


def gaussian_noise(n: int, seed: int) -> np.ndarray:
    """The noise matrix G used by `gen_planted` for the same seed."""
    return _rng(seed, _T_NOISE).standard_normal((n, n))


def gen_planted(n: int, s: int, k: int = 1, lam: float | None = None, seed: int = 0) -> PlantedInstance:
    """lam * X + G with k disjoint s x s rank-1 blocks and max |tau| = 1."""
    if s < 1 or k < 1 or s * k > n:
        raise ParameterError(f"disjoint supports need s*k <= n (s={s}, k={k}, n={n})")
    lam = math.sqrt(n) if lam is None else float(lam)
    rng = _rng(seed, _T_SUPPORT)
    rows = rng.permutation(n)[: s * k].reshape(k, s)
    cols = rng.permutation(n)[: s * k].reshape(k, s)
    vals = _rng(seed, _T_VALUES)
    tau = _rng(seed, _T_TAU).uniform(0.25, 1.0, size=k)
    tau /= tau.max()
    comps = []
    for i in range(k):
        x = vals.standard_normal(s)
        y = vals.standard_normal(s)
        xo, yo = np.argsort(rows[i]), np.argsort(cols[i])
        comps.append(Component(float(tau[i]), rows[i][xo], (x / np.linalg.norm(x))[xo],
                               cols[i][yo], (y / np.linalg.norm(y))[yo]))
    X = SparseRankKFactor(comps, s=s, k=k, tau_max=1.0)
    A = lam * materialize(X, n, n) + gaussian_noise(n, seed)
    return PlantedInstance(n, s, k, lam, X, A, int(seed))


# ---------------------------------------------------------------- flat sparsity

def flat_level(v) -> tuple[int, float]:
    """Smallest s = 2^l with at least s/2 entries of square >= ||v||^2 / (s (1 + log2 m))."""
    v = np.asarray(v, dtype=float).ravel()
    total = float(v @ v)
    if total == 0.0:
        raise ParameterError("flat_level needs a nonzero vector")
    m = v.size
    sq = np.sort(v * v)[::-1]
    L = 1.0 + math.log2(m)
    for ell in range(0, math.ceil(math.log2(m)) + 1 if m > 1 else 1):
        s_level = 2 ** ell
        thr = total / (s_level * L)
        if np.count_nonzero(sq >= thr) >= s_level / 2:
            return s_level, thr
    raise AssertionError("no flat level found")  # unreachable for nonzero v


def flat_decomposition(v) -> list[tuple[int, np.ndarray]]:
    """Split v into dyadic magnitude levels; level l holds entries with square in (2^-(l+1), 2^-l] * max."""
    v = np.asarray(v, dtype=float).ravel()
    sq = v * v
    top = sq.max() if v.size else 0.0
    out = []
    if top == 0.0:
        return out
    nz = sq > 0
    lvl = np.zeros(v.size, dtype=np.int64)
    lvl[nz] = np.floor(np.log2(top / sq[nz])).astype(np.int64)
    for ell in np.unique(lvl[nz]):
        part = np.where(nz & (lvl == ell), v, 0.0)
        out.append((int(ell), part))
    return out


# ---------------------------------------------------------------- detection

class SampledAccess:
    """Entry access to a hidden matrix; every read is charged to the ledger."""

    def __init__(self, A, ledger: MeasurementLedger | None = None):
        self._A = as_matrix(A)
        self.shape = self._A.shape
        self.ledger = MeasurementLedger() if ledger is None else ledger

    def entries(self, flat_idx, name: str = "entries", charge: int | None = None) -> np.ndarray:
        flat_idx = np.asarray(flat_idx, dtype=np.int64)
        self.ledger.register(name, flat_idx.size if charge is None else charge)
        return self._A.ravel()[flat_idx]

    def submatrix(self, rows, cols, name: str = "submatrix") -> np.ndarray:
        rows, cols = np.asarray(rows), np.asarray(cols)
        self.ledger.register(name, rows.size * cols.size)
        return self._A[np.ix_(rows, cols)]


@dataclass
class DetectionReport:
    verdict: str
    regime: str
    statistics: list = field(default_factory=list)
    ledger: MeasurementLedger = field(default_factory=MeasurementLedger)
    info: dict = field(default_factory=dict)

    @property
    def signal(self) -> bool:
        return self.verdict == "signal"

    def to_dict(self) -> dict:
        return {"verdict": self.verdict, "regime": self.regime, "statistics": self.statistics,
                "ledger": self.ledger.to_dict(), "measurements": self.ledger.total(),
                "info": self.info}


def small_s_regime(n: int, s: int, k: int) -> bool:
    return s <= math.sqrt(n / (k * math.log(n)))


def small_s_schedule(n: int, s: int, k: int, c_alpha: float = SMALL_S_C_ALPHA,
                     c_trials: float = SMALL_S_C_TRIALS) -> list[dict]:
    """Per level: guessed flat sparsity s', sample size m and number of trials."""
    b = s * s * k
    lb = max(1.0, math.log(b))
    out = []
    for i in range(0, max(1, math.ceil(math.log2(b))) + 1):
        sp = 2 ** i
        alpha = c_alpha / (sp * sp * lb)
        m = min(n * n, max(1, math.ceil(n * n * alpha * alpha)))
        trials = max(1, math.ceil(c_trials * sp * sp * lb * lb))
        out.append({"s_prime": sp, "alpha": alpha, "m": m, "trials": trials})
    return out


def l4_sketch_cost(m: int, n: int, s: int, k: int) -> int:
    """Measurement charge of a constant-factor 4-norm sketch of an m-entry sample."""
    return math.ceil(math.sqrt(m) * max(1.0, math.log(s * s * k)) * math.log(n))


def _level_constants(c_tau, levels: int) -> tuple:
    if np.ndim(c_tau) == 0:
        return (float(c_tau),) * levels
    if len(c_tau) != levels:
        raise ParameterError(f"need {levels} per-level threshold constants, got {len(c_tau)}")
    return tuple(float(c) for c in c_tau)


def detect_small_s(access, n: int, s: int, k: int, seed: int, c_tau=None,
                   c_alpha: float = SMALL_S_C_ALPHA, c_trials: float = SMALL_S_C_TRIALS,
                   early_exit: bool = True) -> DetectionReport:
    """Scan sample sizes from large to small; flag a sample whose sum of a^4 reaches c_tau * m."""
    if not isinstance(access, SampledAccess):
        access = SampledAccess(access)
    if access.shape != (n, n):
        raise ParameterError("matrix shape does not match n")
    if not small_s_regime(n, s, k):
        warnings.warn(f"s={s} is outside the small-sparsity regime for n={n}, k={k}")
    schedule = small_s_schedule(n, s, k, c_alpha, c_trials)
    if c_tau is None:
        c_tau = CALIBRATED_SMALL_S.get((n, s, k), SMALL_S_C_TAU)
    c_tau = _level_constants(c_tau, len(schedule))
    stats = []
    verdict = "null"
    for lvl, plan in enumerate(schedule):
        m, tau = plan["m"], c_tau[lvl] * plan["m"]
        rng = _rng(seed, _T_SMALL, lvl)
        cost = l4_sketch_cost(m, n, s, k)
        for t in range(plan["trials"]):
            idx = rng.choice(n * n, m, replace=False) if m < n * n else np.arange(n * n)
            a = access.entries(idx, name=f"l4_level{lvl}", charge=cost)
            a2 = a * a
            y = float(a2 @ a2)
            stats.append({"level": lvl, "s_prime": plan["s_prime"], "trial": t, "m": m,
                          "y": y, "ratio": y / m, "tau": tau})
            if y >= tau:
                verdict = "signal"
                if early_exit:
                    break
        if verdict == "signal" and early_exit:
            break
    return DetectionReport(verdict, "small_s", stats, access.ledger,
                           {"c_tau": c_tau, "c_alpha": c_alpha, "c_trials": c_trials})


def _log_binom(n: int, t: int) -> float:
    return math.lgamma(n + 1) - math.lgamma(t + 1) - math.lgamma(n - t + 1)


def net_log_size(n1: int, n2: int, t1: int, t2: int, eps: float) -> float:
    """log of the size of an eps-net over unit rank-1 t1 x t2-sparse n1 x n2 matrices."""
    return _log_binom(n1, t1) + _log_binom(n2, t2) + (t1 + t2) * math.log(6.0 / eps)


def scan_count(n1: int, n2: int, t1: int, t2: int, eps: float, budget: int) -> int:
    """Number of enumerated (support, net point) pairs in `sparse_rank1_scan`."""
    if t1 > t2:
        n1, t1 = n2, t2
    t1 = min(t1, n1)
    if t1 == 1:
        return n1
    if math.comb(n1, t1) > budget:
        return math.comb(n1, t1)
    try:
        return math.comb(n1, t1) * len(sphere_net_array(t1, eps / 2, budget))
    except OracleInfeasible:
        return budget + 1


def sparse_rank1_scan(M: np.ndarray, t1: int, t2: int, eps: float, budget: int):
    """max <M, x y^T> over t1-sparse x from a sphere net and exactly optimized t2-sparse unit y.

    The smaller side is enumerated; returns (score, evaluations) or None over budget.
    """
    if t1 > t2:
        M, t1, t2 = M.T, t2, t1
    n1, n2 = M.shape
    t1, t2 = min(t1, n1), min(t2, n2)
    if scan_count(n1, n2, t1, t2, eps, budget) > budget:
        return None
    X = np.array([[1.0]]) if t1 == 1 else sphere_net_array(t1, eps / 2, budget)
    count = math.comb(n1, t1) * len(X)
    best = -math.inf
    combos = itertools.combinations(range(n1), t1)
    chunk = max(1, 200_000 // (len(X) * n2))
    while True:
        S = np.array(list(itertools.islice(combos, chunk)))
        if S.size == 0:
            break
        V = np.einsum("pt,ctj->cpj", X, M[S])          # (chunk, |X|, n2)
        sq = V * V
        if t2 < n2:
            sq = -np.partition(-sq, t2 - 1, axis=-1)[..., :t2]
        best = max(best, float(np.sqrt(sq.sum(axis=-1)).max()))
    return best, count


def large_s_plan(n: int, s: int, k: int, c_n: float = LARGE_S_C_N) -> list[dict]:
    """Submatrix sizes for every branch and guessed flat sparsity pair (s1, s2)."""
    r = k ** (1.0 / 3.0)
    ln_n = math.log(n)
    out = []
    for branch, top, lg in (("large_frob", s, max(1.0, math.log(s)) ** 2 * k / r),
                            ("small_frob", s * k, max(1.0, math.log(s * k)) ** 2)):
        pows = [2 ** i for i in range(int(math.log2(top)) + 1)]
        for s1, s2 in itertools.product(pows, pows):
            n1 = min(n, math.ceil(c_n * lg * s2 * ln_n))
            n2 = min(n, math.ceil(c_n * lg * s1 * ln_n))
            t1 = max(1, min(n1, math.ceil(n1 * s1 / n)))
            t2 = max(1, min(n2, math.ceil(n2 * s2 / n)))
            sparse = (branch == "large_frob"
                      and s1 * s2 <= n * r / (k * (1 + math.log2(max(s, 1))) ** 2 * ln_n))
            out.append({"branch": branch, "s1": s1, "s2": s2, "n1": n1, "n2": n2,
                        "t1": t1, "t2": t2, "sparse": sparse})
    return out


def detect_large_s(access, n: int, s: int, k: int, seed: int, c_g: float | None = None,
                   c_n: float = LARGE_S_C_N, eps: float = LARGE_S_NET_EPS,
                   budget: int | None = None, strict: bool = False,
                   early_exit: bool = True) -> DetectionReport:
    """Random submatrix + sparse rank-1 net scan for both Frobenius-norm branches."""
    if not isinstance(access, SampledAccess):
        access = SampledAccess(access)
    if access.shape != (n, n):
        raise ParameterError("matrix shape does not match n")
    budget = enumeration_budget(2_000_000) if budget is None else budget
    if c_g is None:
        c_g = CALIBRATED_LARGE_S.get((n, s, k), LARGE_S_C_G)
    stats, skipped = [], []
    verdict = "null"
    for g, plan in enumerate(large_s_plan(n, s, k, c_n)):
        if plan["sparse"]:
            # those pairs are the 4-norm test's job (detect_small_s)
            skipped.append({**plan, "status": "delegated"})
            continue
        n1, n2, t1, t2 = plan["n1"], plan["n2"], plan["t1"], plan["t2"]
        rng = _rng(seed, _T_LARGE, g)
        R = np.sort(rng.choice(n, n1, replace=False))
        C = np.sort(rng.choice(n, n2, replace=False))
        logN = net_log_size(n1, n2, t1, t2, eps)
        if scan_count(n1, n2, t1, t2, eps, budget) > budget:
            if strict:
                raise OracleInfeasible(f"net scan for {plan} exceeds budget {budget}")
            skipped.append({**plan, "status": "infeasible"})
            continue
        M = access.submatrix(R, C, name=f"{plan['branch']}_{plan['s1']}x{plan['s2']}")
        res = sparse_rank1_scan(M, t1, t2, eps, budget)
        if res is None:
            if strict:
                raise OracleInfeasible(f"net scan for {plan} exceeds budget {budget}")
            skipped.append({**plan, "status": "infeasible"})
            continue
        score, evals = res
        z = score / math.sqrt(logN)
        stats.append({**plan, "score": score, "log_net": logN, "ratio": z, "evaluations": evals})
        if z >= c_g:
            verdict = "signal"
            if early_exit:
                break
    regime = "large_frob"
    if stats and verdict == "signal":
        regime = stats[-1]["branch"]
    return DetectionReport(verdict, regime, stats, access.ledger,
                           {"c_g": c_g, "c_n": c_n, "eps": eps, "skipped": skipped})


def calibration_seeds(count: int, base: int = 0) -> list[int]:
    return [derive_seed(base, CALIBRATION_TAG, i) for i in range(count)]


def _level_maxima(rep: DetectionReport, levels: int) -> np.ndarray:
    out = np.zeros(levels)
    for st in rep.statistics:
        out[st["level"]] = max(out[st["level"]], st["ratio"])
    return out


def calibrate_small_s(n: int, s: int, k: int, seeds, fpr: float = 0.1, margin: float = 0.5,
                      **kw) -> tuple:
    """Per-level constants c with P_null(max_trials y/m >= c) <= margin * fpr / levels each."""
    levels = len(small_s_schedule(n, s, k))
    maxima = np.array([_level_maxima(detect_small_s(gaussian_noise(n, sd), n, s, k, sd,
                                                    c_tau=np.inf, early_exit=False, **kw), levels)
                       for sd in seeds])
    q = 1.0 - margin * fpr / levels
    return tuple(float(np.quantile(maxima[:, j], q, method="higher")) for j in range(levels))


def calibrate_large_s(n: int, s: int, k: int, seeds, fpr: float = 0.1, margin: float = 0.5,
                      **kw) -> float:
    """Constant c_g with P_null(max over guesses of score / sqrt(log|N|) >= c_g) <= margin * fpr."""
    stats = []
    for sd in seeds:
        rep = detect_large_s(gaussian_noise(n, sd), n, s, k, sd, c_g=np.inf, early_exit=False, **kw)
        stats.append(max((st["ratio"] for st in rep.statistics), default=0.0))
    return float(np.quantile(stats, 1.0 - margin * fpr, method="higher"))


def detect(A, n: int, s: int, k: int, seed: int, regime: str = "auto", **kw) -> DetectionReport:
    if regime == "auto":
        regime = "small" if small_s_regime(n, s, k) else "large"
    if regime == "small":
        return detect_small_s(A, n, s, k, seed, **kw)
    if regime == "large":
        return detect_large_s(A, n, s, k, seed, **kw)
    raise ParameterError(f"unknown regime {regime!r}")


# ---------------------------------------------------------------- estimation

def estimation_condition(n: int, s: int, eps: float) -> bool:
    return math.sqrt(2 * s * math.log(3 * math.e * n / (eps * s))) <= eps * eps * math.sqrt(n)


def min_valid_n(s: int, eps: float, start: int = 1) -> int:
    n = max(start, s)
    while not estimation_condition(n, s, eps):
        n += 1
    return n


def estimation_measurements(n: int, s: int, k: int, eps: float, C: float = 1.0) -> int:
    return math.ceil(C * (n * s * k / eps ** 4) * math.log(max(math.e, n * k / (eps * s))))


@dataclass
class EstimateResult:
    factor: SparseRankKFactor
    score: float
    measurements: int
    ledger: MeasurementLedger
    info: dict = field(default_factory=dict)


def sketched_scores_real(A, m: int, seed: int, ledger: MeasurementLedger | None = None,
                         chunk: int = 4096) -> np.ndarray:
    """U with <U, B> = <S vec(A), S vec(B)> / m for an explicit m x n^2 Gaussian S."""
    A = as_matrix(A)
    n, d = A.shape
    sk = GaussianSketch(m, n * d, derive_seed(seed, _T_SKETCH), ledger, name="estimate")
    sk.update(np.arange(n * d), A.ravel())
    y = sk.values()
    u = np.empty(n * d)
    for lo in range(0, n * d, chunk):
        idx = np.arange(lo, min(n * d, lo + chunk))
        u[idx] = y @ sk.columns(idx)
    return (u / m).reshape(n, d)


def sketched_scores_surrogate(A, m: int, seed: int, ledger: MeasurementLedger | None = None
                              ) -> np.ndarray:
    """Same joint law as `sketched_scores_real` without forming S.

    With a_hat = vec(A)/||vec(A)||, S^T S a = ||a|| (|z|^2 a_hat + |z| P w) where z ~ N(0, I_m),
    w ~ N(0, I) independent and P projects away from a_hat.
    """
    A = as_matrix(A)
    if ledger is not None:
        ledger.register("estimate", m)
    a = A.ravel()
    na = float(np.linalg.norm(a))
    if na == 0.0:
        return np.zeros_like(A)
    ah = a / na
    rng = _rng(seed, _T_SURROGATE)
    z2 = float(rng.chisquare(m))
    w = rng.standard_normal(a.size)
    w -= (w @ ah) * ah
    return ((na / m) * (z2 * ah + math.sqrt(z2) * w)).reshape(A.shape)


def _best_rank1_net(U: np.ndarray, s: int, eps: float, budget: int):
    """argmax over the s x s-sparse unit rank-1 net of <U, x y^T>, by branch and bound.

    Row supports are visited in decreasing order of an upper bound (Frobenius norm
    of the best s columns); the search stops once the bound drops below the best score.
    """
    n, d = U.shape
    X = sphere_net_array(s, eps / 2, budget)
    Y = X
    best = (-math.inf, None, None, None, None)
    row_sets = list(itertools.combinations(range(n), s))
    if len(row_sets) * len(X) > budget * 64:
        raise OracleInfeasible("too many row supports for the estimator's net search")
    Sarr = np.array(row_sets)
    ub = np.empty(len(Sarr))
    chunk = max(1, 2_000_000 // d)
    Usq = U * U
    for lo in range(0, len(Sarr), chunk):
        colmass = Usq[Sarr[lo:lo + chunk]].sum(axis=1)           # (c, d)
        if s < d:
            colmass = -np.partition(-colmass, s - 1, axis=1)[:, :s]
        ub[lo:lo + chunk] = np.sqrt(colmass.sum(axis=1))
    order = np.argsort(-ub, kind="stable")
    visited = 0
    for j in order:
        if ub[j] <= best[0]:
            break
        visited += 1
        if visited * len(X) * len(Y) > budget:
            raise OracleInfeasible("estimator branch and bound exceeded its budget")
        S = Sarr[j]
        V = X @ U[S]                                             # (|X|, d)
        score, T, yi, xi = _best_cols(V, Y, s)
        if score > best[0]:
            best = (score, S, X[xi], T, Y[yi])
    return best, visited


def _best_cols(V: np.ndarray, Y: np.ndarray, s: int):
    """max over x-rows of V, net points y and increasing column tuples T of sum_j y_j V[T_j]."""
    p, d = V.shape
    q = len(Y)
    # dp[t][x, y, c]: best sum of the first t+1 terms with the (t+1)-th column at c
    dp = V[:, None, :] * Y[None, :, 0, None]
    back = []
    for t in range(1, s):
        prev = np.full((p, q, d), -np.inf)
        arg = np.zeros((p, q, d), dtype=np.int64)
        run = np.maximum.accumulate(dp, axis=2)
        runarg = _running_argmax(dp)
        prev[:, :, 1:] = run[:, :, :-1]
        arg[:, :, 1:] = runarg[:, :, :-1]
        dp = prev + V[:, None, :] * Y[None, :, t, None]
        back.append(arg)
    flat = int(np.argmax(dp))
    xi, yi, c = np.unravel_index(flat, dp.shape)
    score = float(dp[xi, yi, c])
    cols = [int(c)]
    for arg in reversed(back):
        c = arg[xi, yi, c]
        cols.append(int(c))
    return score, np.array(cols[::-1]), int(yi), int(xi)


def _running_argmax(a: np.ndarray) -> np.ndarray:
    idx = np.arange(a.shape[-1])
    best = np.maximum.accumulate(a, axis=-1)
    hit = np.where(a == best, idx, 0)
    return np.maximum.accumulate(hit, axis=-1)


def estimate_signal(A, n: int, s: int, k: int, eps: float, seed: int, C: float = 1.0,
                    sketch: str = "auto", budget: int | None = None,
                    check_condition: bool = True) -> EstimateResult:
    """Net point maximizing the sketched inner product with A (unit-norm candidates)."""
    A = as_matrix(A)
    if A.shape != (n, n):
        raise ParameterError("matrix shape does not match n")
    if check_condition and not estimation_condition(n, s, eps):
        raise ParameterError(f"estimation condition fails at n={n}; need n >= {min_valid_n(s, eps, n)}")
    budget = enumeration_budget() if budget is None else budget
    m = estimation_measurements(n, s, k, eps, C)
    ledger = MeasurementLedger()
    if sketch == "auto":
        sketch = "real" if m * n * n <= 5 * 10 ** 7 else "surrogate"
    if sketch == "real":
        U = sketched_scores_real(A, m, seed, ledger)
    elif sketch == "surrogate":
        U = sketched_scores_surrogate(A, m, seed, ledger)
    else:
        raise ParameterError(f"unknown sketch mode {sketch!r}")
    if k == 1:
        (score, S, x, T, y), visited = _best_rank1_net(U, s, eps, budget)
        F = SparseRankKFactor([Component(1.0, np.asarray(S), x, np.asarray(T), y)], s=s, k=1,
                              tau_max=1.0)
        info = {"visited_row_supports": visited}
    else:
        best, F = -math.inf, None
        for cand in ssk_net(NetSpec(n, n, s, k, eps, 1.0, "osk"), budget):
            val = float(np.sum(U * materialize(cand, n, n)))
            if val > best:
                best, F = val, cand
        score, info = best, {}
    info.update({"sketch": sketch, "m": m})
    return EstimateResult(F, float(score), m, ledger, info)
