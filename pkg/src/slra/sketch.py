"""Linear sketches: CountSketch (entrywise and row-wise), Gaussian sketches,
row-norm estimation, approximate matrix product, and a measurement ledger.

Sketch tables accumulate in 64-bit fixed point. Every update contributes a
deterministically rounded integer, so integer addition makes the state
independent of update order and of how a stream is sharded before merging.
"""
from __future__ import annotations

import json
import math
from collections import OrderedDict
from dataclasses import dataclass

import numpy as np

from .core import ParameterError

_M64 = (1 << 64) - 1
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_C1 = np.uint64(0xBF58476D1CE4E5B9)
_C2 = np.uint64(0x94D049BB133111EB)
_SIGN_SALT = np.uint64(0xD1B54A32D192ED03)
_NORMAL_SALT = np.uint64(0x8CB92BA72F3D8DD7)

CS_FRAC_BITS = 32
GAUSS_FRAC_BITS = 44


def mix64(x) -> np.ndarray:
    """splitmix64 finalizer, vectorized over uint64 arrays."""
    z = np.asarray(x, dtype=np.uint64) + _GOLDEN
    z = (z ^ (z >> np.uint64(30))) * _C1
    z = (z ^ (z >> np.uint64(27))) * _C2
    return z ^ (z >> np.uint64(31))


def derive_seed(seed: int, *tags: int) -> int:
    """Deterministic child seed from a parent seed and integer tags."""
    h = np.array([int(seed) & _M64], dtype=np.uint64)
    for t in tags:
        h = mix64(h ^ mix64(np.array([int(t) & _M64], dtype=np.uint64)))
    return int(h[0])


def _u01(h: np.ndarray) -> np.ndarray:
    # uniform in (0, 1]
    return ((h >> np.uint64(11)).astype(np.float64) + 1.0) * (1.0 / 9007199254740992.0)


def hash_uniform(seed: int, idx) -> np.ndarray:
    idx = np.asarray(idx, dtype=np.uint64)
    return _u01(mix64(np.uint64(int(seed) & _M64) ^ mix64(idx)))


def counter_normals(seed: int, rows, idx) -> np.ndarray:
    """Standard normals indexed by (row, idx); shape (len(rows), len(idx))."""
    rows = np.asarray(rows, dtype=np.uint64)
    idx = np.asarray(idx, dtype=np.uint64)
    base = mix64(np.uint64(int(seed) & _M64) ^ mix64(rows))
    h = mix64(base[:, None] ^ mix64(idx ^ _NORMAL_SALT)[None, :])
    u1 = _u01(h)
    u2 = _u01(mix64(h ^ _NORMAL_SALT))
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)


def to_fixed(x, frac_bits: int) -> np.ndarray:
    v = np.rint(np.asarray(x, dtype=np.float64) * float(2 ** frac_bits))
    if v.size and np.max(np.abs(v)) >= 2.0 ** 62:
        raise ParameterError("update magnitude exceeds the fixed-point range of the sketch")
    return v.astype(np.int64)


def from_fixed(v, frac_bits: int) -> np.ndarray:
    return np.asarray(v, dtype=np.float64) * (2.0 ** -frac_bits)


def odd(r: int) -> int:
    r = max(1, int(r))
    return r if r % 2 else r + 1


@dataclass(frozen=True)
class StreamUpdate:
    """Entrywise additive update A[row, col] += delta."""

    row: int
    col: int
    delta: float


class MeasurementLedger:
    """Named counters of linear measurement rows."""

    def __init__(self):
        self.counts: OrderedDict = OrderedDict()

    def register(self, name: str, rows: int) -> None:
        if rows < 0:
            raise ParameterError("measurement counts are nonnegative")
        self.counts[name] = self.counts.get(name, 0) + int(rows)

    def total(self) -> int:
        return int(sum(self.counts.values()))

    def get(self, name: str) -> int:
        return int(self.counts.get(name, 0))

    def to_dict(self) -> dict:
        return dict(self.counts)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    def __repr__(self):
        return f"MeasurementLedger({dict(self.counts)})"


class _Accumulator:
    """Sparse int64 table keyed by int64; pending updates are folded lazily."""

    __slots__ = ("_keys", "_vals", "_pk", "_pv")

    def __init__(self):
        self._keys = np.zeros(0, np.int64)
        self._vals = np.zeros(0, np.int64)
        self._pk: list = []
        self._pv: list = []

    def add(self, keys, vals) -> None:
        self._pk.append(np.asarray(keys, np.int64).ravel())
        self._pv.append(np.asarray(vals, np.int64).ravel())

    def _flush(self) -> None:
        if not self._pk:
            return
        k = np.concatenate([self._keys, *self._pk])
        v = np.concatenate([self._vals, *self._pv])
        self._pk, self._pv = [], []
        uk, inv = np.unique(k, return_inverse=True)
        acc = np.zeros(uk.size, np.int64)
        np.add.at(acc, inv, v)
        nz = acc != 0
        self._keys, self._vals = uk[nz], acc[nz]

    def lookup(self, keys) -> np.ndarray:
        self._flush()
        keys = np.asarray(keys, np.int64)
        out = np.zeros(keys.shape, np.int64)
        if self._keys.size == 0:
            return out
        pos = np.searchsorted(self._keys, keys)
        pos_c = np.minimum(pos, self._keys.size - 1)
        hit = self._keys[pos_c] == keys
        out[hit] = self._vals[pos_c[hit]]
        return out

    def merged(self, other: "_Accumulator") -> "_Accumulator":
        self._flush()
        other._flush()
        out = _Accumulator()
        out.add(self._keys, self._vals)
        out.add(other._keys, other._vals)
        out._flush()
        return out

    def items(self):
        self._flush()
        return self._keys, self._vals

    def equal(self, other: "_Accumulator") -> bool:
        k1, v1 = self.items()
        k2, v2 = other.items()
        return k1.shape == k2.shape and bool(np.all(k1 == k2)) and bool(np.all(v1 == v2))

    @property
    def nnz(self) -> int:
        self._flush()
        return int(self._keys.size)


class _HashFamily:
    """r independent (bucket, sign) hash pairs determined by (seed, rep)."""

    def __init__(self, buckets: int, reps: int, seed: int):
        self.buckets = int(buckets)
        self.reps = int(reps)
        self.seed = int(seed) & _M64
        self._bases = mix64(np.uint64(self.seed) ^ mix64(np.arange(self.reps, dtype=np.uint64)))

    def __call__(self, idx):
        idx = np.asarray(idx, dtype=np.uint64)
        h = mix64(self._bases[:, None] ^ mix64(idx)[None, :])
        b = (h % np.uint64(self.buckets)).astype(np.int64)
        sgn = 1 - 2 * (mix64(h ^ _SIGN_SALT) >> np.uint64(63)).astype(np.int64)
        return b, sgn


class CountSketch:
    """CountSketch of a vector over [domain] with `reps` hash tables of `buckets`."""

    def __init__(self, domain: int, buckets: int, reps: int, seed: int,
                 ledger: MeasurementLedger | None = None, name: str = "countsketch",
                 frac_bits: int = CS_FRAC_BITS, _register: bool = True):
        if buckets < 1 or reps < 1 or domain < 1:
            raise ParameterError("domain, buckets and reps must be positive")
        self.domain = int(domain)
        self.buckets = int(buckets)
        self.reps = odd(reps)
        self.seed = int(seed) & _M64
        self.frac_bits = int(frac_bits)
        self.name = name
        self._hash = _HashFamily(self.buckets, self.reps, self.seed)
        self._acc = _Accumulator()
        if ledger is not None and _register:
            ledger.register(name, self.rows)

    @property
    def rows(self) -> int:
        return self.buckets * self.reps

    def config(self):
        return (self.domain, self.buckets, self.reps, self.seed, self.frac_bits)

    def hashes(self, idx):
        return self._hash(idx)

    def update(self, idx, delta) -> None:
        idx = np.atleast_1d(np.asarray(idx, dtype=np.int64))
        delta = np.broadcast_to(np.asarray(delta, dtype=float), idx.shape)
        if idx.size == 0:
            return
        if idx.min() < 0 or idx.max() >= self.domain:
            raise ParameterError("update index outside the sketch domain")
        q = to_fixed(delta, self.frac_bits)
        b, sgn = self._hash(idx)
        keys = np.arange(self.reps, dtype=np.int64)[:, None] * self.buckets + b
        self._acc.add(keys, sgn * q[None, :])

    def merge(self, other: "CountSketch") -> "CountSketch":
        if self.config() != other.config():
            raise ParameterError("cannot merge CountSketch states with different configurations")
        out = CountSketch(self.domain, self.buckets, self.reps, self.seed,
                          frac_bits=self.frac_bits, name=self.name, _register=False)
        out._acc = self._acc.merged(other._acc)
        return out

    def rep_estimates(self, idx) -> np.ndarray:
        idx = np.atleast_1d(np.asarray(idx, dtype=np.int64))
        b, sgn = self._hash(idx)
        keys = np.arange(self.reps, dtype=np.int64)[:, None] * self.buckets + b
        return from_fixed(sgn * self._acc.lookup(keys), self.frac_bits)

    def recover(self, idx) -> np.ndarray:
        return np.median(self.rep_estimates(idx), axis=0)

    def table(self) -> np.ndarray:
        keys, vals = self._acc.items()
        T = np.zeros(self.reps * self.buckets)
        T[keys] = from_fixed(vals, self.frac_bits)
        return T.reshape(self.reps, self.buckets)

    def same_state(self, other: "CountSketch") -> bool:
        return self.config() == other.config() and self._acc.equal(other._acc)


class RowSketch:
    """CountSketch applied on the left of a streamed n x d matrix.

    Each rep keeps a (buckets x width) table of S A M where M maps column j to
    a width-vector: the identity (width d), a scaled Gaussian column (width t,
    giving S A G^T), or a CountSketch column (width w, giving S A R^T).
    """

    def __init__(self, n: int, d: int, buckets: int, reps: int, seed: int,
                 col_map: str = "identity", width: int | None = None,
                 ledger: MeasurementLedger | None = None, name: str = "rowsketch",
                 frac_bits: int = CS_FRAC_BITS, col_seed: int | None = None,
                 _register: bool = True):
        if col_map not in ("identity", "gaussian", "countsketch"):
            raise ParameterError(f"unknown column map {col_map!r}")
        self.n, self.d = int(n), int(d)
        self.buckets = int(buckets)
        self.reps = odd(reps)
        self.seed = int(seed) & _M64
        self.col_map = col_map
        self.width = self.d if col_map == "identity" else int(width)
        if self.width < 1:
            raise ParameterError("width must be positive")
        self.col_seed = derive_seed(self.seed, 77) if col_seed is None else int(col_seed) & _M64
        self.frac_bits = int(frac_bits)
        self.name = name
        self._hash = _HashFamily(self.buckets, self.reps, self.seed)
        self._acc = _Accumulator()
        self._G = None
        self._col_hash = None
        if col_map == "gaussian":
            self._G = counter_normals(self.col_seed, np.arange(self.width),
                                      np.arange(self.d)) / math.sqrt(self.width)
        elif col_map == "countsketch":
            self._col_hash = _HashFamily(self.width, 1, self.col_seed)
        if ledger is not None and _register:
            ledger.register(name, self.rows)

    @property
    def rows(self) -> int:
        return self.buckets * self.width * self.reps

    def config(self):
        return (self.n, self.d, self.buckets, self.reps, self.seed, self.col_map,
                self.width, self.col_seed, self.frac_bits)

    def column_map(self) -> np.ndarray:
        """Dense d x width matrix M (so the sketch holds S A M)."""
        if self.col_map == "identity":
            return np.eye(self.d)
        if self.col_map == "gaussian":
            return self._G.T.copy()
        b, sgn = self._col_hash(np.arange(self.d))
        M = np.zeros((self.d, self.width))
        M[np.arange(self.d), b[0]] = sgn[0]
        return M

    def update(self, i, j, delta) -> None:
        i = np.atleast_1d(np.asarray(i, dtype=np.int64))
        j = np.atleast_1d(np.asarray(j, dtype=np.int64))
        delta = np.broadcast_to(np.asarray(delta, dtype=float), i.shape)
        if i.size == 0:
            return
        if i.min() < 0 or i.max() >= self.n or j.min() < 0 or j.max() >= self.d:
            raise ParameterError("update index outside the matrix")
        b, sgn = self._hash(i)                                   # (reps, N)
        rowkey = (np.arange(self.reps, dtype=np.int64)[:, None] * self.buckets + b) * self.width
        if self.col_map == "identity":
            q = to_fixed(delta, self.frac_bits)
            self._acc.add(rowkey + j[None, :], sgn * q[None, :])
        elif self.col_map == "countsketch":
            cb, cs = self._col_hash(j)
            q = to_fixed(delta, self.frac_bits) * cs[0]
            self._acc.add(rowkey + cb[0][None, :], sgn * q[None, :])
        else:
            # dense width-t contribution per update
            t = self.width
            step = max(1, 200000 // t)
            for lo in range(0, i.size, step):
                hi = min(i.size, lo + step)
                q = to_fixed(delta[lo:hi, None] * self._G[:, j[lo:hi]].T, self.frac_bits)  # (N, t)
                keys = rowkey[:, lo:hi, None] + np.arange(t, dtype=np.int64)[None, None, :]
                self._acc.add(keys, sgn[:, lo:hi, None] * q[None, :, :])

    def merge(self, other: "RowSketch") -> "RowSketch":
        if self.config() != other.config():
            raise ParameterError("cannot merge RowSketch states with different configurations")
        out = RowSketch.__new__(RowSketch)
        out.__dict__.update(self.__dict__)
        out._acc = self._acc.merged(other._acc)
        return out

    def recover_rows(self, rows) -> np.ndarray:
        """Median-of-reps estimate of rows of A M, shape (len(rows), width)."""
        rows = np.atleast_1d(np.asarray(rows, dtype=np.int64))
        if rows.size == 0:
            return np.zeros((0, self.width))
        b, sgn = self._hash(rows)
        rowkey = (np.arange(self.reps, dtype=np.int64)[:, None] * self.buckets + b) * self.width
        keys = rowkey[:, :, None] + np.arange(self.width, dtype=np.int64)[None, None, :]
        vals = from_fixed(self._acc.lookup(keys), self.frac_bits) * sgn[:, :, None]
        return np.median(vals, axis=0)

    def same_state(self, other: "RowSketch") -> bool:
        return self.config() == other.config() and self._acc.equal(other._acc)


class GaussianSketch:
    """m implicit i.i.d. N(0,1) rows over a flattened domain, regenerated on demand."""

    def __init__(self, m: int, domain: int, seed: int, ledger: MeasurementLedger | None = None,
                 name: str = "gaussian", frac_bits: int = GAUSS_FRAC_BITS,
                 _register: bool = True):
        if m < 1:
            raise ParameterError("m must be positive")
        self.m = int(m)
        self.domain = int(domain)
        self.seed = int(seed) & _M64
        self.frac_bits = int(frac_bits)
        self.name = name
        self._acc = np.zeros(self.m, np.int64)
        if ledger is not None and _register:
            ledger.register(name, self.m)

    @property
    def a_m(self) -> float:
        return math.sqrt(self.m)

    def config(self):
        return (self.m, self.domain, self.seed, self.frac_bits)

    def columns(self, idx) -> np.ndarray:
        idx = np.atleast_1d(np.asarray(idx, dtype=np.int64))
        return counter_normals(self.seed, np.arange(self.m), idx)

    def update(self, idx, delta) -> None:
        idx = np.atleast_1d(np.asarray(idx, dtype=np.int64))
        delta = np.broadcast_to(np.asarray(delta, dtype=float), idx.shape)
        if idx.size == 0:
            return
        if idx.min() < 0 or idx.max() >= self.domain:
            raise ParameterError("update index outside the sketch domain")
        step = max(1, 2_000_000 // self.m)
        for lo in range(0, idx.size, step):
            hi = min(idx.size, lo + step)
            G = self.columns(idx[lo:hi])
            q = to_fixed(G * delta[None, lo:hi], self.frac_bits)
            self._acc += q.sum(axis=1)

    def values(self) -> np.ndarray:
        return from_fixed(self._acc, self.frac_bits)

    def frob_sq_estimate(self) -> float:
        v = self.values()
        return float(v @ v) / self.m

    def merge(self, other: "GaussianSketch") -> "GaussianSketch":
        if self.config() != other.config():
            raise ParameterError("cannot merge Gaussian sketches with different configurations")
        out = GaussianSketch(self.m, self.domain, self.seed, frac_bits=self.frac_bits,
                             name=self.name, _register=False)
        out._acc = self._acc + other._acc
        return out

    def same_state(self, other: "GaussianSketch") -> bool:
        return self.config() == other.config() and bool(np.all(self._acc == other._acc))


# ---------------------------------------------------------------- functional API

def cs_new(domain: int, buckets: int, reps: int, seed: int,
           ledger: MeasurementLedger | None = None, name: str = "countsketch") -> CountSketch:
    return CountSketch(domain, buckets, reps, seed, ledger=ledger, name=name)


def cs_update(state: CountSketch, idx, delta) -> None:
    state.update(idx, delta)


def cs_merge(a: CountSketch, b: CountSketch) -> CountSketch:
    return a.merge(b)


def cs_recover_entry(state: CountSketch, index) -> np.ndarray | float:
    out = state.recover(index)
    return float(out[0]) if np.ndim(index) == 0 else out


def cs_row_recover(state: RowSketch, i) -> np.ndarray:
    out = state.recover_rows(i)
    return out[0] if np.ndim(i) == 0 else out


def row_norm_estimates(state: RowSketch, rows=None) -> np.ndarray:
    """Row norms of A from a sketch of S A G^T (G scaled so E||G a||^2 = ||a||^2)."""
    if state.col_map != "gaussian":
        raise ParameterError("row norm estimation needs a Gaussian column map")
    rows = np.arange(state.n) if rows is None else np.asarray(rows)
    return np.linalg.norm(state.recover_rows(rows), axis=1)


def row_norm_sketch(n: int, d: int, eps: float, alpha: float, delta: float, seed: int,
                    ledger: MeasurementLedger | None = None, name: str = "row_norms",
                    c_buckets: float = 4.0, c_width: float = 1.0, c_reps: float = 4.0) -> RowSketch:
    buckets = max(1, math.ceil(c_buckets / eps))
    width = max(1, math.ceil(c_width * math.log(n / delta) / alpha ** 2))
    reps = odd(math.ceil(c_reps * math.log(1.0 / delta)))
    return RowSketch(n, d, buckets, reps, seed, col_map="gaussian", width=width,
                     ledger=ledger, name=name)


def gaussian_sketch_apply(state: GaussianSketch, v=None, idx=None, delta=None) -> np.ndarray:
    """Fold a flattened vector (or an (idx, delta) update batch) into the sketch."""
    if v is not None:
        v = np.asarray(v, dtype=float).ravel()
        nz = np.flatnonzero(v)
        state.update(nz, v[nz])
    elif idx is not None:
        state.update(idx, delta)
    return state.values()


def countsketch_matrix(rows: int, dim: int, seed: int) -> np.ndarray:
    """Dense rows x dim CountSketch matrix (one hash table)."""
    b, sgn = _HashFamily(rows, 1, seed)(np.arange(dim))
    S = np.zeros((rows, dim))
    S[b[0], np.arange(dim)] = sgn[0]
    return S


def cs_amm_check(A, B, r: int, seed: int = 0) -> float:
    """||A S^T S B^T - A B^T||_F for an r x d CountSketch S."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if A.shape[1] != B.shape[1]:
        raise ParameterError("A and B need the same number of columns")
    S = countsketch_matrix(r, A.shape[1], seed)
    return float(np.linalg.norm((A @ S.T) @ (S @ B.T) - A @ B.T))
