"""Text and binary file formats for matrices, factors, streams and ledgers."""
from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .core import Component, ParameterError, SparseRankKFactor, as_matrix

MAGIC = b"SLRA"
BINARY_VERSION = 1


def write_matrix(path, A, binary: bool = False) -> None:
    A = as_matrix(A)
    n, d = A.shape
    if binary:
        with open(path, "wb") as fh:
            fh.write(MAGIC)
            fh.write(struct.pack("<IQQ", BINARY_VERSION, n, d))
            fh.write(np.ascontiguousarray(A, dtype="<f8").tobytes())
        return
    with open(path, "w") as fh:
        fh.write(f"{n} {d}\n")
        for row in A:
            fh.write(" ".join(repr(float(v)) for v in row) + "\n")


def read_matrix(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if raw[:4] == MAGIC:
        version, n, d = struct.unpack("<IQQ", raw[4:24])
        if version != BINARY_VERSION:
            raise ParameterError(f"unsupported binary version {version}")
        payload = np.frombuffer(raw[24:], dtype="<f8")
        if payload.size != n * d:
            raise ParameterError("binary payload size does not match header")
        return payload.reshape(n, d).astype(np.float64)
    lines = [ln for ln in raw.decode().splitlines() if ln.strip()]
    n, d = (int(t) for t in lines[0].split())
    if len(lines) - 1 != n:
        raise ParameterError(f"expected {n} rows, found {len(lines) - 1}")
    A = np.array([[float(t) for t in ln.split()] for ln in lines[1:]], dtype=float).reshape(n, d)
    return as_matrix(A)


def write_factor(path, F: SparseRankKFactor, n: int, d: int) -> None:
    with open(path, "w") as fh:
        fh.write(f"{len(F.components)} {F.s} {n} {d}\n")
        for c in F.components:
            fh.write(f"{c.tau!r}\n")
            fh.write(" ".join(f"{int(i)}:{float(v)!r}" for i, v in zip(c.x_idx, c.x_val)) + "\n")
            fh.write(" ".join(f"{int(i)}:{float(v)!r}" for i, v in zip(c.y_idx, c.y_val)) + "\n")


def _pairs(line: str):
    idx, val = [], []
    for tok in line.split():
        i, v = tok.split(":")
        idx.append(int(i))
        val.append(float(v))
    return np.array(idx, dtype=np.int64), np.array(val, dtype=float)


def read_factor(path):
    lines = Path(path).read_text().split("\n")
    k, s, n, d = (int(t) for t in lines[0].split())
    comps = []
    for c in range(k):
        tau = float(lines[1 + 3 * c])
        xi, xv = _pairs(lines[2 + 3 * c])
        yi, yv = _pairs(lines[3 + 3 * c])
        comps.append(Component(tau, xi, xv, yi, yv))
    return SparseRankKFactor(comps, s=s, k=max(k, 1)), n, d


def read_stream(path):
    """Parse `i j delta` lines (0-indexed); `#` starts a comment."""
    rows, cols, vals = [], [], []
    for ln in Path(path).read_text().splitlines():
        ln = ln.split("#", 1)[0].strip()
        if not ln:
            continue
        i, j, v = ln.split()
        rows.append(int(i))
        cols.append(int(j))
        vals.append(float(v))
    return (np.array(rows, dtype=np.int64), np.array(cols, dtype=np.int64),
            np.array(vals, dtype=float))


def write_stream(path, rows, cols, vals, header: str | None = None) -> None:
    with open(path, "w") as fh:
        if header:
            fh.write(f"# {header}\n")
        for i, j, v in zip(rows, cols, vals):
            fh.write(f"{int(i)} {int(j)} {float(v)!r}\n")


def matrix_to_stream(A, shuffle_seed: int | None = None):
    A = as_matrix(A)
    r, c = np.nonzero(A)
    v = A[r, c]
    if shuffle_seed is not None:
        p = np.random.default_rng(shuffle_seed).permutation(r.size)
        r, c, v = r[p], c[p], v[p]
    return r.astype(np.int64), c.astype(np.int64), v


def write_json(path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")
