"""Command-line front end: `slra <command> --seed N ...`.

Every command writes a JSON report (`schema: 1`); sweep-like commands can also
write CSV tables. Reports are deterministic for a fixed config and seed except
for the `timing` field, which `--no-timing` omits.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import gaussian, io, krylov, streaming
from .core import (OracleInfeasible, ParameterError, brute_force_sparse_lra,
                   enumeration_budget, frobenius_sq, materialize, singular_values, spectral_norm)
from .sketch import derive_seed

SCHEMA = 1


def trial_seed(seed: int, trial: int) -> int:
    return derive_seed(seed, 0x7121A1, trial)


def _factor_json(F) -> list:
    return [{"tau": c.tau, "x_idx": [int(i) for i in c.x_idx], "x_val": [float(v) for v in c.x_val],
             "y_idx": [int(i) for i in c.y_idx], "y_val": [float(v) for v in c.y_val]}
            for c in F.components]


def _clean(obj):
    """Make numpy scalars and arrays JSON-serializable."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    return obj


def _emit(args, report: dict, started: float) -> None:
    report = {"schema": SCHEMA, "command": args.command, "params": _params(args), **report}
    if not args.no_timing:
        report["timing"] = {"wall_s": time.perf_counter() - started}
    text = json.dumps(_clean(report), indent=2, sort_keys=True) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _params(args) -> dict:
    skip = {"func", "out", "csv", "no_timing", "jobs", "command"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _write_csv(path, rows: list[dict]) -> None:
    if not path:
        return
    keys = []
    for r in rows:
        keys.extend(k for k in r if k not in keys)
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=keys)
        w.writeheader()
        for r in rows:
            w.writerow({k: _clean(r.get(k, "")) for k in keys})


def _parallel(fn, items, jobs: int) -> list:
    if jobs <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, items))


# ---------------------------------------------------------------- gen

def cmd_gen(args) -> dict:
    n, d = args.n, args.d or args.n
    out = {}
    if args.planted or args.kind == "planted":
        P = gaussian.gen_planted(n, args.s, args.k, args.lam, args.seed)
        A, F, d = P.A, P.X, n
        out["lambda"] = P.lam
    elif args.kind == "null":
        A, F, d = gaussian.gaussian_noise(n, args.seed), None, n
    elif args.kind == "spectral":
        A, sig, _, _ = krylov.planted_sparse_spectral(n, d, args.s, args.k, args.gap, args.seed)
        F = None
        out["sigma"] = sig
    elif args.kind == "block":
        A, S, T = streaming.planted_block(n, d, args.s, args.k, args.seed, noise=args.noise)
        F = None
        out.update({"S": S, "T": T})
    else:
        raise ParameterError(f"unknown kind {args.kind!r}")
    files = {"matrix": f"{args.prefix}.mat"}
    io.write_matrix(files["matrix"], A, binary=args.binary)
    if F is not None:
        files["factor"] = f"{args.prefix}.factor"
        io.write_factor(files["factor"], F, n, d)
    if args.stream:
        files["stream"] = f"{args.prefix}.stream"
        io.write_stream(files["stream"], *io.matrix_to_stream(A, args.seed), header=f"{n} {d}")
    out.update({"files": files, "shape": [n, d], "frobenius_sq": frobenius_sq(A)})
    return out


# ---------------------------------------------------------------- sparse-svd

def cmd_sparse_svd(args) -> dict:
    if args.input:
        A = io.read_matrix(args.input)
    else:
        A = krylov.planted_sparse_spectral(args.n, args.d or args.n, args.s, args.k, args.gap,
                                           args.seed)[0]
    n, d = A.shape
    res = krylov.sparse_spectral_lra(A, args.k, args.s, args.eps, args.seed, C=args.C,
                                     sweep=not args.no_sweep)
    out = {"certified_err": res.err, "interval": list(res.interval), "q": res.q,
           "matmuls": res.counter.matmuls, "flops": res.counter.flops,
           "op_budget": krylov.op_budget(n, d, args.k, args.s, args.eps),
           "support": {"S": list(res.support.S), "T": list(res.support.T)},
           "factor": _factor_json(res.factor), "info": res.info}
    if args.oracle:
        B = materialize(res.factor, n, d)
        sv = singular_values(A)
        sk1 = float(sv[args.k]) if args.k < len(sv) else 0.0
        exact = spectral_norm(A - B)
        out["oracle"] = {"exact_err": exact, "sigma_k_plus_1": sk1,
                         "within_1_plus_eps": bool(exact <= (1 + args.eps) * sk1 + 1e-12)}
    return out


# ---------------------------------------------------------------- stream

def _stream_input(args):
    if args.input:
        rows, cols, vals = io.read_stream(args.input)
        if not args.n:
            raise ParameterError("--n (and --d) are required with a stream file")
        n, d = args.n, args.d or args.n
        A = np.zeros((n, d))
        np.add.at(A, (rows, cols), vals)
        return A, (rows, cols, vals)
    if args.matrix:
        A = io.read_matrix(args.matrix)
    else:
        A = streaming.planted_block(args.n, args.d or args.n, args.s, args.k, args.seed,
                                    noise=args.noise)[0]
    return A, io.matrix_to_stream(A, args.seed)


def cmd_stream(args) -> dict:
    A, (rows, cols, vals) = _stream_input(args)
    n, d = A.shape
    ctx = streaming.StreamContext(args.algo, n, d, args.s, args.k, args.eps, args.seed,
                                  tau_max=args.tau_max)
    ctx.ingest(rows, cols, vals)
    ctx.finalize()
    if args.algo == "net":
        res = streaming.net_recover(ctx)
        B = materialize(res.factor, n, d)
        out = {"factor": _factor_json(res.factor), "cost_estimate": res.cost_estimate}
    else:
        fn = streaming.rel_err_recover if args.algo == "rel" else streaming.add_err_recover
        res = fn(ctx)
        B = res.dense(n, d)
        out = {"S": res.S, "T": res.T, "rank": res.rank, "cost_estimate": res.cost_estimate}
    cost = frobenius_sq(A - B)
    out.update({"cost": cost, "updates": int(len(vals)), "ledger": ctx.ledger.to_dict(),
                "measurements": ctx.ledger.total()})
    if args.oracle:
        variant = "general" if args.algo == "net" else "submatrix"
        try:
            kw = {"grid": args.eps, "tau_max": args.tau_max} if variant == "general" else {}
            orc = brute_force_sparse_lra(A, args.s, args.k, variant=variant, **kw)
            ratio = cost / orc.cost if orc.cost > 0 else (1.0 if cost == 0 else math.inf)
            out["oracle"] = {"status": "ok", "variant": variant, "cost": orc.cost, "ratio": ratio,
                             "additive_gap_over_frob": (cost - orc.cost) / max(frobenius_sq(A), 1e-300)}
        except OracleInfeasible as exc:
            out["oracle"] = {"status": "infeasible", "variant": variant, "message": str(exc)}
    return out


# ---------------------------------------------------------------- detect

def _detect_trial(job):
    kind, n, s, k, lam, regime, seed = job
    if kind == "planted":
        A = gaussian.gen_planted(n, s, k, lam, seed).A
    else:
        A = gaussian.gaussian_noise(n, seed)
    rep = gaussian.detect(A, n, s, k, seed, regime=regime)
    return kind, seed, rep.to_dict()


def cmd_detect(args) -> dict:
    n, s, k = args.n, args.s, args.k
    if args.input:
        A = io.read_matrix(args.input)
        rep = gaussian.detect(A, A.shape[0], s, k, args.seed, regime=args.regime)
        _write_csv(args.csv, [{"trial": 0, **st} for st in rep.statistics])
        return {"report": rep.to_dict()}
    jobs = [(kind, n, s, k, args.lam, args.regime, trial_seed(args.seed, t))
            for kind in ("null", "planted") for t in range(args.trials)]
    results = _parallel(_detect_trial, jobs, args.jobs)
    rows, trials = [], []
    for t, (kind, seed, rep) in enumerate(results):
        trials.append({"kind": kind, "seed": seed, "verdict": rep["verdict"],
                       "regime": rep["regime"], "measurements": rep["measurements"]})
        for st in rep["statistics"]:
            rows.append({"kind": kind, "seed": seed, **{a: b for a, b in st.items()
                                                         if not isinstance(b, (list, dict))}})
    _write_csv(args.csv, rows)
    fpr = float(np.mean([t["verdict"] == "signal" for t in trials if t["kind"] == "null"]))
    tpr = float(np.mean([t["verdict"] == "signal" for t in trials if t["kind"] == "planted"]))
    return {"tpr": tpr, "fpr": fpr, "trials": trials}


# ---------------------------------------------------------------- estimate

def cmd_estimate(args) -> dict:
    out = {}
    truth = None
    if args.input:
        A = io.read_matrix(args.input)
        n = A.shape[0]
    else:
        n = args.n
        if args.auto_n and not gaussian.estimation_condition(n, args.s, args.eps):
            n = gaussian.min_valid_n(args.s, args.eps, n)
            out["n_used"] = n
        P = gaussian.gen_planted(n, args.s, args.k, args.lam, args.seed)
        A, truth = P.A, P.dense_signal()
    res = gaussian.estimate_signal(A, n, args.s, args.k, args.eps, args.seed, C=args.C,
                                   sketch=args.sketch)
    out.update({"factor": _factor_json(res.factor), "score": res.score,
                "measurements": res.measurements, "ledger": res.ledger.to_dict(),
                "info": res.info})
    if truth is not None:
        err = spectral_norm(truth - materialize(res.factor, n, n))
        out["spectral_error"] = err
        out["within_eps"] = bool(err <= args.eps)
    return out


# ---------------------------------------------------------------- bench

def cmd_bench(args) -> dict:
    s_list = [int(v) for v in args.s_list.split(",")]
    k_list = [int(v) for v in args.k_list.split(",")]
    n, d = args.n, args.d or args.n
    rows = []
    for s in s_list:
        for k in k_list:
            ctx = streaming.StreamContext(args.algo, n, d, s, k, args.eps, args.seed)
            rows.append({"algo": args.algo, "n": n, "d": d, "s": s, "k": k, "eps": args.eps,
                         "measurements": ctx.ledger.total()})
    _write_csv(args.csv, rows)
    fits = {}
    for var, fixed, values in (("s", "k", s_list), ("k", "s", k_list)):
        if len(values) < 2:
            continue
        base = (k_list if var == "s" else s_list)[0]
        pts = [(r[var], r["measurements"]) for r in rows if r[fixed] == base]
        x, y = np.log([p[0] for p in pts]), np.log([p[1] for p in pts])
        fits[f"slope_{var}"] = float(np.polyfit(x, y, 1)[0])
    return {"rows": rows, "fits": fits}


# ---------------------------------------------------------------- calibrate

def cmd_calibrate(args) -> dict:
    seeds = gaussian.calibration_seeds(args.seeds, args.seed)
    if args.regime == "small":
        c = gaussian.calibrate_small_s(args.n, args.s, args.k, seeds, fpr=args.fpr)
        return {"c_tau": list(c)}
    return {"c_g": gaussian.calibrate_large_s(args.n, args.s, args.k, seeds, fpr=args.fpr)}


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="slra", description="Sparse low-rank approximation toolkit")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, need_s=True):
        p.add_argument("--seed", type=int, required=True, help="mandatory for every randomized run")
        p.add_argument("--out", help="report path (default stdout)")
        p.add_argument("--csv", help="also write a CSV table")
        p.add_argument("--no-timing", action="store_true", help="omit wall-clock fields")
        p.add_argument("--jobs", type=int, default=1)
        p.add_argument("--n", type=int, default=64)
        p.add_argument("--d", type=int, default=None)
        if need_s:
            p.add_argument("--s", type=int, default=2)
            p.add_argument("--k", type=int, default=1)

    p = sub.add_parser("gen", help="generate an instance")
    common(p)
    p.add_argument("--planted", action="store_true", help="shorthand for --kind planted")
    p.add_argument("--kind", choices=("planted", "null", "spectral", "block"), default="planted")
    p.add_argument("--lam", type=float, default=None)
    p.add_argument("--gap", type=float, default=1.05)
    p.add_argument("--noise", type=float, default=0.1)
    p.add_argument("--prefix", default="instance")
    p.add_argument("--binary", action="store_true")
    p.add_argument("--stream", action="store_true", help="also write a shuffled update stream")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("sparse-svd", help="sparse spectral low-rank approximation")
    common(p)
    p.add_argument("--input")
    p.add_argument("--eps", type=float, default=0.2)
    p.add_argument("--gap", type=float, default=1.05)
    p.add_argument("--C", type=float, default=1.0)
    p.add_argument("--no-sweep", action="store_true")
    p.add_argument("--oracle", action="store_true")
    p.set_defaults(func=cmd_sparse_svd)

    p = sub.add_parser("stream", help="one-pass streaming recovery")
    common(p)
    p.add_argument("--algo", choices=streaming.ALGOS, default="rel")
    p.add_argument("--input", help="stream file of 'i j delta' lines")
    p.add_argument("--matrix", help="matrix file, streamed in shuffled order")
    p.add_argument("--eps", type=float, default=0.25)
    p.add_argument("--noise", type=float, default=0.1)
    p.add_argument("--tau-max", type=float, default=4.0)
    p.add_argument("--oracle", action="store_true")
    p.set_defaults(func=cmd_stream)

    p = sub.add_parser("detect", help="planted signal detection ROC")
    common(p)
    p.add_argument("--input")
    p.add_argument("--regime", choices=("auto", "small", "large"), default="auto")
    p.add_argument("--lam", type=float, default=None)
    p.add_argument("--trials", type=int, default=10)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("estimate", help="planted signal estimation")
    common(p)
    p.add_argument("--input")
    p.add_argument("--eps", type=float, default=0.5)
    p.add_argument("--lam", type=float, default=None)
    p.add_argument("--C", type=float, default=1.0)
    p.add_argument("--sketch", choices=("auto", "real", "surrogate"), default="auto")
    p.add_argument("--auto-n", action="store_true", help="raise n until the estimation condition holds")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("bench", help="measurement scaling sweep")
    common(p, need_s=False)
    p.add_argument("--algo", choices=("rel", "add"), default="add")
    p.add_argument("--eps", type=float, default=0.3)
    p.add_argument("--s-list", default="1,2,4")
    p.add_argument("--k-list", default="1,2,4")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("calibrate", help="null-only threshold calibration")
    common(p)
    p.add_argument("--regime", choices=("small", "large"), default="small")
    p.add_argument("--seeds", type=int, default=200)
    p.add_argument("--fpr", type=float, default=0.1)
    p.set_defaults(func=cmd_calibrate)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    started = time.perf_counter()
    try:
        enumeration_budget()
        report = args.func(args)
    except ParameterError as exc:
        print(f"slra: error: {exc}", file=sys.stderr)
        return 2
    except OracleInfeasible as exc:
        print(f"slra: infeasible: {exc}", file=sys.stderr)
        return 3
    _emit(args, report, started)
    return 0


if __name__ == "__main__":
    sys.exit(main())
