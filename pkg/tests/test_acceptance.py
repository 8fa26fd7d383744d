"""Acceptance suite: one check per criterion, each printing a PASS/FAIL line.

Run under pytest (lines are collected into the terminal summary) or directly:

    python3 tests/test_acceptance.py [numbers...]
"""
import itertools
import math
import sys
import time
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent))

import transfer_checks  # noqa: E402
from slra.core import (SupportPair, brute_force_sparse_lra, frobenius_sq, materialize,  # noqa: E402
                       restrict, singular_values, spectral_norm)
from slra.gaussian import (detect_large_s, detect_small_s, estimate_signal, flat_level,  # noqa: E402
                           gaussian_noise, gen_planted, min_valid_n)
from slra.krylov import (chebyshev_poly, op_budget, planted_sparse_spectral,  # noqa: E402
                         power_support, sparse_spectral_lra, sv_bounds)
from slra.sketch import CountSketch, odd  # noqa: E402
from slra.streaming import (StreamContext, add_err_recover, net_recover, planted_block,  # noqa: E402
                            rel_err_recover)

RESULTS: list = []


def report(num: int, title: str, ok: bool, detail: str) -> bool:
    line = f"{'PASS' if ok else 'FAIL'} [{num:2d}] {title}: {detail}"
    RESULTS.append(line)
    print(line, flush=True)
    return ok


# ---------------------------------------------------------------- criteria

def criterion_1():
    t0 = time.perf_counter()
    bad = []
    for q, a, g in itertools.product((1, 3, 5, 9, 15, 33), (0.5, 1.0, 2.0), (0.04, 0.25, 1.0)):
        r = chebyshev_poly(q, a, g).check(points=50, slack=1e-9)
        if not all(r.values()):
            bad.append((q, a, g, r))
    dt = time.perf_counter() - t0
    return report(1, "Chebyshev polynomial properties", not bad and dt < 1.0,
                  f"{54 - len(bad)}/54 parameter triples ok in {dt:.3f}s")


def criterion_2():
    rng = np.random.default_rng(2)
    fails = 0
    for _ in range(500):
        n, d = rng.integers(1, 41, size=2)
        A = rng.standard_normal((n, d)) * rng.exponential(1, (n, d))
        S = rng.choice(n, rng.integers(1, n + 1), replace=False)
        T = rng.choice(d, rng.integers(1, d + 1), replace=False)
        sub = singular_values(restrict(A, SupportPair.of(S, T)))
        full = np.linalg.svd(A, compute_uv=False)
        fails += int(np.any(sub > full[: sub.size] * (1 + 1e-9)))
    return report(2, "interlacing soundness", fails == 0, f"{fails} failures in 500 instances")


def _spectral_instances():
    for seed in range(100):
        A, _, _, _ = planted_sparse_spectral(300, 300, 4, 3, 1.05, seed)
        yield seed, A, np.linalg.svd(A, compute_uv=False)


def criterion_3():
    t0 = time.perf_counter()
    good = within = 0
    budget = op_budget(300, 300, 3, 4, 0.2, C=16.0)
    worst = 0
    for seed, A, sv in _spectral_instances():
        res = sparse_spectral_lra(A, 3, 4, 0.2, seed)
        err = spectral_norm(A - materialize(res.factor, 300, 300))
        good += err <= 1.2 * sv[3]
        within += res.counter.matmuls <= budget
        worst = max(worst, res.counter.matmuls)
    dt = time.perf_counter() - t0
    ok = good >= 90 and within == 100 and dt < 300
    return report(3, "sparse spectral LRA end to end", ok,
                  f"{good}/100 within (1+eps) sigma_4; max {worst} products <= {budget:.1f}; {dt:.0f}s")


def criterion_4():
    eps = 0.2
    sound_fail = qual = tight = 0
    for seed, A, sv in _spectral_instances():
        sup = power_support(A, 3, 4, eps, seed)
        for j in (1, 2, 3):
            b = sv_bounds(A, sup, j, eps, seed)
            s2 = sv[j - 1] ** 2
            sound_fail += not (b.L <= s2 * (1 + 1e-6) and s2 <= b.U * (1 + 1e-6))
            if sv[j - 1] >= (1 + math.sqrt(eps)) * sv[3]:
                qual += 1
                tight += b.ratio <= 1 + 20 * eps
    ok = sound_fail == 0 and qual > 0 and tight >= 0.95 * qual
    return report(4, "certified singular value bounds", ok,
                  f"{sound_fail} bound violations; {tight}/{qual} qualifying pairs with U/L <= 1+20eps")


def criterion_5():
    n, delta = 10_000, 0.01
    reps = odd(math.ceil(8 * math.log(1 / delta)))
    lines, ok = [], True
    for B in (16, 64):
        bad = trials = 0
        for seed in range(10):
            rng = np.random.default_rng(seed)
            x = rng.standard_normal(n) * rng.exponential(1, n)
            head = rng.choice(n, B, replace=False)
            x[head] = rng.choice([-1, 1], B) * 1e3 * (1 + rng.uniform(size=B))
            tail = np.sort(x * x)[: n - B].sum()
            cs = CountSketch(n, 4 * B, reps, seed=seed)
            cs.update(np.arange(n), x)
            err = (cs.recover(np.arange(n)) - x) ** 2
            bad += int(np.sum(err > 3 * tail / B))
            trials += n
        ok &= bad / trials <= delta
        lines.append(f"B={B}: {bad}/{trials}")
    return report(5, "CountSketch tail bound", ok, "; ".join(lines) + f" (r={reps})")


def criterion_6():
    rng = np.random.default_rng(6)
    fails = 0
    for t in range(50):
        algo = ("net", "rel", "add")[t % 3]
        n, d = (6, 6) if algo == "net" else (int(rng.integers(8, 30)), int(rng.integers(8, 30)))
        L = int(rng.integers(1, 400))
        r, c = rng.integers(0, n, L), rng.integers(0, d, L)
        v = rng.standard_normal(L) * 10.0 ** rng.uniform(-3, 3, L)
        seq = StreamContext(algo, n, d, 1, 1, 0.5, seed=t)
        seq.ingest(r, c, v)
        cuts = np.sort(rng.integers(0, L + 1, 3))
        parts = np.split(np.arange(L), cuts)
        shards = []
        for idx in parts:
            sh = StreamContext(algo, n, d, 1, 1, 0.5, seed=t)
            sh.ingest(r[idx], c[idx], v[idx])
            shards.append(sh)
        merged = shards[0]
        for sh in shards[1:]:
            merged = merged.merge(sh)
        p = rng.permutation(L)
        perm = StreamContext(algo, n, d, 1, 1, 0.5, seed=t)
        perm.ingest(r[p], c[p], v[p])
        fails += not (merged.same_state(seq) and perm.same_state(seq))
    return report(6, "streaming linearity", fails == 0, f"{fails} mismatches in 50 streams")


def criterion_7():
    good, ledger_ok = 0, True
    expected = math.ceil(4 * (1 / 0.25) * math.log(8 / 1))
    for seed in range(100):
        rng = np.random.default_rng(seed)
        A = 0.1 * rng.standard_normal((8, 8))
        A[rng.integers(8), rng.integers(8)] += 3.0 * rng.choice([-1, 1])
        ctx = StreamContext("net", 8, 8, 1, 1, 0.5, seed)
        ctx.ingest_matrix(A, order_seed=seed)
        out = net_recover(ctx)
        cost = frobenius_sq(A - materialize(out.factor, 8, 8))
        good += cost <= 1.5 * brute_force_sparse_lra(A, 1, 1).cost
        ledger_ok &= ctx.ledger.total() == expected
    return report(7, "net recovery relative error", good >= 95 and ledger_ok,
                  f"{good}/100 within (1+eps) OPT; ledger == {expected}: {ledger_ok}")


def criterion_8():
    good = size_ok = 0
    cap = 8 * 2 * 1 / 0.25
    for seed in range(100):
        A, _, _ = planted_block(40, 40, 2, 1, seed)
        ctx = StreamContext("rel", 40, 40, 2, 1, 0.25, seed)
        ctx.ingest_matrix(A, order_seed=seed)
        out = rel_err_recover(ctx)
        good += frobenius_sq(A - out.dense(40, 40)) <= 2.0 * brute_force_sparse_lra(A, 2, 1).cost
        size_ok += out.S.size <= cap and out.T.size <= cap
    return report(8, "relative-error streaming recovery", good >= 90 and size_ok == 100,
                  f"{good}/100 within (1+4eps) OPT; {size_ok}/100 supports <= {cap:.0f}")


def _slope(xs, ys):
    return float(np.polyfit(np.log(xs), np.log(ys), 1)[0])


def criterion_9():
    good = 0
    for seed in range(100):
        A, _, _ = planted_block(48, 48, 2, 2, seed)
        ctx = StreamContext("add", 48, 48, 2, 2, 0.3, seed)
        ctx.ingest_matrix(A, order_seed=seed)
        out = add_err_recover(ctx)
        opt = brute_force_sparse_lra(A, 2, 2).cost
        good += frobenius_sq(A - out.dense(48, 48)) <= opt + 0.3 * frobenius_sq(A)
    grid = (1, 2, 4)
    ms = [StreamContext("add", 48, 48, s, 1, 0.3, 0).ledger.total() for s in grid]
    mk = [StreamContext("add", 48, 48, 1, k, 0.3, 0).ledger.total() for k in grid]
    a, b = _slope(grid, ms), _slope(grid, mk)
    ok = good >= 90 and abs(a - 1.0) <= 0.25 and abs(b - 2.0) <= 0.3
    return report(9, "additive-error streaming recovery", ok,
                  f"{good}/100 within OPT + eps||A||_F^2; slope in s {a:.3f}, in k {b:.3f}")


def criterion_10():
    v = (transfer_checks.projection_transfer_violations(1000),
         transfer_checks.low_rank_transfer_violations(1000),
         transfer_checks.row_wise_violations(1000))
    return report(10, "Frobenius transfer inequalities", sum(v) == 0,
                  f"violations (projection, low-rank, row-wise) = {v}")


def _roc(fn, n, s):
    null = sum(fn(gaussian_noise(n, i), i).signal for i in range(100))
    hit = sum(fn(gen_planted(n, s, 1, seed=i).A, i).signal for i in range(100))
    return hit / 100, null / 100


def criterion_11():
    tpr_s, fpr_s = _roc(lambda A, i: detect_small_s(A, 128, 2, 1, i), 128, 2)
    tpr_l, fpr_l = _roc(lambda A, i: detect_large_s(A, 64, 8, 1, i), 64, 8)
    ok_s = tpr_s >= 0.9 and fpr_s <= 0.1
    ok_l = tpr_l >= 0.9 and fpr_l <= 0.1
    return report(11, "detection ROC", ok_s and ok_l,
                  f"small-s TPR {tpr_s:.2f} FPR {fpr_s:.2f} ({'ok' if ok_s else 'miss'}); "
                  f"large-s TPR {tpr_l:.2f} FPR {fpr_l:.2f} ({'ok' if ok_l else 'miss'})")


def criterion_12():
    n = min_valid_n(2, 0.5, 64)
    good, mode = 0, None
    for seed in range(100):
        inst = gen_planted(n, 2, 1, seed=seed)
        res = estimate_signal(inst.A, n, 2, 1, 0.5, seed)
        mode = res.info["sketch"]
        good += spectral_norm(inst.dense_signal() - materialize(res.factor, n, n)) <= 0.5
    return report(12, "planted signal estimation", good >= 90,
                  f"{good}/100 within eps at n={n} (condition fails at n=64; {mode} sketch)")


def criterion_13():
    rng = np.random.default_rng(13)
    fails = 0
    for _ in range(1000):
        m = int(rng.integers(1, 2000))
        kind = rng.integers(3)
        if kind == 0:
            v = rng.standard_normal(m)
        elif kind == 1:
            v = rng.standard_normal(m) * rng.pareto(1.0, m)
        else:
            v = np.zeros(m)
            v[rng.choice(m, rng.integers(1, m + 1), replace=False)] = 1.0
        s, thr = flat_level(v)
        tot, L = float(v @ v), 1 + math.log2(m)
        ok = math.isclose(thr, tot / (s * L)) and np.sum(v * v >= thr) >= s / 2
        s2 = 1
        while s2 < s:
            ok &= np.sum(v * v >= tot / (s2 * L)) < s2 / 2
            s2 *= 2
        fails += not ok
    return report(13, "flat sparsity level", fails == 0, f"{fails} failures in 1000 vectors")


CRITERIA = {i: globals()[f"criterion_{i}"] for i in range(1, 14)}


# ---------------------------------------------------------------- pytest entry points

def test_c01_chebyshev_polynomial():
    assert criterion_1()


def test_c02_interlacing():
    assert criterion_2()


def test_c03_sparse_spectral_lra():
    assert criterion_3()


def test_c04_sv_bounds():
    assert criterion_4()


def test_c05_countsketch_tail():
    assert criterion_5()


def test_c06_streaming_linearity():
    assert criterion_6()


def test_c07_net_recover():
    assert criterion_7()


def test_c08_rel_err_recover():
    assert criterion_8()


def test_c09_add_err_recover():
    assert criterion_9()


def test_c10_transfer_inequalities():
    assert criterion_10()


def test_c11_detection_roc():
    assert criterion_11()


def test_c12_estimation():
    assert criterion_12()


def test_c13_flat_sparsity():
    assert criterion_13()


if __name__ == "__main__":
    which = [int(a) for a in sys.argv[1:]] or list(CRITERIA)
    results = [CRITERIA[i]() for i in which]
    sys.exit(0 if all(results) else 1)
