"""Acceptance checks, one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v`` (lines appear in the terminal
summary) or directly with ``python tests/test_acceptance.py``.
"""

from __future__ import annotations

import itertools
import time

import numpy as np
import pytest
import scipy.linalg

from convfeat.approx.grid import grid_build
from convfeat.compiler import compile_mixed, compile_pow2, schedule
from convfeat.experiments import affine_experiment, manifold_experiment, parameter_sweep
from convfeat.tensor import conv2d, eval_dcnn1d
from convfeat.vectorize import HierarchicalPartition, check_equivalence, svd_extractor

SEED = 42
RESULTS: list[str] = []


def report(label: str, passed: bool, detail: str) -> None:
    line = f"[{'PASS' if passed else 'FAIL'}] {label}: {detail}"
    RESULTS.append(line)
    print(line)


def timed(fn, *args):
    start = time.perf_counter()
    out = fn(*args)
    return out, time.perf_counter() - start


def dot_oracle_error(got, x, V):
    want = x @ V.T
    denom = np.linalg.norm(x, axis=1)[:, None] * np.linalg.norm(V, axis=1)[None, :]
    return float(np.max(np.abs(got - want) / denom))


def block_oracle(x, r, block):
    """``<block p of x, r_i>`` via reshaping a zero-padded copy of ``x``; shape (N, n, positions)."""
    n_pos = -(-x.shape[1] // block)
    padded = np.zeros((x.shape[0], n_pos * block))
    padded[:, : x.shape[1]] = x
    return np.einsum("bpk,ik->bip", padded.reshape(x.shape[0], n_pos, block), r)


# -- criteria 1 and 2: power-of-two compilation --------------------------------

POW2_CASES = list(itertools.product((1, 2, 4, 8, 16), (8, 64, 256, 1024)))


def pow2_metrics(seed=SEED):
    final, inner = 0.0, 0.0
    for case, (m, d) in enumerate(POW2_CASES):
        rng = np.random.default_rng([seed, case])
        V = rng.standard_normal((m, d))
        x = rng.standard_normal((1000, d))
        res = compile_pow2(V)
        layers = eval_dcnn1d(res.net, x)
        final = max(final, dot_oracle_error(layers[-1][..., 0], x, V))
        for h, r, block in zip(layers[1:-1], res.basis.bases, res.basis.block_lens):
            want = block_oracle(x, r, block)
            scale = np.linalg.norm(x, axis=1)[:, None, None] * np.linalg.norm(r, axis=1)[None, :, None]
            inner = max(inner, float(np.max(np.abs(h - want) / scale)))
    return {"final_error": final, "intermediate_error": inner}


def test_criterion_1_pow2_exactness():
    metrics, secs = timed(pow2_metrics)
    ok = metrics["final_error"] <= 1e-10 and secs < 30
    report("1 filter-size-2 nets reproduce inner products (20 dictionaries)", ok,
           f"max rel error {metrics['final_error']:.2e} <= 1e-10, {secs:.1f}s < 30s")
    assert ok


def test_criterion_2_intermediate_channels():
    metrics, secs = timed(pow2_metrics)
    ok = metrics["intermediate_error"] <= 1e-10
    report("2 every intermediate channel equals its level-basis inner product", ok,
           f"max rel error {metrics['intermediate_error']:.2e} <= 1e-10")
    assert ok


# -- criterion 3: mixed kernels ------------------------------------------------

MIXED_CASES = [((2, 3, 2), 12), ((3, 3), 9), ((2, 3), 5), ((4, 2, 2), 16)]


def mixed_metrics(seed=SEED):
    out = {}
    for case, (sizes, d) in enumerate(MIXED_CASES):
        rng = np.random.default_rng([seed, 100 + case])
        V = rng.standard_normal((3, d))
        x = rng.standard_normal((1000, d))
        net = compile_mixed(V, sizes).net
        out[str(sizes)] = dot_oracle_error(net(x)[..., 0], x, V)
    return out


def test_criterion_3_mixed_kernels():
    metrics, secs = timed(mixed_metrics)
    worst = max(metrics.values())
    ok = worst <= 1e-10 and secs < 5
    report("3 mixed kernel sizes incl. padding branch", ok,
           f"max rel error {worst:.2e} <= 1e-10 over {list(metrics)}, {secs:.2f}s < 5s")
    assert ok


# -- criterion 4: 2D/1D equivalence -------------------------------------------

PROP_SIZES = [(2, 2), (2, 2, 2), (3, 3), (2, 3, 2)]


def direct_2d_chain(kernels, Y):
    out = Y
    for K in kernels:
        out = conv2d(K, out, K.shape[0])
    return float(out.item())


def equivalence_metrics(seed=SEED):
    worst, oracle_gap = 0.0, 0.0
    bijective = True
    for case, sizes in enumerate(PROP_SIZES):
        rng = np.random.default_rng([seed, 200 + case])
        d = int(np.prod(sizes))
        for _ in range(200):
            kernels = [rng.standard_normal((s, s)) for s in sizes]
            Y = rng.standard_normal((d, d))
            lhs, rhs = check_equivalence(kernels, Y)
            worst = max(worst, abs(lhs - rhs) / max(abs(lhs), abs(rhs)))
            direct = direct_2d_chain(kernels, Y)
            oracle_gap = max(oracle_gap, abs(lhs - direct) / abs(direct))
        part = HierarchicalPartition(sizes)
        seen = {part.flat_index(i, j) for i in range(1, d + 1) for j in range(1, d + 1)}
        bijective &= seen == set(range(1, d * d + 1))
    figure = HierarchicalPartition((2, 3, 2))
    return {
        "max_rel_diff": worst,
        "oracle_gap": oracle_gap,
        "bijective": bijective,
        "lambda_9_5": list(figure.partition_vector(9, 5)),
        "delta_9_5": figure.flat_index(9, 5),
    }


def test_criterion_4_vectorized_equivalence():
    metrics, secs = timed(equivalence_metrics)
    ok = (
        metrics["max_rel_diff"] <= 1e-12
        and metrics["oracle_gap"] <= 1e-12
        and metrics["bijective"]
        and metrics["delta_9_5"] == 93
        and metrics["lambda_9_5"] == [3, 6, 1]
        and secs < 10
    )
    report("4 2D chains equal vectorized 1D chains; index map bijective", ok,
           f"max rel diff {metrics['max_rel_diff']:.2e} <= 1e-12, bijective={metrics['bijective']}, "
           f"delta(9,5)={metrics['delta_9_5']}, {secs:.2f}s < 10s")
    assert ok


# -- criterion 5: singular values ------------------------------------------------


def svd_metrics(seed=SEED):
    rng = np.random.default_rng([seed, 300])
    worst, ordered = 0.0, True
    for _ in range(50):
        X = rng.standard_normal((8, 8))
        got = svd_extractor(X).net(X)[:, 0, 0]
        oracle = scipy.linalg.svd(X, compute_uv=False, lapack_driver="gesvd")
        worst = max(worst, float(np.max(np.abs(got - oracle) / oracle)))
        ordered &= bool(np.all(np.diff(got) <= 0))
    return {"max_rel_error": worst, "nonincreasing": ordered}


def test_criterion_5_singular_values():
    metrics, secs = timed(svd_metrics)
    ok = metrics["max_rel_error"] <= 1e-8 and metrics["nonincreasing"] and secs < 5
    report("5 2D nets output singular values (50 random 8x8)", ok,
           f"max rel error {metrics['max_rel_error']:.2e} <= 1e-8, "
           f"nonincreasing={metrics['nonincreasing']}, {secs:.2f}s < 5s")
    assert ok


# -- criterion 6: parameter counts -----------------------------------------------

SWEEP_M = (1, 2, 4, 8)


def sweep_metrics(seed=SEED):
    rows = [row for m in SWEEP_M for row in parameter_sweep(m, seed=seed)]
    return {
        "max_fraction_of_8md": max(row["N"] / row["bound_8md"] for row in rows),
        "all_within_schedule": all(row["within_schedule"] for row in rows),
        "max_growth": max(row["growth"] for row in rows if row["growth"] is not None),
        "worst_growth_row": max(
            ((row["m"], row["d"], row["growth"]) for row in rows if row["growth"] is not None),
            key=lambda t: t[2],
        ),
    }


def test_criterion_6a_parameter_bound():
    metrics, secs = timed(sweep_metrics)
    ok = metrics["max_fraction_of_8md"] <= 1.0 and metrics["all_within_schedule"] and secs < 5
    report("6a N <= 8md for d in 16..1024, m in 1,2,4,8", ok,
           f"max N/8md = {metrics['max_fraction_of_8md']:.3f} <= 1, "
           f"channels within schedule={metrics['all_within_schedule']}, {secs:.2f}s < 5s")
    assert ok


def test_criterion_6b_doubling_growth():
    metrics, _ = timed(sweep_metrics)
    m, d, g = metrics["worst_growth_row"]
    ok = metrics["max_growth"] <= 2.2
    report("6b doubling d at fixed m grows N by <= 2.2", ok,
           f"max ratio {metrics['max_growth']:.3f} (m={m}, d={d // 2}->{d}) vs 2.2")
    assert ok


# -- criterion 7: grid network ------------------------------------------------


def sines(y):
    return np.sin(2 * np.pi * y).sum(axis=-1) / (2 * np.pi * np.sqrt(y.shape[-1]))


def distance_to_point(y):
    return np.linalg.norm(y - 0.3, axis=-1)


GRID_FUNCTIONS = {"sines": sines, "distance": distance_to_point}


def grid_metrics(seed=SEED):
    rng = np.random.default_rng([seed, 700])
    out = {"bound_ok": True, "partition_ok": True, "errors": {}}
    for (name, f), m in itertools.product(GRID_FUNCTIONS.items(), (1, 2)):
        x = rng.uniform(0, 1, (40_000, m))
        for n in (8, 16, 32):
            g = grid_build(f, m, n, 0.05)
            inside = g.in_plateau(x)
            kept = x[inside][:10_000]
            assert len(kept) == 10_000
            err = float(np.max(np.abs(g(kept) - f(kept))))
            out["errors"][f"{name}/m{m}/n{n}"] = err
            out["bound_ok"] &= err <= np.sqrt(m) / n
            probe = x[:10_000]
            ones = np.zeros(len(probe), dtype=int)
            nonzero = np.zeros(len(probe), dtype=int)
            for cell in itertools.product(range(g.half), repeat=m):
                b = g.bump(probe, np.array(cell))
                ones += b == 1.0
                nonzero += b != 0.0
            plateau = g.in_plateau(probe)
            out["partition_ok"] &= bool(
                np.all(ones[plateau] == 1) and np.all(nonzero[plateau] == 1) and np.all(ones[~plateau] == 0)
            )
    out["monotone"] = all(
        out["errors"][f"{name}/m{m}/n32"] < out["errors"][f"{name}/m{m}/n8"]
        for name in GRID_FUNCTIONS for m in (1, 2)
    )
    return out


def test_criterion_7_grid_network():
    metrics, secs = timed(grid_metrics)
    ok = metrics["bound_ok"] and metrics["monotone"] and metrics["partition_ok"] and secs < 60
    worst = max(metrics["errors"].items(), key=lambda kv: kv[1])
    report("7 grid head sup error <= sqrt(m)/n off the slab set; one active bump", ok,
           f"bound={metrics['bound_ok']}, n=32 < n=8: {metrics['monotone']}, "
           f"partition={metrics['partition_ok']}, largest error {worst[1]:.3f} ({worst[0]}), {secs:.1f}s < 60s")
    assert ok


# -- criterion 8: affine pieces ------------------------------------------------

AFFINE_CASES = [
    (T, d, m, SEED + i)
    for i, (T, d, m) in enumerate(list(itertools.product((2, 3), (16, 32), (1, 2))) + [(2, 32, 2), (3, 16, 1)])
]


def affine_metrics(seed=SEED):
    rows = []
    for T, d, m, case_seed in AFFINE_CASES:
        r = affine_experiment(T, d, m, case_seed + seed - SEED, samples=1000)
        rows.append(r)
    return {
        "min_accuracy": min(r["selector_accuracy"] for r in rows),
        "max_coord_error": max(r["coord_error"] for r in rows),
        "max_head_gap": max(r["head_consistency"] for r in rows),
        "bounded": all(r["max_error_plateau"] <= r["grid_bound"] for r in rows),
        "wrong_clipped": all(r["max_wrong_preactivation"] <= 0 for r in rows),
        "separated": all(r["min_sample_gap"] >= r["margin"] * (1 - 1e-9) for r in rows),
    }


def test_criterion_8_affine_pieces():
    metrics, secs = timed(affine_metrics)
    ok = (
        metrics["min_accuracy"] == 1.0
        and metrics["max_coord_error"] <= 1e-9
        and metrics["max_head_gap"] <= 1e-9
        and metrics["bounded"]
        and metrics["wrong_clipped"]
        and metrics["separated"]
        and secs < 60
    )
    report("8 affine selector and coordinates on 10 well-separated models", ok,
           f"accuracy {metrics['min_accuracy']:.3f} = 1, coord error {metrics['max_coord_error']:.1e} <= 1e-9, "
           f"|Phi - head(a)| {metrics['max_head_gap']:.1e}, error within grid bound={metrics['bounded']}, {secs:.1f}s < 60s")
    assert ok


# -- criterion 9: manifold pipeline ---------------------------------------------


def manifold_metrics(seed=SEED):
    coarse = manifold_experiment("circle", 128, 8, 8, seed)
    fine = manifold_experiment("circle", 128, 8, 32, seed)
    return {
        "distortion_fraction": min(coarse["distortion_fraction"], fine["distortion_fraction"]),
        "l2_n8": coarse["lp_error"],
        "l2_n32": fine["lp_error"],
    }


def test_criterion_9_manifold_pipeline():
    metrics, secs = timed(manifold_metrics)
    ok = metrics["distortion_fraction"] >= 0.99 and metrics["l2_n32"] < metrics["l2_n8"] and secs < 60
    report("9 circle in R^128 projected to 8 dims", ok,
           f"distortion sandwich fraction {metrics['distortion_fraction']:.3f} >= 0.99, "
           f"held-out L2 {metrics['l2_n8']:.4f} (n=8) > {metrics['l2_n32']:.4f} (n=32), {secs:.1f}s < 60s")
    assert ok


# -- criterion 10: determinism --------------------------------------------------

ALL_METRICS = {
    "1-2": pow2_metrics,
    "3": mixed_metrics,
    "4": equivalence_metrics,
    "5": svd_metrics,
    "6": sweep_metrics,
    "7": grid_metrics,
    "8": affine_metrics,
    "9": manifold_metrics,
}


def test_criterion_10_determinism():
    mismatched = [key for key, fn in ALL_METRICS.items() if fn(SEED) != fn(SEED)]
    ok = not mismatched
    report("10 reruns with the same seed give identical metrics", ok,
           f"criteria rerun: {list(ALL_METRICS)}, mismatched: {mismatched or 'none'}")
    assert ok


if __name__ == "__main__":
    import sys

    failed = 0
    for name, fn in list(globals().items()):
        if name.startswith("test_criterion_"):
            try:
                fn()
            except AssertionError:
                failed += 1
    sys.exit(1 if failed else 0)
