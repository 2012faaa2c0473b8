"""Command-line harness.

Exit codes: 0 all checks passed, 1 a check failed, 2 malformed input,
3 precondition violated.  Every command accepts ``--seed`` (default 42),
``--tol``, ``--out``, ``--report`` and ``--quiet``; ``--report -`` writes the
JSON report to stdout.
"""

from __future__ import annotations

import argparse
import sys
import time
from math import prod

import numpy as np
import scipy.linalg

from . import io
from .compiler import compile_mixed, max_relative_error, pow2_kernels, schedule
from .errors import BreakdownError, FormatError, PreconditionError, SeparationError
from .experiments import SWEEP_DIMS, affine_experiment, manifold_experiment, parameter_sweep
from .report import RunReport
from .tensor import ConvNet2D, eval_dcnn2d
from .vectorize import HierarchicalPartition, check_equivalence, compile_2d_dict, frobenius_relative_error, svd_extractor

EXIT_OK, EXIT_FAILED, EXIT_MALFORMED, EXIT_PRECONDITION = 0, 1, 2, 3


def _kernels(text: str) -> tuple[int, ...]:
    try:
        sizes = tuple(int(s) for s in text.split(",") if s.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"kernel sizes must be comma-separated integers: {text!r}") from exc
    if not sizes or min(sizes) < 1:
        raise argparse.ArgumentTypeError(f"kernel sizes must be positive: {text!r}")
    return sizes


def _ints(text: str) -> tuple[int, ...]:
    return _kernels(text)


def _is_pow2(d: int) -> bool:
    return d >= 2 and not d & (d - 1)


def _tol(args, default: float) -> float:
    return default if args.tol is None else args.tol


def _config(args) -> dict:
    skip = {"handler", "report", "quiet", "seed"}
    return {k: (list(v) if isinstance(v, tuple) else v) for k, v in vars(args).items() if k not in skip}


# -- commands ---------------------------------------------------------------


def cmd_compile(args, report: RunReport) -> None:
    D = io.dictionary_from_dict(io.read_json(args.dict))
    d = D.shape[-1]
    tol = _tol(args, 1e-10)
    rng = np.random.default_rng(args.seed)
    if D.ndim == 3:
        sizes = args.kernels or (pow2_kernels(d) if _is_pow2(d) else None)
        if sizes is None:
            raise PreconditionError(f"d={d} is not a power of two; pass --kernels")
        net = compile_2d_dict(D, sizes, tol=args.basis_tol)
        X = rng.standard_normal((args.samples, d, d))
        report.check_le("max_rel_error", frobenius_relative_error(net, D, X) if args.samples else 0.0, tol)
    else:
        if args.schedule and not _is_pow2(d):
            raise PreconditionError(f"--schedule needs d a power of two, got d={d}")
        sizes = pow2_kernels(d) if args.schedule or not args.kernels else args.kernels
        if args.schedule and args.kernels and tuple(args.kernels) != sizes:
            raise PreconditionError(f"--schedule uses kernels {sizes}, got {args.kernels}")
        result = compile_mixed(D, sizes, tol=args.basis_tol)
        net = result.net
        X = rng.standard_normal((args.samples, d))
        report.check_le("max_rel_error", max_relative_error(net, D, X), tol)
        if _is_pow2(d) and set(sizes) == {2} and prod(sizes) == d:
            plan = schedule(d, D.shape[0])
            report.record("schedule", list(plan.capacities))
            report.check_le("param_count_vs_8md", result.param_count, plan.bound)
            report.check_ge("within_schedule", int(plan.admits(result.channel_counts)), 1)
            report.record("bound_8md", plan.bound)
    report.record("kernels", list(sizes))
    report.record("channel_counts", list(net.channels[1:]))
    report.record("param_count", sum(layer.filters.size + layer.out_channels for layer in net.layers))
    if args.out:
        io.write_json(args.out, io.net_to_dict(net))


def cmd_verify(args, report: RunReport) -> None:
    net = io.net_from_dict(io.read_json(args.net))
    D = io.dictionary_from_dict(io.read_json(args.dict))
    tol = _tol(args, 1e-10)
    d = D.shape[-1]
    is_2d = isinstance(net, ConvNet2D)
    if (D.ndim == 3) != is_2d:
        raise PreconditionError("network kind and dictionary kind differ (1d vs 2d)")
    if net.input_dim != d:
        raise PreconditionError(f"network input dimension {net.input_dim} differs from dictionary d={d}")
    if net.channels[-1] != D.shape[0] or net.dims[-1] != 1:
        raise PreconditionError(
            f"network ends with {net.channels[-1]} channel(s) of length {net.dims[-1]}, "
            f"dictionary has {D.shape[0]} feature(s)"
        )
    if args.samples == 0:
        report.warnings.append("no samples drawn; verification is vacuous")
        report.check_le("max_rel_error", 0.0, tol)
        return
    rng = np.random.default_rng(args.seed)
    if is_2d:
        err = frobenius_relative_error(net, D, rng.standard_normal((args.samples, d, d)))
    else:
        err = max_relative_error(net, D, rng.standard_normal((args.samples, d)))
    report.check_le("max_rel_error", err, tol)


def cmd_vectorize(args, report: RunReport) -> None:
    Y = io.matrix_from_json(io.read_json(getattr(args, "in")))
    partition = HierarchicalPartition.for_kernels(args.kernels)
    if Y.shape[0] != partition.d:
        raise PreconditionError(f"kernel product {partition.d} does not match matrix size {Y.shape[0]}")
    y = partition.vectorize(Y)
    report.record("d", partition.d)
    report.check_le("roundtrip_error", float(np.max(np.abs(partition.devectorize(y) - Y))), 0.0)
    if args.out:
        io.write_json(args.out, {"kernels": list(args.kernels), "vector": y.tolist()})


def cmd_check_prop3(args, report: RunReport) -> None:
    sizes = args.kernels
    tol = _tol(args, 1e-12)
    d = prod(sizes)
    rng = np.random.default_rng(args.seed)
    worst = 0.0
    for _ in range(args.trials):
        kernels = [rng.standard_normal((s, s)) for s in sizes]
        lhs, rhs = check_equivalence(kernels, rng.standard_normal((d, d)))
        worst = max(worst, abs(lhs - rhs) / max(abs(lhs), abs(rhs), np.finfo(float).tiny))
    report.check_le("max_rel_diff", worst if args.trials else 0.0, tol)
    perm = HierarchicalPartition.for_kernels(sizes).permutation
    report.check_ge("index_map_bijective", int(np.array_equal(np.sort(perm.ravel()), np.arange(d * d))), 1)
    report.record("d", d)


def cmd_svd_net(args, report: RunReport) -> None:
    X = io.matrix_from_json(io.read_json(getattr(args, "in")))
    tol = _tol(args, 1e-8)
    extraction = svd_extractor(X, args.kernels, tol=args.rank_tol)
    oracle = scipy.linalg.svd(X, compute_uv=False, lapack_driver="gesvd")
    report.record("rank", extraction.rank)
    report.record("oracle_singular_values", oracle.tolist())
    if extraction.net is None:
        report.warnings.append("matrix is numerically zero; no network produced")
        report.record("singular_values", [])
        return
    outputs = eval_dcnn2d(extraction.net, X)[-1][:, 0, 0]
    r = extraction.rank
    rel = np.abs(outputs - oracle[:r]) / max(oracle[0], np.finfo(float).tiny)
    report.record("singular_values", outputs.tolist())
    report.check_le("max_rel_error", float(rel.max()), tol)
    report.check_ge("nonincreasing", int(bool(np.all(np.diff(outputs) <= tol * oracle[0]))), 1)
    report.record("param_count", sum(layer.filters.size + layer.out_channels for layer in extraction.net.layers))
    if args.out:
        io.write_json(args.out, io.net_to_dict(extraction.net))


def cmd_affine_demo(args, report: RunReport) -> None:
    tol = _tol(args, 1e-9)
    r = affine_experiment(args.pieces, args.ambient, args.intrinsic, args.seed, args.samples, args.grid_n, args.delta)
    report.check_ge("selector_accuracy", r["selector_accuracy"], 1.0)
    report.check_le("coord_error", r["coord_error"], tol)
    report.check_le("max_wrong_preactivation", r["max_wrong_preactivation"], 0.0)
    report.check_le("head_consistency", r["head_consistency"], tol)
    report.check_le("feature_error", r["feature_error"], tol)
    report.check_le("max_error_plateau", r["max_error_plateau"], r["grid_bound"])
    for key in ("max_error", "lp_error", "plateau_fraction", "margin", "min_sample_gap", "params_total"):
        report.record(key, r[key])


def cmd_manifold_demo(args, report: RunReport) -> None:
    tol = _tol(args, 1e-9)
    r = manifold_experiment(
        args.shape, args.ambient, args.proj_dim, args.grid_n, args.seed,
        train=args.train, test=args.test, pairs=args.pairs,
        distortion_delta=args.distortion_delta, delta=args.delta,
    )
    report.check_ge("distortion_fraction", r["distortion_fraction"], args.min_distortion)
    report.check_le("feature_error", r["feature_error"], tol)
    for key in ("max_error", "lp_error", "selector_accuracy", "max_error_plateau", "plateau_fraction",
                "max_conflict", "coverage", "delta", "params_total"):
        report.record(key, r[key])


def cmd_report(args, report: RunReport) -> None:
    rows = []
    for m in args.m:
        rows.extend(parameter_sweep(m, args.dims, args.seed))
    for row in rows:
        tag = f"d{row['d']}_m{row['m']}"
        report.check_le(f"param_count_{tag}", row["N"], row["bound_8md"])
        if row["growth"] is not None:
            report.check_le(f"growth_{tag}", row["growth"], args.growth)
    report.record("table", [
        {k: row[k] for k in ("d", "m", "N", "bound_8md", "dense", "channels", "capacities")} for row in rows
    ])
    if args.out:
        io.write_json(args.out, rows)


# -- parser -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=42, help="RNG seed (numpy PCG64), default 42")
    common.add_argument("--tol", type=float, default=None, help="pass/fail tolerance for the main check")
    common.add_argument("--out", default=None, help="output artifact path")
    common.add_argument("--report", default=None, help="write the JSON report here ('-' for stdout)")
    common.add_argument("--quiet", action="store_true", help="suppress the summary lines")

    parser = argparse.ArgumentParser(prog="convfeat", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, handler, help_text):
        p = sub.add_parser(name, parents=[common], help=help_text, description=help_text)
        p.set_defaults(handler=handler)
        return p

    p = add("compile", cmd_compile, "compile a dictionary into a strided CNN")
    p.add_argument("--dict", required=True)
    p.add_argument("--kernels", type=_kernels, default=None, help="layer kernel sizes, e.g. 2,3,2")
    p.add_argument("--schedule", action="store_true", help="use filter size 2 everywhere and check the 8md bound")
    p.add_argument("--basis-tol", type=float, default=1e-9, help="relative rank tolerance for patch bases")
    p.add_argument("--samples", type=int, default=100, help="random inputs for the self-check")

    p = add("verify", cmd_verify, "check a network against a dictionary on random inputs")
    p.add_argument("--net", required=True)
    p.add_argument("--dict", required=True)
    p.add_argument("--samples", type=int, default=1000)

    p = add("vectorize", cmd_vectorize, "reorder a matrix by the hierarchical partition index map")
    p.add_argument("--kernels", type=_kernels, required=True, help="layer kernel sides, first layer first")
    p.add_argument("--in", required=True)

    p = add("check-prop3", cmd_check_prop3, "compare 2D convolution chains with their vectorized 1D form")
    p.add_argument("--kernels", type=_kernels, required=True)
    p.add_argument("--trials", type=int, default=200)

    p = add("svd-net", cmd_svd_net, "build a 2D network that outputs the singular values of a matrix")
    p.add_argument("--in", required=True)
    p.add_argument("--kernels", type=_kernels, default=None)
    p.add_argument("--rank-tol", type=float, default=1e-10, help="relative cutoff for nonzero singular values")

    p = add("affine-demo", cmd_affine_demo, "approximate a function on a union of random affine pieces")
    p.add_argument("--pieces", type=int, default=2)
    p.add_argument("--ambient", type=int, default=32)
    p.add_argument("--intrinsic", type=int, default=2)
    p.add_argument("--samples", type=int, default=1000, help="samples per piece")
    p.add_argument("--grid-n", type=int, default=16)
    p.add_argument("--delta", type=float, default=0.05)

    p = add("manifold-demo", cmd_manifold_demo, "random projection plus grid head on a toy manifold")
    p.add_argument("--shape", choices=("circle", "sphere", "segment"), default="circle")
    p.add_argument("--ambient", type=int, default=128)
    p.add_argument("--proj-dim", type=int, default=8)
    p.add_argument("--grid-n", type=int, default=32)
    p.add_argument("--train", type=int, default=4000)
    p.add_argument("--test", type=int, default=1000)
    p.add_argument("--pairs", type=int, default=1000)
    p.add_argument("--distortion-delta", type=float, default=0.5)
    p.add_argument("--min-distortion", type=float, default=0.99, help="required in-sandwich pair fraction")
    p.add_argument("--delta", type=float, default=None, help="slab width; default is matched to the grid")

    p = add("report", cmd_report, "parameter counts against m*d and the 8md bound over a sweep of d")
    p.add_argument("--m", type=_ints, default=(4,), help="comma-separated feature counts")
    p.add_argument("--dims", type=_ints, default=SWEEP_DIMS)
    p.add_argument("--growth", type=float, default=2.2, help="allowed N ratio per doubling of d")
    return parser


def _summary(report: RunReport) -> str:
    lines = [f"{report.command}: {'PASS' if report.passed else 'FAIL'}"]
    for name, m in report.metrics.items():
        if name == "table":
            continue
        verdict = "" if m["passed"] is None else (" ok" if m["passed"] else " FAILED")
        bound = "" if m["tolerance"] is None else f" (tol {m['tolerance']})"
        lines.append(f"  {name} = {m['value']}{bound}{verdict}")
    lines.extend(f"  warning: {w}" for w in report.warnings)
    return "\n".join(lines)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    report = RunReport(args.command, _config(args), args.seed)
    start = time.perf_counter()
    try:
        args.handler(args, report)
    except FormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MALFORMED
    except PreconditionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    except (SeparationError, BreakdownError) as exc:
        report.warnings.append(str(exc))
        report.record("error", str(exc), None, False)
    report.record("wall_time_ms", round(1000 * (time.perf_counter() - start), 3))

    if args.report == "-":
        sys.stdout.write(report.to_json())
    elif args.report:
        with open(args.report, "w") as fh:
            fh.write(report.to_json())
    if not args.quiet:
        print(_summary(report), file=sys.stderr if args.report == "-" else sys.stdout)
    return EXIT_OK if report.passed else EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
