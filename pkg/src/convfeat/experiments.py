"""Seeded experiment drivers shared by the CLI and the acceptance suite.

All randomness comes from ``numpy.random.default_rng`` (PCG64) seeded with
the caller's integer seed, or with ``[seed, stream]`` for independent streams.
"""

from __future__ import annotations

import numpy as np

from .approx.affine import AffineHead, affine_coords, affine_selector, coordinate_preactivations, random_affine_model
from .approx.compose import compose
from .approx.grid import DEFAULT_DELTA, grid_build
from .approx.manifold import distortion_fraction, manifold_pipeline, toy_manifold
from .compiler import compile_mixed, compile_pow2, pow2_kernels, schedule
from .errors import SeparationError

SWEEP_DIMS = tuple(2**k for k in range(4, 11))


def parameter_sweep(m: int, dims=SWEEP_DIMS, seed: int = 42) -> list[dict]:
    """Compile a Gaussian ``m x d`` dictionary for each ``d`` and count parameters."""
    rows = []
    prev = None
    for d in dims:
        V = np.random.default_rng([seed, d, m]).standard_normal((m, d))
        result = compile_pow2(V)
        plan = schedule(d, m)
        N = result.param_count
        rows.append(
            {
                "d": d,
                "m": m,
                "N": N,
                "bound_8md": plan.bound,
                "dense": m * d,
                "channels": list(result.channel_counts),
                "capacities": list(plan.capacities),
                "within_schedule": plan.admits(result.channel_counts),
                "growth": None if prev is None else N / prev,
            }
        )
        prev = N
    return rows


def lipschitz_sines(a: np.ndarray) -> np.ndarray:
    """``sum_l sin(a_l) / sqrt(m)``, Lipschitz-1 in the Euclidean norm."""
    a = np.asarray(a, dtype=float)
    return np.sin(a).sum(axis=-1) / np.sqrt(a.shape[-1])


def affine_experiment(
    pieces: int,
    ambient: int,
    intrinsic: int,
    seed: int,
    samples: int = 1000,
    grid_n: int = 16,
    delta: float = DEFAULT_DELTA,
) -> dict:
    """Selector accuracy, coordinate recovery and end-to-end error on one random model.

    ``samples`` points are drawn from every piece.  The head approximates
    ``lipschitz_sines`` on the coefficient range ``[1, 2T]^m``.
    """
    model = random_affine_model(pieces, ambient, intrinsic, seed)
    compiled = compile_mixed(model.dictionary(), pow2_kernels(ambient))
    grid = grid_build(lipschitz_sines, intrinsic, grid_n, delta, lower=1.0, upper=2.0 * pieces)
    head = AffineHead(model, grid)
    phi = compose(compiled.net, head)

    x, piece, a = model.sample(np.random.default_rng([seed, 1]), samples)
    features = phi.features(x)
    selection = affine_selector(model, features, strict=False)
    accuracy = float(np.mean(selection.piece == piece))
    try:
        _, recovered = affine_coords(model, features, selection)
        coord_error = float(np.max(np.abs(recovered - a)))
    except SeparationError:
        recovered, coord_error = None, float("inf")

    pre = coordinate_preactivations(model, features, selection)
    wrong = np.ones(pre.shape[:-1], dtype=bool)
    wrong[np.arange(len(piece)), piece] = False
    gaps = model.separation_gaps(x, piece)
    gaps[np.arange(len(piece)), piece] = np.inf

    target = lipschitz_sines(a)
    exact_head = grid(a)
    out = {
        "selector_accuracy": accuracy,
        "coord_error": coord_error,
        "max_wrong_preactivation": float(pre[wrong].max()) if pieces > 1 else 0.0,
        "min_sample_gap": float(gaps.min()) if pieces > 1 else float("inf"),
        "margin": model.margin,
        "bound": model.bound,
        "feature_error": float(np.max(np.abs(features - x @ model.dictionary().T))),
        "params_total": phi.param_count,
        "grid_bound": (2 * pieces - 1) * np.sqrt(intrinsic) / grid_n,
    }
    if recovered is None:
        out.update(max_error=float("inf"), lp_error=float("inf"), max_error_plateau=float("inf"),
                   head_consistency=float("inf"), plateau_fraction=0.0)
        return out
    values = grid(recovered)
    err = np.abs(values - target)
    plateau = grid.in_plateau(a)
    out.update(
        max_error=float(err.max()),
        lp_error=float(np.sqrt(np.mean(err**2))),
        max_error_plateau=float(err[plateau].max()) if plateau.any() else 0.0,
        plateau_fraction=float(plateau.mean()),
        head_consistency=float(np.max(np.abs(values - exact_head))),
    )
    return out


def manifold_experiment(
    shape: str,
    ambient: int,
    proj_dim: int,
    grid_n: int,
    seed: int,
    train: int = 4000,
    test: int = 1000,
    pairs: int = 1000,
    distortion_delta: float = 0.5,
    delta: float | None = None,
) -> dict:
    """Distortion of the random projection and held-out error of the pipeline."""
    rng = np.random.default_rng(seed)
    manifold = toy_manifold(shape, ambient, rng)
    train_x, train_f = manifold.sample(rng, train)
    test_x, test_f = manifold.sample(rng, test)
    result = manifold_pipeline(train_x, train_f, proj_dim, grid_n, seed, test_x, test_f, delta=delta)
    p1, _ = manifold.sample(rng, pairs)
    p2, _ = manifold.sample(rng, pairs)
    metrics = dict(result.metrics)
    metrics["distortion_fraction"] = distortion_fraction(result.projector, p1, p2, distortion_delta)
    metrics["selector_accuracy"] = None
    return metrics
