"""Heads that turn compiled features into function approximators."""

from .affine import (
    AffineHead,
    AffineModel,
    Selection,
    affine_coords,
    affine_selector,
    exact_bound,
    exact_margin,
    random_affine_model,
)
from .compose import Composite, compose
from .grid import DEFAULT_DELTA, GridNet, active_bumps, grid_build, grid_eval, grid_eval_dense, psi_delta
from .manifold import (
    ManifoldProjector,
    distortion_fraction,
    manifold_pipeline,
    random_orthoprojector,
    rate_matched_delta,
    toy_manifold,
)

__all__ = [
    "AffineHead", "AffineModel", "Selection", "affine_coords", "affine_selector",
    "exact_bound", "exact_margin", "random_affine_model", "Composite", "compose",
    "DEFAULT_DELTA", "GridNet", "active_bumps", "grid_build", "grid_eval",
    "grid_eval_dense", "psi_delta", "ManifoldProjector", "distortion_fraction",
    "manifold_pipeline", "random_orthoprojector", "rate_matched_delta", "toy_manifold",
]
