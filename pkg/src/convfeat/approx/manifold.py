"""Random orthoprojector, toy manifolds, and the project-then-grid pipeline."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from ..compiler import CompilationResult, compile_mixed, pow2_kernels
from ..errors import PreconditionError
from .compose import Composite, compose
from .grid import DEFAULT_DELTA, GridNet

SHAPES = ("circle", "sphere", "segment")


@dataclass(frozen=True)
class ManifoldProjector:
    """``A = sqrt(d / m~) * Phi`` where ``Phi`` has orthonormal rows."""

    phi: np.ndarray
    seed: int

    @property
    def ambient_dim(self) -> int:
        return self.phi.shape[1]

    @property
    def target_dim(self) -> int:
        return self.phi.shape[0]

    @property
    def matrix(self) -> np.ndarray:
        return np.sqrt(self.ambient_dim / self.target_dim) * self.phi

    def __call__(self, x) -> np.ndarray:
        return np.asarray(x, dtype=float) @ self.matrix.T


def random_orthoprojector(d: int, target_dim: int, seed: int) -> ManifoldProjector:
    """Orthonormal rows from the QR factor of a seeded Gaussian ``d x m~`` matrix.

    Column signs are fixed by ``diag(R) > 0`` so the draw is Haar distributed.
    """
    if not 1 <= target_dim <= d:
        raise PreconditionError(f"need 1 <= target_dim <= d, got target_dim={target_dim}, d={d}")
    rng = np.random.default_rng(seed)
    Q, R = np.linalg.qr(rng.standard_normal((d, target_dim)))
    Q = Q * np.where(np.diag(R) < 0, -1.0, 1.0)
    phi = np.ascontiguousarray(Q.T)
    phi.setflags(write=False)
    return ManifoldProjector(phi, seed)


def distortion_ratios(projector: ManifoldProjector, x1, x2) -> np.ndarray:
    """``|A x1 - A x2| / |x1 - x2|`` row by row."""
    diff = np.asarray(x1, dtype=float) - np.asarray(x2, dtype=float)
    return np.linalg.norm(projector(diff), axis=-1) / np.linalg.norm(diff, axis=-1)


def distortion_fraction(projector: ManifoldProjector, x1, x2, delta: float) -> float:
    """Fraction of pairs with ``(1-delta)|x1-x2| <= |Ax1-Ax2| <= (1+delta)|x1-x2|``."""
    r = distortion_ratios(projector, x1, x2)
    return float(np.mean((r >= 1 - delta) & (r <= 1 + delta)))


@dataclass(frozen=True)
class ToyManifold:
    """A unit circle, 2-sphere or segment ``[-1, 1]`` placed by an orthonormal ``frame``."""

    shape: str
    frame: np.ndarray

    @property
    def ambient_dim(self) -> int:
        return self.frame.shape[1]

    def sample(self, rng: np.random.Generator, count: int) -> tuple[np.ndarray, np.ndarray]:
        """Points on the manifold and a Lipschitz-1 (in intrinsic distance) target."""
        if self.shape == "circle":
            theta = rng.uniform(-np.pi, np.pi, count)
            local = np.stack([np.cos(theta), np.sin(theta)], axis=1)
            target = np.abs(theta)
        elif self.shape == "sphere":
            local = rng.standard_normal((count, 3))
            local /= np.linalg.norm(local, axis=1, keepdims=True)
            target = np.arccos(np.clip(local[:, 2], -1.0, 1.0))
        else:
            t = rng.uniform(-1.0, 1.0, count)
            local = t[:, None]
            target = t
        return local @ self.frame, target


def toy_manifold(shape: str, d: int, rng: np.random.Generator) -> ToyManifold:
    dims = {"circle": 2, "sphere": 3, "segment": 1}
    if shape not in dims:
        raise PreconditionError(f"unknown shape {shape!r}; choose from {SHAPES}")
    if d < dims[shape]:
        raise PreconditionError(f"a {shape} does not fit in dimension {d}")
    frame = np.linalg.qr(rng.standard_normal((d, dims[shape])))[0].T
    return ToyManifold(shape, frame)


@dataclass(frozen=True)
class ScatteredGridNet(GridNet):
    """Grid network whose cell values come from the nearest training sample.

    ``values`` stays ``None``; the value at a cell is the target of the sample
    nearest (in unit coordinates) to the cell centre, looked up on demand.
    """

    tree: cKDTree | None = field(default=None, compare=False, repr=False)
    targets: np.ndarray | None = field(default=None, compare=False, repr=False)

    def value_at(self, cells: np.ndarray) -> np.ndarray:
        centres = (2 * np.asarray(cells) + 1) / self.n
        flat = centres.reshape(-1, self.m)
        _, idx = self.tree.query(flat)
        return self.targets[idx].reshape(centres.shape[:-1])

    def coverage(self, cells: np.ndarray) -> float:
        """Fraction of cells whose nearest sample lies within ``sqrt(m)/n`` of the centre."""
        centres = ((2 * np.asarray(cells) + 1) / self.n).reshape(-1, self.m)
        dist, _ = self.tree.query(centres)
        return float(np.mean(dist <= np.sqrt(self.m) / self.n))


def fit_scattered_grid(
    features, targets, n: int, delta: float = DEFAULT_DELTA, margin: float = 0.05
) -> ScatteredGridNet:
    """Grid head over the bounding box of ``features`` widened by ``margin`` per side."""
    features = np.asarray(features, dtype=float)
    targets = np.asarray(targets, dtype=float)
    lo, hi = features.min(axis=0), features.max(axis=0)
    span = np.maximum(hi - lo, 1e-12)
    lower, upper = lo - margin * span, hi + margin * span
    shell = GridNet(features.shape[1], n, delta, None, lower, upper)
    tree = cKDTree(shell.to_unit(features))
    return ScatteredGridNet(shell.m, n, delta, None, shell.lower, shell.upper, tree, targets.copy())


def max_cell_conflict(grid: GridNet, features, targets) -> float:
    """Largest spread of targets among training samples sharing one cell."""
    cells, inside = grid.locate(features)
    targets = np.asarray(targets, dtype=float)[inside]
    if targets.size == 0:
        return 0.0
    _, label = np.unique(cells[inside], axis=0, return_inverse=True)
    label = label.ravel()
    hi = np.full(label.max() + 1, -np.inf)
    lo = np.full(label.max() + 1, np.inf)
    np.maximum.at(hi, label, targets)
    np.minimum.at(lo, label, targets)
    return float(np.max(hi - lo))


def rate_matched_delta(m: int, n: int, p: float = 2.0) -> float:
    """``min(0.05, 1 / (m n^p))``: the slab set then has measure at most ``n^-p``."""
    return min(DEFAULT_DELTA, 1.0 / (m * float(n) ** p))


@dataclass(frozen=True)
class ManifoldResult:
    projector: ManifoldProjector
    compilation: CompilationResult
    model: Composite
    metrics: dict


def manifold_pipeline(
    train_x,
    train_f,
    target_dim: int,
    n: int,
    seed: int,
    test_x=None,
    test_f=None,
    delta: float | None = None,
    p: float = 2.0,
) -> ManifoldResult:
    """Project with a random orthoprojector, compile its rows, fit a grid head.

    The compiled network reproduces ``A x`` exactly, so the head is fitted on
    the projected training samples.  Errors are measured on the held-out set
    when given, otherwise on the training set.

    Without an explicit ``delta`` the slab width is ``rate_matched_delta``,
    which keeps the damped region's share of the ``L^p`` error at ``O(1/n)``.
    """
    train_x = np.atleast_2d(np.asarray(train_x, dtype=float))
    train_f = np.asarray(train_f, dtype=float)
    if train_x.shape[0] != train_f.shape[0] or train_x.shape[0] == 0:
        raise PreconditionError("need matching, nonempty training samples and values")
    d = train_x.shape[1]
    if delta is None:
        delta = rate_matched_delta(target_dim, n, p)
    projector = random_orthoprojector(d, target_dim, seed)
    compiled = compile_mixed(projector.matrix, pow2_kernels(d))
    features = compiled.net(train_x)[..., 0]
    head = fit_scattered_grid(features, train_f, n, delta)
    model = compose(compiled.net, head)

    if test_x is None:
        test_x, test_f = train_x, train_f
    test_x = np.atleast_2d(np.asarray(test_x, dtype=float))
    test_f = np.asarray(test_f, dtype=float)
    test_features = model.features(test_x)
    err = np.abs(head(test_features) - test_f)
    plateau = head.in_plateau(test_features)
    cells, _ = head.locate(test_features)
    metrics = {
        "lp_error": float(np.mean(err**p) ** (1 / p)),
        "max_error": float(err.max()),
        "max_error_plateau": float(err[plateau].max()) if plateau.any() else 0.0,
        "plateau_fraction": float(plateau.mean()),
        "feature_error": float(np.max(np.abs(test_features - projector(test_x)))),
        "max_conflict": max_cell_conflict(head, features, train_f),
        "coverage": head.coverage(cells),
        "delta": delta,
        "params_total": model.param_count,
    }
    return ManifoldResult(projector, compiled, model, metrics)
