"""Piece selection and coordinate recovery for well-separated affine pieces.

Piece ``t`` (0-based here, ``t+1`` in the usual 1-based labeling) is
``Z_t = {u_t + sum_l a_l v_{t,l} : a in [2t+1, 2t+2]^m}`` with orthonormal
frame rows ``v_{t,l}``.  From the features ``y_{t,l} = <x, v_{t,l}>`` and
``y_{t,m+1} = <x, u_t>`` two ReLU layers identify the piece containing ``x``
and return its coordinates ``a``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DimensionMismatch, PreconditionError, SeparationError

BOUND_SAFETY = 1.1


def _relu(u):
    return np.maximum(u, 0.0)


@dataclass(frozen=True)
class AffineModel:
    """``frames`` is ``(T, m, d)``, ``offsets`` is ``(T, d)``, ``center_coefs`` is ``(T, m)``.

    Centres are ``z_t = u_t + center_coefs[t] @ frames[t]``.  ``margin`` is the
    separation radius used by the selector and ``bound`` caps
    ``|<x - u_t, v_{t,l}>|`` over all pieces.
    """

    frames: np.ndarray
    offsets: np.ndarray
    center_coefs: np.ndarray
    margin: float
    bound: float

    def __post_init__(self):
        for name in ("frames", "offsets", "center_coefs"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        T, m, d = self.frames.shape
        if self.offsets.shape != (T, d) or self.center_coefs.shape != (T, m):
            raise PreconditionError("frames, offsets and center_coefs disagree in shape")
        if self.margin <= 0 or self.bound <= 0:
            raise PreconditionError("margin and bound must be positive")

    @property
    def pieces(self) -> int:
        return self.frames.shape[0]

    @property
    def intrinsic_dim(self) -> int:
        return self.frames.shape[1]

    @property
    def ambient_dim(self) -> int:
        return self.frames.shape[2]

    @property
    def centers(self) -> np.ndarray:
        return self.offsets + np.einsum("tl,tld->td", self.center_coefs, self.frames)

    def box(self, t: int) -> tuple[float, float]:
        """Coefficient interval of piece ``t`` (0-based): ``[2t+1, 2t+2]``."""
        return 2.0 * t + 1.0, 2.0 * t + 2.0

    def point(self, t: int, a) -> np.ndarray:
        return self.offsets[t] + np.asarray(a, dtype=float) @ self.frames[t]

    def sample(self, rng: np.random.Generator, per_piece: int):
        """Uniform coefficients in each box; returns ``(x, piece, a)``."""
        xs, pieces, coefs = [], [], []
        for t in range(self.pieces):
            lo, hi = self.box(t)
            a = rng.uniform(lo, hi, size=(per_piece, self.intrinsic_dim))
            xs.append(self.offsets[t] + a @ self.frames[t])
            pieces.append(np.full(per_piece, t))
            coefs.append(a)
        return np.concatenate(xs), np.concatenate(pieces), np.concatenate(coefs)

    def dictionary(self) -> np.ndarray:
        """Feature rows ``v_{t,1}, ..., v_{t,m}, u_t`` for ``t = 0..T-1``."""
        rows = np.concatenate([self.frames, self.offsets[:, None, :]], axis=1)
        return rows.reshape(-1, self.ambient_dim)

    def features(self, x) -> np.ndarray:
        """Feature array ``y`` of shape ``(..., T, m+1)`` computed directly."""
        x = np.asarray(x, dtype=float)
        return (x @ self.dictionary().T).reshape(x.shape[:-1] + (self.pieces, self.intrinsic_dim + 1))

    def separation_gaps(self, x, piece) -> np.ndarray:
        """``|x - z_t|^2 - |x - z_{t0}|^2`` for every ``t``, where ``t0 = piece``."""
        x = np.asarray(x, dtype=float)
        sq = np.sum((x[..., None, :] - self.centers) ** 2, axis=-1)
        own = np.take_along_axis(sq, np.asarray(piece)[..., None], axis=-1)
        return sq - own


def exact_margin(frames, offsets, center_coefs) -> float:
    """Minimum of the squared-distance gap over each coefficient box.

    The gap is affine in ``x``, so its minimum over a box is attained at a
    vertex and is found coordinatewise.
    """
    frames, offsets, center_coefs = (np.asarray(a, dtype=float) for a in (frames, offsets, center_coefs))
    T = frames.shape[0]
    z = offsets + np.einsum("tl,tld->td", center_coefs, frames)
    worst = np.inf
    for t0 in range(T):
        lo, hi = 2.0 * t0 + 1.0, 2.0 * t0 + 2.0
        for t in range(T):
            if t == t0:
                continue
            w = 2.0 * (z[t0] - z[t])
            const = offsets[t0] @ w + z[t] @ z[t] - z[t0] @ z[t0]
            slope = frames[t0] @ w
            worst = min(worst, const + np.sum(np.where(slope >= 0, lo * slope, hi * slope)))
    return float(worst)


def exact_bound(frames, offsets) -> float:
    """``max |<x - u_t, v_{t,l}>|`` over ``x`` in every piece, all ``t, l``."""
    frames, offsets = np.asarray(frames, dtype=float), np.asarray(offsets, dtype=float)
    T = frames.shape[0]
    worst = 0.0
    for t0 in range(T):
        lo, hi = 2.0 * t0 + 1.0, 2.0 * t0 + 2.0
        mid, half = (lo + hi) / 2, (hi - lo) / 2
        base = np.einsum("td,tld->tl", offsets[t0] - offsets, frames)  # (T, m)
        gram = np.einsum("kd,tld->tlk", frames[t0], frames)  # (T, m, m_own)
        peak = np.abs(base + mid * gram.sum(-1)) + half * np.abs(gram).sum(-1)
        worst = max(worst, float(peak.max()))
    return worst


def random_affine_model(
    pieces: int, ambient: int, intrinsic: int, seed: int, spread: float = 4.0
) -> AffineModel:
    """Random orthonormal frames with piece centres drawn from ``N(0, spread^2 I)``.

    Centres ``z_t`` are the images of the box midpoints.  ``margin`` is the
    exact separation radius and ``bound`` is the exact amplitude times 1.1.
    """
    if pieces < 1 or intrinsic < 1 or ambient < intrinsic:
        raise PreconditionError("need pieces >= 1 and 1 <= intrinsic <= ambient")
    rng = np.random.default_rng(seed)
    for _ in range(100):
        frames = np.stack(
            [np.linalg.qr(rng.standard_normal((ambient, intrinsic)))[0].T for _ in range(pieces)]
        )
        anchors = spread * rng.standard_normal((pieces, ambient))
        mids = (2.0 * np.arange(pieces) + 1.5)[:, None] * np.ones((pieces, intrinsic))
        offsets = anchors - np.einsum("tl,tld->td", mids, frames)
        margin = exact_margin(frames, offsets, mids) if pieces > 1 else 1.0
        if margin > 0:
            bound = BOUND_SAFETY * exact_bound(frames, offsets)
            return AffineModel(frames, offsets, mids, margin, bound)
    raise SeparationError("could not draw a well-separated model; increase spread")


@dataclass(frozen=True)
class Selection:
    """Selector layer output: the ``T x T`` matrix per input and derived labels."""

    matrix: np.ndarray
    row_sums: np.ndarray
    piece: np.ndarray
    ambiguous: np.ndarray


def _split_features(model: AffineModel, y) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    T, m = model.pieces, model.intrinsic_dim
    if y.shape[-2:] != (T, m + 1) and y.shape[-1] == T * (m + 1):
        y = y.reshape(y.shape[:-1] + (T, m + 1))
    if y.shape[-2:] != (T, m + 1):
        raise DimensionMismatch(f"expected features of shape (..., {T}, {m + 1}), got {y.shape}")
    return y


def selector_preactivations(model: AffineModel, y) -> np.ndarray:
    """``S[t, t'] = (|x - z_{t'}|^2 - |x - z_t|^2) / margin`` written in the features."""
    y = _split_features(model, y)
    q = np.concatenate([model.center_coefs, np.ones((model.pieces, 1))], axis=1)
    score = 2.0 * np.sum(q * y, axis=-1) - np.sum(model.centers**2, axis=-1)
    return (score[..., :, None] - score[..., None, :]) / model.margin


def affine_selector(model: AffineModel, y, strict: bool = True) -> Selection:
    """First fully connected layer: ``H[t,t'] = relu(S) - relu(S - 1)``.

    The true piece's row sums to ``T - 1``; every other row to at most ``T - 2``.
    With ``strict`` a :class:`SeparationError` is raised when more than one
    row exceeds ``T - 3/2``.
    """
    S = selector_preactivations(model, y)
    H = _relu(S) - _relu(S - 1.0)
    sums = H.sum(axis=-1)
    T = model.pieces
    ambiguous = np.sum(sums > T - 1.5, axis=-1) != 1
    if strict and np.any(ambiguous):
        raise SeparationError(f"{int(np.sum(ambiguous))} input(s) matched no piece or several pieces")
    return Selection(H, sums, np.argmax(sums, axis=-1), ambiguous)


def coordinate_preactivations(model: AffineModel, y, selection: Selection) -> np.ndarray:
    """Argument of each ReLU in the second layer, shape ``(..., T, m)``."""
    y = _split_features(model, y)
    T, m = model.pieces, model.intrinsic_dim
    anchor = np.einsum("td,tld->tl", model.offsets, model.frames)
    gate = model.bound * (T - 1 - selection.row_sums)
    return y[..., :m] - gate[..., None] - anchor


def affine_coords(model: AffineModel, y, selection: Selection, tol: float = 1e-9):
    """Second fully connected layer: ``a_l = sum_t relu(y_{t,l} - B(T-1-rowsum_t) - <u_t, v_{t,l}>)``.

    Returns ``(piece, a)``.  Raises :class:`SeparationError` if ``a`` leaves
    the selected piece's box by more than ``tol``.
    """
    a = _relu(coordinate_preactivations(model, y, selection)).sum(axis=-2)
    lo = 2.0 * selection.piece + 1.0
    outside = (a < lo[..., None] - tol) | (a > lo[..., None] + 1.0 + tol)
    if np.any(outside):
        raise SeparationError("recovered coordinates fall outside the selected coefficient box")
    return selection.piece, a


def affine_param_count(pieces: int, intrinsic: int) -> int:
    """Weights and biases of the selector and coordinate layers."""
    T, m = pieces, intrinsic
    selector = 2 * T * (T - 1) * (2 * (m + 1) + 1)  # diagonal entries are constant zero
    coords = m * T * (1 + (T - 1) + 1) + m * T  # y, selector row, bias; then the output sum
    return selector + coords


@dataclass(frozen=True)
class AffineHead:
    """Features -> piece selector -> coordinates -> grid network on ``[1, 2T]^m``."""

    model: AffineModel
    grid: object

    @property
    def input_dim(self) -> int:
        return self.model.pieces * (self.model.intrinsic_dim + 1)

    @property
    def param_count(self) -> int:
        return affine_param_count(self.model.pieces, self.model.intrinsic_dim) + self.grid.param_count

    def coordinates(self, y) -> np.ndarray:
        selection = affine_selector(self.model, y)
        return affine_coords(self.model, y, selection)[1]

    def __call__(self, y) -> np.ndarray:
        return self.grid(self.coordinates(y))
