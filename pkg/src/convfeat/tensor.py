"""Strided convolutions, their matrix forms, and multi-channel DCNN evaluation.

Conventions
-----------
Formulas in docstrings are 1-based; arrays are 0-based.  Every read outside
an array's extent returns 0 (zero extension), which makes every convolution
total.  Outputs of a stride-``t`` convolution on a length-``d`` input always
have length ``ceil(d / t)``.

Multi-channel activations are stored channel-first: a 1D layer output has
shape ``(..., n_channels, length)`` and a 2D layer output has shape
``(..., n_channels, side, side)``.  Leading axes are independent inputs.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, PreconditionError

__all__ = [
    "Activation",
    "ConvLayer",
    "ConvNet1D",
    "ConvNet2D",
    "conv1d",
    "conv2d",
    "diag_block",
    "eval_dcnn1d",
    "eval_dcnn2d",
    "out_len",
    "toeplitz",
]


def out_len(d: int, t: int) -> int:
    """Return ``ceil(d / t)``, the output length of a stride-``t`` convolution."""
    if d < 1 or t < 1:
        raise PreconditionError(f"out_len needs d >= 1 and t >= 1, got d={d}, t={t}")
    return -(-d // t)


def _window_index(d: int, s: int, t: int) -> tuple[np.ndarray, int]:
    """Index grid ``idx[i, k] = i*t + k`` and the padded length it reaches."""
    n_out = out_len(d, t)
    idx = np.arange(n_out)[:, None] * t + np.arange(s)[None, :]
    return idx, (n_out - 1) * t + s


def _extend(x: np.ndarray, length: int, axis: int = -1) -> np.ndarray:
    """Zero-extend (or truncate) ``x`` along ``axis`` to exactly ``length``."""
    cur = x.shape[axis]
    if cur >= length:
        return np.take(x, np.arange(length), axis=axis)
    pad = [(0, 0)] * x.ndim
    pad[axis] = (0, length - cur)
    return np.pad(x, pad)


def conv1d(w, x, t: int = 1) -> np.ndarray:
    """Strided 1D convolution ``(w *_t x)_i = sum_k w_k x_{(i-1)t+k}``.

    ``x`` may carry leading batch axes; the convolution acts on the last one.
    Taps are accumulated in ascending order.
    """
    w = np.asarray(w, dtype=float)
    x = np.asarray(x, dtype=float)
    if w.ndim != 1 or w.size == 0 or x.ndim < 1 or x.shape[-1] == 0:
        raise PreconditionError("conv1d needs a nonempty 1D filter and a nonempty signal")
    if t < 1:
        raise PreconditionError(f"stride must be >= 1, got {t}")
    idx, length = _window_index(x.shape[-1], w.size, t)
    windows = _extend(x, length)[..., idx]
    out = np.zeros(windows.shape[:-1])
    for k in range(w.size):
        out += w[k] * windows[..., k]
    return out


def toeplitz(w, t: int, d: int) -> np.ndarray:
    """Matrix ``M`` of shape ``(ceil(d/t), d)`` with ``M[i, j] = w[j - i*t]``.

    Entries whose filter index falls outside ``[0, s)`` are zero, so that
    ``toeplitz(w, t, d) @ x == conv1d(w, x, t)``.
    """
    w = np.asarray(w, dtype=float)
    n_out = out_len(d, t)
    rows = np.arange(n_out)[:, None]
    cols = np.arange(d)[None, :]
    k = cols - rows * t
    valid = (k >= 0) & (k < w.size)
    return np.where(valid, w[np.clip(k, 0, w.size - 1)], 0.0)


def diag_block(A, k: int) -> np.ndarray:
    """Block-diagonal matrix holding ``k`` copies of ``A``.

    For a filter ``w`` of length ``t`` viewed as a ``1 x t`` row,
    ``diag_block(w[None, :], k)`` equals ``toeplitz(w, t, t * k)``.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if k < 1:
        raise PreconditionError(f"k must be >= 1, got {k}")
    return np.kron(np.eye(k), A)


def conv2d(W, X, t: int = 1) -> np.ndarray:
    """Strided 2D convolution on square images with zero extension.

    ``(W (*)_t X)_{i,j} = sum_{l1,l2} W_{l1,l2} X_{(i-1)t+l1, (j-1)t+l2}``;
    the output side is ``ceil(d / t)``.  Leading batch axes are allowed.
    """
    W = np.asarray(W, dtype=float)
    X = np.asarray(X, dtype=float)
    if W.ndim != 2 or W.shape[0] != W.shape[1] or W.size == 0:
        raise PreconditionError("conv2d needs a nonempty square filter")
    if X.ndim < 2 or X.shape[-1] != X.shape[-2]:
        raise PreconditionError("conv2d needs a square image")
    if t < 1:
        raise PreconditionError(f"stride must be >= 1, got {t}")
    s = W.shape[0]
    idx, length = _window_index(X.shape[-1], s, t)
    Xp = _extend(_extend(X, length, axis=-1), length, axis=-2)
    windows = Xp[..., idx[:, :, None, None], idx[None, None, :, :]]
    out = np.zeros(windows.shape[:-4] + (idx.shape[0], idx.shape[0]))
    for a in range(s):
        for b in range(s):
            out += W[a, b] * windows[..., :, a, :, b]
    return out


class Activation(str, enum.Enum):
    LINEAR = "linear"
    RELU = "relu"

    def __call__(self, u: np.ndarray) -> np.ndarray:
        return np.maximum(u, 0.0) if self is Activation.RELU else u


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class ConvLayer:
    """One convolutional layer: filters ``[out][in]``, per-channel biases, a stride.

    ``filters`` has shape ``(out, in, s)`` for 1D layers and ``(out, in, s, s)``
    for 2D layers.
    """

    filters: np.ndarray
    stride: int
    biases: np.ndarray | None = None
    activation: Activation = Activation.LINEAR

    def __post_init__(self):
        filters = _frozen(self.filters)
        if filters.ndim not in (3, 4) or min(filters.shape) < 1:
            raise PreconditionError(f"filters must have shape (out, in, s[, s]), got {filters.shape}")
        if filters.ndim == 4 and filters.shape[2] != filters.shape[3]:
            raise PreconditionError("2D filters must be square")
        if self.stride < 1:
            raise PreconditionError(f"stride must be >= 1, got {self.stride}")
        biases = np.zeros(filters.shape[0]) if self.biases is None else self.biases
        biases = _frozen(biases)
        if biases.shape != (filters.shape[0],):
            raise PreconditionError(
                f"expected {filters.shape[0]} biases, got shape {biases.shape}"
            )
        object.__setattr__(self, "filters", filters)
        object.__setattr__(self, "biases", biases)
        object.__setattr__(self, "activation", Activation(self.activation))

    @property
    def out_channels(self) -> int:
        return self.filters.shape[0]

    @property
    def in_channels(self) -> int:
        return self.filters.shape[1]

    @property
    def filter_size(self) -> int:
        return self.filters.shape[2]

    @property
    def ndim(self) -> int:
        return self.filters.ndim - 2

    def apply(self, h: np.ndarray) -> np.ndarray:
        """Apply the layer to channel-first input ``h``."""
        if h.shape[-1 - self.ndim] != self.in_channels:
            raise DimensionMismatch(
                f"layer expects {self.in_channels} input channels, got {h.shape[-1 - self.ndim]}"
            )
        s, t = self.filter_size, self.stride
        idx, length = _window_index(h.shape[-1], s, t)
        if self.ndim == 1:
            win = _extend(h, length)[..., idx]  # (..., in, D, s)
            pre = np.zeros(h.shape[:-2] + (self.out_channels, idx.shape[0]))
            for k in range(s):
                pre += np.einsum("...id,oi->...od", win[..., k], self.filters[:, :, k])
            pre += self.biases[:, None]
        else:
            hp = _extend(_extend(h, length, axis=-1), length, axis=-2)
            win = hp[..., idx[:, :, None, None], idx[None, None, :, :]]  # (..., in, D, s, D, s)
            pre = np.zeros(h.shape[:-3] + (self.out_channels, idx.shape[0], idx.shape[0]))
            for a in range(s):
                for b in range(s):
                    pre += np.einsum(
                        "...ipq,oi->...opq", win[..., :, a, :, b], self.filters[:, :, a, b]
                    )
            pre += self.biases[:, None, None]
        return self.activation(pre)

    def with_biases(self, biases, activation: Activation | str | None = None) -> "ConvLayer":
        return ConvLayer(
            self.filters, self.stride, biases, self.activation if activation is None else activation
        )


@dataclass(frozen=True)
class _ConvNet:
    input_dim: int
    layers: tuple[ConvLayer, ...] = field(default_factory=tuple)

    _ndim = 0

    def __post_init__(self):
        layers = tuple(self.layers)
        object.__setattr__(self, "layers", layers)
        if self.input_dim < 1:
            raise PreconditionError(f"input_dim must be >= 1, got {self.input_dim}")
        prev = 1
        for j, layer in enumerate(layers, start=1):
            if layer.ndim != self._ndim:
                raise PreconditionError(f"layer {j} is {layer.ndim}D in a {self._ndim}D network")
            if layer.in_channels != prev:
                raise PreconditionError(
                    f"layer {j} takes {layer.in_channels} channels but layer {j - 1} emits {prev}"
                )
            prev = layer.out_channels

    @property
    def dims(self) -> tuple[int, ...]:
        """Spatial sizes ``(d_0, d_1, ..., d_J)`` with ``d_j = ceil(d_{j-1} / t_j)``."""
        dims = [self.input_dim]
        for layer in self.layers:
            dims.append(out_len(dims[-1], layer.stride))
        return tuple(dims)

    @property
    def channels(self) -> tuple[int, ...]:
        """Channel counts ``(n_0=1, n_1, ..., n_J)``."""
        return (1,) + tuple(layer.out_channels for layer in self.layers)

    @property
    def depth(self) -> int:
        return len(self.layers)


@dataclass(frozen=True)
class ConvNet1D(_ConvNet):
    """A 1D multi-channel DCNN on signals of length ``input_dim``."""

    _ndim = 1

    def __call__(self, x) -> np.ndarray:
        return eval_dcnn1d(self, x)[-1]


@dataclass(frozen=True)
class ConvNet2D(_ConvNet):
    """A 2D multi-channel DCNN on ``input_dim x input_dim`` images."""

    _ndim = 2

    def __call__(self, X) -> np.ndarray:
        return eval_dcnn2d(self, X)[-1]


def eval_dcnn1d(net: ConvNet1D, x) -> list[np.ndarray]:
    """Return ``[h_0, h_1, ..., h_J]`` for input signal(s) ``x``.

    ``h_0`` has shape ``(..., 1, d)``; ``h_j`` has shape ``(..., n_j, d_j)``.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim < 1 or x.shape[-1] != net.input_dim:
        raise DimensionMismatch(f"network expects length {net.input_dim}, got shape {x.shape}")
    outs = [x[..., None, :]]
    for layer in net.layers:
        outs.append(layer.apply(outs[-1]))
    return outs


def eval_dcnn2d(net: ConvNet2D, X) -> list[np.ndarray]:
    """Return ``[h_0, ..., h_J]`` for image(s) ``X``; ``h_j`` is ``(..., n_j, d_j, d_j)``."""
    X = np.asarray(X, dtype=float)
    if X.ndim < 2 or X.shape[-2:] != (net.input_dim, net.input_dim):
        raise DimensionMismatch(
            f"network expects {net.input_dim}x{net.input_dim} images, got shape {X.shape}"
        )
    outs = [X[..., None, :, :]]
    for layer in net.layers:
        outs.append(layer.apply(outs[-1]))
    return outs

