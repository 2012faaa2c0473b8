"""Compile a dictionary of linear features into a strided multi-channel CNN.

Layer ``k`` uses filter size = stride = ``s_k``.  Channel ``j`` of layer ``k``
at position ``p`` equals the inner product of the ``p``-th length-``m_k``
block of the input with the level-``k`` basis vector ``r_{k,j}``; the last
layer has one channel per dictionary row and a single position, so it
returns all dictionary inner products at once.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import prod
from typing import Sequence

import numpy as np

from .errors import PreconditionError
from .patches import DEFAULT_TOL, PatchBasis, build_patch_hierarchy
from .tensor import Activation, ConvLayer, ConvNet1D, conv1d, eval_dcnn1d


@dataclass(frozen=True)
class CompilationResult:
    net: ConvNet1D
    basis: PatchBasis

    @property
    def channel_counts(self) -> tuple[int, ...]:
        return self.net.channels[1:]

    @property
    def param_count(self) -> int:
        return param_count(self.net)


def _as_dictionary(dictionary) -> np.ndarray:
    V = np.atleast_2d(np.asarray(dictionary, dtype=float))
    if V.ndim != 2 or V.shape[0] == 0 or V.shape[1] == 0:
        raise PreconditionError("dictionary must be a nonempty (m, d) array")
    return V


def net_from_basis(basis: PatchBasis) -> ConvNet1D:
    """Assemble the filters ``W^{(1)}_{j,1} = r_{1,j}`` and ``W^{(k)}_{j,i} = w^{(k,.)}_{i,j}``."""
    layers = [ConvLayer(basis.bases[0][:, None, :], basis.kernel_sizes[0])]
    for k in range(1, basis.depth):
        # coefficients[k] is (s, n_in, n_out); filters are (n_out, n_in, s)
        filters = basis.coefficients[k].transpose(2, 1, 0)
        layers.append(ConvLayer(filters, basis.kernel_sizes[k]))
    return ConvNet1D(basis.input_dim, tuple(layers))


def compile_mixed(
    dictionary, kernel_sizes: Sequence[int], tol: float = DEFAULT_TOL, orthonormal: bool = False
) -> CompilationResult:
    """Compile for arbitrary kernel sizes with ``prod(kernel_sizes) >= d``.

    The network accepts raw length-``d`` inputs; zero extension inside the
    convolutions plays the role of padding the input to ``prod(kernel_sizes)``.
    """
    V = _as_dictionary(dictionary)
    sizes = tuple(int(s) for s in kernel_sizes)
    if not sizes or min(sizes) < 1:
        raise PreconditionError(f"kernel sizes must be positive integers, got {sizes}")
    if prod(sizes) < V.shape[1]:
        raise PreconditionError(
            f"kernel product {prod(sizes)} is smaller than dimension {V.shape[1]}"
        )
    basis = build_patch_hierarchy(V, sizes, tol=tol, orthonormal=orthonormal)
    return CompilationResult(net_from_basis(basis), basis)


def compile_pow2(dictionary, tol: float = DEFAULT_TOL, orthonormal: bool = False) -> CompilationResult:
    """Compile with filter size 2 and stride 2 at every layer; ``d`` must be ``2**J``, ``J >= 1``."""
    V = _as_dictionary(dictionary)
    d = V.shape[1]
    if d < 2 or d & (d - 1):
        raise PreconditionError(f"compile_pow2 needs d = 2**J with J >= 1, got d={d}; use compile_mixed")
    J = d.bit_length() - 1
    return compile_mixed(V, (2,) * J, tol=tol, orthonormal=orthonormal)


def pow2_kernels(d: int) -> tuple[int, ...]:
    """Kernel sizes ``(2, ..., 2)`` with ``ceil(log2 d)`` entries (at least one)."""
    return (2,) * max(1, (d - 1).bit_length())


def level_features(basis: PatchBasis, x) -> list[np.ndarray]:
    """Inner products of input blocks with each level basis, computed directly.

    Entry ``k`` has shape ``(..., n_{k+1}, d_{k+1})`` and matches the layer
    output of the compiled network.  Used as an independent oracle.
    """
    x = np.asarray(x, dtype=float)
    out = []
    for m_k, r in zip(basis.block_lens, basis.bases):
        out.append(np.stack([conv1d(row, x, m_k) for row in r], axis=-2))
    return out


@dataclass(frozen=True)
class ChannelSchedule:
    """Channel capacities ``2, 4, ..., 2**(k0-1), md/2**k0, ..., m`` for ``d = 2**J``."""

    d: int
    m: int
    depth: int
    k0: int
    capacities: tuple[int, ...]

    def admits(self, channel_counts: Sequence[int]) -> bool:
        return len(channel_counts) == len(self.capacities) and all(
            n <= c for n, c in zip(channel_counts, self.capacities)
        )

    @property
    def bound(self) -> int:
        """The ``8 m d`` ceiling on total parameters under this schedule."""
        return 8 * self.m * self.d


def schedule(d: int, m: int) -> ChannelSchedule:
    """Channel schedule for filter size 2 / stride 2 networks.

    ``k0`` is the least ``k`` with ``m d <= 4**k``; it is clamped to 1 when
    ``m d = 1``.  Capacities are rounded up to integers.  The last capacity
    is always ``m``: when ``m > d`` the doubling phase never reaches ``k0``
    and would otherwise stop short of the dictionary size.
    """
    if d < 1 or d & (d - 1):
        raise PreconditionError(f"schedule needs d a power of two, got {d}")
    if m < 1:
        raise PreconditionError(f"schedule needs m >= 1, got {m}")
    J = d.bit_length() - 1
    md = m * d
    k0 = 0
    while 4**k0 < md:
        k0 += 1
    k0 = max(k0, 1)
    caps = [2**k if k < k0 else -(-md // 2**k) for k in range(1, J + 1)]
    if caps:
        caps[-1] = m
    caps = tuple(caps)
    return ChannelSchedule(d, m, J, k0, caps)


def param_count(net) -> int:
    """Filter taps plus biases: ``sum_j s_j^q n_{j-1} n_j + sum_j n_j``.

    ``q`` is 1 for 1D and 2 for 2D layers.
    """
    return int(sum(layer.filters.size + layer.out_channels for layer in net.layers))


def to_relu_form(net: ConvNet1D, bound: float = 1.0) -> tuple[ConvNet1D, np.ndarray]:
    """Rewrite an all-linear network with ReLU activations and shifted biases.

    Biases are raised so that every pre-activation is nonnegative whenever
    ``max|x_i| <= bound``; on that domain each ReLU acts as the identity.
    Returns ``(relu_net, offsets)`` with ``relu_net(x) - offsets == net(x)``.
    """
    if any(layer.activation is not Activation.LINEAR for layer in net.layers):
        raise PreconditionError("to_relu_form expects a network with linear activations only")
    if bound < 0:
        raise PreconditionError("bound must be nonnegative")
    magnitude = np.array([float(bound)])  # per-channel bound on |h_j(x)| for the linear net
    shift = np.zeros((1, net.input_dim))  # relu-form activation minus linear activation
    layers = []
    for layer in net.layers:
        taps = np.abs(layer.filters).sum(axis=2)  # (out, in) filter 1-norms
        magnitude = taps @ magnitude + np.abs(layer.biases)
        carried = ConvLayer(layer.filters, layer.stride).apply(shift)  # (out, d_j)
        extra = magnitude - carried.min(axis=1)
        biases = layer.biases + extra
        layers.append(layer.with_biases(biases, Activation.RELU))
        shift = carried + extra[:, None]
    return ConvNet1D(net.input_dim, tuple(layers)), shift


def max_relative_error(net: ConvNet1D, dictionary, xs) -> float:
    """``max |h_J(x)_l - <x, v_l>| / (|x| |v_l| + eps)`` over the rows of ``xs``."""
    V = _as_dictionary(dictionary)
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    if xs.shape[0] == 0:
        return 0.0
    got = eval_dcnn1d(net, xs)[-1]
    if got.shape[-1] != 1 or got.shape[-2] != V.shape[0]:
        raise PreconditionError(
            f"network output shape {got.shape[-2:]} does not match {V.shape[0]} features"
        )
    want = xs @ V.T
    denom = np.linalg.norm(xs, axis=1)[:, None] * np.linalg.norm(V, axis=1)[None, :]
    return float(np.max(np.abs(got[..., 0] - want) / (denom + np.finfo(float).tiny)))
