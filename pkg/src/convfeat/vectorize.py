"""Hierarchical partitions of a square index grid and the matching vectorization.

A partition with level sizes ``(p_1, ..., p_J)`` (coarsest first) splits the
``d x d`` grid, ``d = prod(p)``, into ``p_1**2`` blocks, each of those into
``p_2**2`` blocks, and so on; children are labeled row-major.  The flat
position of pixel ``(i, j)`` is ``1 + sum_k (t_k - 1) * (d / (p_1...p_k))**2``.

A chain of 2D convolutions applies its *first* kernel to the finest blocks,
so the partition that turns kernels ``(s_1, ..., s_J)`` (in layer order)
into 1D convolutions has level sizes ``(s_J, ..., s_1)``; see
:meth:`HierarchicalPartition.for_kernels`.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from math import prod
from typing import Sequence

import numpy as np

from .compiler import compile_mixed
from .errors import DimensionMismatch, PreconditionError
from .patches import DEFAULT_TOL
from .tensor import ConvLayer, ConvNet2D, conv1d, conv2d, eval_dcnn2d


@dataclass(frozen=True)
class HierarchicalPartition:
    level_sizes: tuple[int, ...]

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.level_sizes)
        if not sizes or min(sizes) < 1:
            raise PreconditionError(f"level sizes must be positive, got {sizes}")
        object.__setattr__(self, "level_sizes", sizes)

    @classmethod
    def for_kernels(cls, kernel_sizes: Sequence[int]) -> "HierarchicalPartition":
        """Partition whose vectorization matches 2D kernels applied in this order."""
        return cls(tuple(reversed(tuple(kernel_sizes))))

    @property
    def d(self) -> int:
        return prod(self.level_sizes)

    @property
    def child_sides(self) -> tuple[int, ...]:
        """``(d/p_1, d/(p_1 p_2), ..., 1)``: side of a block at each level."""
        out, acc = [], self.d
        for p in self.level_sizes:
            acc //= p
            out.append(acc)
        return tuple(out)

    def _check(self, i, j):
        i, j = np.asarray(i), np.asarray(j)
        if np.any((i < 1) | (i > self.d) | (j < 1) | (j > self.d)):
            raise PreconditionError(f"index out of range for a {self.d}x{self.d} grid")
        return i - 1, j - 1

    def partition_vector(self, i, j) -> tuple[int, ...]:
        """Labels ``(t_1, ..., t_J)`` (1-based) of the blocks containing pixel ``(i, j)``."""
        i0, j0 = self._check(i, j)
        return tuple(int(t) for t in self._labels(i0, j0))

    def _labels(self, i0, j0) -> list:
        labels, parent = [], self.d
        for p, side in zip(self.level_sizes, self.child_sides):
            r = (i0 % parent) // side
            c = (j0 % parent) // side
            labels.append(r * p + c + 1)
            parent = side
        return labels

    def flat_index(self, i, j):
        """1-based flat position ``delta(i, j)``; accepts arrays."""
        i0, j0 = self._check(i, j)
        delta = 1
        for t, side in zip(self._labels(i0, j0), self.child_sides):
            delta = delta + (t - 1) * side**2
        return delta if np.ndim(delta) else int(delta)

    @cached_property
    def permutation(self) -> np.ndarray:
        """``perm[delta - 1] = row-major index of (i, j)``."""
        i, j = np.meshgrid(np.arange(1, self.d + 1), np.arange(1, self.d + 1), indexing="ij")
        delta = self.flat_index(i, j).ravel() - 1
        perm = np.empty(self.d**2, dtype=int)
        perm[delta] = np.arange(self.d**2)
        perm.setflags(write=False)
        return perm

    def vectorize(self, Y) -> np.ndarray:
        """Vector ``y`` with ``y[delta(i,j) - 1] = Y[i-1, j-1]``; batch axes allowed."""
        Y = np.asarray(Y, dtype=float)
        if Y.ndim < 2 or Y.shape[-2:] != (self.d, self.d):
            raise DimensionMismatch(f"expected {self.d}x{self.d} matrices, got shape {Y.shape}")
        return Y.reshape(Y.shape[:-2] + (-1,))[..., self.permutation]

    def devectorize(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        if y.ndim < 1 or y.shape[-1] != self.d**2:
            raise DimensionMismatch(f"expected vectors of length {self.d**2}, got shape {y.shape}")
        flat = np.empty_like(y)
        flat[..., self.permutation] = y
        return flat.reshape(y.shape[:-1] + (self.d, self.d))


def vectorize_kernel(K) -> np.ndarray:
    """Row-major flattening of a square kernel."""
    K = np.asarray(K, dtype=float)
    if K.ndim != 2 or K.shape[0] != K.shape[1]:
        raise PreconditionError("kernel must be square")
    return K.ravel()


def devectorize_kernel(k) -> np.ndarray:
    k = np.asarray(k, dtype=float)
    s = int(round(np.sqrt(k.size)))
    if s * s != k.size:
        raise PreconditionError(f"length {k.size} is not a perfect square")
    return k.reshape(s, s)


def check_equivalence(kernels: Sequence, Y) -> tuple[float, float]:
    """Both sides of the 2D/1D identity for full-reduction kernel chains.

    Returns ``(K_J (*) ... (*) K_1 (*) Y, K~_J * ... * K~_1 * y~)``, each a
    scalar.  Strides equal kernel sides and ``d`` must equal their product.
    """
    kernels = [np.asarray(K, dtype=float) for K in kernels]
    if not kernels:
        raise PreconditionError("need at least one kernel")
    sides = [K.shape[0] for K in kernels]
    if any(K.ndim != 2 or K.shape[0] != K.shape[1] for K in kernels):
        raise PreconditionError("kernels must be square")
    Y = np.asarray(Y, dtype=float)
    if Y.shape != (prod(sides), prod(sides)):
        raise DimensionMismatch(f"Y must be {prod(sides)}x{prod(sides)}, got {Y.shape}")

    lhs = Y
    for K, s in zip(kernels, sides):
        lhs = conv2d(K, lhs, s)
    rhs = HierarchicalPartition.for_kernels(sides).vectorize(Y)
    for K, s in zip(kernels, sides):
        rhs = conv1d(vectorize_kernel(K), rhs, s * s)
    return float(lhs.item()), float(rhs.item())


def _as_matrix_dictionary(dictionary) -> np.ndarray:
    D = np.asarray(dictionary, dtype=float)
    if D.ndim == 2:
        D = D[None]
    if D.ndim != 3 or D.shape[0] == 0 or D.shape[1] != D.shape[2]:
        raise PreconditionError("matrix dictionary must have shape (m, d, d)")
    return D


def compile_2d_dict(
    dictionary, kernel_sizes: Sequence[int], tol: float = DEFAULT_TOL
) -> ConvNet2D:
    """2D network whose final channels are the Frobenius products ``<V_l, X>``.

    ``kernel_sizes`` are layer-order kernel sides with product ``d``.
    """
    D = _as_matrix_dictionary(dictionary)
    sizes = tuple(int(s) for s in kernel_sizes)
    if prod(sizes) != D.shape[1]:
        raise PreconditionError(f"kernel product {prod(sizes)} must equal d={D.shape[1]}")
    partition = HierarchicalPartition.for_kernels(sizes)
    flat = compile_mixed(partition.vectorize(D), [s * s for s in sizes], tol=tol)
    layers = []
    for layer, s in zip(flat.net.layers, sizes):
        filters = layer.filters.reshape(layer.out_channels, layer.in_channels, s, s)
        layers.append(ConvLayer(filters, s, layer.biases, layer.activation))
    return ConvNet2D(D.shape[1], tuple(layers))


def frobenius_relative_error(net: ConvNet2D, dictionary, Xs) -> float:
    """``max |h_J(X)_l - <V_l, X>| / (|X|_F |V_l|_F + eps)`` over the images ``Xs``."""
    D = _as_matrix_dictionary(dictionary)
    Xs = np.asarray(Xs, dtype=float)
    if Xs.ndim == 2:
        Xs = Xs[None]
    got = eval_dcnn2d(net, Xs)[-1][..., 0, 0]
    want = np.einsum("bij,lij->bl", Xs, D)
    denom = np.linalg.norm(Xs, axis=(1, 2))[:, None] * np.linalg.norm(D, axis=(1, 2))[None, :]
    return float(np.max(np.abs(got - want) / (denom + np.finfo(float).tiny)))


@dataclass(frozen=True)
class SVDExtraction:
    net: ConvNet2D | None
    singular_values: np.ndarray
    rank: int
    tol: float


def svd_extractor(X, kernel_sizes: Sequence[int] | None = None, tol: float = 1e-10) -> SVDExtraction:
    """Network whose outputs on ``X`` are its nonzero singular values, largest first.

    The dictionary is ``u_l v_l^T`` for the singular pairs with
    ``alpha_l > tol * alpha_1``.  On any other image ``Y`` the outputs are
    ``<u_l v_l^T, Y>``.  ``net`` is ``None`` when ``X`` is numerically zero.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] != X.shape[1]:
        raise PreconditionError("svd_extractor needs a square matrix")
    d = X.shape[0]
    if kernel_sizes is None:
        if d < 2 or d & (d - 1):
            raise PreconditionError(f"d={d} is not a power of two; pass kernel_sizes explicitly")
        kernel_sizes = (2,) * (d.bit_length() - 1)
    U, alpha, Vt = np.linalg.svd(X)
    rank = int(np.sum(alpha > tol * alpha[0])) if alpha.size and alpha[0] > 0 else 0
    if rank == 0:
        return SVDExtraction(None, np.zeros(0), 0, tol)
    dictionary = np.einsum("ir,rj->rij", U[:, :rank], Vt[:rank])
    net = compile_2d_dict(dictionary, kernel_sizes)
    return SVDExtraction(net, alpha[:rank].copy(), rank, tol)
