"""Patch collections, spanning bases, and the multi-level patch hierarchy.

A dictionary ``V`` (``m`` rows of length ``d``) is zero-padded to length
``prod(kernel_sizes)``.  At level ``k`` the rows are cut into consecutive
blocks of length ``s_1 * ... * s_k`` and a basis ``r_{k,1..n_k}`` of all those
blocks is extracted.  Each level-``k`` basis vector splits into ``s_k`` blocks
that expand in the level ``k-1`` basis; those expansion coefficients are the
convolution filters of layer ``k``.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import prod
from typing import Sequence

import numpy as np

from .errors import BreakdownError, PreconditionError

DEFAULT_TOL = 1e-9


def patches(v, s: int) -> np.ndarray:
    """Non-overlapping length-``s`` blocks of ``v``, the last one zero-filled.

    Returns an array of shape ``(ceil(d / s), s)``.
    """
    v = np.asarray(v, dtype=float)
    if s < 1:
        raise PreconditionError(f"patch length must be >= 1, got {s}")
    n = -(-v.size // s)
    out = np.zeros(n * s)
    out[: v.size] = v
    return out.reshape(n, s)


def span_basis(A, tol: float = DEFAULT_TOL, orthonormal: bool = False):
    """Pick a basis of ``span(A)`` by greedy insertion in input order.

    A vector joins the basis when its residual after orthogonal projection
    onto the vectors already chosen exceeds ``tol * scale``, where ``scale`` is
    the largest absolute entry of ``A``.  With ``orthonormal=False`` the basis
    consists of the chosen rows of ``A`` themselves.

    Returns ``(basis, coeffs)`` with ``basis`` of shape ``(k, s)`` and
    ``coeffs`` of shape ``(len(A), k)`` such that ``A ~= coeffs @ basis``.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.shape[0] == 0:
        raise PreconditionError("span_basis needs at least one vector")
    if tol <= 0:
        raise PreconditionError("tol must be positive")
    p, s = A.shape
    scale = float(np.max(np.abs(A)))
    if scale == 0.0:
        return np.zeros((0, s)), np.zeros((p, 0))
    threshold = tol * scale

    Q = np.zeros((s, s))
    chosen: list[int] = []
    for i, a in enumerate(A):
        q = Q[: len(chosen)]
        r = a - q.T @ (q @ a)
        r -= q.T @ (q @ r)
        norm = np.linalg.norm(r)
        if norm > threshold:
            Q[len(chosen)] = r / norm
            chosen.append(i)
            if len(chosen) == s:
                break

    basis = Q[: len(chosen)].copy() if orthonormal else A[chosen].copy()
    coeffs = np.linalg.lstsq(basis.T, A.T, rcond=None)[0].T
    residual = np.max(np.abs(A - coeffs @ basis)) if chosen else scale
    if residual > threshold * (1 + 1e-6) + 1e-13 * scale:
        raise BreakdownError(f"basis expansion residual {residual:.3e} exceeds {threshold:.3e}")
    return basis, coeffs


@dataclass(frozen=True)
class PatchBasis:
    """Level bases and filter coefficient tables for a padded dictionary.

    ``bases[k]`` holds ``r_{k+1, j}`` as rows (shape ``(n_{k+1}, m_{k+1})``).
    ``coefficients[k]`` for ``k >= 1`` has shape ``(s_{k+1}, n_k, n_{k+1})``:
    block ``t`` of ``bases[k][j]`` equals ``coefficients[k][t, :, j] @ bases[k-1]``.
    ``coefficients[0]`` is ``None``.  The top level is the padded dictionary.
    """

    kernel_sizes: tuple[int, ...]
    input_dim: int
    bases: tuple[np.ndarray, ...]
    coefficients: tuple[np.ndarray | None, ...]
    tol: float = DEFAULT_TOL

    @property
    def depth(self) -> int:
        return len(self.kernel_sizes)

    @property
    def padded_dim(self) -> int:
        return prod(self.kernel_sizes)

    @property
    def block_lens(self) -> tuple[int, ...]:
        """``(m_1, ..., m_J)`` with ``m_k = s_1 * ... * s_k``."""
        out, acc = [], 1
        for s in self.kernel_sizes:
            acc *= s
            out.append(acc)
        return tuple(out)

    @property
    def channel_counts(self) -> tuple[int, ...]:
        return tuple(b.shape[0] for b in self.bases)

    @property
    def dictionary(self) -> np.ndarray:
        """The padded dictionary, one row per feature."""
        return self.bases[-1]

    def reconstruction_error(self) -> float:
        """Largest entry of ``block_t(r_{k+1,j}) - sum_i w_{i,j} r_{k,i}`` over all levels."""
        worst = 0.0
        for k in range(1, self.depth):
            s = self.kernel_sizes[k]
            upper, lower, w = self.bases[k], self.bases[k - 1], self.coefficients[k]
            blocks = upper.reshape(upper.shape[0], s, lower.shape[1])
            recon = np.einsum("tij,im->jtm", w, lower)
            worst = max(worst, float(np.max(np.abs(blocks - recon))))
        return worst


def build_patch_hierarchy(
    dictionary,
    kernel_sizes: Sequence[int],
    tol: float = DEFAULT_TOL,
    orthonormal: bool = False,
) -> PatchBasis:
    """Compute level bases and coefficient tables for ``dictionary``.

    ``dictionary`` is an ``(m, d)`` array; ``prod(kernel_sizes)`` must be at
    least ``d``.  A level whose patches are all zero gets a single zero basis
    vector so that every layer keeps at least one channel.
    """
    V = np.atleast_2d(np.asarray(dictionary, dtype=float))
    sizes = tuple(int(s) for s in kernel_sizes)
    if V.shape[0] == 0 or V.shape[1] == 0:
        raise PreconditionError("dictionary must contain at least one nonempty vector")
    if not sizes or min(sizes) < 1:
        raise PreconditionError(f"kernel sizes must be positive, got {sizes}")
    m, d = V.shape
    padded = prod(sizes)
    if padded < d:
        raise PreconditionError(f"kernel product {padded} is smaller than dimension {d}")
    Vp = np.zeros((m, padded))
    Vp[:, :d] = V
    scale = float(np.max(np.abs(Vp)))

    bases: list[np.ndarray] = []
    block = 1
    for s in sizes[:-1]:
        block *= s
        level_patches = Vp.reshape(m * (padded // block), block)
        basis, _ = span_basis(level_patches, tol=tol, orthonormal=orthonormal)
        if basis.shape[0] == 0:
            basis = np.zeros((1, block))
        bases.append(basis)
    bases.append(Vp)

    coefficients: list[np.ndarray | None] = [None]
    for k in range(1, len(sizes)):
        s = sizes[k]
        upper, lower = bases[k], bases[k - 1]
        blocks = upper.reshape(upper.shape[0] * s, lower.shape[1])
        coef = np.linalg.lstsq(lower.T, blocks.T, rcond=None)[0]  # (n_{k-1}, n_k * s)
        residual = float(np.max(np.abs(blocks - coef.T @ lower)))
        if residual > tol * max(scale, 1e-300) * (1 + 1e-6) + 1e-13 * scale:
            raise BreakdownError(f"level {k + 1} block expansion residual {residual:.3e}")
        coef = coef.reshape(lower.shape[0], upper.shape[0], s).transpose(2, 0, 1)
        coefficients.append(np.ascontiguousarray(coef))

    for arr in bases + coefficients[1:]:
        arr.setflags(write=False)
    return PatchBasis(sizes, d, tuple(bases), tuple(coefficients), tol)
