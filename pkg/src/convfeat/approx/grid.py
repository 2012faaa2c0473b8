"""Two-hidden-layer ReLU grid network built from trapezoid bumps.

The unit cube is tiled by cells of side ``2/n`` centred at ``k/n`` for odd
``k = 1, 3, ..., 2*ceil(n/2) - 1``.  Inside each cell the bump
``Psi(x; k) = relu(sum_i psi(x_i - k_i/n) - m + 1)`` is exactly 1 on the
shrunken cube ``|x_i - k_i/n| <= (1 - delta)/n`` and exactly 0 in every
other cell, so the network returns the cell-centre value there.  Points in
the leftover slab set (``A_delta``) get a damped value between 0 and that.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..errors import DimensionMismatch, PreconditionError

DEFAULT_DELTA = 0.05


def psi_delta(t, n: int, delta: float) -> np.ndarray:
    """Trapezoid: 0 outside ``(-1/n, 1/n)``, 1 on ``[-(1-delta)/n, (1-delta)/n]``.

    Each pair ``relu(u) - relu(u - 1)`` of the four-unit ReLU form is written
    as ``clip(u, 0, 1)``, which keeps the flat parts exactly 0 and 1.
    """
    if n < 1 or not 0 < delta < 1:
        raise PreconditionError(f"need n >= 1 and 0 < delta < 1, got n={n}, delta={delta}")
    return _psi_scaled(np.asarray(t, dtype=float) * n, delta)


def _psi_scaled(r: np.ndarray, delta: float) -> np.ndarray:
    """``psi_delta`` as a function of ``r = n t``."""
    return np.clip((r + 1) / delta, 0.0, 1.0) - np.clip((r - 1 + delta) / delta, 0.0, 1.0)


def _check_params(m: int, n: int, delta: float) -> None:
    if m < 1 or n < 1 or not 0 < delta < 1:
        raise PreconditionError(f"need m >= 1, n >= 1, 0 < delta < 1; got m={m}, n={n}, delta={delta}")


@dataclass(frozen=True)
class GridNet:
    """Grid network on the box ``[lower, upper]`` (the unit cube by default).

    ``values`` has shape ``(h,) * m`` with ``h = ceil(n/2)``; entry ``c``
    is the target value at the cell centre ``(2c + 1) / n`` in unit coordinates.
    """

    m: int
    n: int
    delta: float
    values: np.ndarray | None
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None

    def __post_init__(self):
        _check_params(self.m, self.n, self.delta)
        lo = np.zeros(self.m) if self.lower is None else np.broadcast_to(self.lower, (self.m,))
        hi = np.ones(self.m) if self.upper is None else np.broadcast_to(self.upper, (self.m,))
        if np.any(hi <= lo):
            raise PreconditionError("upper must exceed lower in every coordinate")
        object.__setattr__(self, "lower", np.array(lo, dtype=float))
        object.__setattr__(self, "upper", np.array(hi, dtype=float))
        if self.values is not None:
            values = np.array(self.values, dtype=float)
            if values.shape != (self.half,) * self.m:
                raise PreconditionError(f"values must have shape {(self.half,) * self.m}")
            values.setflags(write=False)
            object.__setattr__(self, "values", values)

    @property
    def half(self) -> int:
        return -(-self.n // 2)

    @property
    def input_dim(self) -> int:
        return self.m

    @property
    def widths(self) -> tuple[int, int]:
        """Hidden widths ``(4 m ceil(n/2), ceil(n/2)**m)``."""
        return 4 * self.m * self.half, self.half**self.m

    @property
    def param_count(self) -> int:
        w1, w2 = self.widths
        # first layer: one weight and one bias per unit; second: 4 weights per coordinate + bias
        return 2 * w1 + w2 * (4 * self.m + 1) + w2

    def to_unit(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        if y.shape[-1] != self.m:
            raise DimensionMismatch(f"grid head expects {self.m} inputs, got shape {y.shape}")
        return (y - self.lower) / (self.upper - self.lower)

    def from_unit(self, u) -> np.ndarray:
        return self.lower + np.asarray(u, dtype=float) * (self.upper - self.lower)

    def grid_points(self) -> np.ndarray:
        """All cell centres in box coordinates, shape ``(h**m, m)``, C order over cells."""
        axes = [(2 * np.arange(self.half) + 1) / self.n] * self.m
        centres = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, self.m)
        return self.from_unit(centres)

    def value_at(self, cells: np.ndarray) -> np.ndarray:
        """Stored values for integer cell indices of shape ``(..., m)``."""
        return self.values[tuple(np.moveaxis(cells, -1, 0))]

    def locate(self, y) -> tuple[np.ndarray, np.ndarray]:
        """Containing cell ``c`` (``k = 2c + 1``) and whether it lies in the grid."""
        u = self.to_unit(y)
        cells = np.floor(u * self.n / 2).astype(int)
        inside = np.all((cells >= 0) & (cells < self.half), axis=-1)
        return cells, inside

    def _offsets(self, y, cells) -> np.ndarray:
        """``n (x - k/n)`` per coordinate in unit coordinates, ``k = 2c + 1``."""
        return self.to_unit(y) * self.n - (2 * np.asarray(cells) + 1)

    def bump(self, y, cells) -> np.ndarray:
        """``Psi(y; k)`` for cell indices ``cells`` (broadcast against ``y``)."""
        total = _psi_scaled(self._offsets(y, cells), self.delta).sum(axis=-1)
        return np.maximum(total - self.m + 1, 0.0)

    def in_plateau(self, y) -> np.ndarray:
        """True where ``y`` lies in some shrunken cube ``B_{k,delta}``.

        Membership is decided by the same arithmetic as :meth:`bump`, so the
        containing bump is exactly 1 wherever this returns True.
        """
        cells, inside = self.locate(y)
        flat = _psi_scaled(self._offsets(y, cells), self.delta) == 1.0
        return inside & np.all(flat, axis=-1)

    def __call__(self, y) -> np.ndarray:
        """Network output; only the containing cell's bump can be nonzero."""
        cells, inside = self.locate(y)
        safe = np.clip(cells, 0, self.half - 1)
        out = self.value_at(safe) * self.bump(y, safe)
        return np.where(inside, out, 0.0)


def grid_build(
    f: Callable[[np.ndarray], np.ndarray],
    m: int,
    n: int,
    delta: float = DEFAULT_DELTA,
    lower=None,
    upper=None,
) -> GridNet:
    """Sample ``f`` at every cell centre. ``f`` maps ``(N, m)`` points to ``(N,)`` values."""
    _check_params(m, n, delta)
    shell = GridNet(m, n, delta, None, lower, upper)
    vals = np.asarray(f(shell.grid_points()), dtype=float).reshape((shell.half,) * m)
    return GridNet(m, n, delta, vals, shell.lower, shell.upper)


def grid_eval(g: GridNet, x) -> np.ndarray:
    return g(x)


def grid_eval_dense(g: GridNet, x) -> np.ndarray:
    """``sum_k f(k/n) Psi(x; k)`` summed literally over every grid point.

    Costs ``ceil(n/2)**m`` bump evaluations per input; used to cross-check
    the single-cell shortcut in :meth:`GridNet.__call__`.
    """
    x = np.asarray(x, dtype=float)
    total = np.zeros(x.shape[:-1])
    for cell in itertools.product(range(g.half), repeat=g.m):
        c = np.array(cell)
        total += g.value_at(c) * g.bump(x, c)
    return total


def active_bumps(g: GridNet, x) -> np.ndarray:
    """Number of grid points with ``Psi(x; k) == 1`` exactly, per input."""
    x = np.asarray(x, dtype=float)
    count = np.zeros(x.shape[:-1], dtype=int)
    for cell in itertools.product(range(g.half), repeat=g.m):
        count += g.bump(x, np.array(cell)) == 1.0
    return count
