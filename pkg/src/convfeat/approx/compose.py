"""End-to-end model: compiled convolutional features followed by a head."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..compiler import param_count
from ..errors import DimensionMismatch
from ..tensor import ConvNet1D


@dataclass(frozen=True)
class Composite:
    net: ConvNet1D
    head: object

    def features(self, x) -> np.ndarray:
        return self.net(x)[..., 0]

    def __call__(self, x) -> np.ndarray:
        return self.head(self.features(x))

    @property
    def param_count(self) -> int:
        return param_count(self.net) + int(getattr(self.head, "param_count", 0))


def compose(net: ConvNet1D, head) -> Composite:
    """``Phi(x) = head(h_J(x))``; the network must end in one position per channel."""
    if net.dims[-1] != 1:
        raise DimensionMismatch(f"network output has {net.dims[-1]} positions, expected 1")
    if head.input_dim != net.channels[-1]:
        raise DimensionMismatch(
            f"head expects {head.input_dim} features but the network emits {net.channels[-1]}"
        )
    return Composite(net, head)
