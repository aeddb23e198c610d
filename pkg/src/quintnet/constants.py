"""Subnetwork appending dyadic constants z_i = y_i / 2^delta to its input.

Channel 0 of the input must carry the constant 1.  Each constant is built
by a least-significant-bit-first halving recursion

    acc <- acc/2 + bit * 1/2,

which only needs weights 1/2 and 1 and costs at most two active weights
per layer and constant.  Accumulators stay idle (identically zero, no
weights) until the layer where their recursion must start, so the whole
block has exactly 2*delta hidden layers.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .netcore import QuintNet

_H, _O = 1, 2


@dataclass(frozen=True)
class ConstantPlan:
    delta: int
    targets: tuple[int, ...]
    signs: tuple[int, ...] = field(default=())

    def __post_init__(self) -> None:
        if self.delta < 1:
            raise ValueError("delta must be >= 1")
        top = 1 << self.delta
        for y in self.targets:
            if not 0 < y <= top:
                raise ValueError(f"target {y} outside (0, 2^{self.delta}]")
        object.__setattr__(self, "targets", tuple(int(y) for y in self.targets))
        if not self.signs:
            object.__setattr__(self, "signs", (1,) * len(self.targets))
        if len(self.signs) != len(self.targets) or any(s not in (1, -1) for s in self.signs):
            raise ValueError("signs must be +-1, one per target")

    @property
    def values(self) -> list:
        from .dyadic import Dyadic
        return [Dyadic(y, self.delta) for y in self.targets]


def build_const_net(plan: ConstantPlan, passthrough_width: int) -> QuintNet:
    """(1, x_1..x_{w-1}) -> (1, x_1..x_{w-1}, z_1..z_D), depth exactly 2*delta.

    Passthrough channels must be nonnegative.  Signs in ``plan`` are not
    applied here; consumers flip signs with -1 weights.
    """
    if passthrough_width < 1:
        raise ValueError("passthrough width must include the constant channel")
    delta = plan.delta
    depth = 2 * delta
    w = passthrough_width
    width = w + len(plan.targets)
    mats = []
    for t in range(depth + 1):
        mat = np.zeros((width, width if t else w), dtype=np.int8)
        mat[np.arange(w), np.arange(w)] = _O
        j = t - delta - 1  # bit consumed by matrix t
        if j >= 0:
            for i, y in enumerate(plan.targets):
                row = w + i
                if y & ((1 << j) - 1):
                    mat[row, row] = _H
                if (y >> j) & 1:
                    mat[row, 0] = _H
                if y == 1 << delta and t == depth:
                    mat[row, 0] = _O
        mats.append(mat)
    return QuintNet.from_codes(mats, f"const_{delta}")
