"""Smooth target functions with analytic partial derivatives.

Each catalog entry comes with a hand-declared Hoelder-ball radius K that
is generous for smoothness beta <= 2; :func:`estimate_ball_norm` and
:func:`check_partials` spot-check those declarations by sampling.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

MultiIndex = tuple[int, ...]


@dataclass(frozen=True)
class SmoothTarget:
    dimension: int
    beta: Fraction
    ball_radius: Fraction
    value: Callable[[Sequence], float]
    partial: Callable[[MultiIndex, Sequence], float | Fraction]
    name: str = "custom"

    def __post_init__(self) -> None:
        object.__setattr__(self, "beta", Fraction(self.beta))
        object.__setattr__(self, "ball_radius", Fraction(self.ball_radius))
        if self.dimension < 1 or self.beta <= 0 or self.ball_radius <= 0:
            raise ValueError("need dimension >= 1, beta > 0, K > 0")

    @property
    def d(self) -> int:
        return self.dimension

    @property
    def K(self) -> Fraction:
        return self.ball_radius

    def __call__(self, x: Sequence) -> float:
        return self.value(x)


def _zero(d: int):
    return (lambda x: 0.0), (lambda alpha, a: Fraction(0))


def _linear(d: int):
    def value(x):
        return sum(float(v) for v in x) / d

    def partial(alpha, a):
        deg = sum(alpha)
        if deg == 0:
            return sum(Fraction(v) for v in a) / d
        if deg == 1:
            return Fraction(1, d)
        return Fraction(0)
    return value, partial


def _product(d: int):
    def value(x):
        return math.prod(float(v) for v in x)

    def partial(alpha, a):
        if any(k > 1 for k in alpha):
            return Fraction(0)
        return math.prod((Fraction(v) for v, k in zip(a, alpha) if k == 0), start=Fraction(1))
    return value, partial


def _quadratic(d: int):
    def value(x):
        return sum(float(v) ** 2 for v in x) / (2 * d)

    def partial(alpha, a):
        deg = sum(alpha)
        if deg == 0:
            return sum(Fraction(v) ** 2 for v in a) / (2 * d)
        if deg == 1:
            return Fraction(a[alpha.index(1)]) / d
        if deg == 2 and 2 in alpha:
            return Fraction(1, d)
        return Fraction(0)
    return value, partial


def _bump(d: int):
    def value(x):
        return math.prod(math.sin(math.pi * float(v)) for v in x) / 8

    def partial(alpha, a):
        out = 1.0 / 8
        for v, k in zip(a, alpha):
            phase = math.pi * float(v) + k * math.pi / 2
            out *= math.pi ** k * math.sin(phase)
        return out
    return value, partial


def _radius(name: str, d: int, beta: Fraction) -> Fraction:
    """Declared K for beta <= 2, from the derivative sup-norms."""
    pairs = d * (d + 1) // 2
    top_first = beta > 1  # first-order terms counted as norms, not Hoelder ratios
    if name == "zero":
        return Fraction(1)
    if name == "linear":
        return Fraction(2)
    if name == "product":
        # mixed second partials are constant for d <= 2, bounded by 1 otherwise
        mixed = d * (d - 1) // 2 if d > 2 else 0
        return Fraction(1 + d + mixed) if top_first else Fraction(1 + 2 * d)
    if name == "quadratic":
        return Fraction(3, 2)
    if name == "bump":
        if top_first:
            bound = 1 / 8 + d * math.pi / 8 + 2 * pairs * math.pi ** 2 / 8
        else:
            bound = 1 / 8 + 2 * d * math.pi / 8
        return Fraction(math.ceil(bound * 4), 4)
    raise KeyError(name)


CATALOG: dict[str, Callable[[int], tuple]] = {
    "zero": _zero,
    "linear": _linear,
    "product": _product,
    "quadratic": _quadratic,
    "bump": _bump,
}


def make_target(name: str, d: int = 1, beta=2, K=None) -> SmoothTarget:
    """Catalog target by name; ``K`` defaults to the declared radius."""
    if name not in CATALOG:
        raise KeyError(f"unknown target {name!r}; choose from {sorted(CATALOG)}")
    beta = Fraction(beta)
    if beta > 2 and K is None:
        raise ValueError("catalog radii are declared for beta <= 2; pass K explicitly")
    value, partial = CATALOG[name](d)
    radius = Fraction(K) if K is not None else _radius(name, d, beta)
    return SmoothTarget(d, beta, radius, value, partial, name)


def _indices(d: int, max_degree: int, exact: bool = False) -> list[MultiIndex]:
    return [a for a in itertools.product(range(max_degree + 1), repeat=d)
            if (sum(a) == max_degree if exact else sum(a) <= max_degree)]


def estimate_ball_norm(target: SmoothTarget, samples: int = 400, seed: int = 0) -> float:
    """Sampled lower estimate of the Hoelder-ball norm of ``target``."""
    rng = np.random.default_rng(seed)
    d, beta = target.d, target.beta
    floor_beta = math.floor(beta)
    pts = rng.random((samples, d))
    total = 0.0
    for alpha in _indices(d, math.ceil(beta) - 1):
        total += max(abs(float(target.partial(alpha, p))) for p in pts)
    frac = float(beta - floor_beta)
    other = rng.random((samples, d))
    for alpha in _indices(d, floor_beta, exact=True):
        best = 0.0
        for x, y in zip(pts, other):
            dist = float(np.max(np.abs(x - y)))
            if dist == 0:
                continue
            diff = abs(float(target.partial(alpha, x)) - float(target.partial(alpha, y)))
            best = max(best, diff / dist ** frac)
        total += best
    return total


def check_partials(target: SmoothTarget, points: int = 20, h: float = 1e-5,
                   rtol: float = 1e-4, seed: int = 0) -> bool:
    """Compare each partial of order <= floor(beta) with a central difference
    of the next-lower order."""
    rng = np.random.default_rng(seed)
    d = target.d
    top = max(math.floor(target.beta), 1)
    for p in rng.uniform(0.1, 0.9, (points, d)):
        for alpha in _indices(d, top):
            if sum(alpha) == 0:
                continue
            j = next(i for i, k in enumerate(alpha) if k)
            lower = tuple(k - (i == j) for i, k in enumerate(alpha))
            hi, lo = p.copy(), p.copy()
            hi[j] += h
            lo[j] -= h
            fd = (float(target.partial(lower, hi)) - float(target.partial(lower, lo))) / (2 * h)
            exact = float(target.partial(alpha, p))
            if abs(fd - exact) > rtol * max(1.0, abs(exact)):
                return False
    return True
