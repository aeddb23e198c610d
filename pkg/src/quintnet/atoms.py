"""Product and monomial networks built from composed triangle waves.

The squaring trick: g(u) = u(1-u) is approximated from below by
sum_{k<=m} R^k(u), where R^k = T^k o ... o T^1 and
T^k(x) = (x/2)_+ - (x - 2^(1-2k))_+.  Products follow from

    xy = g((x-y+1)/2) - g((x+y)/2) + (x+y)/2 - 1/4.

All builders here use weights in {0, +-1/2, +-1} only.
"""

from __future__ import annotations

import itertools
import math
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .dyadic import ZERO, Dyadic, relu
from .netcore import QuintNet, compose, identity_net, parallel, select

# doubled codes
_Z, _H, _NH, _O, _NO = 0, 1, -1, 2, -2


def _ceil_log2(x) -> int:
    """Smallest integer k >= 0 with 2**k >= x (exact for rationals)."""
    x = Fraction(x)
    if x <= 1:
        return 0
    k = (x.numerator // x.denominator).bit_length() - 1
    while Fraction(2) ** k < x:
        k += 1
    return k


# --- scalar oracles -------------------------------------------------------

def tee(k: int, x) -> Dyadic:
    """T^k(x) = (x/2)_+ - (x - 2^(1-2k))_+ on [0, 2^(2-2k)]."""
    if k < 1:
        raise ValueError("k must be >= 1")
    x = Dyadic.coerce(x)
    if x < 0 or x > Dyadic(1, 2 * k - 2):
        raise ValueError(f"x = {x} outside [0, 2^{2 - 2 * k}]")
    return relu(x.halve()) - relu(x - Dyadic(1, 2 * k - 1))


def r_sum(m: int, x) -> Dyadic:
    """sum_{k=1}^m R^k(x) for x in [0, 1]."""
    x = Dyadic.coerce(x)
    if x < 0 or x > 1:
        raise ValueError(f"x = {x} outside [0, 1]")
    total = ZERO
    r = x
    for k in range(1, m + 1):
        r = tee(k, r)
        total += r
    return total


def mult_target(m: int, x, y) -> Dyadic:
    """The clipped product surrogate a Mult_m network computes exactly."""
    x, y = Dyadic.coerce(x), Dyadic.coerce(y)
    a = (x - y + 1).halve()
    b = (x + y).halve()
    v = r_sum(m + 1, a) - r_sum(m + 1, b) + b - Dyadic(1, 2)
    v = relu(v)
    return v if v < 1 else Dyadic(1)


# --- networks -------------------------------------------------------------

_A = np.array([[_H, _Z, _Z, _Z],
               [_Z, _H, _Z, _NH],
               [_Z, _O, _O, _NO],
               [_NH, _O, _Z, _NO]], dtype=np.int8)
_B = np.array([[_H, _Z, _Z, _Z],
               [_Z, _O, _Z, _Z],
               [_Z, _Z, _O, _Z],
               [_Z, _Z, _Z, _O]], dtype=np.int8)
_NM_OUT = np.array([[_Z, _O, _O, _NO]], dtype=np.int8)


@lru_cache(maxsize=None)
def build_nm(m: int) -> QuintNet:
    """Depth-2m, width-4 net: (1/4, T_+(u), h, T_-^1(u)) -> sum_{k<=m+1} R^k(u) + h."""
    if m < 1:
        raise ValueError("m must be >= 1")
    mats = [_A, _B] * m + [_NM_OUT]
    return QuintNet.from_codes(mats, f"N_{m}")


def _mult_first_layers() -> tuple[np.ndarray, np.ndarray]:
    # (1, x, y) -> (1, 1/2, a, b, (x-y)/2, b-1/2), a=(x-y+1)/2, b=(x+y)/2
    w0 = np.array([[_O, _Z, _Z],
                   [_H, _Z, _Z],
                   [_H, _H, _NH],
                   [_Z, _H, _H],
                   [_Z, _H, _NH],
                   [_NH, _H, _H]], dtype=np.int8)
    # -> (1, 1/4, a/2, b, (a-1/2)_+, 1/4, b/2, 1/4, (b-1/2)_+)
    w1 = np.zeros((9, 6), dtype=np.int8)
    w1[0, 0] = _O
    w1[1, 1] = _H
    w1[2, 2] = _H
    w1[3, 3] = _O
    w1[4, 4] = _O
    w1[5, 1] = _H
    w1[6, 3] = _H
    w1[7, 1] = _H
    w1[8, 5] = _O
    return w0, w1


@lru_cache(maxsize=None)
def build_mult(m: int) -> QuintNet:
    """Mult_m: (1, x, y) -> approx xy within 2^-m, depth 2m+4, width 9."""
    if m < 1:
        raise ValueError("m must be >= 1")
    w0, w1 = _mult_first_layers()
    mats = [w0, w1]
    block_a = np.zeros((9, 9), dtype=np.int8)
    block_b = np.zeros((9, 9), dtype=np.int8)
    block_a[0, 0] = block_b[0, 0] = _O
    for lo in (1, 5):
        block_a[lo:lo + 4, lo:lo + 4] = _A
        block_b[lo:lo + 4, lo:lo + 4] = _B
    mats += [block_a, block_b] * m
    # (1, U-block, V-block) -> (1, 1 - U + V); the N_m readout is folded in
    w_diff = np.zeros((2, 9), dtype=np.int8)
    w_diff[0, 0] = _O
    w_diff[1, 0] = _O
    w_diff[1, 1:5] = -_NM_OUT[0]
    w_diff[1, 5:9] = _NM_OUT[0]
    # (1, w) -> (1 - w)_+, then read it out
    w_clip = np.array([[_O, _NO]], dtype=np.int8)
    w_out = np.array([[_O]], dtype=np.int8)
    mats += [w_diff, w_clip, w_out]
    return QuintNet.from_codes(mats, f"Mult_{m}")


def _mult_round(t: int, m: int, keep_one: bool) -> QuintNet:
    """One pairing round: (1, v_1..v_t) -> ([1,] Mult(v1,v2), Mult(v3,v4), ..., [v_t])."""
    in_width = t + 1
    depth = 2 * m + 4
    blocks = []
    if keep_one:
        blocks.append(select(identity_net(1, depth), [0], in_width))
    mult = build_mult(m)
    for i in range(1, t, 2):
        blocks.append(select(mult, [0, i, i + 1], in_width))
    if t % 2:
        blocks.append(select(identity_net(1, depth), [t], in_width))
    return parallel(blocks, shared_input=True, label="round")


@lru_cache(maxsize=None)
def build_mult_r(r: int, m: int) -> QuintNet:
    """Mult^r_m: (1, x_1..x_r) -> approx prod x_i within r^2 2^-m."""
    if r < 1 or m < 1:
        raise ValueError("r and m must be >= 1")
    if r == 1:
        return QuintNet.from_codes([np.array([[_Z, _O]], dtype=np.int8)], f"Mult^1_{m}")
    rounds = []
    t = r
    while t > 1:
        nxt = (t + 1) // 2
        rounds.append(_mult_round(t, m, keep_one=nxt > 1))
        t = nxt
    net = rounds[0]
    for rnd in rounds[1:]:
        net = compose(net, rnd)
    return QuintNet.from_codes(net.matrices, f"Mult^{r}_{m}")


def multi_indices(d: int, gamma) -> list[tuple[int, ...]]:
    """All alpha in N^d with |alpha| < gamma, graded lexicographic order."""
    gamma = Fraction(gamma)
    top = math.ceil(gamma) - 1
    out = []
    for deg in range(top + 1):
        level = [a for a in itertools.product(range(deg, -1, -1), repeat=d) if sum(a) == deg]
        out.extend(sorted(level, reverse=True))
    return out


def count_monomials(d: int, gamma) -> int:
    return len(multi_indices(d, gamma))


@lru_cache(maxsize=None)
def build_mon(d: int, gamma, m: int) -> QuintNet:
    """Mon^d_{m,gamma}: (1, x) -> approximations of x^alpha, |alpha| < gamma.

    Degree-0 and degree-1 channels are exact passthroughs; higher degrees
    go through Mult^r_m with r = ceil(gamma) - 1, padding unused factors
    with the constant channel.  A fan-out layer feeds every block its own
    copy of (1, factors).
    """
    if d < 1 or m < 1 or Fraction(gamma) <= 0:
        raise ValueError("need d >= 1, gamma > 0, m >= 1")
    alphas = multi_indices(d, gamma)
    r = max(math.ceil(Fraction(gamma)) - 1, 1)
    prod = build_mult_r(r, m)
    depth = prod.depth
    rows = []
    blocks = []
    for alpha in alphas:
        deg = sum(alpha)
        if deg <= 1:
            src = 0 if deg == 0 else 1 + alpha.index(1)
            rows.append([src])
            blocks.append(identity_net(1, depth))
        else:
            factors = [1 + j for j, a in enumerate(alpha) for _ in range(a)]
            factors += [0] * (r - len(factors))
            rows.append([0] + factors)
            blocks.append(prod)
    width = sum(len(rw) for rw in rows)
    fan = np.zeros((width, d + 1), dtype=np.int8)
    i = 0
    for rw in rows:
        for src in rw:
            fan[i, src] = _O
            i += 1
    bank = parallel(blocks, shared_input=False)
    return QuintNet.from_codes((fan,) + bank.matrices, f"Mon^{d}_{m},{gamma}")
