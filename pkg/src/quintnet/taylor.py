"""Quantized local-Taylor approximation of smooth functions by a single network.

The surrogate is

    P~f(x) = sum_l  P~_l(x) * prod_j (1 - M |x_j - l_j/M|)_+,

where P~_l is the Taylor polynomial at grid node l/M with every monomial
coefficient floored onto the lattice {k B / 2^b}.  :func:`assemble`
realizes it (up to the product-network error) with weights in
{0, +-1/2, +-1, 2}.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import mpmath
import numpy as np

from .atoms import build_mon, build_mult, build_mult_r, multi_indices
from .constants import ConstantPlan, build_const_net
from .dyadic import ONE, ZERO, Dyadic
from .netcore import (QuintNet, chain, identity_net, pad_to_depth,
                      parallel, select)
from .targets import SmoothTarget

_H, _O, _NO, _TWO = 1, 2, -2, 4


class PreconditionError(ValueError):
    """An input violates the approximation theorem's assumptions."""


class BallViolation(ValueError):
    """A Taylor coefficient is too large for the declared ball radius."""


@dataclass(frozen=True)
class ApproxConfig:
    d: int
    beta: Fraction
    K: Fraction
    N: int
    m: int
    N_tilde: int
    nu: int
    M: int
    B: int
    b: int
    delta: int
    D: int

    @property
    def grid_size(self) -> int:
        return (self.M + 1) ** self.d


def _e_power(d: int) -> mpmath.mpf:
    return mpmath.e ** d


def _min_exponent(value: Fraction | mpmath.mpf) -> int:
    """Smallest b >= 0 with 2**b >= value."""
    if isinstance(value, Fraction):
        b = 0
        while Fraction(2) ** b < value:
            b += 1
        return b
    b = max(int(mpmath.ceil(mpmath.log(value, 2))) - 2, 0)
    while mpmath.mpf(2) ** b < value:
        b += 1
    return b


def make_config(target: SmoothTarget, N: int, m: int, strict: bool = True) -> ApproxConfig:
    """Derive the grid, lattice and constants-block parameters.

    With ``strict=False`` the lower bounds on N are not enforced; the
    derived quantities are still well defined but the error bound is not
    guaranteed.
    """
    d, beta, K = target.d, target.beta, target.K
    if m < 1 or N < 1:
        raise PreconditionError("need N >= 1 and m >= 1")
    if strict and N < (beta + 1) ** d:
        raise PreconditionError(f"N = {N} violates N >= (beta+1)^d = {float((beta + 1) ** d):g}")
    with mpmath.workdps(60):
        need = (mpmath.mpf(K.numerator) / K.denominator + 1) * _e_power(d)
        if strict and N < need:
            raise PreconditionError(f"N = {N} violates N >= (K+1)e^d = {float(need):.6g}")
        B = max(int(mpmath.floor(2 * mpmath.mpf(K.numerator) / K.denominator * _e_power(d))), 1)
        nu = 1
        while (2 ** nu + 1) ** d < N:
            nu += 1
        M = 2 ** nu
        if beta.denominator == 1:
            b = _min_exponent(Fraction(B * M ** int(beta)) * (beta + 1) ** d)
        else:
            bval = B * mpmath.mpf(2) ** (nu * mpmath.mpf(beta.numerator) / beta.denominator)
            bval *= (mpmath.mpf(beta.numerator) / beta.denominator + 1) ** d
            b = _min_exponent(bval)
    delta = max(nu * d + 1, b)
    D = M + math.ceil((beta * (M + 1)) ** d)
    return ApproxConfig(d, beta, K, N, m, (2 ** nu + 1) ** d, nu, M, B, b, delta, D)


def grid_points(cfg: ApproxConfig) -> list[tuple[Dyadic, ...]]:
    """Nodes (l_1/M, ..., l_d/M), lexicographic in l."""
    axis = [Dyadic(j, cfg.nu) for j in range(cfg.M + 1)]
    return list(itertools.product(axis, repeat=cfg.d))


def _grid_indices(cfg: ApproxConfig) -> list[tuple[int, ...]]:
    return list(itertools.product(range(cfg.M + 1), repeat=cfg.d))


# --- coefficients ---------------------------------------------------------

def taylor_coefficients(target: SmoothTarget, anchor: Sequence) -> dict[tuple[int, ...], Fraction]:
    """Monomial coefficients c_gamma of the Taylor polynomial at ``anchor``."""
    d = target.d
    a = [Fraction(Dyadic.coerce(v).as_fraction()) for v in anchor]
    alphas = multi_indices(d, target.beta)
    derivs = {al: Fraction(target.partial(al, tuple(a))) for al in alphas}
    coeffs = {}
    for gam in alphas:
        total = Fraction(0)
        for al in alphas:
            if any(g > k for g, k in zip(gam, al)):
                continue
            term = derivs[al]
            for g, k, aj in zip(gam, al, a):
                term *= Fraction(math.comb(k, g), math.factorial(k)) * (-aj) ** (k - g)
            total += term
        coeffs[gam] = total
    return coeffs


@dataclass(frozen=True)
class QuantizedPolynomial:
    anchor: tuple[Dyadic, ...]
    exact: dict
    lattice: dict          # gamma -> integer k with c~ = k B / 2^b
    coefficients: dict     # gamma -> Dyadic c~

    def __call__(self, x: Sequence) -> Dyadic:
        x = [Dyadic.coerce(v) for v in x]
        total = ZERO
        for gam, c in self.coefficients.items():
            if c:
                term = c
                for xv, g in zip(x, gam):
                    for _ in range(g):
                        term = term * xv
                total += term
        return total


def quantize_coefficient(c, B: int, b: int) -> tuple[int, Dyadic]:
    """Floor ``c`` onto the lattice {k B / 2^b}: returns (k, k B / 2^b)."""
    k = math.floor(Fraction(c) * 2 ** b / B)
    return k, Dyadic(k * B, b)


def quantize_taylor(target: SmoothTarget, cfg: ApproxConfig, anchor: Sequence) -> QuantizedPolynomial:
    """Floor each Taylor coefficient onto {k B / 2^b}."""
    anchor = tuple(Dyadic.coerce(v) for v in anchor)
    exact = taylor_coefficients(target, anchor)
    lattice, coeffs = {}, {}
    for gam, c in exact.items():
        if abs(c) >= cfg.B:
            raise BallViolation(f"|c_{gam}| = {float(c):.4g} >= B = {cfg.B} at anchor "
                                f"{[str(v) for v in anchor]}; K too small for this target")
        lattice[gam], coeffs[gam] = quantize_coefficient(c, cfg.B, cfg.b)
    return QuantizedPolynomial(anchor, exact, lattice, coeffs)


def quantize_all(target: SmoothTarget, cfg: ApproxConfig) -> dict[tuple[int, ...], QuantizedPolynomial]:
    return {idx: quantize_taylor(target, cfg, pt)
            for idx, pt in zip(_grid_indices(cfg), grid_points(cfg))}


# --- oracles --------------------------------------------------------------

def hat_value(cfg, anchor: Sequence, x: Sequence) -> Dyadic:
    """prod_j (1 - M |x_j - anchor_j|)_+, exactly.  ``cfg`` may be an int M."""
    M = cfg if isinstance(cfg, int) else cfg.M
    out = ONE
    for xv, av in zip(x, anchor):
        t = ONE - abs(Dyadic.coerce(xv) - Dyadic.coerce(av)) * M
        if t <= 0:
            return ZERO
        out = out * t
    return out


def _active_cells(M: int, x: Sequence[Dyadic]) -> list[tuple[int, ...]]:
    axes = []
    for xv in x:
        lo = math.floor(xv.as_fraction() * M)
        axes.append([j for j in (lo, lo + 1) if 0 <= j <= M])
    return list(itertools.product(*axes))


def p_tilde_eval(target: SmoothTarget, cfg: ApproxConfig, x: Sequence, polys=None) -> Dyadic:
    """Exact value of the quantized surrogate at a dyadic point."""
    x = [Dyadic.coerce(v) for v in x]
    if polys is None:
        polys = {}
    total = ZERO
    for idx in _active_cells(cfg.M, x):
        anchor = [Dyadic(j, cfg.nu) for j in idx]
        h = hat_value(cfg, anchor, x)
        if not h:
            continue
        if idx not in polys:
            polys[idx] = quantize_taylor(target, cfg, anchor)
        total += h * polys[idx](x)
    return total


# --- network stages -------------------------------------------------------

def _shift_block(cfg: ApproxConfig) -> QuintNet:
    """(1, x) -> (1, x, 1/M, ..., (M-1)/M)."""
    plan = ConstantPlan(cfg.nu, tuple(range(1, cfg.M)))
    return build_const_net(plan, 1 + cfg.d)


def _tent_stage(cfg: ApproxConfig, tents: Sequence[tuple[int, int]]) -> QuintNet:
    """(1, x, shifts) -> (1, x, 1 - M|x_j - l/M| for each (j, l)).

    The final clip to (.)_+ is left to the ReLU at the next junction.
    """
    d, M, nu = cfg.d, cfg.M, cfg.nu
    carry = d + 1
    n = len(tents)
    in_w = carry + M - 1
    w0 = np.zeros((carry + 2 * n, in_w), dtype=np.int8)
    w0[np.arange(carry), np.arange(carry)] = _O
    for i, (j, ell) in enumerate(tents):
        u, v = carry + 2 * i, carry + 2 * i + 1
        xcol = 1 + j
        w0[u, xcol] = _O
        w0[v, xcol] = _NO
        if ell == M:
            w0[u, 0], w0[v, 0] = _NO, _O
        elif ell > 0:
            acol = carry + ell - 1
            w0[u, acol], w0[v, acol] = _NO, _O
    mats = [w0]
    w1 = np.zeros((carry + n, carry + 2 * n), dtype=np.int8)
    w1[np.arange(carry), np.arange(carry)] = _O
    for i in range(n):
        w1[carry + i, carry + 2 * i] = _TWO
        w1[carry + i, carry + 2 * i + 1] = _TWO
    mats.append(w1)
    dbl = np.zeros((carry + n, carry + n), dtype=np.int8)
    dbl[np.arange(carry), np.arange(carry)] = _O
    dbl[np.arange(carry, carry + n), np.arange(carry, carry + n)] = _TWO
    mats += [dbl] * (nu - 1)
    clip = 2 * np.eye(carry + n, dtype=np.int8)
    clip[carry:, carry:] *= -1
    clip[carry:, 0] = _O
    mats.append(clip)
    return QuintNet.from_codes(mats, "tents")


def _hat_block(cfg: ApproxConfig, cols: Sequence[int], in_w: int) -> QuintNet:
    if cfg.d == 1:
        return select(identity_net(1, 0), list(cols), in_w)
    return select(build_mult_r(cfg.d, cfg.m), [0] + list(cols), in_w)


def build_hat_net(cfg: ApproxConfig, anchor: Sequence) -> QuintNet:
    """(1, x) -> approximation of the hat function centred at ``anchor``."""
    idx = [int(Dyadic.coerce(a).as_fraction() * cfg.M) for a in anchor]
    tents = list(enumerate(idx))
    stage = _tent_stage(cfg, tents)
    hat = _hat_block(cfg, range(cfg.d + 1, cfg.d + 1 + cfg.d), stage.out_width)
    return chain(_shift_block(cfg), stage, hat, label=f"hat{idx}")


def _horner_stage(n_mon: int, n_hat: int, accs: list[dict[int, int]], b: int) -> QuintNet:
    """(mon, hats) -> (mon, H_1..H_A), H_a = sum_l (k_l / 2^b) hat_l.

    Least-significant-bit-first recursion H <- H/2 + (1/2) sum_{bit set} hat.
    """
    carry = n_mon + n_hat
    A = len(accs)
    mats = []
    for t in range(b):
        last = t == b - 1
        rows = n_mon + (0 if last else n_hat) + A
        cols = carry + (A if t else 0)
        mat = np.zeros((rows, cols), dtype=np.int8)
        keep = n_mon if last else carry
        mat[np.arange(keep), np.arange(keep)] = _O
        for a, weights in enumerate(accs):
            row = keep + a
            if t and any(k & ((1 << t) - 1) for k in weights.values()):
                mat[row, carry + a] = _H
            for ell, k in weights.items():
                if (k >> t) & 1:
                    mat[row, n_mon + ell] = _H
                if last and k == 1 << b:
                    mat[row, n_mon + ell] = _O
        mats.append(mat)
    return QuintNet.from_codes(mats, "coefficients")


def _rescale_stage(in_w: int, signs: Sequence[int], B: int) -> QuintNet:
    """(1, P_1..P_A) -> B * sum_a sign_a P_a via MSB-first doubling."""
    pos = [1 + i for i, s in enumerate(signs) if s > 0]
    neg = [1 + i for i, s in enumerate(signs) if s < 0]
    nb = B.bit_length()
    if nb == 1:
        out = np.zeros((1, in_w), dtype=np.int8)
        out[0, pos] = _O
        out[0, neg] = _NO
        return QuintNet.from_codes([out], "rescale")
    # channels: S+, S-, A+, A-
    w0 = np.zeros((4, in_w), dtype=np.int8)
    w0[0, pos] = w0[2, pos] = _O
    w0[1, neg] = w0[3, neg] = _O
    mats = [w0]
    for i in range(nb - 2, -1, -1):
        bit = (B >> i) & 1
        mat = np.zeros((4, 4), dtype=np.int8)
        mat[0, 0] = mat[1, 1] = _O
        mat[2, 2] = mat[3, 3] = _TWO
        if bit:
            mat[2, 0] = mat[3, 1] = _O
        mats.append(mat)
    # -2 is not a weight, so the sign split is undone only after the last doubling
    out = np.zeros((1, 4), dtype=np.int8)
    out[0, 2], out[0, 3] = _O, _NO
    mats.append(out)
    return QuintNet.from_codes(mats, "rescale")


def assemble(target: SmoothTarget, cfg: ApproxConfig, polys=None) -> QuintNet:
    """Build the network approximating ``target`` on [0,1]^d from (1, x)."""
    d, M, m = cfg.d, cfg.M, cfg.m
    if polys is None:
        polys = quantize_all(target, cfg)
    cells = _grid_indices(cfg)
    gammas = multi_indices(d, cfg.beta)
    n_mon = len(gammas)

    tents = [(j, ell) for j in range(d) for ell in range(M + 1)]
    tent_col = {t: d + 1 + i for i, t in enumerate(tents)}
    stage_tents = _tent_stage(cfg, tents)

    in_w = stage_tents.out_width
    mon = select(build_mon(d, cfg.beta, m), list(range(d + 1)), in_w)
    hats = [_hat_block(cfg, [tent_col[(j, ell[j])] for j in range(d)], in_w) for ell in cells]
    stage_basis = parallel(pad_to_depth([mon] + hats), shared_input=True, label="basis")

    accs, signs, owners = [], [], []
    for g, gam in enumerate(gammas):
        for sign in (1, -1):
            weights = {i: abs(polys[ell].lattice[gam]) for i, ell in enumerate(cells)
                       if polys[ell].lattice[gam] * sign > 0}
            if weights:
                accs.append(weights)
                signs.append(sign)
                owners.append(g)
    stage_coef = _horner_stage(n_mon, len(cells), accs, cfg.b)

    width = stage_coef.out_width
    blocks = [select(identity_net(1, 0), [0], width)]
    for a, g in enumerate(owners):
        col = n_mon + a
        if g == 0:
            blocks.append(select(identity_net(1, 0), [col], width))
        else:
            blocks.append(select(build_mult(m), [0, g, col], width))
    stage_prod = parallel(pad_to_depth(blocks), shared_input=True, label="products")

    stage_out = _rescale_stage(stage_prod.out_width, signs, cfg.B)
    return chain(_shift_block(cfg), stage_tents, stage_basis, stage_coef, stage_prod, stage_out,
                 label=f"f~[{target.name},N={cfg.N},m={m}]")
