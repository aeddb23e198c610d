"""Acceptance suite: thirteen criteria, one PASS/FAIL line each.

Run with ``pytest tests/test_acceptance.py -v`` (the lines are echoed in
the terminal summary) or directly with ``python tests/test_acceptance.py``.
"""

from __future__ import annotations

import itertools
import math
import sys
import time
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from oracles import (ceil_log2_int, forward, graded_indices, hat, monomial, net_matrices,
                     parabola_partial_sum, slow_power)
from quintnet.analysis import (count_networks, count_networks_partial, grid_axis, loglog_slope,
                               oracle_inequality, regression_simulate, sup_error, thm2_bounds)
from quintnet.atoms import build_mon, build_mult, build_mult_r, multi_indices, r_sum
from quintnet.constants import ConstantPlan, build_const_net
from quintnet.dyadic import Dyadic
from quintnet.netcore import QuintNet, eval_exact, eval_exact_batch, serialize, stats, validate
from quintnet.targets import make_target
from quintnet.taylor import (assemble, build_hat_net, grid_points, hat_value, make_config,
                             p_tilde_eval, quantize_all)

RESULTS: dict[int, tuple[bool, str]] = {}
BUILT: list[QuintNet] = []


def _record(num: int, ok: bool, detail: str) -> None:
    RESULTS[num] = (ok, detail)
    print(f"criterion {num:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


def _keep(net: QuintNet) -> QuintNet:
    BUILT.append(net)
    return net


# 1 -------------------------------------------------------------------------

def criterion_1() -> bool:
    t0 = time.perf_counter()
    worst_ratio = Fraction(0)
    ok = True
    for m in range(1, 13):
        err = sup_error(_keep(build_mult(m)), lambda p: p[0] * p[1], 129)
        ok &= err.exact <= Fraction(1, 2 ** m)
        worst_ratio = max(worst_ratio, err.exact * 2 ** m)
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 60
    # spot-check the fast evaluator against a plain rational forward pass
    rng = np.random.default_rng(1)
    for m in (1, 7, 12):
        net = build_mult(m)
        mats = net_matrices(serialize(net))
        for a, b in rng.integers(0, 129, (25, 2)):
            x, y = Dyadic(int(a), 7), Dyadic(int(b), 7)
            ok &= eval_exact(net, [1, x, y])[0].as_fraction() == forward(mats, [1, x.as_fraction(), y.as_fraction()])[0]
    _record(1, ok, f"Mult_m, m=1..12, 129^2 grid: max err*2^m = {float(worst_ratio):.4f}, {elapsed:.1f} s")
    return ok


# 2 -------------------------------------------------------------------------

def criterion_2() -> bool:
    ok = True
    for m in range(1, 13):
        net = _keep(build_mult(m))
        st = stats(net)
        symbols = {s for mat in serialize(net)["matrices"] for row in mat for s in row}
        ok &= st.depth == 2 * m + 4 and st.max_width == 9
        ok &= symbols <= {"0", "h", "-h", "1", "-1"} and validate(net).ok
    _record(2, ok, "Mult_m depth 2m+4, width 9, weights in {0, +-1/2, +-1}, m=1..12")
    return ok


# 3 -------------------------------------------------------------------------

def criterion_3() -> bool:
    xs = [Fraction(i, 1024) for i in range(1025)]
    ok = True
    worst = Fraction(0)
    for m in range(1, 13):
        for x in xs:
            val = r_sum(m, Dyadic.from_fraction(x)).as_fraction()
            ok &= val == parabola_partial_sum(m, x)
            gap = abs(x * (1 - x) - val)
            ok &= gap <= Fraction(1, 2 ** m)
            worst = max(worst, gap * 2 ** m)
    _record(3, ok, f"parabola series, 1025 points, m=1..12: max gap*2^m = {float(worst):.3e}")
    return ok


# 4 -------------------------------------------------------------------------

# odd spacings keep grid points off the coarse dyadic lattice where Mult is exact
_MULTR_GRID = {2: 101, 3: 21, 4: 11, 5: 7}


def criterion_4() -> bool:
    ok = True
    rows = []
    for r, m in itertools.product((2, 3, 4, 5), (4, 8)):
        net = _keep(build_mult_r(r, m))
        err = sup_error(net, lambda p: math.prod((v.as_fraction() for v in p), start=Fraction(1)),
                        _MULTR_GRID[r])
        q = ceil_log2_int(r)
        good = (err.exact <= Fraction(r * r, 2 ** m) and net.depth <= (2 * m + 5) * q
                and max(net.widths[1:]) <= 9 * r)
        ok &= good
        rows.append(f"r={r},m={m}:{float(err.exact * 2 ** m / (r * r)):.3f}")
    _record(4, ok, "Mult^r_m err/(r^2 2^-m): " + " ".join(rows))
    return ok


# 5 -------------------------------------------------------------------------

def criterion_5() -> bool:
    ok = True
    rows = []
    for d, gamma, m in [(1, 2, 6), (2, 2, 6), (2, 3, 8)]:
        net = _keep(build_mon(d, gamma, m))
        alphas = multi_indices(d, gamma)
        # independent count: all alpha with |alpha| <= ceil(gamma) - 1
        count = len(graded_indices(d, math.ceil(gamma) - 1))
        ok &= net.out_width == count == len(alphas) and count < (gamma + 1) ** d

        def oracle(p, alphas=alphas):
            return [monomial(al, [v.as_fraction() for v in p]) for al in alphas]
        err = sup_error(net, oracle, 101 if d == 1 else 41)
        ok &= err.exact <= Fraction(gamma * gamma, 2 ** m)
        rows.append(f"(d={d},g={gamma},m={m}): C={count}, err={float(err.exact):.2e}")
    _record(5, ok, "Mon " + "; ".join(rows))
    return ok


# 6 -------------------------------------------------------------------------

def criterion_6() -> bool:
    rng = np.random.default_rng(20240601)
    ok = True
    slack = math.inf
    for _ in range(100):
        delta = int(rng.integers(1, 13))
        y = int(rng.integers(1, 2 ** delta + 1))
        # passthrough width 1+d with 1+d <= 2 delta^2 (always true where the block is used)
        d = int(rng.integers(1, min(3, 2 * delta * delta - 1) + 1))
        net = _keep(build_const_net(ConstantPlan(delta, (y,)), 1 + d))
        x = [Dyadic(1)] + [Dyadic(int(v), 4) for v in rng.integers(0, 17, d)]
        out = eval_exact(net, x)
        ok &= out == x + [Dyadic(y, delta)]
        ok &= net.depth == 2 * delta
        bound = 2 * (1 + d + 1 + delta) * delta
        ok &= stats(net).l0 <= bound
        slack = min(slack, bound - stats(net).l0)
    _record(6, ok, f"100 random constants exact; depth 2*delta; min l0 slack {slack}")
    return ok


# 7 -------------------------------------------------------------------------

def criterion_7() -> bool:
    rng = np.random.default_rng(7)
    ok = True
    for d in (1, 2):
        M = 4
        anchors = list(itertools.product([Fraction(j, M) for j in range(M + 1)], repeat=d))
        for _ in range(1000):
            e = int(rng.integers(0, 16))
            x = [Dyadic(int(v), e) for v in rng.integers(0, 2 ** e + 1, d)]
            total = sum((hat_value(M, a, x) for a in anchors), Dyadic(0))
            ok &= total == 1
            ok &= sum(hat(M, a, [v.as_fraction() for v in x]) for a in anchors) == 1
    # the d = 1 hat networks are exact, so their outputs must sum to 1 as well
    cfg = make_config(make_target("linear"), 5, 4, strict=False)
    nets = [_keep(build_hat_net(cfg, a)) for a in grid_points(cfg)]
    pts = [(1, Dyadic(int(v), 12)) for v in rng.integers(0, 4097, 1000)]
    outs = [eval_exact_batch(n, pts) for n in nets]
    ok &= all(sum((o[i][0] for o in outs), Dyadic(0)) == 1 for i in range(len(pts)))
    _record(7, ok, "hat partition of unity, 1000 random dyadic points, (d,M) in {(1,4),(2,4)}")
    return ok


# 8 -------------------------------------------------------------------------

SWEEP = [
    ("linear", 1, (9, 17, 33)),
    ("bump", 1, (11, 17, 33)),
    ("quadratic", 2, (19, 30, 50)),
    ("product", 2, (30, 50, 81)),
]
SWEEP_M = (6, 8, 10)
MONO_M = (4, 6, 8, 10)


def _measure(net, target, cfg, res):
    """(sup |net - P~|, sup |net - f|) over a res^d grid, one exact pass."""
    pts = list(itertools.product(grid_axis(res), repeat=target.d))
    outs = eval_exact_batch(net, [(1, *p) for p in pts])
    polys = {}
    vs_p = max(abs((o[0] - p_tilde_eval(target, cfg, p, polys)).as_fraction()) for o, p in zip(outs, pts))
    vs_f = max(abs(o[0].as_fraction() - Fraction(target(p))) for o, p in zip(outs, pts))
    return vs_p, float(vs_f)


def criterion_8() -> bool:
    ok = True
    notes = []
    slowest = 0.0
    for name, d, Ns in SWEEP:
        t = make_target(name, d, 2)
        res = 1001 if d == 1 else 41
        cache = {}
        for N, m in itertools.product(Ns, sorted(set(SWEEP_M) | set(MONO_M))):
            if N != Ns[0] and m not in SWEEP_M:
                continue
            cfg = make_config(t, N, m)
            t0 = time.perf_counter()
            net = _keep(assemble(t, cfg))
            slowest = max(slowest, time.perf_counter() - t0)
            vs_p, vs_f = _measure(net, t, cfg, res)
            cache[N, m] = vs_p
            if m not in SWEEP_M:
                continue
            st = stats(net)
            bd = thm2_bounds(t.beta, d, t.K, N, m)
            L_bound = 4 * bd.delta_bound + 2 * bd.L
            width_bound = max(2 * (1 + d + float(bd.R_bound) + bd.delta_bound), 2 ** d * bd.width_bound)
            s_bound = (1 + d + float(bd.R_bound) + bd.delta_bound) * L_bound + 2 ** d * float(bd.s_bound)
            good = (validate(net).ok and st.depth <= L_bound and st.max_width <= width_bound
                    and st.l0 <= s_bound and vs_f <= bd.err_tilde_bound)
            if not good:
                notes.append(f"{name} N={N} m={m}: depth {st.depth}/{L_bound:.0f} width "
                             f"{st.max_width}/{width_bound:.0f} l0 {st.l0}/{s_bound:.0f} "
                             f"err {vs_f:.3g}/{bd.err_tilde_bound:.3g}")
            ok &= good
        mono = [cache[Ns[0], m] for m in MONO_M]
        decreasing = all(b <= a for a, b in zip(mono, mono[1:]))
        ok &= decreasing
        notes.append(f"{name}/d={d} N={Ns[0]} |f~-P~| over m=4..10: "
                     + ",".join(f"{float(v):.1e}" for v in mono))
    ok &= slowest < 300
    _record(8, ok, f"end-to-end sweep (slowest build {slowest:.1f} s); " + "; ".join(notes))
    return ok


# 9 -------------------------------------------------------------------------

def criterion_9() -> bool:
    ok = True
    cases = [("linear", 1, 9), ("quadratic", 1, 17), ("bump", 1, 11), ("product", 2, 30),
             ("quadratic", 2, 19)]
    for name, d, N in cases:
        t = make_target(name, d, 2)
        cfg = make_config(t, N, 6)
        polys = quantize_all(t, cfg)
        step = Fraction(cfg.B, 2 ** cfg.b)
        gap_cap = Fraction(1, cfg.M ** 2)
        for poly in polys.values():
            diffs = [abs(Fraction(poly.exact[g]) - poly.coefficients[g].as_fraction()) for g in poly.exact]
            ok &= all(df < step for df in diffs)
            ok &= sum(diffs) <= (t.beta + 1) ** d * step <= gap_cap
        # pointwise gap between the exact and quantized local expansions
        pts = list(itertools.product([Dyadic(i, 5) for i in range(33)], repeat=d))
        for p in pts[::3]:
            xf = [v.as_fraction() for v in p]
            exact = sum(hat(cfg.M, [a.as_fraction() for a in poly.anchor], xf)
                        * sum(Fraction(c) * monomial(g, xf) for g, c in poly.exact.items())
                        for poly in polys.values())
            ok &= abs(exact - p_tilde_eval(t, cfg, p, {k: v for k, v in polys.items()}).as_fraction()) <= gap_cap
    _record(9, ok, "coefficients within B/2^b; aggregate gap <= M^-beta (5 catalog targets)")
    return ok


# 10 ------------------------------------------------------------------------

def criterion_10() -> bool:
    nets = list(BUILT)
    if not nets:
        nets = [build_mult(m) for m in range(1, 13)] + [build_mon(2, 3, 6), build_mult_r(5, 4)]
        t = make_target("product", 2, 2)
        nets.append(assemble(t, make_config(t, 30, 6)))
    ok = True
    for net in nets:
        st = stats(net)
        ok &= Fraction(st.l0, 2) <= st.l1.as_fraction() <= 2 * st.l0
    _record(10, ok, f"l0/2 <= l1 <= 2 l0 on {len(nets)} built networks")
    return ok


# 11 ------------------------------------------------------------------------

def criterion_11() -> bool:
    rng = np.random.default_rng(11)
    ok = True
    for _ in range(20):
        L, p, s = (int(v) for v in (rng.integers(1, 200), rng.integers(1, 3000), rng.integers(0, 400)))
        base = 5 * (L + 1) * p * p
        ok &= count_networks(L, p, s) == slow_power(base, s + 1)
        ok &= count_networks_partial(L, p, s) == sum(slow_power(base, j) for j in range(s + 1))
        ok &= count_networks_partial(L, p, s) <= count_networks(L, p, s)
    _record(11, ok, "20 random (L, p, s): exact match with repeated multiplication; partial <= bound")
    return ok


# 12 ------------------------------------------------------------------------

ORACLE_CASES = [
    ((0, 0, 100, 1, 0, 0), Fraction(72, 25)),
    ((Fraction(1, 4), 0, 1, 1, 1, Fraction(1, 2)), Fraction(419)),
    ((0, 100, 50, 3, 0, 0), Fraction(33696, 25)),
    ((Fraction(1, 2), 1, 2, Fraction(1, 2), Fraction(1, 2), Fraction(1, 8)), Fraction(159, 2)),
    ((Fraction(3, 64), 37, 4096, 2, Fraction(1, 1024), Fraction(1, 512)),
     4 * (Fraction(3, 64) + 4 * Fraction(18 * 37 + 72, 4096) + Fraction(64, 1024) + Fraction(1, 512))),
]


def criterion_12() -> bool:
    ok = True
    for args, want in ORACLE_CASES:
        ok &= oracle_inequality(*(float(a) for a in args)) == float(want)
    _record(12, ok, "oracle-inequality calculator equals 5 hand values to the last bit")
    return ok


# 13 ------------------------------------------------------------------------

def criterion_13() -> bool:
    t = make_target("quadratic", 1, 1)
    ns = [2 ** k for k in range(8, 14)]
    runs = [regression_simulate(t, ns, seed) for seed in range(5)]
    ok = all(len(r) == len(ns) for r in runs)
    mean = np.mean([[row.heldout_mse for row in r] for r in runs], axis=0)
    trend = all(b <= a for a, b in zip(mean, mean[1:]))
    free = regression_simulate(t, ns, 0, noise=False)
    within = all(r.heldout_mse <= r.err_tilde_bound ** 2 for r in free)
    slope = loglog_slope(ns, mean)
    target = -2 * float(t.beta) / (2 * float(t.beta) + t.d)
    band = target - 0.5 <= slope <= 0
    ok &= trend and within and band
    _record(13, ok, f"mean held-out MSE {['%.2e' % v for v in mean]}; slope {slope:.3f} "
                    f"(band [{target - 0.5:.3f}, 0]); noise-free within squared bound: {within}")
    return ok


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6,
            criterion_7, criterion_8, criterion_9, criterion_10, criterion_11, criterion_12,
            criterion_13]


@pytest.mark.parametrize("criterion", CRITERIA, ids=[f"criterion_{i}" for i in range(1, 14)])
def test_acceptance(criterion):
    assert criterion(), RESULTS[int(criterion.__name__.split("_")[1])][1]


if __name__ == "__main__":
    results = [c() for c in CRITERIA]
    sys.exit(0 if all(results) else 1)
