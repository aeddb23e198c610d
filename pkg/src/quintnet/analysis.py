"""Bound calculators, exact class counting, error measurement and the
plug-in regression simulation."""

from __future__ import annotations

import csv
import dataclasses
import itertools
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .atoms import _ceil_log2
from .dyadic import Dyadic
from .netcore import QuintNet, eval_exact_batch, eval_float, stats
from .taylor import PreconditionError, assemble, make_config
from .targets import SmoothTarget

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class BoundReport:
    L: int
    width_bound: int
    s_bound: Fraction
    err_bound: float
    L_tilde_bound: float | None = None
    width_tilde_bound: float | None = None
    s_tilde_bound: float | None = None
    err_tilde_bound: float | None = None
    delta_bound: float | None = None
    R_bound: Fraction | None = None


def _check_bound_inputs(beta, d, K, N, m) -> tuple[Fraction, Fraction]:
    beta, K = Fraction(beta), Fraction(K)
    if m < 1 or d < 1 or beta <= 0 or K <= 0:
        raise PreconditionError("need m >= 1, d >= 1, beta > 0, K > 0")
    if N < (beta + 1) ** d:
        raise PreconditionError(f"N = {N} violates N >= (beta+1)^d")
    if N < (float(K) + 1) * math.exp(d):
        raise PreconditionError(f"N = {N} violates N >= (K+1)e^d")
    return beta, K


def thm1_bounds(beta, d: int, K, N: int, m: int) -> BoundReport:
    """Depth, width, sparsity and sup-error of the real-weight construction."""
    beta, K = _check_bound_inputs(beta, d, K, N, m)
    L = 8 + (m + 5) * (1 + _ceil_log2(max(Fraction(d), beta)))
    width = 6 * (d + math.ceil(beta)) * N
    s = 141 * (d + beta + 1) ** (3 + d) * N * (m + 6)
    b = float(beta)
    err = ((2 * float(K) + 1) * (1 + d * d + b * b) * 6 ** d * N * 2.0 ** -m
           + float(K) * 3 ** b * N ** (-b / d))
    return BoundReport(L, width, s, err)


def thm2_bounds(beta, d: int, K, N: int, m: int) -> BoundReport:
    """The quintuple-weight bounds, with delta and R at their stated maxima."""
    base = thm1_bounds(beta, d, K, N, m)
    beta, K = Fraction(beta), Fraction(K)
    b, k = float(beta), float(K)
    delta = 2 * math.log2(N ** (b + d) * k * math.e ** d)
    R = (2 * beta) ** d * N
    L_t = 4 * delta + 2 * base.L
    width_t = max(2 * (1 + d + float(R) + delta), 2 ** d * base.width_bound)
    s_t = (1 + d + float(R) + delta) * L_t + 2 ** d * float(base.s_bound)
    err_t = ((2 * k + 1) * (1 + d * d + b * b) * 12 ** d * N * 2.0 ** -m
             + (k + 1) * 3 ** b * N ** (-b / d))
    return dataclasses.replace(base, L_tilde_bound=L_t, width_tilde_bound=width_t,
                               s_tilde_bound=s_t, err_tilde_bound=err_t,
                               delta_bound=delta, R_bound=R)


def count_networks(L: int, p_max: int, s: int) -> int:
    """(5 (L+1) p_max^2)^(s+1): bound on the number of networks in the class."""
    if L < 0 or p_max < 1 or s < 0:
        raise ValueError("need L >= 0, p_max >= 1, s >= 0")
    return (5 * (L + 1) * p_max ** 2) ** (s + 1)


def count_networks_partial(L: int, p_max: int, s: int) -> int:
    """sum_{j<=s} (5 (L+1) p_max^2)^j."""
    if L < 0 or p_max < 1 or s < 0:
        raise ValueError("need L >= 0, p_max >= 1, s >= 0")
    base = 5 * (L + 1) * p_max ** 2
    return (base ** (s + 1) - 1) // (base - 1)


def oracle_inequality(approx_err_sq: float, cover_log2: float, n: int, F: float,
                      delta: float, Delta_n: float) -> float:
    """Right-hand side of the oracle-type risk bound, correctly rounded.

    ``delta = 0`` is accepted: for a finite class the exact class size is a
    valid covering number at radius 0.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if min(approx_err_sq, cover_log2, F, Delta_n) < 0:
        raise ValueError("inputs must be nonnegative")
    if not 0 <= delta <= 1:
        raise ValueError("delta must lie in [0, 1]")
    a, c, f, dl, dn = map(Fraction, (approx_err_sq, cover_log2, F, delta, Delta_n))
    return float(4 * (a + f * f * (18 * c + 72) / n + 32 * dl * f + dn))


# --- sup-error measurement ------------------------------------------------

@dataclass(frozen=True)
class SupError:
    value: float
    exact: Fraction | None
    argmax: tuple
    mode: str


def grid_axis(resolution: int) -> list[Dyadic]:
    """``resolution`` points spanning [0, 1]; exact i/2^k when possible,
    else i/(resolution-1) rounded to the nearest multiple of 2^-20."""
    if resolution < 2:
        raise ValueError("grid resolution must be >= 2")
    steps = resolution - 1
    if steps & (steps - 1) == 0:
        k = steps.bit_length() - 1
        return [Dyadic(i, k) for i in range(resolution)]
    return [Dyadic(round(i * 2 ** 20 / steps), 20) for i in range(resolution)]


def sup_error(net: QuintNet, oracle: Callable, grid_resolution: int, mode: str = "exact",
              batch: int = 4096) -> SupError:
    """Max over a tensor grid of |net(1, x) - oracle(x)|, channelwise.

    In exact mode ``oracle`` receives a tuple of Dyadic and may return
    Dyadic, Fraction, int or float (floats are taken at face value).  In
    float mode it receives a float array.  Scan order is lexicographic
    and ties keep the first point, so the argmax is reproducible.
    """
    d = net.in_width - 1
    axis = grid_axis(grid_resolution)
    points = list(itertools.product(axis, repeat=d))
    best, best_pt = -1, None
    if mode == "exact":
        for start in range(0, len(points), batch):
            chunk = points[start:start + batch]
            outs = eval_exact_batch(net, [(1, *p) for p in chunk])
            for p, out in zip(chunk, outs):
                want = oracle(p)
                if not isinstance(want, (list, tuple, np.ndarray)):
                    want = [want]
                for o, w in zip(out, want):
                    w = w.as_fraction() if isinstance(w, Dyadic) else Fraction(w)
                    err = abs(o.as_fraction() - w)
                    if err > best:
                        best, best_pt = err, p
        return SupError(float(best), best, best_pt, "exact")
    if mode != "float":
        raise ValueError(f"unknown mode {mode!r}")
    xs = np.array([[float(v) for v in p] for p in points])
    outs = eval_float(net, np.hstack([np.ones((len(xs), 1)), xs]))
    best_f, best_pt = -1.0, None
    for p, x, out in zip(points, xs, outs):
        want = np.atleast_1d(np.asarray(oracle(x), dtype=float))
        err = float(np.max(np.abs(out - want)))
        if err > best_f:
            best_f, best_pt = err, p
    return SupError(best_f, None, best_pt, "float")


# --- regression ---------------------------------------------------------

@dataclass(frozen=True)
class SweepRecord:
    n: int
    N: int
    m: int
    depth: int
    max_width: int
    l0: int
    l1: str
    heldout_mse: float
    rate_bound: float
    seed: int
    train_mse: float = float("nan")
    heldout_se: float = float("nan")
    err_tilde_bound: float = float("nan")

    CSV_COLUMNS = ("n", "N", "m", "depth", "max_width", "l0", "l1", "heldout_mse", "rate_bound", "seed")

    def csv_row(self) -> list:
        return [getattr(self, c) for c in self.CSV_COLUMNS]


def regression_recipe(n: int, beta, d: int) -> tuple[int, int]:
    """(N, m) = (ceil n^{d/(2 beta + d)}, ceil log2 n)."""
    raw = n ** (d / (2 * float(beta) + d))
    N = round(raw) if abs(raw - round(raw)) < 1e-9 else math.ceil(raw)
    return N, _ceil_log2(n)


def _workers() -> int:
    try:
        return max(1, int(os.environ.get("QUINTNET_THREADS", "1")))
    except ValueError:
        return 1


def _target_batch(target: SmoothTarget, xs: np.ndarray) -> np.ndarray:
    return np.array([target.value(x) for x in xs])


def _regression_row(target: SmoothTarget, n: int, seed: int, F: float, noise: bool,
                    heldout: np.ndarray, f_heldout: np.ndarray) -> SweepRecord | None:
    d, beta = target.d, target.beta
    N, m = regression_recipe(n, beta, d)
    try:
        cfg = make_config(target, N, m)
    except PreconditionError as exc:
        log.warning("n = %d skipped: %s", n, exc)
        return None
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(n,)))
    X = rng.random((n, d))
    eps = rng.standard_normal(n) if noise else np.zeros(n)
    Y = _target_batch(target, X) + eps
    net = assemble(target, cfg)
    st = stats(net)
    ones = np.ones((len(heldout), 1))
    pred = eval_float(net, np.hstack([ones, heldout]))[:, 0]
    pred = np.clip(pred, -F, F)
    train_pred = np.clip(eval_float(net, np.hstack([np.ones((n, 1)), X]))[:, 0], -F, F)
    b = float(beta)
    rate = n ** (-2 * b / (2 * b + d)) * math.log2(n) ** 2
    bound = thm2_bounds(beta, d, target.K, N, m).err_tilde_bound
    sq = (pred - f_heldout) ** 2
    return SweepRecord(n, N, m, st.depth, st.max_width, st.l0, str(st.l1),
                       float(np.mean(sq)), rate, seed,
                       float(np.mean((Y - train_pred) ** 2)),
                       float(np.std(sq, ddof=1) / math.sqrt(len(sq))), bound)


def regression_simulate(target: SmoothTarget, n_values: Sequence[int], seed: int,
                        F: float | None = None, noise: bool = True,
                        heldout_size: int = 10_000) -> list[SweepRecord]:
    """Plug-in regression runs: one constructed network per sample size.

    The estimator is the constructed approximant for the sample-size
    recipe (not an empirical risk minimiser).  ``heldout_mse`` estimates
    E[(f_hat(X) - f0(X))^2] on one held-out set shared by all n for a
    given seed; training noise only enters ``train_mse``.
    """
    if F is None:
        F = max(float(target.K), 1.0)
    if F < max(float(target.K), 1.0):
        raise PreconditionError("F must be >= max(K, 1)")
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(0,)))
    heldout = rng.random((heldout_size, target.d))
    f_heldout = _target_batch(target, heldout)

    def run(n):
        return _regression_row(target, n, seed, F, noise, heldout, f_heldout)

    workers = _workers()
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            rows = list(pool.map(run, n_values))
    else:
        rows = [run(n) for n in n_values]
    return [r for r in rows if r is not None]


def loglog_slope(ns: Sequence[float], errors: Sequence[float]) -> float:
    return float(np.polyfit(np.log(ns), np.log(errors), 1)[0])


def write_csv(records: Sequence[SweepRecord], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SweepRecord.CSV_COLUMNS)
        for r in records:
            w.writerow([repr(v) if isinstance(v, float) else v for v in r.csv_row()])
