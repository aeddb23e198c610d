"""quintnet command line: build, verify, approximate and sweep."""

from __future__ import annotations

import argparse
import csv
import io
import math
import sys
from fractions import Fraction

from . import analysis
from .atoms import build_mon, build_mult, build_mult_r, build_nm, multi_indices
from .constants import ConstantPlan, build_const_net
from .dyadic import Dyadic, relu
from .netcore import NetworkError, QuintNet, eval_exact, load, save, stats, validate
from .targets import CATALOG, make_target
from .taylor import BallViolation, PreconditionError, assemble, make_config, p_tilde_eval

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _int_range(text: str) -> list[int]:
    lo, sep, hi = text.partition("..")
    try:
        return list(range(int(lo), int(hi) + 1)) if sep else [int(lo)]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected A..B or an integer, got {text!r}") from None


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _need(args, *names) -> None:
    missing = [f"--{n.replace('_', '-')}" for n in names if getattr(args, n) is None]
    if missing:
        raise UsageError(f"--block {args.block} requires {', '.join(missing)}")


def _print_stats(net: QuintNet) -> None:
    st = stats(net)
    print(f"label={net.label} depth={st.depth} widths={list(net.widths)} "
          f"max_width={st.max_width} l0={st.l0} l1={st.l1}")


# --- blocks ---------------------------------------------------------------

def _block_net(args, m: int) -> QuintNet:
    block = args.block
    if block == "mult":
        return build_mult(m)
    if block == "multr":
        _need(args, "r")
        return build_mult_r(args.r, m)
    if block == "mon":
        _need(args, "d", "gamma")
        return build_mon(args.d, Fraction(args.gamma), m)
    if block == "nm":
        return build_nm(m)
    if block == "const":
        _need(args, "delta", "targets")
        return build_const_net(ConstantPlan(args.delta, tuple(args.targets)), 1)
    raise UsageError(f"unknown block {block!r}")


def _block_check(args, net: QuintNet, m: int) -> tuple[analysis.SupError, Fraction]:
    """Measured sup error of a block and the bound it must meet."""
    block, res = args.block, args.grid
    if block == "mult":
        return analysis.sup_error(net, lambda p: p[0] * p[1], res or 129), Fraction(1, 2 ** m)
    if block == "multr":
        r = args.r
        res = res or max(3, int(round(4000 ** (1 / r))))
        return (analysis.sup_error(net, lambda p: math.prod(p, start=Dyadic(1)), res),
                Fraction(r * r, 2 ** m))
    if block == "mon":
        alphas = multi_indices(args.d, Fraction(args.gamma))

        def oracle(p):
            return [math.prod((v for v, a in zip(p, al) for _ in range(a)), start=Dyadic(1))
                    for al in alphas]
        gamma = Fraction(args.gamma)
        return analysis.sup_error(net, oracle, res or (129 if args.d == 1 else 33)), gamma ** 2 / 2 ** m
    if block == "nm":
        worst, arg = Fraction(-1), None
        for u in analysis.grid_axis(res or 1025):
            out = eval_exact(net, [Dyadic(1, 2), u.halve(), u, relu(u - Dyadic(1, 1))])[0]
            err = abs((out - u - u * (1 - u)).as_fraction())
            if err > worst:
                worst, arg = err, (u,)
        return analysis.SupError(float(worst), worst, arg, "exact"), Fraction(1, 2 ** m)
    if block == "const":
        out = eval_exact(net, [1])
        worst = max(abs((o - z).as_fraction()) for o, z in zip(out[1:], ConstantPlan(
            args.delta, tuple(args.targets)).values))
        return analysis.SupError(float(worst), worst, (), "exact"), Fraction(0)
    raise UsageError(f"unknown block {block!r}")


def cmd_build(args) -> int:
    if args.block != "const":
        _need(args, "m")
    net = _block_net(args, args.m or 1)
    _print_stats(net)
    if args.out:
        save(net, args.out)
    return EXIT_OK


def cmd_verify(args) -> int:
    if args.m_range is None and args.block != "const":
        raise UsageError("verify needs --m-range")
    ms = args.m_range or [1]
    if args.net and len(ms) != 1:
        raise UsageError("--net verifies a single m; pass --m-range M")
    print(f"{'block':<7}{'m':>4}{'measured':>16}{'bound':>16}  result")
    ok = True
    for m in ms:
        net = load(args.net) if args.net else _block_net(args, m)
        rep = validate(net)
        if not rep.ok:
            print(f"{args.block:<7}{m:>4}  invalid net: {rep.message}")
            ok = False
            continue
        try:
            err, bound = _block_check(args, net, m)
        except NetworkError as exc:
            print(f"{args.block:<7}{m:>4}  shape mismatch: {exc}")
            ok = False
            continue
        passed = err.exact <= bound
        ok &= passed
        print(f"{args.block:<7}{m:>4}{err.value:>16.6g}{float(bound):>16.6g}  "
              f"{'PASS' if passed else 'FAIL'}")
    return EXIT_OK if ok else EXIT_FAIL


# --- approximation --------------------------------------------------------

def _target(args):
    try:
        return make_target(args.target, d=args.d, beta=Fraction(args.beta),
                           K=None if args.K is None else Fraction(args.K))
    except (KeyError, ValueError) as exc:
        raise UsageError(str(exc)) from None


def cmd_approx(args) -> int:
    target = _target(args)
    cfg = make_config(target, args.N, args.m)
    net = assemble(target, cfg)
    if args.out:
        save(net, args.out)
    _print_stats(net)
    res = args.grid or (257 if target.d == 1 else 17)
    err = analysis.sup_error(net, lambda p: target(p), res)
    bound = analysis.thm2_bounds(target.beta, target.d, target.K, args.N, args.m)
    print(f"grid={res}^{target.d} measured={err.value:.6g} at {tuple(str(v) for v in err.argmax)}")
    print(f"bound={bound.err_tilde_bound:.6g}")
    passed = err.value <= bound.err_tilde_bound and validate(net).ok
    print("PASS" if passed else "FAIL")
    return EXIT_OK if passed else EXIT_FAIL


def cmd_stats(args) -> int:
    net = load(args.net)
    rep = validate(net)
    _print_stats(net)
    print(f"valid={rep.ok}" + ("" if rep.ok else f" ({rep.message})"))
    return EXIT_OK if rep.ok else EXIT_FAIL


def cmd_count(args) -> int:
    if args.net:
        st = stats(load(args.net))
        L, p, s = st.depth, st.max_width, st.l0
    else:
        if None in (args.L, args.p, args.s):
            raise UsageError("count needs --net or all of --L, --p, --s")
        L, p, s = args.L, args.p, args.s
    bound = analysis.count_networks(L, p, s)
    partial = analysis.count_networks_partial(L, p, s)
    log2_bound = math.log2(5 * (L + 1) * p * p) * (s + 1)
    print(f"L={L} p={p} s={s}")
    print(f"log2_bound={log2_bound:.6f}")
    print(f"bound_bits={bound.bit_length()}")
    if args.exact:
        if hasattr(sys, "set_int_max_str_digits"):
            sys.set_int_max_str_digits(0)
        print(f"bound={bound}")
        print(f"partial={partial}")
    return EXIT_OK if partial <= bound else EXIT_FAIL


def cmd_regress(args) -> int:
    target = _target(args)
    rows = analysis.regression_simulate(target, args.n_list, args.seed, noise=not args.no_noise)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(analysis.SweepRecord.CSV_COLUMNS)
    for r in rows:
        w.writerow([repr(v) if isinstance(v, float) else v for v in r.csv_row()])
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            fh.write(buf.getvalue())
    sys.stdout.write(buf.getvalue())
    mses = [r.heldout_mse for r in rows]
    trend = all(b <= a for a, b in zip(mses, mses[1:]))
    if len(rows) >= 2:
        print(f"slope={analysis.loglog_slope([r.n for r in rows], mses):.4f} "
              f"non_increasing={trend}")
    return EXIT_OK if trend else EXIT_FAIL


def cmd_sweep(args) -> int:
    target = _target(args)
    res = args.grid or (257 if target.d == 1 else 17)
    rows = []
    ok = True
    print(f"{'N':>5}{'m':>4}{'depth':>7}{'width':>7}{'l0':>9}{'vs_P':>14}{'vs_f':>14}{'bound':>14}  result")
    for N in args.N_list:
        for m in args.m_list:
            cfg = make_config(target, N, m)
            net = assemble(target, cfg)
            st = stats(net)
            vs_p = analysis.sup_error(net, lambda p: p_tilde_eval(target, cfg, p), res).value
            vs_f = analysis.sup_error(net, lambda p: target(p), res).value
            bound = analysis.thm2_bounds(target.beta, target.d, target.K, N, m).err_tilde_bound
            passed = vs_f <= bound
            ok &= passed
            rows.append((N, m, st.depth, st.max_width, st.l0, vs_p, vs_f, bound, passed))
            print(f"{N:>5}{m:>4}{st.depth:>7}{st.max_width:>7}{st.l0:>9}"
                  f"{vs_p:>14.6g}{vs_f:>14.6g}{bound:>14.6g}  {'PASS' if passed else 'FAIL'}")
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["N", "m", "depth", "max_width", "l0", "err_vs_surrogate",
                        "err_vs_target", "bound", "pass"])
            w.writerows(rows)
    return EXIT_OK if ok else EXIT_FAIL


# --- parser ---------------------------------------------------------------

def _add_target_flags(p) -> None:
    p.add_argument("--target", required=True, choices=sorted(CATALOG))
    p.add_argument("--d", type=int, default=1)
    p.add_argument("--beta", default="2")
    p.add_argument("--K", default=None, help="ball radius (default: catalog value)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="quintnet", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    blocks = ("mult", "multr", "mon", "nm", "const")
    for name in ("build", "verify"):
        p = sub.add_parser(name)
        p.add_argument("--block", required=True, choices=blocks)
        if name == "build":
            p.add_argument("--m", type=int)
            p.add_argument("--out")
        else:
            p.add_argument("--m-range", type=_int_range)
            p.add_argument("--grid", type=int, help="grid points per axis")
            p.add_argument("--net", help="verify this JSON net instead of building one")
        p.add_argument("--r", type=int)
        p.add_argument("--d", type=int)
        p.add_argument("--gamma")
        p.add_argument("--delta", type=int)
        p.add_argument("--targets", type=_int_list)

    p = sub.add_parser("approx")
    _add_target_flags(p)
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--grid", type=int)
    p.add_argument("--out")

    p = sub.add_parser("stats")
    p.add_argument("--net", required=True)

    p = sub.add_parser("count")
    p.add_argument("--net")
    p.add_argument("--L", type=int)
    p.add_argument("--p", type=int)
    p.add_argument("--s", type=int)
    p.add_argument("--exact", action="store_true", help="print the full integers")

    p = sub.add_parser("regress")
    _add_target_flags(p)
    p.add_argument("--n-list", type=_int_list, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-noise", action="store_true")
    p.add_argument("--csv")

    p = sub.add_parser("sweep")
    _add_target_flags(p)
    p.add_argument("--N-list", type=_int_list, required=True)
    p.add_argument("--m-list", type=_int_list, default=[4, 6, 8, 10])
    p.add_argument("--grid", type=int)
    p.add_argument("--csv")
    return parser


COMMANDS = {
    "build": cmd_build, "verify": cmd_verify, "approx": cmd_approx, "stats": cmd_stats,
    "count": cmd_count, "regress": cmd_regress, "sweep": cmd_sweep,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        parser.error(str(exc))
    except (PreconditionError, BallViolation) as exc:
        print(f"precondition: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
