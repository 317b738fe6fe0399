"""Command-line front end.

Exit codes: 0 when every asserted check passes, 1 when a check fails and
2 for usage errors (bad arguments, parameters out of range, unreadable input).
"""

from __future__ import annotations

import argparse
import sys

from . import analysis, product_chain, serialize
from .building_blocks import SBlockParams, build_s_block, check_threshold_inequality, dyadic_grid
from .chain_core import is_reversible, pair_joint
from .dependence import lag_report, rho_index_sets
from .errors import CalibrationFailed, InvalidChain, InvalidParams, MixChainError

EXIT_OK, EXIT_CHECK, EXIT_USAGE = 0, 1, 2
RESIDUAL_TOL = 1e-13


class UsageError(Exception):
    pass


def parse_range(text: str) -> tuple[int, int]:
    """``"3..7"`` -> (3, 7); ``"10"`` -> (1, 10)."""
    try:
        if ".." in text:
            lo, hi = (int(t) for t in text.split("..", 1))
        else:
            lo, hi = 1, int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer or a range a..b, got {text!r}") from None
    if lo > hi or lo < 1:
        raise argparse.ArgumentTypeError(f"empty or invalid range {text!r}")
    return lo, hi


class _Parser(argparse.ArgumentParser):
    def __init__(self, *args, **kwargs):
        kwargs.setdefault("allow_abbrev", False)
        super().__init__(*args, **kwargs)

    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _outputs(p):
    p.add_argument("--json", metavar="PATH", help="write the JSON report here ('-' for stdout)")
    p.add_argument("--csv", metavar="PATH", help="write the CSV table here ('-' for stdout)")


def build_parser() -> argparse.ArgumentParser:
    root = _Parser(prog="mixchain", description="Exact dependence coefficients of S(N, eps) chains and their products.")
    sub = root.add_subparsers(dest="command", required=True, parser_class=_Parser)

    block = sub.add_parser("block", help="S(N, eps) building blocks")
    bsub = block.add_subparsers(dest="action", required=True, parser_class=_Parser)

    b = bsub.add_parser("build", help="construct a block and write its chain JSON")
    b.add_argument("--n", type=int, required=True)
    b.add_argument("--eps", type=float, required=True)
    b.add_argument("--out", metavar="PATH", help="chain JSON path (stdout if omitted)")

    c = bsub.add_parser("coeffs", help="dependence coefficients at lags")
    c.add_argument("--n", type=int, required=True)
    c.add_argument("--eps", type=float, required=True)
    c.add_argument("--lags", type=parse_range, default=(1, 1), help="N or a..b (default 1)")
    c.add_argument("--lambda", dest="with_lambda", action="store_true", help="also enumerate lambda")
    _outputs(c)

    s = bsub.add_parser("sweep", help="exact quantity along the dyadic eps grid")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--quantity", choices=analysis.QUANTITIES, required=True)
    s.add_argument("--m", type=int)
    s.add_argument("--i", type=int)
    s.add_argument("--j", type=int)
    s.add_argument("--steps", type=int)
    s.add_argument("--lag", type=int)
    s.add_argument("--k-min", type=int, default=1)
    s.add_argument("--k-max", type=int, default=14)
    _outputs(s)

    i = bsub.add_parser("interlaced", help="rho between sigma(Y_0) and sigma(Y_-m, Y_m)")
    i.add_argument("--n", type=int, required=True)
    i.add_argument("--eps", type=float, required=True)
    i.add_argument("--m", type=int, default=1)
    _outputs(i)

    chain = sub.add_parser("chain", help="arbitrary finite chains")
    csub = chain.add_subparsers(dest="action", required=True, parser_class=_Parser)
    k = csub.add_parser("check", help="validate a chain JSON file")
    k.add_argument("--chain", metavar="PATH", required=True)
    k.add_argument("--lags", type=int, default=10, help="lags for the spectral identity check")
    k.add_argument("--mc-steps", type=int, default=0, help="also run a Monte Carlo pair-frequency check")
    k.add_argument("--seed", type=int, default=0)
    _outputs(k)

    cal = sub.add_parser("calibrate", help="calibrate eps for one component")
    cal.add_argument("--n", type=int, required=True)
    cal.add_argument("--r", type=float, required=True)
    cal.add_argument("--h-max", type=int)
    cal.add_argument("--tail", choices=product_chain.TAIL_METHODS, default="chi2")
    _outputs(cal)

    prod = sub.add_parser("product", help="truncated product chain")
    psub = prod.add_subparsers(dest="action", required=True, parser_class=_Parser)
    v = psub.add_parser("verify", help="calibrate components and check every bound")
    v.add_argument("--r", type=float, required=True)
    v.add_argument("--components", type=parse_range, default=(3, 7), help="range 3..N_max (default 3..7)")
    v.add_argument("--lags", type=int, default=10)
    v.add_argument("--h-max", type=int)
    v.add_argument("--tail", choices=product_chain.TAIL_METHODS, default="chi2")
    _outputs(v)
    return root


def _emit(report, args, default_json=True):
    wrote = False
    if getattr(args, "json", None):
        serialize.emit(report, "json", args.json)
        wrote = True
    if getattr(args, "csv", None):
        serialize.emit(report, "csv", args.csv)
        wrote = True
    if not wrote and default_json:
        serialize.emit(report, "json", None)


def _say(name: str, ok: bool, detail: str = "") -> bool:
    print(f"{'PASS' if ok else 'FAIL'} {name}{': ' + detail if detail else ''}", file=sys.stderr)
    return ok


def _block_build(args) -> bool:
    params = SBlockParams(args.n, args.eps)
    chain = build_s_block(params)
    serialize.write_chain(chain, args.out)
    ok = _say("threshold>1/2", check_threshold_inequality(params) > 0.5)
    ok &= _say("stationarity", chain.stationarity_residual() <= RESIDUAL_TOL, f"{chain.stationarity_residual():.3g}")
    ok &= _say("detailed_balance", chain.detailed_balance_residual() <= RESIDUAL_TOL,
               f"{chain.detailed_balance_residual():.3g}")
    return ok


def _block_coeffs(args) -> bool:
    chain = build_s_block(SBlockParams(args.n, args.eps))
    lo, hi = args.lags
    rows, ok = [], True
    for lag in range(lo, hi + 1):
        rep = lag_report(chain, lag, with_lambda=args.with_lambda)
        rows.append((lag, rep.psi, rep.rho, rep.beta, rep.info) + ((rep.lambda_opt,) if args.with_lambda else ()))
        ok &= _say(f"inequalities lag {lag}", analysis.inequality_battery(pair_joint(chain, lag)).passed)
    header = ("lag", "psi", "rho", "beta", "info") + (("lambda",) if args.with_lambda else ())
    _emit(serialize.Table(header, tuple(rows)), args)
    return ok


def _block_sweep(args) -> bool:
    if args.k_min < 0 or args.k_max - args.k_min < 1:
        raise InvalidParams("need 0 <= k-min < k-max")
    kw = {name: getattr(args, name) for name in ("m", "i", "j", "steps", "lag") if getattr(args, name) is not None}
    if args.quantity in ("transition_ij", "mstep_ij") and not {"i", "j"} <= kw.keys():
        raise InvalidParams(f"{args.quantity} needs --i and --j")
    res = analysis.sweep(args.n, args.quantity, dyadic_grid(args.k_min, args.k_max), **kw)
    _emit(res, args)
    return _say(f"sweep {args.quantity}", res.passed, f"terminal {res.terminal_value:.6g}, monotone {res.monotone}")


def _block_interlaced(args) -> bool:
    params = SBlockParams(args.n, args.eps)
    if not 1 <= args.m or not 2 * args.m < args.n:
        raise InvalidParams("need 1 <= m < N/2")
    value = rho_index_sets(build_s_block(params), {0}, {-args.m, args.m})
    bound = 1.0 - 1.0 / args.n
    _emit({"n_cap": args.n, "eps": args.eps, "m": args.m, "rho": value, "bound": bound, "pass": value >= bound}, args)
    return _say("interlaced>=1-1/N", value >= bound, f"{value:.12g}")


def _chain_check(args) -> bool:
    chain = serialize.read_chain(args.chain)
    out = {
        "k": chain.k,
        "irreducible": chain.irreducible,
        "aperiodic": chain.aperiodic,
        "stationarity_residual": chain.stationarity_residual(),
        "detailed_balance_residual": chain.detailed_balance_residual(),
        "reversible": is_reversible(chain),
    }
    ok = _say("irreducible", chain.irreducible) & _say("aperiodic", chain.aperiodic)
    ok &= _say("stationarity", out["stationarity_residual"] <= 1e-12)
    if out["reversible"] and args.lags > 0:
        spec = analysis.spectral_rho_check(chain, args.lags)
        out["spectral"] = spec.to_dict()
        ok &= _say("spectral_identity", spec.passed, f"max rel dev {spec.max_rel_dev:.3g}")
    if args.mc_steps > 0:
        mc = analysis.pair_frequency_check(chain, args.mc_steps, args.seed)
        out["monte_carlo"] = mc.to_dict()
        ok &= _say("monte_carlo_pairs", mc.passed)
    out["pass"] = bool(ok)
    _emit(out, args)
    return ok


def _calibrate(args) -> bool:
    try:
        eps, cert = product_chain.calibrate_epsilon(args.n, args.r, args.h_max, args.tail)
    except CalibrationFailed as exc:
        _say("calibration", False, str(exc))
        _emit({"n_cap": args.n, "r": args.r, "pass": False, "binding": exc.binding}, args)
        return False
    _emit(cert, args)
    return _say("calibration", cert.admissible, f"eps {eps!r}, h* {cert.h_star}")


def _product_verify(args) -> bool:
    lo, hi = args.components
    if lo != 3:
        raise InvalidParams("components must start at 3")
    if args.lags < 1:
        raise InvalidParams("--lags must be at least 1")
    try:
        rep = product_chain.verify_theorem(args.r, hi, args.lags, args.h_max, args.tail)
    except CalibrationFailed as exc:
        _say("calibration", False, str(exc))
        return False
    _emit(rep, args)
    for name, ok in rep.checks.items():
        _say(name, ok)
    return rep.passed


_HANDLERS = {
    ("block", "build"): _block_build,
    ("block", "coeffs"): _block_coeffs,
    ("block", "sweep"): _block_sweep,
    ("block", "interlaced"): _block_interlaced,
    ("chain", "check"): _chain_check,
    ("calibrate", None): _calibrate,
    ("product", "verify"): _product_verify,
}


def run(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        handler = _HANDLERS[(args.command, getattr(args, "action", None))]
        return EXIT_OK if handler(args) else EXIT_CHECK
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except (InvalidParams, InvalidChain, OSError, IndexError) as exc:
        print(f"mixchain: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except MixChainError as exc:
        print(f"mixchain: {exc}", file=sys.stderr)
        return EXIT_CHECK


def main(argv=None) -> None:
    sys.exit(run(argv))
