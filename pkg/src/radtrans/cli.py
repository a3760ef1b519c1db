"""``radtrans`` command line.

    radtrans run CONFIG [--out DIR] [--snapshots t1,t2,...]
    radtrans converge CONFIG --dx 1/25,1/50,... --eps 1,1e-3,...
    radtrans stability CONFIG --eps ... --dx ... --C ...
    radtrans compare A_DIR B_DIR [--field T] [--norm l1]

Exit status: 0 on success, 2 for configuration errors, 3 for solver errors.
"""

import argparse
import sys
from fractions import Fraction

from radtrans import harness
from radtrans.config import parse_config
from radtrans.errors import ConfigError, InvalidArgumentError, RadtransError

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER = 0, 2, 3


def _numbers(text, name):
    try:
        return [float(Fraction(tok.strip())) for tok in text.split(",") if tok.strip()]
    except (ValueError, ZeroDivisionError):
        raise ConfigError(name, f"cannot parse {text!r} as a comma-separated list of numbers") from None


def _cmd_run(args):
    cfg = parse_config(args.config)
    snaps = _numbers(args.snapshots, "--snapshots") if args.snapshots else None
    if snaps and any(s <= 0 or s > cfg.tmax for s in snaps):
        raise ConfigError("--snapshots", "snapshot times must lie in (0, tmax]")
    res = harness.run_simulation(cfg, snapshots=snaps)
    if args.out:
        harness.write_outputs(res, args.out)
    print(f"{cfg.solver}: t={res.t:.6g} steps={len(res.diagnostics)} stable={res.stable} "
          f"maxT={float(res.T.max()):.6g} wall={res.wall_time:.3f}s")
    return EXIT_OK


def _cmd_converge(args):
    cfg = parse_config(args.config)
    rep = harness.convergence_study(cfg, _numbers(args.dx, "--dx"), _numbers(args.eps, "--eps"), workers=args.workers)
    print("eps,dx,err_rho,err_T")
    for eps, rows in rep.rows.items():
        for dx, er, et in rows:
            print(f"{eps:g},{dx:.6g},{er:.6e},{et:.6e}")
    for eps, (pr, pt) in rep.orders.items():
        print(f"# eps={eps:g} order_rho={pr:.3f} order_T={pt:.3f}")
    return EXIT_OK


def _cmd_stability(args):
    cfg = parse_config(args.config)
    rep = harness.stability_sweep(cfg, _numbers(args.eps, "--eps"), _numbers(args.dx, "--dx"),
                                  sorted(_numbers(args.C, "--C")), workers=args.workers)
    print(f"# criterion: {rep.criterion}")
    print("eps,dx,largest_stable_C")
    for (eps, dx), c in rep.table.items():
        print(f"{eps:g},{dx:.6g},{'unstable-at-minimum' if c is None else format(c, 'g')}")
    return EXIT_OK


def _cmd_compare(args):
    try:
        a, b = harness.load_fields(args.a_dir), harness.load_fields(args.b_dir)
    except (OSError, InvalidArgumentError) as exc:
        raise ConfigError("<input>", str(exc)) from None
    try:
        d = harness.compare_runs(a, b, args.field, args.norm)
    except InvalidArgumentError as exc:
        raise ConfigError("<input>", str(exc)) from None
    print(f"{d:.17g}")
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="radtrans", description="1D gray radiative transfer solvers")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run one simulation")
    r.add_argument("config")
    r.add_argument("--out", help="directory for fields.csv, diagnostics.csv and meta.json")
    r.add_argument("--snapshots", help="comma-separated output times")
    r.set_defaults(func=_cmd_run)

    c = sub.add_parser("converge", help="self-convergence study")
    c.add_argument("config")
    c.add_argument("--dx", required=True, help="halving grid spacings, e.g. 1/25,1/50,1/100")
    c.add_argument("--eps", required=True)
    c.add_argument("--workers", type=int, default=1)
    c.set_defaults(func=_cmd_converge)

    s = sub.add_parser("stability", help="largest stable dt/dx per (eps, dx)")
    s.add_argument("config")
    s.add_argument("--eps", required=True)
    s.add_argument("--dx", required=True)
    s.add_argument("--C", required=True, help="candidate dt/dx ratios")
    s.add_argument("--workers", type=int, default=1)
    s.set_defaults(func=_cmd_stability)

    m = sub.add_parser("compare", help="distance between two output directories")
    m.add_argument("a_dir")
    m.add_argument("b_dir")
    m.add_argument("--field", default="T", choices=("T", "U", "rho"))
    m.add_argument("--norm", default="l1", choices=("l1", "linf"))
    m.set_defaults(func=_cmd_compare)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except RadtransError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
