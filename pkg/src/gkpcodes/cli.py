"""Command-line front end.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 reference-tolerance violation under ``--check``.
"""

import argparse
import csv
import io
import json
import os
import sys

import numpy as np

from . import bounds, optimize
from .channel import AgnModel, FiniteGkp
from .decode import ESTIMATORS, output_covariance_mc, output_covariance_quadrature
from .errors import NumericalError, GkpError
from .lattice import Lattice, by_name, check_integral, form_matrix, is_self_dual, min_norm
from .reduction import reduce_to_tms

FORMAT_VERSION = 1
THREADS_ENV = "GKPCODES_THREADS"

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_CHECK = 0, 2, 3, 4

# reference values used by --check
REFERENCE_TABLE2 = {
    ("square", 0.1): 0.0354, ("hexagonal", 0.1): 0.0340, ("d4", 0.1): 0.0322,
    ("square", 0.2): 0.120, ("hexagonal", 0.2): 0.117, ("d4", 0.2): 0.112,
    ("square", 0.5): 0.490, ("hexagonal", 0.5): 0.489, ("d4", 0.5): 0.487,
}
TABLE2_TOL = 0.0015
REFERENCE_SINGLE_MODE = {"square": 1.25129e-3, "hexagonal": 1.15575e-3}
SINGLE_MODE_TOL = 5e-7


class ConfigError(GkpError):
    pass


class CheckFailed(GkpError):
    pass


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.12g}"
    return v


def write_csv(rows, out=None):
    """Write row dicts as CSV with a ``format_version`` column."""
    if not rows:
        return ""
    fields = ["format_version"] + list(rows[0])
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({"format_version": FORMAT_VERSION, **{k: _fmt(v) for k, v in r.items()}})
    _emit(buf.getvalue(), out)
    return buf.getvalue()


def write_json(obj, out=None):
    text = json.dumps(obj, indent=2, default=_json_default) + "\n"
    _emit(text, out)
    return text


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    raise TypeError(f"not serializable: {type(o).__name__}")


def _emit(text, out):
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _lattice(spec):
    if spec.endswith(".json") and os.path.exists(spec):
        with open(spec, encoding="utf-8") as fh:
            return Lattice.from_dict(json.load(fh))
    return by_name(spec)


def _sigma(args):
    if args.sigma is not None and args.sigma_sq is not None:
        raise ConfigError("give only one of --sigma and --sigma-sq")
    if args.sigma_sq is not None:
        return float(np.sqrt(args.sigma_sq))
    if args.sigma is None:
        raise ConfigError("--sigma or --sigma-sq is required")
    return args.sigma


def _threads(args):
    if args.threads is not None:
        return args.threads
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"{THREADS_ENV} must be an integer") from None
    return 1


def _fin(args):
    return FiniteGkp.from_db(args.gkp_db) if args.gkp_db is not None else None


# ------------------------------------------------------------------ commands


def cmd_lattice_info(args):
    L = _lattice(args.name)
    integral = True
    try:
        check_integral(L)
    except GkpError:
        integral = False
    rep = {"label": L.label, "modes": L.modes, "generator": L.generator,
           "form_matrix": form_matrix(L), "integral": integral, "self_dual": is_self_dual(L),
           "min_norm": min_norm(L), "min_norm_over_ell": min_norm(L) / np.sqrt(2 * np.pi)}
    write_json(rep, args.out)


def cmd_decode_eval(args):
    L = _lattice(args.lattice)
    sigma = _sigma(args)
    fin = _fin(args)
    if args.gain is None:
        if L.modes != 1:
            raise ConfigError("--gain is required for multimode lattices")
        args.gain = optimize.optimize_gain(L, sigma=sigma, estimator_kind=args.estimator,
                                           fin=fin).params["G"]
    code = optimize.tms_family_code(L, args.gain)
    noise = AgnModel.iid(sigma, 2 * L.modes)
    if args.method == "quadrature":
        rep = output_covariance_quadrature(code, noise, fin, args.estimator)
    else:
        rep = output_covariance_mc(code, noise, fin, args.estimator, n_samples=args.samples,
                                   seed=args.seed, threads=_threads(args))
    d = rep.to_dict()
    d.update({"lattice": L.label, "sigma": sigma, "gain": args.gain})
    if args.out and args.out.endswith(".csv"):
        write_csv([{"lattice": L.label, "sigma": sigma, "gain": args.gain,
                    "estimator": args.estimator, "method": rep.method,
                    "sigma_gm_sq": rep.sigma_gm_sq, "sigma_rms_sq": rep.sigma_rms_sq,
                    "sigma_gm_se": rep.sigma_gm_se if rep.sigma_gm_se is not None else ""}],
                  args.out)
    else:
        write_json(d, args.out)
    if args.check:
        ref = REFERENCE_SINGLE_MODE.get(L.label)
        if ref is None or not np.isclose(sigma**2, 1e-2):
            raise ConfigError("--check needs a single-mode library lattice at sigma^2 = 1e-2")
        if abs(rep.sigma_rms_sq - ref) > SINGLE_MODE_TOL:
            raise CheckFailed(f"sigma_rms_sq {rep.sigma_rms_sq:.8g} differs from {ref}")


def cmd_sweep(args):
    given = args.sigma is not None or args.sigma_sq is not None
    s2 = _sigma(args) ** 2 if given else 1e-2
    grid = optimize.SweepGrid.uniform(args.n_r, args.n_theta, s2, (args.r_min, args.r_max))
    rows = optimize.sweep_single_mode(grid, args.estimator, threads=_threads(args))
    write_csv(rows, args.out)


def cmd_table2(args):
    rows = optimize.table2(tuple(args.sigmas), tuple(args.lattices), args.estimator,
                           target_se=args.target_se, seed=args.seed)
    write_csv(rows, args.out)
    if args.check:
        bad = [r for r in rows
               if abs(r["sigma_gm"] - REFERENCE_TABLE2.get((r["lattice"], r["sigma"]), np.nan))
               > TABLE2_TOL or (r["lattice"], r["sigma"]) not in REFERENCE_TABLE2]
        if bad:
            raise CheckFailed(f"{len(bad)} entries outside tolerance")


def cmd_table3(args):
    rows = optimize.table3(tuple(args.sigmas), tuple(args.lattices), args.estimator,
                           seed=args.seed, n_starts=args.starts, n_samples=args.samples,
                           threads=_threads(args))
    write_csv(rows, args.out)


def cmd_breakeven(args):
    res = optimize.find_breakeven(args.lattice, args.estimator, tol=args.tol,
                                  bracket=(args.low, args.high))
    res["window"] = list(bounds.breakeven_window())
    write_json(res, args.out)
    if args.check and args.estimator == "mmse" and not res["in_window"]:
        raise CheckFailed("break-even point outside the information-theoretic window")


def cmd_finite(args):
    dbs = [float("inf") if str(x).lower() in ("inf", "infinity") else float(x) for x in args.gkp_dbs]
    rows = optimize.finite_squeezing_curve(dbs, args.sigmas, args.lattice, args.estimator)
    write_csv(rows, args.out)


def cmd_bounds(args):
    sig = np.linspace(args.sigma_min, args.sigma_max, args.points)
    rows = []
    for ratio in args.ratios:
        vals = bounds.lb_ratio_curve(sig, ratio)
        for s, v in zip(sig, vals):
            rows.append({"m_over_n": ratio, "sigma": s, "sigma_lb": v * s, "ratio": v})
    write_csv(rows, args.out)


def _load_matrix(path):
    if path.endswith(".npy"):
        return np.load(path)
    if path.endswith(".json"):
        with open(path, encoding="utf-8") as fh:
            return np.asarray(json.load(fh), dtype=float)
    return np.loadtxt(path)


def cmd_reduce(args):
    try:
        S = _load_matrix(args.matrix)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read matrix: {exc}") from exc
    if args.inverse:
        S = np.linalg.inv(S)
    res = reduce_to_tms(S, args.n, args.m)
    write_json(res.to_dict(), args.out)


# -------------------------------------------------------------------- parser


def _common(p, sigma=True):
    if sigma:
        p.add_argument("--sigma", type=float)
        p.add_argument("--sigma-sq", type=float)
    p.add_argument("--estimator", choices=ESTIMATORS, default="mmse")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int)
    p.add_argument("--out")
    p.add_argument("--check", action="store_true")
    p.add_argument("--config")


def build_parser():
    parser = argparse.ArgumentParser(prog="gkpcodes", description=__doc__.splitlines()[0],
                                     allow_abbrev=False)
    sub = parser.add_subparsers(dest="command", required=True)
    sub_kw = {"allow_abbrev": False}

    lat = sub.add_parser("lattice", help="lattice utilities", **sub_kw)
    lsub = lat.add_subparsers(dest="action", required=True)
    info = lsub.add_parser("info", help="describe a lattice", **sub_kw)
    info.add_argument("name")
    info.add_argument("--out")
    info.add_argument("--config")
    info.set_defaults(func=cmd_lattice_info)

    dec = sub.add_parser("decode", help="decoder evaluation", **sub_kw)
    dsub = dec.add_subparsers(dest="action", required=True)
    ev = dsub.add_parser("eval", help="output noise of a TMS code", **sub_kw)
    ev.add_argument("--lattice", default="square")
    ev.add_argument("--gain", type=float)
    ev.add_argument("--method", choices=("quadrature", "mc"), default="quadrature")
    ev.add_argument("--samples", type=int, default=100_000)
    ev.add_argument("--gkp-db", type=float)
    _common(ev)
    ev.set_defaults(func=cmd_decode_eval)

    sw = sub.add_parser("sweep", help="single-mode (r, theta) sweep", **sub_kw)
    sw.add_argument("--n-r", type=int, default=12)
    sw.add_argument("--n-theta", type=int, default=12)
    sw.add_argument("--r-min", type=float, default=1.0)
    sw.add_argument("--r-max", type=float, default=3.5)
    _common(sw)
    sw.set_defaults(func=cmd_sweep)

    t2 = sub.add_parser("table2", help="two-data-mode TMS codes", **sub_kw)
    t2.add_argument("--sigmas", type=float, nargs="+", default=list(optimize.TABLE2_SIGMAS))
    t2.add_argument("--lattices", nargs="+", default=list(optimize.TABLE_LATTICES))
    t2.add_argument("--target-se", type=float, default=1e-4)
    _common(t2, sigma=False)
    t2.set_defaults(func=cmd_table2)

    t3 = sub.add_parser("table3", help="staircase gain optimization", **sub_kw)
    t3.add_argument("--sigmas", type=float, nargs="+", default=list(optimize.TABLE3_SIGMAS))
    t3.add_argument("--lattices", nargs="+", default=list(optimize.TABLE_LATTICES))
    t3.add_argument("--starts", type=int, default=8)
    t3.add_argument("--samples", type=int, default=32_768)
    _common(t3, sigma=False)
    t3.set_defaults(func=cmd_table3)

    be = sub.add_parser("breakeven", help="break-even noise by bisection", **sub_kw)
    be.add_argument("--lattice", default="square")
    be.add_argument("--tol", type=float, default=1e-3)
    be.add_argument("--low", type=float, default=0.5)
    be.add_argument("--high", type=float, default=0.71)
    _common(be, sigma=False)
    be.set_defaults(func=cmd_breakeven)

    fi = sub.add_parser("finite", help="QEC gain with finite GKP squeezing", **sub_kw)
    fi.add_argument("--lattice", default="square")
    fi.add_argument("--gkp-dbs", nargs="+", default=["10.5", "10.6", "20", "30", "inf"])
    fi.add_argument("--sigmas", type=float, nargs="+",
                    default=list(np.round(np.linspace(0.05, 0.6, 12), 4)))
    _common(fi, sigma=False)
    fi.set_defaults(func=cmd_finite)

    bo = sub.add_parser("bounds", help="sigma_LB / sigma curves", **sub_kw)
    bo.add_argument("--ratios", type=float, nargs="+", default=[1, 2, 4])
    bo.add_argument("--sigma-min", type=float, default=0.01)
    bo.add_argument("--sigma-max", type=float, default=0.9)
    bo.add_argument("--points", type=int, default=90)
    bo.add_argument("--out")
    bo.add_argument("--config")
    bo.set_defaults(func=cmd_bounds)

    rd = sub.add_parser("reduce", help="reduce an encoding to TMS form", **sub_kw)
    rd.add_argument("matrix")
    rd.add_argument("--n", type=int, required=True)
    rd.add_argument("--m", type=int, required=True)
    rd.add_argument("--inverse", action="store_true",
                    help="the file holds the inverse of the encoding")
    rd.add_argument("--out")
    rd.add_argument("--config")
    rd.set_defaults(func=cmd_reduce)
    return parser


def _explicit(argv):
    dests = set()
    for a in argv:
        if a.startswith("--"):
            dests.add(a[2:].split("=", 1)[0].replace("-", "_"))
    return dests


def apply_config(args, argv=()):
    """Overlay a JSON config onto parsed arguments, rejecting unknown keys.

    Options given explicitly on the command line win over the config file.
    """
    if not getattr(args, "config", None):
        return args
    try:
        with open(args.config, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    known = set(vars(args)) - {"func", "command", "action", "config"}
    explicit = _explicit(argv)
    for key, value in cfg.items():
        dest = key.replace("-", "_")
        if dest not in known:
            raise ConfigError(f"unknown config key {key!r}")
        if dest not in explicit:
            setattr(args, dest, value)
    return args


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        apply_config(args, argv)
        args.func(args)
    except CheckFailed as exc:
        print(f"check failed: {exc}", file=sys.stderr)
        return EXIT_CHECK
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (GkpError, OSError, TypeError, ValueError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
