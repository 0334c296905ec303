"""Command-line entry point: ``bernoulli-diffuse <subcommand> ...``.

Exit codes: 0 success, 1 invalid input or usage, 2 numerical failure (including
a violated comparison or sandwich check).
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from ._backend import BACKEND
from .bernoulli import BernoulliParams, eval_S, parse_growth_rate
from .errors import NumericalError, ValidationError
from .grid import Domain, read_csv, write_csv

log = logging.getLogger("bernoulli_diffuse")

SEED_ENV = "BERNOULLI_DIFFUSE_SEED"


class UsageError(ValidationError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"not JSON serialisable: {type(obj).__name__}")


def _sanitize(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {str(k): _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    return obj


def dump_json(obj, path=None):
    text = json.dumps(_sanitize(obj), sort_keys=True, indent=2, default=_json_default)
    if path is None or str(path) == "-":
        print(text)
    else:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text + "\n")
    return text


def _config(args):
    skip = {"func", "command"}
    return {k: (str(v) if isinstance(v, Path) else v)
            for k, v in sorted(vars(args).items()) if k not in skip}


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _positive_float(text):
    value = float(text)
    if not (value > 0 and math.isfinite(value)):
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text}")
    return value


def _domain(args):
    if args.h is None:
        args.h = 1.0 / (max(args.nx, args.ny) + 1)  # recorded in the report config
    return Domain(args.nx, args.ny, args.h)


def _add_grid_flags(p, n=31):
    p.add_argument("--nx", type=_positive_int, default=n)
    p.add_argument("--ny", type=_positive_int, default=n)
    p.add_argument("--h", type=_positive_float, default=None,
                   help="lattice spacing (default 1/(max(nx, ny) + 1), the unit square)")


def _add_evolution_flags(p, init_default):
    _add_grid_flags(p)
    p.add_argument("--init", default=init_default,
                   help="initial data: path to a grid CSV, 'separable', or 'blend:<p>'")
    p.add_argument("--alpha", type=float, default=2.0)
    p.add_argument("--gamma", type=_positive_float, default=1.0)
    p.add_argument("--T", type=float, default=1.0)
    p.add_argument("--dt", type=_positive_float, default=None,
                   help="time step (default: half the stability bound of the initial data)")
    p.add_argument("--snapshot-every", type=_positive_int, default=10)
    p.add_argument("--elliptic-tol", type=_positive_float, default=1e-10)


# ------------------------------------------------------------- handlers ----

def cmd_solve_elliptic(args):
    from .elliptic import solve_brezis_oswald

    d = _domain(args)
    sol = solve_brezis_oswald(d, args.alpha, tol=args.tol, max_iter=args.max_iter)
    if args.out:
        write_csv(sol.u, args.out)
    report = {"config": _config(args), "domain": {"nx": d.nx, "ny": d.ny, "h": d.h}}
    report.update(sol.as_dict())
    dump_json(report, args.report)
    return 0


def cmd_bernoulli_eval(args):
    from .bernoulli import rk4_oracle

    p = BernoulliParams(args.alpha, args.gamma, parse_growth_rate(args.mu))
    values = [eval_S(p, t) for t in args.t]
    if args.report:
        out = {"config": _config(args), "params": p.as_dict(),
               "values": [{"t": t, "S": s} for t, s in zip(args.t, values)]}
        if args.oracle_dt:
            out["oracle"] = [{"t": t, "S": rk4_oracle(p, t, args.oracle_dt)} for t in args.t]
        dump_json(out, args.report)
    else:
        for s in values:
            print(f"{s:.17g}")
    return 0


def _initial_data(spec, d, p, tol):
    """Build v0 and, when needed, the elliptic solution behind it."""
    from .elliptic import solve_brezis_oswald
    from .parabolic import BarrierPair, separable_solution

    if spec == "separable" or spec.startswith("blend:"):
        sol = solve_brezis_oswald(d, p.alpha, tol=tol)
        if spec == "separable":
            return separable_solution(sol.u, p, 0.0), sol
        try:
            theta = float(spec.split(":", 1)[1])
        except ValueError:
            raise ValidationError(f"bad blend weight in {spec!r}") from None
        return BarrierPair.from_solution(sol, p).blend(theta), sol
    path = Path(spec)
    if not path.exists():
        raise ValidationError(f"--init: no such file {spec!r} (expected CSV, 'separable' or 'blend:p')")
    return read_csv(path), None


def _run_evolution(args, p, v0, sign):
    from .parabolic import cfl_max_dt, evolve

    if args.dt is None:
        args.dt = 0.5 * cfl_max_dt(v0, p.alpha)
    return evolve(v0, args.T, args.dt, p.alpha, p.mu, sign, args.snapshot_every)


def cmd_evolve(args):
    from .parabolic import Sign

    d = _domain(args)
    p = BernoulliParams(args.alpha, args.gamma, parse_growth_rate(args.mu))
    sign = Sign.parse(args.sign)
    v0, _ = _initial_data(args.init, d, p, args.elliptic_tol)
    trace = _run_evolution(args, p, v0, sign)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = []
    for k, g in enumerate(trace.snapshots):
        files.append(write_csv(g, out / f"snapshot_{k:05d}.csv").name)
    dump_json({"config": _config(args), "trace": trace.meta(), "files": files}, out / "trace.json")
    return 0


def cmd_verify_bounds(args):
    from .parabolic import BarrierPair, Sign, verify_sandwich
    from .elliptic import solve_brezis_oswald

    d = _domain(args)
    p = BernoulliParams(args.alpha, args.gamma, parse_growth_rate(args.mu))
    v0, sol = _initial_data(args.init, d, p, args.elliptic_tol)
    if sol is None:
        sol = solve_brezis_oswald(Domain.of(v0), p.alpha, tol=args.elliptic_tol)
    trace = _run_evolution(args, p, v0, Sign.GROWTH)
    rep = verify_sandwich(trace, BarrierPair.from_solution(sol, p))
    out = {"config": _config(args), "trace": {k: v for k, v in trace.meta().items() if k != "times"},
           "sigma": sol.sigma, "c": sol.c}
    out.update(rep.as_dict())
    dump_json(out, args.report)
    return 0 if rep.ok else 2


def cmd_compare(args):
    from .parabolic import Sign, cfl_max_dt, evolve, verify_comparison

    d = _domain(args)
    mu1, mu2 = parse_growth_rate(args.mu1), parse_growth_rate(args.mu2)
    if not 0 <= args.ratio <= 1:
        raise ValidationError("--ratio must lie in [0, 1] so that v0 <= w0")
    p2 = BernoulliParams(args.alpha, args.gamma, mu2)
    w0, _ = _initial_data(args.init, d, p2, args.elliptic_tol)
    v0 = w0.with_data(args.ratio * w0.data)
    if args.dt is None:
        args.dt = 0.5 * cfl_max_dt(w0, args.alpha)
    dt = args.dt
    sign = Sign.parse(args.sign)
    tv = evolve(v0, args.T, dt, args.alpha, mu1, sign, args.snapshot_every)
    tw = evolve(w0, args.T, dt, args.alpha, mu2, sign, args.snapshot_every)
    rep = verify_comparison(tv, tw)
    out = {"config": _config(args), "dt": dt}
    out.update(rep.as_dict())
    out["violations"] = int(rep.max_violation > rep.tol)
    dump_json(out, args.report)
    return 0 if rep.ok else 2


def cmd_denoise(args):
    from .denoise import DenoiseParams, read_png, run_pipeline, sample_image, write_png

    seed = args.seed
    if os.environ.get(SEED_ENV):
        try:
            seed = int(os.environ[SEED_ENV])
        except ValueError:
            raise ValidationError(f"{SEED_ENV} must be an integer") from None
    img = read_png(args.input) if args.input else sample_image()
    p = DenoiseParams(sigma_noise=args.sigma, seed=seed)
    methods = ("gm", "pm") if args.method == "both" else (args.method,)
    rep = run_pipeline(img, p, methods=methods, threads=args.threads)
    if args.out_dir:
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for name, im in rep.images.items():
            write_png(im, out / f"{name}.png")
    doc = rep.as_dict()
    doc["config"] = _config(args)
    doc["config"]["seed"] = seed
    doc["input"] = args.input or "bundled:ihc.png"
    dump_json(doc, args.report)
    return 0


def cmd_bench(args):
    from .bench import compare_backends, run_bench

    if args.compare_backends:
        doc = compare_backends(args)
    else:
        doc = run_bench(size=args.size, elliptic_n=args.elliptic_n, steps=args.steps,
                        methods=args.methods, threads=args.threads)
    doc["config"] = _config(args)
    dump_json(doc, args.report)
    return 0


# --------------------------------------------------------------- parser ----

def build_parser():
    parser = _Parser(prog="bernoulli-diffuse",
                     description="Porous-medium diffusion with Bernoulli temporal factor.")
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("--threads", type=_positive_int, default=1)
    parser.add_argument("--log-level", default="WARNING",
                        choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("solve-elliptic", help="solve -Lap u = u^(1/alpha) by monotone iteration")
    _add_grid_flags(p)
    p.add_argument("--alpha", type=float, default=4.0)
    p.add_argument("--tol", type=_positive_float, default=1e-10)
    p.add_argument("--max-iter", type=_positive_int, default=500)
    p.add_argument("--out", type=Path, default=None, help="CSV file for u")
    p.add_argument("--report", default=None, help="JSON report path (default stdout)")
    p.set_defaults(func=cmd_solve_elliptic)

    p = sub.add_parser("bernoulli-eval", help="evaluate the temporal factor S(t)")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--gamma", type=_positive_float, required=True)
    p.add_argument("--mu", required=True)
    p.add_argument("--t", type=float, nargs="+", required=True)
    p.add_argument("--oracle-dt", type=_positive_float, default=None,
                   help="also report an RK4 reference with this step (JSON only)")
    p.add_argument("--report", default=None)
    p.set_defaults(func=cmd_bernoulli_eval)

    p = sub.add_parser("evolve", help="time-march the parabolic problem")
    _add_evolution_flags(p, "separable")
    p.add_argument("--mu", default="constant:1")
    p.add_argument("--sign", default="growth", choices=["growth", "absorption"])
    p.add_argument("--out-dir", type=Path, required=True)
    p.set_defaults(func=cmd_evolve)

    p = sub.add_parser("verify-bounds", help="check the sub/supersolution sandwich")
    _add_evolution_flags(p, "blend:0.125")
    p.add_argument("--mu", default="constant:1")
    p.add_argument("--report", default=None)
    p.set_defaults(func=cmd_verify_bounds)

    p = sub.add_parser("compare", help="check the comparison principle for ordered data")
    _add_evolution_flags(p, "separable")
    p.add_argument("--mu1", required=True, help="growth rate of the lower solution")
    p.add_argument("--mu2", required=True, help="growth rate of the upper solution")
    p.add_argument("--ratio", type=float, default=1.0, help="v0 = ratio * w0")
    p.add_argument("--sign", default="growth", choices=["growth", "absorption"])
    p.add_argument("--report", default=None)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("denoise", help="GM vs Perona-Malik denoising with metrics")
    p.add_argument("--input", type=Path, default=None, help="PNG (default: bundled test image)")
    p.add_argument("--sigma", type=float, default=0.18)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--method", default="both", choices=["gm", "pm", "both"])
    p.add_argument("--out-dir", type=Path, default=None)
    p.add_argument("--report", default=None)
    p.set_defaults(func=cmd_denoise)

    p = sub.add_parser("bench", help="time the main kernels")
    p.add_argument("--size", type=_positive_int, default=512)
    p.add_argument("--elliptic-n", type=_positive_int, default=63)
    p.add_argument("--steps", type=_positive_int, default=100)
    p.add_argument("--methods", nargs="+", default=["gm", "pm"], choices=["gm", "pm"])
    p.add_argument("--compare-backends", action="store_true",
                   help="run once per backend in subprocesses and report speedups")
    p.add_argument("--report", default=None)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    logging.basicConfig(level=getattr(logging, args.log_level), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    log.debug("backend: %s", BACKEND)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
