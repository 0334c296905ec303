"""Wall-clock timings of the main workloads, for performance tracking."""
from __future__ import annotations

import json
import os
import subprocess
import sys
import time

import numpy as np

from ._backend import BACKEND, BACKEND_ENV


def _timed(fn):
    t0 = time.perf_counter()
    out = fn()
    return out, time.perf_counter() - t0


def warmup():
    """Call every kernel once on tiny inputs so JIT compilation is not timed."""
    from . import kernels

    def run():
        u = np.full((4, 4), 0.5)
        kernels.lap_dirichlet(u, 1.0)
        kernels.lap_periodic(u, 1.0)
        kernels.gm_diffuse(u, 4.0, 0.01, np.zeros(2))
        kernels.pm_diffuse(u, 0.1, 2, 0.1)

    return _timed(run)[1]


def run_bench(size=512, elliptic_n=63, steps=100, methods=("gm", "pm"), threads=1):
    """Time an elliptic solve, ``steps`` parabolic steps and one denoise per method.

    Numerical outputs are reported next to the timings so that repeated runs
    can be checked for identical results.
    """
    from .bernoulli import BernoulliParams, Constant
    from .denoise import DenoiseParams, denoise_gm, denoise_pm, add_gaussian_noise, metrics, sample_image
    from .elliptic import solve_brezis_oswald
    from .grid import Domain
    from .parabolic import Sign, cfl_max_dt, evolve, separable_solution

    t_warm = warmup()
    d = Domain.unit_square(elliptic_n)
    sol, t_ell = _timed(lambda: solve_brezis_oswald(d, 4.0, tol=1e-8))
    report = {
        "backend": BACKEND,
        "warmup_seconds": t_warm,
        "elliptic": {"n": elliptic_n, "alpha": 4.0, "tol": 1e-8, "seconds": t_ell,
                     "iterations": sol.iterations, "final_residual": sol.final_residual},
    }

    p = BernoulliParams(4.0, 1.0, Constant(1.0))
    v0 = separable_solution(sol.u, p, 0.0)
    dt = 0.5 * cfl_max_dt(v0, p.alpha)
    trace, t_par = _timed(lambda: evolve(v0, steps * dt, dt, p.alpha, p.mu, Sign.GROWTH, steps))
    report["parabolic"] = {"n": elliptic_n, "steps": trace.steps, "dt": dt, "seconds": t_par,
                           "final_max": float(trace.final.data.max())}

    img = sample_image()
    if size != img.shape[0] or size != img.shape[1]:
        reps = -(-size // min(img.shape[:2]))
        img = np.tile(img, (reps, reps, 1))[:size, :size]
    dp = DenoiseParams()
    noisy = add_gaussian_noise(img, dp.sigma_noise, dp.seed)
    fns = {"gm": denoise_gm, "pm": denoise_pm}
    report["denoise"] = {}
    for m in methods:
        out, secs = _timed(lambda: fns[m](noisy, dp, threads))
        report["denoise"][m] = {"size": size, "seconds": secs, "threads": threads,
                                "metrics": metrics(img, out)}
    return report


def compare_backends(args):
    """Run the bench once per backend in a fresh interpreter and report speedups."""
    runs = {}
    for name in ("numba", "numpy"):
        cmd = [sys.executable, "-m", "bernoulli_diffuse", "--threads", str(args.threads), "bench",
               "--size", str(args.size), "--elliptic-n", str(args.elliptic_n),
               "--steps", str(args.steps), "--methods", *args.methods]
        env = dict(os.environ, **{BACKEND_ENV: name})
        done = subprocess.run(cmd, env=env, capture_output=True, text=True, check=True)
        runs[name] = json.loads(done.stdout)
        runs[name].pop("config", None)
    speedup = {
        "elliptic": runs["numpy"]["elliptic"]["seconds"] / runs["numba"]["elliptic"]["seconds"],
        "parabolic": runs["numpy"]["parabolic"]["seconds"] / runs["numba"]["parabolic"]["seconds"],
    }
    for m in args.methods:
        speedup[f"denoise_{m}"] = (runs["numpy"]["denoise"][m]["seconds"]
                                   / runs["numba"]["denoise"][m]["seconds"])
    return {"runs": runs, "speedup_numba_over_numpy": speedup}
