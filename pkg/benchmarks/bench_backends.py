"""Kernel-level timing of the numba and pure-numpy backends.

    python3 benchmarks/bench_backends.py [--size 512] [--repeat 3]

Both implementations are imported side by side, so no environment flag is
needed. Each kernel is warmed up once (JIT compile) and then timed as the
best of ``--repeat`` runs. The maximum absolute difference between backends
is printed alongside the timings.
"""
import argparse
import json
import time

import numpy as np

from bernoulli_diffuse import kernels
from bernoulli_diffuse.denoise import DenoiseParams, add_gaussian_noise, gm_rates, sample_image


def best_of(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return out, best


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--size", type=int, default=512)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if kernels.numba_impl is None:
        raise SystemExit("numba is not installed; nothing to compare")

    p = DenoiseParams()
    img = sample_image()[: args.size, : args.size, 0]
    u = np.ascontiguousarray(add_gaussian_noise(np.dstack([img] * 3), p.sigma_noise, p.seed)[:, :, 0])
    mus = gm_rates(p)
    h2 = 1.0 / (u.shape[0] + 1) ** 2
    cases = {
        "lap_dirichlet x100": lambda impl: [impl.lap_dirichlet(u, h2) for _ in range(100)][-1],
        "gm_diffuse": lambda impl: impl.gm_diffuse(u, p.alpha_gm, p.dt_gm, mus),
        "pm_diffuse": lambda impl: impl.pm_diffuse(u, p.dt_pm, p.steps_pm, p.K_pm),
    }
    rows = {}
    for name, case in cases.items():
        case(kernels.numba_impl)  # compile
        a, t_nb = best_of(lambda: case(kernels.numba_impl), args.repeat)
        b, t_np = best_of(lambda: case(kernels.numpy_impl), args.repeat)
        rows[name] = {"numba_s": t_nb, "numpy_s": t_np, "speedup": t_np / t_nb,
                      "max_abs_diff": float(np.max(np.abs(a - b)))}
        print(f"{name:20s} numba {t_nb:8.4f}s  numpy {t_np:8.4f}s  "
              f"x{t_np / t_nb:5.2f}  diff {rows[name]['max_abs_diff']:.1e}")
    print(json.dumps({"size": list(u.shape), "kernels": rows}, sort_keys=True))


if __name__ == "__main__":
    main()
