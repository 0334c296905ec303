"""Inner-loop kernels in two flavours: numba-compiled and pure numpy.

Both flavours are always importable from :data:`numpy_impl` and (when numba is
installed) :data:`numba_impl`; the module-level names bind to whichever
backend :mod:`bernoulli_diffuse._backend` selected. Fields are 2-D arrays
indexed ``[j, i]`` (row ``j``, column ``i``).

The five-point sum is always accumulated in the order
``u[j-1] + u[j+1] + u[:, i-1] + u[:, i+1] - 4u`` so the two flavours agree to
the last bit for the stencils.
"""
from types import SimpleNamespace

import numpy as np

from ._backend import BACKEND, HAVE_NUMBA

# growth-rate codes understood by mu_eval
MU_CONSTANT, MU_RATIONAL, MU_EXP, MU_SEASONAL, MU_TABLE = range(5)
TWO_PI = 2.0 * np.pi


# ---------------------------------------------------------------- numpy ----

def integer_exponent(alpha):
    """alpha as an int when it is a small whole number, else -1.

    Whole exponents use exponentiation by squaring in both backends (same
    multiplication order, so identical bits) instead of a libm pow call.
    """
    a = float(alpha)
    if a == int(a) and 1 <= a <= 64:
        return int(a)
    return -1


def _power_np(v, alpha, n):
    if n < 0:
        return v ** alpha
    result = None
    base = v
    while n:
        if n & 1:
            result = base if result is None else result * base
        n >>= 1
        if n:
            base = base * base
    return result


def _lap_dirichlet_np(u, h2):
    p = np.pad(u, 1)
    s = p[:-2, 1:-1] + p[2:, 1:-1] + p[1:-1, :-2] + p[1:-1, 2:] - 4.0 * u
    return s / h2


def _lap_periodic_np(u, h2):
    s = (np.roll(u, 1, axis=0) + np.roll(u, -1, axis=0)
         + np.roll(u, 1, axis=1) + np.roll(u, -1, axis=1) - 4.0 * u)
    return s / h2


def _gm_diffuse_np(u, alpha, dt, mus):
    v = np.array(u, dtype=np.float64, copy=True)
    n_int = integer_exponent(alpha)
    for m in mus:
        va = _power_np(v, alpha, n_int)
        lap = (np.roll(va, 1, axis=0) + np.roll(va, -1, axis=0)
               + np.roll(va, 1, axis=1) + np.roll(va, -1, axis=1) - 4.0 * va)
        v = np.clip(v + dt * (lap - m * v), 0.0, 1.0)
    return v


def _pm_diffuse_np(u, dt, steps, k):
    v = np.array(u, dtype=np.float64, copy=True)
    k2 = k * k
    for _ in range(steps):
        dxf = np.roll(v, -1, axis=1) - v
        dxb = v - np.roll(v, 1, axis=1)
        dyf = np.roll(v, -1, axis=0) - v
        dyb = v - np.roll(v, 1, axis=0)
        div = (np.exp(-(dxf * dxf) / k2) * dxf - np.exp(-(dxb * dxb) / k2) * dxb
               + np.exp(-(dyf * dyf) / k2) * dyf - np.exp(-(dyb * dyb) / k2) * dyb)
        v = np.clip(v + dt * div, 0.0, 1.0)
    return v


def _mu_eval_np(kind, p0, p1, tt, tm, t):
    if kind == MU_CONSTANT:
        return p0
    if kind == MU_RATIONAL:
        return p0 / (1.0 + t)
    if kind == MU_EXP:
        return p0 * np.exp(-p1 * t)
    if kind == MU_SEASONAL:
        return p0 * (1.0 + np.cos(TWO_PI * t))
    return float(np.interp(t, tt, tm))


def _rk4_march_np(kind, p0, p1, tt, tm, alpha, gamma, dt, targets):
    """RK4 for S' = mu(t) S - S**alpha, S(0) = gamma, sampled at sorted targets.

    Returns an array with NaN from the first target at which the march left
    the positive cone.
    """
    out = np.full(targets.shape[0], np.nan)

    def rhs(t, s):
        return _mu_eval_np(kind, p0, p1, tt, tm, t) * s - s ** alpha

    def step(t, s, h):
        k1 = rhs(t, s)
        k2 = rhs(t + 0.5 * h, s + 0.5 * h * k1)
        k3 = rhs(t + 0.5 * h, s + 0.5 * h * k2)
        k4 = rhs(t + h, s + h * k3)
        return s + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

    s = gamma
    n = 0
    for idx in range(targets.shape[0]):
        tau = targets[idx]
        n_full = int(np.floor(tau / dt + 1e-9))
        while n < n_full:
            s = step(n * dt, s, dt)
            n += 1
            if not (s > 0.0) or not np.isfinite(s):
                return out
        rem = tau - n * dt
        val = s
        if rem > 0.0:
            val = step(n * dt, s, rem)
        if not (val > 0.0) or not np.isfinite(val):
            return out
        out[idx] = val
    return out


numpy_impl = SimpleNamespace(
    name="numpy",
    lap_dirichlet=_lap_dirichlet_np,
    lap_periodic=_lap_periodic_np,
    gm_diffuse=_gm_diffuse_np,
    pm_diffuse=_pm_diffuse_np,
    rk4_march=_rk4_march_np,
)


# ---------------------------------------------------------------- numba ----

numba_impl = None

if HAVE_NUMBA:
    from numba import njit

    @njit(cache=True, nogil=True)
    def _lap_dirichlet_nb(u, h2):
        ny, nx = u.shape
        out = np.empty_like(u)
        for j in range(ny):
            for i in range(nx):
                up = u[j - 1, i] if j > 0 else 0.0
                dn = u[j + 1, i] if j < ny - 1 else 0.0
                lf = u[j, i - 1] if i > 0 else 0.0
                rt = u[j, i + 1] if i < nx - 1 else 0.0
                out[j, i] = (up + dn + lf + rt - 4.0 * u[j, i]) / h2
        return out

    @njit(cache=True, nogil=True)
    def _lap_periodic_nb(u, h2):
        ny, nx = u.shape
        out = np.empty_like(u)
        for j in range(ny):
            jm = j - 1 if j > 0 else ny - 1
            jp = j + 1 if j < ny - 1 else 0
            for i in range(nx):
                im = i - 1 if i > 0 else nx - 1
                ip = i + 1 if i < nx - 1 else 0
                out[j, i] = (u[jm, i] + u[jp, i] + u[j, im] + u[j, ip]
                             - 4.0 * u[j, i]) / h2
        return out

    @njit(cache=True, nogil=True, inline="always")
    def _power_nb(x, alpha, n):
        if n < 0:
            return x ** alpha
        result = 1.0
        first = True
        base = x
        while n:
            if n & 1:
                if first:
                    result = base
                    first = False
                else:
                    result = result * base
            n >>= 1
            if n:
                base = base * base
        return result

    @njit(cache=True, nogil=True)
    def _gm_diffuse_nb(u, alpha, dt, mus, n_int):
        ny, nx = u.shape
        v = u.astype(np.float64).copy()
        va = np.empty_like(v)
        for n in range(mus.shape[0]):
            m = mus[n]
            for j in range(ny):
                for i in range(nx):
                    va[j, i] = _power_nb(v[j, i], alpha, n_int)
            # in place: the update at (j, i) reads only va and v[j, i]
            for j in range(ny):
                jm = j - 1 if j > 0 else ny - 1
                jp = j + 1 if j < ny - 1 else 0
                for i in range(nx):
                    im = i - 1 if i > 0 else nx - 1
                    ip = i + 1 if i < nx - 1 else 0
                    lap = va[jm, i] + va[jp, i] + va[j, im] + va[j, ip] - 4.0 * va[j, i]
                    x = v[j, i] + dt * (lap - m * v[j, i])
                    if x < 0.0:
                        x = 0.0
                    elif x > 1.0:
                        x = 1.0
                    v[j, i] = x
        return v

    @njit(cache=True, nogil=True)
    def _pm_diffuse_nb(u, dt, steps, k):
        ny, nx = u.shape
        v = u.astype(np.float64).copy()
        w = np.empty_like(v)
        k2 = k * k
        for _ in range(steps):
            for j in range(ny):
                jm = j - 1 if j > 0 else ny - 1
                jp = j + 1 if j < ny - 1 else 0
                for i in range(nx):
                    im = i - 1 if i > 0 else nx - 1
                    ip = i + 1 if i < nx - 1 else 0
                    c = v[j, i]
                    dxf = v[j, ip] - c
                    dxb = c - v[j, im]
                    dyf = v[jp, i] - c
                    dyb = c - v[jm, i]
                    div = (np.exp(-(dxf * dxf) / k2) * dxf - np.exp(-(dxb * dxb) / k2) * dxb
                           + np.exp(-(dyf * dyf) / k2) * dyf - np.exp(-(dyb * dyb) / k2) * dyb)
                    x = c + dt * div
                    if x < 0.0:
                        x = 0.0
                    elif x > 1.0:
                        x = 1.0
                    w[j, i] = x
            v, w = w, v
        return v

    @njit(cache=True)
    def _mu_eval_nb(kind, p0, p1, tt, tm, t):
        if kind == MU_CONSTANT:
            return p0
        if kind == MU_RATIONAL:
            return p0 / (1.0 + t)
        if kind == MU_EXP:
            return p0 * np.exp(-p1 * t)
        if kind == MU_SEASONAL:
            return p0 * (1.0 + np.cos(TWO_PI * t))
        return np.interp(t, tt, tm)

    @njit(cache=True)
    def _rk4_step_nb(kind, p0, p1, tt, tm, alpha, t, s, h):
        k1 = _mu_eval_nb(kind, p0, p1, tt, tm, t) * s - s ** alpha
        s2 = s + 0.5 * h * k1
        k2 = _mu_eval_nb(kind, p0, p1, tt, tm, t + 0.5 * h) * s2 - s2 ** alpha
        s3 = s + 0.5 * h * k2
        k3 = _mu_eval_nb(kind, p0, p1, tt, tm, t + 0.5 * h) * s3 - s3 ** alpha
        s4 = s + h * k3
        k4 = _mu_eval_nb(kind, p0, p1, tt, tm, t + h) * s4 - s4 ** alpha
        return s + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

    @njit(cache=True)
    def _rk4_march_nb(kind, p0, p1, tt, tm, alpha, gamma, dt, targets):
        out = np.full(targets.shape[0], np.nan)
        s = gamma
        n = 0
        for idx in range(targets.shape[0]):
            tau = targets[idx]
            n_full = int(np.floor(tau / dt + 1e-9))
            while n < n_full:
                s = _rk4_step_nb(kind, p0, p1, tt, tm, alpha, n * dt, s, dt)
                n += 1
                if not (s > 0.0) or not np.isfinite(s):
                    return out
            rem = tau - n * dt
            val = s
            if rem > 0.0:
                val = _rk4_step_nb(kind, p0, p1, tt, tm, alpha, n * dt, s, rem)
            if not (val > 0.0) or not np.isfinite(val):
                return out
            out[idx] = val
        return out

    def _gm_diffuse_nb_entry(u, alpha, dt, mus):
        return _gm_diffuse_nb(u, float(alpha), float(dt), mus, integer_exponent(alpha))

    numba_impl = SimpleNamespace(
        name="numba",
        lap_dirichlet=_lap_dirichlet_nb,
        lap_periodic=_lap_periodic_nb,
        gm_diffuse=_gm_diffuse_nb_entry,
        pm_diffuse=_pm_diffuse_nb,
        rk4_march=_rk4_march_nb,
    )


def get_impl(name=None):
    """Return the kernel namespace for ``name`` ('numba'/'numpy'), default active."""
    name = name or BACKEND
    if name == "numba":
        if numba_impl is None:
            raise RuntimeError("numba backend requested but numba is not installed")
        return numba_impl
    if name == "numpy":
        return numpy_impl
    raise ValueError(f"unknown backend {name!r}")


active = get_impl()
lap_dirichlet = active.lap_dirichlet
lap_periodic = active.lap_periodic
gm_diffuse = active.gm_diffuse
pm_diffuse = active.pm_diffuse
rk4_march = active.rk4_march
