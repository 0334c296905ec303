"""Closed-form temporal factor S(t) for S' + S**alpha = mu(t) S.

With beta = alpha - 1 and I(t) the integral of mu over [0, t], the substitution
z = S**(-beta) linearises the ODE and gives

    z(t) = gamma**(-beta) * exp(-beta I(t)) + beta * K(t),
    K(t) = int_0^t exp(-beta (I(t) - I(tau))) dtau,

so S(t) = z(t)**(-1/beta). Writing the outer integral as K keeps the integrand
in (0, 1] whenever mu > 0, which is the endpoint-max factoring that prevents
overflow for large alpha * t.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import kernels
from .errors import (DomainError, InstabilityError, SingularityError,
                     UnsupportedError, ValidationError)

SIMPSON_RTOL = 1e-10
SIMPSON_MAX_PANELS = 2 ** 20


class GrowthRate:
    """A positive growth rate mu(t), t >= 0.

    Subclasses are immutable; ``__call__`` accepts scalars or arrays.
    """

    code = None

    def __call__(self, t):
        raise NotImplementedError

    def integral(self, t):
        """int_0^t mu(s) ds, vectorised over t >= 0."""
        raise NotImplementedError

    def running_max(self, t):
        """sup of mu over [0, t]; the monotonicity constant of the iterate scheme."""
        raise NotImplementedError

    def spec(self):
        """Config string that :func:`parse_growth_rate` maps back to this rate."""
        raise NotImplementedError

    def kernel_args(self):
        """(kind, p0, p1, table_t, table_mu) for the compiled kernels."""
        raise NotImplementedError

    def __repr__(self):
        return f"GrowthRate({self.spec()})"


def _positive(name, value):
    value = float(value)
    if not (value > 0 and math.isfinite(value)):
        raise ValidationError(f"{name} must be positive and finite, got {value}")
    return value


_DUMMY = np.zeros(1)


class Constant(GrowthRate):
    code = kernels.MU_CONSTANT

    def __init__(self, mu0):
        self.mu0 = _positive("mu0", mu0)

    def __call__(self, t):
        return self.mu0 + 0.0 * np.asarray(t, dtype=float)

    def integral(self, t):
        return self.mu0 * np.asarray(t, dtype=float)

    def running_max(self, t):
        return self.mu0

    def spec(self):
        return f"constant:{self.mu0!r}"

    def kernel_args(self):
        return self.code, self.mu0, 0.0, _DUMMY, _DUMMY


class RationalDecay(GrowthRate):
    """a / (1 + t)"""

    code = kernels.MU_RATIONAL

    def __init__(self, a):
        self.a = _positive("a", a)

    def __call__(self, t):
        return self.a / (1.0 + np.asarray(t, dtype=float))

    def integral(self, t):
        return self.a * np.log1p(np.asarray(t, dtype=float))

    def running_max(self, t):
        return self.a

    def spec(self):
        return f"rational:{self.a!r}"

    def kernel_args(self):
        return self.code, self.a, 0.0, _DUMMY, _DUMMY


class ExpDecay(GrowthRate):
    """mu0 * exp(-beta t)"""

    code = kernels.MU_EXP

    def __init__(self, mu0, beta):
        self.mu0 = _positive("mu0", mu0)
        self.beta = float(beta)
        if not math.isfinite(self.beta):
            raise ValidationError(f"beta must be finite, got {beta}")

    def __call__(self, t):
        return self.mu0 * np.exp(-self.beta * np.asarray(t, dtype=float))

    def integral(self, t):
        t = np.asarray(t, dtype=float)
        if self.beta == 0.0:
            return self.mu0 * t
        return -self.mu0 * np.expm1(-self.beta * t) / self.beta

    def running_max(self, t):
        return self.mu0 if self.beta >= 0 else float(self(t))

    def spec(self):
        return f"exp:{self.mu0!r},{self.beta!r}"

    def kernel_args(self):
        return self.code, self.mu0, self.beta, _DUMMY, _DUMMY


class Seasonal(GrowthRate):
    """mu0 * (1 + cos(2 pi t))"""

    code = kernels.MU_SEASONAL

    def __init__(self, mu0):
        self.mu0 = _positive("mu0", mu0)

    def __call__(self, t):
        return self.mu0 * (1.0 + np.cos(2.0 * np.pi * np.asarray(t, dtype=float)))

    def integral(self, t):
        t = np.asarray(t, dtype=float)
        return self.mu0 * (t + np.sin(2.0 * np.pi * t) / (2.0 * np.pi))

    def running_max(self, t):
        return 2.0 * self.mu0

    def spec(self):
        return f"seasonal:{self.mu0!r}"

    def kernel_args(self):
        return self.code, self.mu0, 0.0, _DUMMY, _DUMMY


class Tabulated(GrowthRate):
    """Piecewise-linear interpolation of (t, mu) samples, constant outside."""

    code = kernels.MU_TABLE

    def __init__(self, times, values, source=None):
        t = np.array(times, dtype=np.float64).reshape(-1)
        m = np.array(values, dtype=np.float64).reshape(-1)
        if t.size == 0 or t.size != m.size:
            raise ValidationError("tabulated rate needs matching, non-empty t and mu columns")
        if np.any(np.diff(t) <= 0):
            raise ValidationError("tabulated sample times must be strictly increasing")
        if not np.all(np.isfinite(m)) or np.any(m <= 0):
            raise ValidationError("tabulated mu values must be positive and finite")
        t.flags.writeable = False
        m.flags.writeable = False
        self.times = t
        self.values = m
        self.source = source
        # integral at each knot; composite Simpson per segment (exact on linear pieces)
        knots = np.concatenate(([0.0], t[t > 0.0]))
        f = np.interp(knots, t, m)
        fmid = np.interp(0.5 * (knots[1:] + knots[:-1]), t, m)
        seg = np.diff(knots) / 6.0 * (f[:-1] + 4.0 * fmid + f[1:])
        self._knots = knots
        self._cum = np.concatenate(([0.0], np.cumsum(seg)))

    @classmethod
    def from_csv(cls, path):
        path = Path(path)
        try:
            arr = np.loadtxt(path, delimiter=",", comments="#", ndmin=2)
        except ValueError:
            arr = np.loadtxt(path, delimiter=",", comments="#", ndmin=2, skiprows=1)
        if arr.shape[1] != 2:
            raise ValidationError(f"{path}: expected two columns t,mu")
        return cls(arr[:, 0], arr[:, 1], source=str(path))

    def __call__(self, t):
        return np.interp(t, self.times, self.values)

    def integral(self, t):
        t = np.asarray(t, dtype=float)
        k = np.clip(np.searchsorted(self._knots, t, side="right") - 1, 0, len(self._knots) - 1)
        a = self._knots[k]
        fa = np.interp(a, self.times, self.values)
        ft = np.interp(t, self.times, self.values)
        fm = np.interp(0.5 * (a + t), self.times, self.values)
        return self._cum[k] + (t - a) / 6.0 * (fa + 4.0 * fm + ft)

    def running_max(self, t):
        inside = self.values[(self.times > 0.0) & (self.times <= t)]
        return float(max(self(0.0), self(t), inside.max() if inside.size else 0.0))

    def spec(self):
        if self.source is None:
            return "table:<in-memory>"
        return f"table:{self.source}"

    def kernel_args(self):
        return self.code, 0.0, 0.0, self.times, self.values


def parse_growth_rate(text: str) -> GrowthRate:
    """Parse ``constant:1.0``, ``rational:0.3``, ``exp:1.0,0.5``, ``seasonal:1.0``
    or ``table:<path.csv>``."""
    kind, sep, arg = text.partition(":")
    kind = kind.strip().lower()
    if not sep or not arg:
        raise ValidationError(f"growth rate must look like kind:args, got {text!r}")
    if kind == "table":
        return Tabulated.from_csv(arg)
    try:
        nums = [float(x) for x in arg.split(",")]
    except ValueError:
        raise ValidationError(f"bad numeric arguments in growth rate {text!r}") from None
    arity = {"constant": 1, "rational": 1, "exp": 2, "seasonal": 1}
    if kind not in arity:
        raise ValidationError(f"unknown growth rate kind {kind!r}")
    if len(nums) != arity[kind]:
        raise ValidationError(f"{kind} takes {arity[kind]} argument(s), got {len(nums)}")
    if kind == "constant":
        return Constant(*nums)
    if kind == "rational":
        return RationalDecay(*nums)
    if kind == "exp":
        return ExpDecay(*nums)
    return Seasonal(*nums)


@dataclass(frozen=True)
class BernoulliParams:
    alpha: float
    gamma: float
    mu: GrowthRate

    def __post_init__(self):
        if not (self.alpha > 1 and math.isfinite(self.alpha)):
            raise ValidationError(f"alpha must be > 1, got {self.alpha}")
        if not (self.gamma > 0 and math.isfinite(self.gamma)):
            raise ValidationError(f"gamma must be > 0, got {self.gamma}")
        if not isinstance(self.mu, GrowthRate):
            raise ValidationError("mu must be a GrowthRate")

    def as_dict(self):
        return {"alpha": self.alpha, "gamma": self.gamma, "mu": self.mu.spec()}


def integral_mu(mu: GrowthRate, t: float) -> float:
    if t < 0:
        raise DomainError(f"integral_mu needs t >= 0, got {t}")
    return float(mu.integral(t))


def adaptive_simpson(f, a, b, rtol=SIMPSON_RTOL, max_panels=SIMPSON_MAX_PANELS, min_panels=16):
    """Composite Simpson on [a, b], doubling panels until two estimates agree.

    ``f`` must be vectorised. Returns the finer estimate once successive values
    differ by less than ``rtol`` relative, or at ``max_panels``.
    """
    if b == a:
        return 0.0
    n = max(2, min_panels)
    x = np.linspace(a, b, n + 1)
    fx = f(x)

    def simpson(vals, n):
        hh = (b - a) / n
        return hh / 3.0 * (vals[0] + vals[-1] + 4.0 * vals[1:-1:2].sum() + 2.0 * vals[2:-1:2].sum())

    est = simpson(fx, n)
    while n < max_panels:
        n2 = 2 * n
        mids = a + (b - a) * (np.arange(n) + 0.5) / n
        f2 = np.empty(n2 + 1)
        f2[0::2] = fx
        f2[1::2] = f(mids)
        new = simpson(f2, n2)
        fx, n = f2, n2
        if abs(new - est) <= rtol * abs(new):
            return float(new)
        est = new
    return float(est)


def _min_panels(p: BernoulliParams, t):
    # resolve a full seasonal period with >= 8 panels; the other presets are smooth
    return int(2 ** max(4, math.ceil(math.log2(max(t, 1.0) * 8))))


def bracket(p: BernoulliParams, t: float) -> float:
    """z(t) = S(t)**(1 - alpha); must stay positive for S to exist."""
    beta = p.alpha - 1.0
    it = float(p.mu.integral(t))

    def integrand(tau):
        return np.exp(-beta * (it - p.mu.integral(tau)))

    k = adaptive_simpson(integrand, 0.0, t, min_panels=_min_panels(p, t))
    return p.gamma ** (-beta) * math.exp(-beta * it) + beta * k


def eval_S(p: BernoulliParams, t):
    """S(t) from the closed form; vectorised over t."""
    ts = np.asarray(t, dtype=float)
    if np.any(ts < 0):
        raise DomainError("eval_S needs t >= 0")
    out = np.empty(ts.shape)
    flat = out.reshape(-1)
    for k, tk in enumerate(ts.reshape(-1)):
        if tk == 0.0:
            flat[k] = p.gamma
            continue
        z = bracket(p, float(tk))
        if not (z > 0 and math.isfinite(z)):
            raise SingularityError(f"S(t) bracket is nonpositive ({z}) at t = {tk}", t=float(tk))
        flat[k] = z ** (-1.0 / (p.alpha - 1.0))
    return float(out) if out.ndim == 0 else out


def dS_dt(p: BernoulliParams, t):
    """Right-hand side mu(t) S - S**alpha evaluated on the closed form."""
    s = eval_S(p, t)
    return p.mu(t) * s - np.power(s, p.alpha)


def equilibrium(p: BernoulliParams) -> float:
    if not isinstance(p.mu, Constant):
        raise UnsupportedError("equilibrium is only defined for a constant growth rate")
    return p.mu.mu0 ** (1.0 / (p.alpha - 1.0))


def rk4_oracle(p: BernoulliParams, t, dt: float, backend=None):
    """Classical RK4 march of S' = mu S - S**alpha from S(0) = gamma.

    Independent of :func:`eval_S`; ``t`` may be a scalar or an array (one march
    serves all requested times).
    """
    if not dt > 0:
        raise DomainError(f"dt must be positive, got {dt}")
    ts = np.asarray(t, dtype=float)
    if np.any(ts < 0):
        raise DomainError("rk4_oracle needs t >= 0")
    flat = ts.reshape(-1)
    order = np.argsort(flat, kind="stable")
    kind, p0, p1, tt, tm = p.mu.kernel_args()
    march = kernels.get_impl(backend).rk4_march
    vals = march(kind, p0, p1, tt, tm, float(p.alpha), float(p.gamma), float(dt),
                 np.ascontiguousarray(flat[order]))
    if np.any(np.isnan(vals)):
        bad = flat[order][np.argmax(np.isnan(vals))]
        raise InstabilityError(f"RK4 left the positive cone before t = {bad} (dt = {dt})")
    out = np.empty_like(flat)
    out[order] = vals
    return float(out[0]) if ts.ndim == 0 else out.reshape(ts.shape)
