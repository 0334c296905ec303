"""Explicit time marching of dv/dt = Lap(v**alpha) +/- mu(t) v and the
order-preservation checks built on it.

Every step is forward Euler followed by clipping at zero. The comparison,
sandwich and monotone-iteration checks only look at recorded snapshots; the
reports say how many were inspected.
"""
from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .bernoulli import BernoulliParams, GrowthRate, eval_S
from .elliptic import EllipticSolution, root
from .errors import ConvergenceError, PreconditionError, StabilityError, ValidationError
from .grid import BC, Grid2D, laplacian

log = logging.getLogger(__name__)

CFL_EPS = 1e-12
COMPARISON_TOL = 1e-10
SANDWICH_TOL = 1e-8


class Sign(enum.Enum):
    GROWTH = 1
    ABSORPTION = -1

    @classmethod
    def parse(cls, text):
        try:
            return cls[str(text).upper()]
        except KeyError:
            raise ValidationError(f"sign must be growth or absorption, got {text!r}") from None


@dataclass
class EvolutionTrace:
    times: list
    snapshots: list
    dt: float
    alpha: float
    mu: GrowthRate
    sign: Sign = Sign.GROWTH
    steps: int = 0

    @property
    def final(self):
        return self.snapshots[-1]

    def stack(self):
        return np.stack([g.array for g in self.snapshots])

    def meta(self):
        return {"times": [float(t) for t in self.times], "dt": self.dt, "alpha": self.alpha,
                "mu": self.mu.spec(), "sign": self.sign.name.lower(), "steps": self.steps}


def cfl_max_dt(v: Grid2D, alpha: float) -> float:
    """h^2 / (4 alpha max(v)^(alpha-1) + eps): forward-Euler bound for the
    linearised diffusivity alpha v^(alpha-1)."""
    vmax = max(float(np.max(v.data)), 0.0)
    return v.h * v.h / (4.0 * alpha * vmax ** (alpha - 1.0) + CFL_EPS)


def _rhs(v: Grid2D, t, alpha, mu, sign):
    a = v.array
    lap = laplacian(v.with_data(np.power(a, alpha))).array
    return lap + sign.value * float(mu(t)) * a


def step_explicit(v: Grid2D, t: float, dt: float, alpha: float, mu: GrowthRate,
                  sign: Sign = Sign.GROWTH) -> Grid2D:
    if np.any(v.data < 0):
        raise ValidationError("step_explicit needs v >= 0")
    limit = cfl_max_dt(v, alpha)
    if dt > limit:
        raise StabilityError(
            f"dt = {dt:.6g} exceeds the explicit stability bound {limit:.6g} at t = {t:.6g}",
            dt=dt, dt_max=limit)
    new = v.array + dt * _rhs(v, t, alpha, mu, sign)
    return v.with_data(np.maximum(new, 0.0))


def _time_grid(T, dt):
    """Step start times and sizes covering [0, T]; the last step may be short."""
    if T < 0 or not dt > 0:
        raise ValidationError(f"need T >= 0 and dt > 0, got T = {T}, dt = {dt}")
    n = int(math.ceil(T / dt - 1e-9)) if T > 0 else 0
    starts = np.arange(n) * dt
    sizes = np.full(n, dt)
    if n:
        sizes[-1] = T - starts[-1]
    return starts, sizes


def evolve(v0: Grid2D, T: float, dt: float, alpha: float, mu: GrowthRate,
           sign: Sign = Sign.GROWTH, snapshot_every: int = 1) -> EvolutionTrace:
    """March ``v0`` to time T, recording every ``snapshot_every`` steps plus t = 0, T."""
    if np.any(v0.data < 0):
        raise ValidationError("evolve needs v0 >= 0")
    if snapshot_every < 1:
        raise ValidationError("snapshot_every must be >= 1")
    starts, sizes = _time_grid(T, dt)
    trace = EvolutionTrace([0.0], [v0], float(dt), float(alpha), mu, sign)
    v = v0
    for n, (t, h) in enumerate(zip(starts, sizes), start=1):
        try:
            v = step_explicit(v, float(t), float(h), alpha, mu, sign)
        except StabilityError as exc:
            exc.partial = trace
            raise
        trace.steps = n
        if n % snapshot_every == 0 or n == len(starts):
            trace.times.append(float(T) if n == len(starts) else float(n * dt))
            trace.snapshots.append(v)
    return trace


def separable_solution(u: Grid2D, p: BernoulliParams, t: float) -> Grid2D:
    """S(t) * u^(1/alpha)."""
    return u.with_data(eval_S(p, t) * root(u.data, p.alpha))


# ------------------------------------------------------------- checking ----

@dataclass
class ComparisonReport:
    max_violation: float
    location: tuple | None
    snapshots_checked: int
    tol: float = COMPARISON_TOL

    @property
    def ok(self):
        return self.max_violation <= self.tol

    def as_dict(self):
        return {"max_violation": self.max_violation, "argmax": self.location,
                "snapshots_checked": self.snapshots_checked, "tol": self.tol, "ok": self.ok}


def _argmax_location(diff_stack, times):
    k, j, i = np.unravel_index(int(np.argmax(diff_stack)), diff_stack.shape)
    return {"i": int(i), "j": int(j), "t": float(times[k])}


def verify_comparison(trace_v: EvolutionTrace, trace_w: EvolutionTrace,
                      tol: float = COMPARISON_TOL) -> ComparisonReport:
    """Check v <= w + tol at every common snapshot."""
    problems = []
    if not trace_v.snapshots[0].same_lattice(trace_w.snapshots[0]):
        problems.append("traces live on different lattices")
    if len(trace_v.times) != len(trace_w.times) or not np.allclose(trace_v.times, trace_w.times, rtol=0, atol=1e-12):
        problems.append("snapshot times differ")
    if trace_v.dt != trace_w.dt:
        problems.append(f"time steps differ ({trace_v.dt} vs {trace_w.dt})")
    if trace_v.alpha != trace_w.alpha or trace_v.sign != trace_w.sign:
        problems.append("traces use different alpha or sign")
    if not problems:
        gap0 = trace_v.snapshots[0].data - trace_w.snapshots[0].data
        if np.max(gap0) > 0:
            problems.append(f"initial data not ordered: max(v0 - w0) = {np.max(gap0):.3e}")
        ts = np.union1d(np.linspace(0.0, trace_v.times[-1], 1001), trace_v.times)
        dmu = trace_v.mu(ts) - trace_w.mu(ts)
        if np.max(dmu) > 0:
            k = int(np.argmax(dmu))
            problems.append(f"growth rates not ordered: mu_v - mu_w = {dmu[k]:.3e} at t = {ts[k]:.4g}")
    if problems:
        raise PreconditionError("comparison check rejected: " + "; ".join(problems))
    diff = trace_v.stack() - trace_w.stack()
    worst = float(np.max(diff))
    return ComparisonReport(worst, _argmax_location(diff, trace_v.times), len(trace_v.times), tol)


@dataclass
class SandwichReport:
    max_lower_violation: float
    max_upper_violation: float
    lower_argmax: dict
    upper_argmax: dict
    min_lower_margin: float
    min_upper_margin: float
    snapshots_checked: int
    tol: float = SANDWICH_TOL

    @property
    def ok(self):
        return self.max_lower_violation <= self.tol and self.max_upper_violation <= self.tol

    def as_dict(self):
        return {
            "max_lower_violation": self.max_lower_violation,
            "max_upper_violation": self.max_upper_violation,
            "argmax_lower": self.lower_argmax,
            "argmax_upper": self.upper_argmax,
            "min_lower_margin": self.min_lower_margin,
            "min_upper_margin": self.min_upper_margin,
            "snapshots_checked": self.snapshots_checked,
            "tol": self.tol,
            "ok": self.ok,
            "checked_on": "snapshots",
        }


@dataclass(frozen=True)
class BarrierPair:
    """Spatial barriers u_- <= u_+ and the Bernoulli data that moves them in time."""

    u_minus: Grid2D
    u_plus: Grid2D
    params: BernoulliParams

    @classmethod
    def from_solution(cls, sol: EllipticSolution, params: BernoulliParams):
        if abs(sol.alpha - params.alpha) > 0:
            raise ValidationError("elliptic solution and Bernoulli params use different alpha")
        return cls(sol.sub, sol.sup, params)

    def profiles(self):
        a = self.params.alpha
        return root(self.u_minus.array, a), root(self.u_plus.array, a)

    def at(self, times):
        """Lower and upper barrier stacks at ``times``, shaped (len(times), ny, nx)."""
        s = np.atleast_1d(eval_S(self.params, np.asarray(times, dtype=float)))
        lo, hi = self.profiles()
        return s[:, None, None] * lo, s[:, None, None] * hi

    def blend(self, theta):
        """(1 - theta) v_-(., 0) + theta v_+(., 0); theta scalar or (ny, nx) in [0, 1]."""
        theta = np.asarray(theta, dtype=float)
        if np.any(theta < 0) or np.any(theta > 1):
            raise ValidationError("blend weight must lie in [0, 1]")
        lo, hi = self.profiles()
        g = self.params.gamma
        return self.u_minus.with_data((1.0 - theta) * g * lo + theta * g * hi)


def verify_sandwich(trace: EvolutionTrace, sol: EllipticSolution | BarrierPair,
                    p: BernoulliParams | None = None, tol: float = SANDWICH_TOL) -> SandwichReport:
    """Check S(t) u_-^(1/alpha) - tol <= v <= S(t) u_+^(1/alpha) + tol on all snapshots."""
    barriers = sol if isinstance(sol, BarrierPair) else BarrierPair.from_solution(sol, p)
    p = barriers.params
    if trace.sign is not Sign.GROWTH:
        raise PreconditionError("sandwich bounds apply to the growth equation only")
    if trace.alpha != p.alpha:
        raise PreconditionError(f"trace alpha {trace.alpha} differs from barrier alpha {p.alpha}")
    if not trace.snapshots[0].same_lattice(barriers.u_minus):
        raise PreconditionError("trace and barriers live on different lattices")
    ts = np.asarray(trace.times)
    mu_gap = np.max(np.abs(trace.mu(ts) - p.mu(ts)))
    if mu_gap > 1e-12:
        raise PreconditionError("trace and barriers use different growth rates")
    lower, upper = barriers.at(ts)
    v = trace.stack()
    lo_gap = lower - v
    hi_gap = v - upper
    if np.max(lo_gap[0]) > 1e-12 or np.max(hi_gap[0]) > 1e-12:
        raise PreconditionError(
            "initial data is not between the barriers "
            f"(lower excess {np.max(lo_gap[0]):.3e}, upper excess {np.max(hi_gap[0]):.3e})")
    return SandwichReport(
        max_lower_violation=float(np.max(lo_gap)),
        max_upper_violation=float(np.max(hi_gap)),
        lower_argmax=_argmax_location(lo_gap, ts),
        upper_argmax=_argmax_location(hi_gap, ts),
        min_lower_margin=float(np.min(-lo_gap)),
        min_upper_margin=float(np.min(-hi_gap)),
        snapshots_checked=len(ts),
        tol=tol,
    )


# ---------------------------------------------------- monotone iteration ----

@dataclass
class MonotoneResult:
    trace: EvolutionTrace
    iterations: int
    gap_history: list = field(default_factory=list)
    # most negative increment against the expected direction over all sweeps
    worst_order_increment: float = 0.0
    direction: str = "lower"


def monotonicity_constant(mu: GrowthRate, t):
    """c(t) = max(0, sup_{s <= t} |mu(s)|) for positive rates."""
    return max(0.0, float(mu.running_max(t)))


def monotone_iterate(v0: Grid2D, T: float, dt: float, alpha: float, mu: GrowthRate,
                     barriers: BarrierPair, m_max: int = 100, tol: float = 1e-6,
                     direction: str = "lower", snapshot_every: int = 1) -> MonotoneResult:
    """Lagged monotone iteration started from one of the barrier functions.

    Sweep m marches
        v_m' = Lap(v_m^alpha) - c(t) v_m + (c(t) + mu(t)) v_{m-1}
    explicitly from v0, with v_0 the lower (``direction="lower"``) or upper
    barrier. Stops when the sup-norm of v_m - v_{m-1} over the whole time grid
    drops below ``tol``.
    """
    if direction not in ("lower", "upper"):
        raise ValidationError("direction must be 'lower' or 'upper'")
    if np.any(v0.data < 0):
        raise ValidationError("monotone_iterate needs v0 >= 0")
    if not v0.same_lattice(barriers.u_minus):
        raise PreconditionError("initial data and barriers live on different lattices")
    if barriers.params.alpha != alpha:
        raise PreconditionError("barrier alpha differs from the iteration alpha")
    starts, sizes = _time_grid(T, dt)
    times = np.concatenate((starts, [float(T)])) if len(starts) else np.array([0.0])
    lower, upper = barriers.at(times)
    x0 = v0.array
    if np.max(lower[0] - x0) > 1e-12 or np.max(x0 - upper[0]) > 1e-12:
        raise PreconditionError("initial data is not between the barriers")
    prev = lower if direction == "lower" else upper
    sgn = 1.0 if direction == "lower" else -1.0
    cs = np.array([monotonicity_constant(mu, t) for t in starts])
    ms = np.asarray(mu(starts), dtype=float).reshape(-1) if len(starts) else np.zeros(0)
    if v0.bc is not BC.DIRICHLET_ZERO:
        raise PreconditionError("monotone_iterate works on zero-Dirichlet grids")
    h2 = v0.h * v0.h
    gaps = []
    worst = np.inf
    for m in range(1, m_max + 1):
        cur = np.empty_like(prev)
        cur[0] = x0
        v = x0
        for n in range(len(starts)):
            limit = h2 / (4.0 * alpha * max(float(v.max()), 0.0) ** (alpha - 1.0) + CFL_EPS)
            if sizes[n] > limit:
                raise StabilityError(
                    f"dt = {sizes[n]:.6g} exceeds the stability bound {limit:.6g} in sweep {m}",
                    dt=sizes[n], dt_max=limit)
            lap = kernels.lap_dirichlet(np.power(v, alpha), h2)
            v = v + sizes[n] * (lap - cs[n] * v + (cs[n] + ms[n]) * prev[n])
            v = np.maximum(v, 0.0)
            cur[n + 1] = v
        inc = sgn * (cur - prev)
        worst = min(worst, float(inc.min()))
        gap = float(np.max(np.abs(cur - prev)))
        gaps.append(gap)
        log.debug("%s sweep %d: gap %.3e", direction, m, gap)
        prev = cur
        if gap < tol:
            keep = [k for k in range(len(times))
                    if k == 0 or k % snapshot_every == 0 or k == len(times) - 1]
            trace = EvolutionTrace([float(times[k]) for k in keep],
                                   [v0.with_data(cur[k]) for k in keep],
                                   float(dt), float(alpha), mu, Sign.GROWTH, len(starts))
            return MonotoneResult(trace, m, gaps, worst, direction)
    raise ConvergenceError(
        f"monotone {direction} sequence did not converge in {m_max} sweeps (last gap {gaps[-1]:.3e})",
        history=gaps)
