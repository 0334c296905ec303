"""Monotone iteration for -Lap u = u**(1/alpha) with zero Dirichlet data.

The iteration starts from the explicit subsolution sigma * phi1 and solves one
Poisson problem per sweep; every iterate stays below the supersolution c * w,
where phi1 is the principal discrete eigenfunction and w the torsion function.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import ContractError, ConvergenceError, DomainError, ValidationError
from .grid import BC, Domain, Grid2D

log = logging.getLogger(__name__)

CG_RTOL_FLOOR = 1e-14
# residual noise of the 5-point stencil is ~ eps * (8/h^2) * |x|_inf
ROUNDING_SAFETY = 16.0
NEG_CLAMP = -1e-14


@dataclass(frozen=True)
class EigenPair:
    lambda1: float
    phi1: Grid2D
    iterations: int = 0
    residual: float = 0.0


@dataclass
class EllipticSolution:
    u: Grid2D
    sub: Grid2D
    sup: Grid2D
    sigma: float
    c: float
    lambda1: float
    alpha: float
    residual_history: list = field(default_factory=list)
    step_history: list = field(default_factory=list)
    iterations: int = 0
    min_chain_increment: float = 0.0
    max_sup_excess: float = 0.0

    @property
    def final_residual(self):
        return self.residual_history[-1] if self.residual_history else float("nan")

    def as_dict(self):
        return {
            "alpha": self.alpha,
            "sigma": self.sigma,
            "c": self.c,
            "lambda1": self.lambda1,
            "iterations": self.iterations,
            "final_residual": self.final_residual,
            "residual_history": list(self.residual_history),
            "min_chain_increment": self.min_chain_increment,
            "max_sup_excess": self.max_sup_excess,
            "max_u": float(self.u.data.max()),
        }


def _as_domain(domain):
    if isinstance(domain, Domain):
        return domain
    if isinstance(domain, Grid2D):
        return Domain.of(domain)
    raise ValidationError(f"expected a Domain or Dirichlet Grid2D, got {type(domain).__name__}")


def _neg_lap(x, h2):
    return -kernels.lap_dirichlet(x, h2)


def root(u, alpha):
    """u**(1/alpha) with tiny negative rounding clamped to 0."""
    u = np.asarray(u, dtype=np.float64)
    if np.any(u < NEG_CLAMP):
        raise DomainError(f"fractional power of a negative value ({u.min():.3e})")
    return np.power(np.maximum(u, 0.0), 1.0 / alpha)


def _cg(b, h2, tol, x0=None, max_iter=None):
    """Jacobi-preconditioned CG for -Lap x = b on a (ny, nx) array.

    Stops when the true residual sup-norm drops below
    max(tol, 1e-14 * |b|_inf). Targets below the rounding noise of the stencil
    (eps * 8/h^2 * |x|_inf) are clamped to that noise level. Inner products
    are numpy dot products over the row-major flattened arrays, so the
    reduction order is fixed.
    """
    ny, nx = b.shape
    max_iter = max_iter if max_iter is not None else 10 * nx * ny
    bnorm = float(np.max(np.abs(b)))
    target = max(tol, CG_RTOL_FLOOR * bnorm)
    noise = np.finfo(float).eps * 8.0 / h2
    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=np.float64)
    if bnorm == 0.0 and x0 is None:
        return x, 0
    dinv = h2 / 4.0
    r = b - _neg_lap(x, h2)
    if np.max(np.abs(r)) < target:
        return x, 0
    z = dinv * r
    p = z.copy()
    rz = float(np.dot(r.ravel(), z.ravel()))
    for it in range(1, max_iter + 1):
        ap = _neg_lap(p, h2)
        pap = float(np.dot(p.ravel(), ap.ravel()))
        if pap <= 0.0:
            break
        step = rz / pap
        x += step * p
        r -= step * ap
        xnorm = float(np.max(np.abs(x)))
        goal = max(target, noise * xnorm)
        if np.max(np.abs(r)) < goal:
            r = b - _neg_lap(x, h2)
            rtrue = np.max(np.abs(r))
            # recursive residual is below the rounding floor: accept what rounding allows
            if rtrue < goal or rtrue < ROUNDING_SAFETY * noise * xnorm:
                return x, it
            z = dinv * r
            p = z.copy()
            rz = float(np.dot(r.ravel(), z.ravel()))
            continue
        z = dinv * r
        rz_new = float(np.dot(r.ravel(), z.ravel()))
        p = z + (rz_new / rz) * p
        rz = rz_new
    res = float(np.max(np.abs(b - _neg_lap(x, h2))))
    raise ConvergenceError(
        f"CG did not reach {target:.3e} in {max_iter} iterations (residual {res:.3e})",
        history=[res])


def solve_poisson(rhs: Grid2D, tol: float = 1e-10, x0: Grid2D | None = None) -> Grid2D:
    """Solve -Lap u = rhs, zero Dirichlet data, to sup-norm residual < tol."""
    if rhs.bc is not BC.DIRICHLET_ZERO:
        raise ContractError("solve_poisson needs a Dirichlet right-hand side")
    if not tol > 0:
        raise ValidationError(f"tol must be positive, got {tol}")
    guess = None if x0 is None else x0.array
    x, _ = _cg(np.array(rhs.array), rhs.h * rhs.h, tol, guess)
    return rhs.with_data(x)


def torsion(domain, tol: float = 1e-12) -> Grid2D:
    """w with -Lap w = 1 and w = 0 on the boundary."""
    d = _as_domain(domain)
    return solve_poisson(d.full(1.0), tol)


def principal_eigenpair(domain, tol: float = 1e-11, max_outer: int = 10_000) -> EigenPair:
    """Inverse power iteration with sup-norm normalisation.

    Converged when successive Rayleigh quotients differ by < tol * lambda and
    the eigen-residual |-Lap phi - lambda phi|_inf is < tol * lambda. The
    tolerance is relative because the residual of a sup-normalised vector
    cannot drop below about eps * 8/h^2.
    """
    d = _as_domain(domain)
    h2 = d.h * d.h
    x = np.ones((d.ny, d.nx))
    lam_old = np.inf
    for k in range(1, max_outer + 1):
        guess = x / lam_old if np.isfinite(lam_old) else None
        y, _ = _cg(x, h2, 1e-3 * tol, x0=guess)
        x = y / np.max(np.abs(y))
        ax = _neg_lap(x, h2)
        lam = float(np.dot(x.ravel(), ax.ravel()) / np.dot(x.ravel(), x.ravel()))
        res = float(np.max(np.abs(ax - lam * x)))
        if abs(lam - lam_old) < tol * lam and res < tol * lam:
            if np.any(x <= 0):
                raise ConvergenceError("eigenvector lost positivity")
            return EigenPair(lam, d.grid(x), k, res)
        lam_old = lam
    raise ConvergenceError(
        f"inverse power iteration did not converge in {max_outer} steps "
        f"(last change {abs(lam - lam_old):.3e}, residual {res:.3e})")


def barrier_constants(eig: EigenPair, w: Grid2D, alpha: float):
    """sigma = 1/(lambda1**(alpha/(alpha-1)) max phi1),
    c = max(sigma lambda1 max phi1, (max w)**(1/(alpha-1)))."""
    if not alpha > 1:
        raise ValidationError(f"alpha must be > 1, got {alpha}")
    phimax = float(np.max(eig.phi1.data))
    lam = float(eig.lambda1)
    sigma = 1.0 / (lam ** (alpha / (alpha - 1.0)) * phimax)
    c = max(sigma * lam * phimax, float(np.max(w.data)) ** (1.0 / (alpha - 1.0)))
    return sigma, c


def signed_defect(u: Grid2D, alpha: float) -> Grid2D:
    """-Lap u - u**(1/alpha), pointwise."""
    a = u.array
    return u.with_data(_neg_lap(a, u.h * u.h) - root(a, alpha))


def residual(u: Grid2D, alpha: float) -> float:
    if np.any(u.data < 0):
        raise DomainError("residual needs u >= 0")
    return float(np.max(np.abs(signed_defect(u, alpha).data)))


def _iterate(u0, alpha, h2, tol, max_iter, direction):
    """Picard sweeps u_k = (-Lap)^-1 u_{k-1}**(1/alpha); returns iterates info."""
    u = u0.copy()
    res_hist, step_hist = [], []
    chain = np.inf  # most negative increment seen in the expected direction
    for k in range(1, max_iter + 1):
        rhs = root(u, alpha)
        # inner solve well below the outer tolerance so the ordering survives rounding
        inner = max(1e-3 * tol, CG_RTOL_FLOOR)
        u_new, _ = _cg(rhs, h2, inner, x0=u)
        inc = direction * (u_new - u)
        chain = min(chain, float(inc.min()))
        step = float(np.max(np.abs(u_new - u)))
        u = u_new
        res = float(np.max(np.abs(_neg_lap(u, h2) - root(u, alpha))))
        res_hist.append(res)
        step_hist.append(step)
        log.debug("sweep %d: step %.3e residual %.3e", k, step, res)
        if step < tol and res < tol:
            return u, res_hist, step_hist, chain, k
    raise ConvergenceError(
        f"monotone iteration did not converge in {max_iter} sweeps "
        f"(last step {step_hist[-1]:.3e}, residual {res_hist[-1]:.3e})",
        history=res_hist)


def solve_brezis_oswald(domain, alpha: float, tol: float = 1e-10, max_iter: int = 500,
                        start: str = "sub", eig_tol: float = 1e-11) -> EllipticSolution:
    """Positive solution of -Lap u = u**(1/alpha) by monotone iteration.

    ``start="sub"`` iterates upward from sigma*phi1 (the default);
    ``start="sup"`` iterates downward from c*w.
    """
    if not alpha > 1:
        raise ValidationError(f"alpha must be > 1, got {alpha}")
    if start not in ("sub", "sup"):
        raise ValidationError("start must be 'sub' or 'sup'")
    d = _as_domain(domain)
    h2 = d.h * d.h
    eig = principal_eigenpair(d, eig_tol)
    w = torsion(d, tol=1e-13)
    sigma, c = barrier_constants(eig, w, alpha)
    sub = sigma * eig.phi1.array
    sup = c * w.array
    u0, direction = (sub, 1.0) if start == "sub" else (sup, -1.0)
    u, res_hist, step_hist, chain, k = _iterate(u0, alpha, h2, tol, max_iter, direction)
    return EllipticSolution(
        u=d.grid(u), sub=d.grid(sub), sup=d.grid(sup), sigma=sigma, c=c,
        lambda1=eig.lambda1, alpha=float(alpha), residual_history=res_hist,
        step_history=step_hist, iterations=k, min_chain_increment=chain,
        max_sup_excess=float(np.max(u - sup)))


def iterates(domain, alpha, n_sweeps, start="sub", eig_tol=1e-11):
    """First ``n_sweeps`` monotone iterates (including u0) as (ny, nx) arrays.

    Diagnostic helper for checking the ordering chain sweep by sweep.
    """
    d = _as_domain(domain)
    h2 = d.h * d.h
    eig = principal_eigenpair(d, eig_tol)
    w = torsion(d, tol=1e-13)
    sigma, c = barrier_constants(eig, w, alpha)
    u = sigma * eig.phi1.array if start == "sub" else c * w.array
    out = [u]
    for _ in range(n_sweeps):
        u, _ = _cg(root(u, alpha), h2, CG_RTOL_FLOOR, x0=u)
        out.append(u)
    return out, sigma * eig.phi1.array, c * w.array
