"""Porous-medium diffusion with a Bernoulli temporal factor.

Closed-form temporal factor, a monotone elliptic solver, explicit parabolic
evolution with comparison and sandwich checks, and a Gurtin-MacCamy image
denoiser benchmarked against Perona-Malik.
"""
from ._backend import BACKEND
from .bernoulli import (BernoulliParams, Constant, ExpDecay, GrowthRate, RationalDecay,
                        Seasonal, Tabulated, eval_S, parse_growth_rate, rk4_oracle)
from .elliptic import EllipticSolution, principal_eigenpair, solve_brezis_oswald, torsion
from .errors import (BernoulliDiffuseError, ConvergenceError, NumericalError,
                     SingularityError, StabilityError, ValidationError)
from .grid import BC, Domain, Grid2D
from .parabolic import (BarrierPair, Sign, evolve, monotone_iterate, separable_solution,
                        verify_comparison, verify_sandwich)

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "BC", "BarrierPair", "BernoulliDiffuseError", "BernoulliParams", "Constant",
    "ConvergenceError", "Domain", "EllipticSolution", "ExpDecay", "Grid2D", "GrowthRate",
    "NumericalError", "RationalDecay", "Seasonal", "Sign", "SingularityError",
    "StabilityError", "Tabulated", "ValidationError", "eval_S", "evolve",
    "monotone_iterate", "parse_growth_rate", "principal_eigenpair", "rk4_oracle",
    "separable_solution", "solve_brezis_oswald", "torsion", "verify_comparison",
    "verify_sandwich",
]
