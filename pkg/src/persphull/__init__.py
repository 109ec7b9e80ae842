"""persphull: perspective-function hulls for mixed-binary convex sets.

Exact rational LP tooling, perspective atom calculus, closed-form convex
hulls of indicator polytopes, conic program builders for sparse logistic
regression, a first-order relaxation solver, and a small branch-and-bound.
"""

from .rationals import QQ, backend_name
from .simplex import LPResult, solve_lp

__all__ = [
    "QQ",
    "backend_name",
    "LPResult",
    "solve_lp",
]

__version__ = "0.1.0"
