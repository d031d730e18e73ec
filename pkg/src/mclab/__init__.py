"""Numerical lab for mostly contracting partially hyperbolic skew products."""

import warnings

# numba falls back to another threading layer when the system TBB is too old
warnings.filterwarnings("ignore", message="The TBB threading layer requires")

from .dynamics import (Point, SkewProductMap, Space, TangentBlock, make_kan_cylinder, make_map,
                       make_torus_double, orbit, step, tangent)

__all__ = [
    "Point", "SkewProductMap", "Space", "TangentBlock", "make_kan_cylinder", "make_map",
    "make_torus_double", "orbit", "step", "tangent",
]
__version__ = "0.1.0"
