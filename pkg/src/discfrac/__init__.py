"""Exact counting toolkit for discrete fractional integrals along surfaces."""

__version__ = "0.1.0"

from .lattice import (  # noqa: E402
    BudgetExceeded,
    DyadicShell,
    NormMap,
    SparseLatticeFunction,
    SurfaceMap,
    lp_norm,
    shell_array,
    shell_cardinality,
)

__all__ = [
    "BudgetExceeded",
    "DyadicShell",
    "NormMap",
    "SparseLatticeFunction",
    "SurfaceMap",
    "lp_norm",
    "shell_array",
    "shell_cardinality",
]
