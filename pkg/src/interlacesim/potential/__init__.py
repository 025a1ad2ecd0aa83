"""Exact discrete potential theory for the unit-rate walk on Z^d.

Killed Green functions by fast Dirichlet solves, whole-space Green brackets,
equilibrium measures with two-sided error factors, capacities, hitting
probabilities, the occupation-time Laplace functional, entrance-law sandwiches,
and capacity comparisons for separated box collections.
"""

from .green import GreenTable, GreenBracket, c0_constant, green_table
from .equilibrium import (
    CapacityBracket,
    EquilibriumMeasure,
    equilibrium,
    relative_equilibrium,
)
from .identities import hitting_probability, laplace_rhs, sweeping_check
from .entrance import entrance_kernels, entrance_sandwich_check
from .collections import (
    SeparatedCollection,
    brownian_capacity_estimate,
    gv_vs_equilibrium_potential,
)

__all__ = [
    "GreenTable",
    "GreenBracket",
    "c0_constant",
    "green_table",
    "CapacityBracket",
    "EquilibriumMeasure",
    "equilibrium",
    "relative_equilibrium",
    "hitting_probability",
    "laplace_rhs",
    "sweeping_check",
    "entrance_kernels",
    "entrance_sandwich_check",
    "SeparatedCollection",
    "brownian_capacity_estimate",
    "gv_vs_equilibrium_potential",
]
