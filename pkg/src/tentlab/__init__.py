"""Discrete tent spaces, gamma norms and Hardy spaces on finite doubling spaces."""

__version__ = "0.1.0"

from .calculus import HoloSymbol, OperatorL
from .gamma import BanachSpace, TentFunction, gamma_norm
from .geometry import Ball, SpaceGrid, graph, torus
from .halfspace import HalfGrid, cone, tent
from .tent import conical_functional, tent_norm

__all__ = [
    "__version__",
    "Ball",
    "BanachSpace",
    "HalfGrid",
    "HoloSymbol",
    "OperatorL",
    "SpaceGrid",
    "TentFunction",
    "cone",
    "conical_functional",
    "gamma_norm",
    "graph",
    "tent",
    "tent_norm",
    "torus",
]
