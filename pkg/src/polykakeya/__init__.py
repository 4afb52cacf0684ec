"""Numerical experiments with polynomial ham-sandwich cuts, directed
volumes, visibility bodies, and multilinear Kakeya tube arrangements."""

__version__ = "0.1.0"

from .geom import Ball, ConvexBodySample, Cube, CubeLattice, Ellipsoid, Tube
from .measure import SampleBudget, VolumeEstimate
from .polycore import MultiPoly, UniPoly, monomial_basis, stone_tukey_degree

__all__ = [
    "Ball",
    "ConvexBodySample",
    "Cube",
    "CubeLattice",
    "Ellipsoid",
    "MultiPoly",
    "SampleBudget",
    "Tube",
    "UniPoly",
    "VolumeEstimate",
    "monomial_basis",
    "stone_tukey_degree",
    "__version__",
]
