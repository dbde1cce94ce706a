"""Discrete Poincare/Korn/Maxwell constants and inequality certification."""

__version__ = "0.1.0"

from . import assemble, constants, hodge, identities, linalg, meshes, polynomials, reports, spaces

__all__ = [
    "assemble",
    "constants",
    "hodge",
    "identities",
    "linalg",
    "meshes",
    "polynomials",
    "reports",
    "spaces",
]
