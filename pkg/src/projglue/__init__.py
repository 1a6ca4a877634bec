"""Convex projective structures from glued and bulged hyperbolic blocks."""

from . import arith, blocks, gluekit, projcore, tubes
from .errors import GeometryError

__all__ = ["arith", "blocks", "gluekit", "projcore", "tubes", "GeometryError"]
__version__ = "0.1.0"
