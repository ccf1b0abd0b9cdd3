"""Weak Galerkin solver for the time-harmonic Maxwell saddle-point problem on cube meshes."""

from .mesh import Mesh, build_mesh

__version__ = "0.1.0"

__all__ = ["Mesh", "build_mesh", "__version__"]
