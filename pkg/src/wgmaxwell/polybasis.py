"""Scaled monomial bases, tensor Gauss rules and Gram matrices."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np


@lru_cache(maxsize=None)
def monomial_exponents(degree: int, dim: int) -> np.ndarray:
    """Exponent tuples of total degree <= ``degree``, graded then lexicographic.

    For ``dim=3, degree=1`` this is ``1, x, y, z``.
    """
    if degree < 0:
        return np.zeros((0, dim), dtype=int)
    out = []
    for d in range(degree + 1):
        if dim == 3:
            for a in range(d, -1, -1):
                for b in range(d - a, -1, -1):
                    out.append((a, b, d - a - b))
        elif dim == 2:
            for a in range(d, -1, -1):
                out.append((a, d - a))
        else:
            raise ValueError("dim must be 2 or 3")
    arr = np.array(out, dtype=int).reshape(-1, dim)
    arr.setflags(write=False)
    return arr


def poly_dim(degree: int, dim: int = 3) -> int:
    if degree < 0:
        return 0
    if dim == 3:
        return (degree + 1) * (degree + 2) * (degree + 3) // 6
    return (degree + 1) * (degree + 2) // 2


def _powers(t: np.ndarray, exps: np.ndarray) -> np.ndarray:
    # t: (..., dim) -> (..., nbasis)
    return np.prod(t[..., None, :] ** exps, axis=-1)


@dataclass(frozen=True)
class CellBasis:
    """Monomials ``((x - center) / scale) ** alpha`` with ``|alpha| <= degree``."""

    degree: int
    center: np.ndarray
    scale: float

    @property
    def exponents(self) -> np.ndarray:
        return monomial_exponents(self.degree, 3)

    @property
    def dim(self) -> int:
        return poly_dim(self.degree, 3)

    def local_coords(self, x: np.ndarray) -> np.ndarray:
        return (np.asarray(x, dtype=float) - self.center) / self.scale

    def eval(self, x: np.ndarray) -> np.ndarray:
        return _powers(self.local_coords(x), self.exponents)

    def grad(self, x: np.ndarray) -> np.ndarray:
        """Gradients, shape ``(..., dim, 3)``."""
        t = self.local_coords(x)
        exps = self.exponents
        out = np.zeros(t.shape[:-1] + (len(exps), 3))
        for c in range(3):
            e = exps.copy()
            coef = e[:, c].astype(float)
            e[:, c] = np.maximum(e[:, c] - 1, 0)
            out[..., c] = coef * _powers(t, e) / self.scale
        return out


@dataclass(frozen=True)
class FaceBasis:
    """Monomials in the face frame coordinates ``((x-c).t1, (x-c).t2) / scale``."""

    degree: int
    center: np.ndarray
    t1: np.ndarray
    t2: np.ndarray
    scale: float

    @property
    def exponents(self) -> np.ndarray:
        return monomial_exponents(self.degree, 2)

    @property
    def dim(self) -> int:
        return poly_dim(self.degree, 2)

    def local_coords(self, x: np.ndarray) -> np.ndarray:
        d = np.asarray(x, dtype=float) - self.center
        return np.stack([d @ self.t1, d @ self.t2], axis=-1) / self.scale

    def eval(self, x: np.ndarray) -> np.ndarray:
        return _powers(self.local_coords(x), self.exponents)


@dataclass(frozen=True)
class QuadRule:
    points: np.ndarray  # (nq, 3), physical coordinates
    weights: np.ndarray  # (nq,)

    def integrate(self, values: np.ndarray) -> np.ndarray:
        return np.tensordot(self.weights, values, axes=(0, 0))


@lru_cache(maxsize=None)
def gauss_legendre(npts: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss points and weights on ``[-1/2, 1/2]``."""
    x, w = np.polynomial.legendre.leggauss(npts)
    x, w = 0.5 * x, 0.5 * w
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


@lru_cache(maxsize=None)
def reference_cube_rule(npts: int) -> tuple[np.ndarray, np.ndarray]:
    """Tensor rule on ``[-1/2, 1/2]^3`` (unit volume)."""
    x, w = gauss_legendre(npts)
    X, Y, Z = np.meshgrid(x, x, x, indexing="ij")
    WX, WY, WZ = np.meshgrid(w, w, w, indexing="ij")
    pts = np.stack([X.ravel(), Y.ravel(), Z.ravel()], axis=1)
    wts = (WX * WY * WZ).ravel()
    return pts, wts


@lru_cache(maxsize=None)
def reference_square_rule(npts: int) -> tuple[np.ndarray, np.ndarray]:
    """Tensor rule on ``[-1/2, 1/2]^2`` (unit area), points as frame coordinates."""
    x, w = gauss_legendre(npts)
    X, Y = np.meshgrid(x, x, indexing="ij")
    WX, WY = np.meshgrid(w, w, indexing="ij")
    return np.stack([X.ravel(), Y.ravel()], axis=1), (WX * WY).ravel()


def cell_quadrature(cell, order: int) -> QuadRule:
    """Tensor Gauss rule with ``order`` points per direction on an axis-aligned cube.

    Exact for polynomials of degree ``2*order - 1`` in each variable.
    """
    if order < 1:
        raise ValueError("quadrature order must be >= 1")
    pts, wts = reference_cube_rule(order)
    return QuadRule(cell.center + cell.h * pts, wts * cell.h**3)


def face_quadrature(face, order: int) -> QuadRule:
    if order < 1:
        raise ValueError("quadrature order must be >= 1")
    ref, wts = reference_square_rule(order)
    side = np.sqrt(face.area)
    pts = face.center + side * (ref[:, :1] * face.t1 + ref[:, 1:] * face.t2)
    return QuadRule(pts, wts * face.area)


def mass_matrix(basis, quad: QuadRule) -> np.ndarray:
    """L2 Gram matrix of ``basis`` under ``quad``; raises on a singular result."""
    phi = basis.eval(quad.points)
    M = phi.T @ (quad.weights[:, None] * phi)
    M = 0.5 * (M + M.T)
    try:
        np.linalg.cholesky(M)
    except np.linalg.LinAlgError as exc:
        raise RuntimeError("mass matrix is not positive definite; basis or quadrature is broken") from exc
    return M
