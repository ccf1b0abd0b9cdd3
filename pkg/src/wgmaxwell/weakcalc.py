"""Discrete weak gradient / weak curl on one element, and L2 projections.

Local coefficient layouts
-------------------------
vector weak function ``{v0, vb}``::

    [v0_x (nk) | v0_y (nk) | v0_z (nk) | face0: v1 (nf), v2 (nf) | ... | face5: ...]

with ``vb = v1 t1 + v2 t2`` on every face (no normal component).

scalar weak function ``{q0, qb}``::

    [q0 (n0) | face0: qb (nb) | ... | face5: qb (nb)]
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .polybasis import CellBasis, FaceBasis, cell_quadrature, face_quadrature, mass_matrix, poly_dim


def default_quad_order(k: int) -> int:
    return k + 3


@dataclass(frozen=True)
class WeakScalarLayout:
    interior_degree: int
    face_degree: int
    n_faces: int = 6

    @property
    def n_interior(self) -> int:
        return poly_dim(self.interior_degree, 3)

    @property
    def n_face(self) -> int:
        return poly_dim(self.face_degree, 2)

    @property
    def size(self) -> int:
        return self.n_interior + self.n_faces * self.n_face

    def face_slice(self, lf: int) -> slice:
        start = self.n_interior + lf * self.n_face
        return slice(start, start + self.n_face)


@dataclass(frozen=True)
class WeakVectorLayout:
    degree: int
    n_faces: int = 6

    @property
    def n_cell_basis(self) -> int:
        return poly_dim(self.degree, 3)

    @property
    def n_interior(self) -> int:
        return 3 * self.n_cell_basis

    @property
    def n_face(self) -> int:
        return 2 * poly_dim(self.degree, 2)

    @property
    def size(self) -> int:
        return self.n_interior + self.n_faces * self.n_face

    def face_slice(self, lf: int, which: int | None = None) -> slice:
        start = self.n_interior + lf * self.n_face
        if which is None:
            return slice(start, start + self.n_face)
        half = self.n_face // 2
        start += which * half
        return slice(start, start + half)


def scalar_layout(k: int, variant: str = "full") -> WeakScalarLayout:
    """Layout of the scalar space for order ``k``.

    ``full`` pairs ``P_{k-1}(T)`` with ``P_k(e)``; ``lowest`` pairs
    ``P_{k-1}(T)`` with ``P_{k-1}(e)`` (piecewise constants for ``k = 1``).
    """
    if k < 1:
        raise ValueError("polynomial order k must be >= 1")
    if variant == "full":
        return WeakScalarLayout(k - 1, k)
    if variant == "lowest":
        return WeakScalarLayout(k - 1, k - 1)
    raise ValueError(f"unknown scalar variant {variant!r}")


def cell_basis(element, degree: int) -> CellBasis:
    return CellBasis(degree, np.asarray(element.center, dtype=float), element.h)


def face_basis(face, degree: int, h: float) -> FaceBasis:
    return FaceBasis(degree, np.asarray(face.center, dtype=float), face.t1, face.t2, h)


def block_mass(M: np.ndarray, ncomp: int = 3) -> np.ndarray:
    return np.kron(np.eye(ncomp), M)


def weak_gradient_matrix(element, k: int, variant: str = "full", quad_order: int | None = None) -> np.ndarray:
    """Matrix taking local scalar coefficients to the weak gradient in ``[P_k(T)]^3``.

    Solves ``(w, phi) = -(q0, div phi) + <qb, phi.n>`` for all ``phi`` in
    ``[P_k(T)]^3``.  Output coefficients are component-major.
    """
    layout = scalar_layout(k, variant)
    nq = quad_order or default_quad_order(k)
    target = cell_basis(element, k)
    nk = target.dim
    src = cell_basis(element, layout.interior_degree)
    quad = cell_quadrature(element, nq)
    M = mass_matrix(target, quad)

    R = np.zeros((3 * nk, layout.size))
    psi = src.eval(quad.points)  # (nq, n0)
    dphi = target.grad(quad.points)  # (nq, nk, 3)
    for c in range(3):
        R[c * nk:(c + 1) * nk, :layout.n_interior] = -np.einsum(
            "q,qj,qm->jm", quad.weights, dphi[:, :, c], psi)
    for lf, face in enumerate(element.faces):
        fq = face_quadrature(face, nq)
        chi = face_basis(face, layout.face_degree, element.h).eval(fq.points)
        phi = target.eval(fq.points)
        moment = np.einsum("q,qj,ql->jl", fq.weights, phi, chi)
        n = face.outward
        for c in range(3):
            R[c * nk:(c + 1) * nk, layout.face_slice(lf)] += n[c] * moment
    return np.linalg.solve(block_mass(M), R)


def weak_curl_matrix(element, k: int, quad_order: int | None = None) -> np.ndarray:
    """Matrix taking local vector coefficients to the weak curl in ``[P_{k-1}(T)]^3``.

    Solves ``(w, phi) = (v0, curl phi) - <vb x n, phi>`` for all ``phi`` in
    ``[P_{k-1}(T)]^3``.  The face term carries a minus sign so that a
    trace-compatible pair reproduces the projected classical curl.
    """
    layout = WeakVectorLayout(k)
    nq = quad_order or default_quad_order(k)
    target = cell_basis(element, k - 1)
    nt = target.dim
    src = cell_basis(element, k)
    nk = src.dim
    quad = cell_quadrature(element, nq)
    M = mass_matrix(target, quad)

    R = np.zeros((3 * nt, layout.size))
    phi = src.eval(quad.points)  # (nq, nk)
    dpsi = target.grad(quad.points)  # (nq, nt, 3)
    eye = np.eye(3)
    for c in range(3):
        # curl(psi e_c) = grad(psi) x e_c
        curl = np.cross(dpsi, eye[c])  # (nq, nt, 3)
        for d in range(3):
            R[c * nt:(c + 1) * nt, d * nk:(d + 1) * nk] = np.einsum(
                "q,qj,qi->ji", quad.weights, curl[:, :, d], phi)
    for lf, face in enumerate(element.faces):
        fq = face_quadrature(face, nq)
        chi = face_basis(face, k, element.h).eval(fq.points)
        psi = target.eval(fq.points)
        moment = np.einsum("q,qj,ql->jl", fq.weights, psi, chi)
        n = face.outward
        for which, t in enumerate((face.t1, face.t2)):
            txn = np.cross(t, n)
            cols = layout.face_slice(lf, which)
            for c in range(3):
                R[c * nt:(c + 1) * nt, cols] -= txn[c] * moment
    return np.linalg.solve(block_mass(M), R)


def _as_values(values, npts: int) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim == 0:
        arr = np.full(npts, float(arr))
    return arr


def project_cell(field, element, basis: CellBasis, quad_order: int | None = None) -> np.ndarray:
    """L2 projection of ``field(x)`` onto ``basis`` over the cell.

    Scalar fields give shape ``(dim,)``; vector fields (values ``(npts, 3)``)
    give ``(3, dim)``.
    """
    nq = quad_order or default_quad_order(basis.degree + 1)
    quad = cell_quadrature(element, nq)
    M = mass_matrix(basis, quad)
    phi = basis.eval(quad.points)
    vals = _as_values(field(quad.points), len(quad.weights))
    rhs = np.tensordot(phi * quad.weights[:, None], vals, axes=(0, 0))
    return np.linalg.solve(M, rhs).T


def project_face(field, face, basis: FaceBasis, quad_order: int | None = None) -> np.ndarray:
    """L2 projection of a scalar ``field(x)`` onto a face basis."""
    nq = quad_order or default_quad_order(basis.degree + 1)
    fq = face_quadrature(face, nq)
    M = mass_matrix(basis, fq)
    chi = basis.eval(fq.points)
    vals = _as_values(field(fq.points), len(fq.weights))
    return np.linalg.solve(M, chi.T @ (fq.weights * vals))


def project_face_tangential(field, face, basis: FaceBasis, quad_order: int | None = None) -> np.ndarray:
    """Componentwise projection of the tangential part: rows ``(v1, v2)``."""
    return np.stack([
        project_face(lambda x: field(x) @ face.t1, face, basis, quad_order),
        project_face(lambda x: field(x) @ face.t2, face, basis, quad_order),
    ])


def project_vector(u, element, k: int, quad_order: int | None = None) -> np.ndarray:
    """Local coefficients of ``{Q0 u, Qb u}`` in the vector layout."""
    nq = quad_order or default_quad_order(k)
    parts = [project_cell(u, element, cell_basis(element, k), nq).ravel()]
    for face in element.faces:
        parts.append(project_face_tangential(u, face, face_basis(face, k, element.h), nq).ravel())
    return np.concatenate(parts)


def project_scalar(p, element, k: int, variant: str = "full", quad_order: int | None = None) -> np.ndarray:
    """Local coefficients of ``{Q0 p, Qb p}`` in the scalar layout."""
    layout = scalar_layout(k, variant)
    nq = quad_order or default_quad_order(k)
    parts = [np.atleast_1d(project_cell(p, element, cell_basis(element, layout.interior_degree), nq))]
    for face in element.faces:
        parts.append(project_face(p, face, face_basis(face, layout.face_degree, element.h), nq))
    return np.concatenate(parts)
