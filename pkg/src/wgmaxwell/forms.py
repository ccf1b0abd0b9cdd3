"""Element blocks for a(.,.), b(.,.), s2(.,.) and the load vectors."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .polybasis import cell_quadrature, face_quadrature, mass_matrix
from .weakcalc import (
    WeakScalarLayout,
    WeakVectorLayout,
    block_mass,
    cell_basis,
    default_quad_order,
    face_basis,
    scalar_layout,
    weak_curl_matrix,
    weak_gradient_matrix,
)

Field = Callable[[np.ndarray], np.ndarray]


@dataclass
class ProblemData:
    """Right-hand sides and boundary data, all as callables of ``x`` with shape ``(..., 3)``.

    ``nu`` is either a scalar or an array with one positive value per cell.
    """

    f: Field
    g: Field
    u_boundary: Field | None = None
    p_boundary: Field | None = None
    nu: float | np.ndarray = 1.0
    mu: float = 1.0
    eps: float = 1.0

    def nu_of(self, cell: int) -> float:
        nu = np.asarray(self.nu, dtype=float)
        return float(nu) if nu.ndim == 0 else float(nu[cell])

    def check(self, n_cells: int) -> None:
        nu = np.asarray(self.nu, dtype=float)
        if nu.ndim not in (0, 1) or (nu.ndim == 1 and len(nu) != n_cells):
            raise ValueError("nu must be a scalar or one value per cell")
        if np.any(nu <= 0):
            raise ValueError("nu must be positive on every cell")


def zero_data() -> ProblemData:
    def zvec(x):
        return np.zeros(np.shape(x)[:-1] + (3,))

    def zsc(x):
        return np.zeros(np.shape(x)[:-1])

    return ProblemData(zvec, zsc, zvec, zsc)


@dataclass
class ElementOperators:
    """Everything the scheme needs from one element, in local layouts."""

    k: int
    h: float
    vec: WeakVectorLayout
    scal: WeakScalarLayout
    quad_order: int
    mass_k: np.ndarray  # P_k(T) Gram matrix
    mass_km1: np.ndarray  # P_{k-1}(T)
    mass_p0: np.ndarray  # interior scalar space
    grad: np.ndarray  # weak gradient, (3 nk, nscal)
    curl: np.ndarray  # weak curl, (3 nk-1, nvec)
    curl_energy: np.ndarray  # C^T M C, multiply by nu
    s1: np.ndarray
    s2: np.ndarray
    b: np.ndarray  # (nscal, nvec): b(v, q) = q^T b v
    # face traces at quadrature points, used by stabilizers and norms
    face_weights: list[np.ndarray] = field(repr=False)
    tangential_jump: list[np.ndarray] = field(repr=False)  # per face (2, nqf, nvec)
    scalar_jump: list[np.ndarray] = field(repr=False)  # per face (nqf, nscal)

    def a(self, nu: float) -> np.ndarray:
        return nu * self.curl_energy + self.s1

    def saddle(self, nu: float) -> np.ndarray:
        """Local ``[[A, -B^T], [B, S2]]`` in (vector, scalar) order."""
        B = self.b
        return np.block([[self.a(nu), -B.T], [B, self.s2]])


def element_operators(element, k: int, variant: str = "full", quad_order: int | None = None) -> ElementOperators:
    nq = quad_order or default_quad_order(k)
    vec = WeakVectorLayout(k)
    scal = scalar_layout(k, variant)
    h = element.h
    quad = cell_quadrature(element, nq)
    bk = cell_basis(element, k)
    Mk = mass_matrix(bk, quad)
    Mkm1 = mass_matrix(cell_basis(element, k - 1), quad)
    Mp0 = mass_matrix(cell_basis(element, scal.interior_degree), quad)

    G = weak_gradient_matrix(element, k, variant, nq)
    C = weak_curl_matrix(element, k, nq)
    curl_energy = C.T @ block_mass(Mkm1) @ C

    b = np.zeros((scal.size, vec.size))
    b[:, :vec.n_interior] = (block_mass(Mk) @ G).T

    s1 = np.zeros((vec.size, vec.size))
    s2 = np.zeros((scal.size, scal.size))
    weights, tjumps, sjumps = [], [], []
    nf = vec.n_face // 2
    for lf, face in enumerate(element.faces):
        fq = face_quadrature(face, nq)
        w = fq.weights
        phi = bk.eval(fq.points)  # (nqf, nk)
        chi = face_basis(face, k, h).eval(fq.points)
        T = np.zeros((2, len(w), vec.size))
        for which, t in enumerate((face.t1, face.t2)):
            for d in range(3):
                T[which, :, d * bk.dim:(d + 1) * bk.dim] = t[d] * phi
            sl = vec.face_slice(lf, which)
            T[which, :, sl] -= chi[:, :nf]
        s1 += sum(T[a].T @ (w[:, None] * T[a]) for a in range(2)) / h

        psi = cell_basis(element, scal.interior_degree).eval(fq.points)
        chib = face_basis(face, scal.face_degree, h).eval(fq.points)
        S = np.zeros((len(w), scal.size))
        S[:, :scal.n_interior] = psi
        S[:, scal.face_slice(lf)] = -chib
        s2 += h * (S.T @ (w[:, None] * S))
        weights.append(w)
        tjumps.append(T)
        sjumps.append(S)

    return ElementOperators(
        k=k, h=h, vec=vec, scal=scal, quad_order=nq, mass_k=Mk, mass_km1=Mkm1, mass_p0=Mp0,
        grad=G, curl=C, curl_energy=curl_energy, s1=0.5 * (s1 + s1.T), s2=0.5 * (s2 + s2.T), b=b,
        face_weights=weights, tangential_jump=tjumps, scalar_jump=sjumps,
    )


def local_a(element, k: int, nu: float, quad_order: int | None = None) -> np.ndarray:
    """``nu (curl_w v, curl_w w)_T + s1(v, w)`` on the vector layout."""
    return element_operators(element, k, "full", quad_order).a(nu)


def local_b(element, k: int, variant: str = "full", quad_order: int | None = None) -> np.ndarray:
    """``(v0, grad_w q)_T`` as a matrix of shape (scalar layout, vector layout)."""
    return element_operators(element, k, variant, quad_order).b


def local_s2(element, k: int, variant: str = "full", quad_order: int | None = None) -> np.ndarray:
    return element_operators(element, k, variant, quad_order).s2


def local_loads(element, data: ProblemData, k: int, variant: str = "full",
                quad_order: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """``(f, v0)_T`` and ``-(g, q0)_T`` padded to the full local layouts."""
    nq = quad_order or default_quad_order(k)
    vec = WeakVectorLayout(k)
    scal = scalar_layout(k, variant)
    quad = cell_quadrature(element, nq)
    phi = cell_basis(element, k).eval(quad.points)
    psi = cell_basis(element, scal.interior_degree).eval(quad.points)
    fvals = np.asarray(data.f(quad.points), dtype=float)
    gvals = np.broadcast_to(np.asarray(data.g(quad.points), dtype=float), quad.weights.shape)
    Fv = np.zeros(vec.size)
    Fv[:vec.n_interior] = ((phi * quad.weights[:, None]).T @ fvals).T.ravel()
    Gq = np.zeros(scal.size)
    Gq[:scal.n_interior] = -(psi.T @ (quad.weights * gvals))
    return Fv, Gq
