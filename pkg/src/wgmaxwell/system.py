"""Global DOF numbering, saddle-point assembly, boundary data and the monolithic solve."""

from __future__ import annotations

import ctypes.util
import glob
import logging
import os
import sys
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .forms import ElementOperators, ProblemData, element_operators
from .mesh import Mesh
from .polybasis import CellBasis, FaceBasis, mass_matrix, QuadRule, reference_cube_rule, reference_square_rule
from .weakcalc import default_quad_order, scalar_layout

log = logging.getLogger(__name__)


class SingularSystemError(RuntimeError):
    """The factorization of an assembled system failed."""


@dataclass(frozen=True)
class DofMap:
    """Block numbering: all u0, then ub, then p0, then pb."""

    n_cells: int
    n_faces: int
    k: int
    variant: str
    cell_faces: np.ndarray
    boundary: np.ndarray

    @cached_property
    def _scal(self):
        return scalar_layout(self.k, self.variant)

    @property
    def nk(self) -> int:
        return (self.k + 1) * (self.k + 2) * (self.k + 3) // 6

    @property
    def u0_block(self) -> int:
        return 3 * self.nk

    @property
    def ub_block(self) -> int:
        return (self.k + 1) * (self.k + 2)

    @property
    def p0_block(self) -> int:
        return self._scal.n_interior

    @property
    def pb_block(self) -> int:
        return self._scal.n_face

    @property
    def u0_offset(self) -> int:
        return 0

    @property
    def ub_offset(self) -> int:
        return self.n_cells * self.u0_block

    @property
    def p0_offset(self) -> int:
        return self.ub_offset + self.n_faces * self.ub_block

    @property
    def pb_offset(self) -> int:
        return self.p0_offset + self.n_cells * self.p0_block

    @property
    def total(self) -> int:
        return self.pb_offset + self.n_faces * self.pb_block

    @property
    def n_interior(self) -> int:
        return self.ub_offset + self.n_cells * self.p0_block

    def u0_dofs(self, cells) -> np.ndarray:
        cells = np.asarray(cells)
        return self.u0_offset + cells[..., None] * self.u0_block + np.arange(self.u0_block)

    def ub_dofs(self, faces) -> np.ndarray:
        faces = np.asarray(faces)
        return self.ub_offset + faces[..., None] * self.ub_block + np.arange(self.ub_block)

    def p0_dofs(self, cells) -> np.ndarray:
        cells = np.asarray(cells)
        return self.p0_offset + cells[..., None] * self.p0_block + np.arange(self.p0_block)

    def pb_dofs(self, faces) -> np.ndarray:
        faces = np.asarray(faces)
        return self.pb_offset + faces[..., None] * self.pb_block + np.arange(self.pb_block)

    @cached_property
    def local_to_global(self) -> np.ndarray:
        """``(n_cells, n_local)`` map in local saddle order (vector layout, scalar layout)."""
        cells = np.arange(self.n_cells)
        ub = self.ub_dofs(self.cell_faces).reshape(self.n_cells, -1)
        pb = self.pb_dofs(self.cell_faces).reshape(self.n_cells, -1)
        return np.concatenate([self.u0_dofs(cells), ub, self.p0_dofs(cells), pb], axis=1)

    @cached_property
    def constrained(self) -> np.ndarray:
        bfaces = np.nonzero(self.boundary)[0]
        return np.concatenate([self.ub_dofs(bfaces).ravel(), self.pb_dofs(bfaces).ravel()])

    @cached_property
    def free(self) -> np.ndarray:
        mask = np.ones(self.total, dtype=bool)
        mask[self.constrained] = False
        return np.nonzero(mask)[0]


def make_dofmap(mesh: Mesh, k: int, variant: str = "full") -> DofMap:
    return DofMap(mesh.n_cells, mesh.n_faces, k, variant, mesh.cell_faces, mesh.boundary)


class WeakField:
    """Global coefficient vector of a pair ``(u_h; p_h)`` with block accessors."""

    def __init__(self, values: np.ndarray, dofmap: DofMap):
        values = np.asarray(values, dtype=float)
        if values.shape != (dofmap.total,):
            raise ValueError(f"expected {dofmap.total} coefficients, got {values.shape}")
        self.values = values
        self.dofmap = dofmap

    @property
    def u0(self) -> np.ndarray:
        """``(n_cells, 3, nk)``"""
        d = self.dofmap
        return self.values[d.u0_offset:d.ub_offset].reshape(d.n_cells, 3, d.nk)

    @property
    def ub(self) -> np.ndarray:
        """``(n_faces, 2, nf)`` coefficients of ``(v1, v2)``."""
        d = self.dofmap
        return self.values[d.ub_offset:d.p0_offset].reshape(d.n_faces, 2, -1)

    @property
    def p0(self) -> np.ndarray:
        d = self.dofmap
        return self.values[d.p0_offset:d.pb_offset].reshape(d.n_cells, d.p0_block)

    @property
    def pb(self) -> np.ndarray:
        d = self.dofmap
        return self.values[d.pb_offset:].reshape(d.n_faces, d.pb_block)

    def local(self, cell: int) -> tuple[np.ndarray, np.ndarray]:
        """Local (vector layout, scalar layout) coefficients on one cell."""
        loc = self.values[self.dofmap.local_to_global[cell]]
        nv = self.dofmap.u0_block + 6 * self.dofmap.ub_block
        return loc[:nv], loc[nv:]

    def __sub__(self, other: WeakField) -> WeakField:
        return WeakField(self.values - other.values, self.dofmap)


def mesh_operators(mesh: Mesh, k: int, variant: str = "full", quad_order: int | None = None) -> ElementOperators:
    """Element operators shared by every cell of a uniform mesh.

    Bases are centered at the cell center and scaled by ``h``, faces carry the
    same axis frames and local normal signs everywhere, so one computation
    serves all cells.
    """
    return _cached_operators(mesh.h, k, variant, quad_order or default_quad_order(k))


_OPS_CACHE: dict[tuple, ElementOperators] = {}


def _cached_operators(h: float, k: int, variant: str, nq: int) -> ElementOperators:
    key = (h, k, variant, nq)
    if key not in _OPS_CACHE:
        from .mesh import Element, LOCAL_FACE_AXIS, LOCAL_FACE_SIGN, FRAMES, LocalFace

        center = np.full(3, 0.5 * h)
        faces = []
        for lf in range(6):
            axis = LOCAL_FACE_AXIS[lf]
            normal = np.eye(3)[axis]
            t1, t2 = FRAMES[axis]
            faces.append(LocalFace(lf, center + 0.5 * h * LOCAL_FACE_SIGN[lf] * normal, normal,
                                   t1, t2, h * h, float(LOCAL_FACE_SIGN[lf])))
        _OPS_CACHE[key] = element_operators(Element(0, center, h, tuple(faces)), k, variant, nq)
    return _OPS_CACHE[key]


def _nu_per_cell(data: ProblemData, n_cells: int) -> np.ndarray:
    data.check(n_cells)
    return np.broadcast_to(np.asarray(data.nu, dtype=float), (n_cells,))


# ---------------------------------------------------------------- projections

def _cell_points(mesh: Mesh, nq: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    ref, w = reference_cube_rule(nq)
    pts = mesh.cell_centers[:, None, :] + mesh.h * ref[None]
    return ref, w * mesh.h**3, pts


def cell_moments(mesh: Mesh, fn, degree: int, nq: int) -> np.ndarray:
    """``int_T fn * phi_i`` for every cell; shape ``(n_cells, [ncomp,] dim)``."""
    ref, w, pts = _cell_points(mesh, nq)
    phi = CellBasis(degree, np.zeros(3), 1.0).eval(ref)  # (nq, dim)
    vals = np.asarray(fn(pts), dtype=float)
    vals = np.broadcast_to(vals, pts.shape[:2] + vals.shape[2:])
    if vals.ndim == 2:
        return np.einsum("q,cq,qi->ci", w, vals, phi)
    return np.einsum("q,cqd,qi->cdi", w, vals, phi)


def _face_points(mesh: Mesh, faces: np.ndarray, nq: int):
    ref, w = reference_square_rule(nq)
    h = mesh.h
    t1 = mesh.face_t1[faces]
    t2 = mesh.face_t2[faces]
    pts = (mesh.face_centers[faces][:, None, :]
           + h * (ref[None, :, :1] * t1[:, None, :] + ref[None, :, 1:] * t2[:, None, :]))
    return ref, w * h * h, pts


def _face_mass(mesh: Mesh, degree: int, nq: int) -> np.ndarray:
    ref, w = reference_square_rule(nq)
    chi = FaceBasis(degree, np.zeros(3), np.eye(3)[0], np.eye(3)[1], 1.0).eval(
        np.concatenate([ref, np.zeros((len(ref), 1))], axis=1))
    return chi, chi.T @ (w[:, None] * chi) * mesh.h**2


def project_faces_scalar(mesh: Mesh, fn, degree: int, faces: np.ndarray, nq: int) -> np.ndarray:
    """``Qb fn`` on the listed faces: ``(len(faces), dim P_degree(e))``."""
    faces = np.asarray(faces, dtype=int)
    _, w, pts = _face_points(mesh, faces, nq)
    chi, M = _face_mass(mesh, degree, nq)
    vals = np.broadcast_to(np.asarray(fn(pts), dtype=float), pts.shape[:2])
    rhs = np.einsum("q,fq,qi->fi", w, vals, chi)
    return np.linalg.solve(M, rhs.T).T


def project_faces_tangential(mesh: Mesh, fn, degree: int, faces: np.ndarray, nq: int) -> np.ndarray:
    """Componentwise projection of ``(u.t1, u.t2)``: ``(len(faces), 2, nf)``."""
    faces = np.asarray(faces, dtype=int)
    _, w, pts = _face_points(mesh, faces, nq)
    chi, M = _face_mass(mesh, degree, nq)
    vals = np.asarray(fn(pts), dtype=float)
    tan = np.stack([np.einsum("fqd,fd->fq", vals, mesh.face_t1[faces]),
                    np.einsum("fqd,fd->fq", vals, mesh.face_t2[faces])], axis=1)
    rhs = np.einsum("q,faq,qi->fai", w, tan, chi)
    return np.einsum("ij,faj->fai", np.linalg.inv(M), rhs)


def project_exact(mesh: Mesh, u, p, k: int, variant: str = "full", quad_order: int | None = None) -> WeakField:
    """``(Q_h u; Q_h p)`` as a global weak field."""
    nq = quad_order or default_quad_order(k)
    dm = make_dofmap(mesh, k, variant)
    scal = scalar_layout(k, variant)
    ref, w = reference_cube_rule(nq)
    out = np.zeros(dm.total)

    Mk = mass_matrix(CellBasis(k, np.zeros(3), 1.0), QuadRule(ref, w)) * mesh.h**3
    mom = cell_moments(mesh, u, k, nq)  # (nc, 3, nk)
    out[dm.u0_offset:dm.ub_offset] = np.einsum("ij,cdj->cdi", np.linalg.inv(Mk), mom).ravel()
    allf = np.arange(mesh.n_faces)
    out[dm.ub_offset:dm.p0_offset] = project_faces_tangential(mesh, u, k, allf, nq).ravel()
    Mp = mass_matrix(CellBasis(scal.interior_degree, np.zeros(3), 1.0), QuadRule(ref, w)) * mesh.h**3
    momp = cell_moments(mesh, p, scal.interior_degree, nq)
    out[dm.p0_offset:dm.pb_offset] = np.linalg.solve(Mp, momp.T).T.ravel()
    out[dm.pb_offset:] = project_faces_scalar(mesh, p, scal.face_degree, allf, nq).ravel()
    return WeakField(out, dm)


# ------------------------------------------------------------------ assembly

@dataclass
class SaddleSystem:
    """``[[A, -B^T], [B, S2]] (u; p) = (F; G)`` before boundary conditions."""

    matrix: sp.csr_matrix
    rhs: np.ndarray
    dofmap: DofMap
    mesh: Mesh
    quad_order: int
    constraint_values: np.ndarray | None = None


@dataclass
class ConstrainedSystem:
    matrix: sp.csr_matrix  # free-free block
    rhs: np.ndarray  # lifted right-hand side
    free: np.ndarray
    constrained: np.ndarray
    constraint_values: np.ndarray
    dofmap: DofMap

    def expand(self, x_free: np.ndarray) -> WeakField:
        x = np.zeros(self.dofmap.total)
        x[self.free] = x_free
        x[self.constrained] = self.constraint_values
        return WeakField(x, self.dofmap)


def local_saddle_stack(ops: ElementOperators, nu: np.ndarray) -> np.ndarray:
    """Per-cell local saddle matrices, ``(n_cells, n_loc, n_loc)``."""
    base = ops.saddle(0.0)
    nv = ops.vec.size
    if np.all(nu == nu[0]):
        return np.broadcast_to(base + _curl_part(ops, nv, nu[0]), (len(nu),) + base.shape)
    curl = _curl_part(ops, nv, 1.0)
    return base[None] + nu[:, None, None] * curl[None]


def _curl_part(ops: ElementOperators, nv: int, nu: float) -> np.ndarray:
    n = ops.vec.size + ops.scal.size
    out = np.zeros((n, n))
    out[:nv, :nv] = nu * ops.curl_energy
    return out


def load_vectors(mesh: Mesh, data: ProblemData, k: int, variant: str, nq: int) -> np.ndarray:
    """Global right-hand side ``((f, v0); -(g, q0))``, zero on face DOFs."""
    dm = make_dofmap(mesh, k, variant)
    scal = scalar_layout(k, variant)
    rhs = np.zeros(dm.total)
    rhs[dm.u0_offset:dm.ub_offset] = cell_moments(mesh, data.f, k, nq).ravel()
    rhs[dm.p0_offset:dm.pb_offset] = -cell_moments(mesh, data.g, scal.interior_degree, nq).ravel()
    return rhs


def scatter(l2g: np.ndarray, blocks: np.ndarray, n: int) -> sp.csr_matrix:
    """Sum per-cell dense blocks into a CSR matrix (duplicates summed in index order)."""
    rows = np.broadcast_to(l2g[:, :, None], blocks.shape).ravel()
    cols = np.broadcast_to(l2g[:, None, :], blocks.shape).ravel()
    A = sp.coo_matrix((np.ascontiguousarray(blocks).ravel(), (rows, cols)), shape=(n, n)).tocsr()
    A.sum_duplicates()
    return A


def assemble(mesh: Mesh, data: ProblemData, k: int = 1, variant: str = "full",
             quad_order: int | None = None) -> SaddleSystem:
    nq = quad_order or default_quad_order(k)
    dm = make_dofmap(mesh, k, variant)
    ops = mesh_operators(mesh, k, variant, nq)
    nu = _nu_per_cell(data, mesh.n_cells)
    K = scatter(dm.local_to_global, local_saddle_stack(ops, nu), dm.total)
    rhs = load_vectors(mesh, data, k, variant, nq)
    log.debug("assembled level %d: %d dofs, %d nnz", mesh.level, dm.total, K.nnz)
    return SaddleSystem(K, rhs, dm, mesh, nq)


def boundary_values(mesh: Mesh, data: ProblemData, dofmap: DofMap, nq: int) -> np.ndarray:
    """Values for ``dofmap.constrained``: projected tangential u and projected p."""
    if data.u_boundary is None:
        raise ValueError("missing tangential boundary data (u_boundary)")
    bfaces = np.nonzero(mesh.boundary)[0]
    ub = project_faces_tangential(mesh, data.u_boundary, dofmap.k, bfaces, nq)
    if data.p_boundary is None:
        pb = np.zeros((len(bfaces), dofmap.pb_block))
    else:
        pb = project_faces_scalar(mesh, data.p_boundary, scalar_layout(dofmap.k, dofmap.variant).face_degree,
                                  bfaces, nq)
    return np.concatenate([ub.ravel(), pb.ravel()])


def apply_boundary(system: SaddleSystem, data: ProblemData) -> ConstrainedSystem:
    """Eliminate boundary ``ub``/``pb`` rows and columns, lifting their values into the rhs."""
    dm = system.dofmap
    xc = boundary_values(system.mesh, data, dm, system.quad_order)
    system.constraint_values = xc
    free, cons = dm.free, dm.constrained
    K = system.matrix
    Kff = K[free][:, free].tocsr()
    rhs = system.rhs[free] - K[free][:, cons] @ xc
    return ConstrainedSystem(Kff, rhs, free, cons, xc, dm)


def _find_mkl_rt() -> str | None:
    if ctypes.util.find_library("mkl_rt"):
        return None
    for d in (os.path.join(sys.prefix, "lib"), "/usr/local/lib", "/usr/lib", "/usr/lib/x86_64-linux-gnu"):
        hits = sorted(glob.glob(os.path.join(d, "libmkl_rt.so*")), key=len)
        if hits:
            return hits[0]
    return None


def _pardiso():
    """Return ``pypardiso`` if it can reach an MKL runtime, else ``None``."""
    global _PARDISO
    if _PARDISO is False:
        if "PYPARDISO_MKL_RT" not in os.environ:
            path = _find_mkl_rt()
            if path:
                os.environ["PYPARDISO_MKL_RT"] = path
        try:
            import pypardiso
        except ImportError:
            _PARDISO = None
        else:
            _PARDISO = pypardiso
    return _PARDISO


_PARDISO = False

# "auto" prefers PARDISO and falls back to SuperLU
SOLVER_BACKEND = os.environ.get("WGMAXWELL_SOLVER", "auto")
RESIDUAL_TOL = 1e-8


def sparse_solve(A: sp.spmatrix, b: np.ndarray, backend: str | None = None) -> np.ndarray:
    """Direct solve of a general (unsymmetric) sparse system with pivoting."""
    backend = backend or SOLVER_BACKEND
    if A.shape[0] == 0:
        return np.zeros(0)
    pardiso = _pardiso() if backend in ("auto", "pardiso") else None
    if backend == "pardiso" and pardiso is None:
        raise RuntimeError("PARDISO backend requested but pypardiso/MKL is unavailable")
    if pardiso is not None:
        solver = pardiso.PyPardisoSolver(mtype=11)
        try:
            x = solver.solve(sp.csr_matrix(A), np.asarray(b, dtype=float))
        except Exception as exc:  # pypardiso raises a bare PyPardisoError
            raise SingularSystemError(str(exc)) from exc
        finally:
            solver.free_memory(everything=True)
    else:
        try:
            lu = spla.splu(A.tocsc(), permc_spec="COLAMD")
        except RuntimeError as exc:
            raise SingularSystemError(str(exc)) from exc
        x = lu.solve(b)
    if not np.all(np.isfinite(x)):
        raise SingularSystemError("non-finite solution")
    # PARDISO perturbs tiny pivots instead of failing, so check the residual
    res = np.linalg.norm(A @ x - b)
    if res > RESIDUAL_TOL * max(np.linalg.norm(b), np.finfo(float).tiny):
        raise SingularSystemError(f"direct solve residual {res:.2e} too large; matrix is (nearly) singular")
    return x


def solve_full(system: ConstrainedSystem) -> WeakField:
    x = sparse_solve(system.matrix, system.rhs)
    res = np.linalg.norm(system.matrix @ x - system.rhs)
    scale = max(np.linalg.norm(system.rhs), 1e-300)
    log.debug("full solve relative residual %.2e", res / scale)
    return system.expand(x)
