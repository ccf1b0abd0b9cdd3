"""Static condensation: eliminate ``(u0, p0)`` cell by cell, solve for ``(ub, pb)``, recover.

On each cell the local saddle matrix is split into interior rows/columns
``i = (u0, p0)`` and face rows/columns ``b = (ub, pb)``.  The interior solve
``u0, p0 = K_ii^{-1} (r_i - K_ib x_b)`` is the map ``(D, E)``; with ``r_i = 0``
it is ``(D1, E1)`` and with ``x_b = 0`` it is ``(D2, E2)``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .forms import ProblemData
from .mesh import Mesh
from .system import (
    DofMap,
    WeakField,
    _nu_per_cell,
    boundary_values,
    load_vectors,
    local_saddle_stack,
    make_dofmap,
    mesh_operators,
    scatter,
    sparse_solve,
)
from .weakcalc import default_quad_order

log = logging.getLogger(__name__)


def _split(dofmap: DofMap) -> tuple[np.ndarray, np.ndarray]:
    nu0 = dofmap.u0_block
    nub = 6 * dofmap.ub_block
    n0 = dofmap.p0_block
    npb = 6 * dofmap.pb_block
    interior = np.r_[0:nu0, nu0 + nub:nu0 + nub + n0]
    face = np.r_[nu0:nu0 + nub, nu0 + nub + n0:nu0 + nub + n0 + npb]
    return interior, face


@dataclass
class LocalSolver:
    """Interior elimination on one cell."""

    Kii_inv: np.ndarray
    Kib: np.ndarray
    Kbi: np.ndarray
    Kbb: np.ndarray
    n_u0: int

    def solve(self, x_b: np.ndarray, r_i: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """``(D, E)``: interior ``(u0, p0)`` from face values and interior loads."""
        x = self.Kii_inv @ (r_i - self.Kib @ x_b)
        return x[:self.n_u0], x[self.n_u0:]

    def homogeneous(self, x_b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """``(D1, E1)``"""
        return self.solve(x_b, np.zeros(self.Kii_inv.shape[0]))

    def particular(self, r_i: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """``(D2, E2)``"""
        return self.solve(np.zeros(self.Kib.shape[1]), r_i)

    @property
    def schur(self) -> np.ndarray:
        return self.Kbb - self.Kbi @ self.Kii_inv @ self.Kib


class LocalSolvers:
    """Cached interior factorizations for all cells (shared when the cells are identical)."""

    def __init__(self, mesh: Mesh, dofmap: DofMap, blocks: np.ndarray, interior_rhs: np.ndarray,
                 quad_order: int | None = None):
        self.mesh = mesh
        self.quad_order = quad_order or default_quad_order(dofmap.k)
        self.dofmap = dofmap
        self.interior, self.face = _split(dofmap)
        ii = np.ix_(self.interior, self.interior)
        ib = np.ix_(self.interior, self.face)
        bi = np.ix_(self.face, self.interior)
        bb = np.ix_(self.face, self.face)
        # blocks is either a read-only broadcast of one matrix or a true stack
        shared = blocks.strides[0] == 0
        src = blocks[:1] if shared else blocks
        Kii = src[(slice(None),) + ii]
        try:
            self.Kii_inv = np.linalg.inv(Kii)
        except np.linalg.LinAlgError as exc:
            raise RuntimeError("singular interior block in static condensation") from exc
        self.Kib = src[(slice(None),) + ib]
        self.Kbi = src[(slice(None),) + bi]
        self.Kbb = src[(slice(None),) + bb]
        self.shared = shared
        self.interior_rhs = interior_rhs  # (n_cells, n_interior_local)

    def __len__(self) -> int:
        return self.mesh.n_cells

    def __getitem__(self, cell: int) -> LocalSolver:
        j = 0 if self.shared else cell
        return LocalSolver(self.Kii_inv[j], self.Kib[j], self.Kbi[j], self.Kbb[j], self.dofmap.u0_block)

    def schur_blocks(self) -> np.ndarray:
        S = self.Kbb - self.Kbi @ self.Kii_inv @ self.Kib
        if self.shared:
            return np.broadcast_to(S[0], (len(self),) + S.shape[1:])
        return S

    def reduced_rhs(self) -> np.ndarray:
        """Per-cell ``-K_bi K_ii^{-1} r_i``, i.e. the local parts of zeta1, zeta2."""
        y = np.einsum("cij,cj->ci", np.broadcast_to(self.Kii_inv, (len(self),) + self.Kii_inv.shape[1:]),
                      self.interior_rhs)
        Kbi = np.broadcast_to(self.Kbi, (len(self),) + self.Kbi.shape[1:])
        return -np.einsum("cij,cj->ci", Kbi, y)

    def recover(self, x_faces_local: np.ndarray) -> np.ndarray:
        """Interior values ``K_ii^{-1}(r_i - K_ib x_b)`` for all cells: ``(n_cells, n_interior_local)``."""
        n = len(self)
        Kib = np.broadcast_to(self.Kib, (n,) + self.Kib.shape[1:])
        Kinv = np.broadcast_to(self.Kii_inv, (n,) + self.Kii_inv.shape[1:])
        r = self.interior_rhs - np.einsum("cij,cj->ci", Kib, x_faces_local)
        return np.einsum("cij,cj->ci", Kinv, r)


def build_local_solvers(mesh: Mesh, data: ProblemData, k: int = 1, variant: str = "full",
                        quad_order: int | None = None) -> LocalSolvers:
    nq = quad_order or default_quad_order(k)
    dm = make_dofmap(mesh, k, variant)
    ops = mesh_operators(mesh, k, variant, nq)
    nu = _nu_per_cell(data, mesh.n_cells)
    blocks = local_saddle_stack(ops, nu)
    rhs = load_vectors(mesh, data, k, variant, nq)
    interior, _ = _split(dm)
    r_i = rhs[dm.local_to_global[:, interior]]
    return LocalSolvers(mesh, dm, blocks, r_i, nq)


@dataclass
class CondensedSystem:
    """Face-only system in ``(ub, pb)``; ``index`` maps global face DOFs to condensed ones."""

    matrix: sp.csr_matrix
    rhs: np.ndarray
    dofmap: DofMap
    face_l2g: np.ndarray  # (n_cells, n_face_local) condensed indices
    constrained: np.ndarray | None = None
    constraint_values: np.ndarray | None = None

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    def condensed_index(self, global_dofs: np.ndarray) -> np.ndarray:
        dm = self.dofmap
        g = np.asarray(global_dofs)
        n_ub = dm.n_faces * dm.ub_block
        return np.where(g >= dm.pb_offset, g - dm.pb_offset + n_ub, g - dm.ub_offset)


def assemble_condensed(mesh: Mesh, solvers: LocalSolvers, data: ProblemData | None = None) -> CondensedSystem:
    """Scatter the per-cell Schur complements and reduced loads.

    If ``data`` is given, boundary face values are attached as constraints.
    """
    dm = solvers.dofmap
    n_ub = dm.n_faces * dm.ub_block
    n = n_ub + dm.n_faces * dm.pb_block
    glob = dm.local_to_global[:, solvers.face]
    face_l2g = np.where(glob >= dm.pb_offset, glob - dm.pb_offset + n_ub, glob - dm.ub_offset)
    S = scatter(face_l2g, solvers.schur_blocks(), n)
    rhs = np.zeros(n)
    np.add.at(rhs, face_l2g.ravel(), solvers.reduced_rhs().ravel())
    cs = CondensedSystem(S, rhs, dm, face_l2g)
    if data is not None:
        cs.constrained = cs.condensed_index(dm.constrained)
        cs.constraint_values = boundary_values(mesh, data, dm, solvers.quad_order)
    return cs


def solve_condensed_and_recover(condensed: CondensedSystem, solvers: LocalSolvers) -> WeakField:
    """Step 1: solve the constrained face system.  Step 2: recover ``(u0, p0)`` per cell."""
    dm = condensed.dofmap
    n = condensed.size
    xb = np.zeros(n)
    if condensed.constrained is None:
        free = np.arange(n)
    else:
        mask = np.ones(n, dtype=bool)
        mask[condensed.constrained] = False
        free = np.nonzero(mask)[0]
        xb[condensed.constrained] = condensed.constraint_values
    S = condensed.matrix
    Sff = S[free][:, free]
    rhs = condensed.rhs[free] - S[free] @ xb
    xb[free] = sparse_solve(Sff, rhs)
    log.debug("condensed solve: %d unknowns, %d nnz", len(free), Sff.nnz)

    interior = solvers.recover(xb[condensed.face_l2g])
    out = np.zeros(dm.total)
    n_ub = dm.n_faces * dm.ub_block
    out[dm.ub_offset:dm.p0_offset] = xb[:n_ub]
    out[dm.pb_offset:] = xb[n_ub:]
    out[dm.local_to_global[:, solvers.interior]] = interior
    return WeakField(out, dm)
