"""Error norms, convergence studies and slice export for the manufactured cases."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .cases import ManufacturedCase, derive_case_data
from .condense import assemble_condensed, build_local_solvers, solve_condensed_and_recover
from .mesh import LOCAL_FACE_AXIS, LOCAL_FACE_SIGN, FRAMES, Mesh, build_mesh
from .polybasis import CellBasis, reference_cube_rule, reference_square_rule
from .system import (
    WeakField,
    _nu_per_cell,
    apply_boundary,
    assemble,
    mesh_operators,
    project_exact,
    solve_full,
)
from .weakcalc import block_mass, default_quad_order

log = logging.getLogger(__name__)

NORMS = ("energy1", "e0", "eps_h0", "eps_h0h", "eps0")
NORM_LABELS = {
    "energy1": "|||e_h|||_1",
    "e0": "||e_0||",
    "eps_h0": "|||eps_h|||_0",
    "eps_h0h": "|||eps_h|||_0,h",
    "eps0": "||eps_0||",
}


@dataclass
class NormParts:
    """Squared pieces of every reported norm, kept for consistency checks."""

    curl: float
    s1: float
    div: float
    jump: float
    e0: float
    s2: float
    grad_p0: float
    s2_avg: float
    eps0: float
    h: float

    @property
    def energy(self) -> float:
        return math.sqrt(self.curl + self.s1)

    def as_row(self) -> dict[str, float]:
        return {
            "energy1": self.energy + math.sqrt(self.div) + math.sqrt(self.jump),
            "e0": math.sqrt(self.e0),
            "eps_h0": math.sqrt(self.s2) + self.h * math.sqrt(self.grad_p0),
            "eps_h0h": math.sqrt(self.s2_avg),
            "eps0": math.sqrt(self.eps0),
        }


def _cell_trace_basis(k: int, lf: int, nq: int) -> np.ndarray:
    """Reference cell basis on local face ``lf`` at the face rule points (frame order)."""
    ref, _ = reference_square_rule(nq)
    axis = LOCAL_FACE_AXIS[lf]
    t1, t2 = FRAMES[axis]
    pts = 0.5 * LOCAL_FACE_SIGN[lf] * np.eye(3)[axis] + ref[:, :1] * t1 + ref[:, 1:] * t2
    return CellBasis(k, np.zeros(3), 1.0).eval(pts)


def norm_parts(mesh: Mesh, err: WeakField, nu=1.0, quad_order: int | None = None) -> NormParts:
    """All norm pieces for a discrete error field ``err = Q_h(u, p) - (u_h, p_h)``."""
    dm = err.dofmap
    k = dm.k
    nq = quad_order or default_quad_order(k)
    ops = mesh_operators(mesh, k, dm.variant, nq)
    h = mesh.h
    nuc = np.broadcast_to(np.asarray(nu, dtype=float), (mesh.n_cells,))

    loc = err.values[dm.local_to_global]
    nv = ops.vec.size
    ev, es = loc[:, :nv], loc[:, nv:]

    w = ev @ ops.curl.T
    curl2 = float(np.einsum("c,ci,ij,cj->", nuc, w, block_mass(ops.mass_km1), w))
    s1 = float(np.einsum("ci,ij,cj->", ev, ops.s1, ev))
    e0_coef = ev[:, :ops.vec.n_interior]
    e0 = float(np.einsum("ci,ij,cj->", e0_coef, block_mass(ops.mass_k), e0_coef))

    # divergence of e0 on the cell rule
    ref, wq = reference_cube_rule(nq)
    grad = CellBasis(k, np.zeros(3), 1.0).grad(ref) / h  # (nq, nk, 3)
    nk = grad.shape[1]
    div_at = sum(e0_coef[:, d * nk:(d + 1) * nk] @ grad[:, :, d].T for d in range(3))
    div = float(np.sum(wq * h**3 * div_at**2))

    # normal jumps of e0 across interior faces
    jump = 0.0
    fr, fw = reference_square_rule(nq)
    fw = fw * h * h
    u0 = err.u0  # (nc, 3, nk)
    for axis in range(3):
        faces = np.nonzero((mesh.face_axis == axis) & ~mesh.boundary)[0]
        if len(faces) == 0:
            continue
        minus, plus = mesh.face_cells[faces, 0], mesh.face_cells[faces, 1]
        tr_minus = _cell_trace_basis(k, 2 * axis + 1, nq)
        tr_plus = _cell_trace_basis(k, 2 * axis, nq)
        jmp = u0[minus, axis] @ tr_minus.T - u0[plus, axis] @ tr_plus.T
        jump += float(np.sum(fw * jmp**2)) / h

    s2 = float(np.einsum("ci,ij,cj->", es, ops.s2, es))
    n0 = ops.scal.n_interior
    eps0_coef = es[:, :n0]
    eps0 = float(np.einsum("ci,ij,cj->", eps0_coef, ops.mass_p0, eps0_coef))
    if ops.scal.interior_degree > 0:
        gp = CellBasis(ops.scal.interior_degree, np.zeros(3), 1.0).grad(ref) / h
        gvals = np.einsum("ci,qid->cqd", eps0_coef, gp)
        grad_p0 = float(np.sum(wq * h**3 * np.sum(gvals**2, axis=-1)))
    else:
        grad_p0 = 0.0

    # q0 - Pi qb with Pi the face mean
    s2_avg = 0.0
    for lf, (fwts, S) in enumerate(zip(ops.face_weights, ops.scalar_jump)):
        interior_vals = es[:, :n0] @ S[:, :n0].T  # (nc, nqf)
        sl = ops.scal.face_slice(lf)
        face_vals = -(es[:, sl] @ S[:, sl].T)
        mean = face_vals @ fwts / fwts.sum()
        diff = interior_vals - mean[:, None]
        s2_avg += h * float(np.sum(fwts * diff**2))

    return NormParts(curl2, s1, div, jump, e0, s2, grad_p0, s2_avg, eps0, h)


def error_norms(mesh: Mesh, solution: WeakField, case: ManufacturedCase | str, k: int = 1,
                nu=1.0, quad_order: int | None = None) -> dict[str, float]:
    """The five reported norms of ``(Q_h u - u_h, Q_h p - p_h)``."""
    if isinstance(case, str):
        case = derive_case_data(case)
    exact = project_exact(mesh, case.u, case.p, k, solution.dofmap.variant, quad_order)
    return norm_parts(mesh, exact - solution, nu, quad_order).as_row()


def solve_case(mesh: Mesh, case: ManufacturedCase, k: int = 1, variant: str = "full",
               path: str = "condensed", quad_order: int | None = None, nu: float = 1.0) -> WeakField:
    data = case.problem_data(nu)
    if path == "condensed":
        solvers = build_local_solvers(mesh, data, k, variant, quad_order)
        return solve_condensed_and_recover(assemble_condensed(mesh, solvers, data), solvers)
    if path == "full":
        return solve_full(apply_boundary(assemble(mesh, data, k, variant, quad_order), data))
    raise ValueError(f"unknown solve path {path!r}")


# errors below this are round-off; a rate between them means nothing
RATE_FLOOR = 1e-12


def observed_rates(values: list[float], floor: float = RATE_FLOOR) -> list[float | None]:
    """``log2(err_{L-1} / err_L)``; ``None`` for the first level or an error at round-off level."""
    out: list[float | None] = [None]
    for prev, cur in zip(values, values[1:]):
        if prev > floor and cur > floor:
            out.append(math.log2(prev / cur))
        else:
            out.append(None)
    return out


@dataclass
class ErrorReport:
    case: str
    k: int
    variant: str
    path: str
    levels: list[int] = field(default_factory=list)
    norms: dict[str, list[float]] = field(default_factory=lambda: {n: [] for n in NORMS})

    def add(self, level: int, row: dict[str, float]) -> None:
        self.levels.append(level)
        for n in NORMS:
            self.norms[n].append(row[n])

    def rates(self, name: str) -> list[float | None]:
        return observed_rates(self.norms[name])

    def row(self, level: int) -> dict[str, float]:
        i = self.levels.index(level)
        return {n: self.norms[n][i] for n in NORMS}

    def rate_at(self, name: str, level: int) -> float | None:
        return self.rates(name)[self.levels.index(level)]

    def to_dict(self) -> dict:
        return {
            "case": self.case, "k": self.k, "variant": self.variant, "path": self.path,
            "levels": self.levels,
            "norms": {n: self.norms[n] for n in NORMS},
            "rates": {n: self.rates(n) for n in NORMS},
        }


def convergence_study(case: str | ManufacturedCase, levels, k: int = 1, variant: str = "full",
                      path: str = "condensed", quad_order: int | None = None, nu: float = 1.0) -> ErrorReport:
    if isinstance(case, str):
        case = derive_case_data(case)
    levels = list(levels)
    if levels != sorted(levels) or len(set(levels)) != len(levels):
        raise ValueError("levels must be strictly ascending")
    report = ErrorReport(case.name, k, variant, path)
    for level in levels:
        mesh = build_mesh(level)
        try:
            sol = solve_case(mesh, case, k, variant, path, quad_order, nu)
        except Exception as exc:
            raise RuntimeError(f"solve failed for case {case.name}, level {level}: {exc}") from exc
        report.add(level, error_norms(mesh, sol, case, k, nu, quad_order))
        log.info("case %s level %d done", case.name, level)
    return report


# --------------------------------------------------------------------- slices

SLICE_FIELDS = ("p", "p_minus_p0", "p_minus_pb", "u3", "u3_minus_u03", "ut1_minus_ub1", "ut2_minus_ub2")


def _locate(mesh: Mesh, x: np.ndarray) -> np.ndarray:
    ijk = np.clip(np.floor(x / mesh.h).astype(int), 0, mesh.n - 1)
    return ijk[..., 0] + mesh.n * ijk[..., 1] + mesh.n * mesh.n * ijk[..., 2]


def _eval_cell(mesh: Mesh, coef: np.ndarray, cells: np.ndarray, x: np.ndarray, degree: int) -> np.ndarray:
    """Evaluate per-cell coefficients ``coef[cell, ..., dim]`` at points ``x``."""
    t = (x - mesh.cell_centers[cells]) / mesh.h
    phi = CellBasis(degree, np.zeros(3), 1.0).eval(t)  # (npts, dim)
    return np.einsum("p...i,pi->p...", coef[cells], phi)


def _eval_face(mesh: Mesh, coef: np.ndarray, faces: np.ndarray, x: np.ndarray, degree: int) -> np.ndarray:
    from .polybasis import FaceBasis

    d = x - mesh.face_centers[faces]
    xi = np.stack([np.einsum("pd,pd->p", d, mesh.face_t1[faces]),
                   np.einsum("pd,pd->p", d, mesh.face_t2[faces])], axis=-1) / mesh.h
    chi = FaceBasis(degree, np.zeros(3), np.eye(3)[0], np.eye(3)[1], 1.0).eval(
        np.concatenate([xi, np.zeros((len(xi), 1))], axis=1))
    return np.einsum("p...i,pi->p...", coef[faces], chi)


def slice_samples(mesh: Mesh, solution: WeakField, case: ManufacturedCase, plane_z: float,
                  resolution: int) -> tuple[np.ndarray, dict[str, np.ndarray]]:
    """Sample the slice fields on a ``resolution x resolution`` grid of cell-centered points.

    Face quantities are read on the z-normal faces of the mesh plane nearest
    to ``plane_z`` and compared with the exact solution on that plane.
    """
    if not 0.0 < plane_z < 1.0:
        raise ValueError("plane_z must lie strictly inside (0, 1)")
    dm = solution.dofmap
    s = (np.arange(resolution) + 0.5) / resolution
    X, Y = np.meshgrid(s, s, indexing="xy")
    xy = np.stack([X.ravel(), Y.ravel()], axis=1)
    pts = np.column_stack([xy, np.full(len(xy), plane_z)])
    cells = _locate(mesh, pts)

    zf = round(plane_z * mesh.n) / mesh.n
    fpts = np.column_stack([xy, np.full(len(xy), zf)])
    ij = np.clip(np.floor(xy / mesh.h).astype(int), 0, mesh.n - 1)
    lz = int(round(plane_z * mesh.n))
    faces = 2 * mesh.faces_per_axis + ij[:, 0] + mesh.n * ij[:, 1] + mesh.n * mesh.n * lz

    p = case.p(pts)
    p0 = _eval_cell(mesh, solution.p0, cells, pts, dm._scal.interior_degree)
    pb = _eval_face(mesh, solution.pb, faces, fpts, dm._scal.face_degree)
    u = case.u(pts)
    u0 = _eval_cell(mesh, solution.u0, cells, pts, dm.k)  # (npts, 3)
    ub = _eval_face(mesh, solution.ub, faces, fpts, dm.k)  # (npts, 2)
    uf = case.u(fpts)
    t1, t2 = FRAMES[2]
    fields = {
        "p": p,
        "p_minus_p0": p - p0,
        "p_minus_pb": case.p(fpts) - pb,
        "u3": u[:, 2],
        "u3_minus_u03": u[:, 2] - u0[:, 2],
        "ut1_minus_ub1": uf @ t1 - ub[:, 0],
        "ut2_minus_ub2": uf @ t2 - ub[:, 1],
    }
    return xy, fields


def export_slice(mesh: Mesh, solution: WeakField, case: ManufacturedCase | str, plane_z: float,
                 resolution: int, out_dir: str | Path | None = None, prefix: str = "slice") -> dict[str, str]:
    """Write one ``x,y,value`` CSV table per slice field; returns field -> text."""
    if isinstance(case, str):
        case = derive_case_data(case)
    xy, fields = slice_samples(mesh, solution, case, plane_z, resolution)
    texts = {}
    for name in SLICE_FIELDS:
        lines = ["x,y,value"]
        lines += [f"{x:.6f},{y:.6f},{v:.10e}" for (x, y), v in zip(xy, fields[name])]
        texts[name] = "\n".join(lines) + "\n"
        if out_dir is not None:
            out = Path(out_dir)
            out.mkdir(parents=True, exist_ok=True)
            (out / f"{prefix}_{name}.csv").write_text(texts[name])
    return texts
