import numpy as np
import pytest
import scipy.sparse as sp

from wgmaxwell.cases import CASES
from wgmaxwell.forms import zero_data
from wgmaxwell.mesh import build_mesh
from wgmaxwell.polybasis import FaceBasis, face_quadrature
from wgmaxwell.system import (
    SingularSystemError,
    WeakField,
    _pardiso,
    apply_boundary,
    assemble,
    make_dofmap,
    project_exact,
    solve_full,
    sparse_solve,
)
from wgmaxwell.verify import error_norms


def test_dofmap_counts_level2():
    dm = make_dofmap(build_mesh(2), 1, "full")
    assert dm.n_cells * dm.u0_block == 96
    assert dm.n_faces * dm.ub_block == 216
    assert dm.n_cells * dm.p0_block == 8
    assert dm.n_faces * dm.pb_block == 108
    assert dm.total == 428


@pytest.mark.parametrize("variant, total", [("full", 67), ("lowest", 12 + 36 + 1 + 6)])
def test_dofmap_level1(variant, total):
    assert make_dofmap(build_mesh(1), 1, variant).total == total


@pytest.mark.parametrize("level, k, variant", [(2, 1, "full"), (3, 1, "lowest"), (2, 2, "full")])
def test_dofmap_no_collisions(level, k, variant):
    m = build_mesh(level)
    dm = make_dofmap(m, k, variant)
    l2g = dm.local_to_global
    assert all(len(set(row)) == len(row) for row in l2g)
    assert set(np.unique(l2g)) == set(range(dm.total))
    assert len(dm.free) + len(dm.constrained) == dm.total
    # u0, ub, p0, pb blocks in that order
    assert 0 == dm.u0_offset < dm.ub_offset < dm.p0_offset < dm.pb_offset < dm.total


def test_weakfield_length_checked():
    dm = make_dofmap(build_mesh(1), 1)
    with pytest.raises(ValueError):
        WeakField(np.zeros(dm.total + 1), dm)


def test_zero_data_zero_rhs():
    s = assemble(build_mesh(2), zero_data())
    assert not s.rhs.any()


def test_global_energy_of_constant_field_is_zero():
    m = build_mesh(3)
    s = assemble(m, zero_data())
    x = project_exact(m, lambda X: np.broadcast_to([1.0, 2.0, -0.5], X.shape), lambda X: 0 * X[..., 0], 1)
    nu = x.dofmap.p0_offset
    A = s.matrix[:nu, :nu]
    assert abs(x.values[:nu] @ (A @ x.values[:nu])) < 1e-12


def test_assembly_is_deterministic():
    m = build_mesh(3)
    a = assemble(m, CASES["s3"].problem_data())
    b = assemble(m, CASES["s3"].problem_data())
    assert (a.matrix != b.matrix).nnz == 0
    np.testing.assert_array_equal(a.matrix.data, b.matrix.data)
    np.testing.assert_array_equal(a.rhs, b.rhs)


def test_boundary_zero_data():
    m = build_mesh(2)
    c = apply_boundary(assemble(m, zero_data()), zero_data())
    assert not c.constraint_values.any()


def test_missing_boundary_data():
    d = zero_data()
    d.u_boundary = None
    with pytest.raises(ValueError):
        apply_boundary(assemble(build_mesh(1), d), d)


def test_boundary_reproduces_linear_tangential_field():
    m = build_mesh(2)
    data = CASES["s1"].problem_data()
    c = apply_boundary(assemble(m, data), data)
    x = c.expand(np.zeros(len(c.free)))
    for f in np.nonzero(m.boundary)[0]:
        face = m.faces[f]
        fq = face_quadrature(face, 3)
        chi = FaceBasis(1, face.center, face.t1, face.t2, m.h).eval(fq.points)
        u = CASES["s1"].u(fq.points)
        np.testing.assert_allclose(chi @ x.ub[f, 0], u @ face.t1, atol=1e-13)
        np.testing.assert_allclose(chi @ x.ub[f, 1], u @ face.t2, atol=1e-13)


def test_boundary_pressure_least_squares_oracle():
    m = build_mesh(2)
    data = CASES["s3"].problem_data()
    c = apply_boundary(assemble(m, data), data)
    x = c.expand(np.zeros(len(c.free)))
    for f in np.nonzero(m.boundary)[0][::5]:
        face = m.faces[f]
        fq = face_quadrature(face, 12)
        chi = FaceBasis(1, face.center, face.t1, face.t2, m.h).eval(fq.points)
        sw = np.sqrt(fq.weights)
        oracle, *_ = np.linalg.lstsq(sw[:, None] * chi, sw * CASES["s3"].p(fq.points), rcond=None)
        np.testing.assert_allclose(x.pb[f], oracle, atol=1e-10)


@pytest.mark.parametrize("level", [1, 2, 3])
def test_s1_exact(level):
    m = build_mesh(level)
    data = CASES["s1"].problem_data()
    sol = solve_full(apply_boundary(assemble(m, data), data))
    assert max(error_norms(m, sol, "s1").values()) < 1e-9


@pytest.mark.parametrize("variant", ["full", "lowest"])
@pytest.mark.parametrize("level", [1, 2, 3])
def test_constrained_system_nonsingular(level, variant):
    m = build_mesh(level)
    data = CASES["s3"].problem_data()
    c = apply_boundary(assemble(m, data, 1, variant), data)
    x = sparse_solve(c.matrix, c.rhs, "superlu")
    assert np.linalg.norm(c.matrix @ x - c.rhs) <= 1e-10 * np.linalg.norm(c.rhs)


def test_quadrature_saturation():
    m = build_mesh(3)
    data = CASES["s3"].problem_data()
    a = error_norms(m, solve_full(apply_boundary(assemble(m, data, quad_order=4), data)), "s3", quad_order=4)
    b = error_norms(m, solve_full(apply_boundary(assemble(m, data, quad_order=8), data)), "s3", quad_order=8)
    for n in a:
        assert abs(a[n] - b[n]) < 1e-8


def test_variable_nu_matches_scalar():
    m = build_mesh(2)
    d1 = CASES["s3"].problem_data(nu=2.0)
    d2 = CASES["s3"].problem_data(nu=2.0)
    d2.nu = np.full(m.n_cells, 2.0)
    a, b = assemble(m, d1), assemble(m, d2)
    assert abs(a.matrix - b.matrix).max() < 1e-13


BACKENDS = ["superlu"] + (["pardiso"] if _pardiso() is not None else [])


@pytest.mark.parametrize("backend", BACKENDS)
def test_sparse_solve_singular(backend):
    A = sp.csr_matrix(np.array([[1.0, 2.0], [2.0, 4.0]]))
    with pytest.raises(SingularSystemError):
        sparse_solve(A, np.array([1.0, 0.0]), backend)


@pytest.mark.parametrize("backend", BACKENDS)
def test_sparse_solve_unsymmetric(backend):
    rng = np.random.default_rng(4)
    A = sp.random(40, 40, density=0.2, random_state=5) + 5 * sp.eye(40)
    b = rng.normal(size=40)
    np.testing.assert_allclose(A @ sparse_solve(A.tocsr(), b, backend), b, atol=1e-12)


def test_sparse_solve_empty():
    assert sparse_solve(sp.csr_matrix((0, 0)), np.zeros(0)).shape == (0,)
