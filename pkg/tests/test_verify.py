import numpy as np
import pytest

from wgmaxwell.cases import CASES
from wgmaxwell.forms import zero_data
from wgmaxwell.mesh import build_mesh
from wgmaxwell.system import WeakField, assemble, make_dofmap, project_exact
from wgmaxwell.verify import (
    NORMS,
    SLICE_FIELDS,
    ErrorReport,
    convergence_study,
    error_norms,
    export_slice,
    norm_parts,
    observed_rates,
    slice_samples,
    solve_case,
)
from wgmaxwell.weakcalc import cell_basis


def const_vec(c):
    return lambda X: np.broadcast_to(np.asarray(c, dtype=float), X.shape[:-1] + (3,))


def zero_scalar(X):
    return np.zeros(X.shape[:-1])


@pytest.mark.parametrize("variant", ["full", "lowest"])
def test_zero_field_has_zero_norms(variant):
    m = build_mesh(2)
    z = WeakField(np.zeros(make_dofmap(m, 1, variant).total), make_dofmap(m, 1, variant))
    assert all(v == 0 for v in norm_parts(m, z).as_row().values())


@pytest.mark.parametrize("level", [1, 2, 3])
def test_parts_match_assembled_forms(level):
    # curl + s1 is the u-block energy; s2 is the p-block energy
    m = build_mesh(level)
    K = assemble(m, zero_data()).matrix
    dm = make_dofmap(m, 1)
    x = np.random.default_rng(level).normal(size=dm.total)
    parts = norm_parts(m, WeakField(x, dm))
    nu, npv = slice(0, dm.p0_offset), slice(dm.p0_offset, dm.total)
    assert parts.curl + parts.s1 == pytest.approx(x[nu] @ (K[nu, nu] @ x[nu]), rel=1e-12)
    assert parts.s2 == pytest.approx(x[npv] @ (K[npv, npv] @ x[npv]), rel=1e-12)


def test_constant_vector_norms():
    m = build_mesh(2)
    e = project_exact(m, const_vec([1.0, 2.0, 3.0]), zero_scalar, 1)
    p = norm_parts(m, e)
    assert p.e0 == pytest.approx(14.0, rel=1e-12)
    # squared parts are quadratic forms: round-off is eps times the squared size of the field
    for part in (p.curl, p.s1, p.div, p.jump):
        assert abs(part) < 1e-13 * 14


def test_linear_field_divergence():
    m = build_mesh(3)
    e = project_exact(m, lambda X: np.stack([X[..., 0], -X[..., 2], 0 * X[..., 0]], axis=-1), zero_scalar, 1)
    p = norm_parts(m, e)
    assert p.div == pytest.approx(1.0, rel=1e-12)
    assert abs(p.jump) < 1e-24


def test_jump_of_piecewise_constant_field():
    m = build_mesh(2)
    dm = make_dofmap(m, 1)
    c = np.random.default_rng(5).normal(size=m.n_cells)
    x = np.zeros(dm.total)
    x[dm.u0_offset + np.arange(m.n_cells) * dm.u0_block] = c  # constant term of the x component
    p = norm_parts(m, WeakField(x, dm))
    n = m.n
    cc = c.reshape(n, n, n)  # (z, y, x)
    expect = np.sum((cc[:, :, 1:] - cc[:, :, :-1]) ** 2) * m.h**2 / m.h
    assert p.jump == pytest.approx(expect, rel=1e-12)


def test_constant_pressure_norms():
    m = build_mesh(2)
    e = project_exact(m, const_vec([0, 0, 0]), lambda X: np.full(X.shape[:-1], 2.0), 1)
    p = norm_parts(m, e)
    assert p.eps0 == pytest.approx(4.0, rel=1e-12)
    assert abs(p.s2) < 1e-13 * 4 and abs(p.s2_avg) < 1e-13 * 4 and p.grad_p0 == 0


@pytest.mark.parametrize("variant", ["full", "lowest"])
def test_exact_projection_has_zero_error(variant):
    m = build_mesh(2)
    e = project_exact(m, CASES["s3"].u, CASES["s3"].p, 1, variant)
    assert max(error_norms(m, e, "s3").values()) < 1e-14


def test_observed_rates():
    assert observed_rates([1.0, 0.5, 0.125]) == [None, 1.0, 2.0]
    assert observed_rates([1e-14, 1e-15]) == [None, None]
    assert observed_rates([]) == [None]


def test_error_report():
    r = ErrorReport("s3", 1, "full", "condensed")
    for level, v in [(1, 0.4), (2, 0.1)]:
        r.add(level, {n: v for n in NORMS})
    assert r.row(2)["e0"] == 0.1
    assert r.rate_at("eps0", 2) == pytest.approx(2.0)
    d = r.to_dict()
    assert d["levels"] == [1, 2] and d["rates"]["e0"][0] is None


@pytest.mark.parametrize("levels", [[2, 1], [1, 1, 2]])
def test_convergence_study_needs_ascending_levels(levels):
    with pytest.raises(ValueError):
        convergence_study("s1", levels)


def test_convergence_study_s1_exact():
    r = convergence_study("s1", [1, 2], path="full")
    assert max(max(v) for v in r.norms.values()) < 1e-9
    assert all(x is None for n in NORMS for x in r.rates(n))


def test_solve_case_unknown_path():
    with pytest.raises(ValueError):
        solve_case(build_mesh(1), CASES["s1"], path="direct")


# -- slices

@pytest.fixture(scope="module")
def s3_level3():
    m = build_mesh(3)
    return m, solve_case(m, CASES["s3"])


def test_slice_sizes_and_grid(s3_level3):
    m, sol = s3_level3
    xy, fields = slice_samples(m, sol, CASES["s3"], 0.5, 16)
    assert xy.shape == (256, 2)
    assert set(fields) == set(SLICE_FIELDS)
    assert all(v.shape == (256,) for v in fields.values())
    assert xy.min() > 0 and xy.max() < 1


def test_slice_pointwise_oracle(s3_level3):
    m, sol = s3_level3
    z = 0.4
    xy, fields = slice_samples(m, sol, CASES["s3"], z, 10)
    for (x, y), dp, du in zip(xy, fields["p_minus_p0"], fields["u3_minus_u03"]):
        X = np.array([x, y, z])
        i, j, kk = (min(int(t / m.h), m.n - 1) for t in X)
        cell = i + m.n * j + m.n**2 * kk
        assert np.all(np.abs(X - m.cell_centers[cell]) <= m.h / 2)
        phi = cell_basis(m.element(cell), 1).eval(X[None])[0]
        assert dp == pytest.approx(CASES["s3"].p(X) - sol.p0[cell, 0], abs=1e-13)
        assert du == pytest.approx(CASES["s3"].u(X)[2] - phi @ sol.u0[cell, 2], abs=1e-13)


def test_slice_errors_vanish_for_s1():
    m = build_mesh(2)
    sol = solve_case(m, CASES["s1"])
    _, fields = slice_samples(m, sol, CASES["s1"], 0.5, 8)
    for name in SLICE_FIELDS:
        if name not in ("p", "u3"):
            assert np.abs(fields[name]).max() < 1e-9, name


@pytest.mark.parametrize("z", [0.0, 1.0, -0.2])
def test_slice_plane_must_be_interior(z, s3_level3):
    m, sol = s3_level3
    with pytest.raises(ValueError):
        slice_samples(m, sol, CASES["s3"], z, 4)


def test_export_slice_writes_tables(tmp_path, s3_level3):
    m, sol = s3_level3
    texts = export_slice(m, sol, "s3", 0.5, 4, tmp_path, prefix="s3_L3")
    for name in SLICE_FIELDS:
        lines = (tmp_path / f"s3_L3_{name}.csv").read_text().splitlines()
        assert lines[0] == "x,y,value" and len(lines) == 17
        assert texts[name].splitlines() == lines
