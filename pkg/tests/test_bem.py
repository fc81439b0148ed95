import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from igafembem.bem import (DefinitenessError, FunctionColumn, SingularEvaluationError,
                           assemble_K, assemble_mass, assemble_V, dump_matrix, kernel_dG_dny,
                           kernel_G, v_norm_sq)
from igafembem.geometry import build_ring_geometry, build_square_geometry
from igafembem.harness.selftest import circle_boundaries, identity_residual, v_checks
from igafembem.quadrature import QuadConfig
from igafembem.spaces import BoundarySpace, DomainSpace

from oracles import circle_single_layer_one

points = st.tuples(st.floats(-2, 2), st.floats(-2, 2))


def test_kernel_values():
    assert kernel_G([1, 0], [0, 0]) == pytest.approx(0.0, abs=1e-16)
    assert kernel_G([np.e, 0], [0, 0]) == pytest.approx(-1 / (2 * np.pi))
    assert kernel_dG_dny([2, 0], [0, 0], [1, 0]) == pytest.approx(1 / (4 * np.pi))
    assert kernel_dG_dny([0, 1], [0, 0], [1, 0]) == pytest.approx(0.0, abs=1e-16)


def test_kernel_coincident_points_rejected():
    with pytest.raises(SingularEvaluationError):
        kernel_G([0.1, 0.2], [0.1, 0.2])
    with pytest.raises(SingularEvaluationError):
        kernel_dG_dny([0.1, 0.2], [0.1, 0.2], [1, 0])


@given(points, points)
def test_kernel_symmetry(x, y):
    if np.hypot(x[0] - y[0], x[1] - y[1]) < 1e-6:
        return
    assert kernel_G(x, y) == pytest.approx(kernel_G(y, x), abs=1e-14)


@given(points, points, st.floats(0, 2 * np.pi))
def test_kernel_normal_derivative_finite_difference(x, y, ang):
    x, y = np.array(x), np.array(y)
    if np.linalg.norm(x - y) < 0.1:
        return
    n = np.array([np.cos(ang), np.sin(ang)])
    d = 1e-6
    fd = (kernel_G(x, y + d * n) - kernel_G(x, y - d * n)) / (2 * d)
    assert kernel_dG_dny(x, y, n) == pytest.approx(fd, abs=1e-6)


@pytest.fixture(scope="module")
def square_ops():
    sq = build_square_geometry()
    bps = sq.boundaries["gamma"]
    space = DomainSpace(sq, 2, 4)
    trace = space.trace_basis(bps)
    bs = BoundarySpace(bps, 2, 4)
    return bs, trace, assemble_V(bs), assemble_K(bs, trace), assemble_mass(bs, trace)


def test_square_V_symmetric_positive_definite(square_ops):
    V = square_ops[2]
    asym, chol = v_checks(V)
    assert asym <= 1e-10 and chol
    assert np.linalg.eigvalsh(V).min() > 0


def test_V_positive_for_random_densities(square_ops, rng):
    V = square_ops[2]
    for _ in range(100):
        assert v_norm_sq(rng.normal(size=V.shape[0]), V) > 0


def test_v_norm_sq_properties(square_ops, rng):
    V = square_ops[2]
    psi = rng.normal(size=V.shape[0])
    assert v_norm_sq(np.zeros_like(psi), V) == 0.0
    assert v_norm_sq(2 * psi, V) == pytest.approx(4 * v_norm_sq(psi, V), rel=1e-13)
    with pytest.raises(DefinitenessError):
        v_norm_sq(np.ones(2), -np.eye(2))


def test_square_double_layer_identity(square_ops):
    bs, trace, V, K, M = square_ops
    one = trace.ones()
    np.testing.assert_allclose(K @ one + 0.5 * M @ one, 0, atol=1e-8)
    # equivalently (1/2 - K) 1 = 1 in the Galerkin sense
    np.testing.assert_allclose((0.5 * M - K) @ one, M @ one, atol=1e-8)


def test_trace_mass_perimeter(square_ops):
    bs, trace, _, _, M = square_ops
    assert bs.ones() @ M @ trace.ones() == pytest.approx(2.0, abs=1e-13)


@pytest.mark.parametrize("idx", range(4))
def test_circle_identities(idx):
    name, dom, bps = circle_boundaries()[idx]
    assert identity_residual(dom, bps, 2, 3) < 1e-8


@pytest.mark.parametrize("level", [3, 4])
def test_identity_survives_refinement(level):
    sq = build_square_geometry()
    assert identity_residual(sq, sq.boundaries["gamma"], 3, level, QuadConfig(n_gauss=12)) < 1e-7


def test_circle_single_layer_oracle():
    R = 0.39
    dom = build_ring_geometry(0.2, R)
    bs = BoundarySpace(dom.boundaries["outer"], 2, 8)
    one = bs.ones()
    val = one @ assemble_V(bs) @ one
    ref = circle_single_layer_one(R)
    assert ref == pytest.approx(-2 * np.pi * R ** 2 * np.log(R), rel=1e-14)
    assert val == pytest.approx(ref, rel=1e-8)


def test_circle_single_layer_eigenfunction():
    # V cos(k theta) = R / (2k) cos(k theta) on a circle of radius R
    R, k = 0.39, 2
    dom = build_ring_geometry(0.2, R)
    bs = BoundarySpace(dom.boundaries["outer"], 3, 6)
    g = FunctionColumn(lambda x: np.cos(k * np.arctan2(x[:, 1], x[:, 0])))
    lhs = assemble_V(bs, cols=g)
    rhs = R / (2 * k) * assemble_mass(bs, g)
    np.testing.assert_allclose(lhs, rhs, atol=1e-9)


def test_large_boundary_warns():
    dom = build_ring_geometry(0.4, 0.6)
    bs = BoundarySpace(dom.boundaries["outer"], 2, 0)
    with pytest.warns(RuntimeWarning):
        assemble_V(bs)
    sq = build_square_geometry()
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assemble_V(BoundarySpace(sq.boundaries["gamma"], 1, 0))


def test_function_column_vector_shapes(square_ops):
    bs = square_ops[0]
    f = FunctionColumn(lambda x: np.ones(len(x)))
    assert assemble_K(bs, f).shape == (bs.size,)
    assert assemble_mass(bs, f) == pytest.approx(assemble_mass(bs, f))
    np.testing.assert_allclose(assemble_mass(bs, f).sum(), 2.0, atol=1e-13)


def test_dump_matrix(tmp_path, square_ops):
    V = square_ops[2]
    path = tmp_path / "V.txt"
    dump_matrix(path, V)
    np.testing.assert_array_equal(np.loadtxt(path), V)
