import numpy as np
import pytest

from igafembem.geometry import build_machine_geometry, build_square_geometry
from igafembem.spaces import BoundarySpace, DomainSpace


@pytest.mark.parametrize("p,level", [(1, 3), (2, 2), (3, 4)])
def test_linear_functions_reproduced(p, level):
    sq = build_square_geometry()
    sp = DomainSpace(sq, p, level)
    g = sp.greville_points
    c = 2 * g[:, 0] - 3 * g[:, 1] + 0.5
    u = np.linspace(0, 1, 5)
    v = np.full_like(u, 0.3)
    val, grad = sp.evaluate(c, 0, u, v, grad=True)
    x = sq.patches[0].eval(u, v)
    np.testing.assert_allclose(val, 2 * x[:, 0] - 3 * x[:, 1] + 0.5, atol=1e-14)
    np.testing.assert_allclose(grad, np.tile([2.0, -3.0], (5, 1)), atol=1e-13)


def test_ring_degree_below_geometry_rejected():
    with pytest.raises(ValueError):
        DomainSpace(build_machine_geometry()[0], 1, 2)


def test_ring_area_by_element_weights():
    om2 = build_machine_geometry()[1]
    sp = DomainSpace(om2, 2, 3)
    area = sum(sp.element_data(k).w.sum() for k in range(4))
    assert area == pytest.approx(np.pi * (0.6 ** 2 - 0.4 ** 2), rel=1e-11)


def test_dof_counts_and_dirichlet():
    om1 = build_machine_geometry()[0]
    sp = DomainSpace(om1, 2, 1, dirichlet=["dirichlet"])
    # per ring: 4 patches, 4x4 coefficients, glued into 4*3 angular x 4 radial
    assert sp.numdofs == 4 * 3 * 4
    assert sp.numfree == sp.numdofs - 12
    assert sp.h == pytest.approx(0.5)


def test_continuity_across_interfaces(rng):
    om1 = build_machine_geometry()[0]
    sp = DomainSpace(om1, 3, 2)
    c = rng.normal(size=sp.numdofs)
    v = np.linspace(0, 1, 9)
    for (k, s), (l, s2), rev in om1.interfaces:
        def edge_vals(patch, side, t):
            if side[0] == "u":
                u = np.full_like(t, float(side[1]))
                return sp.evaluate(c, patch, u, t)
            return sp.evaluate(c, patch, t, np.full_like(t, float(side[1])))
        a = edge_vals(k, s, v)
        b = edge_vals(l, s2, v[::-1] if rev else v)
        np.testing.assert_allclose(a, b, atol=1e-13)


def test_boundary_space_contains_constants():
    om1 = build_machine_geometry()[0]
    bs = BoundarySpace(om1.boundaries["gamma"], 2, 3)
    t = np.linspace(0, 1, 7)
    for k in range(len(bs.bpatches)):
        np.testing.assert_allclose(bs.evaluate(bs.ones(), k, t), 1.0, atol=1e-14)
    assert bs.size == 4 * (4 + 1)   # degree 1, 4 elements per patch
    assert all(kv.p == 1 for kv in bs.kvs)


def test_trace_basis_matches_domain_function(rng):
    sq = build_square_geometry()
    sp = DomainSpace(sq, 2, 3)
    tr = sp.trace_basis(sq.boundaries["gamma"])
    c = rng.normal(size=sp.numdofs)
    t = np.linspace(0, 1, 6)
    bottom = tr.evaluate(c[tr.global_dofs], 0, t)
    np.testing.assert_allclose(bottom, sp.evaluate(c, 0, t, np.zeros_like(t)), atol=1e-14)
