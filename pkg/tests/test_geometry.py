import numpy as np
import pytest
from hypothesis import given, strategies as st

from igafembem.geometry import (MACHINE_RADII, DegenerateGeometryError, KnotVector, NurbsCurve,
                                NurbsSurface, build_machine_geometry, build_ring_geometry,
                                build_square_geometry, dump_geometry, jacobian, load_geometry,
                                map_point, outward_normal, read_geometry, write_geometry)
from igafembem.quadrature import gauss_01

QUAD = KnotVector([0, 0, 0, 1, 1, 1], 2)


def quarter_arc(R=1.0):
    return NurbsCurve(QUAD, [[R, 0], [R, R], [0, R]], [1, np.sqrt(0.5), 1])


def closed_normal_integral(bps, n=20):
    g = gauss_01(n)
    total = np.zeros(2)
    for bp in bps:
        for a, b in zip(bp.curve.kv.mesh[:-1], bp.curve.kv.mesh[1:]):
            t = a + (b - a) * g.nodes
            _, dx = bp.curve.eval(t, deriv=True)
            total += (b - a) * (g.weights * np.hypot(dx[:, 0], dx[:, 1])) @ bp.normal(t)
    return total


def test_square_center_and_jacobian():
    sq = build_square_geometry()
    np.testing.assert_allclose(map_point(sq.patches[0], [0.5, 0.5]), [0, 0], atol=1e-16)
    np.testing.assert_allclose(jacobian(sq.patches[0], [0.3, 0.8]), np.diag([0.5, 0.5]), atol=1e-15)


def test_quarter_arc_midpoint():
    x = map_point(quarter_arc(), 0.5)
    np.testing.assert_allclose(x, [np.sqrt(0.5), np.sqrt(0.5)], atol=1e-15)
    assert np.linalg.norm(x) == pytest.approx(1.0, abs=1e-14)


def test_unit_weights_reduce_to_bspline():
    pts = np.array([[0, 0], [1, 2], [3, 1]], float)
    a = NurbsCurve(QUAD, pts)
    b = NurbsCurve(QUAD, pts, 2.5 * np.ones(3))
    t = np.linspace(0, 1, 11)
    np.testing.assert_allclose(a.eval(t), b.eval(t), atol=1e-15)
    B = np.column_stack([(1 - t) ** 2, 2 * t * (1 - t), t ** 2])
    np.testing.assert_allclose(a.eval(t), B @ pts, atol=1e-15)


def test_arc_length_of_quarter_circle():
    assert quarter_arc(0.39).length() == pytest.approx(0.5 * np.pi * 0.39, abs=1e-10)


def test_jacobian_finite_differences(rng):
    surf = build_machine_geometry()[0].patches[2]
    d = 1e-6
    for u, v in rng.uniform(0.05, 0.95, (10, 2)):
        J = jacobian(surf, [u, v])
        fu = (map_point(surf, [u + d, v]) - map_point(surf, [u - d, v])) / (2 * d)
        fv = (map_point(surf, [u, v + d]) - map_point(surf, [u, v - d])) / (2 * d)
        np.testing.assert_allclose(J[:, 0], fu, atol=1e-5)
        np.testing.assert_allclose(J[:, 1], fv, atol=1e-5)


def test_square_bottom_normal():
    sq = build_square_geometry()
    bottom = sq.boundaries["gamma"][0]
    np.testing.assert_allclose(outward_normal(bottom, np.linspace(0, 1, 5)),
                               np.tile([0.0, -1.0], (5, 1)), atol=1e-15)


def test_square_facts():
    sq = build_square_geometry()
    assert len(sq.patches) == 1 and len(sq.boundaries["gamma"]) == 4
    assert sq.diameter() == pytest.approx(0.5 * np.sqrt(2), abs=1e-12)
    assert sq.diameter() < 1


def test_gap_normals_point_out_of_gap(rng):
    om1, om2, omb = build_machine_geometry()
    t = rng.uniform(0, 1, 30)
    for bp in om1.boundaries["gamma"] + omb.boundaries["gamma1"]:
        x = bp.curve.eval(t)
        np.testing.assert_allclose(bp.normal(t), -x / np.linalg.norm(x, axis=1)[:, None], atol=1e-14)
    for bp in om2.boundaries["gamma"] + omb.boundaries["gamma2"]:
        x = bp.curve.eval(t)
        np.testing.assert_allclose(bp.normal(t), x / np.linalg.norm(x, axis=1)[:, None], atol=1e-14)


def test_dirichlet_normals_point_out_of_rings(rng):
    om1, om2, _ = build_machine_geometry()
    t = rng.uniform(0, 1, 10)
    for dom, sign in ((om1, -1.0), (om2, 1.0)):
        for bp in dom.boundaries["dirichlet"]:
            x = bp.curve.eval(t)
            np.testing.assert_allclose(bp.normal(t), sign * x / np.linalg.norm(x, axis=1)[:, None],
                                       atol=1e-14)


@given(st.integers(0, 10**6))
def test_circles_are_exact(seed):
    rng = np.random.default_rng(seed)
    t = rng.uniform(0, 1, 250)
    doms = build_machine_geometry()
    for dom in doms:
        for bps in dom.boundaries.values():
            for bp in bps:
                r = np.linalg.norm(bp.curve.eval(t), axis=1)
                assert np.any(np.abs(r[0] - np.array(MACHINE_RADII)) < 1e-12)
                np.testing.assert_allclose(r, r[0], atol=1e-12)
                assert np.linalg.norm(bp.normal(t), axis=1) == pytest.approx(1.0, abs=1e-14)


def test_interfaces_match():
    t = np.linspace(0, 1, 100)
    for dom in build_machine_geometry():
        assert len(dom.interfaces) == 4
        for (k, s), (l, s2), rev in dom.interfaces:
            xa = dom.patches[k].edge(s).eval(t)
            xb = dom.patches[l].edge(s2).eval(t[::-1] if rev else t)
            np.testing.assert_allclose(xa, xb, atol=1e-12)


def test_patch_regularity_and_degree():
    for dom in build_machine_geometry():
        assert len(dom.patches) == 4
        for surf in dom.patches:
            assert surf.degrees == (2, 2)
            assert surf.check_regular() > 0


def test_closed_boundary_normal_integral_vanishes():
    sq = build_square_geometry()
    np.testing.assert_allclose(closed_normal_integral(sq.boundaries["gamma"]), 0, atol=1e-14)
    omb = build_machine_geometry()[2]
    np.testing.assert_allclose(closed_normal_integral(omb.boundary("gamma1", "gamma2")), 0,
                               atol=1e-13)


def test_geometry_file_roundtrip(tmp_path):
    om1 = build_machine_geometry()[0]
    path = tmp_path / "om1.geo"
    write_geometry(om1, path)
    back = read_geometry(path)
    assert set(back.boundaries) == set(om1.boundaries)
    t = np.linspace(0, 1, 7)
    for label in om1.boundaries:
        for a, b in zip(om1.boundaries[label], back.boundaries[label]):
            np.testing.assert_allclose(a.curve.eval(t), b.curve.eval(t), atol=1e-15)
            np.testing.assert_allclose(a.normal(t), b.normal(t), atol=1e-15)
    assert dump_geometry(back) == dump_geometry(om1)


def test_degenerate_patch_rejected():
    lin = KnotVector([0, 0, 1, 1], 1)
    pts = np.array([[[0, 0], [0, 0]], [[1, 0], [1, 1]]], float)   # collapsed edge
    with pytest.raises(DegenerateGeometryError):
        from igafembem.geometry import MultipatchDomain
        MultipatchDomain([NurbsSurface(lin, lin, pts)])


def test_bad_geometry_text():
    with pytest.raises(ValueError):
        load_geometry("bogus 1\n")


def test_negative_weights_rejected():
    with pytest.raises(ValueError):
        NurbsCurve(QUAD, np.zeros((3, 2)), [1, -1, 1])


def test_ring_builder_labels():
    dom = build_ring_geometry(0.2, 0.3)
    assert set(dom.boundaries) == {"inner", "outer"}
    assert dom.diameter() == pytest.approx(0.6, abs=1e-12)
