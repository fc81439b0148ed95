"""Fast identity and oracle checks run by the ``selftest`` command."""

from __future__ import annotations

import numpy as np

from ..bem import assemble_K, assemble_mass, assemble_V
from ..geometry import MACHINE_RADII, build_machine_geometry, build_ring_geometry, build_square_geometry
from ..postprocess import aitken_extrapolate
from ..quadrature import QuadConfig, gauss_01, log_gauss
from ..spaces import BoundarySpace, DomainSpace
from ..splines import collocation, h_refine, make_knots


def identity_residual(domain, bpatches, p: int, level: int, cfg: QuadConfig | None = None) -> float:
    """``max |<psi_j, (1/2 + K) 1>|`` for normals pointing out of the enclosed region."""
    space = DomainSpace(domain, p, level)
    trace = space.trace_basis(bpatches)
    bspace = BoundarySpace(bpatches, p, level)
    one = trace.ones()
    r = assemble_K(bspace, trace, cfg) @ one + 0.5 * assemble_mass(bspace, trace) @ one
    return float(np.abs(r).max())


def circle_boundaries():
    """Each machine circle as the outer boundary of a thin ring (disk-outward normals)."""
    out = []
    for r in MACHINE_RADII:
        dom = build_ring_geometry(0.5 * r, r, name="circle")
        out.append(("circle r=%g" % r, dom, dom.boundaries["outer"]))
    return out


def square_V(p: int = 2, level: int = 4, cfg: QuadConfig | None = None):
    sq = build_square_geometry()
    return assemble_V(BoundarySpace(sq.boundaries["gamma"], p, level), cfg)


def v_checks(V) -> tuple:
    """Relative asymmetry and whether a Cholesky factorization succeeds."""
    asym = float(np.abs(V - V.T).max() / np.abs(V).max())
    try:
        np.linalg.cholesky(0.5 * (V + V.T))
        chol = True
    except np.linalg.LinAlgError:
        chol = False
    return asym, chol


def run_selftest(p: int = 2, level: int = 3, cfg: QuadConfig | None = None) -> list:
    """Return ``(name, passed, detail)`` tuples."""
    cfg = QuadConfig() if cfg is None else cfg
    results = []

    def add(name, ok, detail):
        results.append((name, bool(ok), detail))

    kv = h_refine(make_knots(3, 1), 5)
    x = np.linspace(0.0, 1.0, 101)
    pu = float(np.abs(collocation(kv, x)[0].sum(axis=1) - 1.0).max())
    add("partition of unity", pu < 1e-12, "%.1e" % pu)

    g = gauss_01(10)
    err = abs(g.integrate(lambda t: t ** 19) - 1.0 / 20)
    add("gauss exactness", err < 1e-14, "%.1e" % err)
    lg = log_gauss(8)
    err = abs(lg.integrate(lambda t: t ** 15) - 1.0 / 256)
    add("log-gauss exactness", err < 1e-14, "%.1e" % err)

    val, _ = aitken_extrapolate(2.0, 1.5, 1.25)
    add("aitken geometric", abs(val - 1.0) < 1e-14, "%.16g" % val)

    sq = build_square_geometry()
    res = identity_residual(sq, sq.boundaries["gamma"], p, level, cfg)
    add("(1/2+K)1 square", res < 1e-7, "%.1e" % res)
    for name, dom, bps in circle_boundaries():
        res = identity_residual(dom, bps, p, level, cfg)
        add("(1/2+K)1 " + name, res < 1e-7, "%.1e" % res)
    omb = build_machine_geometry()[2]
    res = identity_residual(omb, omb.boundary("gamma1", "gamma2"), p, level, cfg)
    add("(1/2+K)1 gap", res < 1e-7, "%.1e" % res)

    asym, chol = v_checks(square_V(p, level, cfg))
    add("V symmetric", asym < 1e-10, "%.1e" % asym)
    add("V positive definite", chol, "cholesky %s" % ("ok" if chol else "failed"))
    return results
