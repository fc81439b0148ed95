"""Representation formula, error measures and convergence records."""

from __future__ import annotations

import csv
import os
import warnings
from dataclasses import dataclass, field

import numpy as np

from .bem import INV_2PI, _curve_data, assemble_mass, assemble_V, FunctionColumn
from .quadrature import QuadConfig, gauss_01
from .spaces import BoundaryBasis, BoundarySpace, refined_knots
from .splines import refinement_matrix


class NearBoundaryWarning(RuntimeWarning):
    pass


@dataclass
class CauchyData:
    """Boundary data entering the representation formula.

    The flux is ``flux_basis`` with coefficients ``flux`` or a callable
    ``flux_fn(y, n)``; the trace likewise (``trace_fn(y)``). ``trace_offset``
    is added to the trace (``-u0`` for the exterior interface problem,
    ``+u0`` for the gap problem).
    """

    bpatches: list
    flux_basis: BoundaryBasis | None = None
    flux: np.ndarray | None = None
    trace_basis: BoundaryBasis | None = None
    trace: np.ndarray | None = None
    flux_fn: callable = None
    trace_fn: callable = None
    trace_offset: callable = None
    meshes: list | None = None

    def mesh(self, k):
        if self.meshes is not None:
            return self.meshes[k]
        basis = self.flux_basis if self.flux_basis is not None else self.trace_basis
        if basis is None:
            return np.array([0.0, 1.0])
        return basis.element_spans(k)[0]

    def values(self, k, t, y, n):
        if self.flux_fn is not None:
            phi = np.asarray(self.flux_fn(y, n), float)
        elif self.flux_basis is not None:
            phi = self.flux_basis.evaluate(self.flux, k, t)
        else:
            phi = np.zeros(len(t))
        if self.trace_fn is not None:
            tr = np.asarray(self.trace_fn(y), float)
        elif self.trace_basis is not None:
            tr = self.trace_basis.evaluate(self.trace, k, t)
        else:
            tr = np.zeros(len(t))
        if self.trace_offset is not None:
            tr = tr + np.asarray(self.trace_offset(y), float)
        return phi, tr


def interface_cauchy(sol, u0=None) -> CauchyData:
    """Exterior Cauchy data ``(u_h - u0, phi_h)`` of an interface solution."""
    tr = sol.matrices["trace"]
    off = None if u0 is None else (lambda y: -np.asarray(u0(y), float))
    return CauchyData(sol.bspace.bpatches, sol.bspace, sol.phi, tr,
                      sol.u[tr.global_dofs], trace_offset=off)


def two_domain_cauchy(sol, u0=None) -> CauchyData:
    """Gap Cauchy data ``(u_h + u0, phi_h)`` of a two-domain solution."""
    tr = sol.matrices["trace"]
    gd = tr.global_dofs
    coeffs = np.array([sol.u[i][j] for i, j in gd])
    return CauchyData(sol.bspace.bpatches, sol.bspace, sol.phi, tr, coeffs,
                      trace_offset=u0)


@dataclass
class Representation:
    values: np.ndarray
    min_distance: np.ndarray
    near_boundary: np.ndarray


def _graded_intervals(curve, mesh, x, cfg: QuadConfig, m: int = 5):
    """Parameter intervals of one boundary patch, bisected near ``x``."""
    cur = np.column_stack([mesh[:-1], mesh[1:]])
    out = []
    lin = np.linspace(0.0, 1.0, m)
    dmin = np.inf
    for depth in range(cfg.near_depth + 1):
        if not len(cur):
            break
        tt = cur[:, :1] + (cur[:, 1:] - cur[:, :1]) * lin
        pts = curve.eval(tt.ravel()).reshape(-1, m, 2)
        dist = np.sqrt(((pts - x) ** 2).sum(-1)).min(1)
        dmin = min(dmin, dist.min())
        size = np.linalg.norm(np.diff(pts, axis=1), axis=2).sum(1)
        close = dist < cfg.near_factor * size
        if depth == cfg.near_depth:
            out.append(cur)
            break
        out.append(cur[~close])
        c = cur[close]
        mid = 0.5 * (c[:, 0] + c[:, 1])
        cur = np.concatenate([np.column_stack([c[:, 0], mid]), np.column_stack([mid, c[:, 1]])])
    return np.concatenate(out), dmin


def evaluate_representation(points, cauchy: CauchyData, kappa: int = 1,
                            cfg: QuadConfig | None = None,
                            floor: float = 1e-8) -> Representation:
    """``u(x) = (-1)^kappa (int G phi - int dG/dn_y trace)`` at ``points``.

    Normals of ``cauchy.bpatches`` point out of the bounded domain. Points
    closer than ``floor`` to the boundary are flagged and a
    :class:`NearBoundaryWarning` is issued.
    """
    if kappa not in (0, 1):
        raise ValueError("kappa must be 0 (interior) or 1 (exterior)")
    cfg = QuadConfig() if cfg is None else cfg
    pts = np.atleast_2d(np.asarray(points, float))
    g = gauss_01(cfg.n_gauss)
    vals = np.zeros(len(pts))
    dmin = np.full(len(pts), np.inf)
    for k, bp in enumerate(cauchy.bpatches):
        mesh = cauchy.mesh(k)
        tl, wl, owner = [], [], []
        for i, x in enumerate(pts):
            iv, d = _graded_intervals(bp.curve, mesh, x, cfg)
            dmin[i] = min(dmin[i], d)
            h = iv[:, 1] - iv[:, 0]
            tl.append((iv[:, :1] + h[:, None] * g.nodes).ravel())
            wl.append((h[:, None] * g.weights).ravel())
            owner.append(np.full(tl[-1].size, i))
        t, w, owner = np.concatenate(tl), np.concatenate(wl), np.concatenate(owner)
        y, ny, speed = _curve_data(bp, t)
        phi, tr = cauchy.values(k, t, y, ny)
        d = pts[owner] - y
        r2 = d[:, 0] ** 2 + d[:, 1] ** 2
        if np.any(r2 == 0.0):
            raise ValueError("evaluation point on the boundary")
        G = -0.5 * INV_2PI * np.log(r2)
        dG = INV_2PI * (d[:, 0] * ny[:, 0] + d[:, 1] * ny[:, 1]) / r2
        np.add.at(vals, owner, w * speed * (G * phi - dG * tr))
    near = dmin < floor
    if near.any():
        warnings.warn("%d evaluation point(s) closer than %.1e to the boundary"
                      % (near.sum(), floor), NearBoundaryWarning, stacklevel=2)
    sign = -1.0 if kappa == 1 else 1.0
    return Representation(sign * vals, dmin, near)


@dataclass(frozen=True)
class EvaluationPath:
    """Closed evaluation curve: ``kind`` is ``"square"`` or ``"circle"``.

    ``size`` is the half-width of the square or the circle radius. The
    ``n`` points sit at parameters ``i/n``, ``i = 1..n``.
    """

    kind: str
    size: float
    n: int = 20
    name: str = ""

    def __post_init__(self):
        if self.kind not in ("square", "circle"):
            raise ValueError("unknown path kind %r" % self.kind)
        if self.n < 1 or self.size <= 0:
            raise ValueError("need n >= 1 and positive size")

    def points(self) -> np.ndarray:
        tau = np.arange(1, self.n + 1) / self.n
        if self.kind == "circle":
            a = 2 * np.pi * tau
            return self.size * np.column_stack([np.cos(a), np.sin(a)])
        a = self.size
        s = 4.0 * tau
        side = np.minimum(np.floor(s).astype(int), 3)
        f = s - side
        start = np.array([[-a, -a], [a, -a], [a, a], [-a, a]])
        direc = np.array([[1, 0], [0, 1], [-1, 0], [0, -1]], float)
        return start[side] + 2 * a * f[:, None] * direc[side]


def pointwise_error(exact, approx, path: EvaluationPath | None = None) -> float:
    """``max_i |exact_i - approx_i|``; ``exact`` may be a callable on path points."""
    if callable(exact):
        exact = exact(path.points())
    exact = np.atleast_1d(np.asarray(exact, float))
    approx = np.atleast_1d(np.asarray(approx, float))
    if exact.shape != approx.shape or exact.size == 0:
        raise ValueError("need matching non-empty value arrays")
    return float(np.abs(exact - approx).max())


def h1_error_sq(space, coeffs, exact_u, exact_grad, nq: int | None = None) -> float:
    """``|u - u_h|^2_{H^1}`` by element Gauss quadrature."""
    nq = space.p + 4 if nq is None else nq
    coeffs = np.asarray(coeffs, float)
    tot = 0.0
    for k in range(len(space.domain.patches)):
        ed = space.element_data(k, nq)
        c = coeffs[ed.dofs]
        uh = np.einsum("eql,el->eq", ed.N, c)
        gh = np.einsum("eqld,el->eqd", ed.dN, c)
        x = ed.x
        du = exact_u(x) - uh
        dg = exact_grad(x) - gh
        tot += float((ed.w * (du ** 2 + (dg ** 2).sum(-1))).sum())
    return tot


def prolong(bspace: BoundarySpace, fine: BoundarySpace, coeffs) -> np.ndarray:
    """Coefficients of a coarse boundary spline in a nested finer space."""
    out = np.zeros(fine.size)
    coeffs = np.asarray(coeffs, float)
    for k in range(len(bspace.bpatches)):
        P = refinement_matrix(bspace.kvs[k], fine.kvs[k])
        out[fine.dofs[k]] = P @ coeffs[bspace.dofs[k]]
    return out


def project_flux(fine: BoundarySpace, flux_fn) -> np.ndarray:
    """Patchwise L2 projection of ``flux_fn(y, n)`` onto ``fine``."""
    M = assemble_mass(fine, fine)
    b = assemble_mass(fine, FunctionColumn(flux_fn, normal=True))
    return np.linalg.solve(M, b)


def flux_error_vnorm_sq(bspace: BoundarySpace, phi, exact_phi, cfg: QuadConfig | None = None,
                        fine_level: int | None = None, V_fine=None) -> float:
    """``|phi - phi_h|_V^2`` on a refined boundary space (default ``h/2``)."""
    level = 2 * bspace.level + 1 if fine_level is None else fine_level
    fine = BoundarySpace(bspace.bpatches, bspace.p, level)
    e = project_flux(fine, exact_phi) - prolong(bspace, fine, phi)
    V = assemble_V(fine, cfg) if V_fine is None else V_fine
    return max(float(e @ V @ e), 0.0)


def energy_error(space, u, bspace, phi, exact_u, exact_grad_u, exact_phi,
                 cfg: QuadConfig | None = None, V_fine=None, parts: bool = False):
    """``sqrt(|u - u_h|^2_{H^1} + |phi - phi_h|^2_V)``."""
    h1 = h1_error_sq(space, u, exact_u, exact_grad_u)
    vp = flux_error_vnorm_sq(bspace, phi, exact_phi, cfg, V_fine=V_fine)
    total = float(np.sqrt(h1 + vp))
    return (total, h1, vp) if parts else total


def h1_projection(space, exact_u, exact_grad, nq: int | None = None) -> np.ndarray:
    """Coefficients of the ``H^1``-orthogonal projection onto ``space``."""
    nq = space.p + 4 if nq is None else nq
    n = space.numdofs
    G = np.zeros((n, n))
    b = np.zeros(n)
    for k in range(len(space.domain.patches)):
        ed = space.element_data(k, nq)
        w = ed.w
        loc = (np.einsum("eq,eqi,eqj->eij", w, ed.N, ed.N)
               + np.einsum("eq,eqid,eqjd->eij", w, ed.dN, ed.dN))
        rhs = (np.einsum("eq,eqi,eq->ei", w, ed.N, exact_u(ed.x))
               + np.einsum("eq,eqid,eqd->ei", w, ed.dN, exact_grad(ed.x)))
        for e in range(ed.dofs.shape[0]):
            d = ed.dofs[e]
            G[np.ix_(d, d)] += loc[e]
            np.add.at(b, d, rhs[e])
    return np.linalg.solve(G, b)


def _prolongation(bspace: BoundarySpace, fine: BoundarySpace) -> np.ndarray:
    P = np.zeros((fine.size, bspace.size))
    for k in range(len(bspace.bpatches)):
        P[np.ix_(fine.dofs[k], bspace.dofs[k])] = refinement_matrix(bspace.kvs[k], fine.kvs[k])
    return P


def best_approximation_error(space, bspace: BoundarySpace, exact_u, exact_grad_u, exact_phi,
                             cfg: QuadConfig | None = None) -> float:
    """Energy-norm distance of the exact pair from the discrete spaces.

    ``H^1`` projection for ``u`` and ``V``-orthogonal projection for ``phi``,
    both measured like :func:`energy_error` (flux on the ``h/2`` space).
    """
    h1 = h1_error_sq(space, h1_projection(space, exact_u, exact_grad_u), exact_u, exact_grad_u)
    fine = BoundarySpace(bspace.bpatches, bspace.p, 2 * bspace.level + 1)
    phi_f = project_flux(fine, exact_phi)
    P = _prolongation(bspace, fine)
    V = assemble_V(fine, cfg)
    c = np.linalg.solve(P.T @ V @ P, P.T @ V @ phi_f)
    e = phi_f - P @ c
    return float(np.sqrt(h1 + max(float(e @ V @ e), 0.0)))


def estimate_rate(h_inv, errors, k: int | None = None) -> float:
    """Least-squares slope of ``log(error)`` against ``log(1/h)`` (last ``k`` rows)."""
    h_inv = np.asarray(h_inv, float)
    errors = np.asarray(errors, float)
    if h_inv.size < 2 or h_inv.size != errors.size:
        raise ValueError("need at least two matching rows")
    if np.any(errors <= 0):
        raise ValueError("errors must be positive")
    k = min(4, h_inv.size) if k is None else min(k, h_inv.size)
    x, y = np.log(h_inv[-k:]), np.log(errors[-k:])
    return float(np.polyfit(x, y, 1)[0])


def aitken_extrapolate(x0, x1, x2, rtol: float = 1e-14):
    """Aitken's delta-squared value of three successive iterates.

    Returns ``(value, degenerate)``; with a vanishing second difference the
    last iterate is returned and ``degenerate`` is True. Works elementwise
    on arrays.
    """
    x0, x1, x2 = (np.asarray(v, float) for v in (x0, x1, x2))
    den = x2 - 2.0 * x1 + x0
    scale = np.maximum(np.maximum(np.abs(x0), np.abs(x1)), np.abs(x2))
    deg = np.abs(den) <= rtol * np.maximum(scale, 1e-300)
    safe = np.where(deg, 1.0, den)
    val = np.where(deg, x2, x0 - (x1 - x0) ** 2 / safe)
    if val.ndim == 0:
        return float(val), bool(deg)
    return val, deg


@dataclass
class ConvergenceRecord:
    """Rows ``(level, 1/h, errors by metric)`` of one refinement sweep."""

    problem: str
    p: int
    n_gauss: int = 25
    rows: list = field(default_factory=list)
    failure: str | None = None

    def add(self, level: int, errors: dict):
        if self.rows and level <= self.rows[-1][0]:
            raise ValueError("levels must increase")
        self.rows.append((int(level), level + 1, dict(errors)))

    @property
    def metrics(self):
        names = []
        for _, _, err in self.rows:
            names += [m for m in err if m not in names]
        return names

    def series(self, metric):
        rows = [(r[1], r[2][metric]) for r in self.rows if metric in r[2]]
        return np.array([r[0] for r in rows], float), np.array([r[1] for r in rows], float)

    def rate(self, metric, k: int | None = None) -> float:
        h_inv, err = self.series(metric)
        return estimate_rate(h_inv, err, k)

    def csv_path(self, outdir, metric) -> str:
        return os.path.join(outdir, "%s_p%d_%s.csv" % (self.problem, self.p, metric))

    def write_csv(self, outdir, metrics=None) -> list:
        os.makedirs(outdir, exist_ok=True)
        paths = []
        for metric in (self.metrics if metrics is None else metrics):
            path = self.csv_path(outdir, metric)
            with open(path, "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["level", "h_inv", "error"])
                for level, h_inv, err in self.rows:
                    if metric in err:
                        w.writerow([level, h_inv, repr(float(err[metric]))])
                if self.failure:
                    fh.write("# FAILED: %s\n" % self.failure)
            paths.append(path)
        return paths


def read_csv(path):
    """Rows ``(level, h_inv, error)`` of a record file (comments skipped)."""
    out = []
    with open(path) as fh:
        for row in csv.reader(line for line in fh if not line.startswith("#")):
            if row and row[0] != "level":
                out.append((int(row[0]), int(row[1]), float(row[2])))
    return out
