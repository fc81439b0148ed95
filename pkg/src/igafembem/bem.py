"""Laplace kernel and Galerkin boundary element matrices.

All matrices have entries ``int_Gamma int_Gamma psi_j(x) k(x, y) phi_i(y)``
with ``k`` the single-layer kernel ``G`` or the double-layer kernel
``dG/dn_y``. Element pairs are classified as coincident, adjacent (sharing
an endpoint, possibly across patches), near (closer than their size) or
regular. Regular pairs use tensor Gauss rules, singular pairs the Duffy
rules of :mod:`quadrature`, near pairs recursive subdivision.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .quadrature import PairClass, QuadConfig, gauss_01, singular_pair_rule

INV_2PI = 1.0 / (2.0 * np.pi)


class SingularEvaluationError(ValueError):
    pass


class DefinitenessError(ArithmeticError):
    pass


def kernel_G(x, y) -> np.ndarray:
    """Fundamental solution ``-log|x - y| / (2 pi)``."""
    d = np.asarray(x, float) - np.asarray(y, float)
    r2 = np.einsum("...i,...i->...", d, d)
    if np.any(r2 == 0.0):
        raise SingularEvaluationError("kernel evaluated at coincident points")
    return -0.5 * INV_2PI * np.log(r2)


def kernel_dG_dny(x, y, ny) -> np.ndarray:
    """Normal derivative ``(x - y) . n_y / (2 pi |x - y|^2)``."""
    d = np.asarray(x, float) - np.asarray(y, float)
    r2 = np.einsum("...i,...i->...", d, d)
    if np.any(r2 == 0.0):
        raise SingularEvaluationError("kernel evaluated at coincident points")
    return INV_2PI * np.einsum("...i,...i->...", d, np.asarray(ny, float)) / r2


# kernels used in assembly: (x, y, ny) -> values, plus the coefficient of
# log|x - y| that singular rules integrate exactly

def _kV(x, y, ny):
    d = x - y
    return -0.5 * INV_2PI * np.log(d[..., 0] ** 2 + d[..., 1] ** 2)


def _kK(x, y, ny):
    d = x - y
    return INV_2PI * (d[..., 0] * ny[..., 0] + d[..., 1] * ny[..., 1]) \
        / (d[..., 0] ** 2 + d[..., 1] ** 2)


_LOG_COEFF = {"V": -INV_2PI, "K": 0.0}
_KERNELS = {"V": _kV, "K": _kK}


class FunctionColumn:
    """A single known function used in place of a trial basis.

    ``func(x)`` receives boundary points of shape (m, 2), or
    ``func(x, n)`` with unit normals when ``normal`` is set.
    """

    size = 1

    def __init__(self, func, normal: bool = False):
        self.func = func
        self.normal = normal

    def __call__(self, x, nrm=None):
        val = self.func(x, nrm) if self.normal else self.func(x)
        return np.broadcast_to(np.asarray(val, float), (len(x),)).copy()


@dataclass
class _Element:
    patch: int
    a: float
    b: float
    rspan: int
    cspan: int | None
    x: np.ndarray       # Gauss points
    nrm: np.ndarray     # unit normals
    dw: np.ndarray      # Gauss weight * |x'| * (b - a)
    rv: np.ndarray      # row basis values
    ri: np.ndarray      # row columns
    cv: np.ndarray      # column basis values
    ci: np.ndarray
    ends: np.ndarray    # physical endpoints (2, 2)
    center: np.ndarray
    radius: float
    length: float


def _curve_data(bp, t):
    x, dx = bp.curve.eval(t, deriv=True)
    speed = np.hypot(dx[:, 0], dx[:, 1])
    nrm = bp.sign * np.column_stack([dx[:, 1], -dx[:, 0]]) / speed[:, None]
    return x, nrm, speed


class _Discretization:
    """Elements of a row basis with quadrature data for a column basis."""

    def __init__(self, rows, cols, n):
        self.rows, self.cols = rows, cols
        self.is_func = isinstance(cols, FunctionColumn)
        g = gauss_01(n)
        self.elements = []
        for k, bp in enumerate(rows.bpatches):
            mesh, rspans = rows.element_spans(k)
            cspans = None
            if not self.is_func:
                cmesh, cspans = cols.element_spans(k)
                if cmesh.shape != mesh.shape or np.abs(cmesh - mesh).max() > 1e-14:
                    raise ValueError("row and column spaces need the same breakpoints")
            for e, (a, b) in enumerate(zip(mesh[:-1], mesh[1:])):
                t = a + (b - a) * g.nodes
                x, nrm, speed = _curve_data(bp, t)
                rv, ri = rows.local(k, t, span=rspans[e])
                cs = None if cspans is None else int(cspans[e])
                cv, ci = self._col_values(k, t, cs, x, nrm)
                ends = bp.curve.eval([a, b])
                samp = bp.curve.eval(np.linspace(a, b, 5))
                center = samp[2]
                radius = np.sqrt(((samp - center) ** 2).sum(1)).max()
                dw = g.weights * (b - a) * speed
                self.elements.append(_Element(k, a, b, int(rspans[e]), cs, x, nrm, dw,
                                              rv, ri, cv, ci, ends, center, radius, dw.sum()))
        self.n = n
        E = len(self.elements)
        self.centers = np.array([el.center for el in self.elements])
        self.radii = np.array([el.radius for el in self.elements])
        self.lengths = np.array([el.length for el in self.elements])
        self.X = np.array([el.x for el in self.elements])          # (E, n, 2)
        self.NRM = np.array([el.nrm for el in self.elements])
        self.DW = np.array([el.dw for el in self.elements])
        self.CV = np.array([el.cv for el in self.elements])        # (E, n, nc)
        self.CI = np.array([el.ci for el in self.elements])        # (E, nc)
        ends = np.array([el.ends for el in self.elements])          # (E, 2, 2)
        scale = max(self.lengths.sum(), 1e-300)
        d = np.linalg.norm(ends[:, None, :, None, :] - ends[None, :, None, :, :], axis=-1)
        self.touch = d < 1e-10 * scale                              # (E, E, 2, 2)
        self.E = E

    def _col_values(self, k, t, span, x, nrm):
        if self.is_func:
            return self.cols(x, nrm)[:, None], np.zeros(1, int)
        return self.cols.local(k, t, span=span)

    def side(self, el, s, flip, row: bool):
        """Geometry and basis values at local parameters ``s`` of an element."""
        s = 1.0 - s if flip else s
        t = el.a + (el.b - el.a) * s
        bp = self.rows.bpatches[el.patch]
        x, nrm, speed = _curve_data(bp, t)
        jw = speed * (el.b - el.a)
        if row:
            vals, _ = self.rows.local(el.patch, t, span=el.rspan)
        else:
            vals, _ = self._col_values(el.patch, t, el.cspan, x, nrm)
        return x, nrm, jw, vals


def _shared_corner(touch_pair):
    """Local endpoint indices ``(i, j)`` of the shared vertex or None."""
    idx = np.argwhere(touch_pair)
    if len(idx) == 0:
        return None
    return tuple(idx[0])


def _singular_pair(disc, kind, ex, ey, cls, cfg, corner=(0, 0)):
    rule = singular_pair_rule(cls, cfg.n_gauss, cfg.log_points)
    kern = _KERNELS[kind]
    c = _LOG_COEFF[kind]
    fx, fy = bool(corner[0]), bool(corner[1])
    x, _, jx, vx = disc.side(ex, rule.s, fx, True)
    y, ny, jy, vy = disc.side(ey, rule.t, fy, False)
    if cls is PairClass.COINCIDENT:
        rho = np.abs(rule.s - rule.t)
    else:
        rho = np.maximum(rule.s, rule.t)
    kval = kern(x, y, ny)
    if c:
        kval = kval - c * np.log(rho)
    local = (vx * (rule.w * kval * jx * jy)[:, None]).T @ vy
    if c:
        x, _, jx, vx = disc.side(ex, rule.s_log, fx, True)
        y, ny, jy, vy = disc.side(ey, rule.t_log, fy, False)
        local += c * ((vx * (rule.w_log * jx * jy)[:, None]).T @ vy)
    return local


def _near_pair(disc, kind, ex, ey, cfg, m=5):
    """Bisect both elements level by level while the pieces are close.

    Pieces whose sampled distance is below ``near_factor`` times their
    sampled length are split into four sub-pairs up to ``near_depth``
    levels; all leaves are then integrated with tensor Gauss rules in one
    vectorized pass.
    """
    kern = _KERNELS[kind]
    g = gauss_01(cfg.n_gauss)
    cx = disc.rows.bpatches[ex.patch].curve
    cy = disc.rows.bpatches[ey.patch].curve
    lin = np.linspace(0.0, 1.0, m)
    cur = np.array([[0.0, 1.0, 0.0, 1.0]])
    leaves = []
    for _ in range(cfg.near_depth):
        if not len(cur):
            break
        sx = cur[:, :1] + (cur[:, 1:2] - cur[:, :1]) * lin
        sy = cur[:, 2:3] + (cur[:, 3:4] - cur[:, 2:3]) * lin
        px = cx.eval(ex.a + (ex.b - ex.a) * sx.ravel()).reshape(-1, m, 2)
        py = cy.eval(ey.a + (ey.b - ey.a) * sy.ravel()).reshape(-1, m, 2)
        dist = np.sqrt(((px[:, :, None] - py[:, None]) ** 2).sum(-1)).min(axis=(1, 2))
        size = np.maximum(np.linalg.norm(np.diff(px, axis=1), axis=2).sum(1),
                          np.linalg.norm(np.diff(py, axis=1), axis=2).sum(1))
        close = dist < cfg.near_factor * size
        leaves.append(cur[~close])
        c = cur[close]
        sm = 0.5 * (c[:, 0] + c[:, 1])
        tm = 0.5 * (c[:, 2] + c[:, 3])
        cur = np.concatenate([
            np.column_stack([c[:, 0], sm, c[:, 2], tm]),
            np.column_stack([c[:, 0], sm, tm, c[:, 3]]),
            np.column_stack([sm, c[:, 1], c[:, 2], tm]),
            np.column_stack([sm, c[:, 1], tm, c[:, 3]]),
        ])
    leaves.append(cur)
    lv = np.concatenate(leaves)
    s = lv[:, :1] + (lv[:, 1:2] - lv[:, :1]) * g.nodes
    t = lv[:, 2:3] + (lv[:, 3:4] - lv[:, 2:3]) * g.nodes
    nl, n = s.shape
    x, _, jx, vx = disc.side(ex, s.ravel(), False, True)
    y, ny, jy, vy = disc.side(ey, t.ravel(), False, False)
    x, y, ny = x.reshape(nl, n, 2), y.reshape(nl, n, 2), ny.reshape(nl, n, 2)
    K = kern(x[:, :, None, :], y[:, None, :, :], ny[:, None, :, :])
    wx = (g.weights * (lv[:, 1:2] - lv[:, :1])).ravel() * jx
    wy = (g.weights * (lv[:, 3:4] - lv[:, 2:3])).ravel() * jy
    ax = (vx * wx[:, None]).reshape(nl, n, -1)
    ay = (vy * wy[:, None]).reshape(nl, n, -1)
    return np.einsum("lak,lab,lbm->km", ax, K, ay, optimize=True)


def _assemble(kind, rows, cols, cfg: QuadConfig | None):
    cfg = QuadConfig() if cfg is None else cfg
    disc = _Discretization(rows, cols, cfg.n_gauss)
    kern = _KERNELS[kind]
    A = np.zeros((rows.size, cols.size))
    E, n = disc.E, disc.n
    for i, ex in enumerate(disc.elements):
        diff = ex.x[:, None, None, :] - disc.X[None]
        gap = np.sqrt(np.einsum("aebi,aebi->aeb", diff, diff).min(axis=(0, 2)))
        near = gap < cfg.near_factor * np.maximum(disc.lengths, ex.length)
        touch = disc.touch[i].any(axis=(1, 2))
        special = touch.copy()
        special[i] = True
        if cfg.near_depth > 0:
            special |= near
        reg = np.flatnonzero(~special)
        if reg.size:
            K = kern(ex.x[:, None, None, :], disc.X[None, reg], disc.NRM[None, reg])
            T = ((ex.rv * ex.dw[:, None]).T @ K.reshape(n, -1)).reshape(-1, reg.size, n)
            T = T.transpose(1, 0, 2) * disc.DW[reg][:, None, :]      # (R, nr, n)
            local = np.matmul(T, disc.CV[reg])
            cidx = disc.CI[reg]
            np.add.at(A, (ex.ri[None, :, None], cidx[:, None, :]), local)
        for j in np.flatnonzero(special):
            ey = disc.elements[j]
            if j == i:
                local = _singular_pair(disc, kind, ex, ey, PairClass.COINCIDENT, cfg)
            elif touch[j]:
                local = _singular_pair(disc, kind, ex, ey, PairClass.ADJACENT, cfg,
                                       _shared_corner(disc.touch[i, j]))
            else:
                local = _near_pair(disc, kind, ex, ey, cfg)
            A[np.ix_(ex.ri, ey.ci)] += local
    return A


def _diameter(bpatches, m=33):
    pts = np.concatenate([bp.curve.eval(np.linspace(0, 1, m)) for bp in bpatches])
    d = pts[:, None] - pts[None]
    return float(np.sqrt((d ** 2).sum(-1)).max())


def assemble_V(space, cfg: QuadConfig | None = None, cols=None) -> np.ndarray:
    """Single-layer matrix ``<psi_j, V psi_i>`` on a boundary basis.

    ``cols`` may be another basis or a :class:`FunctionColumn`, in which
    case the result is the vector ``<psi_j, V g>``.
    """
    if _diameter(space.bpatches) >= 1.0:
        warnings.warn("boundary diameter >= 1: V need not be positive definite",
                      RuntimeWarning, stacklevel=2)
    A = _assemble("V", space, space if cols is None else cols, cfg)
    if cols is None:
        A = 0.5 * (A + A.T)
    return A[:, 0] if isinstance(cols, FunctionColumn) else A


def assemble_K(space, trace, cfg: QuadConfig | None = None) -> np.ndarray:
    """Double-layer matrix ``<psi_j, K v_i>`` with ``v_i`` from ``trace``.

    ``trace`` is a boundary basis (usually :meth:`DomainSpace.trace_basis`)
    or a :class:`FunctionColumn`; the latter yields a vector.
    """
    A = _assemble("K", space, trace, cfg)
    return A[:, 0] if isinstance(trace, FunctionColumn) else A


def assemble_mass(space, trace, nq: int | None = None) -> np.ndarray:
    """Boundary mass ``<psi_j, v_i>``; vector if ``trace`` is a function."""
    is_func = isinstance(trace, FunctionColumn)
    if nq is None:
        nq = QuadConfig().n_gauss if is_func else \
            max(kv.p for kv in space.kvs) + max(kv.p for kv in trace.kvs) + 2
    g = gauss_01(nq)
    M = np.zeros((space.size, trace.size))
    for k, bp in enumerate(space.bpatches):
        mesh, rspans = space.element_spans(k)
        cspans = None if is_func else trace.element_spans(k)[1]
        for e, (a, b) in enumerate(zip(mesh[:-1], mesh[1:])):
            t = a + (b - a) * g.nodes
            x, nrm, speed = _curve_data(bp, t)
            rv, ri = space.local(k, t, span=rspans[e])
            if is_func:
                cv, ci = trace(x, nrm)[:, None], np.zeros(1, int)
            else:
                cv, ci = trace.local(k, t, span=cspans[e])
            w = g.weights * (b - a) * speed
            M[np.ix_(ri, ci)] += (rv * w[:, None]).T @ cv
    return M[:, 0] if is_func else M


def v_norm_sq(psi, V) -> float:
    """``psi^T V psi``; raises :class:`DefinitenessError` if clearly negative."""
    psi = np.asarray(psi, float)
    val = float(psi @ V @ psi)
    if val < -1e-12:
        raise DefinitenessError("negative V-norm: %.3e" % val)
    return max(val, 0.0)


def dump_matrix(path, A):
    """Write a dense matrix as whitespace separated text."""
    np.savetxt(path, np.atleast_2d(A), fmt="%.17e")
