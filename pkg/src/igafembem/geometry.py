"""NURBS patches, multipatch domains and the built-in geometries."""

from __future__ import annotations

import io
from dataclasses import dataclass, field, replace

import numpy as np

from .splines import KnotVector, active_basis, collocation

SIDES = ("u0", "u1", "v0", "v1")


class DegenerateGeometryError(ValueError):
    pass


def _rational(B, dB, cw, w):
    """Rational map and its derivative from B-spline values of ``(c*w, w)``."""
    A = B @ cw
    W = B @ w
    x = A / W[:, None]
    dA = dB @ cw
    dW = dB @ w
    dx = (dA - x * dW[:, None]) / W[:, None]
    return x, dx


class NurbsCurve:
    """Rational B-spline curve ``[0, 1] -> R^2``."""

    def __init__(self, kv: KnotVector, points, weights=None):
        self.kv = kv
        self.points = np.asarray(points, dtype=float).reshape(kv.numdofs, 2)
        w = np.ones(kv.numdofs) if weights is None else np.asarray(weights, float)
        if w.shape != (kv.numdofs,) or np.any(w <= 0):
            raise ValueError("weights must be positive, one per control point")
        self.weights = w

    @property
    def degree(self) -> int:
        return self.kv.p

    def eval(self, t, deriv: bool = False):
        """Points (and tangents ``dx/dt`` if ``deriv``) at parameters ``t``."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        B = collocation(self.kv, t.ravel(), 1)
        x, dx = _rational(B[0], B[1], self.points * self.weights[:, None], self.weights)
        if deriv:
            return x, dx
        return x

    def __call__(self, t):
        return self.eval(t)

    def reversed(self) -> "NurbsCurve":
        kv = KnotVector(1.0 - self.kv.kv[::-1], self.kv.p)
        return NurbsCurve(kv, self.points[::-1], self.weights[::-1])

    def length(self, n: int = 64) -> float:
        from .quadrature import gauss_01
        g = gauss_01(n)
        total = 0.0
        for a, b in zip(self.kv.mesh[:-1], self.kv.mesh[1:]):
            _, dx = self.eval(a + (b - a) * g.nodes, deriv=True)
            total += (b - a) * np.dot(g.weights, np.hypot(dx[:, 0], dx[:, 1]))
        return total


class NurbsSurface:
    """Rational tensor-product B-spline map ``[0, 1]^2 -> R^2``.

    Control points are stored with shape ``(k1, k2, 2)``, the first index
    running along ``u``.
    """

    def __init__(self, ku: KnotVector, kv: KnotVector, points, weights=None):
        self.ku, self.kv = ku, kv
        shape = (ku.numdofs, kv.numdofs)
        self.points = np.asarray(points, dtype=float).reshape(shape + (2,))
        w = np.ones(shape) if weights is None else np.asarray(weights, float).reshape(shape)
        if np.any(w <= 0):
            raise ValueError("weights must be positive")
        self.weights = w

    @property
    def degrees(self):
        return (self.ku.p, self.kv.p)

    def eval_grid(self, u, v):
        """Map and Jacobian on the tensor grid ``u x v``.

        Returns ``x`` of shape (nu, nv, 2) and ``J`` of shape (nu, nv, 2, 2)
        with ``J[..., :, 0] = dx/du`` and ``J[..., :, 1] = dx/dv``.
        """
        Bu = collocation(self.ku, np.atleast_1d(u), 1)
        Bv = collocation(self.kv, np.atleast_1d(v), 1)
        cw = self.points * self.weights[..., None]
        w = self.weights
        A = np.einsum("ai,bj,ijd->abd", Bu[0], Bv[0], cw)
        Au = np.einsum("ai,bj,ijd->abd", Bu[1], Bv[0], cw)
        Av = np.einsum("ai,bj,ijd->abd", Bu[0], Bv[1], cw)
        W = np.einsum("ai,bj,ij->ab", Bu[0], Bv[0], w)
        Wu = np.einsum("ai,bj,ij->ab", Bu[1], Bv[0], w)
        Wv = np.einsum("ai,bj,ij->ab", Bu[0], Bv[1], w)
        x = A / W[..., None]
        J = np.empty(x.shape + (2,))
        J[..., 0] = (Au - x * Wu[..., None]) / W[..., None]
        J[..., 1] = (Av - x * Wv[..., None]) / W[..., None]
        return x, J

    def eval(self, u, v, deriv: bool = False):
        """Map (and Jacobian) at the point pairs ``(u[m], v[m])``."""
        u = np.atleast_1d(np.asarray(u, float)).ravel()
        v = np.atleast_1d(np.asarray(v, float)).ravel()
        su, bu = active_basis(self.ku, u, 1)
        sv, bv = active_basis(self.kv, v, 1)
        pu, pv = self.degrees
        iu = su[:, None] - pu + np.arange(pu + 1)
        iv = sv[:, None] - pv + np.arange(pv + 1)
        c = self.points[iu[:, :, None], iv[:, None, :]]
        w = self.weights[iu[:, :, None], iv[:, None, :]]
        cw = c * w[..., None]

        def comb(a, b, arr):
            return np.einsum("ni,nj,nij...->n...", a, b, arr)

        A, W = comb(bu[0], bv[0], cw), comb(bu[0], bv[0], w)
        x = A / W[:, None]
        if not deriv:
            return x
        J = np.empty((u.size, 2, 2))
        J[:, :, 0] = (comb(bu[1], bv[0], cw) - x * comb(bu[1], bv[0], w)[:, None]) / W[:, None]
        J[:, :, 1] = (comb(bu[0], bv[1], cw) - x * comb(bu[0], bv[1], w)[:, None]) / W[:, None]
        return x, J

    def __call__(self, u, v):
        return self.eval(u, v)

    def edge(self, side: str) -> NurbsCurve:
        """Boundary curve on the given side, parametrized by the free variable."""
        if side == "u0":
            return NurbsCurve(self.kv, self.points[0], self.weights[0])
        if side == "u1":
            return NurbsCurve(self.kv, self.points[-1], self.weights[-1])
        if side == "v0":
            return NurbsCurve(self.ku, self.points[:, 0], self.weights[:, 0])
        if side == "v1":
            return NurbsCurve(self.ku, self.points[:, -1], self.weights[:, -1])
        raise ValueError("unknown side %r" % side)

    def check_regular(self, n: int = 6, tol: float = 1e-12) -> float:
        """Minimal ``|det J|`` relative to the maximum on a sample grid.

        Raises :class:`DegenerateGeometryError` for vanishing or
        sign-changing Jacobians.
        """
        s = np.linspace(0.0, 1.0, n)
        _, J = self.eval_grid(s, s)
        det = J[..., 0, 0] * J[..., 1, 1] - J[..., 0, 1] * J[..., 1, 0]
        scale = np.abs(det).max()
        if scale == 0.0 or not (np.all(det > tol * scale) or np.all(det < -tol * scale)):
            raise DegenerateGeometryError("singular patch parametrization")
        return float(np.abs(det).min() / scale)


def _edge_param(side: str, t):
    t = np.asarray(t, float)
    if side == "u0":
        return np.zeros_like(t), t
    if side == "u1":
        return np.ones_like(t), t
    if side == "v0":
        return t, np.zeros_like(t)
    return t, np.ones_like(t)


@dataclass(frozen=True)
class BoundaryPatch:
    """An edge of a domain patch used as a boundary patch.

    ``sign`` selects the normal ``sign * (t_y, -t_x) / |t|`` where ``t`` is
    the curve tangent; it is chosen so that the normal points out of the
    designated domain.
    """

    curve: NurbsCurve
    patch: int
    side: str
    sign: int
    label: str = ""

    def normal(self, t) -> np.ndarray:
        _, dx = self.curve.eval(t, deriv=True)
        nrm = np.hypot(dx[:, 0], dx[:, 1])
        if np.any(nrm == 0.0):
            raise DegenerateGeometryError("zero tangent on boundary patch")
        return self.sign * np.column_stack([dx[:, 1], -dx[:, 0]]) / nrm[:, None]

    def flipped(self) -> "BoundaryPatch":
        return replace(self, sign=-self.sign)


def outward_normal(bpatch: BoundaryPatch, t) -> np.ndarray:
    return bpatch.normal(t)


def map_point(patch, xi) -> np.ndarray:
    """Physical point(s) of ``patch`` at parameter(s) ``xi``."""
    xi = np.asarray(xi, dtype=float)
    if np.any(xi < -1e-14) or np.any(xi > 1 + 1e-14):
        raise ValueError("parameter outside the unit cube")
    if isinstance(patch, BoundaryPatch):
        patch = patch.curve
    if isinstance(patch, NurbsCurve):
        out = patch.eval(np.atleast_1d(xi))
        return out[0] if xi.ndim == 0 else out
    xi2 = np.atleast_2d(xi)
    out = patch.eval(xi2[:, 0], xi2[:, 1])
    return out[0] if xi.ndim == 1 else out


def jacobian(patch, xi) -> np.ndarray:
    """2x2 Jacobian of a surface patch or tangent of a curve at ``xi``."""
    xi = np.asarray(xi, dtype=float)
    if isinstance(patch, BoundaryPatch):
        patch = patch.curve
    if isinstance(patch, NurbsCurve):
        _, dx = patch.eval(np.atleast_1d(xi), deriv=True)
        return dx[0] if xi.ndim == 0 else dx
    xi2 = np.atleast_2d(xi)
    _, J = patch.eval(xi2[:, 0], xi2[:, 1], deriv=True)
    return J[0] if xi.ndim == 1 else J


def _outward_sign(surf: NurbsSurface, side: str) -> int:
    u, v = _edge_param(side, np.array([0.5]))
    _, J = surf.eval(u, v, deriv=True)
    curve = surf.edge(side)
    _, dx = curve.eval([0.5], deriv=True)
    rot = np.array([dx[0, 1], -dx[0, 0]])
    col = J[0, :, 0] if side[0] == "u" else J[0, :, 1]
    out = -col if side[1] == "0" else col
    return 1 if rot @ out > 0 else -1


@dataclass
class MultipatchDomain:
    """Union of NURBS surface patches with labelled boundary patches.

    ``boundaries`` maps a label to the list of :class:`BoundaryPatch`
    objects forming that part of the boundary; normals point out of the
    domain unless flipped explicitly.
    """

    patches: list
    boundaries: dict = field(default_factory=dict)
    name: str = ""

    def __post_init__(self):
        for surf in self.patches:
            surf.check_regular()
        self.interfaces = self._find_interfaces()

    def _edge_samples(self, k, side, n=7):
        return self.patches[k].edge(side).eval(np.linspace(0.0, 1.0, n))

    def _find_interfaces(self, tol=1e-10):
        """Pairs ``((k, side), (l, side2), reversed)`` of coinciding edges."""
        found = []
        edges = [(k, s) for k in range(len(self.patches)) for s in SIDES]
        samples = {e: self._edge_samples(*e) for e in edges}
        for a in range(len(edges)):
            for b in range(a + 1, len(edges)):
                ea, eb = edges[a], edges[b]
                if ea[0] == eb[0]:
                    continue
                xa, xb = samples[ea], samples[eb]
                if np.abs(xa - xb).max() < tol:
                    found.append((ea, eb, False))
                elif np.abs(xa - xb[::-1]).max() < tol:
                    found.append((ea, eb, True))
        return found

    def boundary_edges(self):
        """Edges that are not shared with another patch."""
        shared = {e for pair in self.interfaces for e in pair[:2]}
        return [(k, s) for k in range(len(self.patches)) for s in SIDES
                if (k, s) not in shared
                and self.patches[k].edge(s).length(8) > 1e-14]

    def add_boundary(self, label: str, predicate=None, edges=None) -> list:
        """Register boundary edges selected by ``predicate(points)`` or explicitly."""
        if edges is None:
            edges = [e for e in self.boundary_edges()
                     if predicate(self._edge_samples(*e))]
        bps = []
        for k, side in edges:
            surf = self.patches[k]
            curve = surf.edge(side)
            if curve.length(8) <= 1e-14:
                raise DegenerateGeometryError("zero-length boundary patch")
            bps.append(BoundaryPatch(curve, k, side, _outward_sign(surf, side), label))
        self.boundaries[label] = bps
        return bps

    def boundary(self, *labels) -> list:
        out = []
        for lab in labels:
            out.extend(self.boundaries[lab])
        return out

    @property
    def num_elements(self):
        return sum(s.ku.numelements * s.kv.numelements for s in self.patches)

    def diameter(self, n: int = 33) -> float:
        pts = np.concatenate([self._edge_samples(k, s, n)
                              for k in range(len(self.patches)) for s in SIDES])
        d = pts[:, None, :] - pts[None, :, :]
        return float(np.sqrt((d ** 2).sum(-1)).max())


# --- built-in geometries ------------------------------------------------

_LINEAR = KnotVector([0, 0, 1, 1], 1)
_QUADRATIC = KnotVector([0, 0, 0, 1, 1, 1], 2)


def square_patch(a: float = 0.25) -> NurbsSurface:
    """Bilinear patch of the square ``(-a, a)^2``."""
    pts = np.array([[[-a, -a], [-a, a]], [[a, -a], [a, a]]], dtype=float)
    return NurbsSurface(_LINEAR, _LINEAR, pts)


def build_square_geometry(a: float = 0.25) -> MultipatchDomain:
    """Single degree-1 patch of ``(-a, a)^2`` with its four edges as ``"gamma"``."""
    dom = MultipatchDomain([square_patch(a)], name="square")
    dom.add_boundary("gamma", edges=[(0, "v0"), (0, "u1"), (0, "v1"), (0, "u0")])
    return dom


def ring_patch(r_in: float, r_out: float, quarter: int) -> NurbsSurface:
    """Quarter of an annulus as a degree (2, 2) NURBS patch.

    ``u`` runs counterclockwise over the angle ``[q pi/2, (q+1) pi/2]``,
    ``v`` runs radially outward.
    """
    th0 = quarter * np.pi / 2
    th1 = th0 + np.pi / 2
    ang = np.array([[np.cos(th0), np.sin(th0)],
                    [np.cos(th0) - np.sin(th0), np.sin(th0) + np.cos(th0)],
                    [np.cos(th1), np.sin(th1)]])
    ang[np.abs(ang) < 1e-15] = 0.0
    radii = np.array([r_in, 0.5 * (r_in + r_out), r_out])
    pts = ang[:, None, :] * radii[None, :, None]
    w_ang = np.array([1.0, np.sqrt(0.5), 1.0])
    weights = np.repeat(w_ang[:, None], 3, axis=1)
    return NurbsSurface(_QUADRATIC, _QUADRATIC, pts, weights)


def build_ring_geometry(r_in: float, r_out: float, name: str = "ring",
                        inner: str = "inner", outer: str = "outer") -> MultipatchDomain:
    dom = MultipatchDomain([ring_patch(r_in, r_out, q) for q in range(4)], name=name)
    dom.add_boundary(inner, edges=[(q, "v0") for q in range(4)])
    dom.add_boundary(outer, edges=[(q, "v1") for q in range(4)])
    return dom


#: radii of the machine rings: inner Dirichlet, rotor, stator inner, outer Dirichlet
MACHINE_RADII = (0.1, 0.39, 0.4, 0.6)


def build_machine_geometry():
    """The rotor ring, the stator ring and the air gap ring.

    Returns ``(omega1, omega2, omega_b)``. ``omega1`` carries the labels
    ``"dirichlet"`` (r = 0.1) and ``"gamma"`` (r = 0.39), ``omega2`` the
    labels ``"gamma"`` (r = 0.4) and ``"dirichlet"`` (r = 0.6). The
    ``"gamma"`` normals of both are oriented out of the air gap.
    """
    r0, r1, r2, r3 = MACHINE_RADII
    om1 = build_ring_geometry(r0, r1, "omega1", inner="dirichlet", outer="gamma")
    om2 = build_ring_geometry(r2, r3, "omega2", inner="gamma", outer="dirichlet")
    omb = build_ring_geometry(r1, r2, "omega_b", inner="gamma1", outer="gamma2")
    for dom in (om1, om2):
        dom.boundaries["gamma"] = [bp.flipped() for bp in dom.boundaries["gamma"]]
    return om1, om2, omb


# --- file format ----------------------------------------------------------

def _fmt(vals):
    return " ".join(repr(float(v)) for v in vals)


def dump_geometry(dom: MultipatchDomain) -> str:
    """Serialize a domain to the line-based geometry text format."""
    out = io.StringIO()
    out.write("# igafembem geometry v1\n")
    out.write("name %s\n" % (dom.name or "domain"))
    out.write("patches %d\n" % len(dom.patches))
    for k, s in enumerate(dom.patches):
        out.write("patch %d\n" % k)
        out.write("degrees %d %d\n" % s.degrees)
        out.write("knots_u %s\n" % _fmt(s.ku.kv))
        out.write("knots_v %s\n" % _fmt(s.kv.kv))
        n1, n2 = s.weights.shape
        out.write("points %d %d\n" % (n1, n2))
        for i in range(n1):
            for j in range(n2):
                out.write("%s\n" % _fmt([*s.points[i, j], s.weights[i, j]]))
    for label, bps in dom.boundaries.items():
        for bp in bps:
            out.write("boundary %s %d %s %d\n" % (label, bp.patch, bp.side, bp.sign))
    return out.getvalue()


def load_geometry(text: str) -> MultipatchDomain:
    lines = [ln.split("#", 1)[0].split() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln]
    pos = 0
    name = "domain"
    patches = []
    bdry = {}

    def take():
        nonlocal pos
        pos += 1
        return lines[pos - 1]

    while pos < len(lines):
        tok = take()
        key = tok[0]
        if key == "name":
            name = tok[1]
        elif key == "patches":
            pass
        elif key == "patch":
            deg = take()
            ku = take()
            kv = take()
            if deg[0] != "degrees" or ku[0] != "knots_u" or kv[0] != "knots_v":
                raise ValueError("malformed patch block near line %d" % pos)
            p1, p2 = int(deg[1]), int(deg[2])
            ku = KnotVector([float(v) for v in ku[1:]], p1)
            kv = KnotVector([float(v) for v in kv[1:]], p2)
            hdr = take()
            n1, n2 = int(hdr[1]), int(hdr[2])
            rows = np.array([[float(v) for v in take()] for _ in range(n1 * n2)])
            if rows.shape != (n1 * n2, 3):
                raise ValueError("control point rows need x y w")
            surf = NurbsSurface(ku, kv, rows[:, :2].reshape(n1, n2, 2),
                                rows[:, 2].reshape(n1, n2))
            patches.append(surf)
        elif key == "boundary":
            label, k, side, sign = tok[1], int(tok[2]), tok[3], int(tok[4])
            bdry.setdefault(label, []).append((k, side, sign))
        else:
            raise ValueError("unknown keyword %r in geometry file" % key)
    dom = MultipatchDomain(patches, name=name)
    for label, items in bdry.items():
        bps = dom.add_boundary(label, edges=[(k, s) for k, s, _ in items])
        dom.boundaries[label] = [bp if bp.sign == sg else bp.flipped()
                                 for bp, (_, _, sg) in zip(bps, items)]
    return dom


def read_geometry(path) -> MultipatchDomain:
    with open(path) as fh:
        return load_geometry(fh.read())


def write_geometry(dom: MultipatchDomain, path):
    with open(path, "w") as fh:
        fh.write(dump_geometry(dom))
