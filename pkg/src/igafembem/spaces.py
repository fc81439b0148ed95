"""Discrete spaces on multipatch domains and their boundaries.

``DomainSpace`` is the continuous space of degree ``p`` splines on a
multipatch domain (``S^0``); ``BoundarySpace`` is the patchwise
discontinuous space of degree ``p - 1`` on a set of boundary patches
(``S^2``). Both are built on uniform refinements of the geometry
breakpoints while the geometry itself is always evaluated from the
original NURBS patches.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .geometry import BoundaryPatch, MultipatchDomain
from .quadrature import gauss_01
from .splines import KnotVector, active_basis, h_refine, with_degree


def refined_knots(kv: KnotVector, p: int, level: int) -> KnotVector:
    """Degree ``p``, maximal smoothness, ``h = 1/(level+1)`` on each geometry span."""
    return h_refine(with_degree(kv, p), level)


def _edge_dofs(n1: int, n2: int, side: str) -> np.ndarray:
    """Local tensor indices ``(i, j)`` along a patch side, in edge parameter order."""
    if side == "u0":
        return np.stack([np.zeros(n2, int), np.arange(n2)], 1)
    if side == "u1":
        return np.stack([np.full(n2, n1 - 1), np.arange(n2)], 1)
    if side == "v0":
        return np.stack([np.arange(n1), np.zeros(n1, int)], 1)
    return np.stack([np.arange(n1), np.full(n1, n2 - 1)], 1)


@dataclass
class ElementData:
    """Quadrature data of all elements of one patch.

    Arrays are indexed ``[e, q, ...]`` with ``e`` the element and ``q`` the
    quadrature point; ``dofs[e]`` are the global indices of the local basis.
    """

    x: np.ndarray      # (E, Q, 2) physical points
    w: np.ndarray      # (E, Q) weights times |det J|
    N: np.ndarray      # (E, Q, L) basis values
    dN: np.ndarray     # (E, Q, L, 2) physical gradients
    dofs: np.ndarray   # (E, L)


class DomainSpace:
    """Globally continuous tensor-product splines on a multipatch domain.

    Parameters
    ----------
    domain : MultipatchDomain
    p : int
        Degree in both parametric directions.
    level : int
        Refinement level, ``h = 1/(level+1)`` per geometry span.
    dirichlet : sequence of str
        Boundary labels whose coefficients are constrained to zero.
    """

    def __init__(self, domain: MultipatchDomain, p: int, level: int = 0, dirichlet=()):
        if p < max(max(s.degrees) for s in domain.patches):
            raise ValueError("degree %d cannot represent the geometry" % p)
        self.domain = domain
        self.p = int(p)
        self.level = int(level)
        self.knots = [(refined_knots(s.ku, p, level), refined_knots(s.kv, p, level))
                      for s in domain.patches]
        self._number()
        fixed = set()
        for label in dirichlet:
            for bp in domain.boundaries[label]:
                fixed.update(self.edge_dofs(bp.patch, bp.side).tolist())
        self.dirichlet = np.array(sorted(fixed), dtype=int)
        mask = np.ones(self.numdofs, bool)
        mask[self.dirichlet] = False
        self.free = np.flatnonzero(mask)

    def _number(self):
        # glue coinciding edge coefficients through their Greville images
        pts, owner = [], []
        offset = 0
        for k, (surf, (ku, kv)) in enumerate(zip(self.domain.patches, self.knots)):
            x, _ = surf.eval_grid(ku.greville(), kv.greville())
            pts.append(x.reshape(-1, 2))
            offset += ku.numdofs * kv.numdofs
            owner.append(offset)
        pts = np.concatenate(pts)
        parent = np.arange(len(pts))

        def find(i):
            while parent[i] != i:
                parent[i] = parent[parent[i]]
                i = parent[i]
            return i

        scale = max(np.ptp(pts, axis=0).max(), 1.0)
        for i, j in cKDTree(pts).query_pairs(1e-10 * scale):
            ri, rj = find(i), find(j)
            if ri != rj:
                parent[max(ri, rj)] = min(ri, rj)
        roots = np.array([find(i) for i in range(len(pts))])
        uniq, glob = np.unique(roots, return_inverse=True)
        self.numdofs = uniq.size
        self.l2g = []
        start = 0
        for ku, kv in self.knots:
            n = ku.numdofs * kv.numdofs
            self.l2g.append(glob[start:start + n].reshape(ku.numdofs, kv.numdofs))
            start += n
        self.greville_points = np.zeros((self.numdofs, 2))
        self.greville_points[glob] = pts

    @property
    def numfree(self) -> int:
        return self.free.size

    @property
    def h(self) -> float:
        return 1.0 / (self.level + 1)

    def edge_dofs(self, patch: int, side: str) -> np.ndarray:
        ku, kv = self.knots[patch]
        ij = _edge_dofs(ku.numdofs, kv.numdofs, side)
        return self.l2g[patch][ij[:, 0], ij[:, 1]]

    def edge_knots(self, patch: int, side: str) -> KnotVector:
        ku, kv = self.knots[patch]
        return kv if side[0] == "u" else ku

    def element_data(self, patch: int, nq: int | None = None) -> ElementData:
        """Basis values, physical gradients and weights at Gauss points."""
        nq = self.p + 2 if nq is None else int(nq)
        surf = self.domain.patches[patch]
        ku, kv = self.knots[patch]
        p = self.p
        g = gauss_01(nq)
        mu, mv = ku.mesh, kv.mesh
        E1, E2 = mu.size - 1, mv.size - 1
        u = (mu[:-1, None] + np.diff(mu)[:, None] * g.nodes).ravel()
        v = (mv[:-1, None] + np.diff(mv)[:, None] * g.nodes).ravel()
        su = np.repeat(np.arange(E1), nq)
        sv = np.repeat(np.arange(E2), nq)
        span_u = np.searchsorted(ku.kv, mu[:-1], side="right") - 1
        span_v = np.searchsorted(kv.kv, mv[:-1], side="right") - 1
        _, Bu = active_basis(ku, u, 1, span=span_u[su])
        _, Bv = active_basis(kv, v, 1, span=span_v[sv])
        x, J = surf.eval_grid(u, v)
        det = J[..., 0, 0] * J[..., 1, 1] - J[..., 0, 1] * J[..., 1, 0]
        if np.any(np.abs(det) < 1e-14 * np.abs(det).max()):
            raise ValueError("singular Jacobian at a quadrature point")
        # reshape to (E1, q1, E2, q2, ...)
        Bu = Bu.reshape(2, E1, nq, p + 1)
        Bv = Bv.reshape(2, E2, nq, p + 1)
        x = x.reshape(E1, nq, E2, nq, 2)
        J = J.reshape(E1, nq, E2, nq, 2, 2)
        det = det.reshape(E1, nq, E2, nq)
        wq = np.outer(g.weights, g.weights)
        hu, hv = np.diff(mu), np.diff(mv)
        w = np.abs(det) * wq[None, :, None, :] \
            * (hu[:, None, None, None] * hv[None, None, :, None])
        N = np.einsum("aqi,bsj->aqbsij", Bu[0], Bv[0])
        Nu = np.einsum("aqi,bsj->aqbsij", Bu[1], Bv[0])
        Nv = np.einsum("aqi,bsj->aqbsij", Bu[0], Bv[1])
        # physical gradient: J^{-T} (N_u, N_v)
        inv = np.empty_like(J)
        inv[..., 0, 0] = J[..., 1, 1]
        inv[..., 1, 1] = J[..., 0, 0]
        inv[..., 0, 1] = -J[..., 0, 1]
        inv[..., 1, 0] = -J[..., 1, 0]
        inv /= det[..., None, None]
        # grad = inv^T @ (Nu, Nv): grad_d = inv[0, d] Nu + inv[1, d] Nv
        gx = inv[..., 0, 0, None, None] * Nu + inv[..., 1, 0, None, None] * Nv
        gy = inv[..., 0, 1, None, None] * Nu + inv[..., 1, 1, None, None] * Nv
        L = (p + 1) ** 2
        order = (0, 2, 1, 3)
        E = E1 * E2
        Q = nq * nq
        iu = span_u[:, None] - p + np.arange(p + 1)
        iv = span_v[:, None] - p + np.arange(p + 1)
        dofs = self.l2g[patch][iu[:, None, :, None], iv[None, :, None, :]]
        return ElementData(
            x=x.transpose(0, 2, 1, 3, 4).reshape(E, Q, 2),
            w=w.transpose(order).reshape(E, Q),
            N=N.transpose(0, 2, 1, 3, 4, 5).reshape(E, Q, L),
            dN=np.stack([gx, gy], -1).transpose(0, 2, 1, 3, 4, 5, 6).reshape(E, Q, L, 2),
            dofs=dofs.reshape(E, L),
        )

    def evaluate(self, coeffs, patch: int, u, v, grad: bool = False):
        """Values (and physical gradients) of the spline with ``coeffs`` at ``(u, v)``."""
        coeffs = np.asarray(coeffs, float)
        surf = self.domain.patches[patch]
        ku, kv = self.knots[patch]
        u = np.atleast_1d(np.asarray(u, float)).ravel()
        v = np.atleast_1d(np.asarray(v, float)).ravel()
        su, Bu = active_basis(ku, u, 1)
        sv, Bv = active_basis(kv, v, 1)
        p = self.p
        iu = su[:, None] - p + np.arange(p + 1)
        iv = sv[:, None] - p + np.arange(p + 1)
        c = coeffs[self.l2g[patch][iu[:, :, None], iv[:, None, :]]]
        val = np.einsum("ni,nj,nij->n", Bu[0], Bv[0], c)
        if not grad:
            return val
        du = np.einsum("ni,nj,nij->n", Bu[1], Bv[0], c)
        dv = np.einsum("ni,nj,nij->n", Bu[0], Bv[1], c)
        _, J = surf.eval(u, v, deriv=True)
        g = np.linalg.solve(np.transpose(J, (0, 2, 1)), np.stack([du, dv], 1)[..., None])[..., 0]
        return val, g

    def trace_basis(self, bpatches) -> "BoundaryBasis":
        """Traces of the domain basis on ``bpatches``, numbered compactly.

        ``basis.global_dofs[c]`` is the domain coefficient of column ``c``.
        """
        edges = [self.edge_dofs(bp.patch, bp.side) for bp in bpatches]
        gl = np.unique(np.concatenate(edges))
        lookup = {g: c for c, g in enumerate(gl)}
        dofs = [np.array([lookup[g] for g in e]) for e in edges]
        kvs = [self.edge_knots(bp.patch, bp.side) for bp in bpatches]
        return BoundaryBasis(list(bpatches), kvs, dofs, gl.size, global_dofs=gl)


@dataclass
class BoundaryBasis:
    """Spline basis on a list of boundary patches.

    ``dofs[k][i]`` is the column index of local function ``i`` of patch
    ``k``; patches share columns only where ``dofs`` coincide.
    """

    bpatches: list
    kvs: list
    dofs: list
    size: int
    global_dofs: np.ndarray | None = None

    def local(self, k: int, t, span=None):
        """Values ``(n, p+1)`` and column indices ``(p+1,)`` on one knot span."""
        kv = self.kvs[k]
        t = np.atleast_1d(t)
        if span is None:
            span = int(kv.findspan(np.array([t.mean()]))[0])
        _, vals = active_basis(kv, t, 0, span=span)
        idx = self.dofs[k][span - kv.p + np.arange(kv.p + 1)]
        return vals[0], idx

    def element_spans(self, k: int):
        """Breakpoints of patch ``k`` and the knot span of each element."""
        kv = self.kvs[k]
        mesh = kv.mesh
        return mesh, np.searchsorted(kv.kv, mesh[:-1], side="right") - 1

    def evaluate(self, coeffs, k: int, t) -> np.ndarray:
        coeffs = np.asarray(coeffs, float)
        kv = self.kvs[k]
        t = np.atleast_1d(np.asarray(t, float))
        span, vals = active_basis(kv, t, 0)
        idx = self.dofs[k][span[:, None] - kv.p + np.arange(kv.p + 1)]
        return np.einsum("ni,ni->n", vals[0], coeffs[idx])

    def ones(self) -> np.ndarray:
        """Coefficients of the constant function 1 (partition of unity)."""
        return np.ones(self.size)


class BoundarySpace(BoundaryBasis):
    """Patchwise discontinuous splines of degree ``p - 1`` (``S^2``)."""

    def __init__(self, bpatches, p: int, level: int = 0):
        if p < 1:
            raise ValueError("need p >= 1 for the flux space")
        kvs = [refined_knots(bp.curve.kv, p - 1, level) for bp in bpatches]
        dofs, off = [], 0
        for kv in kvs:
            dofs.append(off + np.arange(kv.numdofs))
            off += kv.numdofs
        super().__init__(list(bpatches), kvs, dofs, off)
        self.p = int(p)
        self.level = int(level)

    @property
    def h(self) -> float:
        return 1.0 / (self.level + 1)

