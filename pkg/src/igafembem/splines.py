"""B-spline bases on open knot vectors.

The evaluation routines here are vectorized over parameter values; the
scalar ``eval_basis``/``eval_basis_derivative`` pair implements the plain
Cox-de Boor recursion and is kept as a reference against which the fast
span-based evaluator is tested.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

_TOL = 1e-14


class KnotVector:
    """A p-open knot vector on [0, 1] together with its spline degree.

    Parameters
    ----------
    knots : array_like
        Non-decreasing knots. The first and last ``p+1`` entries must be 0
        and 1, interior knots must lie strictly inside (0, 1) with
        multiplicity at most ``p``.
    p : int
        Spline degree.
    theta : float, optional
        Required bound for the ratio of neighboring element lengths. If
        omitted, the observed ratio is stored.
    """

    def __init__(self, knots, p: int, theta: float | None = None):
        kv = np.asarray(knots, dtype=float)
        p = int(p)
        if p < 0:
            raise ValueError("degree must be non-negative")
        if kv.ndim != 1 or kv.size < 2 * (p + 1):
            raise ValueError("knot vector too short for degree %d" % p)
        if np.any(np.diff(kv) < 0):
            raise ValueError("knots must be non-decreasing")
        if np.any(kv[: p + 1] != 0.0) or np.any(kv[-(p + 1):] != 1.0):
            raise ValueError("knot vector is not %d-open on [0, 1]" % p)
        inner = kv[p + 1: kv.size - p - 1]
        if inner.size and (inner[0] <= 0.0 or inner[-1] >= 1.0):
            raise ValueError("interior knots must lie in (0, 1)")
        if inner.size:
            _, counts = np.unique(inner, return_counts=True)
            if counts.max() > max(p, 1):
                raise ValueError("interior knot multiplicity exceeds degree")
        self.kv = kv
        self.p = p
        ratio = self.quasi_uniformity()
        if theta is not None and ratio > theta * (1 + 1e-12):
            raise ValueError("knot vector violates quasi-uniformity bound "
                             "(%g > %g)" % (ratio, theta))
        self.theta = float(theta) if theta is not None else ratio

    def __repr__(self):
        return "KnotVector(%s, p=%d)" % (np.array2string(self.kv, precision=4), self.p)

    def __eq__(self, other):
        return (isinstance(other, KnotVector) and self.p == other.p
                and self.kv.shape == other.kv.shape and np.array_equal(self.kv, other.kv))

    def __hash__(self):
        return hash((self.p, self.kv.tobytes()))

    @property
    def numdofs(self) -> int:
        """Number of basis functions ``k = len(knots) - p - 1``."""
        return self.kv.size - self.p - 1

    @cached_property
    def mesh(self) -> np.ndarray:
        """Breakpoints (unique knots)."""
        return np.unique(self.kv)

    @property
    def numelements(self) -> int:
        return self.mesh.size - 1

    @property
    def h(self) -> float:
        return float(np.max(np.diff(self.mesh)))

    @cached_property
    def element_spans(self) -> np.ndarray:
        """Knot span index ``j`` (with ``kv[j] < kv[j+1]``) of every element."""
        return np.nonzero(np.diff(self.kv) > 0)[0]

    def quasi_uniformity(self) -> float:
        lengths = np.diff(self.mesh)
        if lengths.size < 2:
            return 1.0
        r = lengths[1:] / lengths[:-1]
        return float(max(r.max(), (1.0 / r).max()))

    def findspan(self, x) -> np.ndarray:
        """Span index ``j`` with ``kv[j] <= x < kv[j+1]``; the last span is closed."""
        x = np.asarray(x, dtype=float)
        j = np.searchsorted(self.kv, x, side="right") - 1
        return np.clip(j, self.p, self.numdofs - 1)

    def greville(self) -> np.ndarray:
        """Knot averages; midpoints of the elements for degree zero."""
        if self.p == 0:
            return 0.5 * (self.kv[:-1] + self.kv[1:])
        idx = np.arange(self.numdofs)[:, None] + np.arange(1, self.p + 1)[None, :]
        return self.kv[idx].mean(axis=1)

    def refine(self, level: int) -> "KnotVector":
        return h_refine(self, level)


def _check_index(kv: KnotVector, i: int, x: float):
    if not 0 <= i < kv.numdofs:
        raise IndexError("basis index %d out of range [0, %d)" % (i, kv.numdofs))
    if not -_TOL <= x <= 1 + _TOL:
        raise ValueError("parameter %g outside [0, 1]" % x)


def _cox_de_boor(kv: np.ndarray, i: int, p: int, x: float, last: int) -> float:
    if p == 0:
        if kv[i] <= x < kv[i + 1]:
            return 1.0
        # closed final span so that the basis is complete at x = 1
        return 1.0 if (x == kv[-1] and i == last) else 0.0
    val = 0.0
    d1 = kv[i + p] - kv[i]
    if d1 > 0:
        val += (x - kv[i]) / d1 * _cox_de_boor(kv, i, p - 1, x, last)
    d2 = kv[i + p + 1] - kv[i + 1]
    if d2 > 0:
        val += (kv[i + p + 1] - x) / d2 * _cox_de_boor(kv, i + 1, p - 1, x, last)
    return val


def eval_basis(kv: KnotVector, i: int, x: float) -> float:
    """Value of the ``i``-th B-spline of ``kv`` at ``x`` by Cox-de Boor recursion."""
    _check_index(kv, i, x)
    x = min(max(float(x), 0.0), 1.0)
    last = int(kv.element_spans[-1])
    return _cox_de_boor(kv.kv, i, kv.p, x, last)


def eval_basis_derivative(kv: KnotVector, i: int, x: float) -> float:
    """First derivative of the ``i``-th B-spline (one-sided from the right at knots)."""
    _check_index(kv, i, x)
    p = kv.p
    if p == 0:
        return 0.0
    x = min(max(float(x), 0.0), 1.0)
    t = kv.kv
    last = int(kv.element_spans[-1])
    val = 0.0
    d1 = t[i + p] - t[i]
    if d1 > 0:
        val += p / d1 * _cox_de_boor(t, i, p - 1, x, last)
    d2 = t[i + p + 1] - t[i + 1]
    if d2 > 0:
        val -= p / d2 * _cox_de_boor(t, i + 1, p - 1, x, last)
    return val


def active_basis(kv: KnotVector, x, nderiv: int = 1, span=None):
    """Evaluate the ``p+1`` nonzero basis functions and derivatives at ``x``.

    Returns
    -------
    span : ndarray of int, shape (n,)
        Knot span of each point; active functions are ``span-p .. span``.
    vals : ndarray, shape (nderiv+1, n, p+1)
        ``vals[d]`` holds the ``d``-th derivatives.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    p, t = kv.p, kv.kv
    if span is None:
        span = kv.findspan(x)
    else:
        span = np.broadcast_to(np.asarray(span, dtype=int), x.shape)
    n = x.size
    # ndu[j, r]: triangular table of Piegl & Tiller, algorithm A2.3
    ndu = np.zeros((p + 1, p + 1, n))
    ndu[0, 0] = 1.0
    left = np.zeros((p + 1, n))
    right = np.zeros((p + 1, n))
    for j in range(1, p + 1):
        left[j] = x - t[span + 1 - j]
        right[j] = t[span + j] - x
        saved = np.zeros(n)
        for r in range(j):
            ndu[j, r] = right[r + 1] + left[j - r]
            tmp = ndu[r, j - 1] / ndu[j, r]
            ndu[r, j] = saved + right[r + 1] * tmp
            saved = left[j - r] * tmp
        ndu[j, j] = saved
    nd = min(nderiv, p)
    out = np.zeros((nderiv + 1, n, p + 1))
    out[0] = ndu[:, p].T
    if nd == 0:
        return span, out
    a = np.zeros((2, p + 1, n))
    for r in range(p + 1):
        s1, s2 = 0, 1
        a[0, 0] = 1.0
        for k in range(1, nd + 1):
            d = np.zeros(n)
            rk, pk = r - k, p - k
            if r >= k:
                a[s2, 0] = a[s1, 0] / ndu[pk + 1, rk]
                d = a[s2, 0] * ndu[rk, pk]
            j1 = 1 if rk >= -1 else -rk
            j2 = k - 1 if r - 1 <= pk else p - r
            for j in range(j1, j2 + 1):
                a[s2, j] = (a[s1, j] - a[s1, j - 1]) / ndu[pk + 1, rk + j]
                d = d + a[s2, j] * ndu[rk + j, pk]
            if r <= pk:
                a[s2, k] = -a[s1, k - 1] / ndu[pk + 1, r]
                d = d + a[s2, k] * ndu[r, pk]
            out[k, :, r] = d
            s1, s2 = s2, s1
    fac = p
    for k in range(1, nd + 1):
        out[k] *= fac
        fac *= p - k
    return span, out


def collocation(kv: KnotVector, x, nderiv: int = 0) -> np.ndarray:
    """Dense matrices ``B[d][m, i] = b_i^{(d)}(x_m)``; shape (nderiv+1, len(x), k)."""
    span, vals = active_basis(kv, x, nderiv)
    n = span.size
    out = np.zeros((nderiv + 1, n, kv.numdofs))
    cols = span[:, None] - kv.p + np.arange(kv.p + 1)[None, :]
    rows = np.broadcast_to(np.arange(n)[:, None], cols.shape)
    for d in range(nderiv + 1):
        out[d, rows, cols] = vals[d]
    return out


def make_knots(p: int, nelements: int, mult: int = 1) -> KnotVector:
    """Uniform p-open knot vector with ``nelements`` elements.

    Interior knots are repeated ``mult`` times (continuity ``C^{p-mult}``).
    """
    interior = np.repeat(np.linspace(0.0, 1.0, nelements + 1)[1:-1], mult)
    kv = np.concatenate([np.zeros(p + 1), interior, np.ones(p + 1)])
    return KnotVector(kv, p)


def h_refine(kv: KnotVector, level: int) -> KnotVector:
    """Split every nonempty knot span into ``level + 1`` equal parts.

    On a knot vector without interior knots this yields ``h = 1/(level+1)``.
    """
    level = int(level)
    if level < 0:
        raise ValueError("refinement level must be non-negative")
    if level == 0:
        return kv
    mesh = kv.mesh
    frac = np.arange(1, level + 1) / (level + 1)
    new = (mesh[:-1, None] + np.diff(mesh)[:, None] * frac[None, :]).ravel()
    return KnotVector(np.sort(np.concatenate([kv.kv, new])), kv.p)


def with_degree(kv: KnotVector, p: int, continuity: int | None = None) -> KnotVector:
    """Rebuild a knot vector of degree ``p`` on the breakpoints of ``kv``.

    ``continuity`` defaults to ``p - 1`` (single interior knots); degree 0
    gives a discontinuous space.
    """
    if continuity is None:
        continuity = p - 1
    mult = max(p - continuity, 1)
    interior = np.repeat(kv.mesh[1:-1], mult)
    return KnotVector(np.concatenate([np.zeros(p + 1), interior, np.ones(p + 1)]), p)


def is_nested(coarse: KnotVector, fine: KnotVector) -> bool:
    if coarse.p != fine.p:
        return False
    for x in coarse.mesh[1:-1]:
        if np.count_nonzero(fine.kv == x) < np.count_nonzero(coarse.kv == x):
            return False
    return True


def refinement_matrix(coarse: KnotVector, fine: KnotVector) -> np.ndarray:
    """Matrix ``P`` with ``coarse_spline(c) == fine_spline(P @ c)``.

    Computed by an element-exact L2 projection, which reproduces knot
    insertion for nested spaces (any degree, including zero).
    """
    if not is_nested(coarse, fine):
        raise ValueError("spline spaces are not nested")
    nq = fine.p + 1
    gx, gw = np.polynomial.legendre.leggauss(nq)
    mesh = fine.mesh
    a, b = mesh[:-1], mesh[1:]
    x = (0.5 * (b - a)[:, None] * (gx[None, :] + 1) + a[:, None]).ravel()
    w = (0.5 * (b - a)[:, None] * gw[None, :]).ravel()
    Bf = collocation(fine, x)[0]
    Bc = collocation(coarse, x)[0]
    M = Bf.T @ (w[:, None] * Bf)
    R = Bf.T @ (w[:, None] * Bc)
    P = np.linalg.solve(M, R)
    P[np.abs(P) < 1e-15] = 0.0
    return P


@dataclass(frozen=True)
class SplineSpace2D:
    """Tensor-product spline space; index ``(i, j)`` maps to ``i * k2 + j``."""

    ku: KnotVector
    kv: KnotVector

    @property
    def degrees(self):
        return (self.ku.p, self.kv.p)

    @property
    def shape(self):
        return (self.ku.numdofs, self.kv.numdofs)

    @property
    def numdofs(self) -> int:
        return self.ku.numdofs * self.kv.numdofs

    @property
    def numelements(self) -> int:
        return self.ku.numelements * self.kv.numelements

    def refine(self, level: int) -> "SplineSpace2D":
        return SplineSpace2D(h_refine(self.ku, level), h_refine(self.kv, level))

    def eval_basis(self, i: int, j: int, x, y) -> float:
        return eval_basis(self.ku, i, x) * eval_basis(self.kv, j, y)
