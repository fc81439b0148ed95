"""Quadrature rules for regular, logarithmic and weakly singular integrals."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import lru_cache

import mpmath
import numpy as np
from scipy.special import roots_legendre

#: Gauss points per element and direction used for boundary integrals.
DEFAULT_N_GAUSS = 25
#: Maximal recursion depth for near-singular element subdivision.
DEFAULT_NEAR_DEPTH = 4


@dataclass(frozen=True)
class QuadratureRule:
    nodes: np.ndarray
    weights: np.ndarray

    def __iter__(self):
        return iter((self.nodes, self.weights))

    def __len__(self):
        return self.nodes.size

    def integrate(self, f) -> float:
        return float(np.dot(self.weights, f(self.nodes)))


@lru_cache(maxsize=None)
def _gauss_legendre(n: int):
    x, w = roots_legendre(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gauss_legendre(n: int) -> QuadratureRule:
    """``n``-point Gauss-Legendre rule on [-1, 1], exact up to degree ``2n-1``."""
    n = int(n)
    if n < 1:
        raise ValueError("need at least one quadrature point")
    return QuadratureRule(*_gauss_legendre(n))


def gauss_01(n: int) -> QuadratureRule:
    """Gauss-Legendre rule transformed to [0, 1]."""
    x, w = gauss_legendre(n)
    return QuadratureRule(0.5 * (x + 1.0), 0.5 * w)


def _log_moments(m: int):
    # int_0^1 -log(x) x^k dx = 1 / (k+1)^2
    return [mpmath.mpf(1) / (k + 1) ** 2 for k in range(m)]


@lru_cache(maxsize=None)
def _log_gauss(n: int):
    # Chebyshev algorithm on exact moments in extended precision, then
    # Golub-Welsch on the (well conditioned) Jacobi matrix.
    with mpmath.workdps(40 + 2 * n):
        mu = _log_moments(2 * n)
        alpha = [mu[1] / mu[0]]
        beta = [mu[0]]
        sig_prev = [mpmath.mpf(0)] * (2 * n)
        sig = list(mu)
        for k in range(1, n):
            sig_new = [mpmath.mpf(0)] * (2 * n)
            for l in range(k, 2 * n - k):
                sig_new[l] = (sig[l + 1] - alpha[k - 1] * sig[l]
                              - beta[k - 1] * sig_prev[l])
            alpha.append(sig_new[k + 1] / sig_new[k] - sig[k] / sig[k - 1])
            beta.append(sig_new[k] / sig[k - 1])
            sig_prev, sig = sig, sig_new
        a = np.array([float(v) for v in alpha])
        b = np.array([float(mpmath.sqrt(v)) for v in beta[1:]])
    J = np.diag(a) + np.diag(b, 1) + np.diag(b, -1)
    x, V = np.linalg.eigh(J)
    w = float(mu[0]) * V[0] ** 2
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def log_gauss(n: int) -> QuadratureRule:
    """``n``-point rule for ``int_0^1 -log(x) g(x) dx``, exact for degree ``2n-1``."""
    n = int(n)
    if n < 1:
        raise ValueError("need at least one quadrature point")
    return QuadratureRule(*_log_gauss(n))


class PairClass(enum.Enum):
    DISJOINT = "disjoint"
    ADJACENT = "adjacent"
    COINCIDENT = "coincident"


@dataclass(frozen=True)
class PairRule:
    """Rule for ``int_0^1 int_0^1 F(s, t) dt ds`` with a logarithmic singularity.

    The regular part uses nodes ``(s, t)`` with weights ``w``; ``rho`` is the
    Duffy radial variable at these nodes (``|s - t|`` for coincident pairs,
    the distance-like coordinate to the shared corner ``(0, 0)`` for adjacent
    pairs). The logarithmic part integrates ``F(s, t) * log(rho)`` as
    ``sum(w_log * F(s_log, t_log))``. A kernel ``log|x(s) - y(t)|`` is thus
    integrated as ``log rho`` plus the smooth remainder ``log(|x - y| / rho)``.
    For disjoint pairs the log part is empty and ``rho`` is ones.
    """

    cls: PairClass
    s: np.ndarray
    t: np.ndarray
    w: np.ndarray
    rho: np.ndarray
    s_log: np.ndarray
    t_log: np.ndarray
    w_log: np.ndarray

    def integrate(self, F, log_coeff: float = 0.0, remainder=None) -> float:
        """``int int F(s, t) * (log_coeff * log rho + remainder(s, t))``.

        With ``remainder=None`` a plain integral of ``F`` is computed.
        """
        if remainder is None:
            return float(np.dot(self.w, F(self.s, self.t)))
        val = np.dot(self.w, F(self.s, self.t) * remainder(self.s, self.t))
        if log_coeff and self.w_log.size:
            val += log_coeff * np.dot(self.w_log, F(self.s_log, self.t_log))
        return float(val)


def _mirror(a, b):
    return np.concatenate([a, b]), np.concatenate([b, a])


@lru_cache(maxsize=None)
def _pair_rule(cls: PairClass, n: int, n_log: int) -> PairRule:
    g = gauss_01(n)
    if cls is PairClass.DISJOINT:
        S, T = np.meshgrid(g.nodes, g.nodes, indexing="ij")
        W = np.outer(g.weights, g.weights)
        empty = np.zeros(0)
        return PairRule(cls, S.ravel(), T.ravel(), W.ravel(), np.ones(S.size),
                        empty, empty, empty)
    lg = log_gauss(n_log)
    if cls is PairClass.COINCIDENT:
        # triangle s > t: s = t + d, t = (1 - d) tau
        def build(dn, dw, tn, tw):
            D, TAU = np.meshgrid(dn, tn, indexing="ij")
            W = np.outer(dw, tw) * (1.0 - D)
            t = (1.0 - D) * TAU
            return (t + D).ravel(), t.ravel(), W.ravel(), D.ravel()

        s1, t1, w1, d1 = build(g.nodes, g.weights, g.nodes, g.weights)
        sl, tl, wl, _ = build(lg.nodes, lg.weights, g.nodes, g.weights)
        s, t = _mirror(s1, t1)
        s_log, t_log = _mirror(sl, tl)
        return PairRule(cls, s, t, np.tile(w1, 2), np.tile(d1, 2),
                        s_log, t_log, -np.tile(wl, 2))
    # adjacent, singular corner at (0, 0); triangle t <= s: s = r, t = r eta
    def build(rn, rw, en, ew):
        R, E = np.meshgrid(rn, en, indexing="ij")
        W = np.outer(rw, ew) * R
        return R.ravel(), (R * E).ravel(), W.ravel(), R.ravel()

    s1, t1, w1, r1 = build(g.nodes, g.weights, g.nodes, g.weights)
    sl, tl, wl, _ = build(lg.nodes, lg.weights, g.nodes, g.weights)
    s, t = _mirror(s1, t1)
    s_log, t_log = _mirror(sl, tl)
    return PairRule(cls, s, t, np.tile(w1, 2), np.tile(r1, 2),
                    s_log, t_log, -np.tile(wl, 2))


def singular_pair_rule(cls: PairClass, n: int, n_log: int | None = None) -> PairRule:
    """Tensor rule on the unit square for the given element-pair class.

    Coincident pairs are split along the diagonal and adjacent pairs at the
    shared corner ``(0, 0)``; on each triangle a Duffy-type substitution
    isolates the logarithm in one variable, which is integrated with
    :func:`log_gauss` while the other factor uses Gauss-Legendre. ``n_log``
    defaults to ``n``.
    """
    cls = PairClass(cls)
    n = int(n)
    if n < 1:
        raise ValueError("need at least one quadrature point")
    return _pair_rule(cls, n, int(n_log) if n_log is not None else n)


@dataclass(frozen=True)
class QuadConfig:
    """Quadrature settings for boundary integrals.

    ``n_gauss`` points per element and direction for regular pairs and
    for the smooth factor of singular pairs, ``n_log`` log-Gauss points
    (defaults to ``n_gauss``), and near-singular subdivision up to
    ``near_depth`` levels whenever the distance of two pieces is below
    ``near_factor`` times their size. ``near_depth = 0`` disables grading.
    """

    n_gauss: int = DEFAULT_N_GAUSS
    n_log: int | None = None
    near_depth: int = DEFAULT_NEAR_DEPTH
    near_factor: float = 1.0

    def __post_init__(self):
        if self.n_gauss < 1 or (self.n_log is not None and self.n_log < 1):
            raise ValueError("quadrature orders must be positive")
        if self.near_depth < 0:
            raise ValueError("near_depth must be non-negative")

    @property
    def log_points(self) -> int:
        return self.n_gauss if self.n_log is None else self.n_log
