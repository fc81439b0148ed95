"""Finite element assembly on multipatch spline spaces and material laws."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .bem import FunctionColumn, assemble_mass
from .spaces import BoundaryBasis, DomainSpace


@dataclass(frozen=True)
class MaterialModel:
    """Scalar law ``U(grad u) = g(|grad u|) grad u``."""

    g: callable
    dg: callable | None = None
    is_linear: bool = False
    name: str = "material"
    constants: dict = field(default_factory=dict)

    def __call__(self, t):
        return self.g(t)

    def flux(self, grad) -> np.ndarray:
        grad = np.asarray(grad, float)
        t = np.linalg.norm(grad, axis=-1)
        return self.g(t)[..., None] * grad


def material_identity() -> MaterialModel:
    return MaterialModel(lambda t: np.ones_like(np.asarray(t, float)),
                         lambda t: np.zeros_like(np.asarray(t, float)),
                         is_linear=True, name="identity",
                         constants={"C_Lip": 1.0, "C_ell": 1.0})


def _g_low(t):
    return np.arctanh(2.0 * t / 3.0) / (100.0 * t)


def _dg_low(t):
    z = 2.0 * t / 3.0
    return ((2.0 / 3.0) * t / (1.0 - z * z) - np.arctanh(z)) / (100.0 * t * t)


def material_ferromagnetic(eps: float = 0.01) -> MaterialModel:
    """Saturating reluctivity with ``g(0) = 1/150``.

    ``g(t) = artanh(2t/3) / (100 t)`` up to ``t_c = 3/2 - eps`` and
    ``1 + beta exp(-alpha t)`` beyond, with ``alpha, beta`` making ``g``
    continuously differentiable.
    """
    tc = 1.5 - eps
    gc, dgc = float(_g_low(tc)), float(_dg_low(tc))
    alpha = dgc / (1.0 - gc)
    beta = (gc - 1.0) * np.exp(alpha * tc)

    def g(t):
        t = np.asarray(t, dtype=float)
        if np.any(t < 0):
            raise ValueError("g is defined for t >= 0 only")
        out = np.empty_like(t)
        small = t < 1e-4
        mid = ~small & (t <= tc)
        high = t > tc
        ts = t[small]
        # Taylor expansion of artanh(z)/z around 0
        out[small] = (1.0 + (2.0 * ts / 3.0) ** 2 / 3.0) / 150.0
        out[mid] = _g_low(t[mid])
        out[high] = 1.0 + beta * np.exp(-alpha * t[high])
        return out

    def dg(t):
        t = np.asarray(t, dtype=float)
        out = np.empty_like(t)
        small = t < 1e-4
        mid = ~small & (t <= tc)
        high = t > tc
        out[small] = 2.0 * (4.0 / 9.0) / 3.0 * t[small] / 150.0
        out[mid] = _dg_low(t[mid])
        out[high] = -alpha * beta * np.exp(-alpha * t[high])
        return out

    return MaterialModel(g, dg, is_linear=False, name="ferromagnetic",
                         constants={"t_c": tc, "alpha": alpha, "beta": beta})


def sample_material_constants(material: MaterialModel, n: int = 10000,
                              radius: float = 10.0, seed: int = 0):
    """Empirical Lipschitz and monotonicity constants of ``U`` on a ball.

    Returns ``(C_lip, c_ell)`` as max of ``|Ux - Uy| / |x - y|`` and min of
    ``(Ux - Uy).(x - y) / |x - y|^2`` over random pairs.
    """
    rng = np.random.default_rng(seed)

    def ball(m):
        r = radius * np.sqrt(rng.random(m))
        a = 2 * np.pi * rng.random(m)
        return np.column_stack([r * np.cos(a), r * np.sin(a)])

    x, y = ball(n), ball(n)
    # include close pairs to probe local derivatives
    y[: n // 2] = x[: n // 2] + 1e-3 * (ball(n // 2) / radius)
    d = x - y
    dU = material.flux(x) - material.flux(y)
    nd2 = np.einsum("ij,ij->i", d, d)
    keep = nd2 > 0
    lip = np.sqrt(np.einsum("ij,ij->i", dU, dU)[keep] / nd2[keep]).max()
    ell = (np.einsum("ij,ij->i", dU, d)[keep] / nd2[keep]).min()
    return float(lip), float(ell)


def _element_data(space: DomainSpace, patch: int, nq: int | None):
    cache = space.__dict__.setdefault("_ed_cache", {})
    key = (patch, nq)
    if key not in cache:
        cache[key] = space.element_data(patch, nq)
    return cache[key]


def gradient_norms(space: DomainSpace, coeffs, nq: int | None = None):
    """``|grad u|`` at all element quadrature points, per patch."""
    coeffs = np.asarray(coeffs, float)
    out = []
    for k in range(len(space.domain.patches)):
        ed = _element_data(space, k, nq)
        g = np.einsum("eqld,el->eqd", ed.dN, coeffs[ed.dofs])
        out.append(np.linalg.norm(g, axis=-1))
    return out


def assemble_stiffness(space: DomainSpace, material: MaterialModel | None = None,
                       u=None, nq: int | None = None) -> sp.csr_matrix:
    """Frozen-coefficient stiffness ``int g(|grad u|) grad v_i . grad v_j``.

    ``u`` is the current iterate (zero if omitted); ``nq`` defaults to
    ``p + 2`` Gauss points per direction.
    """
    material = material_identity() if material is None else material
    rows, cols, vals = [], [], []
    for k in range(len(space.domain.patches)):
        ed = _element_data(space, k, nq)
        if u is None or material.is_linear:
            coef = material(np.zeros(ed.w.shape))
        else:
            coeffs = np.asarray(u, float)
            g = np.einsum("eqld,el->eqd", ed.dN, coeffs[ed.dofs])
            coef = material(np.linalg.norm(g, axis=-1))
        wc = ed.w * coef
        local = np.einsum("eq,eqkd,eqld->ekl", wc, ed.dN, ed.dN, optimize=True)
        L = ed.dofs.shape[1]
        rows.append(np.repeat(ed.dofs, L, axis=1).ravel())
        cols.append(np.tile(ed.dofs, (1, L)).ravel())
        vals.append(local.ravel())
    n = space.numdofs
    A = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(n, n)).tocsr()
    A.sum_duplicates()
    return A


def assemble_load(space: DomainSpace, f=None, phi0=None, bpatches=None,
                  nq: int | None = None) -> np.ndarray:
    """Load vector ``(f, v_i) + <phi0, v_i>``.

    ``f(x)`` takes points of shape (m, 2); ``phi0(x, n)`` takes boundary
    points and unit normals and is integrated over ``bpatches``.
    """
    F = np.zeros(space.numdofs)
    if f is not None:
        for k in range(len(space.domain.patches)):
            ed = _element_data(space, k, nq)
            fx = np.asarray(f(ed.x.reshape(-1, 2)), float).reshape(ed.w.shape)
            np.add.at(F, ed.dofs, np.einsum("eq,eql->el", ed.w * fx, ed.N))
    if phi0 is not None:
        if bpatches is None:
            raise ValueError("boundary patches needed for the Neumann term")
        tr = space.trace_basis(bpatches)
        F[tr.global_dofs] += assemble_mass(tr, FunctionColumn(phi0, normal=True))
    return F


def assemble_trace_coupling(bspace: BoundaryBasis, space: DomainSpace, bpatches=None,
                            nq: int | None = None) -> np.ndarray:
    """Dense ``T[j, i] = <psi_j, v_i|_Gamma>`` over all domain coefficients."""
    bpatches = bspace.bpatches if bpatches is None else bpatches
    tr = space.trace_basis(bpatches)
    T = np.zeros((bspace.size, space.numdofs))
    T[:, tr.global_dofs] = assemble_mass(bspace, tr, nq)
    return T
