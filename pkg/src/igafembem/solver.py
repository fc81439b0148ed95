"""Coupled FEM-BEM systems and the Picard iteration.

Interface problem (unknowns ``u`` in the domain space and the exterior
flux ``phi``)::

    [ A(u_k)       -T^T ] [u  ]   [ F + <phi0, v>        ]
    [ 1/2 T - K     V   ] [phi] = [ <psi, (1/2 - K) u0>  ]

Two-domain problem (``u_1, u_2`` with homogeneous Dirichlet parts, ``phi``
on the gap boundary with zero mean, enforced by a multiplier ``lam``)::

    [ A_1          0            T_1^T   0 ]
    [ 0            A_2          T_2^T   0 ]
    [ -(T_1/2+K_1) -(T_2/2+K_2) V       m ]
    [ 0            0            m^T     0 ]
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .bem import FunctionColumn, assemble_K, assemble_mass, assemble_V
from .fem import MaterialModel, assemble_load, assemble_stiffness, material_identity
from .quadrature import QuadConfig
from .spaces import BoundaryBasis, BoundarySpace, DomainSpace

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 100
#: systems up to this size are solved by dense LU in ``auto`` mode
DENSE_LIMIT = 1500
MIN_RELAXATION = 1.0 / 64


class SingularSystemError(ArithmeticError):
    pass


class PicardNonConvergence(RuntimeError):
    def __init__(self, state):
        super().__init__("Picard iteration did not converge in %d steps "
                         "(last residual %.3e)" % (state.iterations, state.history[-1]))
        self.state = state


@dataclass
class PicardState:
    x: np.ndarray
    history: list = field(default_factory=list)
    iterations: int = 0
    tol: float = DEFAULT_TOL
    converged: bool = False


def linear_solve(S, b, method: str = "auto") -> np.ndarray:
    """Solve ``S x = b`` by LU with partial pivoting (dense or sparse)."""
    n = S.shape[0]
    if method == "auto":
        method = "dense" if n <= DENSE_LIMIT else "sparse"
    if method == "dense":
        Sd = S.toarray() if sp.issparse(S) else np.asarray(S)
        with warnings.catch_warnings():
            warnings.simplefilter("error", sla.LinAlgWarning)
            try:
                lu = sla.lu_factor(Sd, check_finite=True)
            except (sla.LinAlgError, sla.LinAlgWarning, ValueError) as exc:
                raise SingularSystemError(str(exc)) from exc
        piv = np.abs(np.diag(lu[0]))
        if piv.min() <= 1e-14 * max(piv.max(), 1e-300):
            raise SingularSystemError("singular coupled system (zero pivot)")
        return sla.lu_solve(lu, b)
    if method == "sparse":
        try:
            return spla.splu(sp.csc_matrix(S)).solve(np.asarray(b, float))
        except RuntimeError as exc:
            raise SingularSystemError(str(exc)) from exc
    raise ValueError("unknown linear solver %r" % method)


def picard_iterate(system_builder, initial, tol: float = DEFAULT_TOL,
                   max_iter: int = DEFAULT_MAX_ITER, solver: str = "auto",
                   relaxation: float = 1.0, adaptive: bool = False) -> PicardState:
    """Fixed-point iteration with frozen coefficients.

    ``system_builder(x)`` returns ``(S(x), b)``. Each step solves
    ``S(x_k) y = b`` and sets ``x_{k+1} = (1 - w) x_k + w y`` with
    ``w = relaxation``; the iteration stops once the relative residual
    ``|S(x) x - b| / |b|`` of the new iterate is at most ``tol``. With
    ``adaptive`` the step ``w`` is halved (down to ``MIN_RELAXATION``)
    whenever the residual grows.
    """
    if tol <= 0:
        raise ValueError("tolerance must be positive")
    if not 0.0 < relaxation <= 1.0:
        raise ValueError("relaxation must lie in (0, 1]")
    x = np.asarray(initial, float)
    S, b = system_builder(x)
    nb = np.linalg.norm(b)
    state = PicardState(x, [], 0, tol)
    for it in range(1, max_iter + 1):
        y = linear_solve(S, b, solver)
        x = y if relaxation == 1.0 else (1.0 - relaxation) * x + relaxation * y
        S, b = system_builder(x)
        res = np.linalg.norm(S @ x - b) / (nb if nb > 0 else 1.0)
        state.x, state.iterations = x, it
        if adaptive and state.history and res > state.history[-1]:
            relaxation = max(0.5 * relaxation, MIN_RELAXATION)
            log.debug("picard: residual grew, relaxation -> %g", relaxation)
        state.history.append(float(res))
        log.debug("picard %d: residual %.3e", it, res)
        if res <= tol:
            state.converged = True
            return state
    raise PicardNonConvergence(state)


# ---------------------------------------------------------------- interface


@dataclass
class InterfaceData:
    """Right-hand side data; callables take points (m, 2) (and normals)."""

    f: callable = None
    u0: callable = None          # u0(x)
    phi0: callable = None        # phi0(x, n)


@dataclass
class InterfaceSolution:
    u: np.ndarray
    phi: np.ndarray
    space: DomainSpace
    bspace: BoundarySpace
    picard: PicardState
    matrices: dict
    compatibility: float
    radiation_constant: float


def boundary_matrices(space: DomainSpace, bspace: BoundarySpace, cfg: QuadConfig | None = None,
                      trace: BoundaryBasis | None = None):
    """``V``, ``K`` and the trace mass ``M`` on a set of boundary patches.

    ``K`` and ``M`` are returned on the compact trace numbering of
    ``trace`` (default: the trace basis of ``space``).
    """
    trace = space.trace_basis(bspace.bpatches) if trace is None else trace
    V = assemble_V(bspace, cfg)
    K = assemble_K(bspace, trace, cfg)
    M = assemble_mass(bspace, trace)
    return V, K, M, trace


def _expand(mat, cols, n):
    out = np.zeros((mat.shape[0], n))
    out[:, cols] = mat
    return out


def stabilization_s(trace_coeffs, phi_coeffs, V, K, M) -> float:
    """``<1, (1/2 - K) v> + <1, V psi>`` from assembled matrices.

    ``trace_coeffs`` are coefficients in the trace numbering of ``K``/``M``;
    the constant function has all-ones coefficients in ``S^2``.
    """
    one = np.ones(V.shape[0])
    return float(one @ (0.5 * M - K) @ np.asarray(trace_coeffs, float)
                 + one @ V @ np.asarray(phi_coeffs, float))


def solve_interface(domain, p: int, level: int, data: InterfaceData,
                    material: MaterialModel | None = None, cfg: QuadConfig | None = None,
                    label: str = "gamma", tol: float = DEFAULT_TOL,
                    max_iter: int = DEFAULT_MAX_ITER, solver: str = "auto",
                    initial=None, relaxation: float = 1.0,
                    adaptive: bool = False) -> InterfaceSolution:
    """Galerkin solution of the non-symmetric interface coupling.

    ``relaxation`` damps the Picard update for nonlinear materials; linear
    materials always take the full step and finish in one iteration.
    """
    material = material_identity() if material is None else material
    bps = domain.boundaries[label]
    space = DomainSpace(domain, p, level)
    bspace = BoundarySpace(bps, p, level)
    V, K, M, trace = boundary_matrices(space, bspace, cfg)
    n, m = space.numdofs, bspace.size
    T = _expand(M, trace.global_dofs, n)
    Kg = _expand(K, trace.global_dofs, n)
    F = assemble_load(space, data.f, data.phi0, bps)
    g = np.zeros(m)
    if data.u0 is not None:
        col = FunctionColumn(data.u0)
        g = 0.5 * assemble_mass(bspace, col) - assemble_K(bspace, col, cfg)
    b = np.concatenate([F, g])
    # (f, 1) + <phi0, 1> by the partition of unity
    compat = float(F.sum())
    radiation = -compat / (2 * np.pi)
    if abs(compat) > 1e-8:
        log.warning("compatibility (f,1) + <phi0,1> = %.3e != 0; radiation constant C = %.6g",
                    compat, radiation)
    lower = sp.csr_matrix(np.hstack([0.5 * T - Kg, V]))
    upper_right = sp.csr_matrix(-T.T)
    cache = {}

    def build(x):
        u = x[:n]
        key = None if material.is_linear else u.tobytes()
        if key not in cache:
            cache.clear()
            A = assemble_stiffness(space, material, u)
            cache[key] = sp.vstack([sp.hstack([A, upper_right]), lower]).tocsr()
        return cache[key], b

    x0 = np.zeros(n + m) if initial is None else np.asarray(initial, float)
    w = 1.0 if material.is_linear else relaxation
    state = picard_iterate(build, x0, tol, max_iter, solver, w, adaptive)
    u, phi = state.x[:n], state.x[n:]
    return InterfaceSolution(u, phi, space, bspace, state,
                             dict(V=V, K=K, M=M, trace=trace, T=T, rhs=b),
                             compat, radiation)


# --------------------------------------------------------------- two domain


@dataclass
class TwoDomainData:
    f: tuple = (None, None)
    phi0: tuple = (None, None)
    u0: callable = None          # jump data on the whole gap boundary


@dataclass
class TwoDomainSolution:
    u: tuple
    phi: np.ndarray
    spaces: tuple
    bspace: BoundarySpace
    picard: PicardState
    matrices: dict
    multiplier: float
    flux_mean: float


def concat_bases(bases) -> BoundaryBasis:
    """Union of boundary bases on disjoint patch sets with offset numbering."""
    bps, kvs, dofs, gd = [], [], [], []
    off = 0
    for i, b in enumerate(bases):
        bps += b.bpatches
        kvs += b.kvs
        dofs += [d + off for d in b.dofs]
        gl = b.global_dofs if b.global_dofs is not None else np.arange(b.size)
        gd.append(np.column_stack([np.full(b.size, i), gl]))
        off += b.size
    return BoundaryBasis(bps, kvs, dofs, off, global_dofs=np.concatenate(gd))


def solve_two_domain(domains, p: int, level: int, data: TwoDomainData | None = None,
                     materials=None, cfg: QuadConfig | None = None,
                     gamma: str = "gamma", dirichlet: str = "dirichlet",
                     tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER,
                     solver: str = "auto", initial=None, patch_order=None,
                     relaxation: float = 1.0, adaptive: bool = False) -> TwoDomainSolution:
    """Two FEM domains coupled through the BEM gap with zero-mean flux.

    ``domains`` are the two rings with boundary labels ``gamma`` (normals
    out of the gap) and ``dirichlet``. ``patch_order`` optionally permutes
    the gap boundary patches (for invariance checks). ``relaxation`` and
    ``adaptive`` control the damped Picard update for nonlinear materials.
    """
    data = TwoDomainData() if data is None else data
    materials = (material_identity(),) * 2 if materials is None else tuple(materials)
    spaces = tuple(DomainSpace(d, p, level, dirichlet=[dirichlet]) for d in domains)
    gb = [d.boundaries[gamma] for d in domains]
    traces = [s.trace_basis(b) for s, b in zip(spaces, gb)]
    union = concat_bases(traces)
    bps = union.bpatches
    if patch_order is not None:
        perm = list(patch_order)
        union = BoundaryBasis([bps[i] for i in perm], [union.kvs[i] for i in perm],
                              [union.dofs[i] for i in perm], union.size, union.global_dofs)
        bps = union.bpatches
    bspace = BoundarySpace(bps, p, level)
    V = assemble_V(bspace, cfg)
    K = assemble_K(bspace, union, cfg)
    M = assemble_mass(bspace, union)
    mvec = assemble_mass(bspace, FunctionColumn(lambda x: np.ones(len(x))))
    m = bspace.size
    free = [s.free for s in spaces]
    nf = [f.size for f in free]
    Ts, Cs = [], []
    for i, s in enumerate(spaces):
        cols = np.flatnonzero(union.global_dofs[:, 0] == i)
        gl = union.global_dofs[cols, 1]
        T = np.zeros((m, s.numdofs))
        C = np.zeros((m, s.numdofs))
        T[:, gl] = M[:, cols]
        C[:, gl] = 0.5 * M[:, cols] + K[:, cols]
        Ts.append(T[:, free[i]])
        Cs.append(C[:, free[i]])
    Fs = [assemble_load(s, data.f[i], data.phi0[i], gb[i])[free[i]]
          for i, s in enumerate(spaces)]
    g = np.zeros(m)
    if data.u0 is not None:
        col = FunctionColumn(data.u0)
        g = 0.5 * assemble_mass(bspace, col) + assemble_K(bspace, col, cfg)
    b = np.concatenate(Fs + [g, [0.0]])
    n1, n2 = nf
    lower = sp.csr_matrix(np.block([
        [-Cs[0], -Cs[1], V, mvec[:, None]],
        [np.zeros((1, n1 + n2)), mvec[None, :], np.zeros((1, 1))],
    ]))
    coup = [sp.csr_matrix(np.hstack([Ts[i].T, np.zeros((nf[i], 1))])) for i in range(2)]
    cache = {}
    linear = all(mat.is_linear for mat in materials)

    def build(x):
        key = None if linear else x[:n1 + n2].tobytes()
        if key not in cache:
            cache.clear()
            A = []
            for i, s in enumerate(spaces):
                u = np.zeros(s.numdofs)
                u[free[i]] = x[:n1] if i == 0 else x[n1:n1 + n2]
                A.append(assemble_stiffness(s, materials[i], u)[free[i]][:, free[i]])
            top = sp.bmat([[A[0], None, coup[0]], [None, A[1], coup[1]]])
            cache[key] = sp.vstack([top, lower]).tocsr()
        return cache[key], b

    x0 = np.zeros(n1 + n2 + m + 1) if initial is None else np.asarray(initial, float)
    state = picard_iterate(build, x0, tol, max_iter, solver,
                           1.0 if linear else relaxation, adaptive)
    x = state.x
    us = []
    for i, s in enumerate(spaces):
        u = np.zeros(s.numdofs)
        u[free[i]] = x[:n1] if i == 0 else x[n1:n1 + n2]
        us.append(u)
    phi = x[n1 + n2:n1 + n2 + m]
    return TwoDomainSolution(tuple(us), phi, spaces, bspace, state,
                             dict(V=V, K=K, M=M, trace=union, rhs=b),
                             float(x[-1]), float(mvec @ phi))
