"""Built-in problems: the manufactured interface problem and the machine."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..fem import material_ferromagnetic, material_identity
from ..geometry import build_machine_geometry, build_square_geometry
from ..solver import InterfaceData, TwoDomainData


def _r2(x):
    x = np.asarray(x, float)
    return x[..., 0] ** 2 + x[..., 1] ** 2


@dataclass(frozen=True)
class ManufacturedSolution:
    """Exact interior and exterior fields with the derived jump data."""

    u: callable
    grad_u: callable
    ue: callable
    grad_ue: callable
    f: callable
    u0: callable
    phi0: callable
    phi: callable          # exterior conormal derivative on the interface

    def data(self) -> InterfaceData:
        return InterfaceData(f=self.f, u0=self.u0, phi0=self.phi0)


def mexican_hat(x):
    s = _r2(x)
    return (1.0 - 100.0 * s) * np.exp(-50.0 * s)


def mexican_hat_grad(x):
    x = np.asarray(x, float)
    s = _r2(x)
    return (2.0 * np.exp(-50.0 * s) * (5000.0 * s - 150.0))[..., None] * x


def mexican_hat_rhs(x):
    s = _r2(x)
    return np.exp(-50.0 * s) * (600.0 - 70000.0 * s + 1.0e6 * s * s)


def log_radius(x):
    return 0.5 * np.log(_r2(x))


def log_radius_grad(x):
    x = np.asarray(x, float)
    return x / _r2(x)[..., None]


def problem_interface_square() -> tuple:
    """Square ``(-0.25, 0.25)^2`` with the Mexican hat inside and ``log|x|`` outside.

    Returns ``(domain, solution)``.
    """
    def u0(x):
        return mexican_hat(x) - log_radius(x)

    def phi0(x, n):
        return np.einsum("...i,...i->...", mexican_hat_grad(x) - log_radius_grad(x), n)

    def phi(x, n):
        return np.einsum("...i,...i->...", log_radius_grad(x), n)

    sol = ManufacturedSolution(mexican_hat, mexican_hat_grad, log_radius, log_radius_grad,
                               mexican_hat_rhs, u0, phi0, phi)
    return build_square_geometry(), sol


def rotor_source(x):
    return np.zeros(np.shape(x)[:-1])


def stator_source(x):
    x = np.asarray(x, float)
    return 100.0 * np.sin(np.arctan2(x[..., 1], x[..., 0]))


@dataclass
class MachineProblem:
    domains: tuple
    gap: object
    data: TwoDomainData
    materials: tuple
    relaxation: float = 1.0
    adaptive: bool = False

    def solve_kwargs(self) -> dict:
        return {"relaxation": self.relaxation, "adaptive": self.adaptive}


# plain Picard oscillates for this saturating law; damped steps converge
MACHINE_RELAXATION = 0.5


def problem_machine() -> MachineProblem:
    """Rotor and stator rings around a thin air gap, ferromagnetic material."""
    om1, om2, omb = build_machine_geometry()
    data = TwoDomainData(f=(rotor_source, stator_source), phi0=(None, None), u0=None)
    mat = material_ferromagnetic()
    return MachineProblem((om1, om2), omb, data, (mat, mat), MACHINE_RELAXATION, True)


def problem_machine_linear() -> MachineProblem:
    prob = problem_machine()
    lin = material_identity()
    return MachineProblem(prob.domains, prob.gap, prob.data, (lin, lin), 1.0)
