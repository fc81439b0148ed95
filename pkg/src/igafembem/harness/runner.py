"""Refinement sweeps producing convergence records."""

from __future__ import annotations

import logging
import time

import numpy as np

from ..postprocess import (ConvergenceRecord, aitken_extrapolate, energy_error,
                           evaluate_representation, interface_cauchy, pointwise_error,
                           two_domain_cauchy)
from ..quadrature import QuadConfig
from ..solver import PicardNonConvergence, SingularSystemError, solve_interface, solve_two_domain
from .config import ExperimentConfig
from .problems import problem_interface_square, problem_machine, problem_machine_linear

log = logging.getLogger(__name__)

NUMERICAL_ERRORS = (PicardNonConvergence, SingularSystemError, np.linalg.LinAlgError)


def quad_config(config: ExperimentConfig) -> QuadConfig:
    return QuadConfig(n_gauss=config.n_gauss, near_depth=config.near_depth)


def machine_problem(name: str):
    return problem_machine_linear() if name == "machine-linear" else problem_machine()


def solve_square(config: ExperimentConfig, level: int):
    domain, sol = problem_interface_square()
    res = solve_interface(domain, config.degree, level, sol.data(), cfg=quad_config(config),
                          tol=config.tol, max_iter=config.max_iter)
    return res, sol


def solve_machine(config: ExperimentConfig, level: int, initial=None):
    mp = machine_problem(config.problem)
    return solve_two_domain(mp.domains, config.degree, level, mp.data, mp.materials,
                            cfg=quad_config(config), tol=config.tol, max_iter=config.max_iter,
                            initial=initial, **mp.solve_kwargs())


def square_errors(config: ExperimentConfig, level: int) -> dict:
    res, sol = solve_square(config, level)
    cfg = quad_config(config)
    errors = {"energy": energy_error(res.space, res.u, res.bspace, res.phi, sol.u, sol.grad_u,
                                     sol.phi, cfg)}
    cauchy = interface_cauchy(res, sol.u0)
    for path in config.paths():
        vals = evaluate_representation(path.points(), cauchy, 1, cfg).values
        errors[path.name] = pointwise_error(sol.ue, vals, path)
    return errors


def machine_values(config: ExperimentConfig, level: int) -> np.ndarray:
    res = solve_machine(config, level)
    path = config.paths()[0]
    return evaluate_representation(path.points(), two_domain_cauchy(res), 0,
                                   quad_config(config)).values


def machine_reference(values: dict, level: int):
    """Pointwise Aitken value from the three refinements after ``level``."""
    ref, deg = aitken_extrapolate(values[level + 1], values[level + 2], values[level + 3])
    if np.any(deg):
        log.warning("level %d: degenerate Aitken denominator at %d point(s)", level, int(np.sum(deg)))
    return ref


def run_convergence(config: ExperimentConfig, write: bool = True) -> ConvergenceRecord:
    """Solve on every configured level and record the error metrics.

    The interface problem records the energy error and the pointwise error
    on each square path. The machine problem records the pointwise error on
    the gap circle against the Aitken value of the next three levels. A
    numerical failure stops the sweep; the rows so far are kept and the
    record carries the failure message.
    """
    config.validate()
    record = ConvergenceRecord(config.problem, config.degree, config.n_gauss)
    machine = config.problem != "interface-square"
    values = {}
    try:
        for level in config.levels:
            t0 = time.perf_counter()
            if machine:
                need = [level] + ([level + 1, level + 2, level + 3] if config.aitken else [])
                for lv in need:
                    if lv not in values:
                        values[lv] = machine_values(config, lv)
                if not config.aitken:
                    continue
                ref = machine_reference(values, level)
                record.add(level, {config.paths()[0].name: pointwise_error(ref, values[level])})
            else:
                record.add(level, square_errors(config, level))
            log.info("level %d done in %.1f s: %s", level, time.perf_counter() - t0,
                     record.rows[-1][2] if record.rows else {})
    except NUMERICAL_ERRORS as exc:
        record.failure = "level %d: %s" % (level, exc)
        log.error("sweep stopped: %s", record.failure)
    if write:
        record.write_csv(config.output)
    return record
