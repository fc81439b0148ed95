"""Solved Cauchy data saved to JSON for later evaluation."""

from __future__ import annotations

import json

import numpy as np

from ..postprocess import CauchyData, interface_cauchy, two_domain_cauchy
from ..quadrature import QuadConfig
from ..solver import concat_bases
from ..spaces import BoundarySpace, DomainSpace
from .problems import problem_interface_square, problem_machine

FORMAT = "igafembem-state-1"


def save_state(path, problem: str, degree: int, level: int, cfg: QuadConfig, cauchy: CauchyData):
    """Write flux and trace coefficients plus the data needed to rebuild bases."""
    state = {
        "format": FORMAT,
        "problem": problem,
        "degree": int(degree),
        "level": int(level),
        "n_gauss": cfg.n_gauss,
        "near_depth": cfg.near_depth,
        "kappa": 1 if problem == "interface-square" else 0,
        "flux": np.asarray(cauchy.flux, float).tolist(),
        "trace": np.asarray(cauchy.trace, float).tolist(),
    }
    with open(path, "w") as fh:
        json.dump(state, fh)
    return state


def _bases(problem: str, degree: int, level: int):
    if problem == "interface-square":
        domain, sol = problem_interface_square()
        bps = domain.boundaries["gamma"]
        trace = DomainSpace(domain, degree, level).trace_basis(bps)
        return bps, trace, (lambda y: -np.asarray(sol.u0(y), float))
    mp = problem_machine()
    traces = [DomainSpace(d, degree, level, dirichlet=["dirichlet"]).trace_basis(d.boundaries["gamma"])
              for d in mp.domains]
    union = concat_bases(traces)
    return union.bpatches, union, None


def load_state(path):
    """Return ``(cauchy, kappa, cfg)`` rebuilt from a state file."""
    with open(path) as fh:
        state = json.load(fh)
    if state.get("format") != FORMAT:
        raise ValueError("not a state file: %s" % path)
    bps, trace, offset = _bases(state["problem"], state["degree"], state["level"])
    bspace = BoundarySpace(bps, state["degree"], state["level"])
    flux = np.asarray(state["flux"], float)
    tr = np.asarray(state["trace"], float)
    if flux.size != bspace.size or tr.size != trace.size:
        raise ValueError("state file does not match the rebuilt spaces")
    cauchy = CauchyData(bps, bspace, flux, trace, tr, trace_offset=offset)
    cfg = QuadConfig(n_gauss=state["n_gauss"], near_depth=state["near_depth"])
    return cauchy, state["kappa"], cfg


def cauchy_of(problem: str, result, sol=None) -> CauchyData:
    if problem == "interface-square":
        return interface_cauchy(result, sol.u0)
    return two_domain_cauchy(result)
