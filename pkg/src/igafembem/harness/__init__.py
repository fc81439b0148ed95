"""Built-in problems, configuration, sweeps and the command line."""

from .config import ExperimentConfig, build_config, parse_levels, read_config_file
from .problems import (MachineProblem, ManufacturedSolution, problem_interface_square,
                       problem_machine, problem_machine_linear)
from .runner import run_convergence

__all__ = ["ExperimentConfig", "build_config", "parse_levels", "read_config_file",
           "MachineProblem", "ManufacturedSolution", "problem_interface_square",
           "problem_machine", "problem_machine_linear", "run_convergence"]
