"""Sudakov decompositions for optimal transport with convex polyhedral costs."""

from .config import Settings, load_settings
from .errors import InputError, SudakovError
from .pipeline import COMMANDS, PipelineArtifacts, run_command
from .problem_io import ProblemSpec, dump_problem, parse_problem

__version__ = "0.4.0"

__all__ = [
    "COMMANDS",
    "InputError",
    "PipelineArtifacts",
    "ProblemSpec",
    "Settings",
    "SudakovError",
    "dump_problem",
    "load_settings",
    "parse_problem",
    "run_command",
]
