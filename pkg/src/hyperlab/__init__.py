"""Radial ground states of -Delta u - lambda u = u^p on hyperbolic space and their spectra."""
from __future__ import annotations

from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.1.0"

from .errors import HyperlabError, InadmissibleParams
from .groundstate import RadialProfile, ShootingOptions, find_ground_state, solve_ball
from .ode import ProblemParams, validate_params

__all__ = [
    "HyperlabError",
    "InadmissibleParams",
    "ProblemParams",
    "RadialProfile",
    "ShootingOptions",
    "find_ground_state",
    "solve_ball",
    "validate_params",
    "__version__",
]
