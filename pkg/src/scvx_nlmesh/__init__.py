"""Adaptive-mesh successive convexification for minimum-fuel low-thrust trajectories.

The solver iterates convex second-order cone subproblems about a reference
trajectory. Time dilation per segment gives the mesh its freedom, and a
state-transition-tensor nonlinearity index scales the per-node trust regions.

Typical use::

    from scvx_nlmesh import load_config, run
    cfg = load_config("cr3bp_halo.yaml")
    result = run(cfg.problem(), cfg.options(), cfg.nodes)
"""

import os

__version__ = "0.1.0"

from .config import CaseConfig, SweepConfig, load_config, serialize  # noqa: E402
from .dynamics import CR3BP, MEE, get_model  # noqa: E402
from .errors import (AssemblyError, ConfigError, DomainError, PropagationError,  # noqa: E402
                     ScvxError)
from .kernels import BACKEND, HAVE_COMPILED  # noqa: E402
from .problems import ProblemDef, cr3bp_problem, mee_problem  # noqa: E402
from .scvx import IterationRecord, RunResult, Scvx, ScvxOptions, run  # noqa: E402

CONFIG_DIR = os.path.join(os.path.dirname(__file__), "configs")


def bundled_config(name):
    """Path of a bundled config ('cr3bp_halo', 'e2d' or 'cr3bp_sweep')."""
    path = os.path.join(CONFIG_DIR, f"{name}.yaml")
    if not os.path.exists(path):
        raise FileNotFoundError(f"no bundled config named {name!r}")
    return path


__all__ = [
    "AssemblyError", "BACKEND", "CR3BP", "CaseConfig", "ConfigError", "DomainError",
    "HAVE_COMPILED", "IterationRecord", "MEE", "ProblemDef", "PropagationError", "RunResult",
    "Scvx", "ScvxError", "ScvxOptions", "SweepConfig", "bundled_config", "cr3bp_problem",
    "get_model", "load_config", "mee_problem", "run", "serialize",
]
