"""Adaptive-mesh successive convexification driver.

Each iteration linearizes about the current reference, solves the convex
subproblem inside the trust region, re-propagates the candidate through the
nonlinear dynamics and compares the actual cost decrease with the predicted
one to accept or reject the step and resize the trust region.
"""

import logging
import math
import time
from dataclasses import dataclass, field, replace
from typing import Callable, List, Optional

import numpy as np

from . import conic
from .discretization import ReferenceTrajectory, compute_defects, discretize
from .errors import PropagationError
from .nonlinearity import directional_indices, node_multipliers
from .subproblem import assemble, extract_solution, trapezoid

log = logging.getLogger(__name__)

UNIFORM = "uniform"
ADAPTIVE = "adaptive"


@dataclass
class ScvxOptions:
    """Algorithm parameters (thresholds, trust region, penalty, budgets)."""

    eps_tol: float = 2.5e-3
    rho0: float = 0.04
    rho1: float = 0.2
    rho2: float = 0.7
    alpha: float = 1.5
    beta: float = 1.5
    penalty: float = 5.0
    r_x: tuple = (0.1, 0.1, 0.1, 0.1, 0.1, 0.1)
    r_s: float = 0.1
    mesh: str = ADAPTIVE
    nl_index: bool = True
    eta: float = 0.1
    gamma_min: float = 0.5
    gamma_max: float = 20.0
    max_iterations: int = 200
    max_rejections: int = 15
    solver_tol: float = conic.DEFAULT_TOL
    solver_max_iter: int = conic.DEFAULT_MAX_ITER
    rtol: float = 1e-10
    atol: float = 1e-12

    def __post_init__(self):
        self.r_x = tuple(float(r) for r in self.r_x)
        if not 0.0 < self.rho0 < self.rho1 < self.rho2 < 1.0:
            raise ValueError("need 0 < rho0 < rho1 < rho2 < 1")
        if not (self.alpha > 1.0 and self.beta > 1.0):
            raise ValueError("need alpha > 1 and beta > 1")
        if not self.penalty > 0.0:
            raise ValueError("penalty coefficient must be positive")
        if len(self.r_x) != 6 or min(self.r_x) <= 0.0 or self.r_s <= 0.0:
            raise ValueError("trust radii must be positive")
        if self.mesh not in (UNIFORM, ADAPTIVE):
            raise ValueError(f"mesh must be '{UNIFORM}' or '{ADAPTIVE}'")
        if not self.eta > 0.0 or not 0.0 < self.gamma_min <= self.gamma_max:
            raise ValueError("need eta > 0 and 0 < gamma_min <= gamma_max")
        if self.eps_tol < 0.0 or self.max_iterations < 1 or self.max_rejections < 1:
            raise ValueError("invalid tolerance or iteration budget")


@dataclass
class IterationRecord:
    iteration: int
    L: float
    J_before: float
    J_after: float
    dJ: float
    dL: float
    rho: float
    accepted: bool
    r_x: np.ndarray
    r_s: float
    max_defect: float
    propellant_kg: float
    solver_status: str
    solver_iterations: int

    CSV_COLUMNS = (
        ("iteration", "iteration [-]"), ("L", "L [nd]"), ("J_before", "J_before [nd]"),
        ("J_after", "J_after [nd]"), ("dJ", "dJ [nd]"), ("dL", "dL [nd]"), ("rho", "rho [-]"),
        ("accepted", "accepted [bool]"), ("r_s", "r_s [TU]"),
        ("max_defect", "max_defect [nd]"), ("propellant_kg", "propellant [kg]"),
        ("solver_status", "solver_status [-]"), ("solver_iterations", "solver_iterations [-]"),
    )

    def csv_row(self):
        row = []
        for key, _ in self.CSV_COLUMNS:
            val = getattr(self, key)
            if isinstance(val, (bool, np.bool_)):
                row.append(int(val))
            elif isinstance(val, float):
                row.append(repr(val))
            else:
                row.append(val)
        row.extend(repr(float(r)) for r in self.r_x)
        return row

    @classmethod
    def csv_header(cls):
        return [label for _, label in cls.CSV_COLUMNS] + [f"r_x{i} [nd]" for i in range(6)]


@dataclass
class RunResult:
    converged: bool
    reference: ReferenceTrajectory
    final_mass_kg: float
    history: List[IterationRecord]
    wall_time: float
    message: str = ""
    final_defects: Optional[np.ndarray] = None
    solver_residuals: list = field(default_factory=list)

    @property
    def iterations(self):
        return len(self.history)

    @property
    def accepted_iterations(self):
        return sum(1 for r in self.history if r.accepted)


def initialize_reference(problem, K):
    """Straight-line initial guess: coast, full mass, uniform dilation."""
    if K < 2:
        raise ValueError("need at least two nodes")
    w = np.linspace(0.0, 1.0, K)[:, None]
    x = (1.0 - w) * problem.x0 + w * problem.xf
    x[0], x[-1] = problem.x0, problem.xf
    model = problem.make_model()
    if np.any(model.singular_mask(x)):
        raise ValueError("interpolated initial guess passes through a singular state")
    return ReferenceTrajectory(
        x=x, thrust=np.zeros((K, 3)), thrust_bound=np.zeros(K),
        z=np.full(K, problem.z0), s=np.full(K - 1, problem.tof))


def nonlinear_cost(thrust_bound, defects, penalty):
    """Thrust integral (trapezoid) plus the penalty-weighted L1 norm of the defects."""
    return trapezoid(thrust_bound) + penalty * float(np.sum(defects))


def trust_update(rho, dL, opts):
    """Step decision ``(accepted, factor)`` for a ratio ``rho`` of actual to predicted decrease."""
    if not dL > 0.0 or not math.isfinite(rho) or rho < opts.rho0:
        return False, 1.0 / opts.alpha
    if rho < opts.rho1:
        return True, 1.0 / opts.alpha
    if rho < opts.rho2:
        return True, 1.0
    return True, opts.beta


class Scvx:
    """Stateful SCVX solver; call :meth:`step` repeatedly or :meth:`run`."""

    def __init__(self, problem, options, K, reference=None, sink=None, backend=None):
        self.problem = problem
        self.opts = options
        self.K = int(K)
        self.model = problem.make_model(backend=backend)
        self.params = problem.subproblem_params(options.penalty)
        self.sink = sink
        self.r_x = np.array(options.r_x, dtype=float)
        self.r_s = float(options.r_s) if options.mesh == ADAPTIVE else 0.0
        ref = reference if reference is not None else initialize_reference(problem, self.K)
        if options.mesh == UNIFORM:
            ref = replace(ref, s=np.full(self.K - 1, problem.tof))
        self.history = []
        self.consecutive_rejections = 0
        self.converged = False
        self.solver_residuals = []
        self._set_reference(ref)

    # -- reference bookkeeping ----------------------------------------------
    def _set_reference(self, ref, defects=None):
        with_stt = self.opts.nl_index
        self.ref = ref
        self.disc = discretize(self.model, ref, with_stt=with_stt,
                               rtol=self.opts.rtol, atol=self.opts.atol)
        if defects is None:
            defects = np.abs(self.disc.x_end - ref.x[1:])
        self.defects = defects
        self.J_ref = nonlinear_cost(ref.thrust_bound, defects, self.opts.penalty)
        self.gamma = None
        if with_stt:
            v = directional_indices(self.disc.Lam, self.disc.A)
            self.v = v
            self.gamma = node_multipliers(v, self.opts.eta, self.opts.gamma_min,
                                          self.opts.gamma_max)

    def trust_field(self):
        """State radii per node, scaled by the nonlinearity multipliers when enabled."""
        if self.gamma is None:
            return np.broadcast_to(self.r_x, (self.K, 6)).copy()
        return self.gamma * self.r_x

    def propellant_kg(self, z_last=None):
        z_last = self.ref.z[-1] if z_last is None else z_last
        return self.problem.m0_kg - float(self.problem.mass_kg(z_last))

    # -- one iteration ----------------------------------------------------------
    def step(self):
        """Solve, evaluate, accept/reject and resize; returns the IterationRecord."""
        opts = self.opts
        prog = assemble(self.ref, self.disc, self.trust_field(), self.r_s, self.params)
        csol = conic.solve(prog, opts.solver_tol, opts.solver_max_iter)
        sol = extract_solution(prog, csol, self.params)
        it = len(self.history) + 1
        if not sol.ok:
            log.info("iter %d: subproblem %s, contracting", it, sol.status)
            return self._finish(it, sol, csol, float("nan"), float("nan"), float("nan"),
                                False, 1.0 / opts.alpha, None, None)
        self.solver_residuals.append((csol.status, csol.residuals))
        defects, failed = compute_defects(self.model, sol.x, sol.thrust, sol.s,
                                          rtol=opts.rtol, atol=opts.atol)
        J_new = nonlinear_cost(sol.thrust_bound, defects, opts.penalty)
        dJ = self.J_ref - J_new
        dL = self.J_ref - sol.objective
        rho = dJ / dL if dL != 0.0 else float("nan")
        accepted, factor = trust_update(rho, dL, opts)
        # the loop test reads the predicted decrease of the last accepted step
        self.converged = accepted and dL <= opts.eps_tol
        return self._finish(it, sol, csol, J_new, dJ, dL, accepted, factor, rho, defects)

    def _finish(self, it, sol, csol, J_new, dJ, dL, accepted, factor, rho, defects):
        J_before = self.J_ref
        if accepted:
            new_ref = ReferenceTrajectory(sol.x, sol.thrust, sol.thrust_bound, sol.z, sol.s)
            try:
                self._set_reference(new_ref, defects)
            except PropagationError as exc:
                log.warning("accepted candidate failed to discretize (%s); rejecting", exc)
                accepted = False
                factor = 1.0 / self.opts.alpha
                self.converged = False
        if accepted:
            self.consecutive_rejections = 0
        else:
            self.consecutive_rejections += 1
        self.r_x = self.r_x * factor
        self.r_s = self.r_s * factor
        max_def = float(np.max(defects)) if defects is not None else float("nan")
        rec = IterationRecord(
            iteration=it, L=float(sol.objective), J_before=float(J_before),
            J_after=float(J_new), dJ=float(dJ), dL=float(dL),
            rho=float(rho) if rho is not None else float("nan"), accepted=bool(accepted),
            r_x=self.r_x.copy(), r_s=float(self.r_s), max_defect=max_def,
            propellant_kg=self.propellant_kg(), solver_status=sol.status,
            solver_iterations=int(csol.iterations))
        self.history.append(rec)
        if self.sink is not None:
            self.sink(rec)
        log.info("iter %3d  L=%.6e  J=%.6e  dL=%.3e  rho=%.3f  %s  prop=%.4f kg",
                 it, rec.L, rec.J_after, rec.dL, rec.rho,
                 "acc" if accepted else "rej", rec.propellant_kg)
        return rec

    def run(self):
        t0 = time.perf_counter()
        message = "iteration budget exhausted"
        while len(self.history) < self.opts.max_iterations:
            self.step()
            if self.converged:
                message = "converged"
                break
            if self.consecutive_rejections > self.opts.max_rejections:
                message = (f"{self.consecutive_rejections} consecutive rejections "
                           f"(limit {self.opts.max_rejections})")
                break
        return RunResult(
            converged=self.converged, reference=self.ref,
            final_mass_kg=float(self.problem.mass_kg(self.ref.z[-1])),
            history=self.history, wall_time=time.perf_counter() - t0, message=message,
            final_defects=self.defects, solver_residuals=self.solver_residuals)


def run(problem, options, K, sink: Optional[Callable] = None, reference=None, backend=None):
    """Run SCVX to convergence or budget exhaustion; never raises on non-convergence."""
    return Scvx(problem, options, K, reference=reference, sink=sink, backend=backend).run()
