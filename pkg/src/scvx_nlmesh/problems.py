"""Problem definitions and the two bundled benchmark transfers."""

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import cartesian_to_mee, get_model
from .subproblem import SubproblemParams
from .units import G0_DEFAULT, ScalingSet

TWO_PI = 2.0 * math.pi


@dataclass
class ProblemDef:
    """A fixed-time minimum-fuel rendezvous in normalized units.

    ``x0``/``xf`` are in the model's own coordinates (for MEE the final true
    longitude already includes the extra revolutions). ``tmax_newtons`` and
    ``m0_kg`` stay dimensional; normalized values are derived properties.
    """

    model: str
    units: ScalingSet
    x0: np.ndarray
    xf: np.ndarray
    m0_kg: float
    tmax_newtons: float
    tof_days: float
    n_rev: int = 0
    name: str = ""

    def __post_init__(self):
        self.x0 = np.asarray(self.x0, dtype=float).reshape(6)
        self.xf = np.asarray(self.xf, dtype=float).reshape(6)
        if self.m0_kg <= 0 or self.tmax_newtons <= 0 or self.tof_days <= 0:
            raise ValueError("mass, thrust and time of flight must be positive")

    @property
    def tmax(self):
        return self.units.thrust_to_norm(self.tmax_newtons)

    @property
    def tof(self):
        return self.units.days_to_norm(self.tof_days)

    @property
    def z0(self):
        return math.log(self.m0_kg / self.units.mass_kg)

    @property
    def exhaust_velocity(self):
        return self.units.exhaust_velocity

    def make_model(self, backend=None):
        return get_model(self.model, self.units.mu, backend=backend)

    def subproblem_params(self, penalty):
        return SubproblemParams(self.x0.copy(), self.xf.copy(), self.z0, self.tof, self.tmax,
                                self.exhaust_velocity, float(penalty))

    def mass_kg(self, z):
        return self.units.mass_kg * np.exp(z)


def cr3bp_problem(mu, length_km, time_s, m0_kg, isp_s, tmax_newtons, tof_days,
                  r0, v0, rf, vf, g0=G0_DEFAULT, name="cr3bp"):
    """CR3BP transfer; boundary states are already in normalized rotating-frame units."""
    units = ScalingSet.build(length_km, time_s, m0_kg, mu, isp_s, g0)
    x0 = np.concatenate([r0, v0])
    xf = np.concatenate([rf, vf])
    return ProblemDef("cr3bp", units, x0, xf, m0_kg, tmax_newtons, tof_days, 0, name)


def mee_problem(mu_km3s2, length_km, time_s, m0_kg, isp_s, tmax_newtons, tof_days,
                r0_km, v0_kms, rf_km, vf_kms, n_rev, g0=G0_DEFAULT, name="mee"):
    """Heliocentric two-body transfer; Cartesian boundary data are converted to MEE.

    The final true longitude is unwrapped to lie in ``[L0, L0 + 2 pi)`` and then
    advanced by ``n_rev`` full revolutions.
    """
    mu = mu_km3s2 * time_s**2 / length_km**3
    units = ScalingSet.build(length_km, time_s, m0_kg, mu, isp_s, g0)
    vu = length_km / time_s
    rv0 = np.concatenate([np.asarray(r0_km) / length_km, np.asarray(v0_kms) / vu])
    rvf = np.concatenate([np.asarray(rf_km) / length_km, np.asarray(vf_kms) / vu])
    x0 = cartesian_to_mee(rv0, mu)[0]
    xf = cartesian_to_mee(rvf, mu)[0]
    xf[5] = x0[5] + (xf[5] - x0[5]) % TWO_PI + TWO_PI * int(n_rev)
    return ProblemDef("mee", units, x0, xf, m0_kg, tmax_newtons, tof_days, int(n_rev), name)
