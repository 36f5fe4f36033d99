"""Canonical units used to normalize the problem data."""

from dataclasses import dataclass

G0_DEFAULT = 9.80665  # m/s^2
SECONDS_PER_DAY = 86400.0


@dataclass(frozen=True)
class ScalingSet:
    """Length/time/mass units plus the normalized model constants.

    Attributes:
        length_km: length unit LU in km.
        time_s: time unit TU in s.
        mass_kg: mass unit MU in kg.
        mu: normalized gravitational parameter (CR3BP mass ratio, or
            GM * TU^2 / LU^3 for the two-body model).
        exhaust_velocity: effective exhaust velocity Isp*g0 in LU/TU.
    """

    length_km: float
    time_s: float
    mass_kg: float
    mu: float
    exhaust_velocity: float

    def __post_init__(self):
        for name in ("length_km", "time_s", "mass_kg", "mu", "exhaust_velocity"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"ScalingSet.{name} must be positive")

    @property
    def velocity_kms(self):
        return self.length_km / self.time_s

    @property
    def accel_kms2(self):
        return self.length_km / self.time_s**2

    @property
    def force_n(self):
        """Force unit MU*LU/TU^2 in newtons."""
        return self.mass_kg * self.length_km * 1e3 / self.time_s**2

    @classmethod
    def build(cls, length_km, time_s, mass_kg, mu, isp_s, g0=G0_DEFAULT):
        """Build from dimensional data; ``mu`` is taken as already normalized."""
        c = isp_s * g0 / 1e3 / (length_km / time_s)
        return cls(length_km, time_s, mass_kg, mu, c)

    def thrust_to_norm(self, newtons):
        return newtons / self.force_n

    def thrust_to_newtons(self, value):
        return value * self.force_n

    def seconds_to_norm(self, seconds):
        return seconds / self.time_s

    def days_to_norm(self, days):
        return days * SECONDS_PER_DAY / self.time_s
