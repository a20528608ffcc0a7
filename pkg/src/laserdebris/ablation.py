"""Pulsed-laser ablation physics and delta-v vector composition.

A laser pulse delivers fluence on the target; momentum coupling turns
that energy into an impulse along the platform-to-target line. An
engagement fires `engage_duration * prf` pulses; simultaneous
engagements from several platforms compose as a plain vector sum, and
the summed impulse is applied instantaneously (position unchanged).

Units: ranges km, fluence J/m^2, delta-v m/s. The momentum coupling
coefficient is quoted in N/MW and converted to N*s/J internally.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .astro import StateVector

N_PER_MW_TO_NS_PER_J = 1e-6

# An engagement closer than this is geometrically degenerate.
MIN_BASELINE_KM = 1e-3


class RangeViolation(ValueError):
    """Requested range lies outside the laser's operational bounds."""


class UnresolvableBody(ValueError):
    """Debris carries neither a surface density nor a mass."""


class ZeroBaseline(ValueError):
    """Platform and debris (nearly) coincide; beam direction undefined."""


@dataclass(frozen=True)
class ConstantFluence:
    """Pulse energy is adjusted in flight to hold fluence on target."""

    phi_opt: float  # J/m^2


@dataclass(frozen=True)
class ConstantEnergy:
    """Fixed pulse energy; delivered fluence falls off as 1/u^2."""

    pulse_energy: float  # J


FluenceMode = Union[ConstantFluence, ConstantEnergy]


@dataclass(frozen=True)
class LaserSpec:
    """Laser platform parameters for one mission scenario."""

    d_eff: float                 # effective beam/mirror diameter, m
    t_tot: float                 # total system loss factor
    b_sq: float                  # beam quality factor B^2
    zeta: float                  # diffraction constant
    wavelength: float            # m
    c_m: float                   # momentum coupling, N/MW
    eta: float                   # impulse transfer efficiency, (0, 1]
    prf: float                   # pulse repetition frequency, Hz
    engage_duration: float       # s of lasing per engagement
    cool_duration: float         # s of cooling after an engagement
    u_min: float                 # km
    u_max: float                 # km
    fluence_mode: FluenceMode

    def __post_init__(self):
        for name in ("d_eff", "t_tot", "b_sq", "zeta", "wavelength", "c_m",
                     "prf", "engage_duration", "u_min", "u_max"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive")
        if not 0.0 < self.eta <= 1.0:
            raise ValueError(f"eta must be in (0, 1], got {self.eta}")
        if self.cool_duration < 0.0:
            raise ValueError("cool_duration must be non-negative")
        if self.u_min >= self.u_max:
            raise ValueError("u_min must be below u_max")

    @property
    def pulses_per_engagement(self) -> int:
        return int(round(self.engage_duration * self.prf))

    @property
    def c_m_si(self) -> float:
        """Momentum coupling in N*s/J."""
        return self.c_m * N_PER_MW_TO_NS_PER_J


@dataclass(frozen=True)
class DebrisBody:
    """A debris object with at least one resolvable mass model.

    Surface-density mode divides fluence by area density directly;
    mass mode uses the pulse energy intercepted by the cross-section.
    """

    id: str
    elements: object = None            # OrbitElements at epoch
    mass: float | None = None          # kg
    surface_density: float | None = None  # kg/m^2
    cross_section: float = 1.0         # m^2, mass mode only

    def __post_init__(self):
        has_mass = self.mass is not None and self.mass > 0.0
        has_rho = self.surface_density is not None and self.surface_density > 0.0
        if not (has_mass or has_rho):
            raise ValueError(f"debris {self.id}: need mass or surface_density")
        if self.cross_section <= 0.0:
            raise ValueError("cross_section must be positive")


@dataclass(frozen=True)
class DeltaV:
    """An impulsive velocity change in m/s with cached magnitude."""

    vec: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "vec", np.asarray(self.vec, dtype=float))

    @property
    def magnitude(self) -> float:
        return float(np.linalg.norm(self.vec))

    @staticmethod
    def zero() -> "DeltaV":
        return DeltaV(np.zeros(3))


def fluence(spec: LaserSpec, range_u: float) -> float:
    """On-target delivered fluence (J/m^2) at range `range_u` km.

    Constant-fluence platforms hold their optimal fluence across the
    operational window; constant-energy platforms deliver
    4*E*D_eff^2*T_tot / (pi * B^4 * zeta^2 * lambda^2 * u^2).
    """
    if not spec.u_min <= range_u <= spec.u_max:
        raise RangeViolation(
            f"range {range_u} km outside [{spec.u_min}, {spec.u_max}] km"
        )
    mode = spec.fluence_mode
    if isinstance(mode, ConstantFluence):
        return mode.phi_opt
    u_m = range_u * 1000.0
    b4 = spec.b_sq**2
    return (4.0 * mode.pulse_energy * spec.d_eff**2 * spec.t_tot) / (
        math.pi * b4 * spec.zeta**2 * spec.wavelength**2 * u_m**2
    )


def per_pulse_dv(spec: LaserSpec, debris: DebrisBody, range_u: float) -> float:
    """Magnitude of the per-pulse delta-v on `debris` at range `range_u`.

    Surface-density mode: eta * c_m * phi / rho.
    Mass mode: eta * c_m * phi * A / m (impulse = c_m * intercepted energy).
    """
    phi = fluence(spec, range_u)
    if debris.surface_density is not None and debris.surface_density > 0.0:
        return spec.eta * spec.c_m_si * phi / debris.surface_density
    if debris.mass is not None and debris.mass > 0.0:
        return spec.eta * spec.c_m_si * phi * debris.cross_section / debris.mass
    raise UnresolvableBody(f"debris {debris.id} has no usable mass model")


def engagement_dv(
    spec: LaserSpec,
    debris: DebrisBody,
    platform_state: StateVector,
    debris_state: StateVector,
) -> DeltaV:
    """Delta-v vector for one full engagement window.

    The beam pushes the debris away from the platform: the vector points
    along (r_debris - r_platform) with magnitude `pulses * per_pulse_dv`.
    Line-of-sight and range feasibility are the caller's business; only
    the range bound is rechecked through `fluence`.
    """
    baseline = np.asarray(debris_state.r, dtype=float) - np.asarray(
        platform_state.r, dtype=float
    )
    dist = float(np.linalg.norm(baseline))
    if dist < MIN_BASELINE_KM:
        raise ZeroBaseline(f"separation {dist} km below {MIN_BASELINE_KM} km")
    pulse_dv = per_pulse_dv(spec, debris, dist)
    return DeltaV(baseline / dist * (spec.pulses_per_engagement * pulse_dv))


def compose_dva(contributions: list[DeltaV]) -> DeltaV:
    """Vector-sum simultaneous per-platform delta-v contributions."""
    if not contributions:
        return DeltaV.zero()
    total = np.zeros(3)
    for dv in contributions:
        total += dv.vec
    return DeltaV(total)


def apply_engagement(debris_state: StateVector, dv: DeltaV) -> StateVector:
    """Apply an impulsive delta-v: velocity jumps, position is fixed."""
    return StateVector(
        np.asarray(debris_state.r, dtype=float).copy(),
        np.asarray(debris_state.v, dtype=float) + dv.vec / 1000.0,
        debris_state.epoch_step,
    )
