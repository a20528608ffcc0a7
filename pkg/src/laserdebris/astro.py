"""Keplerian orbital mechanics on a uniform mission time grid.

Element/state conversions, Kepler-equation solution, and first-order
secular J2 propagation. All positions are km in an Earth-centered
inertial frame, velocities km/s, angles radians. Every type is an
immutable value and every function is pure, so the module is safe for
concurrent use without synchronization.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import datetime

import numpy as np

TWO_PI = 2.0 * math.pi

# Eccentricities below this are treated as exactly circular: the anomaly
# field then holds the argument of latitude and argp is forced to zero.
CIRCULAR_ECC = 1e-8


class HyperbolicState(ValueError):
    """A Cartesian state maps to an orbit with eccentricity >= 1."""


class RectilinearState(ValueError):
    """A Cartesian state has (near-)zero angular momentum."""


@dataclass(frozen=True)
class AstroConstants:
    """Earth gravity model used throughout (km, s units)."""

    mu: float = 398600.4418       # km^3/s^2
    r_earth: float = 6378.137     # km
    j2: float = 1.08262668e-3


EARTH = AstroConstants()


def _norm_angle(x: float) -> float:
    """Normalize an angle to [0, 2*pi)."""
    x = math.fmod(x, TWO_PI)
    return x + TWO_PI if x < 0.0 else x


@dataclass(frozen=True)
class OrbitElements:
    """Osculating Keplerian elements.

    ``anomaly`` is the true anomaly, except for circular orbits
    (ecc < 1e-8) where it is interpreted as the argument of latitude
    and ``argp`` is forced to zero. Angles are normalized to [0, 2*pi)
    at construction.
    """

    sma: float            # semi-major axis, km
    ecc: float            # eccentricity, [0, 1)
    inc: float            # inclination, rad
    raan: float           # right ascension of ascending node, rad
    argp: float           # argument of periapsis, rad
    anomaly: float        # true anomaly (arg. of latitude when circular), rad

    def __post_init__(self):
        if not self.sma > 0.0:
            raise ValueError(f"sma must be positive, got {self.sma}")
        if not 0.0 <= self.ecc < 1.0:
            raise ValueError(f"ecc must be in [0, 1), got {self.ecc}")
        inc = _norm_angle(self.inc)
        if inc > math.pi + 1e-12:
            raise ValueError(f"inc must be in [0, pi], got {self.inc}")
        object.__setattr__(self, "inc", min(inc, math.pi))
        object.__setattr__(self, "raan", _norm_angle(self.raan))
        object.__setattr__(self, "anomaly", _norm_angle(self.anomaly))
        if self.ecc < CIRCULAR_ECC:
            # fold argp into the argument of latitude, then zero it
            object.__setattr__(
                self, "anomaly", _norm_angle(self.anomaly + self.argp)
            )
            object.__setattr__(self, "argp", 0.0)
        else:
            object.__setattr__(self, "argp", _norm_angle(self.argp))

    @property
    def periapsis_radius(self) -> float:
        """Closest-approach radius a*(1-e), km."""
        return self.sma * (1.0 - self.ecc)

    @property
    def apoapsis_radius(self) -> float:
        return self.sma * (1.0 + self.ecc)


@dataclass(frozen=True)
class StateVector:
    """Cartesian ECI state tagged with its time-grid step index."""

    r: np.ndarray          # km, shape (3,)
    v: np.ndarray          # km/s, shape (3,)
    epoch_step: int = 0

    def __post_init__(self):
        object.__setattr__(self, "r", np.asarray(self.r, dtype=float))
        object.__setattr__(self, "v", np.asarray(self.v, dtype=float))

    @property
    def radius(self) -> float:
        return float(np.linalg.norm(self.r))

    @property
    def speed(self) -> float:
        return float(np.linalg.norm(self.v))


@dataclass(frozen=True)
class TimeGrid:
    """Uniformly discretized mission horizon."""

    epoch: datetime
    step_size: float       # s
    steps: int             # number of steps T

    def __post_init__(self):
        if self.step_size <= 0.0:
            raise ValueError("step_size must be positive")
        if self.steps < 2:
            raise ValueError("grid needs at least 2 steps")

    def seconds_between(self, from_step: int, to_step: int) -> float:
        return (to_step - from_step) * self.step_size


def solve_kepler(mean_anomaly: float, ecc: float) -> float:
    """Solve Kepler's equation E - e*sin(E) = M for eccentric anomaly.

    Newton iteration from a standard starter, with a bisection fallback
    for the rare stalls at high eccentricity. Residual below 1e-12.
    """
    if not 0.0 <= ecc < 1.0:
        raise ValueError(f"ecc must be in [0, 1), got {ecc}")
    m = _norm_angle(mean_anomaly)
    if ecc == 0.0:
        return m
    # starter: M + e*sin(M) handles both low and moderate eccentricity
    e_anom = m + ecc * math.sin(m)
    for _ in range(50):
        f = e_anom - ecc * math.sin(e_anom) - m
        if abs(f) < 1e-13:
            return _norm_angle(e_anom)
        e_anom -= f / (1.0 - ecc * math.cos(e_anom))
    # Newton stalled; bisect on [0, 2*pi] where f is monotone increasing
    lo, hi = 0.0, TWO_PI
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid - ecc * math.sin(mid) - m > 0.0:
            hi = mid
        else:
            lo = mid
    return _norm_angle(0.5 * (lo + hi))


def true_to_mean_anomaly(nu: float, ecc: float) -> float:
    """True anomaly -> mean anomaly via the eccentric anomaly."""
    if ecc < CIRCULAR_ECC:
        return _norm_angle(nu)
    e_anom = 2.0 * math.atan2(
        math.sqrt(1.0 - ecc) * math.sin(0.5 * nu),
        math.sqrt(1.0 + ecc) * math.cos(0.5 * nu),
    )
    return _norm_angle(e_anom - ecc * math.sin(e_anom))


def mean_to_true_anomaly(m: float, ecc: float) -> float:
    """Mean anomaly -> true anomaly via Kepler's equation."""
    if ecc < CIRCULAR_ECC:
        return _norm_angle(m)
    e_anom = solve_kepler(m, ecc)
    nu = 2.0 * math.atan2(
        math.sqrt(1.0 + ecc) * math.sin(0.5 * e_anom),
        math.sqrt(1.0 - ecc) * math.cos(0.5 * e_anom),
    )
    return _norm_angle(nu)


def elements_to_state(
    el: OrbitElements,
    epoch_step: int = 0,
    constants: AstroConstants = EARTH,
) -> StateVector:
    """Convert Keplerian elements to an ECI Cartesian state."""
    mu = constants.mu
    nu = el.anomaly  # for circular orbits argp=0, so u works as nu
    p = el.sma * (1.0 - el.ecc**2)
    r_mag = p / (1.0 + el.ecc * math.cos(nu))

    cos_nu, sin_nu = math.cos(nu), math.sin(nu)
    r_pqw = np.array([r_mag * cos_nu, r_mag * sin_nu, 0.0])
    vf = math.sqrt(mu / p)
    v_pqw = np.array([-vf * sin_nu, vf * (el.ecc + cos_nu), 0.0])

    co, so = math.cos(el.raan), math.sin(el.raan)
    cw, sw = math.cos(el.argp), math.sin(el.argp)
    ci, si = math.cos(el.inc), math.sin(el.inc)
    rot = np.array([
        [co * cw - so * sw * ci, -co * sw - so * cw * ci, so * si],
        [so * cw + co * sw * ci, -so * sw + co * cw * ci, -co * si],
        [sw * si, cw * si, ci],
    ])
    return StateVector(rot @ r_pqw, rot @ v_pqw, epoch_step)


def state_to_elements(
    sv: StateVector, constants: AstroConstants = EARTH
) -> OrbitElements:
    """Recover osculating elements from a Cartesian state.

    Raises HyperbolicState when the state has non-negative specific
    energy (eccentricity >= 1) and RectilinearState when the angular
    momentum is degenerate (e.g. zero velocity).
    """
    mu = constants.mu
    r = np.asarray(sv.r, dtype=float)
    v = np.asarray(sv.v, dtype=float)
    r_mag = float(np.linalg.norm(r))
    if r_mag <= 0.0:
        raise RectilinearState("zero position vector")

    h_vec = np.cross(r, v)
    h_mag = float(np.linalg.norm(h_vec))
    if h_mag < 1e-9 * r_mag:
        raise RectilinearState("angular momentum is (near) zero")

    v_mag2 = float(v @ v)
    energy = 0.5 * v_mag2 - mu / r_mag
    if energy >= 0.0:
        raise HyperbolicState(f"non-elliptic state (energy={energy:.6g})")
    sma = -mu / (2.0 * energy)

    e_vec = (np.cross(v, h_vec) / mu) - r / r_mag
    ecc = float(np.linalg.norm(e_vec))
    if ecc >= 1.0:
        raise HyperbolicState(f"eccentricity {ecc} >= 1")

    inc = math.acos(max(-1.0, min(1.0, h_vec[2] / h_mag)))
    n_vec = np.cross([0.0, 0.0, 1.0], h_vec)  # node line
    n_mag = float(np.linalg.norm(n_vec))

    equatorial = n_mag < 1e-12 * h_mag
    if equatorial:
        raan = 0.0
        n_unit = np.array([1.0, 0.0, 0.0])
    else:
        n_unit = n_vec / n_mag
        raan = math.atan2(n_unit[1], n_unit[0])

    if ecc < CIRCULAR_ECC:
        # circular: latitude argument measured from the node line
        cos_u = max(-1.0, min(1.0, float(n_unit @ r) / r_mag))
        u = math.acos(cos_u)
        if not equatorial and r[2] < 0.0:
            u = TWO_PI - u
        if equatorial and float(np.cross(n_unit, r / r_mag) @ (h_vec / h_mag)) < 0.0:
            u = TWO_PI - u
        return OrbitElements(sma, ecc, inc, raan, 0.0, u)

    e_unit = e_vec / ecc
    cos_w = max(-1.0, min(1.0, float(n_unit @ e_unit)))
    argp = math.acos(cos_w)
    if not equatorial and e_vec[2] < 0.0:
        argp = TWO_PI - argp
    if equatorial and float(np.cross(n_unit, e_unit) @ (h_vec / h_mag)) < 0.0:
        argp = TWO_PI - argp

    cos_nu = max(-1.0, min(1.0, float(e_unit @ r) / r_mag))
    nu = math.acos(cos_nu)
    if float(r @ v) < 0.0:
        nu = TWO_PI - nu
    return OrbitElements(sma, ecc, inc, raan, argp, nu)


def j2_secular_rates(
    el: OrbitElements, constants: AstroConstants = EARTH
) -> tuple[float, float, float]:
    """First-order secular J2 rates (raan_dot, argp_dot, mean_anomaly_dot).

    raan_dot = -(3/2) J2 n (Re/p)^2 cos(i)
    argp_dot =  (3/4) J2 n (Re/p)^2 (5 cos^2(i) - 1)
    M_dot    =  n + (3/4) J2 n (Re/p)^2 sqrt(1-e^2) (3 cos^2(i) - 1)

    All in rad/s.
    """
    n = math.sqrt(constants.mu / el.sma**3)
    p = el.sma * (1.0 - el.ecc**2)
    k = constants.j2 * (constants.r_earth / p) ** 2 * n
    cos_i = math.cos(el.inc)
    raan_dot = -1.5 * k * cos_i
    argp_dot = 0.75 * k * (5.0 * cos_i**2 - 1.0)
    m_dot = n + 0.75 * k * math.sqrt(1.0 - el.ecc**2) * (3.0 * cos_i**2 - 1.0)
    return raan_dot, argp_dot, m_dot


def propagate_j2(
    el: OrbitElements,
    grid: TimeGrid,
    from_step: int,
    to_step: int,
    constants: AstroConstants = EARTH,
) -> OrbitElements:
    """Propagate elements between grid steps under secular J2.

    Only raan, argp and the anomaly advance; sma, ecc, inc are
    unchanged (secular model, no short-periodic terms). Propagation
    composes exactly across intermediate steps.
    """
    if to_step < from_step:
        raise ValueError("to_step must be >= from_step")
    dt = grid.seconds_between(from_step, to_step)
    if dt == 0.0:
        return el
    raan_dot, argp_dot, m_dot = j2_secular_rates(el, constants)
    m0 = true_to_mean_anomaly(el.anomaly, el.ecc)
    if el.ecc < CIRCULAR_ECC:
        # argp is pinned to 0; its secular drift folds into the
        # argument of latitude so the in-plane angle stays consistent
        u = _norm_angle(m0 + (m_dot + argp_dot) * dt)
        return OrbitElements(
            el.sma, el.ecc, el.inc, _norm_angle(el.raan + raan_dot * dt), 0.0, u
        )
    m1 = _norm_angle(m0 + m_dot * dt)
    return OrbitElements(
        el.sma,
        el.ecc,
        el.inc,
        _norm_angle(el.raan + raan_dot * dt),
        _norm_angle(el.argp + argp_dot * dt),
        mean_to_true_anomaly(m1, el.ecc),
    )


def specific_energy(sv: StateVector, constants: AstroConstants = EARTH) -> float:
    """v^2/2 - mu/r, km^2/s^2."""
    return 0.5 * sv.speed**2 - constants.mu / sv.radius
