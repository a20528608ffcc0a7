"""Remediation reward terms and conjunction screening.

The per-engagement reward is the weighted sum of four terms: a
conjunction incentive for engaging threatening debris inside a user
window, a look-ahead penalty for relocations that would themselves
buzz a protected asset, a periapsis-lowering incentive capped at one,
and a normalized mass term. The placement-phase reward keeps only the
incentive and mass terms.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import astro
from .access import CandidateSlot
from .ablation import DebrisBody
from .astro import EARTH, AstroConstants, OrbitElements, TimeGrid


class WindowAfterTca(ValueError):
    """Engagement window closes after the first conjunction step."""


@dataclass(frozen=True)
class RewardConfig:
    """Weights, thresholds, and the conjunction-engagement window.

    ``h_star`` is a periapsis RADIUS (km from the Earth's center); a
    100 km decay altitude corresponds to r_earth + 100. The defaults
    keep the placement-phase incentive two orders above the scheduling
    one so a threatened debris dominates slot selection.
    """

    alpha: float = 1.0
    beta: float = 1.0
    g0: float = 1e4                   # conjunction incentive
    g0_placement: float = 1e6         # incentive used by the placement reward
    g: float = 1e6                    # look-ahead penalty magnitude
    g_h: float = 1e6                  # periapsis-increase penalty
    h_star: float = EARTH.r_earth + 100.0   # km, radius
    tau_lookahead: int = 3            # steps
    t_min: int = 0
    t_max: int = 0
    m_max: float = 1.0                # kg, largest debris mass in the field

    def __post_init__(self):
        if self.g0 <= 0 or self.g0_placement <= 0 or self.g <= 0 or self.g_h <= 0:
            raise ValueError("g0, g0_placement, g, g_h must be positive")
        if self.t_min > self.t_max:
            raise ValueError("t_min must not exceed t_max")
        if self.tau_lookahead < 0:
            raise ValueError("tau_lookahead must be non-negative")
        if self.m_max <= 0:
            raise ValueError("m_max must be positive")


@dataclass(frozen=True)
class ValuableAsset:
    """An operational spacecraft protected by a conjunction sphere."""

    id: str
    elements: OrbitElements
    sphere_radius: float = 10.0   # km

    def __post_init__(self):
        if self.sphere_radius <= 0:
            raise ValueError("sphere_radius must be positive")


@dataclass(frozen=True)
class ConjunctionReport:
    """Closest grid-sampled approach between one debris and one asset."""

    debris_id: str
    asset_id: str
    tca_step: int
    miss_distance: float          # km
    sphere_radius: float          # km
    window_used: tuple[int, int] | None = None

    @property
    def is_conjunction(self) -> bool:
        return self.miss_distance < self.sphere_radius


def positions_over_grid(
    elements: Sequence[OrbitElements],
    grid: TimeGrid,
    constants: AstroConstants = EARTH,
) -> np.ndarray:
    """J2-propagated positions, shape (T, N, 3) km, for fixed orbits."""
    out = np.zeros((grid.steps, len(elements), 3))
    for n, el in enumerate(elements):
        for t in range(grid.steps):
            sv = astro.elements_to_state(astro.propagate_j2(el, grid, 0, t, constants), t, constants)
            out[t, n] = sv.r
    return out


def screen_conjunctions(
    debris_elements: dict[str, OrbitElements],
    assets: Sequence[ValuableAsset],
    grid: TimeGrid,
    constants: AstroConstants = EARTH,
) -> list[ConjunctionReport]:
    """Closest approach of every (debris, asset) pair over the grid.

    Both populations fly their unengaged orbits. A report is emitted
    for every pair; ``is_conjunction`` flags those whose minimum
    distance dips below the asset's protection sphere.
    """
    if not debris_elements or not assets:
        return []
    debris_ids = list(debris_elements.keys())
    d_pos = positions_over_grid([debris_elements[i] for i in debris_ids], grid, constants)
    a_pos = positions_over_grid([a.elements for a in assets], grid, constants)
    reports = []
    for di, debris_id in enumerate(debris_ids):
        for ai, asset in enumerate(assets):
            dist = np.linalg.norm(d_pos[:, di, :] - a_pos[:, ai, :], axis=1)
            tca = int(np.argmin(dist))
            reports.append(
                ConjunctionReport(
                    debris_id=debris_id,
                    asset_id=asset.id,
                    tca_step=tca,
                    miss_distance=float(dist[tca]),
                    sphere_radius=asset.sphere_radius,
                )
            )
    return reports


def first_conjunction_step(reports: Sequence[ConjunctionReport], debris_id: str) -> int | None:
    """Earliest step at which `debris_id` enters any protection sphere."""
    steps = [r.tca_step for r in reports if r.debris_id == debris_id and r.is_conjunction]
    return min(steps) if steps else None


def c0_term(
    debris_id: str,
    step: int,
    reports: Sequence[ConjunctionReport],
    cfg: RewardConfig,
    placement: bool = False,
) -> float:
    """Conjunction incentive: the configured constant while the step is
    inside [t_min, t_max] and the debris is on a conjunction course.

    The window must close no later than the debris's first conjunction;
    a later t_max raises WindowAfterTca because an engagement then
    could not avert the approach it is rewarded for.
    """
    tc = first_conjunction_step(reports, debris_id)
    if tc is None:
        return 0.0
    if cfg.t_max > tc:
        raise WindowAfterTca(
            f"window end {cfg.t_max} is after first conjunction step {tc} "
            f"of debris {debris_id}"
        )
    if cfg.t_min <= step <= cfg.t_max:
        return cfg.g0_placement if placement else cfg.g0
    return 0.0


def lookahead_penalty(
    candidate: CandidateSlot,
    asset_positions: np.ndarray,
    assets: Sequence[ValuableAsset],
    cfg: RewardConfig,
    grid: TimeGrid,
    constants: AstroConstants = EARTH,
) -> float:
    """-G if the relocated debris enters any protection sphere within
    the look-ahead horizon, else 0.

    The candidate orbit is coasted WITHOUT J2 over steps
    t+1 .. t+1+tau (clipped to the grid); asset positions come from the
    precomputed (T, K, 3) table. No-engagement slots never pay it.
    """
    if candidate.is_no_engagement or len(assets) == 0:
        return 0.0
    t0 = candidate.step
    first = t0 + 1
    last = min(t0 + 1 + cfg.tau_lookahead, grid.steps - 1)
    if first > last:
        return 0.0
    try:
        el = astro.state_to_elements(candidate.resulting_state, constants)
    except (astro.HyperbolicState, astro.RectilinearState):
        return 0.0  # ejected; it will not linger near any asset
    kepler = AstroConstants(constants.mu, constants.r_earth, 0.0)
    for t in range(first, last + 1):
        sv = astro.elements_to_state(
            astro.propagate_j2(el, grid, t0, t, kepler), t, kepler
        )
        for ai, asset in enumerate(assets):
            if np.linalg.norm(sv.r - asset_positions[t, ai]) < asset.sphere_radius:
                return -cfg.g
    return 0.0


def delta_h_term(h_before: float, h_after: float, cfg: RewardConfig) -> float:
    """Periapsis-change incentive, capped at one.

    gamma is 1 when the engagement does not raise the periapsis radius
    and -G_h when it does; the returned value is
    min(gamma * (h_star / h_after)^3, 1).
    """
    if h_before <= 0.0 or h_after <= 0.0:
        raise ValueError("periapsis radii must be positive")
    gamma = -cfg.g_h if h_after > h_before else 1.0
    return min(gamma * (cfg.h_star / h_after) ** 3, 1.0)


def mass_term(debris: DebrisBody, engaged: bool, cfg: RewardConfig) -> float:
    """Normalized mass reward m/m_max for an engaged debris.

    Debris modeled only by surface density (uniform small-debris
    fields) score the full unit term, matching a field where every
    object shares the maximum mass.
    """
    if not engaged:
        return 0.0
    if debris.mass is None:
        return 1.0
    return debris.mass / cfg.m_max


@dataclass(frozen=True)
class RewardContext:
    """Everything the reward terms need besides the candidate itself."""

    cfg: RewardConfig
    grid: TimeGrid
    reports: Sequence[ConjunctionReport]
    assets: Sequence[ValuableAsset]
    asset_positions: np.ndarray       # (T, K, 3) km
    debris: dict[str, DebrisBody]
    constants: AstroConstants = EARTH


def full_reward(
    candidate: CandidateSlot,
    h_before: float,
    ctx: RewardContext,
) -> float:
    """Scheduling-phase reward C0 + C + alpha*dh + beta*M of a slot.

    The no-engagement slot is exactly zero by construction.
    """
    if candidate.is_no_engagement:
        return 0.0
    cfg = ctx.cfg
    body = ctx.debris[candidate.debris_id]
    c0 = c0_term(candidate.debris_id, candidate.step, ctx.reports, cfg)
    c = lookahead_penalty(
        candidate, ctx.asset_positions, ctx.assets, cfg, ctx.grid, ctx.constants
    )
    dh = delta_h_term(h_before, candidate.resulting_periapsis, cfg)
    m = mass_term(body, True, cfg)
    return c0 + c + cfg.alpha * dh + cfg.beta * m


def mclp_reward(
    debris_id: str,
    step: int,
    reports: Sequence[ConjunctionReport],
    debris: DebrisBody,
    cfg: RewardConfig,
) -> float:
    """Placement-phase reward: conjunction incentive plus mass term."""
    return c0_term(debris_id, step, reports, cfg, placement=True) + mass_term(
        debris, True, cfg
    )


def write_conjunction_csv(reports: Sequence[ConjunctionReport], path) -> None:
    """Export screening results (one row per debris/asset pair)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["debris_id", "asset_id", "tca_step", "miss_km"])
        for r in reports:
            writer.writerow([r.debris_id, r.asset_id, r.tca_step, f"{r.miss_distance:.6f}"])
