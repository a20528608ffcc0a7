"""Engagement feasibility: line-of-sight, range gating, and slot trees.

Feasibility between a platform orbital slot and a debris object at a
time step needs two things: an unobstructed line of sight past the
Earth (plus a configurable bias shell) and a separation inside the
laser's operational range window. The results live in bit-packed
boolean tensors indexed (t, s, d); the W-prime variant additionally
requires that a solo engagement from the slot would not raise the
debris periapsis.
"""
from __future__ import annotations

import itertools
import math
import struct
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import ablation, astro
from .ablation import DebrisBody, DeltaV, LaserSpec
from .astro import EARTH, AstroConstants, StateVector


class BelowShell(ValueError):
    """An endpoint sits inside the occlusion shell R_earth + epsilon."""


class CacheFormatError(ValueError):
    """Feasibility cache file is malformed or has the wrong version."""


@dataclass(frozen=True)
class AccessParams:
    """Geometry parameters of the visibility test."""

    epsilon: float = 0.0          # occlusion shell bias above R_earth, km
    u_min: float = 0.0            # km, mirrors the laser range window
    u_max: float = math.inf       # km

    def __post_init__(self):
        if self.epsilon < 0.0:
            raise ValueError("epsilon must be non-negative")

    @staticmethod
    def from_laser(spec: LaserSpec, epsilon: float = 0.0) -> "AccessParams":
        return AccessParams(epsilon=epsilon, u_min=spec.u_min, u_max=spec.u_max)


def los_indicator(
    r_s: float,
    r_d: float,
    u_sd: float,
    params: AccessParams,
    constants: AstroConstants = EARTH,
) -> float:
    """Line-of-sight indicator q for two orbital radii and their range.

    q = sqrt(r_s^2 - (Re+eps)^2) + sqrt(r_d^2 - (Re+eps)^2) - u_sd.
    The sight line clears the shell iff q > 0; q = 0 is tangential and
    counts as blocked. Raises BelowShell when an endpoint is inside the
    shell (LOS is then defined false).
    """
    shell = constants.r_earth + params.epsilon
    if r_s <= shell or r_d <= shell:
        raise BelowShell(f"radius below occlusion shell {shell} km")
    return (
        math.sqrt(r_s**2 - shell**2)
        + math.sqrt(r_d**2 - shell**2)
        - u_sd
    )


def pair_feasible(
    r_s_vec: np.ndarray,
    r_d_vec: np.ndarray,
    params: AccessParams,
    constants: AstroConstants = EARTH,
) -> bool:
    """Scalar feasibility check for one platform/debris position pair."""
    r_s = float(np.linalg.norm(r_s_vec))
    r_d = float(np.linalg.norm(r_d_vec))
    u = float(np.linalg.norm(np.asarray(r_d_vec) - np.asarray(r_s_vec)))
    if not params.u_min <= u <= params.u_max:
        return False
    try:
        q = los_indicator(r_s, r_d, u, params, constants)
    except BelowShell:
        return False
    return q > 0.0


_CACHE_MAGIC = b"LDWT"
_CACHE_VERSION = 1
_VARIANTS = ("W", "Wprime")


@dataclass
class FeasibilityTensor:
    """Bit-packed boolean tensor over (time step, slot, debris)."""

    dims: tuple[int, int, int]
    bits: np.ndarray = field(repr=False)     # packed uint8, C-order flat
    variant: str = "W"

    def __post_init__(self):
        if self.variant not in _VARIANTS:
            raise ValueError(f"variant must be one of {_VARIANTS}")

    @staticmethod
    def from_dense(dense: np.ndarray, variant: str = "W") -> "FeasibilityTensor":
        dense = np.asarray(dense, dtype=bool)
        if dense.ndim != 3:
            raise ValueError("expected a (T, S, D) array")
        return FeasibilityTensor(dense.shape, np.packbits(dense.ravel()), variant)

    def to_dense(self) -> np.ndarray:
        t, s, d = self.dims
        flat = np.unpackbits(self.bits, count=t * s * d).astype(bool)
        return flat.reshape(self.dims)

    def __getitem__(self, tsd: tuple[int, int, int]) -> bool:
        t, s, d = tsd
        nt, ns, nd = self.dims
        if not (0 <= t < nt and 0 <= s < ns and 0 <= d < nd):
            raise IndexError(tsd)
        flat = (t * ns + s) * nd + d
        return bool((self.bits[flat >> 3] >> (7 - (flat & 7))) & 1)

    def count(self) -> int:
        t, s, d = self.dims
        return int(np.unpackbits(self.bits, count=t * s * d).sum())

    def is_subset_of(self, other: "FeasibilityTensor") -> bool:
        """True if self = 1 implies other = 1 elementwise."""
        if self.dims != other.dims:
            return False
        return not np.any(self.bits & ~other.bits)

    def save(self, path) -> None:
        """Write the versioned cache: header (magic, version, variant,
        dims) followed by the bit-packed payload."""
        header = struct.pack(
            "<4sHBIII",
            _CACHE_MAGIC,
            _CACHE_VERSION,
            _VARIANTS.index(self.variant),
            *self.dims,
        )
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(self.bits.tobytes())

    @staticmethod
    def load(path) -> "FeasibilityTensor":
        with open(path, "rb") as fh:
            header = fh.read(struct.calcsize("<4sHBIII"))
            if len(header) != struct.calcsize("<4sHBIII"):
                raise CacheFormatError("truncated header")
            magic, version, variant_idx, t, s, d = struct.unpack("<4sHBIII", header)
            if magic != _CACHE_MAGIC:
                raise CacheFormatError("bad magic")
            if version != _CACHE_VERSION:
                raise CacheFormatError(f"unsupported version {version}")
            if variant_idx >= len(_VARIANTS):
                raise CacheFormatError(f"unknown variant {variant_idx}")
            payload = np.frombuffer(fh.read(), dtype=np.uint8)
        expected = (t * s * d + 7) // 8
        if payload.size != expected:
            raise CacheFormatError("payload size mismatch")
        return FeasibilityTensor((t, s, d), payload.copy(), _VARIANTS[variant_idx])


def build_w(
    platform_pos: np.ndarray,
    debris_pos: np.ndarray,
    params: AccessParams,
    constants: AstroConstants = EARTH,
) -> FeasibilityTensor:
    """Build W over position histories (T, S, 3) and (T, D, 3) km.

    W[t, s, d] = 1 iff the sight line clears the occlusion shell
    (q > 0) and the range lies inside [u_min, u_max], bounds inclusive.
    Time slabs are independent, so the loop is trivially parallel; here
    it is vectorized per step instead.
    """
    platform_pos = np.asarray(platform_pos, dtype=float)
    debris_pos = np.asarray(debris_pos, dtype=float)
    t_steps, n_slots = platform_pos.shape[0], platform_pos.shape[1]
    n_debris = debris_pos.shape[1]
    if debris_pos.shape[0] != t_steps:
        raise ValueError("platform and debris histories disagree on T")

    shell = constants.r_earth + params.epsilon
    dense = np.zeros((t_steps, n_slots, n_debris), dtype=bool)
    for t in range(t_steps):
        ps = platform_pos[t]                      # (S, 3)
        ds = debris_pos[t]                        # (D, 3)
        r_s = np.linalg.norm(ps, axis=1)          # (S,)
        r_d = np.linalg.norm(ds, axis=1)          # (D,)
        diff = ds[None, :, :] - ps[:, None, :]    # (S, D, 3)
        u = np.linalg.norm(diff, axis=2)          # (S, D)
        above = (r_s[:, None] > shell) & (r_d[None, :] > shell)
        hs = np.sqrt(np.maximum(r_s**2 - shell**2, 0.0))
        hd = np.sqrt(np.maximum(r_d**2 - shell**2, 0.0))
        q = hs[:, None] + hd[None, :] - u
        in_range = (u >= params.u_min) & (u <= params.u_max)
        dense[t] = above & (q > 0.0) & in_range
    return FeasibilityTensor.from_dense(dense, "W")


def build_w_prime(
    w: FeasibilityTensor,
    platform_pos: np.ndarray,
    debris_states: Sequence[Sequence[StateVector]],
    debris: Sequence[DebrisBody],
    spec: LaserSpec,
    constants: AstroConstants = EARTH,
) -> FeasibilityTensor:
    """Filter W down to slots whose solo engagement lowers periapsis.

    ``debris_states[t][d]`` is the unengaged debris state at step t.
    W'[t, s, d] = 1 iff W = 1 and an engagement by slot s alone leaves
    the debris periapsis radius at or below its current value.
    """
    dense = w.to_dense().copy()
    t_steps, n_slots, n_debris = dense.shape
    for t in range(t_steps):
        for d in range(n_debris):
            if not dense[t, :, d].any():
                continue
            state = debris_states[t][d]
            h_before = astro.state_to_elements(state, constants).periapsis_radius
            for s in range(n_slots):
                if not dense[t, s, d]:
                    continue
                dv = ablation.engagement_dv(
                    spec,
                    debris[d],
                    StateVector(platform_pos[t, s], np.zeros(3), t),
                    state,
                )
                after = ablation.apply_engagement(state, dv)
                try:
                    h_after = astro.state_to_elements(after, constants).periapsis_radius
                except astro.HyperbolicState:
                    dense[t, s, d] = False
                    continue
                if h_after > h_before:
                    dense[t, s, d] = False
    return FeasibilityTensor.from_dense(dense, "Wprime")


@dataclass(frozen=True)
class CandidateSlot:
    """A reachable post-engagement orbit for one debris at one step.

    The no-engagement slot has an empty engager set, the unchanged
    state, and (by construction downstream) zero reward.
    """

    debris_id: str
    step: int
    engagers: frozenset
    resulting_state: StateVector
    resulting_periapsis: float
    dv: DeltaV

    @property
    def is_no_engagement(self) -> bool:
        return len(self.engagers) == 0


def enumerate_engager_subsets(
    feasible_engagers: Iterable, cap: int | None
) -> list[tuple]:
    """Non-empty subsets of the engager set, size-capped, in a stable
    (size, lexicographic) order."""
    engagers = sorted(feasible_engagers)
    limit = len(engagers) if cap is None else min(cap, len(engagers))
    subsets: list[tuple] = []
    for k in range(1, limit + 1):
        subsets.extend(itertools.combinations(engagers, k))
    return subsets


def enumerate_candidate_slots(
    debris_obj: DebrisBody,
    debris_state: StateVector,
    step: int,
    feasible_engagers: dict,
    spec: LaserSpec,
    cap: int | None = None,
    constants: AstroConstants = EARTH,
) -> list[CandidateSlot]:
    """All candidate orbital slots for a debris at one step.

    ``feasible_engagers`` maps engager id -> platform StateVector. One
    slot per non-empty engager subset up to ``cap``, each with the
    DVA-composed resulting state, plus the no-engagement slot first.
    """
    el_now = astro.state_to_elements(debris_state, constants)
    slots = [
        CandidateSlot(
            debris_id=debris_obj.id,
            step=step,
            engagers=frozenset(),
            resulting_state=debris_state,
            resulting_periapsis=el_now.periapsis_radius,
            dv=DeltaV.zero(),
        )
    ]
    per_engager = {
        eid: ablation.engagement_dv(spec, debris_obj, pstate, debris_state)
        for eid, pstate in feasible_engagers.items()
    }
    for subset in enumerate_engager_subsets(feasible_engagers.keys(), cap):
        dv = ablation.compose_dva([per_engager[eid] for eid in subset])
        new_state = ablation.apply_engagement(debris_state, dv)
        try:
            peri = astro.state_to_elements(new_state, constants).periapsis_radius
        except astro.HyperbolicState:
            # ejected on a non-elliptic orbit; periapsis from the
            # conic directly: r_p = p / (1 + e)
            peri = _conic_periapsis(new_state, constants)
        slots.append(
            CandidateSlot(
                debris_id=debris_obj.id,
                step=step,
                engagers=frozenset(subset),
                resulting_state=new_state,
                resulting_periapsis=peri,
                dv=dv,
            )
        )
    return slots


def _conic_periapsis(sv: StateVector, constants: AstroConstants) -> float:
    """Periapsis radius valid for any conic (used for ejected debris)."""
    r = np.asarray(sv.r, dtype=float)
    v = np.asarray(sv.v, dtype=float)
    h_vec = np.cross(r, v)
    p = float(h_vec @ h_vec) / constants.mu
    e_vec = np.cross(v, h_vec) / constants.mu - r / float(np.linalg.norm(r))
    return p / (1.0 + float(np.linalg.norm(e_vec)))
