"""Four-phase platform maneuver: validation, velocity profile, sampling.

A maneuver accelerates the platform from rest with ``a_i`` for ``t_i``
seconds (phase 1), applies the opposing acceleration ``a_m`` for ``t_m``
seconds (phases 2 and 3, split at the velocity zero crossing), and brakes
with ``a_i`` for another ``t_i`` seconds (phase 4).  Choosing

    t_i = (t_m / 2) * |a_m / a_i|

makes the platform velocity cross zero exactly at the maneuver midpoint
and return to zero at the end, with zero net platform displacement.  The
peak excursion from the start pose is reached at the midpoint; its
magnitude is the range of motion the maneuver needs.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import (
    AccelOutOfRange,
    DurationOutOfRange,
    SameSignAccels,
    ZeroInitialAccel,
)

ACCEL_MAX = 4.2        # m/s^2, platform acceleration limit
T_M_MAX = 2.0          # s, strict upper bound on the mid-phase duration
ROM_MAX_DEFAULT = 0.5  # m, default bound on platform excursion

CSV_FLOAT_FMT = "%.9g"


@dataclass(frozen=True)
class RawAction:
    """Maneuver parameters as emitted by a policy, before validation."""

    a_i: float
    a_m: float
    t_m: float


@dataclass(frozen=True)
class ManeuverAction:
    """Validated maneuver with the derived initial-phase duration."""

    a_i: float
    a_m: float
    t_m: float
    t_i: float

    @property
    def duration(self) -> float:
        return 2.0 * self.t_i + self.t_m


@dataclass(frozen=True)
class PhaseSegment:
    """One constant-acceleration piece of a platform trajectory."""

    t_start: float
    duration: float
    accel: float
    v_start: float
    x_start: float

    @property
    def t_end(self) -> float:
        return self.t_start + self.duration

    @property
    def v_end(self) -> float:
        return self.v_start + self.accel * self.duration

    @property
    def x_end(self) -> float:
        d = self.duration
        return self.x_start + self.v_start * d + 0.5 * self.accel * d * d


@dataclass(frozen=True)
class VelocityProfile:
    """Piecewise-constant-acceleration platform trajectory starting at rest.

    Outside [0, duration) the platform is at rest at the origin: the
    acceleration lookup is right-continuous at segment boundaries and zero
    from ``duration`` onward.
    """

    segments: tuple[PhaseSegment, ...]

    @property
    def duration(self) -> float:
        return self.segments[-1].t_end

    @property
    def boundaries(self) -> np.ndarray:
        """Segment start times after t=0, plus the end time."""
        return np.array([s.t_end for s in self.segments])

    def _starts(self) -> np.ndarray:
        return np.array([s.t_start for s in self.segments])

    def _segment_index(self, t: np.ndarray) -> np.ndarray:
        return np.clip(np.searchsorted(self._starts(), t, side="right") - 1, 0, len(self.segments) - 1)

    def accel_at(self, t):
        t = np.asarray(t, dtype=float)
        idx = self._segment_index(t)
        acc = np.array([s.accel for s in self.segments])[idx]
        return np.where((t < 0.0) | (t >= self.duration), 0.0, acc)

    def velocity_at(self, t):
        t = np.asarray(t, dtype=float)
        idx = self._segment_index(t)
        segs = self.segments
        v0 = np.array([s.v_start for s in segs])[idx]
        a = np.array([s.accel for s in segs])[idx]
        t0 = np.array([s.t_start for s in segs])[idx]
        v = v0 + a * (t - t0)
        return np.where((t < 0.0) | (t >= self.duration), 0.0, v)

    def position_at(self, t):
        t = np.asarray(t, dtype=float)
        idx = self._segment_index(t)
        segs = self.segments
        x0 = np.array([s.x_start for s in segs])[idx]
        v0 = np.array([s.v_start for s in segs])[idx]
        a = np.array([s.accel for s in segs])[idx]
        dt = t - np.array([s.t_start for s in segs])[idx]
        x = x0 + v0 * dt + 0.5 * a * dt * dt
        end_x = self.segments[-1].x_end
        return np.where(t < 0.0, 0.0, np.where(t >= self.duration, end_x, x))


@dataclass
class PlatformTrace:
    """Sampled platform kinematics."""

    t: np.ndarray
    accel: np.ndarray
    vel: np.ndarray
    pos: np.ndarray

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "accel", "vel", "pos"])
            for row in zip(self.t, self.accel, self.vel, self.pos):
                w.writerow([CSV_FLOAT_FMT % v for v in row])


def validate_action(raw: RawAction, *, accel_max: float = ACCEL_MAX, t_m_max: float = T_M_MAX) -> ManeuverAction:
    """Check a raw action against the action-space constraints.

    Raises AccelOutOfRange, DurationOutOfRange, SameSignAccels or
    ZeroInitialAccel; returns the action with t_i filled in otherwise.
    """
    a_i, a_m, t_m = float(raw.a_i), float(raw.a_m), float(raw.t_m)
    if a_i == 0.0:
        raise ZeroInitialAccel("a_i must be nonzero to define t_i")
    if abs(a_i) > accel_max or abs(a_m) > accel_max:
        raise AccelOutOfRange(f"|a_i|={abs(a_i):.4g}, |a_m|={abs(a_m):.4g} exceed limit {accel_max}")
    if not (0.0 < t_m < t_m_max):
        raise DurationOutOfRange(f"t_m={t_m:.4g} outside (0, {t_m_max})")
    if a_i * a_m > 0.0:
        raise SameSignAccels("a_i and a_m must have opposite signs (or a_m = 0)")
    t_i = 0.5 * t_m * abs(a_m / a_i)
    return ManeuverAction(a_i=a_i, a_m=a_m, t_m=t_m, t_i=t_i)


def build_velocity_profile(action: ManeuverAction) -> VelocityProfile:
    """Lay out the four constant-acceleration segments of a maneuver."""
    a_i, a_m, t_m, t_i = action.a_i, action.a_m, action.t_m, action.t_i
    half = 0.5 * t_m
    segs = []
    t = v = x = 0.0
    for accel, dur in ((a_i, t_i), (a_m, half), (a_m, half), (a_i, t_i)):
        seg = PhaseSegment(t_start=t, duration=dur, accel=accel, v_start=v, x_start=x)
        segs.append(seg)
        t, v, x = seg.t_end, seg.v_end, seg.x_end
    return VelocityProfile(segments=tuple(segs))


def range_of_motion(action: ManeuverAction) -> float:
    """Peak platform excursion |x(t_i + t_m/2)| required by the maneuver.

    Integrating the velocity up to the midpoint:

        x_mid = a_i t_i^2 / 2 + a_i t_i t_m / 2 + a_m t_m^2 / 8
    """
    a_i, a_m, t_m, t_i = action.a_i, action.a_m, action.t_m, action.t_i
    return abs(0.5 * a_i * t_i * t_i + 0.5 * a_i * t_i * t_m + a_m * t_m * t_m / 8.0)


def sample_profile(profile: VelocityProfile, rate: float) -> PlatformTrace:
    """Sample a profile uniformly at ``rate`` Hz, plus the exact segment
    boundaries and the end time."""
    n = int(np.floor(profile.duration * rate))
    uniform = np.arange(n + 1) / rate
    t = np.unique(np.concatenate([uniform, profile.boundaries, [0.0, profile.duration]]))
    return PlatformTrace(
        t=t,
        accel=profile.accel_at(t),
        vel=profile.velocity_at(t),
        pos=profile.position_at(t),
    )
