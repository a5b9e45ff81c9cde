"""Relative motion of an object on an accelerating platform under Coulomb friction.

In the platform frame the object obeys

    x_rel'' = -X'' - sign(x_rel') * mu_k * g        while slipping,

where X'' is the platform acceleration.  The object sticks (moves with the
platform) as long as |X''| <= mu_s * g; slip starts only when the platform
acceleration strictly exceeds the static limit.  At slip onset, and whenever
the relative velocity passes through zero while |X''| still exceeds the
limit, the friction term takes the sign of -X'' so kinetic friction opposes
the nascent relative motion.

Between events (phase boundaries, zero crossings of the relative velocity,
stick/slip transitions) every acceleration is constant, so the motion
integrates in closed form.  ``simulate_closed_form`` walks those events
exactly; ``oracle.simulate_numeric`` brute-forces the same dynamics with a
fixed time step for cross-checking.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DegenerateTrace, PadTooShort
from .maneuver import CSV_FLOAT_FMT, VelocityProfile

G_DEFAULT = 9.81      # m/s^2
MU_MAX = 2.0

EVENT_SLIP_START = "slip-start"
EVENT_STICK = "stick"
EVENT_REVERSAL = "reversal"
EVENT_PHASE_BOUNDARY = "phase-boundary"


@dataclass(frozen=True)
class FrictionModel:
    """Coulomb friction pair between object and platform surface."""

    mu_s: float
    mu_k: float
    g: float = G_DEFAULT

    def __post_init__(self):
        if not (0.0 < self.mu_k <= self.mu_s <= MU_MAX):
            raise ConfigError(f"need 0 < mu_k <= mu_s <= {MU_MAX}, got mu_k={self.mu_k}, mu_s={self.mu_s}")
        if self.g <= 0.0:
            raise ConfigError("g must be positive")

    @classmethod
    def from_mu(cls, mu_k: float, ratio: float = 1.0, g: float = G_DEFAULT) -> "FrictionModel":
        """Build a model from the kinetic coefficient; mu_s = ratio * mu_k."""
        return cls(mu_s=ratio * mu_k, mu_k=mu_k, g=g)


def slip_condition(accel: float, f: FrictionModel) -> bool:
    """True when the platform acceleration breaks static friction."""
    return abs(accel) > f.mu_s * f.g


def relative_accel(v_rel: float, accel: float, f: FrictionModel) -> float:
    """Relative acceleration while slipping.

    At v_rel == 0 (slip onset) kinetic friction opposes the incipient
    motion, whose direction is -sign(accel).
    """
    if v_rel > 0.0:
        s = 1.0
    elif v_rel < 0.0:
        s = -1.0
    else:
        s = -math.copysign(1.0, accel)
    return -accel - s * f.mu_k * f.g


@dataclass(frozen=True)
class Leg:
    """One closed-form piece of the relative motion (constant accelerations)."""

    t_start: float
    duration: float
    plat_accel: float
    x0: float
    v0: float
    a_rel: float
    sticking: bool

    @property
    def t_end(self) -> float:
        return self.t_start + self.duration

    def state_at(self, t: float) -> tuple[float, float]:
        dt = t - self.t_start
        return (
            self.x0 + self.v0 * dt + 0.5 * self.a_rel * dt * dt,
            self.v0 + self.a_rel * dt,
        )


@dataclass
class RelativeTrace:
    """Sampled platform and relative kinematics."""

    t: np.ndarray
    plat_accel: np.ndarray
    plat_vel: np.ndarray
    x_rel: np.ndarray
    v_rel: np.ndarray

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "plat_accel", "plat_vel", "x_rel", "v_rel"])
            for row in zip(self.t, self.plat_accel, self.plat_vel, self.x_rel, self.v_rel):
                w.writerow([CSV_FLOAT_FMT % v for v in row])

    @classmethod
    def from_csv(cls, path) -> "RelativeTrace":
        with open(path, newline="") as fh:
            r = csv.reader(fh)
            header = next(r, None)
            if header != ["t", "plat_accel", "plat_vel", "x_rel", "v_rel"]:
                raise DegenerateTrace(f"unexpected header {header!r}")
            rows = [[float(v) for v in row] for row in r]
        if not rows:
            raise DegenerateTrace("trace file has no samples")
        cols = np.array(rows).T
        if np.any(np.diff(cols[0]) < 0):
            raise DegenerateTrace("time column is not monotone")
        return cls(t=cols[0], plat_accel=cols[1], plat_vel=cols[2], x_rel=cols[3], v_rel=cols[4])


def write_event_log(events: list[tuple[float, str]], path) -> None:
    with open(path, "w") as fh:
        for t, kind in events:
            fh.write(json.dumps({"t": t, "kind": kind}) + "\n")


@dataclass
class SlideResult:
    """Outcome of one maneuver simulation."""

    delta_x_rel: float
    rom: float
    duration: float
    events: list[tuple[float, str]]
    legs: list[Leg]
    profile: VelocityProfile
    trace: RelativeTrace | None = None
    final_v_rel: float = 0.0

    def relative_at(self, t):
        """Exact (x_rel, v_rel) at arbitrary times inside [0, duration].

        Times past the end freeze at the final state; the trace contract
        zero-pads separately.
        """
        t_arr = np.atleast_1d(np.asarray(t, dtype=float))
        starts = np.array([leg.t_start for leg in self.legs])
        idx = np.clip(np.searchsorted(starts, t_arr, side="right") - 1, 0, len(self.legs) - 1)
        x = np.empty_like(t_arr)
        v = np.empty_like(t_arr)
        for i in np.unique(idx):
            leg = self.legs[int(i)]
            m = idx == i
            dt = np.clip(t_arr[m], leg.t_start, leg.t_end) - leg.t_start
            x[m] = leg.x0 + leg.v0 * dt + 0.5 * leg.a_rel * dt * dt
            v[m] = leg.v0 + leg.a_rel * dt
        if np.asarray(t).ndim == 0:
            return float(x[0]), float(v[0])
        return x, v


def _simulate_legs(profile: VelocityProfile, f: FrictionModel) -> tuple[list[Leg], list[tuple[float, str]]]:
    mu_s_g = f.mu_s * f.g
    mu_k_g = f.mu_k * f.g
    legs: list[Leg] = []
    events: list[tuple[float, str]] = []
    t = x = v = 0.0
    sticking = True  # starts at rest on a resting platform
    for si, seg in enumerate(profile.segments):
        a = seg.accel
        seg_end = seg.t_end
        if seg.duration == 0.0:
            continue
        while t < seg_end:
            if sticking:
                if abs(a) > mu_s_g:
                    events.append((t, EVENT_SLIP_START))
                    sticking = False
                    continue
                legs.append(Leg(t, seg_end - t, a, x, v, 0.0, True))
                t = seg_end
                break
            a_rel = relative_accel(v, a, f)
            t_cross = math.inf
            if v != 0.0 and a_rel != 0.0 and (v > 0.0) != (a_rel > 0.0):
                t_cross = -v / a_rel
            if t + t_cross < seg_end:
                legs.append(Leg(t, t_cross, a, x, v, a_rel, False))
                x += v * t_cross + 0.5 * a_rel * t_cross * t_cross
                v = 0.0
                t += t_cross
                if abs(a) > mu_s_g:
                    events.append((t, EVENT_REVERSAL))
                    # slip resumes immediately with the opposite friction sign
                else:
                    events.append((t, EVENT_STICK))
                    sticking = True
            else:
                dt = seg_end - t
                legs.append(Leg(t, dt, a, x, v, a_rel, False))
                x += v * dt + 0.5 * a_rel * dt * dt
                v += a_rel * dt
                t = seg_end
        events.append((seg_end, EVENT_PHASE_BOUNDARY))
        # a stuck object stays stuck across the boundary; a slipping one
        # re-evaluates against the next segment's acceleration
        if not sticking and v == 0.0 and si + 1 < len(profile.segments):
            if abs(profile.segments[si + 1].accel) <= mu_s_g:
                sticking = True
                events.append((seg_end, EVENT_STICK))
    return legs, events


def simulate_closed_form(
    profile: VelocityProfile,
    f: FrictionModel,
    sample_rate: float | None = 100.0,
) -> SlideResult:
    """Event-driven exact integration of the stick-slip dynamics.

    Returns the net relative displacement along with the exact piecewise
    legs, the event log, and (if ``sample_rate`` is given) a sampled trace
    that includes the exact leg boundaries.
    """
    legs, events = _simulate_legs(profile, f)
    last = legs[-1]
    x_end, v_end = last.state_at(last.t_end)
    mid = profile.segments[1].t_end if len(profile.segments) >= 2 else profile.duration
    rom = abs(float(profile.position_at(mid)))
    result = SlideResult(
        delta_x_rel=x_end,
        rom=rom,
        duration=profile.duration,
        events=events,
        legs=legs,
        profile=profile,
        final_v_rel=v_end,
    )
    if sample_rate is not None:
        n = int(np.floor(profile.duration * sample_rate))
        uniform = np.arange(n + 1) / sample_rate
        cuts = np.array([leg.t_start for leg in legs] + [profile.duration])
        ts = np.unique(np.concatenate([uniform, cuts]))
        x, v = result.relative_at(ts)
        result.trace = RelativeTrace(
            t=ts,
            plat_accel=profile.accel_at(ts),
            plat_vel=profile.velocity_at(ts),
            x_rel=x,
            v_rel=v,
        )
    return result


def sample_relative_trace(result: SlideResult, rate: float, pad_to: float = 2.0) -> np.ndarray:
    """Fixed-length two-channel series (platform accel, v_rel) at ``rate`` Hz.

    The window covers [0, pad_to); samples at or past the maneuver end are
    zero in both channels.  Raises PadTooShort when the maneuver does not
    fit the window.
    """
    if result.duration > pad_to:
        raise PadTooShort(f"maneuver lasts {result.duration:.4g} s, window is {pad_to:.4g} s")
    n = int(round(rate * pad_to))
    ts = np.arange(n) / rate
    live = ts < result.duration
    out = np.zeros((2, n))
    out[0, live] = result.profile.accel_at(ts[live])
    _, v = result.relative_at(ts[live])
    out[1, live] = v
    return out
