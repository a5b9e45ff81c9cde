"""Fixed-step numeric integration of the stick-slip dynamics.

Deliberately independent of the event-driven code in ``dynamics``: the
platform acceleration is looked up per step, the relative state advances
with an explicit step (exact for piecewise-constant acceleration), and
sticking is detected with a velocity deadband ``eps_v = dt * mu_k * g``
or a sign change while the platform acceleration is below the static
limit.  Used as the ground-truth cross-check for the closed-form
simulator.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

from .dynamics import (
    EVENT_REVERSAL,
    EVENT_SLIP_START,
    EVENT_STICK,
    FrictionModel,
    RelativeTrace,
    SlideResult,
)
from .maneuver import VelocityProfile

_EV_SLIP, _EV_STICK, _EV_REVERSAL = 0, 1, 2


@njit(cache=True)
def _integrate(seg_ends, accels, duration, mu_s_g, mu_k_g, dt, stride,
               samp_t, samp_a, samp_pv, samp_x, samp_v, ev_t, ev_code):
    eps_v = dt * mu_k_g
    n_steps = int(math.ceil(duration / dt - 1e-12))
    x = 0.0
    v = 0.0
    v_plat = 0.0
    sticking = True
    seg = 0
    n_ev = 0
    j = 0
    for k in range(n_steps):
        t = k * dt
        while seg < seg_ends.shape[0] - 1 and t >= seg_ends[seg]:
            seg += 1
        a_plat = accels[seg]
        if k % stride == 0 and j < samp_t.shape[0]:
            samp_t[j] = t
            samp_a[j] = a_plat
            samp_pv[j] = v_plat
            samp_x[j] = x
            samp_v[j] = v
            j += 1
        h = duration - t
        if h > dt:
            h = dt
        if sticking and abs(a_plat) > mu_s_g:
            sticking = False
            if n_ev < ev_t.shape[0]:
                ev_t[n_ev] = t
                ev_code[n_ev] = _EV_SLIP
                n_ev += 1
        if not sticking:
            if v > 0.0:
                s = 1.0
            elif v < 0.0:
                s = -1.0
            else:
                s = -1.0 if a_plat > 0.0 else 1.0
            a_rel = -a_plat - s * mu_k_g
            x += v * h + 0.5 * a_rel * h * h
            v_new = v + a_rel * h
            crossed = v != 0.0 and v_new != 0.0 and (v > 0.0) != (v_new > 0.0)
            if (abs(v_new) < eps_v or crossed) and abs(a_plat) <= mu_s_g:
                v_new = 0.0
                sticking = True
                if n_ev < ev_t.shape[0]:
                    ev_t[n_ev] = t + h
                    ev_code[n_ev] = _EV_STICK
                    n_ev += 1
            elif crossed:
                if n_ev < ev_t.shape[0]:
                    ev_t[n_ev] = t + h
                    ev_code[n_ev] = _EV_REVERSAL
                    n_ev += 1
            v = v_new
        v_plat += a_plat * h
    if j < samp_t.shape[0]:
        samp_t[j] = duration
        samp_a[j] = 0.0
        samp_pv[j] = v_plat
        samp_x[j] = x
        samp_v[j] = v
        j += 1
    return x, v, n_ev, j


def simulate_numeric(
    profile: VelocityProfile,
    f: FrictionModel,
    dt: float = 1e-6,
    sample_rate: float | None = 100.0,
) -> SlideResult:
    """Brute-force the relative motion with a fixed time step."""
    seg_ends = np.array([s.t_end for s in profile.segments])
    accels = np.array([s.accel for s in profile.segments])
    duration = profile.duration
    if sample_rate is None:
        stride = 2 ** 62
        n_samp = 1
    else:
        stride = max(1, int(round(1.0 / (sample_rate * dt))))
        n_samp = int(duration * sample_rate) + 2
    samp_t = np.zeros(n_samp)
    samp_a = np.zeros(n_samp)
    samp_pv = np.zeros(n_samp)
    samp_x = np.zeros(n_samp)
    samp_v = np.zeros(n_samp)
    ev_t = np.zeros(256)
    ev_code = np.zeros(256, dtype=np.int64)
    x, v, n_ev, j = _integrate(
        seg_ends, accels, duration, f.mu_s * f.g, f.mu_k * f.g, dt, stride,
        samp_t, samp_a, samp_pv, samp_x, samp_v, ev_t, ev_code,
    )
    kinds = {_EV_SLIP: EVENT_SLIP_START, _EV_STICK: EVENT_STICK, _EV_REVERSAL: EVENT_REVERSAL}
    events = [(float(ev_t[i]), kinds[int(ev_code[i])]) for i in range(n_ev)]
    trace = None
    if sample_rate is not None:
        trace = RelativeTrace(
            t=samp_t[:j], plat_accel=samp_a[:j], plat_vel=samp_pv[:j],
            x_rel=samp_x[:j], v_rel=samp_v[:j],
        )
    mid = profile.segments[1].t_end if len(profile.segments) >= 2 else duration
    return SlideResult(
        delta_x_rel=float(x),
        rom=abs(float(profile.position_at(mid))),
        duration=duration,
        events=events,
        legs=[],
        profile=profile,
        trace=trace,
        final_v_rel=float(v),
    )
