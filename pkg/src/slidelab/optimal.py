"""Model-based baseline: solve the maneuver that slides an object a given
distance when the friction coefficients are known.

Strategy from the displacement expansion: keep the initial acceleration at
the static limit (a hair above, so phases 1 and 4 contribute next to no
slip), brake with the acceleration bound, and solve the remaining free
parameter t_m for the requested distance by bisection on the closed-form
simulator, which is monotone in t_m for this family.
"""

from __future__ import annotations

from dataclasses import dataclass

from .dynamics import FrictionModel, simulate_closed_form
from .errors import RomExceeded, Unreachable
from .maneuver import (
    ACCEL_MAX,
    ManeuverAction,
    RawAction,
    ROM_MAX_DEFAULT,
    T_M_MAX,
    build_velocity_profile,
    range_of_motion,
    validate_action,
)

STATIC_MARGIN = 1e-6


def optimal_action(
    d_des: float,
    f: FrictionModel,
    *,
    rom_max: float = ROM_MAX_DEFAULT,
    accel_max: float = ACCEL_MAX,
    t_m_max: float = T_M_MAX,
    tol: float = 1e-5,
) -> ManeuverAction:
    """Maneuver that slides the object ``d_des`` meters under friction ``f``.

    Raises Unreachable when no t_m < t_m_max produces the distance (or the
    acceleration bound cannot break static friction at all), RomExceeded
    when the solution needs more platform travel than ``rom_max``.
    """
    d_mag = abs(float(d_des))
    if d_mag == 0.0:
        raise Unreachable("requested displacement is zero")
    direction = 1.0 if d_des > 0.0 else -1.0
    a_i_mag = f.mu_s * f.g * (1.0 + STATIC_MARGIN)
    if accel_max <= f.mu_s * f.g:
        raise Unreachable(
            f"acceleration bound {accel_max} cannot break static friction mu_s*g={f.mu_s * f.g:.4g}")
    if a_i_mag > accel_max:
        raise Unreachable("static limit exceeds the acceleration bound")

    def solve(t_m: float) -> ManeuverAction:
        return validate_action(RawAction(a_i=direction * a_i_mag, a_m=-direction * accel_max, t_m=t_m))

    def achieved(t_m: float) -> float:
        action = solve(t_m)
        result = simulate_closed_form(build_velocity_profile(action), f, sample_rate=None)
        return direction * result.delta_x_rel

    hi = t_m_max * (1.0 - 1e-9)
    if achieved(hi) < d_mag:
        raise Unreachable(f"cannot reach {d_mag:.4g} m with t_m < {t_m_max}")
    lo = 0.0
    t_m = hi
    for _ in range(200):
        t_m = 0.5 * (lo + hi)
        got = achieved(t_m)
        if abs(got - d_mag) < tol:
            break
        if got < d_mag:
            lo = t_m
        else:
            hi = t_m
    else:
        raise Unreachable(f"bisection failed to converge for d={d_des:.4g}, mu_k={f.mu_k:.4g}")
    action = solve(t_m)
    rom = range_of_motion(action)
    if rom > rom_max:
        raise RomExceeded(f"maneuver needs {rom:.4g} m of travel, workspace allows {rom_max}")
    return action


@dataclass
class OptimalController:
    """Convenience wrapper binding the solver to one friction model."""

    f: FrictionModel
    rom_max: float = ROM_MAX_DEFAULT
    tol: float = 1e-5

    def action_for(self, d_des: float) -> ManeuverAction:
        return optimal_action(d_des, self.f, rom_max=self.rom_max, tol=self.tol)
