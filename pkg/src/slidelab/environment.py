"""Sliding task as an episodic environment with a staged curriculum.

An episode fixes a desired displacement and a surface; each step executes
one maneuver and the agent observes how far the object actually slid.  The
state packs the remaining displacement, the last three (action, outcome)
pairs and the friction estimate the agent is given, all scaled to stay in
[-2, 2].  Curriculum stages widen the task distribution from a single
imitation setup to domain-randomized friction estimates.
"""

from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass

import numpy as np

from .dynamics import FrictionModel, simulate_closed_form
from .errors import ActionValidationError, SlideError
from .maneuver import (
    ACCEL_MAX,
    ManeuverAction,
    RawAction,
    T_M_MAX,
    build_velocity_profile,
    validate_action,
)
from .optimal import optimal_action

STATE_DIM = 14
HISTORY_SLOTS = 3


class Stage(enum.Enum):
    IMITATION = "imitation"
    PERF_FIXED = "perf-fixed"
    PERF_DISTANCES = "perf-distances"
    PERF_FRICTIONS = "perf-frictions"
    DR1 = "dr1"
    DR2 = "dr2"


STAGE_ORDER = (Stage.IMITATION, Stage.PERF_FIXED, Stage.PERF_DISTANCES,
               Stage.PERF_FRICTIONS, Stage.DR1, Stage.DR2)


def next_stage(stage: Stage) -> Stage:
    i = STAGE_ORDER.index(stage)
    return STAGE_ORDER[min(i + 1, len(STAGE_ORDER) - 1)]


@dataclass
class EnvParams:
    g: float = 9.81
    mu_ratio: float = 1.0           # mu_s / mu_k
    rom_max: float = 0.5
    success_tol: float = 0.005
    max_steps: int = 5
    fixed_d: float = 0.08
    fixed_mu: float = 0.24
    d_range: tuple[float, float] = (0.02, 0.2)
    mu_range: tuple[float, float] = (0.05, 0.45)
    dr1_eta: tuple[float, float] = (0.05, 0.10)
    dr2_eta: tuple[float, float] = (0.05, 0.15)
    mu_clamp: tuple[float, float] = (0.01, 0.6)
    accuracy_threshold: float = 0.85
    imitation_threshold: float = -0.05
    promotion_window: int = 200
    step_penalty: float = 0.1
    time_penalty: float = 0.05
    rom_penalty: float = 2.0
    success_bonus: float = 5.0
    invalid_penalty: float = -1.0
    trace_rate: float | None = None

    def friction(self, mu_k: float) -> FrictionModel:
        return FrictionModel.from_mu(mu_k, ratio=self.mu_ratio, g=self.g)


@dataclass
class EpisodeConfig:
    d_des: float
    mu_k_true: float
    mu_e_given: float
    max_steps: int = 5
    success_tol: float = 0.005


def randomize_mu(mu: float, eta_range: tuple[float, float], rng: np.random.Generator,
                 clamp: tuple[float, float] = (0.01, 0.6)) -> float:
    """Perturbed friction estimate mu +/- eta with eta drawn from the range
    and a random sign, clamped to the physical band."""
    eta = rng.uniform(*eta_range)
    sign = 1.0 if rng.random() < 0.5 else -1.0
    return float(np.clip(mu + sign * eta, *clamp))


def assemble_state(d_remaining: float, history, mu_e: float) -> np.ndarray:
    """14-feature task state.

    Layout: [d_remaining * 10,
             (a_i / 4.2, a_m / 4.2, t_m / 2) for the last three actions
             (most recent first, zero-padded),
             (displacement * 10) for the same three steps,
             mu_e * 2]
    """
    state = np.zeros(STATE_DIM)
    state[0] = d_remaining * 10.0
    for k, (action, delta) in enumerate(history[:HISTORY_SLOTS]):
        state[1 + 3 * k] = action.a_i / ACCEL_MAX
        state[2 + 3 * k] = action.a_m / ACCEL_MAX
        state[3 + 3 * k] = action.t_m / T_M_MAX
        state[10 + k] = delta * 10.0
    state[13] = mu_e * 2.0
    return np.clip(state, -2.0, 2.0)


def accuracy_of(d_des: float, achieved: float) -> float:
    """1 - |dx - d| / |d|, clamped to [0, 1]."""
    if d_des == 0.0:
        return 0.0
    return float(np.clip(1.0 - abs(achieved - d_des) / abs(d_des), 0.0, 1.0))


def reward_imitation(action: ManeuverAction, f: FrictionModel, t_m_star: float,
                     w_accel: float = 1.0, w_time: float = 1.0) -> float:
    """Distance of an action from the analytic optimum (a_i at the static
    limit, a_m at the bound, t_m at the solved duration)."""
    da_i = (abs(action.a_i) - f.mu_s * f.g) / ACCEL_MAX
    da_m = (abs(action.a_m) - ACCEL_MAX) / ACCEL_MAX
    dt = (action.t_m - t_m_star) / T_M_MAX
    return -(w_accel * da_i * da_i + w_accel * da_m * da_m + w_time * dt * dt)


def reward_performance(err_after: float, d_des: float, rom: float, step_index: int,
                       elapsed: float, p: EnvParams, success: bool) -> float:
    """Accuracy term minus step, time and workspace penalties; success adds
    a terminal bonus."""
    acc = 1.0 - abs(err_after) / max(abs(d_des), 0.02)
    r = 2.0 * acc
    r -= p.step_penalty * step_index
    r -= p.time_penalty * elapsed
    r -= p.rom_penalty * max(0.0, rom - p.rom_max) / p.rom_max
    if success:
        r += p.success_bonus
    return r


class SlidingEnv:
    """One-object sliding task; each step runs one maneuver end to end."""

    def __init__(self, params: EnvParams, rng: np.random.Generator):
        self.p = params
        self.rng = rng
        self.episode: EpisodeConfig | None = None
        self.stage = Stage.IMITATION
        self.d_remaining = 0.0
        self.elapsed = 0.0
        self.step_count = 0
        self.history: list[tuple[RawAction, float]] = []
        self._t_m_star_cache: dict[tuple[float, float], float] = {}

    def reset(self, stage: Stage, *, d_des: float | None = None,
              mu_k: float | None = None, mu_e: float | None = None) -> np.ndarray:
        p = self.p
        self.stage = stage
        if d_des is None:
            if stage in (Stage.IMITATION, Stage.PERF_FIXED):
                d_des = p.fixed_d
            else:
                d_des = float(self.rng.uniform(*p.d_range))
        if mu_k is None:
            if stage in (Stage.PERF_FRICTIONS, Stage.DR1, Stage.DR2):
                mu_k = float(self.rng.uniform(*p.mu_range))
            else:
                mu_k = p.fixed_mu
        if mu_e is None:
            if stage is Stage.DR1:
                mu_e = randomize_mu(mu_k, p.dr1_eta, self.rng, p.mu_clamp)
            elif stage is Stage.DR2:
                mu_e = randomize_mu(mu_k, p.dr2_eta, self.rng, p.mu_clamp)
            else:
                mu_e = mu_k
        self.episode = EpisodeConfig(d_des=d_des, mu_k_true=mu_k, mu_e_given=mu_e,
                                     max_steps=p.max_steps, success_tol=p.success_tol)
        self.d_remaining = d_des
        self.elapsed = 0.0
        self.step_count = 0
        self.history = []
        return self.state()

    def state(self) -> np.ndarray:
        return assemble_state(self.d_remaining, self.history, self.episode.mu_e_given)

    def set_mu_estimate(self, mu_e: float) -> None:
        """Replace the friction estimate mid-episode (closed-loop use)."""
        self.episode.mu_e_given = float(mu_e)

    def _t_m_star(self) -> float:
        ep = self.episode
        key = (ep.d_des, ep.mu_k_true)
        if key not in self._t_m_star_cache:
            try:
                star = optimal_action(ep.d_des, self.p.friction(ep.mu_k_true),
                                      rom_max=self.p.rom_max).t_m
            except SlideError:
                star = 0.5 * T_M_MAX
            self._t_m_star_cache[key] = star
        return self._t_m_star_cache[key]

    def step(self, raw: RawAction):
        """Run one maneuver.  Returns (state, reward, done, info); an invalid
        action is a penalized no-op that still consumes a step."""
        ep = self.episode
        self.step_count += 1
        try:
            action = validate_action(raw)
        except ActionValidationError as exc:
            done = self.step_count >= ep.max_steps
            info = {"result": None, "success": False, "invalid": str(exc),
                    "accuracy": accuracy_of(ep.d_des, ep.d_des - self.d_remaining)}
            return self.state(), self.p.invalid_penalty, done, info
        profile = build_velocity_profile(action)
        result = simulate_closed_form(profile, self.p.friction(ep.mu_k_true),
                                      sample_rate=self.p.trace_rate)
        self.d_remaining -= result.delta_x_rel
        self.elapsed += result.duration
        self.history.insert(0, (raw, result.delta_x_rel))
        success = abs(self.d_remaining) <= ep.success_tol
        done = success or self.step_count >= ep.max_steps
        if self.stage is Stage.IMITATION:
            reward = reward_imitation(action, self.p.friction(ep.mu_k_true), self._t_m_star())
        else:
            reward = reward_performance(self.d_remaining, ep.d_des, result.rom,
                                        self.step_count, self.elapsed, self.p, success)
        info = {"result": result, "success": success, "invalid": None,
                "accuracy": accuracy_of(ep.d_des, ep.d_des - self.d_remaining)}
        return self.state(), reward, done, info


class CurriculumTracker:
    """Rolling promotion statistics for the stage sequence."""

    def __init__(self, params: EnvParams, stage: Stage = Stage.IMITATION):
        self.p = params
        self.stage = stage
        self.window: deque[float] = deque(maxlen=params.promotion_window)

    def record_episode(self, accuracy: float, imitation_reward: float | None = None) -> None:
        if self.stage is Stage.IMITATION:
            if imitation_reward is None:
                raise ValueError("imitation stage records the imitation reward")
            self.window.append(imitation_reward)
        else:
            self.window.append(accuracy)

    def should_advance(self) -> bool:
        if self.stage is STAGE_ORDER[-1]:
            return False
        if len(self.window) < self.p.promotion_window:
            return False
        mean = float(np.mean(self.window))
        if self.stage is Stage.IMITATION:
            return mean > self.p.imitation_threshold
        return mean > self.p.accuracy_threshold

    def advance(self) -> Stage:
        self.stage = next_stage(self.stage)
        self.window.clear()
        return self.stage
