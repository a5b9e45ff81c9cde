"""Curriculum training loop for the maneuver policy.

Runs staged episodes, streams per-episode JSONL logs, promotes stages from
rolling statistics (with a step-budget fallback so a stalled stage cannot
eat the whole run), and snapshots the best domain-randomized policy seen
on a fixed evaluation grid.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import checkpoint
from .config import RunConfig, config_to_dict
from .ddpg import ACTION_DIM, AgentConfig, DdpgAgent, ReplayBuffer, denormalize_action
from .dynamics import simulate_closed_form
from .environment import (
    CurriculumTracker,
    EnvParams,
    SlidingEnv,
    Stage,
    assemble_state,
)
from .errors import ActionValidationError, CheckpointError
from .maneuver import build_velocity_profile, validate_action

EVAL_DISTANCES = tuple(round(0.02 * k, 2) for k in range(1, 11))
EVAL_SURFACE = 0.24
EVAL_OFFSETS = (-0.05, 0.05)


def first_step_error(agent: DdpgAgent, p: EnvParams, d_des: float, mu_k: float, mu_e: float) -> float:
    """Absolute distance error after one noise-free policy step."""
    state = assemble_state(d_des, [], mu_e)
    _, raw = agent.act(state)
    try:
        action = validate_action(raw)
    except ActionValidationError:
        return abs(d_des)
    result = simulate_closed_form(build_velocity_profile(action), p.friction(mu_k), sample_rate=None)
    return abs(d_des - result.delta_x_rel)


def eval_medians(agent: DdpgAgent, p: EnvParams) -> tuple[float, float]:
    """Median first-step error over the distance grid at the reference
    surface, with the exact estimate and with +/-0.05 estimate offsets."""
    exact = [first_step_error(agent, p, d, EVAL_SURFACE, EVAL_SURFACE)
             for d in EVAL_DISTANCES]
    off = [first_step_error(agent, p, d, EVAL_SURFACE, EVAL_SURFACE + o)
           for d in EVAL_DISTANCES for o in EVAL_OFFSETS]
    return float(np.median(exact)), float(np.median(off))


def eval_grid_error(agent: DdpgAgent, p: EnvParams) -> float:
    """Scalar selection score: worst of the two eval medians, each scaled
    so 1.0 sits at the target accuracy (1 cm exact, 1.5 cm offset)."""
    m_exact, m_off = eval_medians(agent, p)
    return max(m_exact / 0.010, m_off / 0.015)


@dataclass
class TrainResult:
    steps: int
    episodes: int
    final_stage: Stage
    stage_history: list[dict]
    best_eval_error: float
    checkpoint_path: Path
    best_checkpoint_path: Path | None
    log_path: Path


def train_ddpg(cfg: RunConfig, out_dir, *, resume=None, progress=None) -> TrainResult:
    """Train a policy through the full curriculum.

    Writes ``<name>.json/.bin`` (final), ``<name>_best.json/.bin`` (best
    eval snapshot once domain randomization starts) and ``train_log.jsonl``
    under ``out_dir``.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    root = np.random.SeedSequence(cfg.seed)
    init_seed, explore_seed, env_seed, replay_seed = root.spawn(4)
    agent = DdpgAgent(cfg.agent, np.random.default_rng(init_seed))
    explore_rng = np.random.default_rng(explore_seed)
    replay_rng = np.random.default_rng(replay_seed)
    env = SlidingEnv(cfg.env, np.random.default_rng(env_seed))
    buffer = ReplayBuffer(cfg.agent.buffer_capacity)
    tracker = CurriculumTracker(cfg.env)
    sigma = cfg.agent.noise_sigma
    total_steps = 0
    episode = 0
    if resume is not None:
        arrays, meta = checkpoint.load_arrays(resume)
        if meta.get("kind") != "ddpg-policy":
            raise CheckpointError(f"{resume} is not a policy checkpoint")
        agent.load_arrays(arrays)
        tracker.stage = Stage(meta.get("stage", Stage.IMITATION.value))
        sigma = float(meta.get("sigma", sigma))

    tp = cfg.training
    log_path = out_dir / "train_log.jsonl"
    stage_history: list[dict] = []
    stage_start_step = total_steps
    stage_episodes = 0
    best_eval = np.inf
    best_path: Path | None = None
    final_path = out_dir / f"{tp.checkpoint_name}.json"

    def save(path: Path) -> None:
        meta = {"kind": "ddpg-policy", "agent": {**config_to_dict(cfg)["agent"]},
                "stage": tracker.stage.value, "sigma": sigma,
                "total_steps": total_steps, "episode": episode, "seed": cfg.seed}
        checkpoint.save_arrays(path, agent.named_arrays(), meta)

    with open(log_path, "w") as log:
        while total_steps < tp.total_steps:
            state = env.reset(tracker.stage)
            ep_reward = 0.0
            ep_imitation = []
            done = False
            while not done:
                if total_steps < cfg.agent.warmup_steps:
                    u = explore_rng.uniform(-1.0, 1.0, ACTION_DIM)
                    raw = denormalize_action(u, direction=float(state[0]))
                else:
                    u, raw = agent.act(state, sigma=sigma, rng=explore_rng)
                next_state, reward, done, info = env.step(raw)
                buffer.add(state, u, reward, next_state, float(done))
                state = next_state
                ep_reward += reward
                if tracker.stage is Stage.IMITATION:
                    ep_imitation.append(reward)
                total_steps += 1
                if total_steps >= cfg.agent.warmup_steps and len(buffer) >= cfg.agent.batch_size:
                    for _ in range(tp.updates_per_step):
                        batch = buffer.sample(cfg.agent.batch_size, replay_rng)
                        agent.critic_update(batch)
                        agent.actor_update(batch)
                        agent.update_targets()
                if total_steps >= tp.total_steps:
                    break
            episode += 1
            stage_episodes += 1
            accuracy = info["accuracy"]
            imitation_mean = float(np.mean(ep_imitation)) if ep_imitation else None
            tracker.record_episode(accuracy, imitation_mean)
            log.write(json.dumps({
                "episode": episode, "stage": tracker.stage.value, "steps": env.step_count,
                "reward": round(ep_reward, 6), "final_error_m": round(float(env.d_remaining), 6),
                "accuracy": round(accuracy, 6), "sigma": round(sigma, 6),
                "total_steps": total_steps,
            }) + "\n")
            sigma = max(sigma * cfg.agent.noise_decay, cfg.agent.noise_sigma_min)

            forced = (total_steps - stage_start_step) >= tp.max_stage_steps
            if (tracker.should_advance() or forced) and tracker.stage is not Stage.DR2:
                stage_history.append({
                    "stage": tracker.stage.value, "episodes": stage_episodes,
                    "start_step": stage_start_step, "end_step": total_steps,
                    "forced": bool(forced and not tracker.should_advance()),
                })
                tracker.advance()
                stage_start_step = total_steps
                stage_episodes = 0
                if tp.flush_buffer_on_stage:
                    buffer.clear()

            if tracker.stage in (Stage.DR1, Stage.DR2) and episode % tp.eval_every == 0:
                err = eval_grid_error(agent, cfg.env)
                if err < best_eval:
                    best_eval = err
                    best_path = out_dir / f"{tp.checkpoint_name}_best.json"
                    save(best_path)
                if progress is not None:
                    progress(episode, total_steps, tracker.stage, err)

    stage_history.append({
        "stage": tracker.stage.value, "episodes": stage_episodes,
        "start_step": stage_start_step, "end_step": total_steps, "forced": False,
    })
    save(final_path)
    return TrainResult(
        steps=total_steps, episodes=episode, final_stage=tracker.stage,
        stage_history=stage_history, best_eval_error=float(best_eval),
        checkpoint_path=final_path, best_checkpoint_path=best_path, log_path=log_path,
    )


def load_policy(path) -> tuple[DdpgAgent, dict]:
    """Rebuild an agent from a policy checkpoint."""
    arrays, meta = checkpoint.load_arrays(path)
    if meta.get("kind") != "ddpg-policy":
        raise CheckpointError(f"{path} is not a policy checkpoint")
    raw = dict(meta.get("agent", {}))
    if "hidden" in raw:
        raw["hidden"] = tuple(raw["hidden"])
    agent_cfg = AgentConfig(**raw)
    agent = DdpgAgent(agent_cfg, np.random.default_rng(0))
    agent.load_arrays(arrays)
    return agent, meta
