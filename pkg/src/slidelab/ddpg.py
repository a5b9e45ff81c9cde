"""Deterministic policy-gradient agent over the maneuver action space.

The actor maps the 14-feature task state to a normalized action in
[-1, 1]^3; the critic scores (state, normalized action) pairs.  Actions
denormalize to maneuver magnitudes with the sign convention that the
initial acceleration points along the remaining displacement, which keeps
a_i * a_m <= 0 by construction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .maneuver import ACCEL_MAX, RawAction, T_M_MAX
from .nn import Adam, Mlp, soft_update

STATE_DIM = 14
ACTION_DIM = 3

_MAG_MIN = 1e-3  # keeps magnitudes strictly positive and t_m strictly below the bound


@dataclass
class AgentConfig:
    gamma: float = 0.98
    tau: float = 0.005
    actor_lr: float = 1e-4
    critic_lr: float = 1e-3
    batch_size: int = 128
    buffer_capacity: int = 100_000
    noise_sigma: float = 0.15
    noise_decay: float = 0.999
    noise_sigma_min: float = 0.02   # exploration floor late in training
    warmup_steps: int = 1000
    hidden: tuple[int, ...] = (256, 256)
    dtype: str = "float32"

    def np_dtype(self):
        return np.float32 if self.dtype == "float32" else np.float64


def denormalize_action(u, direction: float) -> RawAction:
    """Map a normalized action to maneuver parameters.

    u = (0, 0, 0) gives magnitudes (2.1, 2.1) and t_m = 1.0; the a_i sign
    follows ``direction`` and a_m opposes it.
    """
    u = np.asarray(u, dtype=float)
    sgn = 1.0 if direction >= 0.0 else -1.0
    a_i = np.clip(0.5 * (u[0] + 1.0) * ACCEL_MAX, _MAG_MIN, ACCEL_MAX)
    a_m = np.clip(0.5 * (u[1] + 1.0) * ACCEL_MAX, _MAG_MIN, ACCEL_MAX)
    t_m = np.clip(0.5 * (u[2] + 1.0) * T_M_MAX, _MAG_MIN, T_M_MAX - _MAG_MIN)
    return RawAction(a_i=sgn * a_i, a_m=-sgn * a_m, t_m=float(t_m))


def sample_indices(rng: np.random.Generator, n: int, k: int) -> np.ndarray:
    """k distinct indices in [0, n), uniform, cheap for k << n."""
    if k > n:
        raise ValueError(f"cannot draw {k} distinct indices from {n}")
    if 2 * k >= n:
        return rng.permutation(n)[:k]
    idx = np.unique(rng.integers(0, n, size=k))
    while idx.size < k:
        extra = rng.integers(0, n, size=k - idx.size)
        idx = np.unique(np.concatenate([idx, extra]))
    return idx


class ReplayBuffer:
    def __init__(self, capacity: int, state_dim: int = STATE_DIM, action_dim: int = ACTION_DIM):
        self.capacity = int(capacity)
        self.s = np.zeros((capacity, state_dim), dtype=np.float32)
        self.a = np.zeros((capacity, action_dim), dtype=np.float32)
        self.r = np.zeros(capacity, dtype=np.float32)
        self.s2 = np.zeros((capacity, state_dim), dtype=np.float32)
        self.done = np.zeros(capacity, dtype=np.float32)
        self.n = 0
        self.head = 0

    def __len__(self) -> int:
        return self.n

    def add(self, s, a, r, s2, done) -> None:
        i = self.head
        self.s[i] = s
        self.a[i] = a
        self.r[i] = r
        self.s2[i] = s2
        self.done[i] = done
        self.head = (i + 1) % self.capacity
        self.n = min(self.n + 1, self.capacity)

    def sample(self, k: int, rng: np.random.Generator):
        idx = sample_indices(rng, self.n, k)
        return self.s[idx], self.a[idx], self.r[idx], self.s2[idx], self.done[idx]

    def clear(self) -> None:
        self.n = 0
        self.head = 0


class DdpgAgent:
    def __init__(self, cfg: AgentConfig, rng: np.random.Generator):
        self.cfg = cfg
        dtype = cfg.np_dtype()
        self.actor = Mlp((STATE_DIM, *cfg.hidden, ACTION_DIM), output="tanh",
                         rng=rng, final_scale=1e-3, dtype=dtype)
        self.critic = Mlp((STATE_DIM + ACTION_DIM, *cfg.hidden, 1), output="identity",
                          rng=rng, dtype=dtype)
        self.actor_target = self.actor.copy()
        self.critic_target = self.critic.copy()
        self.adam_actor = Adam(self.actor.params, cfg.actor_lr)
        self.adam_critic = Adam(self.critic.params, cfg.critic_lr)

    def act(self, state, sigma: float = 0.0, rng: np.random.Generator | None = None):
        """Normalized action for one state, with optional exploration noise
        added before the denormalizing squash."""
        u = np.asarray(self.actor.forward(state), dtype=float)
        if sigma > 0.0:
            if rng is None:
                raise ValueError("exploration noise needs an rng")
            u = u + sigma * rng.standard_normal(ACTION_DIM)
        u = np.clip(u, -1.0, 1.0)
        raw = denormalize_action(u, direction=float(state[0]))
        return u, raw

    def critic_update(self, batch) -> float:
        s, a, r, s2, done = batch
        dtype = self.cfg.np_dtype()
        s = s.astype(dtype, copy=False)
        a2 = self.actor_target.forward(s2.astype(dtype, copy=False))
        q2 = self.critic_target.forward(np.concatenate([s2.astype(dtype, copy=False), a2], axis=1))[:, 0]
        y = r.astype(dtype, copy=False) + self.cfg.gamma * (1.0 - done.astype(dtype, copy=False)) * q2
        q, cache = self.critic.forward(np.concatenate([s, a.astype(dtype, copy=False)], axis=1), want_cache=True)
        err = q[:, 0] - y
        gout = (2.0 / err.shape[0]) * err[:, None]
        grads, _ = self.critic.backward(cache, gout)
        self.adam_critic.step(self.critic.params, grads)
        return float(np.mean(err * err))

    def actor_update(self, batch) -> float:
        """Ascend mean Q(s, pi(s)); only actor parameters move."""
        s = batch[0].astype(self.cfg.np_dtype(), copy=False)
        a, a_cache = self.actor.forward(s, want_cache=True)
        q, c_cache = self.critic.forward(np.concatenate([s, a], axis=1), want_cache=True)
        gout = np.full((s.shape[0], 1), -1.0 / s.shape[0], dtype=a.dtype)
        _, gin = self.critic.backward(c_cache, gout)
        grads, _ = self.actor.backward(a_cache, gin[:, STATE_DIM:])
        self.adam_actor.step(self.actor.params, grads)
        return float(q.mean())

    def update_targets(self) -> None:
        soft_update(self.actor_target.params, self.actor.params, self.cfg.tau)
        soft_update(self.critic_target.params, self.critic.params, self.cfg.tau)

    def named_arrays(self) -> dict[str, np.ndarray]:
        out = {}
        for prefix, net in (("actor", self.actor), ("critic", self.critic),
                            ("actor_target", self.actor_target), ("critic_target", self.critic_target)):
            for k, v in net.params.items():
                out[f"{prefix}.{k}"] = v
        return out

    def load_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        for prefix, net in (("actor", self.actor), ("critic", self.critic),
                            ("actor_target", self.actor_target), ("critic_target", self.critic_target)):
            for k, dst in net.params.items():
                dst[...] = arrays[f"{prefix}.{k}"].astype(dst.dtype)
