"""Evaluation experiments and report files.

Each experiment produces an ExperimentReport: a flat record table plus a
summary, written as JSON (with the resolved config and the content hashes
of every checkpoint involved) and as CSV.  All randomness flows from the
seed in the config, so a rerun of the same command writes identical CSVs.
"""

from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import checkpoint
from .config import RunConfig, config_to_dict
from .ddpg import DdpgAgent
from .dynamics import simulate_closed_form
from .environment import EnvParams, SlidingEnv, Stage, assemble_state
from .errors import ActionValidationError, PadTooShort, SlideError
from .estimation import (
    AnalyticalFrictionEstimator,
    EstimateInput,
    LstmFrictionRegressor,
    SLIP_DISPLACEMENT_THRESHOLD,
    correction_metric,
)
from .maneuver import CSV_FLOAT_FMT, build_velocity_profile, validate_action
from .optimal import optimal_action
from .training import load_policy

__all__ = [
    "ExperimentReport", "policy_first_step", "experiment_mu_sweep",
    "experiment_distance_sweep", "experiment_estimator_accuracy",
    "run_closed_loop", "experiment_closed_loop", "load_policy",
]


@dataclass
class ExperimentReport:
    experiment: str
    records: list[dict]
    summary: dict
    config: dict
    checkpoints: dict[str, str] = field(default_factory=dict)
    runtime_s: float = 0.0

    def write(self, out_dir, name: str | None = None) -> tuple[Path, Path]:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        name = name or self.experiment
        json_path = out_dir / f"{name}.json"
        csv_path = out_dir / f"{name}.csv"
        with open(json_path, "w") as fh:
            json.dump({
                "experiment": self.experiment, "summary": self.summary,
                "config": self.config, "checkpoints": self.checkpoints,
                "runtime_s": self.runtime_s, "records": self.records,
            }, fh, indent=1, sort_keys=True)
            fh.write("\n")
        with open(csv_path, "w", newline="") as fh:
            if self.records:
                cols = list(self.records[0].keys())
                w = csv.writer(fh)
                w.writerow(cols)
                for rec in self.records:
                    w.writerow([_cell(rec.get(c)) for c in cols])
        return json_path, csv_path


def _cell(value):
    if isinstance(value, float):
        return CSV_FLOAT_FMT % value
    if value is None:
        return ""
    return value


def policy_first_step(agent: DdpgAgent, p: EnvParams, d_des: float, mu_k: float,
                      mu_e: float, trace_rate: float | None = None):
    """One noise-free policy step on a fresh episode.

    Returns (delta_x, result-or-None); an invalid action counts as zero
    displacement.
    """
    state = assemble_state(d_des, [], mu_e)
    _, raw = agent.act(state)
    try:
        action = validate_action(raw)
    except ActionValidationError:
        return 0.0, None
    result = simulate_closed_form(build_velocity_profile(action), p.friction(mu_k),
                                  sample_rate=trace_rate)
    return result.delta_x_rel, result


def _grid(lo: float, hi: float, step: float) -> np.ndarray:
    n = int(round((hi - lo) / step))
    return lo + step * np.arange(n + 1)


def experiment_mu_sweep(agent: DdpgAgent, cfg: RunConfig) -> ExperimentReport:
    """First-step error of policy and model-based baseline across a grid of
    friction estimates, on each test surface."""
    t0 = time.perf_counter()
    p = cfg.env
    h = cfg.harness
    records = []
    for mu_k in h.surfaces:
        for mu_e in _grid(*h.mu_e_grid):
            d = p.fixed_d
            delta, _ = policy_first_step(agent, p, d, mu_k, float(mu_e))
            rec = {
                "mu_k": float(mu_k), "mu_e": float(mu_e), "d_des": d,
                "policy_delta": float(delta), "policy_err": float(abs(d - delta)),
                "policy_dead": int(abs(delta) < h.deadzone_m),
            }
            try:
                opt = optimal_action(d, p.friction(float(mu_e)), rom_max=p.rom_max)
                res = simulate_closed_form(build_velocity_profile(opt), p.friction(mu_k),
                                           sample_rate=None)
                rec.update({
                    "opt_delta": float(res.delta_x_rel),
                    "opt_err": float(abs(d - res.delta_x_rel)),
                    "opt_dead": int(abs(res.delta_x_rel) < h.deadzone_m),
                    "opt_failure": "",
                })
            except SlideError as exc:
                rec.update({"opt_delta": None, "opt_err": None, "opt_dead": None,
                            "opt_failure": type(exc).__name__})
            records.append(rec)
    summary = _mu_sweep_summary(records, h.deadzone_m)
    return ExperimentReport("sweep_mu", records, summary, config_to_dict(cfg),
                            runtime_s=time.perf_counter() - t0)


def _mu_sweep_summary(records: list[dict], deadzone_m: float) -> dict:
    by_surface = {}
    for rec in records:
        by_surface.setdefault(rec["mu_k"], []).append(rec)
    summary: dict = {"surfaces": {}}
    band_policy, band_opt = [], []
    for mu_k, recs in by_surface.items():
        close = [r for r in recs if abs(r["mu_e"] - mu_k) <= 0.05 + 1e-9]
        band = [r for r in recs if 0.05 - 1e-9 <= abs(r["mu_e"] - mu_k) <= 0.08 + 1e-9]
        band_policy.extend(r["policy_err"] for r in band)
        band_opt.extend(r["opt_err"] for r in band if r["opt_err"] is not None)
        summary["surfaces"][f"{mu_k:.2f}"] = {
            "policy_dead_zones_within_0.05": int(sum(r["policy_dead"] for r in close)),
            "policy_mean_err_within_0.05": float(np.mean([r["policy_err"] for r in close])),
            "policy_mean_err_band_0.05_0.08": float(np.mean([r["policy_err"] for r in band])) if band else None,
            "opt_mean_err_band_0.05_0.08": (
                float(np.mean([r["opt_err"] for r in band if r["opt_err"] is not None]))
                if any(r["opt_err"] is not None for r in band) else None),
        }
    summary["policy_mean_err_band"] = float(np.mean(band_policy)) if band_policy else None
    summary["opt_mean_err_band"] = float(np.mean(band_opt)) if band_opt else None
    summary["deadzone_m"] = deadzone_m
    return summary


def experiment_distance_sweep(agent: DdpgAgent, cfg: RunConfig) -> ExperimentReport:
    """First-step accuracy across the distance range, with the friction
    estimate exact or off by a fixed offset."""
    t0 = time.perf_counter()
    p = cfg.env
    h = cfg.harness
    mu_k = p.fixed_mu
    records = []
    for off in h.offsets:
        mu_e = float(np.clip(mu_k + off, *p.mu_clamp))
        for d in _grid(*h.distances):
            d = float(d)
            delta, _ = policy_first_step(agent, p, d, mu_k, mu_e)
            records.append({
                "d_des": d, "offset": float(off), "mu_k": mu_k, "mu_e": mu_e,
                "delta": float(delta), "err": float(abs(d - delta)),
                "accuracy": float(np.clip(1.0 - abs(delta - d) / abs(d), 0.0, 1.0)),
            })
    summary = {}
    for off in h.offsets:
        errs = [r["err"] for r in records if r["offset"] == float(off)]
        summary[f"median_err_offset_{off:+.2f}"] = float(np.median(errs))
    return ExperimentReport("sweep_distance", records, summary, config_to_dict(cfg),
                            runtime_s=time.perf_counter() - t0)


def experiment_estimator_accuracy(agent: DdpgAgent, cfg: RunConfig,
                                  lstm: LstmFrictionRegressor | None = None) -> ExperimentReport:
    """Correction quality of the estimators on traces produced by the
    policy acting under a wrong friction estimate."""
    t0 = time.perf_counter()
    p = cfg.env
    h = cfg.harness
    est = AnalyticalFrictionEstimator(g=p.g)
    rate, window = cfg.estimation.rate, cfg.estimation.window
    records = []
    mu_k = h.closed_loop_mu_k
    for off in h.estimator_offsets:
        for sign in (1.0, -1.0):
            mu_e = float(np.clip(mu_k + sign * off, *p.mu_clamp))
            if abs(mu_e - mu_k) < 1e-9:
                continue
            _, result = policy_first_step(agent, p, p.fixed_d, mu_k, mu_e, trace_rate=rate)
            base = {"mu_k": mu_k, "mu_e": mu_e, "offset": float(sign * off)}
            if result is None:
                continue
            try:
                inp = EstimateInput.from_result(result, rate=rate, pad_to=window)
            except PadTooShort:
                records.append({**base, "method": "analytical", "mu_est": None,
                                "correction": None, "branch": None, "confidence": "no-trace"})
                continue
            a = est.estimate(inp)
            records.append({**base, "method": "analytical", "mu_est": a.mu,
                            "correction": correction_metric(mu_k, mu_e, a.mu),
                            "branch": a.branch, "confidence": a.confidence})
            if lstm is not None:
                mu_hat = lstm.predict_one(inp.trace)
                records.append({**base, "method": "lstm", "mu_est": mu_hat,
                                "correction": correction_metric(mu_k, mu_e, mu_hat),
                                "branch": None, "confidence": ""})
    summary = {}
    for method in ("analytical", "lstm"):
        vals = [r["correction"] for r in records if r["method"] == method and r["correction"] is not None]
        if vals:
            summary[f"mean_correction_{method}"] = float(np.mean(vals))
    summary["fallback_fraction"] = float(np.mean(
        [r["branch"] == 3 for r in records if r["method"] == "analytical"])) if records else None
    return ExperimentReport("estimators", records, summary, config_to_dict(cfg),
                            runtime_s=time.perf_counter() - t0)


def run_closed_loop(agent: DdpgAgent, p: EnvParams, *, d_des: float, mu_k: float,
                    mu_e: float, estimator=None, rate: float = 50.0, window: float = 2.0,
                    rng: np.random.Generator | None = None) -> dict:
    """One full episode; when an estimator is attached the friction estimate
    in the state is refreshed from each step's trace.  Updates the trace
    cannot support are skipped: low-confidence analytical estimates, and
    regressor calls on maneuvers whose launch never slipped (outside its
    training data)."""
    if rng is None:
        rng = np.random.default_rng(0)
    env = SlidingEnv(p, rng)
    env.reset(Stage.DR2, d_des=d_des, mu_k=mu_k, mu_e=mu_e)
    errors, mu_path = [], [mu_e]
    done = False
    while not done:
        state = env.state()
        _, raw = agent.act(state)
        _, _, done, info = env.step(raw)
        errors.append(abs(float(env.d_remaining)))
        if estimator is not None and info["result"] is not None and not done:
            try:
                inp = EstimateInput.from_result(info["result"], rate=rate, pad_to=window)
            except PadTooShort:
                mu_path.append(env.episode.mu_e_given)
                continue
            launch_slip = abs(inp.boundary_x[1] - inp.boundary_x[0])
            if isinstance(estimator, LstmFrictionRegressor):
                if launch_slip > SLIP_DISPLACEMENT_THRESHOLD:
                    env.set_mu_estimate(float(estimator.predict_one(inp.trace)))
            else:
                out = estimator.estimate(inp)
                if out.confidence == "high":
                    env.set_mu_estimate(out.mu)
            mu_path.append(float(env.episode.mu_e_given))
    return {"steps": env.step_count, "success": bool(info["success"]),
            "errors": errors, "mu_path": mu_path}


def experiment_closed_loop(agent: DdpgAgent, cfg: RunConfig,
                           lstm: LstmFrictionRegressor | None = None) -> ExperimentReport:
    """Steps-to-success with and without in-the-loop friction estimation on
    the mismatched-estimate scenario."""
    t0 = time.perf_counter()
    p = cfg.env
    h = cfg.harness
    arms: list[tuple[str, object]] = [("none", None), ("analytical", AnalyticalFrictionEstimator(g=p.g))]
    if lstm is not None:
        arms.append(("lstm", lstm))
    env_trace = EnvParams(**{**vars(p), "trace_rate": cfg.estimation.rate})
    records = []
    for arm, estimator in arms:
        for ep in range(h.closed_loop_episodes):
            out = run_closed_loop(agent, env_trace, d_des=p.fixed_d, mu_k=h.closed_loop_mu_k,
                                  mu_e=h.closed_loop_mu_e, estimator=estimator,
                                  rate=cfg.estimation.rate, window=cfg.estimation.window,
                                  rng=np.random.default_rng(cfg.seed + ep))
            records.append({
                "arm": arm, "episode": ep, "steps": out["steps"], "success": int(out["success"]),
                "first_err": out["errors"][0],
                "second_err": out["errors"][1] if len(out["errors"]) > 1 else out["errors"][-1],
                "final_err": out["errors"][-1],
                "mu_final": out["mu_path"][-1],
            })
    summary = {}
    for arm, _ in arms:
        recs = [r for r in records if r["arm"] == arm]
        summary[arm] = {
            "median_steps": float(np.median([r["steps"] for r in recs])),
            "mean_second_err": float(np.mean([r["second_err"] for r in recs])),
            "success_rate": float(np.mean([r["success"] for r in recs])),
        }
    return ExperimentReport("closed_loop", records, summary, config_to_dict(cfg),
                            runtime_s=time.perf_counter() - t0)
