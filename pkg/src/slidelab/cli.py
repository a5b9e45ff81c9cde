"""Command-line interface.

Every command draws all randomness from one seed (from the config or the
command line), so rerunning the same invocation reproduces its output
files byte for byte.  Failures exit nonzero with a one-line JSON error on
stderr.
"""

from __future__ import annotations

import functools
import json
import sys
from pathlib import Path

import click
import numpy as np

from . import checkpoint
from .config import load_config, print_config
from .dynamics import FrictionModel, simulate_closed_form, write_event_log
from .errors import SlideError
from .estimation import (
    AnalyticalFrictionEstimator,
    EstimateInput,
    FrictionDataset,
    LstmFrictionRegressor,
    gen_dataset,
)
from .harness import (
    experiment_closed_loop,
    experiment_distance_sweep,
    experiment_estimator_accuracy,
    experiment_mu_sweep,
)
from .maneuver import RawAction, build_velocity_profile, validate_action
from .training import load_policy, train_ddpg


def _fail(exc: BaseException) -> None:
    click.echo(json.dumps({"error": type(exc).__name__, "message": str(exc)}), err=True)
    sys.exit(1)


def guarded(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (SlideError, OSError, ValueError) as exc:
            _fail(exc)
    return wrapper


@click.group()
def main():
    """Sliding-manipulation simulator, friction estimators and policy tools."""


@main.command("print-config")
@click.option("--config", "config_path", type=click.Path(), default=None, help="JSON config file")
@guarded
def print_config_cmd(config_path):
    """Print the fully resolved configuration."""
    click.echo(print_config(load_config(config_path)))


@main.command("train-ddpg")
@click.option("--config", "config_path", type=click.Path(), default=None)
@click.option("--resume", type=click.Path(), default=None, help="policy checkpoint to continue from")
@click.option("--seed", type=int, default=None, help="override the config seed")
@click.option("--out-dir", type=click.Path(), default=None, help="override the config out_dir")
@guarded
def train_ddpg_cmd(config_path, resume, seed, out_dir):
    """Train the maneuver policy through the curriculum."""
    cfg = load_config(config_path)
    if seed is not None:
        cfg.seed = seed
    if out_dir is not None:
        cfg.out_dir = out_dir
    def progress(episode, steps, stage, err):
        click.echo(f"episode {episode} steps {steps} stage {stage.value} eval_err {err:.4f}")
    result = train_ddpg(cfg, cfg.out_dir, resume=resume, progress=progress)
    click.echo(json.dumps({
        "steps": result.steps, "episodes": result.episodes,
        "final_stage": result.final_stage.value,
        "best_eval_error": result.best_eval_error,
        "checkpoint": str(result.checkpoint_path),
        "best_checkpoint": str(result.best_checkpoint_path) if result.best_checkpoint_path else None,
        "log": str(result.log_path),
        "stages": result.stage_history,
    }))


@main.command("gen-dataset")
@click.option("--n", type=int, required=True)
@click.option("--out", "out_path", type=click.Path(), required=True)
@click.option("--seed", type=int, default=0)
@click.option("--config", "config_path", type=click.Path(), default=None)
@guarded
def gen_dataset_cmd(n, out_path, seed, config_path):
    """Generate a simulated trace dataset for estimator training."""
    cfg = load_config(config_path)
    ds = gen_dataset(n, rate=cfg.estimation.rate, seed=seed, pad_to=cfg.estimation.window,
                     mu_range=tuple(cfg.env.mu_range), slip_fraction=cfg.estimation.slip_bias,
                     g=cfg.env.g, mu_ratio=cfg.env.mu_ratio)
    ds.save(out_path)
    click.echo(json.dumps({"n": len(ds), "slip_fraction": ds.slip_fraction,
                           "path": str(out_path)}))


@main.command("train-lstm")
@click.option("--dataset", "dataset_path", type=click.Path(), required=True)
@click.option("--config", "config_path", type=click.Path(), default=None)
@click.option("--out", "out_path", type=click.Path(), default=None, help="checkpoint path (.json)")
@guarded
def train_lstm_cmd(dataset_path, config_path, out_path):
    """Train the recurrent friction regressor on a generated dataset."""
    cfg = load_config(config_path)
    ds = FrictionDataset.load(dataset_path)
    reg = LstmFrictionRegressor(verbose=True, **cfg.estimation.regressor_kwargs(cfg.seed))
    reg.fit(ds.series, ds.labels)
    out_path = out_path or str(Path(cfg.out_dir) / "lstm.json")
    reg.save(out_path)
    click.echo(json.dumps({"val_mae": reg.val_mae_, "epochs": len(reg.history_),
                           "checkpoint": str(out_path)}))


@main.command("simulate")
@click.option("--a-i", type=float, required=True)
@click.option("--a-m", type=float, required=True)
@click.option("--t-m", type=float, required=True)
@click.option("--mu", type=float, required=True, help="kinetic friction coefficient")
@click.option("--mu-ratio", type=float, default=1.0, help="mu_s / mu_k")
@click.option("--oracle", is_flag=True, help="use the fixed-step numeric integrator")
@click.option("--dt", type=float, default=1e-6, help="oracle time step")
@click.option("--rate", type=float, default=100.0, help="trace sample rate")
@click.option("--out", "out_path", type=click.Path(), default="trace.csv")
@click.option("--events-out", type=click.Path(), default=None, help="event log JSONL path")
@guarded
def simulate_cmd(a_i, a_m, t_m, mu, mu_ratio, oracle, dt, rate, out_path, events_out):
    """Simulate one maneuver and export its relative-motion trace."""
    action = validate_action(RawAction(a_i=a_i, a_m=a_m, t_m=t_m))
    profile = build_velocity_profile(action)
    f = FrictionModel.from_mu(mu, ratio=mu_ratio)
    if oracle:
        from .oracle import simulate_numeric
        result = simulate_numeric(profile, f, dt=dt, sample_rate=rate)
    else:
        result = simulate_closed_form(profile, f, sample_rate=rate)
    result.trace.to_csv(out_path)
    if events_out:
        write_event_log(result.events, events_out)
    click.echo(json.dumps({
        "delta_x_rel": result.delta_x_rel, "rom": result.rom, "duration": result.duration,
        "final_v_rel": result.final_v_rel, "t_i": action.t_i,
        "events": [{"t": t, "kind": kind} for t, kind in result.events],
        "trace": str(out_path),
    }))


@main.command("estimate")
@click.option("--trace", "trace_path", type=click.Path(), required=True, help="five-column trace CSV")
@click.option("--method", type=click.Choice(["analytical", "lstm"]), required=True)
@click.option("--ckpt", type=click.Path(), default=None, help="regressor checkpoint (lstm only)")
@guarded
def estimate_cmd(trace_path, method, ckpt):
    """Estimate the friction coefficient from an exported trace."""
    if method == "analytical":
        inp = EstimateInput.from_trace_csv(trace_path)
        est = AnalyticalFrictionEstimator().estimate(inp)
        click.echo(json.dumps({"mu": est.mu, "branch": est.branch, "confidence": est.confidence}))
    else:
        if ckpt is None:
            raise SlideError("--ckpt is required for the lstm method")
        reg = LstmFrictionRegressor.load(ckpt)
        inp = EstimateInput.from_trace_csv(trace_path, rate=reg.rate)
        if inp.trace.shape[1] != reg.n_timesteps:
            inp.trace = inp.trace[:, :reg.n_timesteps]
        click.echo(json.dumps({"mu": reg.predict_one(inp.trace)}))


@main.group("eval")
def eval_group():
    """Evaluation experiments; each writes a JSON + CSV report."""


def _eval_options(fn):
    fn = click.option("--policy", "policy_path", type=click.Path(), required=True)(fn)
    fn = click.option("--config", "config_path", type=click.Path(), default=None)(fn)
    fn = click.option("--out-dir", type=click.Path(), default=None)(fn)
    fn = click.option("--seed", type=int, default=None)(fn)
    return fn


def _run_eval(experiment, policy_path, config_path, out_dir, seed, lstm_path=None):
    cfg = load_config(config_path)
    if seed is not None:
        cfg.seed = seed
    agent, _ = load_policy(policy_path)
    hashes = {"policy": checkpoint.content_hash(policy_path)}
    lstm = None
    if lstm_path is not None:
        lstm = LstmFrictionRegressor.load(lstm_path)
        hashes["lstm"] = checkpoint.content_hash(lstm_path)
    if experiment == "sweep-mu":
        report = experiment_mu_sweep(agent, cfg)
    elif experiment == "sweep-distance":
        report = experiment_distance_sweep(agent, cfg)
    elif experiment == "estimators":
        report = experiment_estimator_accuracy(agent, cfg, lstm)
    else:
        report = experiment_closed_loop(agent, cfg, lstm)
    report.checkpoints = hashes
    json_path, csv_path = report.write(out_dir or cfg.out_dir)
    click.echo(json.dumps({"experiment": report.experiment, "summary": report.summary,
                           "json": str(json_path), "csv": str(csv_path)}))


@eval_group.command("sweep-mu")
@_eval_options
@guarded
def eval_sweep_mu(policy_path, config_path, out_dir, seed):
    """Friction-estimate sweep against the model-based baseline."""
    _run_eval("sweep-mu", policy_path, config_path, out_dir, seed)


@eval_group.command("sweep-distance")
@_eval_options
@guarded
def eval_sweep_distance(policy_path, config_path, out_dir, seed):
    """Distance sweep with exact and offset friction estimates."""
    _run_eval("sweep-distance", policy_path, config_path, out_dir, seed)


@eval_group.command("estimators")
@_eval_options
@click.option("--lstm", "lstm_path", type=click.Path(), default=None)
@guarded
def eval_estimators(policy_path, config_path, out_dir, seed, lstm_path):
    """Estimator correction quality on mismatched-estimate traces."""
    _run_eval("estimators", policy_path, config_path, out_dir, seed, lstm_path)


@eval_group.command("closed-loop")
@_eval_options
@click.option("--lstm", "lstm_path", type=click.Path(), default=None)
@guarded
def eval_closed_loop(policy_path, config_path, out_dir, seed, lstm_path):
    """Closed-loop episodes with and without in-the-loop estimation."""
    _run_eval("closed-loop", policy_path, config_path, out_dir, seed, lstm_path)


if __name__ == "__main__":
    main()
