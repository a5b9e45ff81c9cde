"""Acceptance suite: the ten headline behaviors, one verdict line each.

Heavy artifacts are built once per session and shared: three full policy
training runs (criteria 7-9) and one recurrent-regressor fit on 20k
simulated traces (criteria 6 and 9).  Expect the whole file to take
about half an hour single-threaded; each criterion with a runtime
budget asserts it.
"""

import sys
import time

import numpy as np
import pytest
from click.testing import CliRunner

from slidelab.cli import main as cli_main
from slidelab.config import RunConfig
from slidelab.dynamics import FrictionModel, simulate_closed_form
from slidelab.errors import RomExceeded, Unreachable
from slidelab.estimation import (
    AnalyticalFrictionEstimator,
    EstimateInput,
    LstmFrictionRegressor,
    gen_dataset,
)
from slidelab.harness import (
    experiment_closed_loop,
    experiment_estimator_accuracy,
    experiment_mu_sweep,
    policy_first_step,
)
from slidelab.maneuver import (
    ACCEL_MAX,
    RawAction,
    build_velocity_profile,
    validate_action,
)
from slidelab.nn import LstmStack, Mlp
from slidelab.optimal import optimal_action
from slidelab.oracle import simulate_numeric
from slidelab.training import eval_medians, load_policy, train_ddpg

SEEDS = (0, 1, 2)


def _live(msg: str) -> None:
    # bypass pytest capture so long fixtures show progress
    print(msg, file=sys.__stdout__, flush=True)


@pytest.fixture
def verdict(capsys):
    def emit(n, ok, detail):
        with capsys.disabled():
            print(f"\ncriterion {n}: {'PASS' if ok else 'FAIL'} ({detail})")
        assert ok, f"criterion {n}: {detail}"
    return emit


def random_action(rng, cap_duration=None):
    a_i = rng.uniform(0.3, ACCEL_MAX) * rng.choice([-1.0, 1.0])
    a_m = -np.sign(a_i) * rng.uniform(0.3, ACCEL_MAX)
    hi = 1.9
    if cap_duration is not None:
        hi = min(hi, cap_duration / (1.0 + abs(a_m / a_i)))
    t_m = rng.uniform(0.1, hi)
    return validate_action(RawAction(a_i, a_m, t_m))


# ------------------------------------------------------------------ 1


def test_criterion_01_oracle_equivalence(verdict):
    rng = np.random.default_rng(42)
    # warm the jitted integrator outside the measured window
    warm = validate_action(RawAction(2.0, -2.0, 0.5))
    simulate_numeric(build_velocity_profile(warm), FrictionModel.from_mu(0.2),
                     dt=1e-6, sample_rate=None)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(1000):
        act = random_action(rng, cap_duration=2.5)
        f = FrictionModel.from_mu(rng.uniform(0.05, 0.45))
        prof = build_velocity_profile(act)
        exact = simulate_closed_form(prof, f, sample_rate=None)
        approx = simulate_numeric(prof, f, dt=1e-6, sample_rate=None)
        worst = max(worst, abs(exact.delta_x_rel - approx.delta_x_rel))
    elapsed = time.perf_counter() - t0
    verdict(1, worst < 1e-4 and elapsed < 120.0,
            f"1000 cases, max |dx diff| {worst:.2e} m (< 1e-4), {elapsed:.1f}s (< 120s)")


# ------------------------------------------------------------------ 2


def test_criterion_02_maneuver_closure(verdict):
    rng = np.random.default_rng(7)
    worst_v_mid = worst_v_end = worst_x_end = 0.0
    for _ in range(1000):
        a_i = rng.uniform(0.05, ACCEL_MAX) * rng.choice([-1.0, 1.0])
        a_m = -np.sign(a_i) * rng.uniform(0.05, ACCEL_MAX)
        act = validate_action(RawAction(a_i, a_m, rng.uniform(1e-3, 1.999)))
        segs = build_velocity_profile(act).segments
        worst_v_mid = max(worst_v_mid, abs(segs[1].v_end))
        worst_v_end = max(worst_v_end, abs(segs[3].v_end))
        worst_x_end = max(worst_x_end, abs(segs[3].x_end))
    ok = max(worst_v_mid, worst_v_end, worst_x_end) < 1e-9
    verdict(2, ok, f"1000 actions, |v_mid| {worst_v_mid:.1e}, |v_end| {worst_v_end:.1e}, "
                   f"|x_end| {worst_x_end:.1e} (all < 1e-9)")


# ------------------------------------------------------------------ 3


def test_criterion_03_optimal_controller_grid(verdict):
    worst = 0.0
    failures = []
    n_ok = 0
    for mu in np.arange(0.05, 0.3501, 0.05):
        f = FrictionModel.from_mu(float(mu))
        for d in np.arange(0.02, 0.2001, 0.02):
            d = float(d)
            try:
                act = optimal_action(d, f)
            except (RomExceeded, Unreachable) as exc:
                failures.append(f"(d={d:.2f}, mu={mu:.2f}: {type(exc).__name__})")
                continue
            got = simulate_closed_form(build_velocity_profile(act), f,
                                       sample_rate=None).delta_x_rel
            worst = max(worst, abs(got - d))
            n_ok += 1
    verdict(3, worst < 1e-4,
            f"{n_ok} grid cells, worst |dx - d| {worst:.2e} m (< 1e-4); "
            f"feasibility failures: {', '.join(failures) if failures else 'none'}")


# ------------------------------------------------------------------ 4


def _grad_probes(net, x, grads, loss, rng, per_array):
    errs = []
    for name, g in grads.items():
        for idx in rng.integers(0, g.size, size=per_array):
            p = net.params[name]
            old = p.flat[idx]
            eps = 1e-6
            p.flat[idx] = old + eps
            lp = loss()
            p.flat[idx] = old - eps
            lm = loss()
            p.flat[idx] = old
            num = (lp - lm) / (2.0 * eps)
            errs.append(abs(num - g.flat[idx]) / max(1e-8, abs(num) + abs(g.flat[idx])))
    return np.array(errs)


def test_criterion_04_gradient_checks(verdict):
    rng = np.random.default_rng(11)
    mlp = Mlp([6, 24, 16, 1], rng=rng, dtype=np.float64)
    x = rng.normal(size=(5, 6))
    y, cache = mlp.forward(x, want_cache=True)
    g_mlp, _ = mlp.backward(cache, 2.0 * y)
    mlp_errs = _grad_probes(mlp, x, g_mlp,
                            lambda: float(np.sum(mlp.forward(x) ** 2)), rng, 20)

    lstm = LstmStack(2, (8, 6), (5,), rng=rng, dtype=np.float64)
    xs = rng.normal(size=(4, 9, 2))
    ys, cache = lstm.forward(xs, want_cache=True)
    g_lstm = lstm.backward(cache, 2.0 * ys)
    lstm_errs = _grad_probes(lstm, xs, g_lstm,
                             lambda: float(np.sum(lstm.forward(xs) ** 2)), rng, 12)

    ok = (mlp_errs.size >= 100 and lstm_errs.size >= 100
          and mlp_errs.max() < 1e-4 and lstm_errs.max() < 1e-3)
    verdict(4, ok, f"mlp {mlp_errs.size} probes max rel err {mlp_errs.max():.1e} (< 1e-4); "
                   f"lstm {lstm_errs.size} probes max rel err {lstm_errs.max():.1e} (< 1e-3)")


# ------------------------------------------------------------------ 5


def test_criterion_05_analytical_estimator_round_trip(verdict):
    rng = np.random.default_rng(23)
    est = AnalyticalFrictionEstimator()
    worst = 0.0
    n = 0
    attempts = 0
    while n < 500 and attempts < 20000:
        attempts += 1
        mu = rng.uniform(0.05, 0.42)
        f = FrictionModel.from_mu(mu)
        static = f.mu_s * f.g
        a_i_mag = rng.uniform(min(1.1 * static, ACCEL_MAX - 1e-6), ACCEL_MAX)
        t_m = rng.uniform(0.3, 1.2)
        a_m_cap = min(ACCEL_MAX, a_i_mag * (2.0 / t_m - 1.0))
        if a_m_cap <= 0.3:
            continue
        a_m_mag = rng.uniform(0.3, a_m_cap)
        sgn = rng.choice([-1.0, 1.0])
        act = validate_action(RawAction(sgn * a_i_mag, -sgn * a_m_mag, t_m))
        res = simulate_closed_form(build_velocity_profile(act), f, sample_rate=None)
        launch_slip, _ = res.relative_at(np.array([act.t_i]))
        if abs(float(launch_slip[0])) <= 0.01:
            continue
        got = est.estimate(EstimateInput.from_result(res))
        worst = max(worst, abs(got.mu - mu))
        n += 1
    verdict(5, n == 500 and worst < 0.01,
            f"{n} launch-slip traces, worst |mu_est - mu_true| {worst:.2e} (< 0.01)")


# ------------------------------------------------- shared heavy fixtures


@pytest.fixture(scope="module")
def trained_policies(tmp_path_factory):
    root = tmp_path_factory.mktemp("policies")
    runs = []
    for seed in SEEDS:
        cfg = RunConfig(seed=seed)
        _live(f"[acceptance] training policy seed {seed} ...")
        t0 = time.perf_counter()
        result = train_ddpg(cfg, root / f"seed{seed}")
        minutes = (time.perf_counter() - t0) / 60.0
        path = result.best_checkpoint_path or result.checkpoint_path
        agent, _ = load_policy(path)
        m_exact, m_off = eval_medians(agent, cfg.env)
        _live(f"[acceptance] seed {seed}: {minutes:.1f} min, median err "
              f"{m_exact * 100:.2f} cm exact / {m_off * 100:.2f} cm offset")
        runs.append({"seed": seed, "agent": agent, "path": path, "minutes": minutes,
                     "m_exact": m_exact, "m_off": m_off,
                     "score": max(m_exact / 0.010, m_off / 0.015)})
    return runs


@pytest.fixture(scope="module")
def best_policy(trained_policies):
    return min(trained_policies, key=lambda r: r["score"])


@pytest.fixture(scope="module")
def closed_loop_policy(trained_policies, best_policy):
    # the mismatched-estimate scenario exercises the estimators only when
    # the uncorrected first step misses; among seeds that meet the accuracy
    # bars, take the best-scored one that leaves a correction to make
    cfg = RunConfig()
    p, h = cfg.env, cfg.harness
    passing = [r for r in trained_policies
               if r["m_exact"] <= 0.010 + 1e-12 and r["m_off"] <= 0.015 + 1e-12]
    for r in sorted(passing or trained_policies, key=lambda r: r["score"]):
        delta, _ = policy_first_step(r["agent"], p, p.fixed_d,
                                     h.closed_loop_mu_k, h.closed_loop_mu_e)
        if abs(p.fixed_d - delta) > p.success_tol:
            return r
    return best_policy


@pytest.fixture(scope="module")
def lstm_regressor():
    cfg = RunConfig()
    e = cfg.estimation
    _live(f"[acceptance] fitting lstm {e.hidden_sizes} on {e.dataset_n} traces ...")
    t0 = time.perf_counter()
    train = gen_dataset(e.dataset_n, rate=e.rate, seed=101, pad_to=e.window)
    reg = LstmFrictionRegressor(**e.regressor_kwargs(0))
    reg.fit(train.series, train.labels)
    minutes = (time.perf_counter() - t0) / 60.0
    held = gen_dataset(2000, rate=e.rate, seed=202, pad_to=e.window)
    mae = float(np.mean(np.abs(reg.predict(held.series) - held.labels)))
    _live(f"[acceptance] lstm fit {minutes:.1f} min, held-out MAE {mae:.4f}")
    return {"reg": reg, "mae": mae, "minutes": minutes}


# ------------------------------------------------------------------ 6


def test_criterion_06_lstm_estimator(verdict, lstm_regressor, best_policy):
    mae = lstm_regressor["mae"]
    minutes = lstm_regressor["minutes"]
    rep = experiment_estimator_accuracy(best_policy["agent"], RunConfig(),
                                        lstm_regressor["reg"])
    corr_lstm = rep.summary.get("mean_correction_lstm")
    corr_ana = rep.summary.get("mean_correction_analytical")
    ok = mae < 0.03 and corr_lstm is not None and corr_lstm > 0.5 and minutes < 30.0
    # lstm-vs-analytical ordering recorded, not gated: branch 1 is exact here
    verdict(6, ok, f"held-out MAE {mae:.4f} (< 0.03), mean correction lstm "
                   f"{corr_lstm:.3f} (> 0.5) vs analytical {corr_ana:.3f} [recorded], "
                   f"fit {minutes:.1f} min (< 30)")


# ------------------------------------------------------------------ 7


def test_criterion_07_policy_accuracy(verdict, trained_policies, best_policy):
    all3 = "; ".join(
        f"seed {r['seed']}: {r['m_exact'] * 100:.2f}/{r['m_off'] * 100:.2f} cm "
        f"in {r['minutes']:.0f} min" for r in trained_policies)
    b = best_policy
    ok = (b["m_exact"] <= 0.010 + 1e-12 and b["m_off"] <= 0.015 + 1e-12
          and all(r["minutes"] < 45.0 for r in trained_policies))
    verdict(7, ok, f"best seed {b['seed']}: median {b['m_exact'] * 100:.2f} cm exact "
                   f"(<= 1.0), {b['m_off'] * 100:.2f} cm offset (<= 1.5); all-3: {all3}")


# ------------------------------------------------------------------ 8


def test_criterion_08_robustness_vs_optimal(verdict, best_policy):
    rep = experiment_mu_sweep(best_policy["agent"], RunConfig())
    pol = rep.summary["policy_mean_err_band"]
    opt = rep.summary["opt_mean_err_band"]
    dead = sum(s["policy_dead_zones_within_0.05"] for s in rep.summary["surfaces"].values())
    ok = pol is not None and opt is not None and pol < opt and dead == 0
    verdict(8, ok, f"band |mu_e-mu_k| in [0.05,0.08]: policy mean err {pol * 100:.2f} cm "
                   f"< optimal {opt * 100:.2f} cm; dead zones within 0.05: {dead} (= 0)")


# ------------------------------------------------------------------ 9


def test_criterion_09_closed_loop_estimator_benefit(verdict, closed_loop_policy,
                                                    lstm_regressor):
    cfg = RunConfig()
    rep = experiment_closed_loop(closed_loop_policy["agent"], cfg, lstm_regressor["reg"])
    s = rep.summary
    steps = {arm: s[arm]["median_steps"] for arm in ("none", "analytical", "lstm")}
    errs = {arm: s[arm]["mean_second_err"] for arm in ("none", "analytical", "lstm")}
    ok = (steps["analytical"] <= steps["none"] and steps["lstm"] <= steps["none"]
          and errs["analytical"] < errs["none"] and errs["lstm"] < errs["none"])
    verdict(9, ok, f"seed {closed_loop_policy['seed']}; median steps none "
                   f"{steps['none']:.1f} vs analytical {steps['analytical']:.1f} / lstm "
                   f"{steps['lstm']:.1f}; second-step err none {errs['none'] * 100:.2f} cm "
                   f"vs analytical {errs['analytical'] * 100:.2f} / lstm "
                   f"{errs['lstm'] * 100:.2f} cm")


# ----------------------------------------------------------------- 10


def test_criterion_10_cli_determinism(verdict, best_policy, tmp_path):
    runner = CliRunner()
    outs = []
    for sub in ("a", "b"):
        out = tmp_path / sub
        res = runner.invoke(cli_main, ["eval", "sweep-distance",
                                       "--policy", str(best_policy["path"]),
                                       "--seed", "12", "--out-dir", str(out)],
                            catch_exceptions=False)
        assert res.exit_code == 0, res.output
        outs.append((out / "sweep_distance.csv").read_bytes())
    csv_same = outs[0] == outs[1]

    traces = []
    for sub in ("c", "d"):
        path = tmp_path / f"{sub}.csv"
        res = runner.invoke(cli_main, ["simulate", "--a-i", "3.3", "--a-m", "-3.9",
                                       "--t-m", "0.9", "--mu", "0.21",
                                       "--out", str(path)], catch_exceptions=False)
        assert res.exit_code == 0, res.output
        traces.append(path.read_bytes())
    sim_same = traces[0] == traces[1]
    verdict(10, csv_same and sim_same,
            f"eval rerun CSV identical: {csv_same}; simulate rerun CSV identical: {sim_same}")
