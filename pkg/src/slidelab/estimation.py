"""Friction estimation from a single maneuver's sensor trace.

Two estimators share the task of refining the friction coefficient after
each maneuver: a closed-form three-branch solver that inverts the
displacement relations phase by phase, and a recurrent regressor trained
on simulated traces.  Both implement the usual fit/predict surface so they
drop into standard model-selection tooling.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.exceptions import NotFittedError

from . import checkpoint
from .dynamics import (
    EVENT_REVERSAL,
    EVENT_SLIP_START,
    FrictionModel,
    RelativeTrace,
    SlideResult,
    sample_relative_trace,
    simulate_closed_form,
)
from .errors import DegenerateTrace, DivisionByZero, DimensionMismatch
from .maneuver import (
    ACCEL_MAX,
    ManeuverAction,
    RawAction,
    build_velocity_profile,
    validate_action,
)
from .nn import Adam, LstmStack

MU_CLAMP = (0.01, 0.6)
SLIP_DISPLACEMENT_THRESHOLD = 0.002  # m, minimum per-phase slip worth inverting
FALLBACK_FACTOR = 1.1


@dataclass
class EstimateInput:
    """Everything one maneuver exposes to the estimators.

    ``trace`` is the fixed-length (2, T) series of platform acceleration
    and relative velocity; ``boundary_x`` holds the relative displacement
    at (start, t_i, t_i + t_m/2, t_i + t_m, end).
    """

    trace: np.ndarray
    rate: float
    action: ManeuverAction
    boundary_x: tuple[float, float, float, float, float]
    reversal_in_midphase: bool = False

    def v_rel_at(self, t: float) -> float:
        """Relative velocity at the trace sample nearest to ``t``."""
        idx = int(np.clip(round(t * self.rate), 0, self.trace.shape[1] - 1))
        return float(self.trace[1, idx])

    @classmethod
    def from_result(cls, result: SlideResult, rate: float = 50.0, pad_to: float = 2.0) -> "EstimateInput":
        trace = sample_relative_trace(result, rate, pad_to)
        action = _action_of_profile(result.profile)
        bounds = (0.0, action.t_i, action.t_i + 0.5 * action.t_m,
                  action.t_i + action.t_m, result.duration)
        x, _ = result.relative_at(np.array(bounds))
        t_lo, t_hi = action.t_i, action.t_i + action.t_m
        reversal = any(kind == EVENT_REVERSAL and t_lo < t <= t_hi for t, kind in result.events)
        return cls(trace=trace, rate=rate, action=action,
                   boundary_x=tuple(float(v) for v in x), reversal_in_midphase=reversal)

    @classmethod
    def from_trace_csv(cls, path, rate: float | None = None) -> "EstimateInput":
        """Rebuild the estimator input from an exported five-column trace.

        The maneuver parameters are read off the acceleration channel; the
        boundary displacements come from the samples nearest each switch
        (exact when the trace includes the boundary samples, as exported
        traces do).
        """
        tr = RelativeTrace.from_csv(path)
        switches = np.flatnonzero(np.diff(tr.plat_accel) != 0.0)
        if switches.size < 2:
            raise DegenerateTrace("acceleration channel never switches; not a maneuver trace")
        # a_i -> a_m -> a_i (-> 0 if the file carries the final rest sample)
        i1 = switches[0] + 1              # first sample under a_m
        i2 = switches[1] + 1              # first sample back under a_i
        a_i = float(tr.plat_accel[0])
        a_m = float(tr.plat_accel[i1])
        t_i = float(tr.t[i1])
        t_m = float(tr.t[i2] - tr.t[i1])
        action = validate_action(RawAction(a_i=a_i, a_m=a_m, t_m=t_m))
        duration = float(tr.t[-1])
        if rate is None:
            dts = np.diff(tr.t)
            rate = 1.0 / float(np.median(dts[dts > 0]))
        n = int(round(rate * max(duration, 2.0)))
        ts = np.arange(n) / rate
        accel = np.interp(ts, tr.t, tr.plat_accel)
        v_rel = np.interp(ts, tr.t, tr.v_rel)
        trace = np.vstack([accel, v_rel])

        def x_at(t):
            return float(np.interp(t, tr.t, tr.x_rel))

        bounds = (x_at(0.0), x_at(t_i), x_at(t_i + 0.5 * t_m), x_at(t_i + t_m), x_at(duration))
        mid = (tr.t > t_i) & (tr.t <= t_i + t_m)
        v_mid = tr.v_rel[mid]
        sign_flip = np.any(v_mid[:-1] * v_mid[1:] < 0.0) if v_mid.size > 1 else False
        touched_zero = np.any((v_mid == 0.0) & (np.arange(v_mid.size) > 0)) and np.any(v_mid != 0.0)
        return cls(trace=trace, rate=rate, action=action, boundary_x=bounds,
                   reversal_in_midphase=bool(sign_flip or touched_zero))


def _action_of_profile(profile) -> ManeuverAction:
    segs = profile.segments
    return ManeuverAction(a_i=segs[0].accel, a_m=segs[1].accel,
                          t_m=segs[1].duration + segs[2].duration, t_i=segs[0].duration)


@dataclass
class AnalyticalEstimate:
    mu: float
    branch: int
    confidence: str  # "high" | "low"


class AnalyticalFrictionEstimator(BaseEstimator):
    """Three-branch closed-form friction solver.

    Branch 1 inverts the phase-1 slip displacement; branch 2 inverts the
    mid-phase displacement relation using the relative velocity entering
    the phase; branch 3 falls back to scaling the braking acceleration
    when nothing slid far enough to invert.
    """

    def __init__(self, g: float = 9.81, threshold: float = SLIP_DISPLACEMENT_THRESHOLD,
                 clamp_lo: float = MU_CLAMP[0], clamp_hi: float = MU_CLAMP[1],
                 fallback_factor: float = FALLBACK_FACTOR):
        self.g = g
        self.threshold = threshold
        self.clamp_lo = clamp_lo
        self.clamp_hi = clamp_hi
        self.fallback_factor = fallback_factor

    def fit(self, X=None, y=None):
        return self  # closed form; nothing to fit

    def estimate(self, inp: EstimateInput) -> AnalyticalEstimate:
        act = inp.action
        x0, x_ti, _, x_tm, _ = inp.boundary_x
        x1 = abs(x_ti - x0)
        d23 = abs(x_tm - x_ti)
        confidence = "low" if inp.reversal_in_midphase else "high"
        if act.t_i > 0.0 and x1 > self.threshold:
            mu = (abs(act.a_i) - 2.0 * x1 / (act.t_i * act.t_i)) / self.g
            branch = 1
            confidence = "high"
        elif d23 > self.threshold:
            v0 = abs(inp.v_rel_at(act.t_i))
            t_m = act.t_m
            mu = (abs(act.a_m) - 2.0 * (d23 - v0 * t_m) / (t_m * t_m)) / self.g
            branch = 2
        else:
            mu = self.fallback_factor * abs(act.a_m) / self.g
            branch = 3
            confidence = "low"
        return AnalyticalEstimate(mu=float(np.clip(mu, self.clamp_lo, self.clamp_hi)),
                                  branch=branch, confidence=confidence)

    def predict(self, X) -> np.ndarray:
        return np.array([self.estimate(inp).mu for inp in X])


@dataclass
class FrictionDataset:
    """Simulated maneuver traces with their true kinetic coefficients."""

    series: np.ndarray          # (n, 2, T) float32
    labels: np.ndarray          # (n,) float32
    slipped: np.ndarray         # (n,) float32, 1.0 where any slip occurred
    rate: float
    pad_to: float
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return self.series.shape[0]

    @property
    def slip_fraction(self) -> float:
        return float(self.slipped.mean())

    def save(self, path) -> None:
        meta = dict(self.meta)
        meta.update({"rate": self.rate, "pad_to": self.pad_to, "n": len(self)})
        checkpoint.save_arrays(path, {"series": self.series, "labels": self.labels,
                                      "slipped": self.slipped}, meta)

    @classmethod
    def load(cls, path) -> "FrictionDataset":
        arrays, meta = checkpoint.load_arrays(path)
        return cls(series=arrays["series"], labels=arrays["labels"], slipped=arrays["slipped"],
                   rate=float(meta["rate"]), pad_to=float(meta["pad_to"]), meta=meta)

    def split(self, fractions: tuple[float, ...], seed: int) -> list["FrictionDataset"]:
        if abs(sum(fractions) - 1.0) > 1e-9:
            raise ValueError("split fractions must sum to 1")
        n = len(self)
        order = np.random.default_rng(seed).permutation(n)
        out = []
        start = 0
        for i, frac in enumerate(fractions):
            stop = n if i == len(fractions) - 1 else start + int(round(frac * n))
            idx = order[start:stop]
            out.append(FrictionDataset(series=self.series[idx], labels=self.labels[idx],
                                       slipped=self.slipped[idx], rate=self.rate,
                                       pad_to=self.pad_to, meta=dict(self.meta)))
            start = stop
        return out


def gen_dataset(n: int, rate: float = 50.0, seed: int = 0, *, pad_to: float = 2.0,
                mu_range: tuple[float, float] = (0.05, 0.45), slip_fraction: float = 0.8,
                g: float = 9.81, mu_ratio: float = 1.0) -> FrictionDataset:
    """Sample maneuvers across the friction range, biased so most traces
    actually slip (non-slip traces carry no kinetic information)."""
    rng = np.random.default_rng(seed)
    n_t = int(round(rate * pad_to))
    series = np.zeros((n, 2, n_t), dtype=np.float32)
    labels = np.zeros(n, dtype=np.float32)
    slipped = np.zeros(n, dtype=np.float32)
    mu_breakable = ACCEL_MAX / (1.05 * mu_ratio * g)   # static threshold reachable
    for i in range(n):
        mu = rng.uniform(*mu_range)
        want_slip = rng.random() < slip_fraction
        if want_slip and mu > mu_breakable:
            mu = rng.uniform(mu_range[0], min(mu_range[1], mu_breakable))
        f = FrictionModel.from_mu(mu, ratio=mu_ratio, g=g)
        static = f.mu_s * f.g
        if want_slip:
            a_m_mag = rng.uniform(min(1.05 * static, ACCEL_MAX), ACCEL_MAX)
            if rng.random() < 0.7 or 1.05 * static >= ACCEL_MAX:
                a_i_mag = rng.uniform(0.3, 0.95) * static
            else:
                a_i_mag = rng.uniform(min(1.05 * static, ACCEL_MAX), ACCEL_MAX)
            a_i_mag = float(np.clip(a_i_mag, 0.05, ACCEL_MAX))
        else:
            cap = min(0.95 * static, ACCEL_MAX)
            a_m_mag = rng.uniform(0.1 * cap, cap)
            a_i_mag = rng.uniform(0.1 * cap, cap)
        ratio = a_m_mag / a_i_mag
        t_m = rng.uniform(0.3, 0.95) * pad_to / (1.0 + ratio)
        sgn = 1.0 if rng.random() < 0.5 else -1.0
        action = validate_action(RawAction(a_i=sgn * a_i_mag, a_m=-sgn * a_m_mag, t_m=t_m))
        result = simulate_closed_form(build_velocity_profile(action), f, sample_rate=None)
        series[i] = sample_relative_trace(result, rate, pad_to)
        labels[i] = mu
        slipped[i] = 1.0 if any(k == EVENT_SLIP_START for _, k in result.events) else 0.0
    meta = {"seed": seed, "mu_range": list(mu_range), "slip_bias": slip_fraction,
            "mu_ratio": mu_ratio, "g": g}
    return FrictionDataset(series=series, labels=labels, slipped=slipped,
                           rate=rate, pad_to=pad_to, meta=meta)


class LstmFrictionRegressor(BaseEstimator, RegressorMixin):
    """Recurrent regressor from a (2, T) trace to the kinetic coefficient.

    Desk-scale default of two recurrent layers (64, 32) with a small dense
    head; layer widths are plain parameters, so the full-scale stack
    (1024, 512, 256, 128) is one config change away.
    """

    def __init__(self, hidden_sizes=(64, 32), head_sizes=(16,), rate: float = 50.0,
                 window: float = 2.0, accel_scale: float = ACCEL_MAX, v_scale: float = 1.0,
                 lr: float = 2e-3, epochs: int = 12, batch_size: int = 128,
                 val_fraction: float = 0.1, clamp_lo: float = MU_CLAMP[0],
                 clamp_hi: float = MU_CLAMP[1], seed: int = 0, dtype: str = "float32",
                 verbose: bool = False):
        self.hidden_sizes = hidden_sizes
        self.head_sizes = head_sizes
        self.rate = rate
        self.window = window
        self.accel_scale = accel_scale
        self.v_scale = v_scale
        self.lr = lr
        self.epochs = epochs
        self.batch_size = batch_size
        self.val_fraction = val_fraction
        self.clamp_lo = clamp_lo
        self.clamp_hi = clamp_hi
        self.seed = seed
        self.dtype = dtype
        self.verbose = verbose

    @property
    def n_timesteps(self) -> int:
        return int(round(self.rate * self.window))

    def _np_dtype(self):
        return np.float32 if self.dtype == "float32" else np.float64

    def _prepare(self, X) -> np.ndarray:
        X = np.asarray(X)
        if X.ndim != 3 or X.shape[1] != 2:
            raise DimensionMismatch(f"expected (n, 2, T) series, got {X.shape}")
        if X.shape[2] != self.n_timesteps:
            raise DimensionMismatch(
                f"series length {X.shape[2]} != rate*window = {self.n_timesteps}")
        scaled = X.astype(self._np_dtype()).transpose(0, 2, 1).copy()
        scaled[:, :, 0] /= self.accel_scale
        scaled[:, :, 1] /= self.v_scale
        return scaled

    def fit(self, X, y):
        rng = np.random.default_rng(self.seed)
        net = LstmStack(2, self.hidden_sizes, self.head_sizes, rng=rng, dtype=self._np_dtype())
        opt = Adam(net.params, self.lr)
        Xp = self._prepare(X)
        y = np.asarray(y, dtype=self._np_dtype())
        n = Xp.shape[0]
        n_val = int(round(self.val_fraction * n))
        order = rng.permutation(n)
        val_idx, train_idx = order[:n_val], order[n_val:]
        best_val = np.inf
        best_params = None
        history = []
        for epoch in range(self.epochs):
            perm = rng.permutation(train_idx.size)
            sq_sum = 0.0
            for start in range(0, perm.size, self.batch_size):
                idx = train_idx[perm[start:start + self.batch_size]]
                pred, cache = net.forward(Xp[idx], want_cache=True)
                err = pred - y[idx]
                sq_sum += float(np.sum(err * err))
                grads = net.backward(cache, (2.0 / idx.size) * err)
                opt.step(net.params, grads)
            entry = {"epoch": epoch, "train_mse": sq_sum / max(perm.size, 1)}
            if n_val:
                val_pred = self._batched_forward(net, Xp[val_idx])
                entry["val_mae"] = float(np.mean(np.abs(val_pred - y[val_idx])))
                if entry["val_mae"] < best_val:
                    best_val = entry["val_mae"]
                    best_params = {k: v.copy() for k, v in net.params.items()}
            history.append(entry)
            if self.verbose:
                print(f"epoch {epoch}: " + ", ".join(f"{k}={v:.5f}" for k, v in entry.items() if k != "epoch"))
        if best_params is not None:
            for k, v in net.params.items():
                v[...] = best_params[k]
        self.net_ = net
        self.history_ = history
        self.val_mae_ = best_val if n_val else None
        return self

    def _batched_forward(self, net, Xp) -> np.ndarray:
        preds = []
        for start in range(0, Xp.shape[0], 512):
            preds.append(net.forward(Xp[start:start + 512]))
        return np.concatenate(preds) if preds else np.zeros(0)

    def predict(self, X) -> np.ndarray:
        if not hasattr(self, "net_"):
            raise NotFittedError("fit the regressor (or load a checkpoint) before predict")
        pred = self._batched_forward(self.net_, self._prepare(X))
        return np.clip(pred.astype(float), self.clamp_lo, self.clamp_hi)

    def predict_one(self, trace: np.ndarray) -> float:
        return float(self.predict(np.asarray(trace)[None, :, :])[0])

    def save(self, path) -> None:
        if not hasattr(self, "net_"):
            raise NotFittedError("nothing to save before fit")
        meta = {"kind": "lstm-friction", "params": {k: list(v) if isinstance(v, tuple) else v
                                                    for k, v in self.get_params().items()}}
        checkpoint.save_arrays(path, self.net_.params, meta)

    @classmethod
    def load(cls, path) -> "LstmFrictionRegressor":
        arrays, meta = checkpoint.load_arrays(path)
        params = dict(meta.get("params", {}))
        for key in ("hidden_sizes", "head_sizes"):
            if key in params:
                params[key] = tuple(params[key])
        est = cls(**params)
        net = LstmStack(2, est.hidden_sizes, est.head_sizes,
                        rng=np.random.default_rng(0), dtype=est._np_dtype())
        checkpoint.load_into(net.params, arrays)
        est.net_ = net
        est.history_ = []
        est.val_mae_ = None
        return est


def correction_metric(mu_k: float, mu_e: float, mu_e_prime: float) -> float:
    """How much of the initial friction error the new estimate removed."""
    denom = abs(mu_k - mu_e)
    if denom == 0.0:
        raise DivisionByZero("prior estimate already equals the true coefficient")
    return 1.0 - abs(mu_k - mu_e_prime) / denom
