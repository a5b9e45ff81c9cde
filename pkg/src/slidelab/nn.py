"""Dense and recurrent networks with hand-written exact gradients.

Everything is plain numpy.  Parameters live in flat dicts of named arrays
(``l0.w``, ``lstm1.wh``, ...) so optimizers, soft updates and checkpoints
can treat networks uniformly.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionMismatch


def _sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def uniform_fan_in(rng: np.random.Generator, fan_in: int, shape, dtype, scale: float = 1.0):
    bound = scale / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


class Mlp:
    """Fully connected net; relu hidden layers, configurable output."""

    def __init__(self, sizes, *, output="identity", rng=None, final_scale=1.0, dtype=np.float64):
        if rng is None:
            rng = np.random.default_rng(0)
        if output not in ("identity", "tanh"):
            raise ValueError(f"unknown output activation {output!r}")
        self.sizes = tuple(int(s) for s in sizes)
        self.output = output
        self.dtype = dtype
        self.params: dict[str, np.ndarray] = {}
        last = len(self.sizes) - 2
        for i, (n_in, n_out) in enumerate(zip(self.sizes[:-1], self.sizes[1:])):
            scale = final_scale if i == last else 1.0
            self.params[f"l{i}.w"] = uniform_fan_in(rng, n_in, (n_in, n_out), dtype, scale)
            self.params[f"l{i}.b"] = uniform_fan_in(rng, n_in, (n_out,), dtype, scale)

    @property
    def n_layers(self) -> int:
        return len(self.sizes) - 1

    def _check_input(self, x):
        x = np.asarray(x, dtype=self.dtype)
        squeeze = x.ndim == 1
        if squeeze:
            x = x[None, :]
        if x.ndim != 2 or x.shape[1] != self.sizes[0]:
            raise DimensionMismatch(f"expected (*, {self.sizes[0]}) input, got {x.shape}")
        return x, squeeze

    def forward(self, x, want_cache: bool = False):
        x, squeeze = self._check_input(x)
        hs = [x]
        zs = []
        h = x
        for i in range(self.n_layers):
            z = h @ self.params[f"l{i}.w"] + self.params[f"l{i}.b"]
            zs.append(z)
            if i < self.n_layers - 1:
                h = np.maximum(z, 0.0)
            elif self.output == "tanh":
                h = np.tanh(z)
            else:
                h = z
            hs.append(h)
        out = hs[-1][0] if squeeze else hs[-1]
        if want_cache:
            return out, (hs, zs)
        return out

    def backward(self, cache, grad_out):
        """Gradients of a scalar loss given d(loss)/d(output).

        Returns (param grads, d(loss)/d(input)).
        """
        hs, zs = cache
        g = np.asarray(grad_out, dtype=self.dtype)
        if g.ndim == 1:
            g = g[None, :]
        if g.shape != hs[-1].shape:
            raise DimensionMismatch(f"grad_out shape {g.shape} != output shape {hs[-1].shape}")
        grads = {}
        for i in reversed(range(self.n_layers)):
            if i == self.n_layers - 1:
                if self.output == "tanh":
                    g = g * (1.0 - hs[-1] ** 2)
            else:
                g = g * (zs[i] > 0.0)
            grads[f"l{i}.w"] = hs[i].T @ g
            grads[f"l{i}.b"] = g.sum(axis=0)
            g = g @ self.params[f"l{i}.w"].T
        return grads, g

    def copy(self) -> "Mlp":
        dup = object.__new__(Mlp)
        dup.sizes = self.sizes
        dup.output = self.output
        dup.dtype = self.dtype
        dup.params = {k: v.copy() for k, v in self.params.items()}
        return dup


class LstmStack:
    """Stacked LSTM over a 2-channel series, with a dense head on the last
    hidden state.  Gate order in the fused kernels is (i, f, g, o); forget
    bias starts at +1."""

    def __init__(self, input_size, hidden_sizes, head_sizes, *, rng=None, dtype=np.float64):
        if rng is None:
            rng = np.random.default_rng(0)
        self.input_size = int(input_size)
        self.hidden_sizes = tuple(int(h) for h in hidden_sizes)
        self.dtype = dtype
        self.params: dict[str, np.ndarray] = {}
        n_in = self.input_size
        for l, n_h in enumerate(self.hidden_sizes):
            self.params[f"lstm{l}.wx"] = uniform_fan_in(rng, n_in, (n_in, 4 * n_h), dtype)
            self.params[f"lstm{l}.wh"] = uniform_fan_in(rng, n_h, (n_h, 4 * n_h), dtype)
            b = uniform_fan_in(rng, n_h, (4 * n_h,), dtype)
            b[n_h:2 * n_h] += 1.0
            self.params[f"lstm{l}.b"] = b
            n_in = n_h
        self.head = Mlp((n_in, *head_sizes, 1), rng=rng, dtype=dtype)
        for k, v in self.head.params.items():
            self.params[f"head.{k}"] = v  # shared storage

    def forward(self, series, want_cache: bool = False):
        x = np.asarray(series, dtype=self.dtype)
        if x.ndim != 3 or x.shape[2] != self.input_size:
            raise DimensionMismatch(f"expected (batch, T, {self.input_size}) series, got {x.shape}")
        n_b, n_t, _ = x.shape
        layer_caches = []
        inp = x
        for l, n_h in enumerate(self.hidden_sizes):
            wx = self.params[f"lstm{l}.wx"]
            wh = self.params[f"lstm{l}.wh"]
            b = self.params[f"lstm{l}.b"]
            xw = inp.reshape(n_b * n_t, -1) @ wx
            xw = xw.reshape(n_b, n_t, 4 * n_h)
            h = np.zeros((n_b, n_h), dtype=self.dtype)
            c = np.zeros((n_b, n_h), dtype=self.dtype)
            gates = np.empty((n_t, n_b, 4 * n_h), dtype=self.dtype)
            tanh_c = np.empty((n_t, n_b, n_h), dtype=self.dtype)
            c_prev = np.empty((n_t, n_b, n_h), dtype=self.dtype)
            h_prev = np.empty((n_t, n_b, n_h), dtype=self.dtype)
            hs = np.empty((n_b, n_t, n_h), dtype=self.dtype)
            for t in range(n_t):
                z = xw[:, t] + h @ wh + b
                gi = _sigmoid(z[:, :n_h])
                gf = _sigmoid(z[:, n_h:2 * n_h])
                gg = np.tanh(z[:, 2 * n_h:3 * n_h])
                go = _sigmoid(z[:, 3 * n_h:])
                c_prev[t] = c
                h_prev[t] = h
                c = gf * c + gi * gg
                tc = np.tanh(c)
                h = go * tc
                gates[t, :, :n_h] = gi
                gates[t, :, n_h:2 * n_h] = gf
                gates[t, :, 2 * n_h:3 * n_h] = gg
                gates[t, :, 3 * n_h:] = go
                tanh_c[t] = tc
                hs[:, t] = h
            layer_caches.append((inp, gates, tanh_c, c_prev, h_prev, hs))
            inp = hs
        out, head_cache = self.head.forward(inp[:, -1], want_cache=True)
        out = out[:, 0]
        if want_cache:
            return out, (layer_caches, head_cache)
        return out

    def backward(self, cache, grad_out):
        """Full-series BPTT.  ``grad_out`` has shape (batch,)."""
        layer_caches, head_cache = cache
        g = np.asarray(grad_out, dtype=self.dtype)[:, None]
        head_grads, dh_last = self.head.backward(head_cache, g)
        grads = {f"head.{k}": v for k, v in head_grads.items()}
        dh_seq = None  # grad w.r.t. the current layer's full output sequence
        for l in reversed(range(len(self.hidden_sizes))):
            n_h = self.hidden_sizes[l]
            inp, gates, tanh_c, c_prev, h_prev, _ = layer_caches[l]
            wx = self.params[f"lstm{l}.wx"]
            wh = self.params[f"lstm{l}.wh"]
            n_b, n_t, n_in = inp.shape
            dz_all = np.zeros((n_t, n_b, 4 * n_h), dtype=self.dtype)
            dh_rec = np.zeros((n_b, n_h), dtype=self.dtype)
            dc_rec = np.zeros((n_b, n_h), dtype=self.dtype)
            dwh = np.zeros_like(wh)
            for t in reversed(range(n_t)):
                dh = dh_rec.copy()
                if dh_seq is not None:
                    dh += dh_seq[:, t]
                elif t == n_t - 1:
                    dh += dh_last
                gi = gates[t, :, :n_h]
                gf = gates[t, :, n_h:2 * n_h]
                gg = gates[t, :, 2 * n_h:3 * n_h]
                go = gates[t, :, 3 * n_h:]
                tc = tanh_c[t]
                dc = dh * go * (1.0 - tc * tc) + dc_rec
                dz = dz_all[t]
                dz[:, :n_h] = dc * gg * gi * (1.0 - gi)
                dz[:, n_h:2 * n_h] = dc * c_prev[t] * gf * (1.0 - gf)
                dz[:, 2 * n_h:3 * n_h] = dc * gi * (1.0 - gg * gg)
                dz[:, 3 * n_h:] = dh * tc * go * (1.0 - go)
                dc_rec = dc * gf
                dh_rec = dz @ wh.T
                dwh += h_prev[t].T @ dz
            dz_flat = dz_all.transpose(1, 0, 2).reshape(n_b * n_t, 4 * n_h)
            grads[f"lstm{l}.wx"] = inp.reshape(n_b * n_t, n_in).T @ dz_flat
            grads[f"lstm{l}.wh"] = dwh
            grads[f"lstm{l}.b"] = dz_flat.sum(axis=0)
            dh_seq = (dz_flat @ wx.T).reshape(n_b, n_t, n_in)
        return grads


class Adam:
    """Standard Adam with bias correction, keyed by parameter name."""

    def __init__(self, params: dict[str, np.ndarray], lr: float,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1.0 - b1 ** self.t
        c2 = 1.0 - b2 ** self.t
        for k, g in grads.items():
            m = self.m[k]
            v = self.v[k]
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            params[k] -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)

    def state_arrays(self, prefix: str) -> dict[str, np.ndarray]:
        out = {}
        for k in self.m:
            out[f"{prefix}.m.{k}"] = self.m[k]
            out[f"{prefix}.v.{k}"] = self.v[k]
        return out


def soft_update(target: dict[str, np.ndarray], source: dict[str, np.ndarray], tau: float) -> None:
    """Polyak blend: target <- (1 - tau) * target + tau * source."""
    for k, tv in target.items():
        tv *= 1.0 - tau
        tv += tau * source[k]
