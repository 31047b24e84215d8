"""Layer kernels with reverse-mode gradients.

Layout convention: activations are ``(N, C, T)`` (batch, channels, time).
Every layer caches what its backward pass needs during ``forward`` and
accumulates parameter gradients into ``Param.grad`` during ``backward``.
Layers that carry time context also expose ``init_state``/``step`` for
frame-by-frame streaming over ``(N, C)`` inputs.
"""

from __future__ import annotations

import numpy as np

from ._kernels import lstm_cell_backward, lstm_cell_forward
from .core import Module, Param, ShapeError


def sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def _uniform(rng, fan_in, shape):
    bound = np.sqrt(1.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape)


def _check3(x, channels, what):
    if x.ndim != 3 or x.shape[1] != channels:
        raise ShapeError(f"{what}: expected (N, {channels}, T), got {x.shape}")


class Dense(Module):
    """Per-time-step affine map ``y[:, :, t] = W @ x[:, :, t] + b``."""

    def __init__(self, in_features, out_features, bias=True, rng=None):
        rng = np.random.default_rng(0) if rng is None else rng
        self.in_features = in_features
        self.out_features = out_features
        self.weight = Param(_uniform(rng, in_features, (out_features, in_features)))
        self.bias = Param(np.zeros(out_features)) if bias else None

    def forward(self, x):
        _check3(x, self.in_features, "dense")
        self._x = x
        y = np.matmul(self.weight.value, x)
        if self.bias is not None:
            y += self.bias.value[:, None]
        return y

    def backward(self, dy):
        x = self._x
        self.weight.grad += np.tensordot(dy, x, axes=([0, 2], [0, 2]))
        if self.bias is not None:
            self.bias.grad += dy.sum(axis=(0, 2))
        return np.matmul(self.weight.value.T, dy)

    def step(self, x, state=None):
        y = x @ self.weight.value.T
        if self.bias is not None:
            y += self.bias.value
        return y


class PointwiseConv(Dense):
    """1x1 convolution; identical arithmetic to :class:`Dense`."""

    def __init__(self, in_channels, out_channels, bias=True, rng=None):
        super().__init__(in_channels, out_channels, bias=bias, rng=rng)


class DepthwiseConv1d(Module):
    """Per-channel dilated convolution along time.

    ``y[n, c, t] = sum_k w[c, k] * x[n, c, t - (K - 1 - k) * d] + b[c]`` with
    zeros before t=0 (``padding="causal"``) or modular time indexing
    (``padding="circular"``).
    """

    def __init__(self, channels, kernel_size, dilation=1, bias=True, padding="causal", rng=None):
        if kernel_size < 1 or dilation < 1:
            raise ValueError("kernel_size and dilation must be positive")
        if padding not in ("causal", "circular"):
            raise ValueError(f"unknown padding {padding!r}")
        rng = np.random.default_rng(0) if rng is None else rng
        self.channels = channels
        self.kernel_size = kernel_size
        self.dilation = dilation
        self.padding = padding
        self.weight = Param(_uniform(rng, kernel_size, (channels, kernel_size)))
        self.bias = Param(np.zeros(channels)) if bias else None

    @property
    def context(self):
        return (self.kernel_size - 1) * self.dilation

    def _pad(self, x):
        p = self.context
        if p == 0:
            return x
        if self.padding == "causal":
            return np.concatenate((np.zeros(x.shape[:2] + (p,), dtype=x.dtype), x), axis=2)
        idx = np.arange(-p, x.shape[2]) % x.shape[2]
        return x[:, :, idx]

    def forward(self, x):
        _check3(x, self.channels, "depthwise_conv1d")
        T = x.shape[2]
        xp = self._pad(x)
        self._xp = xp
        self._T = T
        w = self.weight.value
        y = np.zeros_like(x)
        for k in range(self.kernel_size):
            off = k * self.dilation
            y += w[:, k, None] * xp[:, :, off : off + T]
        if self.bias is not None:
            y += self.bias.value[:, None]
        return y

    def backward(self, dy):
        xp, T = self._xp, self._T
        w = self.weight.value
        dxp = np.zeros_like(xp)
        for k in range(self.kernel_size):
            off = k * self.dilation
            seg = xp[:, :, off : off + T]
            self.weight.grad[:, k] += np.einsum("nct,nct->c", dy, seg)
            dxp[:, :, off : off + T] += w[:, k, None] * dy
        if self.bias is not None:
            self.bias.grad += dy.sum(axis=(0, 2))
        p = self.context
        if self.padding == "causal" or p == 0:
            return dxp[:, :, p:]
        dx = np.zeros(dxp.shape[:2] + (T,), dtype=dxp.dtype)
        idx = np.arange(-p, T) % T
        np.add.at(dx, (slice(None), slice(None), idx), dxp)
        return dx

    def init_state(self, n, dtype=np.float64):
        return {"buf": np.zeros((n, self.channels, self.context), dtype=dtype)}

    def step(self, x, state):
        """One causal frame; ``state["buf"]`` holds the last ``context`` inputs."""
        buf = state["buf"]
        w = self.weight.value
        y = w[:, -1] * x
        for k in range(self.kernel_size - 1):
            y = y + w[:, k] * buf[:, :, k * self.dilation]
        if self.bias is not None:
            y = y + self.bias.value
        if self.context:
            buf[:, :, :-1] = buf[:, :, 1:]
            buf[:, :, -1] = x
        return y


class ReLU(Module):
    def forward(self, x):
        self._mask = x > 0
        return x * self._mask

    def backward(self, dy):
        return dy * self._mask

    def step(self, x, state=None):
        return x * (x > 0)


class PReLU(Module):
    """Parametric ReLU with a single learned negative slope."""

    def __init__(self, init=0.25):
        self.slope = Param(np.array([init]))

    def forward(self, x):
        self._x = x
        a = self.slope.value[0]
        return np.where(x >= 0, x, a * x)

    def backward(self, dy):
        x = self._x
        neg = x < 0
        self.slope.grad[0] += np.sum(dy * x * neg)
        return np.where(neg, self.slope.value[0] * dy, dy)

    def step(self, x, state=None):
        return np.where(x >= 0, x, self.slope.value[0] * x)


class Sigmoid(Module):
    def forward(self, x):
        self._y = sigmoid(x)
        return self._y

    def backward(self, dy):
        y = self._y
        return dy * y * (1.0 - y)

    def step(self, x, state=None):
        return sigmoid(x)


NORM_MODES = ("frame", "cumulative", "global")


class ChannelNorm(Module):
    """Layer normalisation over channels with per-channel gain and bias.

    ``mode="frame"`` uses the statistics of each frame, ``"cumulative"`` the
    running statistics over channels and all frames up to t (causal), and
    ``"global"`` the statistics over the whole utterance (offline only).
    """

    eps = 1e-8

    def __init__(self, channels, mode="cumulative"):
        if channels < 2:
            raise ValueError("channel norm needs at least 2 channels")
        if mode not in NORM_MODES:
            raise ValueError(f"unknown norm mode {mode!r}")
        self.channels = channels
        self.mode = mode
        self.gain = Param(np.ones(channels))
        self.bias = Param(np.zeros(channels))

    def _accumulate(self, a):
        if self.mode == "frame":
            return a
        if self.mode == "cumulative":
            return np.cumsum(a, axis=-1)
        return np.broadcast_to(a.sum(axis=-1, keepdims=True), a.shape)

    def _accumulate_t(self, a):
        # adjoint of _accumulate
        if self.mode == "frame":
            return a
        if self.mode == "cumulative":
            return np.flip(np.cumsum(np.flip(a, -1), axis=-1), -1)
        return np.broadcast_to(a.sum(axis=-1, keepdims=True), a.shape)

    def _counts(self, T, dtype):
        C = self.channels
        if self.mode == "frame":
            return np.full(T, C, dtype=dtype)
        if self.mode == "cumulative":
            return C * np.arange(1, T + 1, dtype=dtype)
        return np.full(T, C * T, dtype=dtype)

    def forward(self, x):
        _check3(x, self.channels, "channel_norm")
        n = self._counts(x.shape[2], x.dtype)
        mu = self._accumulate(x.sum(axis=1)) / n
        var = np.maximum(self._accumulate((x * x).sum(axis=1)) / n - mu * mu, 0.0)
        sigma = np.sqrt(var + self.eps)
        xc = x - mu[:, None, :]
        xhat = xc / sigma[:, None, :]
        self._cache = (x, n, mu, sigma, xc, xhat)
        return self.gain.value[:, None] * xhat + self.bias.value[:, None]

    def backward(self, dy):
        x, n, mu, sigma, xc, xhat = self._cache
        self.gain.grad += np.einsum("nct,nct->c", dy, xhat)
        self.bias.grad += dy.sum(axis=(0, 2))
        dxhat = dy * self.gain.value[:, None]
        a = dxhat.sum(axis=1)
        b = (dxhat * xc).sum(axis=1)
        dvar = -b / (2.0 * sigma**3)
        dmu = -a / sigma - 2.0 * mu * dvar
        dS = self._accumulate_t(dmu / n)
        dQ = self._accumulate_t(dvar / n)
        return dxhat / sigma[:, None, :] + dS[:, None, :] + 2.0 * x * dQ[:, None, :]

    def init_state(self, n, dtype=np.float64):
        if self.mode == "global":
            raise ValueError("global channel norm cannot be streamed")
        return {"s": np.zeros(n, dtype=dtype), "q": np.zeros(n, dtype=dtype), "count": 0.0}

    def step(self, x, state):
        C = self.channels
        s = x.sum(axis=1)
        q = (x * x).sum(axis=1)
        if self.mode == "cumulative":
            state["s"] = state["s"] + s
            state["q"] = state["q"] + q
            state["count"] += C
            s, q, cnt = state["s"], state["q"], state["count"]
        else:
            cnt = float(C)
        mu = s / cnt
        var = np.maximum(q / cnt - mu * mu, 0.0)
        sigma = np.sqrt(var + self.eps)
        xhat = (x - mu[:, None]) / sigma[:, None]
        return self.gain.value * xhat + self.bias.value


class AvgPoolTime(Module):
    """Average over time: ``"utterance"`` -> (N, C, 1), ``"cumulative"`` -> (N, C, T)."""

    def __init__(self, mode="utterance"):
        if mode not in ("utterance", "cumulative"):
            raise ValueError(f"unknown pool mode {mode!r}")
        self.mode = mode

    def forward(self, x):
        T = x.shape[2]
        self._T = T
        if self.mode == "utterance":
            return x.mean(axis=2, keepdims=True)
        return np.cumsum(x, axis=2) / np.arange(1, T + 1, dtype=x.dtype)

    def backward(self, dy):
        T = self._T
        if self.mode == "utterance":
            return np.repeat(dy / T, T, axis=2)
        g = dy / np.arange(1, T + 1, dtype=dy.dtype)
        return np.flip(np.cumsum(np.flip(g, 2), axis=2), 2)

    def init_state(self, n, channels, dtype=np.float64):
        return {"sum": np.zeros((n, channels), dtype=dtype), "count": 0}

    def step(self, x, state):
        if self.mode != "cumulative":
            raise ValueError("only cumulative pooling can be streamed")
        state["sum"] = state["sum"] + x
        state["count"] += 1
        return state["sum"] / state["count"]


class LSTM(Module):
    """Unidirectional LSTM layer, gate order (input, forget, cell, output).

    ``forward`` maps ``(N, I, T)`` to ``(N, H, T)`` and leaves the final
    states in ``self.h_last``/``self.c_last``.
    """

    def __init__(self, input_size, hidden_size, rng=None):
        rng = np.random.default_rng(0) if rng is None else rng
        H = hidden_size
        self.input_size = input_size
        self.hidden_size = H
        self.w_ih = Param(_uniform(rng, H, (4 * H, input_size)))
        self.w_hh = Param(_uniform(rng, H, (4 * H, H)))
        b = np.zeros(4 * H)
        b[H : 2 * H] = 1.0
        self.bias = Param(b)

    def forward(self, x, h0=None, c0=None):
        _check3(x, self.input_size, "lstm")
        N, _, T = x.shape
        H = self.hidden_size
        dt = x.dtype
        xs = np.ascontiguousarray(x.transpose(2, 0, 1))
        pre = xs @ self.w_ih.value.T.astype(dt) + self.bias.value.astype(dt)
        w_hh_t = np.ascontiguousarray(self.w_hh.value.T, dtype=dt)
        hs = np.empty((T + 1, N, H), dtype=dt)
        cs = np.empty((T + 1, N, H), dtype=dt)
        hs[0] = 0.0 if h0 is None else h0
        cs[0] = 0.0 if c0 is None else c0
        gates = np.empty((T, N, 4 * H), dtype=dt)
        tanh_c = np.empty((T, N, H), dtype=dt)
        for t in range(T):
            z = pre[t]
            z += hs[t] @ w_hh_t
            lstm_cell_forward(z, cs[t], gates[t], cs[t + 1], tanh_c[t], hs[t + 1])
        self._cache = (xs, hs, cs, gates, tanh_c)
        self.h_last = hs[T].copy()
        self.c_last = cs[T].copy()
        return hs[1:].transpose(1, 2, 0)

    def backward(self, dy, dh_last=None, dc_last=None):
        xs, hs, cs, gates, tanh_c = self._cache
        T, N, H = tanh_c.shape
        dt = gates.dtype
        dys = np.ascontiguousarray(dy.transpose(2, 0, 1), dtype=dt)
        w_hh = np.ascontiguousarray(self.w_hh.value, dtype=dt)
        dz_all = np.empty_like(gates)
        dh = np.zeros((N, H), dtype=dt) if dh_last is None else dh_last.astype(dt)
        dc = np.zeros((N, H), dtype=dt) if dc_last is None else dc_last.astype(dt)
        for t in range(T - 1, -1, -1):
            lstm_cell_backward(gates[t], cs[t], tanh_c[t], dh, dys[t], dc, dz_all[t])
            dh = dz_all[t] @ w_hh
        flat = dz_all.reshape(T * N, 4 * H)
        self.w_ih.grad += flat.T @ xs.reshape(T * N, -1)
        self.w_hh.grad += flat.T @ hs[:-1].reshape(T * N, H)
        self.bias.grad += flat.sum(axis=0)
        self.dh0 = dh
        self.dc0 = dc
        dx = dz_all @ self.w_ih.value.astype(dt)
        return dx.transpose(1, 2, 0)

    def init_state(self, n, dtype=np.float64):
        H = self.hidden_size
        return {"h": np.zeros((n, H), dtype=dtype), "c": np.zeros((n, H), dtype=dtype)}

    def step(self, x, state):
        H = self.hidden_size
        z = x @ self.w_ih.value.T + self.bias.value
        z += state["h"] @ self.w_hh.value.T
        n = x.shape[0]
        gates = np.empty((n, 4 * H), dtype=z.dtype)
        c = np.empty((n, H), dtype=z.dtype)
        tc = np.empty_like(c)
        h = np.empty_like(c)
        lstm_cell_forward(z, state["c"], gates, c, tc, h)
        state["h"], state["c"] = h, c
        return h
