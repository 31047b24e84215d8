"""Multi-scale channel attention over frequency bins.

Each frequency bin is treated as a channel. Three depthwise convolutions
with different kernel sizes look at each bin's trajectory over time, are
averaged over time and rectified, fused into one feature per bin, and an
excitation stack (dense -> ReLU -> dense -> sigmoid) turns the fused
feature vector into one weight per bin.
"""

from __future__ import annotations

import numpy as np

from .nn import AvgPoolTime, Dense, DepthwiseConv1d, Module, ReLU, ShapeError, Sigmoid


class MulCA(Module):
    def __init__(
        self,
        n_freqs=257,
        kernel_sizes=(3, 5, 10),
        reduction=8,
        pool_mode="utterance",
        fusion="per_bin",
        padding="causal",
        rng=None,
    ):
        rng = np.random.default_rng(0) if rng is None else rng
        if fusion not in ("per_bin", "full"):
            raise ValueError(f"unknown fusion {fusion!r}")
        self.n_freqs = n_freqs
        self.fusion_kind = fusion
        self.convs = [
            DepthwiseConv1d(n_freqs, k, 1, padding=padding, rng=rng) for k in kernel_sizes
        ]
        self.pools = [AvgPoolTime(pool_mode) for _ in kernel_sizes]
        self.relus = [ReLU() for _ in kernel_sizes]
        n_scales = len(kernel_sizes)
        if fusion == "per_bin":
            self.fusion = Dense(n_scales, 1, rng=rng)
        else:
            self.fusion = Dense(n_scales * n_freqs, n_freqs, rng=rng)
        hidden = max(n_freqs // reduction, 1)
        self.fc1 = Dense(n_freqs, hidden, rng=rng)
        self.fc_relu = ReLU()
        self.fc2 = Dense(hidden, n_freqs, rng=rng)
        self.gate = Sigmoid()

    @property
    def pool_mode(self):
        return self.pools[0].mode

    @pool_mode.setter
    def pool_mode(self, mode):
        self.pools = [AvgPoolTime(mode) for _ in self.convs]

    def _fuse(self, feats):
        # feats: list of (N, F, L) rectified features
        N, F, L = feats[0].shape
        if self.fusion_kind == "per_bin":
            stacked = np.stack(feats, axis=1).reshape(N, len(feats), F * L)
            return self.fusion.forward(stacked).reshape(N, F, L)
        return self.fusion.forward(np.concatenate(feats, axis=1))

    def _fuse_backward(self, dc):
        N, F, L = dc.shape
        k = len(self.convs)
        if self.fusion_kind == "per_bin":
            d = self.fusion.backward(dc.reshape(N, 1, F * L)).reshape(N, k, F, L)
            return [d[:, j] for j in range(k)]
        d = self.fusion.backward(dc)
        return [d[:, j * F : (j + 1) * F] for j in range(k)]

    def features(self, x):
        """Rectified, pooled multi-scale features (small, mid, large) and their fusion."""
        if x.ndim != 3 or x.shape[1] != self.n_freqs:
            raise ShapeError(f"MulCA expects (N, {self.n_freqs}, T), got {x.shape}")
        feats = []
        for conv, pool, relu in zip(self.convs, self.pools, self.relus):
            feats.append(relu.forward(pool.forward(conv.forward(x))))
        return feats, self._fuse(feats)

    def forward(self, x):
        """Weights of shape (N, F, 1) in utterance mode, (N, F, T) in cumulative mode."""
        _, fused = self.features(x)
        h = self.fc_relu.forward(self.fc1.forward(fused))
        return self.gate.forward(self.fc2.forward(h))

    def backward(self, dw):
        d = self.fc1.backward(self.fc_relu.backward(self.fc2.backward(self.gate.backward(dw))))
        dx = None
        for conv, pool, relu, df in zip(self.convs, self.pools, self.relus, self._fuse_backward(d)):
            g = conv.backward(pool.backward(relu.backward(df)))
            dx = g if dx is None else dx + g
        return dx

    def init_state(self, n, dtype=np.float64):
        if self.pool_mode != "cumulative":
            raise ValueError("streaming requires cumulative pooling")
        return {
            "convs": [c.init_state(n, dtype) for c in self.convs],
            "pools": [p.init_state(n, self.n_freqs, dtype) for p in self.pools],
        }

    def step(self, x, state):
        feats = []
        for conv, pool, relu, cs, ps in zip(
            self.convs, self.pools, self.relus, state["convs"], state["pools"]
        ):
            feats.append(relu.step(pool.step(conv.step(x, cs), ps)))
        N, F = x.shape
        if self.fusion_kind == "per_bin":
            fused = self.fusion.step(np.stack(feats, axis=-1).reshape(N * F, -1)).reshape(N, F)
        else:
            fused = self.fusion.step(np.concatenate(feats, axis=1))
        h = self.fc_relu.step(self.fc1.step(fused))
        return self.gate.step(self.fc2.step(h))


def apply_weights(x, w):
    """Scale each frequency row of ``x`` by its weight (broadcast over time)."""
    x = np.asarray(x)
    w = np.asarray(w)
    if w.ndim == 1:
        if w.shape[0] != x.shape[-2]:
            raise ShapeError(f"weight length {w.shape[0]} != {x.shape[-2]} frequency bins")
        return x * w[:, None]
    if w.shape[-2] != x.shape[-2] or w.shape[-1] not in (1, x.shape[-1]):
        raise ShapeError(f"weights {w.shape} incompatible with spectrogram {x.shape}")
    return x * w
