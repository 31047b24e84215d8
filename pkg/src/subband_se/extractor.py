"""Full-band extractor: stacked residual TCN blocks followed by a dense layer."""

from __future__ import annotations

import numpy as np

from .nn import ChannelNorm, Dense, DepthwiseConv1d, Module, PointwiseConv, PReLU, ShapeError


class TcnBlock(Module):
    """Residual block ``x + out(norm(prelu(dconv(norm(prelu(in(x)))))))``."""

    def __init__(self, channels, bottleneck, dilation, kernel_size=3, norm_mode="cumulative", rng=None):
        rng = np.random.default_rng(0) if rng is None else rng
        self.channels = channels
        self.dilation = dilation
        self.in_conv = PointwiseConv(channels, bottleneck, rng=rng)
        self.act1 = PReLU()
        self.norm1 = ChannelNorm(bottleneck, norm_mode)
        self.dconv = DepthwiseConv1d(bottleneck, kernel_size, dilation, rng=rng)
        self.act2 = PReLU()
        self.norm2 = ChannelNorm(bottleneck, norm_mode)
        self.out_conv = PointwiseConv(bottleneck, channels, rng=rng)

    def _layers(self):
        return (self.in_conv, self.act1, self.norm1, self.dconv, self.act2, self.norm2, self.out_conv)

    def forward(self, x):
        if x.ndim != 3 or x.shape[1] != self.channels:
            raise ShapeError(f"TCN block expects (N, {self.channels}, T), got {x.shape}")
        h = x
        for layer in self._layers():
            h = layer.forward(h)
        return x + h

    def backward(self, dy):
        d = dy
        for layer in reversed(self._layers()):
            d = layer.backward(d)
        return dy + d

    def init_state(self, n, dtype=np.float64):
        return {
            "norm1": self.norm1.init_state(n, dtype),
            "dconv": self.dconv.init_state(n, dtype),
            "norm2": self.norm2.init_state(n, dtype),
        }

    def step(self, x, state):
        h = self.act1.step(self.in_conv.step(x))
        h = self.norm1.step(h, state["norm1"])
        h = self.act2.step(self.dconv.step(h, state["dconv"]))
        h = self.norm2.step(h, state["norm2"])
        return x + self.out_conv.step(h)


class FullbandExtractor(Module):
    """``groups`` x ``len(dilations)`` TCN blocks then a per-frame dense map.

    Output has the same (N, F, T) shape as the input.
    """

    def __init__(
        self,
        n_freqs=257,
        bottleneck=512,
        groups=2,
        dilations=(1, 2, 5, 9),
        kernel_size=3,
        norm_mode="cumulative",
        rng=None,
    ):
        rng = np.random.default_rng(0) if rng is None else rng
        self.n_freqs = n_freqs
        self.kernel_size = kernel_size
        self.blocks = [
            TcnBlock(n_freqs, bottleneck, d, kernel_size, norm_mode, rng=rng)
            for _ in range(groups)
            for d in dilations
        ]
        self.dense = Dense(n_freqs, n_freqs, rng=rng)

    @property
    def receptive_field(self) -> int:
        """Number of frames (current one included) that can influence an output."""
        return 1 + sum((self.kernel_size - 1) * b.dilation for b in self.blocks)

    def forward(self, x):
        if x.ndim != 3 or x.shape[1] != self.n_freqs:
            raise ShapeError(f"extractor expects (N, {self.n_freqs}, T), got {x.shape}")
        for block in self.blocks:
            x = block.forward(x)
        return self.dense.forward(x)

    def backward(self, dy):
        d = self.dense.backward(dy)
        for block in reversed(self.blocks):
            d = block.backward(d)
        return d

    def init_state(self, n, dtype=np.float64):
        return [b.init_state(n, dtype) for b in self.blocks]

    def step(self, x, state):
        for block, s in zip(self.blocks, state):
            x = block.step(x, s)
        return self.dense.step(x)
