"""Sub-band units, input assembly and the shared sub-band LSTM predictor."""

from __future__ import annotations

import numpy as np

from .nn import LSTM, Dense, Module, ShapeError


def subband_indices(n_freqs, n, f):
    """Row indices of the sub-band unit centred on ``f`` (modular wrap)."""
    return [(f + j) % n_freqs for j in range(-n, n + 1)]


def unfold_subband(xm, n):
    """Stack the ``2n+1`` neighbouring frequency rows around every bin.

    ``xm`` is (..., F, T); the result is (..., F, 2n+1, T) with row ``j`` of
    unit ``f`` equal to ``xm[..., (f - n + j) % F, :]``.
    """
    F = xm.shape[-2]
    if 2 * n + 1 > F:
        raise ValueError(f"sub-band width {2 * n + 1} exceeds {F} frequency bins")
    idx = (np.arange(F)[:, None] + np.arange(-n, n + 1)[None, :]) % F
    return xm[..., idx, :]


def unfold_subband_backward(dunits, n):
    """Adjoint of :func:`unfold_subband` (scatter-add back onto rows)."""
    dx = np.zeros(dunits.shape[:-3] + dunits.shape[-3:-2] + dunits.shape[-1:], dtype=dunits.dtype)
    for j in range(2 * n + 1):
        dx += np.roll(dunits[..., j, :], j - n, axis=-2)
    return dx


def assemble_inputs(units, psi_m, psi_r, psi_i):
    """Per-frequency feature sequences ``[unit rows, psi_m, psi_r, psi_i]``.

    ``units`` is (..., F, 2n+1, T), each embedding (..., F, T); returns
    (..., F, 2n+4, T).
    """
    base = units.shape[:-2] + units.shape[-1:]
    for name, psi in (("psi_m", psi_m), ("psi_r", psi_r), ("psi_i", psi_i)):
        if psi.shape != base:
            raise ShapeError(f"{name} has shape {psi.shape}, expected {base}")
    return np.concatenate(
        (units, psi_m[..., None, :], psi_r[..., None, :], psi_i[..., None, :]), axis=-2
    )


class SubbandModel(Module):
    """Stacked unidirectional LSTMs and a dense 2-unit output, shared over frequencies.

    ``forward`` takes (N, F, D, T) and returns (N, 2, F, T): channel 0 is the
    real mask component, channel 1 the imaginary one (compressed domain).
    """

    def __init__(self, input_size=34, hidden_size=384, num_layers=2, rng=None):
        rng = np.random.default_rng(0) if rng is None else rng
        self.input_size = input_size
        self.lstms = [
            LSTM(input_size if i == 0 else hidden_size, hidden_size, rng=rng)
            for i in range(num_layers)
        ]
        self.out = Dense(hidden_size, 2, rng=rng)

    def forward(self, x):
        if x.ndim != 4 or x.shape[2] != self.input_size:
            raise ShapeError(f"sub-band model expects (N, F, {self.input_size}, T), got {x.shape}")
        N, F, D, T = x.shape
        h = x.reshape(N * F, D, T)
        for lstm in self.lstms:
            h = lstm.forward(h)
        y = self.out.forward(h)
        self._shape = (N, F, D, T)
        return y.reshape(N, F, 2, T).transpose(0, 2, 1, 3)

    def backward(self, dy):
        N, F, D, T = self._shape
        d = np.ascontiguousarray(dy.transpose(0, 2, 1, 3)).reshape(N * F, 2, T)
        d = self.out.backward(d)
        for lstm in reversed(self.lstms):
            d = lstm.backward(d)
        return d.reshape(N, F, D, T)

    def init_state(self, n_sequences, dtype=np.float64):
        return [lstm.init_state(n_sequences, dtype) for lstm in self.lstms]

    def step(self, x, state):
        """One frame: ``x`` is (N, F, D); returns (N, 2, F)."""
        N, F, D = x.shape
        h = x.reshape(N * F, D)
        for lstm, s in zip(self.lstms, state):
            h = lstm.step(h, s)
        return self.out.step(h).reshape(N, F, 2).transpose(0, 2, 1)
