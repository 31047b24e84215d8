"""Input checks shared by the estimator, CLI and streaming entry points."""

from __future__ import annotations

import numpy as np

from .dsp import Waveform


def check_waveform(x, name="signal", min_len=1) -> np.ndarray:
    """Return ``x`` as a finite 1-D float64 array.

    Accepts arrays, sequences and :class:`Waveform` objects.
    """
    if isinstance(x, Waveform):
        x = x.samples
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be 1-D, got shape {arr.shape}")
    if arr.size < min_len:
        raise ValueError(f"{name} needs at least {min_len} samples, got {arr.size}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains NaN or inf")
    return arr


def check_waveforms(X, name="X", min_len=1) -> list:
    """A single signal or a collection of signals -> list of 1-D arrays."""
    if isinstance(X, Waveform) or (isinstance(X, np.ndarray) and X.ndim == 1):
        X = [X]
    if isinstance(X, np.ndarray) and X.ndim == 2:
        X = list(X)
    out = [check_waveform(x, f"{name}[{i}]", min_len) for i, x in enumerate(X)]
    if not out:
        raise ValueError(f"{name} is empty")
    return out


def check_pairs(X, y, min_len=1):
    noisy = check_waveforms(X, "X", min_len)
    clean = check_waveforms(y, "y", min_len)
    if len(noisy) != len(clean):
        raise ValueError(f"X has {len(noisy)} signals but y has {len(clean)}")
    for i, (a, b) in enumerate(zip(noisy, clean)):
        if a.shape != b.shape:
            raise ValueError(f"pair {i}: noisy length {a.size} != clean length {b.size}")
    return noisy, clean


def check_positive_int(value, name):
    if isinstance(value, bool) or not isinstance(value, (int, np.integer)) or value <= 0:
        raise ValueError(f"{name} must be a positive integer, got {value!r}")
    return int(value)
