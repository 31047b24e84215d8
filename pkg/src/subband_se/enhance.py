"""Offline (whole-utterance) enhancement."""

from __future__ import annotations

import numpy as np

from .dsp import ComplexSpectrogram, StftConfig, Waveform, istft, read_wav, stft, write_wav
from .model import EnhancerNet, aligned_mask, apply_mask


def enhance_spectrogram(noisy: ComplexSpectrogram, net: EnhancerNet, mode="causal") -> ComplexSpectrogram:
    return apply_mask(noisy, aligned_mask(noisy, net, mode))


def enhance_waveform(samples, net: EnhancerNet, mode="causal", stft_cfg: StftConfig | None = None) -> np.ndarray:
    """Enhance a whole signal; the output has the input's length.

    Signals shorter than one analysis window come back as silence.
    """
    samples = np.asarray(samples, dtype=np.float64)
    cfg = stft_cfg or StftConfig()
    if len(samples) < cfg.window_len:
        return np.zeros_like(samples)
    noisy = stft(samples, cfg)
    return istft(enhance_spectrogram(noisy, net, mode), len(samples)).samples


def enhance_offline(in_wav, checkpoint, out_wav, mode="causal", stream=False):
    """Read ``in_wav``, enhance it with the checkpointed model, write ``out_wav``."""
    from .checkpoint import load_checkpoint
    from .streaming import stream_waveform

    ckpt = load_checkpoint(checkpoint) if not hasattr(checkpoint, "net") else checkpoint
    w = read_wav(in_wav)
    if stream:
        y = stream_waveform(w.samples, ckpt.net)
    else:
        y = enhance_waveform(w.samples, ckpt.net, mode)
    out = Waveform(y, w.sample_rate)
    write_wav(out_wav, out)
    return out
