"""Waveform I/O and the STFT analysis/synthesis front end.

Frames are fully interior (no centre padding): frame ``t`` covers samples
``[t * hop, t * hop + window_len)``. The window is a periodic Hann and the
synthesis is a weighted overlap-add normalised by the squared-window sum.
"""

from __future__ import annotations

import wave
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

SAMPLE_RATE = 16000


class InvalidConfigError(ValueError):
    pass


class EmptySpectrogramError(ValueError):
    pass


class WavFormatError(ValueError):
    pass


@dataclass
class Waveform:
    samples: np.ndarray
    sample_rate: int = SAMPLE_RATE
    clipped: int = 0

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1:
            raise ValueError(f"waveform must be 1-D, got shape {self.samples.shape}")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("waveform contains non-finite samples")

    def __len__(self):
        return self.samples.shape[0]


def hann_window(length: int) -> np.ndarray:
    """Periodic Hann window ``0.5 * (1 - cos(2 pi k / length))``."""
    if length < 2 or length % 2:
        raise InvalidConfigError(f"window length must be even and >= 2, got {length}")
    k = np.arange(length)
    return 0.5 * (1.0 - np.cos(2.0 * np.pi * k / length))


@dataclass(frozen=True)
class StftConfig:
    window_len: int = 512
    hop: int = 256
    window: np.ndarray = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.window_len < 2 or self.window_len & (self.window_len - 1):
            raise InvalidConfigError(
                f"window_len must be a power of two >= 2, got {self.window_len}"
            )
        if self.hop * 2 != self.window_len:
            raise InvalidConfigError("hop must equal window_len / 2")
        if self.window is None:
            object.__setattr__(self, "window", hann_window(self.window_len))
        elif len(self.window) != self.window_len:
            raise InvalidConfigError("window length does not match window_len")

    @property
    def fft_size(self) -> int:
        return self.window_len

    @property
    def n_freqs(self) -> int:
        return self.fft_size // 2 + 1

    def n_frames(self, n_samples: int) -> int:
        if n_samples < self.window_len:
            return 0
        return (n_samples - self.window_len) // self.hop + 1


@dataclass
class ComplexSpectrogram:
    """F x T complex spectrogram stored as separate real/imaginary planes."""

    re: np.ndarray
    im: np.ndarray
    config: StftConfig = field(default_factory=StftConfig)

    def __post_init__(self):
        if self.re.shape != self.im.shape or self.re.ndim != 2:
            raise ValueError("re/im must be matching 2-D arrays")

    @property
    def shape(self):
        return self.re.shape

    @property
    def n_frames(self) -> int:
        return self.re.shape[1]

    def magnitude(self) -> np.ndarray:
        return np.sqrt(self.re**2 + self.im**2)

    def triple(self):
        """Magnitude, real and imaginary planes."""
        return self.magnitude(), self.re, self.im

    def to_complex(self) -> np.ndarray:
        return self.re + 1j * self.im


# ---------------------------------------------------------------------------
# radix-2 FFT

_TWIDDLE_CACHE: dict[int, list] = {}


def _bit_reverse(n: int) -> np.ndarray:
    bits = n.bit_length() - 1
    idx = np.arange(n)
    rev = np.zeros(n, dtype=np.int64)
    for b in range(bits):
        rev |= ((idx >> b) & 1) << (bits - 1 - b)
    return rev


def _plan(n: int):
    plan = _TWIDDLE_CACHE.get(n)
    if plan is None:
        stages = []
        size = 2
        while size <= n:
            half = size // 2
            stages.append((half, np.exp(-2j * np.pi * np.arange(half) / size)))
            size *= 2
        plan = [_bit_reverse(n), stages]
        _TWIDDLE_CACHE[n] = plan
    return plan


def fft(x: np.ndarray) -> np.ndarray:
    """Iterative radix-2 decimation-in-time FFT over the last axis."""
    x = np.asarray(x)
    n = x.shape[-1]
    if n < 1 or n & (n - 1):
        raise InvalidConfigError(f"FFT size must be a power of two, got {n}")
    rev, stages = _plan(n)
    lead = x.shape[:-1]
    a = x[..., rev].astype(np.complex128)
    for half, tw in stages:
        a = a.reshape(*lead, n // (2 * half), 2, half)
        even = a[..., 0, :]
        odd = a[..., 1, :] * tw
        a = np.stack((even + odd, even - odd), axis=-2)
    return a.reshape(*lead, n)


def ifft(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x)
    return np.conj(fft(np.conj(x))) / x.shape[-1]


def rfft(frames: np.ndarray) -> np.ndarray:
    return fft(frames)[..., : frames.shape[-1] // 2 + 1]


def irfft(half_spec: np.ndarray, n: int) -> np.ndarray:
    """Inverse of :func:`rfft` for real signals of even length ``n``."""
    mirror = np.conj(half_spec[..., -2:0:-1])
    full = np.concatenate((half_spec, mirror), axis=-1)
    return ifft(full).real


def naive_dft(frame: np.ndarray) -> np.ndarray:
    """Direct O(N^2) DFT; kept as a reference for testing."""
    n = frame.shape[-1]
    k = np.arange(n)
    basis = np.exp(-2j * np.pi * np.outer(k, k) / n)
    return basis @ frame


# ---------------------------------------------------------------------------
# STFT / iSTFT


def frame_signal(x: np.ndarray, cfg: StftConfig) -> np.ndarray:
    n_frames = cfg.n_frames(len(x))
    idx = np.arange(cfg.window_len)[None, :] + cfg.hop * np.arange(n_frames)[:, None]
    return x[idx]


def stft(x, cfg: StftConfig | None = None) -> ComplexSpectrogram:
    cfg = cfg or StftConfig()
    samples = x.samples if isinstance(x, Waveform) else np.asarray(x, dtype=np.float64)
    if len(samples) < cfg.window_len:
        raise EmptySpectrogramError(
            f"signal of {len(samples)} samples is shorter than one window ({cfg.window_len})"
        )
    frames = frame_signal(samples, cfg) * cfg.window
    spec = rfft(frames).T
    return ComplexSpectrogram(np.ascontiguousarray(spec.real), np.ascontiguousarray(spec.imag), cfg)


def squared_window_sum(cfg: StftConfig, n_frames: int) -> np.ndarray:
    length = cfg.window_len + cfg.hop * (n_frames - 1)
    out = np.zeros(length)
    w2 = cfg.window**2
    for t in range(n_frames):
        out[t * cfg.hop : t * cfg.hop + cfg.window_len] += w2
    return out


def wola_floor(cfg: StftConfig) -> float:
    """Smallest squared-window sum over fully overlapped samples.

    The WOLA divisor is clamped from below at this level. Where fewer frames
    overlap (the first and last partial window) the raw sum falls towards
    zero, and dividing by it would amplify any spectral modification by up
    to 1/w; clamping makes those edge samples taper instead.
    """
    per = cfg.window_len // cfg.hop
    full = squared_window_sum(cfg, 2 * per + 1)
    return float(full[cfg.window_len : cfg.window_len + cfg.hop].min())


def wola_divide(y, norm, cfg: StftConfig):
    return y / np.maximum(norm, wola_floor(cfg))


def istft(spec: ComplexSpectrogram, out_len: int | None = None) -> Waveform:
    """Weighted overlap-add inverse of :func:`stft`.

    Exact wherever the squared-window sum reaches its fully overlapped level;
    the partially covered first and last half-windows are tapered (see
    :func:`wola_floor`). Samples beyond the last frame are zero.
    """
    cfg = spec.config
    n_frames = spec.n_frames
    synth_len = cfg.window_len + cfg.hop * (n_frames - 1) if n_frames else 0
    if out_len is None:
        out_len = synth_len
    if n_frames == 0:
        raise EmptySpectrogramError("cannot invert an empty spectrogram")
    if out_len >= synth_len + cfg.hop:
        raise ValueError(
            f"out_len={out_len} exceeds the synthesizable length {synth_len} by a full hop or more"
        )
    frames = irfft(spec.to_complex().T, cfg.fft_size) * cfg.window
    y = np.zeros(max(synth_len, out_len))
    for t in range(n_frames):
        y[t * cfg.hop : t * cfg.hop + cfg.window_len] += frames[t]
    y[:synth_len] = wola_divide(y[:synth_len], squared_window_sum(cfg, n_frames), cfg)
    return Waveform(y[:out_len])


# ---------------------------------------------------------------------------
# WAV I/O (RIFF PCM16 mono 16 kHz)


def read_wav(path) -> Waveform:
    path = Path(path)
    try:
        with wave.open(str(path), "rb") as w:
            channels = w.getnchannels()
            width = w.getsampwidth()
            rate = w.getframerate()
            data = w.readframes(w.getnframes())
    except wave.Error as exc:
        raise WavFormatError(f"{path}: not a PCM RIFF/WAVE file ({exc})") from exc
    if channels != 1:
        raise WavFormatError(f"{path}: expected mono audio, got {channels} channels")
    if width != 2:
        raise WavFormatError(f"{path}: expected 16-bit PCM, got {8 * width}-bit samples")
    if rate != SAMPLE_RATE:
        raise WavFormatError(f"{path}: expected {SAMPLE_RATE} Hz, got {rate} Hz")
    pcm = np.frombuffer(data, dtype="<i2")
    return Waveform(pcm.astype(np.float64) / 32768.0, rate)


def to_pcm16(samples: np.ndarray) -> tuple[np.ndarray, int]:
    """Quantise to int16 with saturation; returns (pcm, n_clipped)."""
    scaled = np.round(np.asarray(samples, dtype=np.float64) * 32768.0)
    clipped = int(np.count_nonzero((scaled > 32767) | (scaled < -32768)))
    return np.clip(scaled, -32768, 32767).astype("<i2"), clipped


def write_wav(path, w: Waveform) -> int:
    """Write ``w`` as PCM16 mono; returns the number of saturated samples."""
    if w.sample_rate != SAMPLE_RATE:
        raise WavFormatError(f"only {SAMPLE_RATE} Hz output is supported")
    pcm, clipped = to_pcm16(w.samples)
    with wave.open(str(path), "wb") as out:
        out.setnchannels(1)
        out.setsampwidth(2)
        out.setframerate(SAMPLE_RATE)
        out.writeframes(pcm.tobytes())
    w.clipped = clipped
    return clipped
