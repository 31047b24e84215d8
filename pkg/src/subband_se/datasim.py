"""Synthetic stand-in for a speech/noise/RIR corpus and dynamic mixing.

Every artifact is a pure function of integer seeds. Clean "speech" is a sum
of harmonic tones with syllable-rate envelopes, noise is a seeded mix of
white, pink and babble-like components, and room impulse responses are
exponentially decaying noise tails behind a direct-path impulse.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.signal import fftconvolve

from .dsp import SAMPLE_RATE, ComplexSpectrogram, StftConfig, read_wav, stft

SNR_RANGE = (-5.0, 20.0)
RIR_PROBABILITY = 0.75


class SilentSignalError(ValueError):
    pass


def _rng(*key):
    return np.random.default_rng(np.random.SeedSequence([int(k) for k in key]))


def power(x) -> float:
    x = np.asarray(x, dtype=np.float64)
    return float(np.mean(x * x))


def synth_clean(seed, dur=2.0, sr=SAMPLE_RATE) -> np.ndarray:
    rng = _rng(1, seed)
    n = int(round(dur * sr))
    t = np.arange(n) / sr
    y = np.zeros(n)
    for _ in range(rng.integers(2, 6)):
        f0 = rng.uniform(100.0, 400.0)
        # slow pitch movement
        vib = 1.0 + 0.05 * np.sin(2 * np.pi * rng.uniform(0.5, 3.0) * t + rng.uniform(0, 2 * np.pi))
        phase = 2 * np.pi * np.cumsum(f0 * vib) / sr
        n_harm = int(3400.0 // (f0 * 1.05))
        tone = np.zeros(n)
        for h in range(1, n_harm + 1):
            tone += np.sin(h * phase + rng.uniform(0, 2 * np.pi)) / h
        rate = rng.uniform(2.0, 6.0)
        env = np.clip(np.sin(2 * np.pi * rate * t + rng.uniform(0, 2 * np.pi)), 0.0, None) ** 2
        y += rng.uniform(0.3, 1.0) * env * tone
    if power(y) == 0.0:
        y[:] = np.sin(2 * np.pi * 200.0 * t)
    return 0.05 * y / np.sqrt(power(y))


def _pink(rng, n):
    spec = np.fft.rfft(rng.standard_normal(n))
    f = np.arange(spec.size, dtype=np.float64)
    f[0] = 1.0
    return np.fft.irfft(spec / np.sqrt(f), n)


def synth_noise(seed, dur=2.0, sr=SAMPLE_RATE) -> np.ndarray:
    rng = _rng(2, seed)
    n = int(round(dur * sr))
    t = np.arange(n) / sr
    white = rng.standard_normal(n)
    pink = _pink(rng, n)
    babble = np.zeros(n)
    for _ in range(6):
        f0 = rng.uniform(90.0, 300.0)
        env = 1.0 + np.sin(2 * np.pi * rng.uniform(1.0, 5.0) * t + rng.uniform(0, 2 * np.pi))
        for h in range(1, 8):
            babble += env * np.sin(2 * np.pi * h * f0 * t + rng.uniform(0, 2 * np.pi)) / h
    parts = [p / np.sqrt(power(p)) for p in (white, pink, babble)]
    weights = rng.dirichlet(np.ones(3))
    y = sum(w * p for w, p in zip(weights, parts))
    return 0.05 * y / np.sqrt(power(y))


def synth_rir(seed, sr=SAMPLE_RATE) -> np.ndarray:
    """Direct-path impulse plus an exponentially decaying tail, unit total energy."""
    rng = _rng(3, seed)
    t60 = rng.uniform(0.1, 0.6)
    n = int(t60 * sr)
    t = np.arange(n) / sr
    tail = rng.standard_normal(n) * np.exp(-6.908 * t / t60)
    tail[: int(0.002 * sr)] = 0.0
    tail *= rng.uniform(0.2, 0.6) / np.sqrt(np.sum(tail * tail))
    rir = tail
    rir[0] = 1.0
    return rir / np.sqrt(np.sum(rir * rir))


def convolve_rir(clean, rir) -> np.ndarray:
    """Linear convolution truncated to the clean length."""
    clean = np.asarray(clean, dtype=np.float64)
    return fftconvolve(clean, np.asarray(rir, dtype=np.float64))[: len(clean)]


def fit_length(noise, n) -> np.ndarray:
    """Loop or truncate ``noise`` to ``n`` samples."""
    noise = np.asarray(noise, dtype=np.float64)
    reps = -(-n // len(noise))
    return np.tile(noise, reps)[:n]


def mix_at_snr(clean, noise, snr_db):
    """Scale ``noise`` so that the clean/noise power ratio is ``snr_db``.

    Returns ``(mixture, scaled_noise)``.
    """
    clean = np.asarray(clean, dtype=np.float64)
    noise = fit_length(noise, len(clean))
    p_clean, p_noise = power(clean), power(noise)
    if p_clean == 0.0:
        raise SilentSignalError("clean signal is silent")
    if p_noise == 0.0:
        raise SilentSignalError("noise signal is silent")
    if not np.isfinite(snr_db):
        raise ValueError("snr must be finite")
    gain = np.sqrt(p_clean / (p_noise * 10.0 ** (snr_db / 10.0)))
    scaled = gain * noise
    return clean + scaled, scaled


# ---------------------------------------------------------------------------
# corpora


class SyntheticCorpus:
    def __init__(self, n_clean=200, n_noise=50, n_rir=20, dur=2.0, seed=0):
        self.n_clean = n_clean
        self.n_noise = n_noise
        self.n_rir = n_rir
        self.dur = dur
        self.seed = seed

    def _sub(self, i):
        return int(np.random.SeedSequence([self.seed, i]).generate_state(1)[0])

    def clean(self, i):
        return synth_clean(self._sub(i), self.dur)

    def noise(self, i):
        return synth_noise(self._sub(i), self.dur)

    def rir(self, i):
        return synth_rir(self._sub(i))


def _read_manifest(path):
    base = Path(path).parent
    lines = [ln.strip() for ln in Path(path).read_text().splitlines()]
    return [(base / ln) if not Path(ln).is_absolute() else Path(ln)
            for ln in lines if ln and not ln.startswith("#")]


class ManifestCorpus:
    """Clean/noise/RIR WAV files listed one path per line in manifest files."""

    def __init__(self, clean_manifest, noise_manifest, rir_manifest=None):
        self.clean_paths = _read_manifest(clean_manifest)
        self.noise_paths = _read_manifest(noise_manifest)
        self.rir_paths = _read_manifest(rir_manifest) if rir_manifest else []
        if not self.clean_paths or not self.noise_paths:
            raise ValueError("clean and noise manifests must list at least one file")
        self.n_clean = len(self.clean_paths)
        self.n_noise = len(self.noise_paths)
        self.n_rir = len(self.rir_paths)

    def clean(self, i):
        return read_wav(self.clean_paths[i]).samples

    def noise(self, i):
        return read_wav(self.noise_paths[i]).samples

    def rir(self, i):
        return read_wav(self.rir_paths[i]).samples

    @classmethod
    def from_dir(cls, data_dir):
        d = Path(data_dir)
        rir = d / "rir.txt"
        return cls(d / "clean.txt", d / "noise.txt", rir if rir.exists() else None)


# ---------------------------------------------------------------------------
# mixing specs


@dataclass(frozen=True)
class MixSpec:
    clean_id: int
    noise_id: int
    rir_id: int | None
    snr_db: float
    seed: int


def draw_mix_spec(seed, clean_id, n_noise, n_rir, rir_prob=RIR_PROBABILITY, snr_range=SNR_RANGE) -> MixSpec:
    rng = _rng(4, seed)
    use_rir = n_rir > 0 and rng.random() < rir_prob
    rir_id = int(rng.integers(n_rir)) if use_rir else None
    snr = float(rng.uniform(*snr_range))
    return MixSpec(int(clean_id), int(rng.integers(n_noise)), rir_id, snr, int(seed))


def make_mixture(spec: MixSpec, corpus):
    """``(noisy, target)`` waveforms; the target is the (possibly reverberant) clean."""
    clean = corpus.clean(spec.clean_id)
    if spec.rir_id is not None:
        clean = convolve_rir(clean, corpus.rir(spec.rir_id))
    noisy, _ = mix_at_snr(clean, corpus.noise(spec.noise_id), spec.snr_db)
    return noisy, clean


def _fix_frames(spec: ComplexSpectrogram, start, n_frames):
    F = spec.shape[0]
    re = np.zeros((F, n_frames))
    im = np.zeros((F, n_frames))
    seg = slice(start, start + n_frames)
    m = spec.re[:, seg].shape[1]
    re[:, :m] = spec.re[:, seg]
    im[:, :m] = spec.im[:, seg]
    return ComplexSpectrogram(re, im, spec.config)


def make_training_pair(spec: MixSpec, corpus, T_frames=192, stft_cfg: StftConfig | None = None):
    """STFT of noisy and target, cropped (seeded offset) or zero-padded to ``T_frames``."""
    noisy, clean = make_mixture(spec, corpus)
    cfg = stft_cfg or StftConfig()
    Y = stft(noisy, cfg)
    S = stft(clean, cfg)
    extra = Y.n_frames - T_frames
    start = int(_rng(5, spec.seed).integers(extra + 1)) if extra > 0 else 0
    return _fix_frames(Y, start, T_frames), _fix_frames(S, start, T_frames)


class DynamicMixing:
    """Training source: every clean clip is re-mixed with fresh noise/RIR/SNR each epoch."""

    def __init__(self, corpus, seed=0, T_frames=192, n_clips=None):
        self.corpus = corpus
        self.seed = seed
        self.T_frames = T_frames
        self.n_clips = corpus.n_clean if n_clips is None else n_clips
        if self.n_clips <= 0:
            raise ValueError("data source is empty")

    def __len__(self):
        return self.n_clips

    def spec(self, epoch, i) -> MixSpec:
        seed = int(np.random.SeedSequence([self.seed, epoch, i]).generate_state(1)[0])
        return draw_mix_spec(seed, i % self.corpus.n_clean, self.corpus.n_noise, self.corpus.n_rir)

    def pair(self, epoch, i):
        return make_training_pair(self.spec(epoch, i), self.corpus, self.T_frames)


def validation_set(corpus, n, seed):
    """Fixed held-out ``(noisy, target)`` waveforms drawn from ``corpus``."""
    out = []
    for i in range(n):
        s = draw_mix_spec(int(np.random.SeedSequence([seed, 99, i]).generate_state(1)[0]),
                          i % corpus.n_clean, corpus.n_noise, corpus.n_rir)
        out.append(make_mixture(s, corpus))
    return out


class ArrayPairs:
    """Training source over fixed in-memory ``(noisy, clean)`` waveform pairs.

    Each epoch draws a fresh seeded crop of ``T_frames`` frames per pair.
    """

    def __init__(self, noisy, clean, seed=0, T_frames=192, stft_cfg: StftConfig | None = None):
        if len(noisy) != len(clean):
            raise ValueError("noisy and clean lists differ in length")
        if len(noisy) == 0:
            raise ValueError("data source is empty")
        cfg = stft_cfg or StftConfig()
        self.specs = [(stft(y, cfg), stft(s, cfg)) for y, s in zip(noisy, clean)]
        self.seed = seed
        self.T_frames = T_frames

    def __len__(self):
        return len(self.specs)

    def pair(self, epoch, i):
        Y, S = self.specs[i]
        extra = Y.n_frames - self.T_frames
        start = int(_rng(6, self.seed, epoch, i).integers(extra + 1)) if extra > 0 else 0
        return _fix_frames(Y, start, self.T_frames), _fix_frames(S, start, self.T_frames)
