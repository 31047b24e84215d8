import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from subband_se.dsp import (
    ComplexSpectrogram,
    EmptySpectrogramError,
    InvalidConfigError,
    StftConfig,
    Waveform,
    WavFormatError,
    fft,
    hann_window,
    ifft,
    irfft,
    istft,
    naive_dft,
    read_wav,
    rfft,
    squared_window_sum,
    wola_floor,
    stft,
    to_pcm16,
    write_wav,
)


def test_hann_endpoints_and_symmetry():
    w = hann_window(512)
    assert w[0] == 0.0
    assert w[256] == pytest.approx(1.0)
    np.testing.assert_allclose(w[1:], w[1:][::-1], atol=1e-15)


def test_hann_plain_sum_is_constant_at_half_overlap():
    w = hann_window(512)
    np.testing.assert_allclose(w[:256] + w[256:], 1.0, atol=1e-12)


def test_squared_hann_sum_is_not_constant():
    # the WOLA normaliser must therefore be computed, not assumed
    w2 = hann_window(512) ** 2
    s = w2[:256] + w2[256:]
    assert s.min() == pytest.approx(0.5, abs=1e-4)
    assert s.max() == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("bad", [0, 1, 511])
def test_hann_rejects_bad_length(bad):
    with pytest.raises(InvalidConfigError):
        hann_window(bad)


def test_config_validation():
    with pytest.raises(InvalidConfigError):
        StftConfig(window_len=500, hop=250)
    with pytest.raises(InvalidConfigError):
        StftConfig(window_len=512, hop=128)
    cfg = StftConfig()
    assert cfg.n_freqs == 257
    assert cfg.n_frames(511) == 0
    assert cfg.n_frames(512) == 1
    assert cfg.n_frames(16000) == 61


@pytest.mark.parametrize("n", [1, 2, 8, 64, 512])
def test_fft_matches_naive_dft(n, rng):
    x = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    ref = naive_dft(x)
    assert np.linalg.norm(fft(x) - ref) <= 1e-9 * max(np.linalg.norm(ref), 1.0)


def test_fft_rejects_non_power_of_two():
    with pytest.raises(InvalidConfigError):
        fft(np.zeros(6))


def test_fft_batched_and_inverse(rng):
    x = rng.standard_normal((3, 4, 32))
    np.testing.assert_allclose(ifft(fft(x)).real, x, atol=1e-12)
    for i in range(3):
        np.testing.assert_allclose(fft(x[i, 1]), fft(x)[i, 1], atol=0)


def test_irfft_inverts_rfft(rng):
    x = rng.standard_normal((5, 512))
    np.testing.assert_allclose(irfft(rfft(x), 512), x, atol=1e-12)


def test_impulse_spectrum():
    # one-sample impulse at the window centre -> |X| equals the window value (1.0)
    x = np.zeros(512)
    x[256] = 1.0
    S = stft(x)
    assert S.shape == (257, 1)
    np.testing.assert_allclose(S.magnitude()[:, 0], 1.0, atol=1e-12)


def test_short_input_errors():
    with pytest.raises(EmptySpectrogramError):
        stft(np.zeros(511))


def test_stft_frames_match_naive_dft(rng):
    cfg = StftConfig()
    x = rng.standard_normal(4096)
    S = stft(x, cfg)
    for t in range(S.n_frames):
        seg = x[t * 256 : t * 256 + 512] * cfg.window
        ref = naive_dft(seg)[:257]
        got = S.to_complex()[:, t]
        assert np.linalg.norm(got - ref) <= 1e-9 * np.linalg.norm(ref)


def test_round_trip_interior(rng):
    x = rng.standard_normal(16000)
    y = istft(stft(x), len(x)).samples
    # first/last hop are covered by one frame only (window edge)
    np.testing.assert_allclose(y[256:-512], x[256:-512], atol=1e-9)


def test_round_trip_uses_computed_normaliser(rng):
    x = rng.standard_normal(2048)
    S = stft(x)
    norm = squared_window_sum(S.config, S.n_frames)
    assert norm.shape == (512 + 256 * (S.n_frames - 1),)
    y = istft(S, len(x)).samples
    covered = norm >= wola_floor(S.config)
    np.testing.assert_allclose(y[covered], x[: len(norm)][covered], atol=1e-9)


def test_istft_tail_beyond_last_frame_is_zero(rng):
    x = rng.standard_normal(600)  # one frame covers 512 samples
    y = istft(stft(x), len(x)).samples
    assert y.shape == (600,)
    assert np.all(y[512:] == 0.0)


def test_istft_rejects_out_len_too_long(rng):
    S = stft(rng.standard_normal(1024))
    with pytest.raises(ValueError):
        istft(S, 1024 + 256)


def test_istft_empty():
    z = np.zeros((257, 0))
    with pytest.raises(EmptySpectrogramError):
        istft(ComplexSpectrogram(z, z))


@settings(max_examples=20, deadline=None)
@given(st.integers(512, 6000), st.integers(0, 2**31 - 1))
def test_round_trip_property(n, seed):
    x = np.random.default_rng(seed).standard_normal(n)
    y = istft(stft(x), n).samples
    S = stft(x)
    covered = squared_window_sum(S.config, S.n_frames) >= wola_floor(S.config)
    k = covered.size
    np.testing.assert_allclose(y[:k][covered], x[:k][covered], atol=1e-9)


def test_waveform_validation():
    with pytest.raises(ValueError):
        Waveform(np.zeros((2, 3)))
    with pytest.raises(ValueError):
        Waveform(np.array([0.0, np.nan]))


def test_wav_round_trip(tmp_path, rng):
    x = np.clip(0.3 * rng.standard_normal(1000), -0.99, 0.99)
    p = tmp_path / "a.wav"
    assert write_wav(p, Waveform(x)) == 0
    y = read_wav(p)
    assert y.sample_rate == 16000
    np.testing.assert_allclose(y.samples, x, atol=0.5 / 32768 + 1e-12)


def test_wav_clipping_is_counted(tmp_path):
    w = Waveform(np.array([0.0, 1.5, -2.0, 0.5]))
    assert write_wav(tmp_path / "c.wav", w) == 2
    assert w.clipped == 2
    pcm, n = to_pcm16(np.array([1.0, -1.0]))
    assert n == 1 and pcm[0] == 32767 and pcm[1] == -32768


def _raw_wav(path, channels=1, width=2, rate=16000):
    import wave

    with wave.open(str(path), "wb") as w:
        w.setnchannels(channels)
        w.setsampwidth(width)
        w.setframerate(rate)
        w.writeframes(b"\x00" * (16 * channels * width))


@pytest.mark.parametrize("kw", [{"channels": 2}, {"width": 1}, {"rate": 8000}])
def test_wav_rejects_unsupported(tmp_path, kw):
    p = tmp_path / "bad.wav"
    _raw_wav(p, **kw)
    with pytest.raises(WavFormatError):
        read_wav(p)


def test_wav_rejects_garbage(tmp_path):
    p = tmp_path / "x.wav"
    p.write_bytes(b"not a wav file at all")
    with pytest.raises(WavFormatError):
        read_wav(p)


def test_wola_floor_bounds_edge_gain(rng):
    # a masked spectrum must not be amplified where only one frame overlaps
    x = 0.1 * rng.standard_normal(8000)
    S = stft(x)
    y = istft(ComplexSpectrogram(S.re * 0.5, S.im * 0.5, S.config), len(x)).samples
    assert wola_floor(S.config) == pytest.approx(0.5)
    assert np.abs(y).max() <= np.abs(x).max() * 2
    np.testing.assert_allclose(y[512:-512], 0.5 * x[512:-512], atol=1e-12)
