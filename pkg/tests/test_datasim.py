import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from subband_se.datasim import (
    RIR_PROBABILITY,
    SNR_RANGE,
    ArrayPairs,
    DynamicMixing,
    ManifestCorpus,
    SilentSignalError,
    SyntheticCorpus,
    convolve_rir,
    draw_mix_spec,
    fit_length,
    make_mixture,
    make_training_pair,
    mix_at_snr,
    power,
    synth_clean,
    synth_noise,
    synth_rir,
    validation_set,
)
from subband_se.dsp import Waveform, write_wav


def _snr(clean, noise):
    return 10 * np.log10(power(clean) / power(noise))


def test_zero_db_mix_equal_power():
    rng = np.random.default_rng(0)
    c, n = rng.standard_normal(1000), 3 * rng.standard_normal(1000)
    _, scaled = mix_at_snr(c, n, 0.0)
    assert power(scaled) == pytest.approx(power(c), rel=1e-9)


@settings(max_examples=50, deadline=None)
@given(st.floats(-5, 20), st.integers(0, 2**32 - 1))
def test_realised_snr_matches_request(snr, seed):
    rng = np.random.default_rng(seed)
    c = rng.standard_normal(800)
    n = rng.standard_normal(300)
    mix, scaled = mix_at_snr(c, n, snr)
    assert abs(_snr(c, scaled) - snr) < 1e-6
    np.testing.assert_allclose(mix, c + scaled)


def test_silent_inputs_rejected():
    with pytest.raises(SilentSignalError):
        mix_at_snr(np.zeros(10), np.ones(10), 0.0)
    with pytest.raises(SilentSignalError):
        mix_at_snr(np.ones(10), np.zeros(10), 0.0)
    with pytest.raises(ValueError):
        mix_at_snr(np.ones(10), np.ones(10), np.inf)


def test_fit_length_loops_and_truncates():
    np.testing.assert_array_equal(fit_length([1, 2, 3], 7), [1, 2, 3, 1, 2, 3, 1])
    np.testing.assert_array_equal(fit_length([1, 2, 3], 2), [1, 2])


def test_spec_statistics():
    specs = [draw_mix_spec(s, 0, 50, 20) for s in range(10_000)]
    rir_rate = np.mean([s.rir_id is not None for s in specs])
    assert 0.73 <= rir_rate <= 0.77
    snrs = np.array([s.snr_db for s in specs])
    lo, hi = SNR_RANGE
    ks = stats.kstest(snrs, stats.uniform(loc=lo, scale=hi - lo).cdf).statistic
    assert ks < 0.02
    assert RIR_PROBABILITY == 0.75


def test_no_rirs_means_dry():
    assert all(draw_mix_spec(s, 0, 5, 0).rir_id is None for s in range(200))


def test_synthesis_is_deterministic():
    np.testing.assert_array_equal(synth_clean(3), synth_clean(3))
    assert not np.array_equal(synth_clean(3), synth_clean(4))
    np.testing.assert_array_equal(synth_noise(5, 1.0), synth_noise(5, 1.0))
    np.testing.assert_array_equal(synth_rir(2), synth_rir(2))


def test_clean_band_limited():
    x = synth_clean(0)
    spec = np.abs(np.fft.rfft(x)) ** 2
    f = np.fft.rfftfreq(len(x), 1 / 16000)
    assert spec[f > 4500].sum() < 1e-3 * spec.sum()
    assert len(x) == 32000
    assert np.sqrt(power(x)) == pytest.approx(0.05)


def test_rir_shape():
    h = synth_rir(1)
    assert np.sum(h * h) == pytest.approx(1.0)
    assert np.argmax(np.abs(h)) == 0


def test_convolve_rir_truncates():
    x = np.zeros(100)
    x[0] = 1.0
    h = np.array([1.0, 0.5, 0.25])
    y = convolve_rir(x, h)
    assert y.shape == (100,)
    np.testing.assert_allclose(y[:3], h, atol=1e-12)


def test_mixture_snr_and_target():
    corpus = SyntheticCorpus(n_clean=4, n_noise=3, n_rir=2)
    spec = draw_mix_spec(11, 1, 3, 2)
    noisy, target = make_mixture(spec, corpus)
    assert abs(_snr(target, noisy - target) - spec.snr_db) < 1e-6


def test_training_pair_shapes():
    corpus = SyntheticCorpus(n_clean=2, n_noise=2, n_rir=1, dur=4.0)
    spec = draw_mix_spec(1, 0, 2, 1)
    y, s = make_training_pair(spec, corpus, T_frames=192)
    assert y.shape == s.shape == (257, 192)
    y, s = make_training_pair(spec, corpus, T_frames=50)
    assert y.shape == (257, 50)


def test_dynamic_mixing_varies_by_epoch():
    dm = DynamicMixing(SyntheticCorpus(n_clean=3), seed=1)
    assert len(dm) == 3
    assert dm.spec(0, 1) != dm.spec(1, 1)
    assert dm.spec(0, 1) == DynamicMixing(SyntheticCorpus(n_clean=3), seed=1).spec(0, 1)
    assert dm.spec(0, 1).clean_id == 1


def test_empty_source_rejected():
    with pytest.raises(ValueError):
        DynamicMixing(SyntheticCorpus(n_clean=0))
    with pytest.raises(ValueError):
        ArrayPairs([], [])


def test_validation_set_fixed():
    c = SyntheticCorpus(n_clean=2, n_noise=2, n_rir=2, dur=0.5)
    a = validation_set(c, 2, seed=3)
    b = validation_set(c, 2, seed=3)
    for (n1, c1), (n2, c2) in zip(a, b):
        np.testing.assert_array_equal(n1, n2)
        np.testing.assert_array_equal(c1, c2)


def test_manifest_corpus(tmp_path):
    for name, seed in (("c0", 0), ("n0", 1), ("r0", 2)):
        x = synth_rir(seed) * 0.5 if name == "r0" else synth_clean(seed, 0.5)
        write_wav(tmp_path / f"{name}.wav", Waveform(x))
    (tmp_path / "clean.txt").write_text("c0.wav\n")
    (tmp_path / "noise.txt").write_text("# comment\nn0.wav\n")
    (tmp_path / "rir.txt").write_text("r0.wav\n")
    corpus = ManifestCorpus.from_dir(tmp_path)
    assert (corpus.n_clean, corpus.n_noise, corpus.n_rir) == (1, 1, 1)
    noisy, target = make_mixture(draw_mix_spec(0, 0, 1, 1), corpus)
    assert noisy.shape == target.shape == (8000,)


def test_array_pairs_crop():
    rng = np.random.default_rng(0)
    x = [rng.standard_normal(16000), rng.standard_normal(8000)]
    src = ArrayPairs(x, x, seed=2, T_frames=20)
    y, s = src.pair(0, 0)
    assert y.shape == (257, 20)
    np.testing.assert_array_equal(y.re, s.re)
    y, _ = src.pair(0, 1)
    assert y.shape == (257, 20)
