import numpy as np
import pytest

from subband_se.dsp import ComplexSpectrogram, stft
from subband_se.model import (
    CirmMask,
    EnhancerNet,
    ModelConfig,
    aligned_mask,
    apply_mask,
    cirm_raw,
    cirm_target,
    compress,
    count_params,
    decompress,
    delayed_mse,
    loss,
    model_forward,
)
from subband_se.nn import ShapeError
from subband_se.nn.gradcheck import grad_check


def _spec(rng, F=257, T=10):
    return ComplexSpectrogram(rng.standard_normal((F, T)), rng.standard_normal((F, T)))


# -- cIRM -------------------------------------------------------------------


def test_clean_equals_noisy_mask():
    rng = np.random.default_rng(0)
    y = _spec(rng)
    mr, mi = cirm_raw(y, y)
    np.testing.assert_allclose(mr, 1.0, atol=1e-8)
    np.testing.assert_allclose(mi, 0.0, atol=1e-12)
    t = cirm_target(y, y)
    # K * (1 - e^{-C}) / (1 + e^{-C}) evaluated directly
    expect = 10.0 * (1 - np.exp(-0.1)) / (1 + np.exp(-0.1))
    np.testing.assert_allclose(t.mr, expect, rtol=1e-7)
    np.testing.assert_allclose(t.mi, 0.0, atol=1e-12)


def test_silent_clean_mask_is_zero():
    rng = np.random.default_rng(1)
    y = _spec(rng)
    z = ComplexSpectrogram(np.zeros(y.shape), np.zeros(y.shape))
    t = cirm_target(y, z)
    assert np.all(t.mr == 0) and np.all(t.mi == 0)


def test_exact_mask_reconstructs_clean():
    rng = np.random.default_rng(2)
    for _ in range(20):
        y = _spec(rng) 
        s = _spec(rng)
        mr, mi = cirm_raw(y, s)
        est = apply_mask(y, np.stack((mr, mi), -1))
        err = np.linalg.norm(est.to_complex() - s.to_complex()) / np.linalg.norm(s.to_complex())
        assert err <= 1e-6


def test_compressed_target_round_trip():
    rng = np.random.default_rng(3)
    y = _spec(rng)
    s = ComplexSpectrogram(0.5 * y.re + 0.1, 0.5 * y.im - 0.2)
    t = cirm_target(y, s)
    est = apply_mask(y, np.stack((decompress(t.mr), decompress(t.mi)), -1))
    mr, _ = cirm_raw(y, s)
    ok = np.abs(mr) < 9  # outside the clip range decompression saturates
    assert np.max(np.abs(est.re - s.re)[ok]) < 1e-6 * np.max(np.abs(s.re))


def test_compress_bijective():
    x = np.linspace(-50, 50, 100_001)
    np.testing.assert_allclose(decompress(compress(x), limit=1.0), x, atol=1e-9)


def test_compress_bounded_and_decompress_clips():
    assert np.all(np.abs(compress(np.array([-1e6, 1e6]))) <= 10.0)
    assert np.isfinite(decompress(np.array([10.0, -10.0]))).all()
    assert decompress(np.array([10.0]))[0] == pytest.approx(decompress(np.array([9.9]))[0])


def test_apply_mask_examples():
    rng = np.random.default_rng(4)
    y = _spec(rng, 5, 3)
    one = np.zeros((5, 3, 2))
    one[..., 0] = 1.0
    out = apply_mask(y, one)
    np.testing.assert_array_equal(out.re, y.re)
    np.testing.assert_array_equal(out.im, y.im)
    j = np.zeros((5, 3, 2))
    j[..., 1] = 1.0
    out = apply_mask(y, j)
    np.testing.assert_array_equal(out.re, -y.im)
    np.testing.assert_array_equal(out.im, y.re)
    m = rng.standard_normal((5, 3, 2))
    out = apply_mask(y, m)
    np.testing.assert_allclose(out.to_complex(), (m[..., 0] + 1j * m[..., 1]) * y.to_complex(), atol=1e-14)
    with pytest.raises(ShapeError):
        apply_mask(y, np.zeros((5, 3)))


def test_loss_examples():
    rng = np.random.default_rng(5)
    a = CirmMask(rng.standard_normal((4, 3)), rng.standard_normal((4, 3)))
    assert loss(a, a) == 0.0
    b = CirmMask(a.mr + 1, a.mi + 1)
    assert loss(a, b) == pytest.approx(1.0)
    c = CirmMask(rng.standard_normal((4, 3)), rng.standard_normal((4, 3)))
    direct = sum((a.mr[i, j] - c.mr[i, j]) ** 2 + (a.mi[i, j] - c.mi[i, j]) ** 2
                 for i in range(4) for j in range(3)) / 24
    assert loss(a, c) == pytest.approx(direct, rel=1e-12)


def test_delayed_mse_excludes_warmup():
    rng = np.random.default_rng(6)
    pred = rng.standard_normal((1, 2, 3, 6))
    tgt = np.zeros_like(pred)
    tgt[..., :4] = pred[..., 2:]
    value, grad = delayed_mse(pred, tgt, 2)
    assert value == 0.0
    assert np.all(grad == 0)
    with pytest.raises(ShapeError):
        delayed_mse(pred[..., :2], tgt[..., :2], 2)


# -- network ----------------------------------------------------------------


def test_zero_params_give_silence(small_cfg):
    net = EnhancerNet(small_cfg)
    for p in net.param_set().values():
        p.value[:] = 0.0
    rng = np.random.default_rng(7)
    y = _spec(rng, 257, 8)
    m = model_forward(y, net)
    assert np.all(m == 0)
    out = apply_mask(y, aligned_mask(y, net))
    assert np.all(out.re == 0) and np.all(out.im == 0)


@pytest.mark.parametrize("mulca", [True, False])
def test_delay_semantics_perturbation_sweep(small_cfg, mulca):
    cfg = ModelConfig(**{**small_cfg.to_dict(), "use_mulca": mulca})
    net = EnhancerNet(cfg)
    rng = np.random.default_rng(8)
    y = _spec(rng, 257, 14)
    base = model_forward(y, net, "causal")
    for t0 in (0, 5, 13):
        re = y.re.copy()
        re[:, t0] += 1.0
        out = model_forward(ComplexSpectrogram(re, y.im), net, "causal")
        changed = np.flatnonzero(np.any(out != base, axis=(0, 2)))
        assert changed.min() == t0  # output t depends on inputs <= t only
        # output t0 + tau is the first mask that targets frame t0
        assert t0 + cfg.look_ahead >= changed.min()


def test_offline_mode_sees_whole_utterance(small_cfg):
    net = EnhancerNet(small_cfg)
    rng = np.random.default_rng(9)
    y = _spec(rng, 257, 10)
    base = model_forward(y, net, "offline")
    re = y.re.copy()
    re[:, 9] += 1.0
    out = model_forward(ComplexSpectrogram(re, y.im), net, "offline")
    assert np.any(out[:, 0] != base[:, 0])


def test_aligned_mask_shape_and_tau_zero(small_cfg):
    rng = np.random.default_rng(10)
    y = _spec(rng, 257, 6)
    net = EnhancerNet(small_cfg)
    assert aligned_mask(y, net).shape == (257, 6, 2)
    cfg0 = ModelConfig(**{**small_cfg.to_dict(), "look_ahead": 0})
    net0 = EnhancerNet(cfg0)
    np.testing.assert_array_equal(aligned_mask(y, net0), model_forward(y, net0))


def test_aligned_mask_is_emitted_sequence_shifted(small_cfg):
    rng = np.random.default_rng(11)
    y = _spec(rng, 257, 6)
    net = EnhancerNet(small_cfg)
    emitted = model_forward(y, net, "causal")
    aligned = aligned_mask(y, net, "causal")
    np.testing.assert_allclose(aligned[:, :4], emitted[:, 2:], atol=1e-12)


def test_phase_ablation_zeroes_features(small_cfg):
    cfg = ModelConfig(**{**small_cfg.to_dict(), "use_phase_branches": False})
    net = EnhancerNet(cfg)
    rng = np.random.default_rng(12)
    y = _spec(rng, 257, 5)
    net.forward(y.re[None], y.im[None])
    assert net._feats.shape[2] == 34
    assert np.all(net._feats[:, :, 32:34] == 0)
    assert np.any(net._feats[:, :, 31] != 0)
    assert net.active_branches() == ("mag",)


def test_mulca_ablation_is_identity_weighting(small_cfg):
    cfg = ModelConfig(**{**small_cfg.to_dict(), "use_mulca": False})
    net = EnhancerNet(cfg)
    rng = np.random.default_rng(13)
    y = _spec(rng, 257, 5)
    net.forward(y.re[None], y.im[None])
    from subband_se.subband import unfold_subband

    np.testing.assert_array_equal(net._feats[0, :, :31], unfold_subband(y.magnitude(), 15))
    # parameters remain allocated but receive no gradient
    net.zero_grad()
    net.backward(np.ones((1, 2, 257, 5)))
    assert all(np.all(p.grad == 0) for n, p in net.named_params() if n.startswith("mulca"))


def test_causal_global_norm_rejected():
    with pytest.raises(ValueError):
        EnhancerNet(ModelConfig.miniature(norm_mode="global", train_mode="causal"))
    net = EnhancerNet(ModelConfig.miniature(norm_mode="global"))
    with pytest.raises(ValueError):
        net.set_mode("causal")


@pytest.mark.parametrize(
    "bad",
    [{"n_freqs": 0}, {"n_neighbors": 200}, {"norm_mode": "batch"}, {"train_mode": "x"}, {"cirm_k": 0.0}],
)
def test_config_validation(bad):
    with pytest.raises(ValueError):
        ModelConfig(**bad)


def test_input_shape_mismatch(small_cfg):
    net = EnhancerNet(small_cfg)
    with pytest.raises(ShapeError):
        net.forward(np.zeros((1, 100, 4)), np.zeros((1, 100, 4)))


def test_full_size_parameter_count():
    net = EnhancerNet(ModelConfig())
    total = count_params(net)
    assert 8_200_000 <= total <= 9_200_000
    assert net.param_breakdown()["gsub.lstms.0"] == 4 * 384 * (34 + 384 + 1)
    assert sum(net.param_breakdown().values()) == total


def test_input_norm_is_scale_invariant(small_cfg):
    cfg = ModelConfig(**{**small_cfg.to_dict(), "input_norm": True})
    net = EnhancerNet(cfg)
    rng = np.random.default_rng(14)
    y = _spec(rng, 257, 6)
    a = model_forward(y, net, "causal")
    b = model_forward(ComplexSpectrogram(3.0 * y.re, 3.0 * y.im), net, "causal")
    np.testing.assert_allclose(a, b, atol=1e-9)


def _full_model_check(cfg, mode, max_entries=8):
    net = EnhancerNet(cfg)
    net.set_mode(mode)
    rng = np.random.default_rng(15)
    T = cfg.train_frames
    re = rng.standard_normal((1, cfg.n_freqs, T))
    im = rng.standard_normal((1, cfg.n_freqs, T))
    tgt = rng.standard_normal((1, 2, cfg.n_freqs, T))

    def f():
        return delayed_mse(net.forward(re, im), tgt, cfg.look_ahead)[0]

    net.zero_grad()
    _, g = delayed_mse(net.forward(re, im), tgt, cfg.look_ahead)
    net.backward(g)
    params = dict(net.named_params())
    analytic = {n: p.grad.copy() for n, p in params.items()}
    arrays = {n: p.value for n, p in params.items()}
    return grad_check(f, arrays, analytic, max_entries=max_entries, rng=rng)


@pytest.mark.parametrize(
    "overrides,mode",
    [({}, "offline"), ({}, "causal"), ({"use_mulca": False}, "offline"),
     ({"use_phase_branches": False}, "causal"), ({"mulca_fusion": "full"}, "offline")],
)
def test_full_model_grad_check(overrides, mode):
    report = _full_model_check(ModelConfig.miniature(**overrides), mode)
    assert report.passed(1e-3), str(report)
