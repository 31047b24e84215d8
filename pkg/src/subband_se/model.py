"""End-to-end enhancement network, complex ratio masks and the training loss."""

from __future__ import annotations

from dataclasses import dataclass, field, fields

import numpy as np

from .dsp import ComplexSpectrogram
from .extractor import FullbandExtractor
from .mulca import MulCA
from .nn import Module, ShapeError
from .subband import SubbandModel, assemble_inputs, unfold_subband, unfold_subband_backward

BRANCHES = ("mag", "real", "imag")


@dataclass
class ModelConfig:
    n_freqs: int = 257
    n_neighbors: int = 15
    look_ahead: int = 2
    train_frames: int = 192
    mulca_kernels: tuple = (3, 5, 10)
    mulca_reduction: int = 8
    mulca_fusion: str = "per_bin"
    bottleneck: int = 512
    groups: int = 2
    dilations: tuple = (1, 2, 5, 9)
    tcn_kernel: int = 3
    hidden: int = 384
    lstm_layers: int = 2
    use_mulca: bool = True
    use_phase_branches: bool = True
    norm_mode: str = "cumulative"
    train_mode: str = "offline"
    input_norm: bool = False
    cirm_k: float = 10.0
    cirm_c: float = 0.1
    seed: int = 0

    def __post_init__(self):
        self.mulca_kernels = tuple(int(k) for k in self.mulca_kernels)
        self.dilations = tuple(int(d) for d in self.dilations)
        for name in ("n_freqs", "bottleneck", "groups", "tcn_kernel", "hidden", "lstm_layers",
                     "train_frames", "mulca_reduction"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.look_ahead < 0 or self.n_neighbors < 0:
            raise ValueError("look_ahead and n_neighbors must be non-negative")
        if 2 * self.n_neighbors + 1 > self.n_freqs:
            raise ValueError("sub-band width exceeds the number of frequency bins")
        if self.norm_mode not in ("frame", "cumulative", "global"):
            raise ValueError(f"unknown norm_mode {self.norm_mode!r}")
        if self.train_mode not in ("offline", "causal"):
            raise ValueError(f"unknown train_mode {self.train_mode!r}")
        if self.cirm_k <= 0 or self.cirm_c <= 0:
            raise ValueError("cIRM constants must be positive")

    @property
    def subband_features(self) -> int:
        return 2 * self.n_neighbors + 4

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def miniature(cls, **overrides):
        """Small configuration used for gradient checks."""
        base = dict(n_freqs=9, n_neighbors=2, bottleneck=8, hidden=8, train_frames=6,
                    mulca_kernels=(3, 5, 10), mulca_reduction=4)
        base.update(overrides)
        return cls(**base)


# ---------------------------------------------------------------------------
# complex ideal ratio mask


@dataclass
class CirmMask:
    """Compressed complex ratio mask; both planes are F x T."""

    mr: np.ndarray
    mi: np.ndarray

    def stack(self) -> np.ndarray:
        return np.stack((self.mr, self.mi))


def compress(x, k=10.0, c=0.1):
    """``k * (1 - exp(-c x)) / (1 + exp(-c x))``, written as ``k * tanh(c x / 2)``."""
    return k * np.tanh(0.5 * c * np.asarray(x))


def decompress(m, k=10.0, c=0.1, limit=0.99):
    """Inverse of :func:`compress`; inputs are clipped to ``+-limit * k`` first."""
    m = np.clip(np.asarray(m), -limit * k, limit * k)
    return -np.log((k - m) / (k + m)) / c


def cirm_raw(noisy: ComplexSpectrogram, clean: ComplexSpectrogram, eps=1e-10):
    if noisy.shape != clean.shape:
        raise ShapeError(f"noisy {noisy.shape} and clean {clean.shape} differ")
    yr, yi, sr, si = noisy.re, noisy.im, clean.re, clean.im
    denom = yr * yr + yi * yi + eps
    return (yr * sr + yi * si) / denom, (yr * si - yi * sr) / denom


def cirm_target(noisy: ComplexSpectrogram, clean: ComplexSpectrogram, k=10.0, c=0.1) -> CirmMask:
    mr, mi = cirm_raw(noisy, clean)
    return CirmMask(compress(mr, k, c), compress(mi, k, c))


def apply_mask(noisy: ComplexSpectrogram, mask) -> ComplexSpectrogram:
    """Complex multiply ``mask * noisy``; ``mask`` is F x T x 2 (decompressed)."""
    mask = np.asarray(mask)
    if mask.shape != noisy.shape + (2,):
        raise ShapeError(f"mask {mask.shape} does not match spectrogram {noisy.shape}")
    mr, mi = mask[..., 0], mask[..., 1]
    return ComplexSpectrogram(
        mr * noisy.re - mi * noisy.im, mr * noisy.im + mi * noisy.re, noisy.config
    )


# ---------------------------------------------------------------------------
# network


class EnhancerNet(Module):
    """Three weighted branches (magnitude, real, imaginary), three full-band
    extractors and the shared sub-band predictor.

    ``forward(re, im)`` takes (N, F, T) planes and returns the compressed
    mask prediction (N, 2, F, T). Output frame t is the prediction for input
    frame ``t - look_ahead``.
    """

    def __init__(self, cfg: ModelConfig | None = None):
        cfg = cfg or ModelConfig()
        self.cfg = cfg
        rng = np.random.default_rng(cfg.seed)
        F = cfg.n_freqs
        for b in BRANCHES:
            setattr(self, f"mulca_{b}", MulCA(F, cfg.mulca_kernels, cfg.mulca_reduction,
                                              fusion=cfg.mulca_fusion, rng=rng))
        for b in BRANCHES:
            setattr(self, f"ext_{b}", FullbandExtractor(F, cfg.bottleneck, cfg.groups,
                                                        cfg.dilations, cfg.tcn_kernel,
                                                        cfg.norm_mode, rng=rng))
        self.gsub = SubbandModel(cfg.subband_features, cfg.hidden, cfg.lstm_layers, rng=rng)
        self.mode = None
        self.set_mode(cfg.train_mode)

    def set_mode(self, mode):
        """``"offline"``: utterance pooling in the attention; ``"causal"``: cumulative."""
        if mode not in ("offline", "causal"):
            raise ValueError(f"unknown mode {mode!r}")
        if mode == "causal" and self.cfg.norm_mode == "global":
            raise ValueError("global channel norm is offline-only")
        if mode != self.mode:
            pool = "utterance" if mode == "offline" else "cumulative"
            for b in BRANCHES:
                getattr(self, f"mulca_{b}").pool_mode = pool
            self.mode = mode
        return self

    def active_branches(self):
        return BRANCHES if self.cfg.use_phase_branches else BRANCHES[:1]

    def _input_scale(self, xm):
        if not self.cfg.input_norm:
            return None
        frame_mean = xm.mean(axis=1)  # (N, T)
        if self.mode == "offline":
            s = np.broadcast_to(frame_mean.mean(axis=-1, keepdims=True), frame_mean.shape)
        else:
            s = np.cumsum(frame_mean, axis=-1) / np.arange(1, xm.shape[-1] + 1, dtype=xm.dtype)
        return (s + 1e-8)[:, None, :]

    def forward(self, re, im):
        cfg = self.cfg
        re = np.asarray(re)
        im = np.asarray(im)
        if re.ndim != 3 or re.shape != im.shape or re.shape[1] != cfg.n_freqs:
            raise ShapeError(f"expected matching (N, {cfg.n_freqs}, T) planes, got {re.shape}, {im.shape}")
        xm = np.sqrt(re * re + im * im)
        scale = self._input_scale(xm)
        inputs = {"mag": xm, "real": re, "imag": im}
        if scale is not None:
            inputs = {k: v / scale for k, v in inputs.items()}
        cache = {}
        psi = {}
        weighted = {}
        for b in self.active_branches():
            x = inputs[b]
            if cfg.use_mulca:
                w = getattr(self, f"mulca_{b}").forward(x)
                xt = x * w
                cache[b] = (x, w)
            else:
                xt = x
            weighted[b] = xt
            psi[b] = getattr(self, f"ext_{b}").forward(xt)
        zeros = np.zeros_like(xm)
        units = unfold_subband(weighted["mag"], cfg.n_neighbors)
        feats = assemble_inputs(units, psi["mag"], psi.get("real", zeros), psi.get("imag", zeros))
        self._cache = cache
        self._feats = feats
        return self.gsub.forward(feats)

    def backward(self, dout):
        cfg = self.cfg
        n = cfg.n_neighbors
        dfeats = self.gsub.backward(dout)
        k = 2 * n + 1
        dweighted = {"mag": unfold_subband_backward(dfeats[:, :, :k], n)}
        for j, b in enumerate(BRANCHES):
            if b not in self.active_branches():
                continue
            dpsi = np.ascontiguousarray(dfeats[:, :, k + j])
            dxt = getattr(self, f"ext_{b}").backward(dpsi)
            dweighted[b] = dweighted.get(b, 0.0) + dxt
            if cfg.use_mulca:
                x, w = self._cache[b]
                dw = dweighted[b] * x
                if w.shape[-1] == 1:
                    dw = dw.sum(axis=-1, keepdims=True)
                getattr(self, f"mulca_{b}").backward(dw)

    # -- streaming -------------------------------------------------------

    def init_state(self, n=1, dtype=np.float64):
        if self.mode != "causal":
            raise ValueError("streaming requires causal mode")
        st = {"gsub": self.gsub.init_state(n * self.cfg.n_freqs, dtype),
              "scale_sum": np.zeros(n, dtype=dtype), "frames": 0}
        for b in self.active_branches():
            if self.cfg.use_mulca:
                st[f"mulca_{b}"] = getattr(self, f"mulca_{b}").init_state(n, dtype)
            st[f"ext_{b}"] = getattr(self, f"ext_{b}").init_state(n, dtype)
        return st

    def step(self, re, im, state):
        """Advance one frame: ``re``/``im`` are (N, F); returns (N, 2, F)."""
        cfg = self.cfg
        xm = np.sqrt(re * re + im * im)
        inputs = {"mag": xm, "real": re, "imag": im}
        state["frames"] += 1
        if cfg.input_norm:
            state["scale_sum"] = state["scale_sum"] + xm.mean(axis=1)
            s = (state["scale_sum"] / state["frames"] + 1e-8)[:, None]
            inputs = {k: v / s for k, v in inputs.items()}
        psi = {}
        weighted = {}
        for b in self.active_branches():
            x = inputs[b]
            if cfg.use_mulca:
                x = x * getattr(self, f"mulca_{b}").step(x, state[f"mulca_{b}"])
            weighted[b] = x
            psi[b] = getattr(self, f"ext_{b}").step(x, state[f"ext_{b}"])
        zeros = np.zeros_like(xm)
        units = unfold_subband(weighted["mag"][..., None], cfg.n_neighbors)[..., 0]
        feats = np.concatenate(
            (units, psi["mag"][..., None], psi.get("real", zeros)[..., None],
             psi.get("imag", zeros)[..., None]), axis=-1)
        return self.gsub.step(feats, state["gsub"])

    def param_breakdown(self) -> dict:
        out = {}
        for name, p in self.named_params():
            parts = name.split(".")
            key = ".".join(parts[:3]) if parts[0] == "gsub" and parts[1] == "lstms" else parts[0]
            out[key] = out.get(key, 0) + p.size
        return out


def count_params(module) -> int:
    return sum(p.size for _, p in module.named_params())


def model_forward(noisy: ComplexSpectrogram, net: EnhancerNet, mode="causal") -> np.ndarray:
    """Decompressed mask sequence as emitted by the network, shape F x T x 2.

    Emitted frame t is the mask for input frame ``t - look_ahead``; the first
    ``look_ahead`` frames are warm-up.
    """
    if noisy.n_frames < 1:
        raise ShapeError("need at least one frame")
    net.set_mode(mode)
    out = net.forward(noisy.re[None], noisy.im[None])[0]
    cfg = net.cfg
    return decompress(out, cfg.cirm_k, cfg.cirm_c).transpose(1, 2, 0)


def aligned_mask(noisy: ComplexSpectrogram, net: EnhancerNet, mode="causal") -> np.ndarray:
    """Mask for every input frame, obtained by appending ``look_ahead`` zero frames."""
    tau = net.cfg.look_ahead
    F, T = noisy.shape
    pad = np.zeros((F, tau))
    padded = ComplexSpectrogram(np.concatenate((noisy.re, pad), 1),
                                np.concatenate((noisy.im, pad), 1), noisy.config)
    return model_forward(padded, net, mode)[:, tau:]


def loss(pred: CirmMask, target: CirmMask) -> float:
    """Mean squared error over both mask planes."""
    p, t = pred.stack(), target.stack()
    if p.shape != t.shape:
        raise ShapeError(f"prediction {p.shape} and target {t.shape} differ")
    return float(np.mean((p - t) ** 2))


def delayed_mse(pred, target, look_ahead):
    """MSE between emitted predictions and delayed targets, plus its gradient.

    ``pred`` and ``target`` are (N, 2, F, T); output frame t is compared with
    target frame ``t - look_ahead``, so warm-up frames are excluded.
    """
    T = pred.shape[-1]
    if T <= look_ahead:
        raise ShapeError("sequence shorter than the output delay")
    diff = pred[..., look_ahead:] - target[..., : T - look_ahead]
    value = float(np.mean(diff * diff))
    grad = np.zeros_like(pred)
    grad[..., look_ahead:] = 2.0 * diff / diff.size
    return value, grad
