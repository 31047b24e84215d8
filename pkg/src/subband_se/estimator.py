"""scikit-learn style wrapper around training and enhancement."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .datasim import ArrayPairs
from .dsp import StftConfig
from .enhance import enhance_waveform
from .metrics import si_sdr
from .model import ModelConfig
from .training import train
from .validation import check_pairs, check_positive_int, check_waveforms

_DTYPES = {"float32": np.float32, "float64": np.float64}


class SpeechEnhancer(BaseEstimator, TransformerMixin):
    """Mask-based speech enhancer with a fit/transform interface.

    ``fit(X, y)`` trains on lists of noisy (``X``) and clean (``y``)
    waveforms sampled at 16 kHz; ``transform(X)`` returns enhanced
    waveforms of the same lengths. Model hyper-parameters not exposed
    here can be passed as a dict through ``model_params``.

    Parameters
    ----------
    bottleneck, hidden : int
        Extractor channel width and sub-band LSTM width.
    use_mulca, use_phase_branches : bool
        Ablation switches.
    epochs, lr, batch_size, clip : training controls.
    mode : {"causal", "offline"}
        Inference mode used by ``transform``.
    dtype : {"float64", "float32"}
        Compute precision during training.
    """

    def __init__(
        self,
        bottleneck=512,
        hidden=384,
        use_mulca=True,
        use_phase_branches=True,
        epochs=1,
        lr=1e-3,
        batch_size=1,
        clip=10.0,
        mode="causal",
        dtype="float64",
        model_params=None,
        random_state=0,
    ):
        self.bottleneck = bottleneck
        self.hidden = hidden
        self.use_mulca = use_mulca
        self.use_phase_branches = use_phase_branches
        self.epochs = epochs
        self.lr = lr
        self.batch_size = batch_size
        self.clip = clip
        self.mode = mode
        self.dtype = dtype
        self.model_params = model_params
        self.random_state = random_state

    def _model_config(self) -> ModelConfig:
        extra = dict(self.model_params or {})
        return ModelConfig(
            bottleneck=self.bottleneck,
            hidden=self.hidden,
            use_mulca=self.use_mulca,
            use_phase_branches=self.use_phase_branches,
            seed=self.random_state,
            **extra,
        )

    def _check_params(self):
        check_positive_int(self.epochs, "epochs")
        check_positive_int(self.batch_size, "batch_size")
        if self.mode not in ("causal", "offline"):
            raise ValueError(f"mode must be 'causal' or 'offline', got {self.mode!r}")
        if self.dtype not in _DTYPES:
            raise ValueError(f"dtype must be one of {sorted(_DTYPES)}, got {self.dtype!r}")
        if not self.lr > 0:
            raise ValueError("lr must be positive")

    def fit(self, X, y):
        self._check_params()
        cfg = self._model_config()
        window = StftConfig().window_len
        noisy, clean = check_pairs(X, y, min_len=window)
        source = ArrayPairs(noisy, clean, seed=self.random_state, T_frames=cfg.train_frames)
        ckpt, report = train(
            cfg,
            source,
            self.epochs,
            seed=self.random_state,
            lr=self.lr,
            batch_size=self.batch_size,
            clip=self.clip,
            dtype=_DTYPES[self.dtype],
        )
        self.checkpoint_ = ckpt
        self.net_ = ckpt.net
        self.loss_curve_ = list(report.epoch_loss)
        self.n_epochs_ = ckpt.epoch
        return self

    def transform(self, X):
        check_is_fitted(self, "net_")
        signals = check_waveforms(X)
        out = [enhance_waveform(x, self.net_, self.mode) for x in signals]
        if isinstance(X, np.ndarray) and X.ndim == 1:
            return out[0]
        return out

    def predict(self, X):
        return self.transform(X)

    def score(self, X, y):
        """Mean SI-SDR (dB) of the enhanced signals against ``y``."""
        est = self.transform(X)
        est = [est] if isinstance(est, np.ndarray) else est
        refs = check_waveforms(y, "y")
        return float(np.mean([si_sdr(e, r) for e, r in zip(est, refs)]))

    def save(self, path):
        check_is_fitted(self, "net_")
        return save_checkpoint(path, self.net_, self.n_epochs_, getattr(self.net_, "adam_step", 0))

    @classmethod
    def from_checkpoint(cls, path_or_ckpt, **kwargs):
        ckpt = path_or_ckpt if isinstance(path_or_ckpt, Checkpoint) else load_checkpoint(path_or_ckpt)
        cfg = ckpt.cfg
        known = {"bottleneck", "hidden", "use_mulca", "use_phase_branches"}
        base = {k: getattr(cfg, k) for k in known}
        rest = {k: v for k, v in cfg.to_dict().items() if k not in known | {"seed"}}
        est = cls(**base, model_params=rest, random_state=cfg.seed, **kwargs)
        est.checkpoint_ = ckpt
        est.net_ = ckpt.net
        est.loss_curve_ = list(ckpt.history.get("epoch_loss", []))
        est.n_epochs_ = ckpt.epoch
        return est
