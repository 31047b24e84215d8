"""Training loop with dynamic mixing, per-epoch validation and checkpointing."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .enhance import enhance_waveform
from .metrics import si_sdr
from .model import EnhancerNet, ModelConfig, cirm_target, delayed_mse
from .nn import adam_step, clip_grad_norm

log = logging.getLogger(__name__)


@dataclass
class TrainReport:
    epoch_loss: list = field(default_factory=list)
    step_loss: list = field(default_factory=list)
    val_sisdr: list = field(default_factory=list)
    val_noisy_sisdr: float | None = None
    checkpoints: list = field(default_factory=list)
    seconds: float = 0.0

    def lines(self):
        for e, loss in enumerate(self.epoch_loss):
            val = f" val_si_sdr={self.val_sisdr[e]:.3f}" if e < len(self.val_sisdr) else ""
            yield f"epoch={e + 1} loss={loss:.6f}{val}"
        if self.val_noisy_sisdr is not None:
            yield f"noisy_si_sdr={self.val_noisy_sisdr:.3f}"


def batch_arrays(pairs, cfg: ModelConfig, trim=True, dtype=np.float64):
    """Stack spectrogram pairs into network inputs and compressed mask targets.

    With ``trim``, trailing all-zero (padding) frames beyond what the output
    delay needs are dropped; they carry no signal and only add cost.
    """
    re = np.stack([y.re for y, _ in pairs])
    im = np.stack([y.im for y, _ in pairs])
    tgt = np.stack([cirm_target(y, s, cfg.cirm_k, cfg.cirm_c).stack() for y, s in pairs])
    if trim:
        active = np.flatnonzero(np.any(re != 0, axis=(0, 1)) | np.any(im != 0, axis=(0, 1)))
        n_valid = int(active[-1]) + 1 if active.size else 1
        keep = min(re.shape[-1], n_valid + cfg.look_ahead)
        re, im, tgt = re[..., :keep], im[..., :keep], tgt[..., :keep]
    return re.astype(dtype), im.astype(dtype), tgt.astype(dtype)


def train_step(net: EnhancerNet, params, re, im, target, lr=1e-3, clip=10.0) -> float:
    net.zero_grad()
    out = net.forward(re, im)
    value, grad = delayed_mse(out, target, net.cfg.look_ahead)
    net.backward(grad)
    clip_grad_norm(params, clip)
    adam_step(params, lr)
    return value


def evaluate(net: EnhancerNet, val_set, mode=None) -> float:
    """Mean SI-SDR of enhanced validation mixtures."""
    mode = mode or net.cfg.train_mode
    scores = [si_sdr(enhance_waveform(noisy, net, mode), clean) for noisy, clean in val_set]
    net.set_mode(net.cfg.train_mode)
    return float(np.mean(scores))


def train(
    cfg: ModelConfig,
    data_source,
    epochs,
    seed=0,
    out_dir=None,
    lr=1e-3,
    batch_size=1,
    clip=10.0,
    val_set=None,
    resume=None,
    time_budget=None,
    progress=None,
    dtype=np.float64,
):
    """Train for ``epochs`` epochs; returns ``(Checkpoint, TrainReport)``.

    ``data_source`` exposes ``len()`` and ``pair(epoch, i)`` returning
    ``(noisy, clean)`` spectrograms. Everything is a deterministic function
    of ``seed``. With ``resume`` (checkpoint path or object) training
    continues after the checkpoint's last completed epoch. With
    ``time_budget`` (seconds) no epoch is started that would be expected to
    end past the budget, judged by the mean epoch time so far. ``dtype`` sets
    the compute precision (optimiser moments stay in float64).
    """
    if len(data_source) == 0:
        raise ValueError("data source is empty")
    if resume is not None:
        ckpt = load_checkpoint(resume) if not isinstance(resume, Checkpoint) else resume
        net, start = ckpt.net, ckpt.epoch
        cfg = net.cfg
    else:
        net, start = EnhancerNet(cfg), 0
    net.set_mode(cfg.train_mode)
    net.astype(dtype)
    params = net.param_set()
    params.step = getattr(net, "adam_step", 0)
    report = TrainReport()
    if val_set:
        report.val_noisy_sisdr = float(np.mean([si_sdr(n, c) for n, c in val_set]))
    out_dir = Path(out_dir) if out_dir else None
    if out_dir:
        out_dir.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    n = len(data_source)
    done = start
    for epoch in range(start, epochs):
        order = np.random.default_rng([seed, epoch]).permutation(n)
        losses = []
        for b in range(0, n, batch_size):
            pairs = [data_source.pair(epoch, int(i)) for i in order[b : b + batch_size]]
            re, im, tgt = batch_arrays(pairs, cfg, dtype=dtype)
            losses.append(train_step(net, params, re, im, tgt, lr, clip))
            if progress:
                progress(epoch, b // batch_size, losses[-1])
        report.step_loss.extend(losses)
        report.epoch_loss.append(float(np.mean(losses)))
        if val_set:
            report.val_sisdr.append(evaluate(net, val_set))
        net.adam_step = params.step
        log.info("epoch %d loss %.5f", epoch + 1, report.epoch_loss[-1])
        if out_dir:
            path = out_dir / f"epoch{epoch + 1:03d}.ckpt"
            save_checkpoint(path, net, epoch + 1, params.step)
            report.checkpoints.append(path)
        done = epoch + 1
        if time_budget is not None:
            elapsed = time.perf_counter() - t0
            per_epoch = elapsed / (done - start)
            if elapsed + per_epoch > time_budget:
                if done < epochs:
                    log.warning("time budget: stopping after epoch %d", done)
                break
    report.seconds = time.perf_counter() - t0
    net.astype(np.float64)
    ckpt = Checkpoint(net, done, params.step, {"epoch_loss": report.epoch_loss})
    return ckpt, report
