"""Frame-by-frame enhancement with bounded state, and the latency benchmark."""

from __future__ import annotations

import copy
import platform
import time
from dataclasses import dataclass, field

import numpy as np

from .dsp import StftConfig, irfft, rfft, wola_divide
from .model import EnhancerNet, decompress


class StreamState:
    """All mutable per-stream state; its size does not grow with stream length.

    Holds the analysis input buffer, the network's recurrent/convolutional
    state, the look-ahead delay line of noisy frames and the overlap-add
    synthesis tail. If ``dtype`` differs from the network's parameter dtype,
    the stream runs on a cast copy so that every step stays in ``dtype``
    (mixed-precision matmuls silently upcast and convert weights per call).
    """

    def __init__(self, net: EnhancerNet, stft_cfg: StftConfig | None = None, dtype=np.float64):
        self.source = net
        _, first = next(iter(net.named_params()))
        if first.value.dtype != np.dtype(dtype):
            net = copy.deepcopy(net).astype(dtype)
        self.net = net
        self.stft_cfg = stft_cfg or StftConfig()
        self.dtype = dtype
        if net.cfg.n_freqs != self.stft_cfg.n_freqs:
            raise ValueError(
                f"model expects {net.cfg.n_freqs} bins, STFT gives {self.stft_cfg.n_freqs}"
            )
        net.set_mode("causal")
        self.reset()

    def reset(self):
        cfg = self.stft_cfg
        tau = self.net.cfg.look_ahead
        self.net_state = self.net.init_state(1, self.dtype)
        self.in_buf = np.zeros(cfg.window_len)
        self.in_fill = 0
        self.delay = np.zeros((tau + 1, cfg.n_freqs), dtype=np.complex128)
        self.ola = np.zeros(cfg.window_len)
        self.frames_in = 0
        self.frames_out = 0
        self.samples_in = 0
        self.samples_out = 0
        self.finished = False

    def nbytes(self) -> int:
        total = 0
        stack = [self.net_state, self.in_buf, self.delay, self.ola]
        while stack:
            item = stack.pop()
            if isinstance(item, np.ndarray):
                total += item.nbytes
            elif isinstance(item, dict):
                stack.extend(item.values())
            elif isinstance(item, (list, tuple)):
                stack.extend(item)
        return total


def _norm_interior(cfg):
    w2 = cfg.window**2
    return w2[: cfg.hop] + w2[cfg.hop :]


def _model_frame(state: StreamState, spec_frame):
    """Push one analysis frame through the network; returns the emitted output, if any."""
    net = state.net
    tau = net.cfg.look_ahead
    re = spec_frame.real[None].astype(state.dtype)
    im = spec_frame.imag[None].astype(state.dtype)
    out = net.step(re, im, state.net_state)[0].astype(np.float64)
    state.delay = np.roll(state.delay, -1, axis=0)
    state.delay[-1] = spec_frame
    t = state.frames_in
    state.frames_in += 1
    if t < tau:
        return None
    mask = decompress(out, net.cfg.cirm_k, net.cfg.cirm_c)
    return (mask[0] + 1j * mask[1]) * state.delay[0]


def _synthesize(state: StreamState, enhanced):
    """Overlap-add one enhanced frame; returns the samples it finalises."""
    cfg = state.stft_cfg
    hop = cfg.hop
    frame = irfft(enhanced, cfg.fft_size) * cfg.window
    state.ola[:hop] = state.ola[hop:]
    state.ola[hop:] = 0.0
    state.ola += frame
    w2 = cfg.window**2
    norm = w2[:hop] if state.frames_out == 0 else _norm_interior(cfg)
    state.frames_out += 1
    return wola_divide(state.ola[:hop], norm, cfg)


def _emit(state, chunks, samples):
    state.samples_out += len(samples)
    chunks.append(samples)


def push(state: StreamState, samples) -> np.ndarray:
    """Consume input samples, return all enhanced samples finalised so far."""
    if state.finished:
        raise RuntimeError("stream already flushed; call reset() first")
    cfg = state.stft_cfg
    samples = np.asarray(samples, dtype=np.float64)
    out = []
    pos = 0
    while pos < len(samples):
        take = min(cfg.window_len - state.in_fill, len(samples) - pos)
        state.in_buf[state.in_fill : state.in_fill + take] = samples[pos : pos + take]
        state.in_fill += take
        pos += take
        if state.in_fill == cfg.window_len:
            spec = rfft(state.in_buf * cfg.window)
            enhanced = _model_frame(state, spec)
            if enhanced is not None:
                _emit(state, out, _synthesize(state, enhanced))
            state.in_buf[: cfg.hop] = state.in_buf[cfg.hop :]
            state.in_fill = cfg.hop
    state.samples_in += len(samples)
    return np.concatenate(out) if out else np.zeros(0)


def flush(state: StreamState) -> np.ndarray:
    """Drain the look-ahead with zero frames and emit the tail up to the input length."""
    cfg = state.stft_cfg
    out = []
    if state.frames_in:
        zero = np.zeros(cfg.n_freqs, dtype=np.complex128)
        for _ in range(state.net.cfg.look_ahead):
            enhanced = _model_frame(state, zero)
            if enhanced is not None:
                _emit(state, out, _synthesize(state, enhanced))
        _emit(state, out, wola_divide(state.ola[cfg.hop :], cfg.window[cfg.hop :] ** 2, cfg))
    remaining = state.samples_in - state.samples_out
    if remaining > 0:
        _emit(state, out, np.zeros(remaining))
    state.finished = True
    res = np.concatenate(out) if out else np.zeros(0)
    if state.samples_out > state.samples_in:
        res = res[: len(res) - (state.samples_out - state.samples_in)]
        state.samples_out = state.samples_in
    return res


def enhance_stream(chunks, net: EnhancerNet, state: StreamState | None = None):
    """Generator: enhanced sample blocks for an iterable of input sample blocks.

    The final block (look-ahead drain and tail) is yielded once the input
    iterator is exhausted, so the concatenated output has the input's length.
    """
    state = state or StreamState(net)
    if state.source is not net:
        raise ValueError("stream state belongs to a different model")
    for chunk in chunks:
        yield push(state, chunk)
    yield flush(state)


def stream_waveform(samples, net: EnhancerNet, chunk=256, dtype=np.float64) -> np.ndarray:
    state = StreamState(net, dtype=dtype)
    blocks = (samples[i : i + chunk] for i in range(0, len(samples), chunk))
    return np.concatenate(list(enhance_stream(blocks, net, state)))


# ---------------------------------------------------------------------------
# benchmark


def platform_descriptor() -> str:
    cpu = platform.processor() or platform.machine()
    try:
        with open("/proc/cpuinfo") as fh:
            for line in fh:
                if line.startswith("model name"):
                    cpu = line.split(":", 1)[1].strip()
                    break
    except OSError:
        pass
    return f"{cpu}; {platform.system()} {platform.release()}; python {platform.python_version()}; numpy {np.__version__}"


@dataclass
class BenchReport:
    frame_ms: np.ndarray
    platform: str = field(default_factory=platform_descriptor)
    frame_budget_ms: float = 32.0
    hop_ms: float = 16.0
    algorithmic_latency_ms: float = 0.0

    def __post_init__(self):
        if len(self.frame_ms) == 0:
            raise ValueError("benchmark produced no timed frames")

    @property
    def mean_ms(self):
        return float(np.mean(self.frame_ms))

    @property
    def median_ms(self):
        return float(np.median(self.frame_ms))

    @property
    def p99_ms(self):
        return float(np.percentile(self.frame_ms, 99))

    @property
    def rtf(self):
        return self.mean_ms / self.frame_budget_ms

    @property
    def hop_rtf(self):
        return self.mean_ms / self.hop_ms

    def as_dict(self):
        return {
            "frames": len(self.frame_ms),
            "mean_ms": self.mean_ms,
            "median_ms": self.median_ms,
            "p99_ms": self.p99_ms,
            "rtf": self.rtf,
            "hop_rtf": self.hop_rtf,
            "algorithmic_latency_ms": self.algorithmic_latency_ms,
            "platform": self.platform,
        }

    def __str__(self):
        return "\n".join(f"{k}={v:.4f}" if isinstance(v, float) else f"{k}={v}"
                         for k, v in self.as_dict().items())


def bench(net: EnhancerNet, duration_s=5.0, reps=1, warmup=50, dtype=np.float32, seed=0) -> BenchReport:
    """Time each streamed frame (analysis, network step, synthesis)."""
    cfg = StftConfig()
    n = int(round(duration_s * 16000))
    if n < cfg.window_len:
        raise ValueError("benchmark input is shorter than one frame")
    rng = np.random.default_rng(seed)
    x = 0.1 * rng.standard_normal(n)
    times = []
    for _ in range(max(reps, 1)):
        state = StreamState(net, cfg, dtype=dtype)
        frame_times = []
        for i in range(0, n - cfg.hop + 1, cfg.hop):
            t0 = time.perf_counter()
            push(state, x[i : i + cfg.hop])
            frame_times.append(time.perf_counter() - t0)
        # the first hop only fills the buffer; no frame is processed there
        times.extend(frame_times[1 + warmup :])
    latency = (cfg.hop * (net.cfg.look_ahead + 1) + cfg.window_len) / 16.0
    return BenchReport(np.asarray(times) * 1e3, algorithmic_latency_ms=latency)
