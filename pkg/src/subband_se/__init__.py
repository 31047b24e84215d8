"""Sub-band speech enhancement with multi-scale channel attention and phase-aware full-band features."""

from .checkpoint import Checkpoint, load_checkpoint, load_config, parse_config, save_checkpoint
from .datasim import DynamicMixing, MixSpec, SyntheticCorpus, mix_at_snr
from .dsp import ComplexSpectrogram, StftConfig, Waveform, istft, read_wav, stft, write_wav
from .enhance import enhance_waveform
from .estimator import SpeechEnhancer
from .metrics import si_sdr
from .model import CirmMask, EnhancerNet, ModelConfig, count_params
from .streaming import StreamState, bench, flush, push
from .training import train

__version__ = "0.1.0"

__all__ = [
    "Checkpoint", "ComplexSpectrogram", "CirmMask", "DynamicMixing", "EnhancerNet", "MixSpec",
    "ModelConfig", "SpeechEnhancer", "StftConfig", "StreamState", "SyntheticCorpus", "Waveform",
    "bench", "count_params", "enhance_waveform", "flush", "istft", "load_checkpoint",
    "load_config", "mix_at_snr", "parse_config", "push", "read_wav", "save_checkpoint",
    "si_sdr", "stft", "train", "write_wav",
]
