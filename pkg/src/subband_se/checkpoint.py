"""Checkpoint and config-file I/O.

Checkpoint layout (all integers little-endian)::

    magic      4 bytes  b"SBSE"
    version    uint32   (currently 1)
    epoch      uint64   completed training epochs
    adam_step  uint64   optimiser step counter
    cfg_len    uint32   length of the UTF-8 config text that follows
    cfg_text   key=value lines (same syntax as config files)
    n_records  uint32
    records    n_records x {
                   name_len uint16, name (UTF-8),
                   ndim uint8, dims uint64[ndim],
                   data float64[prod(dims)] little-endian }

Parameter records use the parameter name; Adam moments are stored as
``adam.m/<name>`` and ``adam.v/<name>``.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .model import EnhancerNet, ModelConfig

MAGIC = b"SBSE"
VERSION = 1


class CheckpointError(ValueError):
    pass


# ---------------------------------------------------------------------------
# key=value configs


def _format_value(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (tuple, list)):
        return ",".join(str(x) for x in v)
    return repr(v) if isinstance(v, float) else str(v)


def _parse_value(text, default):
    text = text.strip()
    if isinstance(default, bool):
        low = text.lower()
        if low not in ("true", "false", "1", "0", "yes", "no"):
            raise ValueError(f"not a boolean: {text!r}")
        return low in ("true", "1", "yes")
    if isinstance(default, int):
        return int(text)
    if isinstance(default, float):
        return float(text)
    if isinstance(default, tuple):
        return tuple(int(x) for x in text.split(",") if x.strip())
    return text


def dump_config(cfg: ModelConfig) -> str:
    return "".join(f"{k}={_format_value(v)}\n" for k, v in cfg.to_dict().items())


def parse_config(text: str, base: ModelConfig | None = None) -> ModelConfig:
    base = base or ModelConfig()
    values = base.to_dict()
    known = {f.name for f in fields(ModelConfig)}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key=value, got {line!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in known:
            raise ValueError(f"line {lineno}: unknown config key {key!r}")
        values[key] = _parse_value(val, values[key])
    return ModelConfig(**values)


def load_config(path, base: ModelConfig | None = None) -> ModelConfig:
    return parse_config(Path(path).read_text(), base)


# ---------------------------------------------------------------------------
# checkpoints


@dataclass
class Checkpoint:
    net: EnhancerNet
    epoch: int = 0
    adam_step: int = 0
    history: dict = field(default_factory=dict)

    @property
    def cfg(self) -> ModelConfig:
        return self.net.cfg


def _write_record(fh, name, arr):
    raw = name.encode()
    arr = np.ascontiguousarray(arr, dtype="<f8")
    fh.write(struct.pack("<H", len(raw)))
    fh.write(raw)
    fh.write(struct.pack("<B", arr.ndim))
    fh.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
    fh.write(arr.tobytes())


def save_checkpoint(path, net: EnhancerNet, epoch=0, adam_step=None, with_optimizer=True):
    params = list(net.named_params())
    if adam_step is None:
        adam_step = getattr(net, "adam_step", 0)
    records = [(n, p.value) for n, p in params]
    if with_optimizer:
        records += [(f"adam.m/{n}", p.m) for n, p in params]
        records += [(f"adam.v/{n}", p.v) for n, p in params]
    cfg_text = dump_config(net.cfg).encode()
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<IQQI", VERSION, epoch, adam_step, len(cfg_text)))
        fh.write(cfg_text)
        fh.write(struct.pack("<I", len(records)))
        for name, arr in records:
            _write_record(fh, name, arr)
    tmp.replace(path)
    return path


def _read_exact(fh, n):
    data = fh.read(n)
    if len(data) != n:
        raise CheckpointError("truncated checkpoint")
    return data


def load_checkpoint(path) -> Checkpoint:
    with open(path, "rb") as fh:
        if _read_exact(fh, 4) != MAGIC:
            raise CheckpointError(f"{path}: not a checkpoint file")
        version, epoch, adam_step, cfg_len = struct.unpack("<IQQI", _read_exact(fh, 24))
        if version != VERSION:
            raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
        cfg = parse_config(_read_exact(fh, cfg_len).decode())
        (n_records,) = struct.unpack("<I", _read_exact(fh, 4))
        records = {}
        for _ in range(n_records):
            (name_len,) = struct.unpack("<H", _read_exact(fh, 2))
            name = _read_exact(fh, name_len).decode()
            (ndim,) = struct.unpack("<B", _read_exact(fh, 1))
            shape = struct.unpack(f"<{ndim}Q", _read_exact(fh, 8 * ndim))
            count = int(np.prod(shape)) if ndim else 1
            data = np.frombuffer(_read_exact(fh, 8 * count), dtype="<f8")
            records[name] = data.reshape(shape).astype(np.float64)
    net = EnhancerNet(cfg)
    for name, p in net.named_params():
        if name not in records:
            raise CheckpointError(f"{path}: missing parameter {name}")
        if records[name].shape != p.shape:
            raise CheckpointError(
                f"{path}: parameter {name} has shape {records[name].shape}, model expects {p.shape}"
            )
        p.value = records[name].copy()
        if f"adam.m/{name}" in records:
            p.m = records[f"adam.m/{name}"].copy()
            p.v = records[f"adam.v/{name}"].copy()
    net.adam_step = adam_step
    return Checkpoint(net, epoch, adam_step)
