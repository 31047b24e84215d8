"""Command-line entry point: ``subband-se <command> [options]``."""

from __future__ import annotations

import argparse
import itertools
import logging
import sys
from pathlib import Path

import numpy as np

from .checkpoint import dump_config, load_checkpoint, load_config
from .datasim import DynamicMixing, ManifestCorpus, SyntheticCorpus, validation_set
from .dsp import read_wav
from .enhance import enhance_offline
from .metrics import si_sdr
from .model import EnhancerNet, ModelConfig, count_params
from .streaming import bench
from .training import train

_DTYPES = {"float32": np.float32, "float64": np.float64}
ABLATION_FLAGS = {"mulca": "use_mulca", "phase": "use_phase_branches"}


def _write_report(path, items):
    if path:
        Path(path).write_text("".join(f"{k}={v}\n" for k, v in items))


def _emit(lines, report_path=None, items=None):
    for line in lines:
        print(line)
    _write_report(report_path, items if items is not None else [])


def _load_cfg(path):
    return load_config(path) if path else ModelConfig()


def _corpus(args):
    if args.data_dir:
        return ManifestCorpus.from_dir(args.data_dir)
    return SyntheticCorpus(n_clean=args.synthetic, seed=args.seed)


def _val_set(args):
    if args.val <= 0:
        return None
    # held-out clips come from a differently seeded synthetic corpus
    return validation_set(SyntheticCorpus(n_clean=args.val, seed=args.seed + 1), args.val, args.seed + 7)


# ---------------------------------------------------------------------------
# commands


def cmd_train(args):
    cfg = _load_cfg(args.config)
    source = DynamicMixing(_corpus(args), seed=args.seed, T_frames=cfg.train_frames)
    ckpt, report = train(
        cfg, source, args.epochs, seed=args.seed, out_dir=args.out, lr=args.lr,
        batch_size=args.batch_size, val_set=_val_set(args), resume=args.resume,
        time_budget=args.time_budget, dtype=_DTYPES[args.dtype],
    )
    lines = list(report.lines()) + [f"checkpoint={p}" for p in report.checkpoints[-1:]]
    items = [(f"epoch{e + 1}.loss", v) for e, v in enumerate(report.epoch_loss)]
    items += [(f"epoch{e + 1}.val_si_sdr", v) for e, v in enumerate(report.val_sisdr)]
    if report.val_noisy_sisdr is not None:
        items.append(("noisy_si_sdr", report.val_noisy_sisdr))
    items.append(("seconds", report.seconds))
    _emit(lines, args.report, items)
    return 0


def cmd_enhance(args):
    out = enhance_offline(args.input, args.ckpt, args.output, mode=args.mode, stream=args.stream)
    lines = [f"wrote {args.output} samples={len(out.samples)} clipped={out.clipped}"]
    _emit(lines, args.report, [("samples", len(out.samples)), ("clipped", out.clipped)])
    return 0


def cmd_stream_bench(args):
    net = load_checkpoint(args.ckpt).net if args.ckpt else EnhancerNet(_load_cfg(args.config))
    rep = bench(net, args.seconds, args.reps, warmup=args.warmup, dtype=_DTYPES[args.dtype])
    verdict = "PASS" if rep.mean_ms < rep.frame_budget_ms else "FAIL"
    lines = str(rep).splitlines() + [f"real_time={verdict}"]
    _emit(lines, args.report, list(rep.as_dict().items()) + [("real_time", verdict)])
    return 0


def cmd_metrics(args):
    est, ref = read_wav(args.est), read_wav(args.ref)
    value = si_sdr(est, ref)
    _emit([f"si_sdr={value:.4f}"], args.report, [("si_sdr", value)])
    return 0


def cmd_inspect(args):
    net = load_checkpoint(args.ckpt).net if args.ckpt else EnhancerNet(_load_cfg(args.config))
    breakdown = net.param_breakdown()
    total = count_params(net)
    items = list(breakdown.items()) + [("total", total)]
    lines = [f"{k}={v}" for k, v in items]
    _emit(lines, args.report, items)
    return 0


def ablation_grid(flags):
    """Rows of config overrides for every on/off combination of ``flags``."""
    keys = [ABLATION_FLAGS[f] for f in flags]
    rows = []
    for removed in itertools.product((False, True), repeat=len(keys)):
        rows.append({k: not r for k, r in zip(keys, removed)})
    return rows


def _row_name(row):
    off = [f for f, k in ABLATION_FLAGS.items() if k in row and not row[k]]
    return "full" if not off else "-" + ",-".join(off)


def cmd_ablate(args):
    flags = [f.strip() for f in args.flags.split(",") if f.strip()]
    bad = [f for f in flags if f not in ABLATION_FLAGS]
    if bad or not flags:
        raise SystemExit(f"--flags must list some of {sorted(ABLATION_FLAGS)}; got {args.flags!r}")
    base = _load_cfg(args.config)
    corpus = _corpus(args)
    val = _val_set(args)
    lines = ["variant use_mulca use_phase_branches params final_loss val_si_sdr"]
    items = []
    for row in ablation_grid(flags):
        cfg = ModelConfig(**{**base.to_dict(), **row})
        source = DynamicMixing(corpus, seed=args.seed, T_frames=cfg.train_frames)
        ckpt, rep = train(cfg, source, args.epochs, seed=args.seed, lr=args.lr,
                          val_set=val, dtype=_DTYPES[args.dtype])
        name = _row_name(row)
        score = rep.val_sisdr[-1] if rep.val_sisdr else float("nan")
        n_params = count_params(ckpt.net)
        lines.append(f"{name} {cfg.use_mulca} {cfg.use_phase_branches} {n_params} "
                     f"{rep.epoch_loss[-1]:.6f} {score:.3f}")
        items += [(f"{name}.params", n_params), (f"{name}.final_loss", rep.epoch_loss[-1]),
                  (f"{name}.val_si_sdr", score)]
    if val:
        noisy = float(np.mean([si_sdr(n, c) for n, c in val]))
        lines.append(f"noisy_si_sdr={noisy:.3f}")
        items.append(("noisy_si_sdr", noisy))
    _emit(lines, args.report, items)
    return 0


def cmd_config(args):
    sys.stdout.write(dump_config(_load_cfg(args.config)))
    return 0


# ---------------------------------------------------------------------------
# parser


def _data_args(p):
    src = p.add_mutually_exclusive_group()
    src.add_argument("--data-dir", help="directory holding clean.txt / noise.txt [/ rir.txt] manifests")
    src.add_argument("--synthetic", type=int, default=200, metavar="N",
                     help="train on N synthetic clean clips (default 200)")
    p.add_argument("--val", type=int, default=20, help="held-out synthetic clips (0 disables)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epochs", type=int, default=1)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--dtype", choices=sorted(_DTYPES), default="float64")


def build_parser():
    parser = argparse.ArgumentParser(prog="subband-se", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_):
        p = sub.add_parser(name, help=help_)
        p.set_defaults(func=func)
        p.add_argument("--report", metavar="FILE", help="also write results as key=value lines")
        return p

    p = add("train", cmd_train, "train a model")
    p.add_argument("--config", help="key=value model config file")
    _data_args(p)
    p.add_argument("--out", required=True, help="checkpoint directory")
    p.add_argument("--batch-size", type=int, default=1)
    p.add_argument("--resume", help="checkpoint to continue from")
    p.add_argument("--time-budget", type=float, help="stop after the epoch that exceeds this many seconds")

    p = add("enhance", cmd_enhance, "enhance a WAV file")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", dest="output", required=True)
    p.add_argument("--ckpt", required=True)
    p.add_argument("--stream", action="store_true", help="use the frame-by-frame streaming engine")
    p.add_argument("--mode", choices=("causal", "offline"), default="causal")

    p = add("stream-bench", cmd_stream_bench, "time per-frame streaming inference")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--ckpt")
    g.add_argument("--config", help="benchmark a freshly initialised model with this config")
    p.add_argument("--seconds", type=float, default=5.0)
    p.add_argument("--reps", type=int, default=1)
    p.add_argument("--warmup", type=int, default=50)
    p.add_argument("--dtype", choices=sorted(_DTYPES), default="float32")

    p = add("metrics", cmd_metrics, "SI-SDR of an estimate against a reference")
    p.add_argument("--est", required=True)
    p.add_argument("--ref", required=True)

    p = add("inspect", cmd_inspect, "parameter counts per module")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--ckpt")
    g.add_argument("--config")

    p = add("ablate", cmd_ablate, "train/evaluate the on/off grid of ablation switches")
    p.add_argument("--config")
    p.add_argument("--flags", default="mulca,phase", help="comma list from: mulca, phase")
    _data_args(p)

    p = add("config", cmd_config, "print the effective config as key=value")
    p.add_argument("--config")
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
