"""Command-line entry point: ``staug <command> ...``.

Every command writes its outputs plus ``manifest.json`` under ``--out-dir``.
``staug replay manifest.json`` re-runs a command from its manifest.
Exit codes: 0 success, 2 usage/configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import os
import statistics
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .augment import (
    AugmentConfig,
    Augmenter,
    CacheMissError,
    DecompositionCache,
    SampleTrace,
    precompute,
    staug_sample,
)
from .baselines import moving_average_filter, segment_permutation
from .data_io import (
    CsvFormatError,
    SplitSpec,
    SynthSpec,
    fit_normalizer,
    load_csv,
    scarcity_spec,
    split,
    subsample_train,
    synth_generate,
    write_csv,
)
from .emd import EmdConfig, decompose, imf_oscillation_defects
from .forecaster import LinearForecastModel, TrainConfig, TrainingDiverged, evaluate, save_model, train
from .sampling import ConfigError, RandomSource
from .series import MultivariateSeries, ShapeError, WindowBoundsError, enumerate_windows

logger = logging.getLogger("staug")

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 2, 3
AUG_CHOICES = ("none", "staug", "staug-nofreq", "staug-notime", "filter", "permute")
SYNTH_PRESETS = ("scarcity", "two-tone")


class UsageError(Exception):
    pass


# --------------------------------------------------------------------------- helpers


def _canonical(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def _hash(obj) -> str:
    return hashlib.sha256(_canonical(obj).encode()).hexdigest()[:16]


def _file_hash(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _write_json(path: Path, payload) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _resolve_seed(seed: Optional[int]) -> int:
    if seed is not None:
        return seed
    env = os.environ.get("STAUG_SEED")
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"STAUG_SEED must be an integer, got {env!r}") from None


def _synth_from_arg(value: str) -> SynthSpec:
    if value == "scarcity":
        return scarcity_spec()
    if value == "two-tone":
        return SynthSpec(512, 1, [[(0.05, 1.0), (0.4, 1.0)]], [0.002], 0.0, 0)
    path = Path(value)
    if not path.exists():
        raise UsageError(f"--synth expects one of {SYNTH_PRESETS} or a JSON spec file; {value!r} not found")
    try:
        return SynthSpec(**json.loads(path.read_text()))
    except (TypeError, json.JSONDecodeError) as exc:
        raise UsageError(f"{path}: invalid synthetic spec ({exc})") from None


def _load_source(args) -> tuple[MultivariateSeries, dict]:
    """Series plus a provenance record for the manifest."""
    if getattr(args, "synth", None):
        spec = _synth_from_arg(args.synth)
        return synth_generate(spec), {"synth": spec.to_dict(), "content_hash": _hash(spec.to_dict())}
    if not args.input:
        raise UsageError("one of --input or --synth is required")
    path = Path(args.input)
    if not path.is_file():
        raise UsageError(f"input file not found: {path}")
    return load_csv(path), {"input": str(path), "content_hash": _file_hash(path)}


def _emd_config(args) -> EmdConfig:
    return EmdConfig(
        sd_threshold=args.sd_threshold,
        max_sift_iters=args.max_sift_iters,
        max_imfs=args.max_imfs,
        boundary_extrema=args.boundary_extrema,
    )


def _augment_config(args, aug: str = "staug") -> AugmentConfig:
    return AugmentConfig(
        weight_low=args.weight_low,
        weight_high=args.weight_high,
        alpha=args.alpha,
        include_residue=args.residue,
        enable_freq=aug in ("staug", "staug-notime") and not getattr(args, "no_freq", False),
        enable_time=aug in ("staug", "staug-nofreq") and not getattr(args, "no_time", False),
    )


def _manifest(command: str, args, extra: dict) -> dict:
    argv = {k: v for k, v in vars(args).items() if k not in ("func", "out_dir")}
    return {"tool": "staug", "version": __version__, "command": command, "args": argv, **extra}


# ---------------------------------------------------------------------- commands


def cmd_synth(args) -> int:
    spec = _synth_from_arg(args.preset)
    series = synth_generate(spec)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_csv(series, out, time_header="step")
    print(f"wrote {series.n_channels} channel(s) x {series.length} steps to {out}")
    return EXIT_OK


def cmd_decompose(args) -> int:
    series, source = _load_source(args)
    cfg = _emd_config(args)
    if args.channel is not None and not 0 <= args.channel < series.n_channels:
        raise UsageError(f"--channel {args.channel} out of range for {series.n_channels} channel(s)")
    stop = series.length if args.length is None else args.start + args.length
    if not 0 <= args.start < stop <= series.length:
        raise UsageError(f"--start/--length select steps [{args.start}, {stop}) outside [0, {series.length})")
    channels = range(series.n_channels) if args.channel is None else [args.channel]
    names = series.channel_names or tuple(f"ch{k}" for k in range(series.n_channels))

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    outputs = []
    for k in channels:
        dec = decompose(series.values[k, args.start:stop], cfg)
        fname = f"channel_{k}.csv"
        with (out_dir / fname).open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["step", *(f"imf_{i + 1}" for i in range(dec.n_imfs)), "residue"])
            mat = dec.as_matrix()
            for t in range(mat.shape[1]):
                w.writerow([args.start + t, *(repr(float(v)) for v in mat[:, t])])
        outputs.append({
            "channel": k,
            "name": names[k],
            "file": fname,
            "n_imfs": dec.n_imfs,
            "stop_reason": dec.stop_reason,
            "oscillation_defects": imf_oscillation_defects(dec),
        })
    _write_json(out_dir / "manifest.json", _manifest("decompose", args, {"source": source, "emd": vars(cfg), "outputs": outputs}))
    print(f"decomposed {len(outputs)} channel(s) into {out_dir}")
    return EXIT_OK


def _training_windows(args, series: MultivariateSeries, d: int, h: int):
    if getattr(args, "whole_series", False):
        return enumerate_windows(series, d, h, args.stride)
    train_s, _, _ = split(series, SplitSpec(), d, h)
    return enumerate_windows(train_s, d, h, args.stride)


def cmd_augment(args) -> int:
    series, source = _load_source(args)
    seed = _resolve_seed(args.seed)
    cfg = _augment_config(args, "staug")
    windows = _training_windows(args, series, args.context, args.horizon)
    if not windows:
        raise UsageError(f"series of length {series.length} holds no window of {args.context}+{args.horizon} steps")
    cache = precompute(windows, _emd_config(args), jobs=args.jobs) if cfg.enable_freq else None
    rng = RandomSource(seed)
    names = series.channel_names or tuple(f"ch{k}" for k in range(series.n_channels))

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    samples = []
    for s in range(args.count):
        i = int(rng.child(0, s).integers(0, len(windows)))
        trace = SampleTrace(i)
        out = staug_sample(i, windows, cache, cfg, rng.child(1, s), trace)
        fname = f"aug_{s:04d}.csv"
        full = out.full()
        with (out_dir / fname).open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["step", *names])
            for t in range(full.shape[1]):
                w.writerow([t, *(repr(float(v)) for v in full[:, t])])
        rec = trace.to_dict()
        rec.update(file=fname, source_offset_i=windows[i].source_offset,
                   source_offset_j=None if trace.index_j is None else windows[trace.index_j].source_offset)
        samples.append(rec)
    _write_json(out_dir / "manifest.json", _manifest("augment", args, {
        "seed": seed, "source": source, "augment": cfg.to_dict(), "samples": samples,
    }))
    print(f"wrote {args.count} augmented window(s) to {out_dir}")
    return EXIT_OK


class _BaselineAugmenter:
    def __init__(self, dataset, kind: str, rng: RandomSource, kernel: int, segments: int):
        self.dataset, self.kind, self.rng = dataset, kind, rng
        self.kernel, self.segments = kernel, segments

    def __call__(self, index: int, key=()):
        w = self.dataset[index]
        if self.kind == "filter":
            return moving_average_filter(w, self.kernel)
        return segment_permutation(w, self.segments, self.rng.child(*key, index))


class Experiment:
    """Shared data preparation for train-eval and robustness sweeps."""

    def __init__(self, args):
        self.args = args
        series, self.source = _load_source(args)
        d, h = args.context, args.horizon
        if d < 1 or h < 1:
            raise UsageError("--context and --horizon must be >= 1")
        train_s, val_s, test_s = split(series, SplitSpec(), d, h, require_all=True)
        self.normalizer = fit_normalizer(train_s)
        self.train_windows = enumerate_windows(self.normalizer.apply(train_s), d, h, args.stride)
        self.val_windows = enumerate_windows(self.normalizer.apply(val_s), d, h)
        self.test_windows = enumerate_windows(self.normalizer.apply(test_s), d, h)
        self.emd_cfg = _emd_config(args)
        self.cache = DecompositionCache("train")
        self.n_channels = series.n_channels

    def train_config(self, seed: int) -> TrainConfig:
        a = self.args
        return TrainConfig(a.lr, a.decay, a.epochs, a.batch_size, seed)

    def run(self, aug: str, fraction: float, seed: int) -> dict:
        a = self.args
        root = RandomSource(seed)
        subset = subsample_train(self.train_windows, fraction, root.child(1))
        augmenter = None
        if aug in ("staug", "staug-nofreq", "staug-notime"):
            cfg = _augment_config(a, aug)
            if cfg.enable_freq:
                precompute(subset, self.emd_cfg, cache=self.cache, jobs=a.jobs)
            augmenter = Augmenter(subset, self.cache, cfg, root.child(2))
        elif aug in ("filter", "permute"):
            augmenter = _BaselineAugmenter(subset, aug, root.child(2), a.filter_kernel, a.permute_segments)
        model0 = LinearForecastModel.zeros(self.n_channels, a.context, a.horizon)
        model, losses = train(model0, subset, augmenter, self.train_config(seed), root.child(3))
        test = evaluate(model, self.test_windows)
        val = evaluate(model, self.val_windows)
        return {
            "seed": seed,
            "aug": aug,
            "train_fraction": fraction,
            "n_train_windows": len(subset),
            "mse": test["mse"],
            "mae": test["mae"],
            "val_mse": val["mse"],
            "val_mae": val["mae"],
            "train_loss": losses,
            "_model": model,
        }


def _summary(rows: list[dict]) -> dict:
    mses = [r["mse"] for r in rows]
    maes = [r["mae"] for r in rows]
    return {
        "mse_mean": statistics.fmean(mses),
        "mse_std": statistics.pstdev(mses),
        "mse_median": statistics.median(mses),
        "mae_mean": statistics.fmean(maes),
        "mae_std": statistics.pstdev(maes),
        "mae_median": statistics.median(maes),
    }


def _experiment_config(args, seed: int) -> dict:
    keys = ("context", "horizon", "aug", "alpha", "weight_low", "weight_high", "residue", "train_fraction",
            "epochs", "lr", "decay", "batch_size", "stride", "filter_kernel", "permute_segments",
            "sd_threshold", "max_sift_iters", "max_imfs", "boundary_extrema", "fractions", "augs", "runs")
    cfg = {k: getattr(args, k) for k in keys if hasattr(args, k)}
    cfg["seed"] = seed
    return cfg


def cmd_train_eval(args) -> int:
    seed = _resolve_seed(args.seed)
    exp = Experiment(args)
    seeds = [seed + r for r in range(args.runs)]
    rows = [exp.run(args.aug, args.train_fraction, s) for s in seeds]
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if args.save_model:
        save_model(rows[0]["_model"], out_dir / "model.json")
    config = _experiment_config(args, seed)
    per_seed = [{k: v for k, v in r.items() if not k.startswith("_")} for r in rows]
    metrics = {
        "seed": seed,
        "seeds": seeds,
        "config": config,
        "config_hash": _hash({**config, "source": exp.source["content_hash"]}),
        "per_seed": per_seed,
        **_summary(rows),
        "mse": per_seed[0]["mse"],
        "mae": per_seed[0]["mae"],
    }
    _write_json(out_dir / "metrics.json", metrics)
    _write_json(out_dir / "manifest.json", _manifest("train-eval", args, {
        "seed": seed, "source": exp.source, "metrics_file": "metrics.json", "config_hash": metrics["config_hash"],
    }))
    print(f"aug={args.aug} fraction={args.train_fraction} mse={metrics['mse_mean']:.6g} mae={metrics['mae_mean']:.6g} ({len(seeds)} run(s))")
    return EXIT_OK


def cmd_robustness(args) -> int:
    seed = _resolve_seed(args.seed)
    exp = Experiment(args)
    seeds = [seed + r for r in range(args.runs)]
    table = []
    for fraction in args.fractions:
        for aug in args.augs:
            rows = [exp.run(aug, fraction, s) for s in seeds]
            per_seed = [{k: v for k, v in r.items() if not k.startswith("_")} for r in rows]
            table.append({"train_fraction": fraction, "aug": aug, "per_seed": per_seed, **_summary(rows)})
            logger.info("fraction=%s aug=%s median mse=%.6g", fraction, aug, table[-1]["mse_median"])
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    config = _experiment_config(args, seed)
    payload = {
        "seed": seed,
        "seeds": seeds,
        "config": config,
        "config_hash": _hash({**config, "source": exp.source["content_hash"]}),
        "rows": table,
    }
    _write_json(out_dir / "robustness.json", payload)
    with (out_dir / "robustness.csv").open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["train_fraction", "aug", "mse_mean", "mse_std", "mse_median", "mae_mean", "mae_std", "mae_median"])
        for r in table:
            w.writerow([r["train_fraction"], r["aug"], *(repr(r[k]) for k in
                        ("mse_mean", "mse_std", "mse_median", "mae_mean", "mae_std", "mae_median"))])
    _write_json(out_dir / "manifest.json", _manifest("robustness", args, {
        "seed": seed, "source": exp.source, "metrics_file": "robustness.json", "config_hash": payload["config_hash"],
    }))
    for r in table:
        print(f"fraction={r['train_fraction']:<5} aug={r['aug']:<13} mse median={r['mse_median']:.6g} mean={r['mse_mean']:.6g}")
    return EXIT_OK


def cmd_compare(args) -> int:
    series, source = _load_source(args)
    seed = _resolve_seed(args.seed)
    d, h = args.context, args.horizon
    if not 0 <= args.channel < series.n_channels:
        raise UsageError(f"--channel {args.channel} out of range for {series.n_channels} channel(s)")
    stride = args.stride or (d + h)
    windows = enumerate_windows(series, d, h, stride)
    if not windows:
        raise UsageError(f"series of length {series.length} holds no window of {d}+{h} steps")
    if not 0 <= args.window < len(windows):
        raise UsageError(f"--window {args.window} out of range; {len(windows)} window(s) at stride {stride}")
    rng = RandomSource(seed)
    cfg = AugmentConfig(args.weight_low, args.weight_high, args.alpha, args.residue,
                        enable_freq=not args.no_freq, enable_time=not args.no_time)
    cache = precompute(windows, _emd_config(args)) if cfg.enable_freq else None
    trace = SampleTrace(args.window)
    variants = {
        "original": windows[args.window],
        "filtered": moving_average_filter(windows[args.window], args.filter_kernel),
        "permuted": segment_permutation(windows[args.window], args.permute_segments, rng.child(0)),
        "staug": staug_sample(args.window, windows, cache, cfg, rng.child(1), trace),
    }
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    offset = windows[args.window].source_offset
    with (out_dir / "compare.csv").open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["step", "variant", "value"])
        for name, wp in variants.items():
            row = wp.full()[args.channel]
            for t, v in enumerate(row):
                w.writerow([offset + t, name, repr(float(v))])
    _write_json(out_dir / "manifest.json", _manifest("compare", args, {
        "seed": seed, "source": source, "augment": cfg.to_dict(), "staug_trace": trace.to_dict(),
        "window_offset": offset,
        "partner_offset": None if trace.index_j is None else windows[trace.index_j].source_offset,
    }))
    print(f"wrote {len(variants) * (d + h)} rows to {out_dir / 'compare.csv'}")
    return EXIT_OK


def cmd_replay(args) -> int:
    path = Path(args.manifest)
    if not path.is_file():
        raise UsageError(f"manifest not found: {path}")
    manifest = json.loads(path.read_text())
    if manifest.get("tool") != "staug" or "command" not in manifest:
        raise UsageError(f"{path} is not a staug manifest")
    recorded = dict(manifest["args"])
    recorded["out_dir"] = args.out_dir
    parser = build_parser()
    sub = parser.parse_args([manifest["command"], "--out-dir", args.out_dir])
    merged = {**vars(sub), **recorded}
    ns = argparse.Namespace(**merged)
    ns.func = COMMANDS[manifest["command"]]
    return ns.func(ns)


COMMANDS = {
    "synth": cmd_synth,
    "decompose": cmd_decompose,
    "augment": cmd_augment,
    "train-eval": cmd_train_eval,
    "robustness": cmd_robustness,
    "compare": cmd_compare,
    "replay": cmd_replay,
}


# ------------------------------------------------------------------------ parser


def _add_source(p, required_out=True):
    src = p.add_mutually_exclusive_group()
    src.add_argument("--input", help="CSV file: timestamp column, then one column per channel")
    src.add_argument("--synth", help=f"synthetic data: preset ({', '.join(SYNTH_PRESETS)}) or JSON spec file")
    p.add_argument("--out-dir", required=required_out)


def _add_emd(p):
    g = p.add_argument_group("EMD")
    g.add_argument("--sd-threshold", type=float, default=0.2)
    g.add_argument("--max-sift-iters", type=int, default=10)
    g.add_argument("--max-imfs", type=int, default=10)
    g.add_argument("--boundary-extrema", type=int, default=2)


def _add_aug(p):
    g = p.add_argument_group("augmentation")
    g.add_argument("--alpha", type=float, default=0.5, help="Beta(alpha, alpha) mix-up parameter")
    g.add_argument("--weight-low", type=float, default=0.0)
    g.add_argument("--weight-high", type=float, default=2.0)
    g.add_argument("--residue", choices=("fixed_one", "weighted", "dropped"), default="fixed_one")


def _add_window(p, context=96, horizon=96):
    p.add_argument("--context", type=int, default=context)
    p.add_argument("--horizon", type=int, default=horizon)
    p.add_argument("--stride", type=int, default=1)


def _add_training(p):
    g = p.add_argument_group("training")
    g.add_argument("--epochs", type=int, default=10)
    g.add_argument("--lr", type=float, default=1e-4)
    g.add_argument("--decay", type=float, default=0.5, help="learning-rate multiplier applied after each epoch")
    g.add_argument("--batch-size", type=int, default=32)
    g.add_argument("--runs", type=int, default=1, help="number of seeds: seed, seed+1, ...")
    g.add_argument("--filter-kernel", type=int, default=5)
    g.add_argument("--permute-segments", type=int, default=4)
    g.add_argument("--jobs", type=int, default=1, help="worker processes for EMD precompute")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="staug", description="EMD + mix-up augmentation for time-series forecasting")
    parser.add_argument("--version", action="version", version=f"staug {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write a synthetic series to CSV")
    p.add_argument("--preset", default="scarcity", help=f"{', '.join(SYNTH_PRESETS)} or JSON spec file")
    p.add_argument("--out", required=True)

    p = sub.add_parser("decompose", help="EMD of each channel into imf_1..imf_n + residue CSVs")
    _add_source(p)
    p.add_argument("--channel", type=int, default=None, help="only this channel (default: all)")
    p.add_argument("--start", type=int, default=0)
    p.add_argument("--length", type=int, default=None)
    _add_emd(p)

    p = sub.add_parser("augment", help="emit augmented training windows plus an audit manifest")
    _add_source(p)
    _add_window(p)
    _add_aug(p)
    _add_emd(p)
    p.add_argument("--count", type=int, default=8)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--no-freq", action="store_true", help="disable IMF recombination")
    p.add_argument("--no-time", action="store_true", help="disable mix-up")
    p.add_argument("--whole-series", action="store_true", help="draw windows from the whole series, not the train split")
    p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("train-eval", help="split, normalize, train and evaluate the linear forecaster")
    _add_source(p)
    _add_window(p)
    _add_aug(p)
    _add_emd(p)
    _add_training(p)
    p.add_argument("--aug", choices=AUG_CHOICES, default="staug")
    p.add_argument("--train-fraction", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--save-model", action="store_true")

    p = sub.add_parser("robustness", help="sweep training fractions and augmentations")
    _add_source(p)
    _add_window(p)
    _add_aug(p)
    _add_emd(p)
    _add_training(p)
    p.add_argument("--fractions", type=float, nargs="+", default=[0.1, 0.2, 0.5])
    p.add_argument("--augs", nargs="+", choices=AUG_CHOICES, default=["none", "staug"])
    p.add_argument("--seed", type=int, default=None)

    p = sub.add_parser("compare", help="original / filtered / permuted / STAug versions of one window")
    _add_source(p)
    _add_window(p)
    _add_aug(p)
    _add_emd(p)
    p.set_defaults(stride=0)
    p.add_argument("--window", type=int, default=0, help="window index at the given stride")
    p.add_argument("--channel", type=int, default=0)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--filter-kernel", type=int, default=5)
    p.add_argument("--permute-segments", type=int, default=4)
    p.add_argument("--no-freq", action="store_true")
    p.add_argument("--no-time", action="store_true")

    p = sub.add_parser("replay", help="re-run a command from its manifest.json")
    p.add_argument("manifest")
    p.add_argument("--out-dir", required=True)

    for name, p in sub.choices.items():
        p.set_defaults(func=COMMANDS[name])
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, ConfigError, CsvFormatError, ShapeError, WindowBoundsError, CacheMissError, ValueError) as exc:
        print(f"staug {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (TrainingDiverged, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"staug {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
