"""Command line workflows: simulate, import, train, evaluate, ablate, report.

Every command reads a dataset directory (or its manifest.json directly),
defaulting to the UWBOCC_DATA_DIR environment variable when --data/--out is
omitted.  Options can also come from a JSON config file via --config; values
given on the command line win over the file, which wins over built-in
defaults.  All file outputs (datasets, checkpoints, reports) are
byte-deterministic for a fixed seed and configuration, independent of
--threads.

Exit codes: 0 success, 2 configuration or usage errors, 3 missing or
corrupt data, 4 numerical divergence.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .augment import SnrReference
from .baselines import DEFAULT_ENERGY_WINDOW
from .core import ActivityLabel, CirMatrix
from .dataset import make_split, read_cir, read_dataset, segment_recording, write_dataset
from .errors import ConfigError, DataError, DivergenceError
from .evaluate import (
    DEFAULT_EVAL_GRID,
    REFERENCE_MESSAGE_PASSING_AUC,
    REFERENCE_NETWORK_AUC,
    REFERENCE_OPERATING_POINT,
    ablation,
    emit_report,
    plot_series,
    read_report,
    snr_sweep,
)
from .nn import VARIANTS, load_checkpoint, save_checkpoint
from .pipeline import (
    BaselineScorer,
    NetworkScorer,
    TrainSettings,
    reference_from_training,
    residual_samples,
    run_training,
)
from .simulate import RadarConfig, load_scene, synth_dataset

__all__ = ["main", "build_parser"]

DATA_DIR_ENV = "UWBOCC_DATA_DIR"


def _resolve_data_dir(value) -> Path:
    if value is None:
        value = os.environ.get(DATA_DIR_ENV)
    if not value:
        raise ConfigError(f"no dataset location: pass --data or set {DATA_DIR_ENV}")
    return Path(value)


def _manifest_path(location: Path) -> Path:
    return location if location.suffix == ".json" else location / "manifest.json"


def _output_path(value) -> Path:
    path = Path(value)
    if path.parent != Path("."):
        path.parent.mkdir(parents=True, exist_ok=True)
    return path


def _parse_counts(value) -> dict:
    if isinstance(value, dict):
        return {str(k): int(v) for k, v in value.items()}
    counts: dict = {}
    for item in value:
        for piece in item.split(","):
            if "=" not in piece:
                raise ConfigError(f"counts look like label=N, got {piece!r}")
            label, _, number = piece.partition("=")
            try:
                counts[label.strip()] = int(number)
            except ValueError:
                raise ConfigError(f"bad count {piece!r}: {number!r} is not an integer") from None
    return counts


def _parse_grid(spec) -> tuple:
    """SNR grid: comma-separated dB values, or start:stop:count (inclusive)."""
    if spec is None:
        return DEFAULT_EVAL_GRID
    if isinstance(spec, (list, tuple)):
        return tuple(float(v) for v in spec)
    try:
        if ":" in spec:
            parts = spec.split(":")
            if len(parts) != 3:
                raise ValueError("expected start:stop:count")
            start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
            if count < 1:
                raise ValueError("count must be >= 1")
            return tuple(float(v) for v in np.linspace(start, stop, count))
        return tuple(float(v) for v in spec.split(","))
    except ValueError as exc:
        raise ConfigError(f"bad --eval-grid {spec!r}: {exc}") from None


def _parse_class_map(value) -> dict | None:
    if value is None:
        return None
    if isinstance(value, dict):
        return {str(k): int(v) for k, v in value.items()}
    out: dict = {}
    for item in value:
        label, _, number = item.partition("=")
        if not number:
            raise ConfigError(f"expected label=N, got {item!r}")
        out[label.strip()] = int(number)
    return out


def _reference(ns, records, checkpoint_extra=None) -> SnrReference:
    """Resolve the SNR reference: flag, then checkpoint, then the data itself."""
    explicit = getattr(ns, "reference_energy", None)
    if explicit is not None:
        return SnrReference(float(explicit))
    if checkpoint_extra and "reference_energy" in checkpoint_extra:
        return SnrReference(float(checkpoint_extra["reference_energy"]))
    try:
        return reference_from_training(records)
    except DataError:
        raise DataError(
            "cannot anchor SNR: the dataset has no breathing samples and no "
            "--reference-energy was given") from None


# ---------------------------------------------------------------- commands


def cmd_simulate(ns) -> int:
    if ns.count is None:
        raise ConfigError("simulate needs at least one --count label=N")
    counts = _parse_counts(ns.count)
    out = _resolve_data_dir(ns.out)
    scene = load_scene(ns.scene) if ns.scene else None
    cfg = RadarConfig(n_fast=ns.n_fast, m_slow=ns.m_slow)
    records = synth_dataset(counts, cfg, rng=ns.seed, scene=scene,
                            sensor_noise=ns.sensor_noise, clutter_paths=ns.clutter_paths)
    if not records:
        raise ConfigError("all requested counts are zero")
    out.mkdir(parents=True, exist_ok=True)
    manifest = write_dataset(records, _manifest_path(out))
    print(f"wrote {len(manifest.records)} samples to {out}")
    return 0


def cmd_import(ns) -> int:
    label = ActivityLabel.from_string(ns.label)
    stream = CirMatrix(read_cir(ns.recording), ns.dt_fast, ns.dt_slow)
    segments = segment_recording(stream, ns.window, label, car=ns.car,
                                 seat=ns.seat, participant=ns.participant)
    if not segments:
        raise DataError(
            f"{ns.recording}: {stream.m_slow} columns are shorter than one "
            f"{ns.window} s window")
    out = _resolve_data_dir(ns.out)
    manifest_path = _manifest_path(out)
    radar = None
    records = segments
    if ns.append and manifest_path.exists():
        manifest, existing = read_dataset(manifest_path)
        shape = (manifest.radar.n_fast, manifest.radar.m_slow)
        got = (segments[0].cir.n_fast, segments[0].cir.m_slow)
        if shape != got:
            raise DataError(
                f"{ns.recording}: windows of shape {got} do not match the "
                f"existing dataset's {shape}")
        records = existing + segments
        radar = manifest.radar
    out.mkdir(parents=True, exist_ok=True)
    manifest = write_dataset(records, manifest_path, radar)
    print(f"imported {len(segments)} segments ({len(manifest.records)} total) into {out}")
    return 0


def cmd_train(ns) -> int:
    manifest, records = read_dataset(_manifest_path(_resolve_data_dir(ns.data)))
    split = make_split(manifest, ns.test_per_class, ns.empty_test,
                       empty_train=ns.empty_train,
                       car1_validation=_parse_class_map(ns.car1_validation))
    settings = TrainSettings(
        variant=ns.variant, kernel=ns.kernel, snr_lo=ns.snr_lo, snr_hi=ns.snr_hi,
        exact_scaling=ns.exact_snr_scaling, reuse_occupied=ns.reuse_occupied,
        reuse_empty=ns.reuse_empty, batch_size=ns.batch_size,
        learning_rate=ns.learning_rate, patience=ns.patience,
        max_epochs=ns.max_epochs, validation_snr=ns.validation_snr, seed=ns.seed)
    log = None if ns.quiet else print
    network, history, ref = run_training(manifest, records, split, settings, log=log)
    extra = {
        "best_epoch": history.best_epoch,
        "best_val_auc": history.best_val_auc,
        "epochs_run": len(history.val_auc),
        "reference_energy": ref.e_s,
        "stopped_early": history.stopped_early,
        "train_seed": settings.seed,
    }
    save_checkpoint(network, _output_path(ns.out), extra=extra)
    print(f"saved {ns.out}: best validation AUC {history.best_val_auc:.4f} "
          f"at epoch {history.best_epoch}")
    return 0


def cmd_evaluate(ns) -> int:
    manifest, records = read_dataset(_manifest_path(_resolve_data_dir(ns.data)))
    samples = residual_samples(records)
    checkpoint_extra = None
    if ns.detector == "resnet":
        if not ns.model:
            raise ConfigError("--detector resnet needs --model CHECKPOINT")
        network, checkpoint_extra = load_checkpoint(ns.model)
        scorer = NetworkScorer(network)
    else:
        scorer = BaselineScorer(ns.detector, window_cols=ns.energy_window)
    ref = _reference(ns, records, checkpoint_extra)
    report = snr_sweep(scorer, samples, ref, grid=_parse_grid(ns.eval_grid),
                       seed=ns.seed, exact_scaling=ns.exact_snr_scaling,
                       synthetic_negatives=ns.synthetic_negatives, threads=ns.threads)
    emit_report(report, "json", _output_path(ns.out))
    if ns.csv:
        emit_report(report, "csv", _output_path(ns.csv))
    print(f"wrote {ns.out} ({len(report.rows)} rows, detector {scorer.name})")
    return 0


def cmd_ablate(ns) -> int:
    manifest, records = read_dataset(_manifest_path(_resolve_data_dir(ns.data)))
    samples = residual_samples(records)
    models_dir = Path(ns.models)
    if not models_dir.is_dir():
        raise DataError(f"{models_dir} is not a directory of checkpoints")
    scorers: dict = {}
    for path in sorted(models_dir.glob("*.ckpt")):
        network, _ = load_checkpoint(path)
        name = network.variant.name
        if name in scorers:
            raise ConfigError(f"two checkpoints in {models_dir} both claim variant {name}")
        scorers[name] = NetworkScorer(network)
    if not scorers:
        raise DataError(f"no .ckpt files in {models_dir}")
    if ns.include_baselines:
        scorers["energy"] = BaselineScorer("energy", window_cols=ns.energy_window)
        scorers["fft"] = BaselineScorer("fft")
    ref = _reference(ns, records)
    report = ablation(scorers, samples, ref, seed=ns.seed,
                      require_all_variants=not ns.allow_missing,
                      exact_scaling=ns.exact_snr_scaling, threads=ns.threads)
    emit_report(report, "json", _output_path(ns.out))
    if ns.csv:
        emit_report(report, "csv", _output_path(ns.csv))
    print(f"wrote {ns.out} ({len(report.rows)} rows, {len(scorers)} detectors)")
    return 0


def _print_text_report(report) -> None:
    header = f"{'detector':<12} {'activity':<10} {'snr_db':>7} {'auc':>8} {'flops':>12}"
    print(header)
    print("-" * len(header))
    for row in report.rows:
        print(f"{row.name:<12} {row.activity:<10} {row.snr_db:>7.1f} "
              f"{row.auc:>8.4f} {row.flops:>12d}")
    anchor_activity, anchor_snr = REFERENCE_OPERATING_POINT
    at_anchor = [r for r in report.rows
                 if r.activity == anchor_activity.value and r.snr_db == anchor_snr]
    if at_anchor:
        print(f"reference points at {anchor_activity.value}/{anchor_snr:+.0f} dB: "
              f"large trained network {REFERENCE_NETWORK_AUC:.2f}, "
              f"message-passing detector {REFERENCE_MESSAGE_PASSING_AUC:.2f}")


def cmd_report(ns) -> int:
    report = read_report(ns.report)
    if ns.series:
        print(json.dumps(plot_series(report, ns.series), sort_keys=True))
        return 0
    if ns.format == "text":
        _print_text_report(report)
        return 0
    if not ns.out:
        raise ConfigError(f"--format {ns.format} needs --out FILE")
    emit_report(report, ns.format, _output_path(ns.out))
    print(f"wrote {ns.out}")
    return 0


# ------------------------------------------------------------------ parser


def build_parser(suppress: bool = False) -> argparse.ArgumentParser:
    """The CLI parser; with suppress=True, defaults are omitted so the parsed
    namespace contains only options actually present on the command line
    (used to let explicit flags override --config values)."""

    def dflt(value):
        return argparse.SUPPRESS if suppress else value

    parser = argparse.ArgumentParser(
        prog="uwbocc",
        description="Ultra-wideband radar car-occupancy detection workflows.")
    parser.add_argument("--version", action="version", version=f"uwbocc {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common_eval(p):
        p.add_argument("--data", default=dflt(None),
                       help=f"dataset directory or manifest.json (default ${DATA_DIR_ENV})")
        p.add_argument("--seed", type=int, default=dflt(0))
        p.add_argument("--threads", type=int, default=dflt(1),
                       help="worker threads for the sweep (results are identical for any value)")
        p.add_argument("--exact-snr-scaling", action="store_true", default=dflt(False),
                       help="rescale each noise draw so the per-sample SNR is exact")
        p.add_argument("--reference-energy", type=float, default=dflt(None),
                       help="signal energy anchoring the SNR scale "
                            "(default: checkpoint metadata, else the data's breathing median)")
        p.add_argument("--energy-window", type=int, default=dflt(DEFAULT_ENERGY_WINDOW),
                       help="slow-time columns per energy-detector window")
        p.add_argument("--csv", default=dflt(None), help="also write the report as CSV here")
        p.add_argument("--config", default=dflt(None),
                       help="JSON file of option defaults (explicit flags win)")

    p = sub.add_parser("simulate", help="generate a labeled synthetic dataset")
    p.add_argument("--out", default=dflt(None),
                   help=f"output dataset directory (default ${DATA_DIR_ENV})")
    p.add_argument("--count", action="append", default=dflt(None), metavar="LABEL=N",
                   help="samples per class, repeatable (breathing/talking/moving/empty)")
    p.add_argument("--scene", default=dflt(None), help="scene configuration file")
    p.add_argument("--n-fast", type=int, default=dflt(64), help="fast-time bins per column")
    p.add_argument("--m-slow", type=int, default=dflt(100), help="slow-time columns per sample")
    p.add_argument("--sensor-noise", type=float, default=dflt(1e-3))
    p.add_argument("--clutter-paths", type=int, default=dflt(4))
    p.add_argument("--seed", type=int, default=dflt(0))
    p.add_argument("--config", default=dflt(None),
                   help="JSON file of option defaults (explicit flags win)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("import", help="segment an external recording into a dataset")
    p.add_argument("recording", help="continuous recording in .cir container format")
    p.add_argument("--label", required=True,
                   choices=[lab.value for lab in ActivityLabel])
    p.add_argument("--car", required=True, help="acquisition car id (split logic "
                   "holds out car2 for testing)")
    p.add_argument("--seat", default=dflt(None))
    p.add_argument("--participant", default=dflt(None))
    p.add_argument("--window", type=float, default=dflt(10.0),
                   help="segment length in seconds (integer multiple of the repetition interval)")
    p.add_argument("--dt-fast", type=float, default=dflt(0.5e-9),
                   help="fast-time sample spacing of the recording, seconds")
    p.add_argument("--dt-slow", type=float, default=dflt(0.1),
                   help="pulse repetition interval of the recording, seconds")
    p.add_argument("--out", default=dflt(None),
                   help=f"dataset directory (default ${DATA_DIR_ENV})")
    p.add_argument("--append", action="store_true", default=dflt(False),
                   help="add to an existing dataset instead of requiring a fresh one")
    p.set_defaults(func=cmd_import)

    p = sub.add_parser("train", help="train one network variant on a dataset")
    p.add_argument("--data", default=dflt(None),
                   help=f"dataset directory or manifest.json (default ${DATA_DIR_ENV})")
    p.add_argument("--out", required=True, help="checkpoint file to write")
    p.add_argument("--variant", default=dflt("1D-E"), choices=sorted(VARIANTS))
    p.add_argument("--kernel", type=int, default=dflt(3))
    p.add_argument("--snr-lo", type=float, default=dflt(-30.0),
                   help="lower edge of the training SNR range, dB")
    p.add_argument("--snr-hi", type=float, default=dflt(0.0),
                   help="upper edge of the training SNR range, dB")
    p.add_argument("--exact-snr-scaling", action="store_true", default=dflt(False))
    p.add_argument("--batch-size", type=int, default=dflt(64))
    p.add_argument("--learning-rate", type=float, default=dflt(1e-3))
    p.add_argument("--patience", type=int, default=dflt(10))
    p.add_argument("--max-epochs", type=int, default=dflt(200))
    p.add_argument("--validation-snr", type=float, default=dflt(-15.0))
    p.add_argument("--reuse-occupied", type=int, default=dflt(200),
                   help="noise draws per occupied training sample per epoch")
    p.add_argument("--reuse-empty", type=int, default=dflt(3000),
                   help="noise draws per empty training sample per epoch")
    p.add_argument("--test-per-class", type=int, default=dflt(150),
                   help="held-out car2 records per occupied class")
    p.add_argument("--empty-test", type=int, default=dflt(20))
    p.add_argument("--empty-train", type=int, default=dflt(None))
    p.add_argument("--car1-validation", action="append", default=dflt(None),
                   metavar="LABEL=N", help="move the last N car1 records per class to validation")
    p.add_argument("--seed", type=int, default=dflt(0))
    p.add_argument("--quiet", action="store_true", default=dflt(False))
    p.add_argument("--config", default=dflt(None),
                   help="JSON file of option defaults (explicit flags win)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="AUC of one detector across an SNR grid")
    add_common_eval(p)
    p.add_argument("--detector", default=dflt("resnet"), choices=["resnet", "energy", "fft"])
    p.add_argument("--model", default=dflt(None), help="checkpoint for --detector resnet")
    p.add_argument("--eval-grid", default=dflt(None), metavar="SPEC",
                   help="dB values: '-10,-20,-40' or 'start:stop:count'; use the "
                        "--eval-grid=SPEC form since values start with a dash "
                        "(default -10 to -40, 31 points)")
    p.add_argument("--synthetic-negatives", type=int, default=dflt(0),
                   help="pure-noise negatives to add (flagged in the report)")
    p.add_argument("--out", required=True, help="JSON report to write")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("ablate", help="AUC versus complexity at fixed SNR anchors")
    add_common_eval(p)
    p.add_argument("--models", required=True,
                   help="directory of trained checkpoints, one per variant")
    p.add_argument("--allow-missing", action="store_true", default=dflt(False),
                   help="run even if some of the ten standard variants lack checkpoints")
    p.add_argument("--include-baselines", action="store_true", default=dflt(False),
                   help="also score the energy and FFT detectors")
    p.add_argument("--out", required=True, help="JSON report to write")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("report", help="render or convert a stored report")
    p.add_argument("report", help="report JSON produced by evaluate or ablate")
    p.add_argument("--format", default=dflt("text"), choices=["text", "csv", "json"])
    p.add_argument("--out", default=dflt(None), help="output file for csv/json")
    p.add_argument("--series", nargs="?", const="snr_db", default=dflt(None),
                   choices=["snr_db", "flops"],
                   help="print per-detector x/y series as JSON instead "
                        "(axis defaults to snr_db)")
    p.set_defaults(func=cmd_report)

    return parser


def _apply_config(ns: argparse.Namespace, given: argparse.Namespace) -> argparse.Namespace:
    path = getattr(ns, "config", None)
    if not path:
        return ns
    try:
        with open(path, "r", encoding="utf-8") as handle:
            doc = json.load(handle)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"config {path} must be a JSON object of option values")
    valid = set(vars(ns)) - {"func", "command", "config"}
    explicit = set(vars(given))
    for key in sorted(doc):
        dest = key.replace("-", "_")
        if dest not in valid:
            raise ConfigError(f"config {path}: unknown option {key!r} for this command")
        if dest not in explicit:
            setattr(ns, dest, doc[key])
    return ns


def main(argv=None) -> int:
    args = sys.argv[1:] if argv is None else list(argv)
    ns = build_parser().parse_args(args)
    try:
        ns = _apply_config(ns, build_parser(suppress=True).parse_args(args))
        return ns.func(ns)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except DivergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except OSError as exc:
        # Filesystem trouble the library did not anticipate (permissions,
        # disk full); treated as a data error rather than a traceback.
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
