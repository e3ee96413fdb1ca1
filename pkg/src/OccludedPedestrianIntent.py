#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Main launcher (CLI) for occlusion-robust pedestrian crossing-intention models.

Commands:
  synth         Generate a synthetic JSONL dataset.
  train         Train the denoiser + intention head on a dataset.
  eval          Run the EO / PO x occlusion-length grid on a checkpoint.
  reconstruct   Dump the imputation of one record (truth, observation, reconstruction, baselines).
  plot-denoise  Scatter of predicted vs ground-truth coordinates along the reverse chain.
  plot-masks    EO / PO mask matrices and the occluded center path of one record.
  ablate        Train / evaluate the ablation registry on one occlusion cell.

Behavior:
- Every command accepts --config (flat key = value file), --override key=value
  (repeatable), --seed and --out.
- Precedence: --override > explicit flags > config file > defaults.
- The last dataset, checkpoint and output folder are remembered in
  ~/.occluded_pedestrian_intent/config.cfg and reused when a command omits them.
- Exit codes: 0 success, 2 usage / data errors, 3 I/O errors, 4 numerical errors, 1 anything else.
"""

import argparse
import os
import re
import sys
import textwrap
import time
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from src.modules.Dataset.Dataset import MIN_TOTAL_FRAMES, SOURCES, SPLIT_NAMES, TrajectoryRecord, build_manifest
from src.modules.Dataset.ds_annotations import expand_tracks, load_annotations, load_records, write_records
from src.modules.Dataset.ds_synthetic import PROFILES, generate_synthetic
from src.modules.Denoiser.Denoiser import DenoiserConfig
from src.modules.Evaluation.Evaluation import reconstruct_record, run_occlusion_grid, write_report
from src.modules.Evaluation.ev_ablation import ABLATIONS, run_ablation_grid
from src.modules.Evaluation.ev_inference import EvalFlags
from src.modules.Evaluation.ev_plots import plot_denoise_scatter, plot_masks
from src.modules.Intention.Intention import IntentionConfig
from src.modules.Occlusion.Occlusion import PATTERNS
from src.modules.Training.Training import TRAIN_PATTERNS, TrainConfig, fit
from src.modules.Training.tr_checkpoint import load_checkpoint
from src.utils.utils_datetime import format_duration_hms, timestamp_for_filename
from src.utils.utils_errors import ArgumentError, ConfigurationError, PedestrianIntentError, RecordLookupError
from src.utils.utils_infrastructure import MSG_TAGS, LoggerDual, seed_everything, select_device
from src.utils.utils_io import ensure_output_dir, load_cfg_values, log_module_exception, pretty_path, read_flat_config, save_cfg_values
from src.utils.utils_parsing import coerce_value, parse_csv_list, parse_int_list, parse_overrides


# ================================ VERSIONING ================================ #

TOOL_NAME           = "OccludedPedestrianIntent"
TOOL_VERSION        = "0.3.0"
TOOL_DATE           = "2026-10-17"
TOOL_NAME_VERSION   = f"{TOOL_NAME}_v{TOOL_VERSION}"
TOOL_DESCRIPTION    = textwrap.dedent(f"""
{TOOL_NAME_VERSION} - {TOOL_DATE}
Occlusion-mask guided diffusion reconstruction of pedestrian motion
and crossing-intention classification
""")

# ================================ DEFAULTS ================================= #
DEFAULT_OUTPUT_FOLDER = "runs"
DEFAULT_SEED = 1

# synth
DEFAULT_SYNTH_N = 512
DEFAULT_SYNTH_FRAMES = MIN_TOTAL_FRAMES
DEFAULT_SYNTH_PROFILE = "walker"

# eval / ablate
DEFAULT_PATTERNS = "EO,PO"
DEFAULT_LENGTHS = "1-5"
DEFAULT_EVAL_SPLIT = "test"
DEFAULT_REPORT_STEM = "report"
DEFAULT_ABLATION_STEM = "ablation"
DEFAULT_ABLATION_PATTERN = "EO"
DEFAULT_ABLATION_LENGTH = 5

# single-record tools
DEFAULT_RECORD_PATTERN = "EO"
DEFAULT_RECORD_LENGTH = 3

# Config-file / override key aliases
KEY_ALIASES = {"lambda": "lam"}

# ============================== PERSISTENT CONFIG =========================== #
CONFIG_DIR  = Path.home() / ".occluded_pedestrian_intent"
CONFIG_PATH = CONFIG_DIR / "config.cfg"
CONFIG_SECTION = "general"

CONFIG_KEY_LAST_DATASET     = "last_dataset_path"
CONFIG_KEY_LAST_CHECKPOINT  = "last_checkpoint_path"
CONFIG_KEY_LAST_OUTPUT      = "last_output_dir"

CFG_FIELD_MAP = {
    "last_dataset": CONFIG_KEY_LAST_DATASET,
    "last_checkpoint": CONFIG_KEY_LAST_CHECKPOINT,
    "last_output": CONFIG_KEY_LAST_OUTPUT,
}


# =============================== SETTINGS ================================== #
@dataclass
class ExperimentSettings:
    """Resolved configuration shared by every runner."""
    train: TrainConfig
    denoiser: DenoiserConfig
    intention: IntentionConfig
    flags: EvalFlags
    out_dir: str
    remembered: Dict[str, str]

    @property
    def seed(self) -> int:
        return self.train.seed


def apply_key_values(values: Dict[str, object], train: TrainConfig, denoiser: DenoiserConfig,
                     intention: IntentionConfig, flags: EvalFlags):
    """
    Apply {key: value} onto the four config dataclasses.
      unprefixed -> TrainConfig ('lambda' is an alias of 'lam')
      denoiser.* -> DenoiserConfig, intention.* -> IntentionConfig, eval.* -> EvalFlags
    String values are coerced to the type of the current field value.
    """
    targets = {"": train, "denoiser": denoiser, "intention": intention, "eval": flags}
    updates: Dict[str, Dict[str, object]] = {prefix: {} for prefix in targets}
    for key, raw in values.items():
        prefix, _, name = str(key).strip().rpartition(".")
        name = KEY_ALIASES.get(name, name) if not prefix else name
        if prefix not in targets:
            raise ConfigurationError(f"Unknown config key '{key}' (prefix '{prefix}' is not one of denoiser, intention, eval)")
        target = targets[prefix]
        declared = {f.name for f in fields(target)}
        if name not in declared:
            raise ConfigurationError(f"Unknown config key '{key}'")
        current = getattr(target, name)
        updates[prefix][name] = coerce_value(raw, current, key) if isinstance(raw, str) else raw

    return (
        replace(train, **updates[""]).validate(),
        replace(denoiser, **updates["denoiser"]).validate(),
        replace(intention, **updates["intention"]).validate(),
        replace(flags, **updates["eval"]).validate(),
    )


def flag_values(args: argparse.Namespace) -> Dict[str, object]:
    """Explicit command-line flags as config keys (only the ones actually given)."""
    mapping = {
        "seed": "seed",
        "device": "device",
        "epochs": "epochs",
        "lr": "lr",
        "batch": "batch",
        "lam": "lam",
        "K": "K",
        "train_pattern": "pattern",
        "noise_std": "eval.noise_std",
        "threshold": "eval.threshold",
    }
    values: Dict[str, object] = {}
    for attr, key in mapping.items():
        value = getattr(args, attr, None)
        if value is not None:
            values[key] = value
    if getattr(args, "no_diffusion_mask", False):
        values["eval.use_diffusion_mask"] = False
    if getattr(args, "no_diffusion", False):
        values["eval.use_diffusion"] = False
    return values


def resolve_settings(args: argparse.Namespace) -> ExperimentSettings:
    remembered = load_cfg_values(CONFIG_PATH, CONFIG_SECTION, CFG_FIELD_MAP, *CFG_FIELD_MAP.keys())

    values: Dict[str, object] = {}
    if args.config:
        values.update(read_flat_config(args.config))
        print(f"[Config] {MSG_TAGS['INFO']}Loaded {len(values)} key(s) from '{pretty_path(args.config)}'")
    values.update(flag_values(args))
    values.update(parse_overrides(args.override))

    train, denoiser, intention, flags = apply_key_values(
        values, TrainConfig(seed=DEFAULT_SEED), DenoiserConfig(), IntentionConfig(), EvalFlags()
    )
    out_dir = args.out or remembered.get("last_output") or DEFAULT_OUTPUT_FOLDER
    return ExperimentSettings(train, denoiser, intention, flags, out_dir, remembered)


# ============================ ARGUMENT PARSING ============================= #
def _common_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="Flat 'key = value' experiment file.")
    common.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                        help="Override one config key (repeatable), e.g. --override denoiser.heads=4")
    common.add_argument("--seed", type=int, help=f"Global seed (default {DEFAULT_SEED}).")
    common.add_argument("--out", help=f"Output folder (default: last used, else '{DEFAULT_OUTPUT_FOLDER}').")
    return common


def _add_dataset_args(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--dataset", help="JSONL dataset file (default: last used).")
    sub.add_argument("--source", choices=SOURCES, default="synthetic",
                     help="Dataset flavour; pie/jaad tracks are cut into overlapping observation windows.")


def _add_record_args(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--record", required=True, help="Record id.")
    sub.add_argument("--pattern", type=str.upper, choices=PATTERNS, default=DEFAULT_RECORD_PATTERN)
    sub.add_argument("--length", type=int, default=DEFAULT_RECORD_LENGTH, help="Occluded frames m.")


def _add_eval_flag_args(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--noise-std", dest="noise_std", type=float, help="Pixel noise std on observations.")
    sub.add_argument("--threshold", type=float, help="Decision threshold on P(cross).")
    sub.add_argument("--no-diffusion-mask", action="store_true", help="Plain network step on every entry.")
    sub.add_argument("--no-diffusion", action="store_true", help="Classify masked observations directly.")


def _add_train_args(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--epochs", type=int)
    sub.add_argument("--lr", type=float)
    sub.add_argument("--batch", type=int)
    sub.add_argument("--lambda", dest="lam", type=float, help="Weight of the intention loss.")
    sub.add_argument("--K", dest="K", type=int, help="Diffusion steps.")
    sub.add_argument("--pattern", dest="train_pattern", choices=TRAIN_PATTERNS, help="Training occlusion pattern.")


def parse_args(argv: Optional[Sequence[str]] = None) -> argparse.Namespace:
    common = _common_parser()
    parser = argparse.ArgumentParser(prog=TOOL_NAME, description=TOOL_DESCRIPTION,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--version", action="version", version=TOOL_NAME_VERSION)
    commands = parser.add_subparsers(dest="command", metavar="command", required=True)

    synth = commands.add_parser("synth", parents=[common], help="Generate a synthetic dataset.")
    synth.add_argument("--n", type=int, default=DEFAULT_SYNTH_N, help="Number of episodes.")
    synth.add_argument("--frames", type=int, default=DEFAULT_SYNTH_FRAMES, help="Frames per episode.")
    synth.add_argument("--profile", choices=PROFILES, default=DEFAULT_SYNTH_PROFILE)
    synth.add_argument("--dataset", help="Output JSONL file (default <out>/synthetic_<profile>.jsonl).")

    train = commands.add_parser("train", parents=[common], help="Train both models.")
    _add_dataset_args(train)
    _add_train_args(train)
    train.add_argument("--device", help="auto | cpu | cuda[:n]")

    evaluate = commands.add_parser("eval", parents=[common], help="Occlusion grid evaluation.")
    _add_dataset_args(evaluate)
    evaluate.add_argument("--checkpoint", help="Checkpoint file (default: last trained).")
    evaluate.add_argument("--patterns", default=DEFAULT_PATTERNS, help="Comma-separated, e.g. EO,PO")
    evaluate.add_argument("--lengths", default=DEFAULT_LENGTHS, help="Ranges or lists, e.g. 1-5 or 0,3")
    evaluate.add_argument("--split", choices=SPLIT_NAMES, default=DEFAULT_EVAL_SPLIT)
    evaluate.add_argument("--stem", default=DEFAULT_REPORT_STEM, help="Report file stem.")
    evaluate.add_argument("--no-excel", action="store_true", help="Skip the Excel report.")
    evaluate.add_argument("--device", help="auto | cpu | cuda[:n]")
    _add_eval_flag_args(evaluate)

    rec = commands.add_parser("reconstruct", parents=[common], help="Imputation dump of one record.")
    _add_dataset_args(rec)
    rec.add_argument("--checkpoint", help="Checkpoint file (default: last trained).")
    _add_record_args(rec)
    _add_eval_flag_args(rec)

    plot_denoise = commands.add_parser("plot-denoise", parents=[common], help="Denoising scatter figures.")
    _add_dataset_args(plot_denoise)
    plot_denoise.add_argument("--checkpoint", help="Checkpoint file (default: last trained).")
    _add_record_args(plot_denoise)
    plot_denoise.add_argument("--steps", help="Reverse steps to draw (default K, 3K/4, K/2, K/4, 0).")

    plot_mask = commands.add_parser("plot-masks", parents=[common], help="Mask and occluded-path figures.")
    _add_dataset_args(plot_mask)
    plot_mask.add_argument("--record", required=True, help="Record id.")
    plot_mask.add_argument("--length", type=int, default=DEFAULT_RECORD_LENGTH, help="Occluded frames m.")
    plot_mask.add_argument("--noise-std", dest="noise_std", type=float, help="Pixel noise std on observations.")

    ablate = commands.add_parser("ablate", parents=[common], help="Ablation grid on one occlusion cell.")
    _add_dataset_args(ablate)
    _add_train_args(ablate)
    ablate.add_argument("--names", default="", help=f"Comma-separated subset of: {', '.join(ABLATIONS)}")
    ablate.add_argument("--base-checkpoint", help="Reuse this base model instead of training one.")
    ablate.add_argument("--cell-pattern", type=str.upper, choices=PATTERNS, default=DEFAULT_ABLATION_PATTERN)
    ablate.add_argument("--cell-length", type=int, default=DEFAULT_ABLATION_LENGTH)
    ablate.add_argument("--split", choices=SPLIT_NAMES, default=DEFAULT_EVAL_SPLIT)
    ablate.add_argument("--no-excel", action="store_true", help="Skip the Excel report.")
    ablate.add_argument("--device", help="auto | cpu | cuda[:n]")

    args = parser.parse_args(argv)
    setattr(args, "_parser", parser)
    return args


# ================================ HELPERS ================================== #
def resolve_path(given: Optional[str], remembered: str, what: str, flag: str) -> str:
    path = given or remembered
    if not path:
        raise ArgumentError(f"No {what} given ({flag}) and none remembered from a previous run")
    if not given:
        print(f"[Config] {MSG_TAGS['INFO']}Using last {what} '{pretty_path(path)}'")
    return path


def load_dataset(path: str, source: str = "synthetic") -> List[TrajectoryRecord]:
    """Synthetic files load as-is; PIE / JAAD tracks are cut into observation windows."""
    if source == "synthetic":
        records = load_records(path)
        print(f"[Dataset] {MSG_TAGS['INFO']}Loaded {len(records)} record(s) from '{pretty_path(path)}'")
        return records
    return expand_tracks(load_annotations(path, source))


def find_record(records: Sequence[TrajectoryRecord], record_id: str) -> TrajectoryRecord:
    for record in records:
        if record.id == record_id:
            return record
    raise RecordLookupError(f"Unknown record id '{record_id}'")


def safe_file_stem(text: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]+", "_", text)


def remember(**kwargs: str) -> None:
    save_cfg_values(CONFIG_DIR, CONFIG_PATH, CONFIG_SECTION, CFG_FIELD_MAP, **kwargs)


# ============================== RUNNERS (TASKS) ============================= #
def run_synth(args: argparse.Namespace, settings: ExperimentSettings) -> str:
    module_name = "[Synth]"
    out_dir = ensure_output_dir(settings.out_dir)
    target = args.dataset or os.path.join(out_dir, f"synthetic_{args.profile}.jsonl")
    print(f"{module_name} {MSG_TAGS['INFO']}n={args.n} frames={args.frames} profile={args.profile} seed={settings.seed}")

    manifest = generate_synthetic(args.n, args.frames, np.random.default_rng(settings.seed), args.profile)
    path = write_records(manifest.records, target)
    crossing = sum(r.label for r in manifest.records)
    print(f"{module_name} {MSG_TAGS['INFO']}{len(manifest.records)} record(s), {crossing} crossing -> '{pretty_path(path)}'")
    remember(last_dataset=pretty_path(path), last_output=settings.out_dir)
    return path


def run_train(args: argparse.Namespace, settings: ExperimentSettings) -> str:
    module_name = "[Train]"
    dataset = resolve_path(args.dataset, settings.remembered.get("last_dataset", ""), "dataset", "--dataset")
    cfg = settings.train
    print(f"{module_name} {MSG_TAGS['INFO']}lr={cfg.lr:g} batch={cfg.batch} K={cfg.K} dim={settings.denoiser.model_dim}")

    records = load_dataset(dataset, args.source)
    manifest = build_manifest(records, cfg.ratios, np.random.default_rng(cfg.seed))
    sizes = ", ".join(f"{name}={len(ids)}" for name, ids in manifest.splits.items())
    print(f"{module_name} {MSG_TAGS['INFO']}splits: {sizes}")

    best = fit(manifest, cfg, ensure_output_dir(settings.out_dir), settings.denoiser, settings.intention)
    bundle = load_checkpoint(best)
    metrics = " ".join(f"{k}={v:.4f}" for k, v in bundle.val_metrics.items())
    print(f"{module_name} {MSG_TAGS['INFO']}best epoch {bundle.epoch}: {metrics or '(no validation metrics)'}")
    print(f"{module_name} {MSG_TAGS['INFO']}Done -> '{pretty_path(best)}'")
    remember(last_dataset=pretty_path(dataset), last_checkpoint=pretty_path(best), last_output=settings.out_dir)
    return best


def run_eval(args: argparse.Namespace, settings: ExperimentSettings) -> Dict[str, str]:
    module_name = "[Eval]"
    checkpoint = resolve_path(args.checkpoint, settings.remembered.get("last_checkpoint", ""), "checkpoint", "--checkpoint")
    dataset = resolve_path(args.dataset, settings.remembered.get("last_dataset", ""), "dataset", "--dataset")
    patterns = parse_csv_list(args.patterns, upper=True)
    lengths = parse_int_list(args.lengths, "occlusion length")

    seed_everything(settings.seed, single_thread=settings.train.single_thread)
    device = select_device(settings.train.device)
    bundle = load_checkpoint(checkpoint, device=device)
    index = {r.id: r for r in load_dataset(dataset, args.source)}
    ids = bundle.splits.get(args.split, [])
    if not ids:
        raise ArgumentError(f"Checkpoint split '{args.split}' is empty; nothing to evaluate")
    missing = [rid for rid in ids if rid not in index]
    if missing:
        raise RecordLookupError(f"{len(missing)} '{args.split}' record(s) of the checkpoint are not in the dataset (first: '{missing[0]}')")
    records = [index[rid] for rid in ids]
    print(f"{module_name} {MSG_TAGS['INFO']}{len(records)} '{args.split}' record(s), "
          f"{len(patterns)} pattern(s) x {len(lengths)} length(s)")

    report = run_occlusion_grid(bundle, records, patterns, lengths, settings.flags, settings.seed, device=device)
    print(report.format_table())
    paths = write_report(report, ensure_output_dir(settings.out_dir), args.stem, excel=not args.no_excel)
    remember(last_checkpoint=pretty_path(checkpoint), last_dataset=pretty_path(dataset), last_output=settings.out_dir)
    return paths


def run_reconstruct(args: argparse.Namespace, settings: ExperimentSettings) -> str:
    module_name = "[Reconstruct]"
    checkpoint = resolve_path(args.checkpoint, settings.remembered.get("last_checkpoint", ""), "checkpoint", "--checkpoint")
    dataset = resolve_path(args.dataset, settings.remembered.get("last_dataset", ""), "dataset", "--dataset")

    seed_everything(settings.seed, single_thread=settings.train.single_thread)
    device = select_device(settings.train.device)
    bundle = load_checkpoint(checkpoint, device=device)
    record = find_record(load_dataset(dataset, args.source), args.record)

    df = reconstruct_record(bundle, record, args.pattern, args.length, settings.seed, settings.flags, device)
    out_dir = ensure_output_dir(settings.out_dir)
    target = os.path.join(out_dir, f"reconstruct_{safe_file_stem(record.id)}_{args.pattern}{args.length}.csv")
    df.to_csv(target, index=False, float_format="%.6f")
    print(f"{module_name} {MSG_TAGS['INFO']}{record.id} {args.pattern}{args.length}: "
          f"P(cross)={df.attrs['p_cross']:.4f} label={df.attrs['label']} -> '{pretty_path(target)}'")
    return target


def run_plot_denoise(args: argparse.Namespace, settings: ExperimentSettings) -> List[str]:
    checkpoint = resolve_path(args.checkpoint, settings.remembered.get("last_checkpoint", ""), "checkpoint", "--checkpoint")
    dataset = resolve_path(args.dataset, settings.remembered.get("last_dataset", ""), "dataset", "--dataset")
    steps = parse_int_list(args.steps, "step") if args.steps is not None else None

    seed_everything(settings.seed, single_thread=settings.train.single_thread)
    bundle = load_checkpoint(checkpoint, device=select_device(settings.train.device))
    record = find_record(load_dataset(dataset, args.source), args.record)
    paths, _ = plot_denoise_scatter(bundle, record, settings.out_dir, steps, args.pattern, args.length, settings.seed)
    return paths


def run_plot_masks(args: argparse.Namespace, settings: ExperimentSettings) -> List[str]:
    dataset = resolve_path(args.dataset, settings.remembered.get("last_dataset", ""), "dataset", "--dataset")
    record = find_record(load_dataset(dataset, args.source), args.record)
    return plot_masks(record, settings.out_dir, args.length, settings.seed, settings.flags.noise_std)


def run_ablate(args: argparse.Namespace, settings: ExperimentSettings) -> Dict[str, str]:
    module_name = "[Ablate]"
    dataset = resolve_path(args.dataset, settings.remembered.get("last_dataset", ""), "dataset", "--dataset")
    names = parse_csv_list(args.names)
    cfg = settings.train

    device = select_device(cfg.device)
    records = load_dataset(dataset, args.source)
    manifest = build_manifest(records, cfg.ratios, np.random.default_rng(cfg.seed))
    base = load_checkpoint(args.base_checkpoint, device=device) if args.base_checkpoint else None
    print(f"{module_name} {MSG_TAGS['INFO']}{len(names) or len(ABLATIONS)} ablation(s) on "
          f"{args.cell_pattern}{args.cell_length} ({args.split} split)")

    out_dir = ensure_output_dir(settings.out_dir)
    report = run_ablation_grid(
        manifest, out_dir, names or None, cfg, settings.denoiser, settings.intention, base,
        pattern=args.cell_pattern, length=args.cell_length, split=args.split, seed=cfg.seed,
        flags=settings.flags, device=device,
    )
    print(report.format_table())
    paths = write_report(report, out_dir, DEFAULT_ABLATION_STEM, excel=not args.no_excel)
    remember(last_dataset=pretty_path(dataset), last_output=settings.out_dir)
    return paths


def resolve_module_callable(name: str):
    return {
        "synth": run_synth,
        "train": run_train,
        "eval": run_eval,
        "reconstruct": run_reconstruct,
        "plot-denoise": run_plot_denoise,
        "plot-masks": run_plot_masks,
        "ablate": run_ablate,
    }.get((name or "").strip().lower())


# =============================== EXECUTION CORE ============================= #
def execute_module(module_fn, args: argparse.Namespace, settings: ExperimentSettings):
    """Run one runner and print how long it took."""
    start_ts = time.perf_counter()
    label = getattr(module_fn, "__name__", "module")
    try:
        return module_fn(args, settings)
    finally:
        elapsed = time.perf_counter() - start_ts
        print(f"[Timer] {label} finished in {format_duration_hms(elapsed)}")


# ================================== MAIN =================================== #
def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = parse_args(argv)
    except SystemExit as exc:
        # argparse already printed usage; 2 for bad flags, 0 for --help / --version
        return exc.code if isinstance(exc.code, int) else 2

    remembered_out = load_cfg_values(CONFIG_PATH, CONFIG_SECTION, CFG_FIELD_MAP, "last_output").get("last_output")
    out_dir = args.out or remembered_out or DEFAULT_OUTPUT_FOLDER
    log_path = os.path.join(out_dir, "Logs", f"{TOOL_NAME}_{timestamp_for_filename()}_v{TOOL_VERSION}.log")

    original_stdout, original_stderr = sys.stdout, sys.stderr
    logger: Optional[LoggerDual] = None
    try:
        logger = LoggerDual(log_path, terminal=original_stdout)
        sys.stdout = logger
        sys.stderr = sys.stdout
    except OSError as exc:
        print(f"[Logger] {MSG_TAGS['WARNING']}cannot open log file '{pretty_path(log_path)}' ({exc}); console only")

    try:
        print(TOOL_DESCRIPTION)
        if logger is not None:
            print(f"[Logger] Output will also be written to: {pretty_path(log_path)}\n")
        print(f"[Config] Using config file: {CONFIG_PATH}\n")

        module_fn = resolve_module_callable(args.command)
        settings = resolve_settings(args)
        execute_module(module_fn, args, settings)
        return 0
    except PedestrianIntentError as exc:
        print(f"[{TOOL_NAME}] {MSG_TAGS['ERROR']}{type(exc).__name__}: {exc}")
        return exc.exit_code
    except Exception as exc:
        log_module_exception(args.command, exc)
        return 1
    finally:
        sys.stdout, sys.stderr = original_stdout, original_stderr
        if logger is not None:
            logger.close()


if __name__ == "__main__":
    sys.exit(main())
