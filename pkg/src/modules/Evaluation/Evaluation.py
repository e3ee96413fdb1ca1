# -*- coding: utf-8 -*-

"""
EO / PO x occlusion-length evaluation grid.

Each cell: seeded evaluation mask per record, full reverse-chain
reconstruction, intention prediction, Acc / AUC / F1, reconstruction ADE and
the ADE of the mean / linear / hold-last imputation baselines.
"""

import math
import os
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import pandas as pd
import torch

from src.modules.Dataset.Dataset import CHANNELS, TrajectoryRecord, denormalize
from src.modules.Evaluation.ev_baselines import BASELINE_KINDS, impute_batch
from src.modules.Evaluation.ev_inference import EvalFlags, cell_metrics, prepare_windows, run_inference
from src.modules.Occlusion.Occlusion import PATTERN_CODES, PATTERNS
from src.modules.Training.tr_checkpoint import ModelBundle
from src.utils.utils_dataframe import order_columns
from src.utils.utils_errors import ArgumentError, DataIOError
from src.utils.utils_excel import style_report_workbook
from src.utils.utils_infrastructure import MSG_TAGS
from src.utils.utils_io import ensure_parent_dir, pretty_path

KEY_COLUMNS = ["ablation", "pattern", "length"]
METRIC_COLUMNS = ["acc", "auc", "f1", "ade_bbox", "ade_center", "n"]
BASELINE_COLUMNS = [f"ade_{ch}_{kind}" for ch in ("bbox", "center") for kind in BASELINE_KINDS]
FLAG_COLUMNS = ["use_diffusion_mask", "noise_std", "use_diffusion", "threshold"]
REPORT_COLUMNS = KEY_COLUMNS + METRIC_COLUMNS + BASELINE_COLUMNS + FLAG_COLUMNS


@dataclass
class EvalReport:
    cells: List[Dict[str, object]] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.cells)

    def extend(self, other: "EvalReport") -> "EvalReport":
        self.cells.extend(other.cells)
        return self

    def to_frame(self) -> pd.DataFrame:
        df = pd.DataFrame(self.cells)
        if df.empty:
            return pd.DataFrame(columns=REPORT_COLUMNS)
        for col in REPORT_COLUMNS:
            if col not in df.columns:
                df[col] = float("nan")
        return order_columns(df, REPORT_COLUMNS)

    def to_csv(self, path: str) -> str:
        target = ensure_parent_dir(path)
        try:
            self.to_frame().to_csv(target, index=False, float_format="%.6f")
        except OSError as exc:
            raise DataIOError(f"Cannot write report ({exc.strerror or exc})", pretty_path(target)) from exc
        return target

    def to_json(self, path: str) -> str:
        """Records orientation; NaN metrics become null."""
        target = ensure_parent_dir(path)
        try:
            self.to_frame().to_json(target, orient="records", indent=2, double_precision=6)
        except OSError as exc:
            raise DataIOError(f"Cannot write report ({exc.strerror or exc})", pretty_path(target)) from exc
        return target

    def to_excel(self, path: str) -> str:
        """Summary sheet (table layout) plus the full cell list with baselines and flags."""
        target = ensure_parent_dir(path)
        df = self.to_frame()
        summary = df[KEY_COLUMNS + METRIC_COLUMNS]
        try:
            with pd.ExcelWriter(target, engine="openpyxl") as writer:
                summary.to_excel(writer, sheet_name="Summary", index=False)
                df.to_excel(writer, sheet_name="Cells", index=False)
                style_report_workbook(writer, {
                    "0.0000": METRIC_COLUMNS[:3],
                    "0.00": ["ade_bbox", "ade_center"] + BASELINE_COLUMNS,
                })
        except OSError as exc:
            raise DataIOError(f"Cannot write report ({exc.strerror or exc})", pretty_path(target)) from exc
        return target

    def format_table(self) -> str:
        df = self.to_frame()
        if df.empty:
            return "(empty report)"
        table = df[KEY_COLUMNS + ["acc", "auc", "f1", "ade_bbox", "ade_center", "n"]].rename(
            columns={"acc": "Acc", "auc": "AUC", "f1": "F1", "ade_bbox": "ADE bbox", "ade_center": "ADE center"}
        )
        return table.to_string(index=False, float_format=lambda v: f"{v:.4f}", na_rep="-")


class Evaluator:
    """Runs occlusion cells of one checkpoint on one record list."""

    def __init__(self, bundle: ModelBundle, records: Sequence[TrajectoryRecord], seed: int = 1,
                 flags: Optional[EvalFlags] = None, ablation: str = "base", device=None) -> None:
        if not records:
            raise ArgumentError("evaluation needs at least one record")
        self.bundle = bundle.eval()
        self.records = list(records)
        self.seed = int(seed)
        self.flags = (flags or EvalFlags()).validate()
        self.ablation = ablation
        self.device = device or next(bundle.denoiser.parameters()).device

    def evaluate_cell(self, pattern: str, length: int) -> Dict[str, object]:
        pattern = str(pattern).strip().upper()
        if pattern not in PATTERN_CODES:
            raise ArgumentError(f"Unknown occlusion pattern '{pattern}'. Expected one of {', '.join(PATTERNS)}")
        windows = prepare_windows(self.records, self.bundle.stats, pattern, length, self.seed,
                                  noise_std=self.flags.noise_std)
        generator = torch.Generator(device=self.device)
        generator.manual_seed(self.seed * 100 + PATTERN_CODES[pattern] * 10 + int(length))
        output = run_inference(self.bundle.denoiser, self.bundle.intention, self.bundle.schedule, windows,
                               self.flags, generator, self.device, desc=f"{pattern}{length}")
        metrics = cell_metrics(windows, output, self.bundle.stats, self.bundle.denoiser.config.inputs,
                               self.flags.threshold)
        if math.isnan(float(metrics["auc"])):
            print(f"[Evaluation] {MSG_TAGS['WARNING']}AUC undefined for {self.ablation} {pattern}{length} "
                  f"(single class among {metrics['n']} records); stored as NaN")
        cell = {"ablation": self.ablation, "pattern": pattern, "length": int(length), **metrics}
        cell.update({k: self.flags.to_dict()[k] for k in FLAG_COLUMNS})
        return cell

    def run_occlusion_grid(self, patterns: Sequence[str], lengths: Sequence[int]) -> EvalReport:
        if not patterns or not lengths:
            raise ArgumentError("patterns and lengths must both be non-empty")
        report = EvalReport()
        for pattern in patterns:
            for length in lengths:
                cell = self.evaluate_cell(pattern, length)
                report.cells.append(cell)
                print(f"[Evaluation] {MSG_TAGS['INFO']}{cell['ablation']} {cell['pattern']}{cell['length']}: "
                      f"acc={cell['acc']:.4f} auc={cell['auc']:.4f} f1={cell['f1']:.4f} "
                      f"ade_center={cell['ade_center']:.2f}px n={cell['n']}")
        return report


def run_occlusion_grid(bundle: ModelBundle, records: Sequence[TrajectoryRecord], patterns: Sequence[str],
                       lengths: Sequence[int], flags: Optional[EvalFlags] = None, seed: int = 1,
                       ablation: str = "base", device=None) -> EvalReport:
    return Evaluator(bundle, records, seed, flags, ablation, device).run_occlusion_grid(patterns, lengths)


def write_report(report: EvalReport, out_dir: str, stem: str = "report", excel: bool = True) -> Dict[str, str]:
    paths = {
        "csv": report.to_csv(os.path.join(out_dir, f"{stem}.csv")),
        "json": report.to_json(os.path.join(out_dir, f"{stem}.json")),
    }
    if excel:
        paths["xlsx"] = report.to_excel(os.path.join(out_dir, f"{stem}.xlsx"))
    for kind, path in paths.items():
        print(f"[Evaluation] {MSG_TAGS['INFO']}{kind.upper()} report written to '{pretty_path(path)}'")
    return paths


def reconstruct_record(bundle: ModelBundle, record: TrajectoryRecord, pattern: str = "EO", length: int = 3,
                       seed: int = 1, flags: Optional[EvalFlags] = None, device=None) -> pd.DataFrame:
    """
    Per-frame dump of one record in pixel space: truth, masked observation,
    reconstruction and every baseline imputation, plus P(cross) in the attrs.
    """
    flags = (flags or EvalFlags()).validate()
    device = device or next(bundle.denoiser.parameters()).device
    pattern = str(pattern).strip().upper()
    if pattern not in PATTERN_CODES:
        raise ArgumentError(f"Unknown occlusion pattern '{pattern}'. Expected one of {', '.join(PATTERNS)}")
    windows = prepare_windows([record], bundle.stats, pattern, length, seed, noise_std=flags.noise_std)
    generator = torch.Generator(device=device)
    generator.manual_seed(seed * 100 + PATTERN_CODES[pattern] * 10 + int(length))
    output = run_inference(bundle.denoiser, bundle.intention, bundle.schedule, windows, flags, generator, device,
                           desc=record.id)

    hidden = windows.masks[0]
    observed = windows.observed_raw[0].copy()
    observed[hidden] = float("nan")
    columns: Dict[str, object] = {"frame": list(range(len(hidden))), "occluded": hidden.astype(int)}
    blocks = {"truth": windows.truth_raw[0], "obs": observed}
    if output.recon is not None:
        blocks["rec"] = denormalize(output.recon[0], bundle.stats)
    for kind in BASELINE_KINDS:
        blocks[kind] = impute_batch(windows.observed_raw, windows.masks, kind)[0]
    for prefix, matrix in blocks.items():
        for c, name in enumerate(CHANNELS):
            columns[f"{prefix}_{name}"] = matrix[:, c]

    df = pd.DataFrame(columns)
    df.attrs["p_cross"] = float(output.probs[0])
    df.attrs["label"] = int(record.label)
    return df
