# -*- coding: utf-8 -*-

"""
Ablation registry and runner.

Inference-time ablations reuse the base checkpoint with different EvalFlags.
Architecture / training ablations train their own model (same seed, same
manifest) and are evaluated on the same cell. Every ablation yields one
labeled report cell; directional expectations are logged, never enforced.
"""

import os
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

from src.modules.Dataset.Dataset import DatasetManifest
from src.modules.Denoiser.Denoiser import DenoiserConfig
from src.modules.Evaluation.Evaluation import EvalReport, run_occlusion_grid
from src.modules.Evaluation.ev_inference import EvalFlags
from src.modules.Intention.Intention import IntentionConfig
from src.modules.Training.Training import TrainConfig, fit
from src.modules.Training.tr_checkpoint import ModelBundle, load_checkpoint
from src.utils.utils_errors import ArgumentError
from src.utils.utils_infrastructure import MSG_TAGS

BASE_ABLATION = "base"


@dataclass(frozen=True)
class Ablation:
    name: str
    trained: bool
    description: str
    denoiser: Dict[str, object] = field(default_factory=dict)
    train: Dict[str, object] = field(default_factory=dict)
    flags: Dict[str, object] = field(default_factory=dict)


def _inputs(subset: str) -> Ablation:
    return Ablation(f"inputs_{subset}", True, f"only {'/'.join(subset)} modalities as input",
                    denoiser={"inputs": tuple(subset)})


ABLATIONS: Dict[str, Ablation] = {a.name: a for a in [
    Ablation("no_diffusion_mask", False, "plain network step on every entry", flags={"use_diffusion_mask": False}),
    *[Ablation(f"noise_{std:g}", False, f"N(0, {std:g}^2) pixel noise on observations", flags={"noise_std": float(std)})
      for std in (0.0, 1.0, 2.5, 5.0, 10.0)],
    Ablation("no_masking_block", True, "without the occlusion masking block", denoiser={"use_masking_block": False}),
    Ablation("context_conditioning", True, "condition by concatenation instead of AdaLN regression",
             denoiser={"context_conditioning": True}),
    Ablation("basic_attention", True, "plain AdaLN attention blocks", denoiser={"attention": "basic"}),
    *[Ablation(f"steps_{K}", True, f"K = {K} diffusion steps", train={"K": K}) for K in (25, 50, 100, 200)],
    Ablation("no_diffusion", True, "intention head on masked observations only",
             train={"use_diffusion": False}, flags={"use_diffusion": False}),
    *[_inputs(s) for s in ("B", "C", "BC", "BV", "CV", "V")],
    Ablation("fusion_concat", True, "concatenation fusion", denoiser={"fusion": "concat"}),
    Ablation("fusion_average", True, "average fusion", denoiser={"fusion": "average"}),
    Ablation("spatial_residual_temporal", True, "spatial residual from the temporal-stage output",
             denoiser={"spatial_residual": "temporal"}),
]}

# (better, worse, metric, higher_is_better)
DIRECTIONAL_CLAIMS: List[Tuple[str, str, str, bool]] = [
    (BASE_ABLATION, "no_diffusion_mask", "ade_center", False),
    (BASE_ABLATION, "no_masking_block", "ade_center", False),
    (BASE_ABLATION, "context_conditioning", "f1", True),
    (BASE_ABLATION, "basic_attention", "f1", True),
    (BASE_ABLATION, "no_diffusion", "f1", True),
    (BASE_ABLATION, "fusion_average", "f1", True),
    (BASE_ABLATION, "fusion_concat", "f1", True),
    ("noise_0", "noise_10", "f1", True),
]


def resolve_ablations(names: Optional[Sequence[str]]) -> List[Ablation]:
    if not names:
        return list(ABLATIONS.values())
    unknown = [n for n in names if n not in ABLATIONS]
    if unknown:
        raise ArgumentError(f"Unknown ablation(s) {', '.join(unknown)}. Expected any of {', '.join(ABLATIONS)}")
    return [ABLATIONS[n] for n in names]


def log_directional_claims(report: EvalReport) -> List[str]:
    """Print whether each expected ordering holds in this report; returns the lines."""
    cells = {c["ablation"]: c for c in report.cells}
    lines = []
    for better, worse, metric, higher in DIRECTIONAL_CLAIMS:
        if better not in cells or worse not in cells:
            continue
        a, b = float(cells[better][metric]), float(cells[worse][metric])
        holds = a >= b if higher else a <= b
        verdict = "holds" if holds else "does not hold"
        lines.append(f"{better} vs {worse} on {metric}: {a:.4f} vs {b:.4f} -> {verdict}")
        print(f"[Ablation] {MSG_TAGS['INFO']}{lines[-1]}")
    return lines


def run_ablation_grid(manifest: DatasetManifest, out_dir: str, names: Optional[Sequence[str]] = None,
                      train_config: Optional[TrainConfig] = None, denoiser_config: Optional[DenoiserConfig] = None,
                      intention_config: Optional[IntentionConfig] = None, base: Optional[ModelBundle] = None,
                      pattern: str = "EO", length: int = 5, split: str = "test", seed: int = 1,
                      flags: Optional[EvalFlags] = None, device=None) -> EvalReport:
    """
    Evaluate the base model and every requested ablation on one occlusion cell.
    The base model is trained under <out_dir>/base unless 'base' is given.
    """
    train_config = train_config or TrainConfig()
    denoiser_config = denoiser_config or DenoiserConfig()
    intention_config = intention_config or IntentionConfig()
    flags = flags or EvalFlags()
    records = manifest.subset(split)
    if not records:
        raise ArgumentError(f"split '{split}' is empty; nothing to evaluate")
    ablations = resolve_ablations(names)

    if base is None:
        print(f"[Ablation] {MSG_TAGS['INFO']}training base model")
        base = load_checkpoint(fit(manifest, train_config, os.path.join(out_dir, BASE_ABLATION),
                                   denoiser_config, intention_config), device=device)

    report = run_occlusion_grid(base, records, [pattern], [length], flags, seed, BASE_ABLATION, device)
    for ablation in ablations:
        cell_flags = replace(flags, **ablation.flags)
        bundle = base
        if ablation.trained:
            print(f"[Ablation] {MSG_TAGS['INFO']}training '{ablation.name}' ({ablation.description})")
            path = fit(
                manifest,
                replace(train_config, **ablation.train),
                os.path.join(out_dir, ablation.name),
                replace(denoiser_config, **ablation.denoiser),
                intention_config,
            )
            bundle = load_checkpoint(path, device=device)
        report.extend(run_occlusion_grid(bundle, records, [pattern], [length], cell_flags, seed, ablation.name, device))

    log_directional_claims(report)
    return report
