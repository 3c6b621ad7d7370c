"""ISO-30107-3 style metrics and the train/test experiment harness.

APCER is the fraction of attack presentations classified bona fide, BPCER the
fraction of bona fide presentations classified attack, and accuracy the
fraction of correct classifications overall. Rates whose denominator is zero
are reported as an explicit undefined marker (None / JSON null), never as 0.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .bsif import FilterBank, default_filter_banks, extract_features
from .classifier import Ensemble2D, LossKind, train_ensemble
from .core import (
    CapturePair,
    DatasetManifest,
    Decision,
    Label,
    LightingGeometry,
    ManifestEntry,
    PadClass,
    format_float,
    read_pgm_image,
    read_pgm_mask,
)
from .errors import DataError
from .fusion import FusionConfig, PipelineResult, run_pipeline
from .photometric import (
    ThresholdModel3D,
    default_lights,
    estimate_normals,
    fit_threshold,
    is_scorable,
    normal_variance_score,
)
from .segmentation import centered_box_mask, intersect_masks

_GROUP_FIELDS = ("brand", "sensor", "pattern")

# Fraction of unscorable test samples above which the harness warns.
UNSCORABLE_WARNING_FRACTION = 0.2


@dataclass(frozen=True)
class EvalReport:
    """Accuracy, error rates, raw counts, and optional per-group breakdowns."""

    accuracy: float
    apcer: Optional[float]
    bpcer: Optional[float]
    attacks: int
    bonafides: int
    attack_errors: int
    bonafide_errors: int
    groups: Optional[dict[str, "EvalReport"]] = None
    warnings: tuple[str, ...] = ()

    def to_json_dict(self) -> dict:
        out: dict = {
            "accuracy": self.accuracy,
            "apcer": self.apcer,
            "bpcer": self.bpcer,
            "counts": {
                "attacks": self.attacks,
                "bonafides": self.bonafides,
                "attack_errors": self.attack_errors,
                "bonafide_errors": self.bonafide_errors,
            },
            "groups": (
                {key: sub.to_json_dict() for key, sub in self.groups.items()}
                if self.groups is not None
                else None
            ),
        }
        if self.warnings:
            out["warnings"] = list(self.warnings)
        return out


def _group_key(label: Label, group_by: str) -> str:
    if group_by == "brand":
        return label.brand or "-"
    if group_by == "sensor":
        return label.sensor or "-"
    return label.pattern.value if label.pattern else "-"


def compute_report(
    decisions: Sequence[Decision],
    labels: Sequence[Label],
    group_by: Optional[str] = None,
    warnings: Sequence[str] = (),
) -> EvalReport:
    """Tally decisions against ground truth, optionally broken down by a
    label field (brand, sensor, or pattern)."""
    if len(decisions) != len(labels):
        raise DataError(
            f"decision count {len(decisions)} does not match label count {len(labels)}"
        )
    if not decisions:
        raise DataError("cannot evaluate an empty sample set")
    if group_by is not None and group_by not in _GROUP_FIELDS:
        raise DataError(f"group_by must be one of {_GROUP_FIELDS}, got '{group_by}'")

    attacks = bonafides = attack_errors = bonafide_errors = 0
    for decision, label in zip(decisions, labels):
        if label.kind is PadClass.ATTACK:
            attacks += 1
            if decision.kind is PadClass.BONA_FIDE:
                attack_errors += 1
        else:
            bonafides += 1
            if decision.kind is PadClass.ATTACK:
                bonafide_errors += 1

    total = attacks + bonafides
    report = EvalReport(
        accuracy=1.0 - (attack_errors + bonafide_errors) / total,
        apcer=attack_errors / attacks if attacks else None,
        bpcer=bonafide_errors / bonafides if bonafides else None,
        attacks=attacks,
        bonafides=bonafides,
        attack_errors=attack_errors,
        bonafide_errors=bonafide_errors,
        warnings=tuple(warnings),
    )
    if group_by is None:
        return report

    keys = sorted({_group_key(label, group_by) for label in labels})
    groups = {}
    for key in keys:
        subset = [
            (d, l) for d, l in zip(decisions, labels) if _group_key(l, group_by) == key
        ]
        groups[key] = compute_report([d for d, _ in subset], [l for _, l in subset])
    return EvalReport(
        accuracy=report.accuracy,
        apcer=report.apcer,
        bpcer=report.bpcer,
        attacks=report.attacks,
        bonafides=report.bonafides,
        attack_errors=report.attack_errors,
        bonafide_errors=report.bonafide_errors,
        groups=groups,
        warnings=tuple(warnings),
    )


def write_report_json(report: EvalReport, path) -> None:
    """Fixed key order: accuracy, apcer, bpcer, counts, groups."""
    Path(path).write_text(
        json.dumps(report.to_json_dict(), indent=2) + "\n", encoding="utf-8"
    )


def export_scatter(records: Sequence[tuple[float, float, Label]], path) -> None:
    """Scatter export: CSV 'q,s2,class' with one row per scored sample."""
    if not records:
        raise DataError("no scatter records to export")
    lines = ["q,s2,class"]
    for q, s2, label in records:
        lines.append(f"{format_float(q)},{format_float(s2)},{label.kind.value}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def aggregate_reports(reports: Sequence[EvalReport]) -> dict:
    """Mean and population standard deviation of the headline metrics over
    folds; undefined rates are skipped per metric."""
    if not reports:
        raise DataError("no reports to aggregate")
    summary: dict = {"folds": len(reports)}
    for metric in ("accuracy", "apcer", "bpcer"):
        values = [getattr(r, metric) for r in reports if getattr(r, metric) is not None]
        if values:
            summary[metric] = {
                "mean": float(np.mean(values)),
                "std": float(np.std(values)),
            }
        else:
            summary[metric] = None
    return summary


# ---------------------------------------------------------------------------
# Experiment harness


@dataclass
class ExperimentConfig:
    """Everything run_experiment needs beyond the two manifests."""

    banks: Optional[list[FilterBank]] = None
    light_angle_deg: float = 30.0
    box_fraction: float = 0.5
    mask_fraction: float = 0.5
    loss_kind: LossKind = LossKind.LOGISTIC
    l2_penalty: float = 1e-3
    epochs: int = 500
    learning_rate: float = 0.1
    seed: int = 0
    init_scale: float = 0.0
    require_subject_disjoint: bool = True
    group_by: Optional[str] = None


@dataclass
class ExperimentResult:
    report_2d: EvalReport
    report_3d: Optional[EvalReport]
    report_fusion: EvalReport
    scatter: list[tuple[float, float, Label]]
    audit: list[tuple[str, PipelineResult, Label]]
    model3d: ThresholdModel3D
    ensemble: Ensemble2D
    unscorable_count: int
    warnings: tuple[str, ...] = ()
    artifacts: list[Path] = field(default_factory=list)


def load_capture_pair(
    manifest: DatasetManifest,
    entry: ManifestEntry,
    lights: LightingGeometry,
    mask_fraction: float = 0.5,
) -> CapturePair:
    """Read one entry's rasters; absent masks fall back to the centered box."""
    left = read_pgm_image(manifest.resolve(entry.left))
    right = read_pgm_image(manifest.resolve(entry.right))
    if entry.mask_left is not None:
        mask_left = read_pgm_mask(manifest.resolve(entry.mask_left))
    else:
        mask_left = centered_box_mask(left.width, left.height, mask_fraction)
    if entry.mask_right is not None:
        mask_right = read_pgm_mask(manifest.resolve(entry.mask_right))
    else:
        mask_right = centered_box_mask(right.width, right.height, mask_fraction)
    return CapturePair(
        left=left, right=right, mask_left=mask_left, mask_right=mask_right, lights=lights
    )


def _check_subject_disjoint(train: DatasetManifest, test: DatasetManifest) -> None:
    overlap = sorted(set(train.subjects()) & set(test.subjects()))
    if overlap:
        raise DataError(
            "train and test manifests share subjects under a subject-disjoint "
            f"protocol: {', '.join(overlap)}"
        )


def train_models(
    manifest: DatasetManifest,
    banks: Sequence[FilterBank],
    light_angle_deg: float = 30.0,
    box_fraction: float = 0.5,
    mask_fraction: float = 0.5,
    loss_kind: LossKind = LossKind.LOGISTIC,
    l2_penalty: float = 1e-3,
    epochs: int = 500,
    learning_rate: float = 0.1,
    seed: int = 0,
    init_scale: float = 0.0,
) -> tuple[ThresholdModel3D, Ensemble2D, list[tuple[str, float, Label]]]:
    """Fit the shape threshold (on scorable pairs) and the texture ensemble
    (on all pairs) from one manifest; also returns the labeled train scores."""
    if not manifest.entries:
        raise DataError("training manifest has no entries")
    lights = default_lights(light_angle_deg)
    scored_rows: list[tuple[str, float, Label]] = []
    pair_features = []
    labels = []
    for entry in manifest.entries:
        pair = load_capture_pair(manifest, entry, lights, mask_fraction)
        combined = intersect_masks(pair.mask_left, pair.mask_right)
        normal_map = estimate_normals(pair)
        if is_scorable(normal_map, combined.popcount):
            scored_rows.append(
                (entry.sample_id, normal_variance_score(normal_map), entry.label)
            )
        region = centered_box_mask(pair.width, pair.height, box_fraction)
        pair_features.append(
            (
                extract_features(pair.left, region, banks),
                extract_features(pair.right, region, banks),
            )
        )
        labels.append(entry.label)

    model3d = fit_threshold([(q, label) for _, q, label in scored_rows])
    ensemble = train_ensemble(
        pair_features,
        labels,
        banks,
        loss_kind=loss_kind,
        l2_penalty=l2_penalty,
        epochs=epochs,
        learning_rate=learning_rate,
        seed=seed,
        init_scale=init_scale,
        trained_on=f"{len(labels)} training pairs",
    )
    return model3d, ensemble, scored_rows


def run_experiment(
    train: DatasetManifest,
    test: DatasetManifest,
    config: Optional[ExperimentConfig] = None,
    out_dir=None,
    plot: bool = False,
) -> ExperimentResult:
    """Train both paths on ``train``, evaluate texture/shape/fusion on ``test``.

    Emits three reports plus the score scatter. Unscorable test samples are
    excluded from the shape-only report (the fused decision falls back to the
    texture verdict); if they exceed UNSCORABLE_WARNING_FRACTION of the test
    set a warning is attached to every report. With ``out_dir`` set, writes
    report_{2d,3d,fusion}.json and scatter.csv there, plus figures when
    ``plot`` is requested.
    """
    config = config if config is not None else ExperimentConfig()
    if config.require_subject_disjoint:
        _check_subject_disjoint(train, test)
    if not train.entries or not test.entries:
        raise DataError("both train and test manifests need at least one entry")

    banks = config.banks if config.banks is not None else default_filter_banks()
    lights = default_lights(config.light_angle_deg)

    model3d, ensemble, _ = train_models(
        train,
        banks,
        light_angle_deg=config.light_angle_deg,
        box_fraction=config.box_fraction,
        mask_fraction=config.mask_fraction,
        loss_kind=config.loss_kind,
        l2_penalty=config.l2_penalty,
        epochs=config.epochs,
        learning_rate=config.learning_rate,
        seed=config.seed,
        init_scale=config.init_scale,
    )
    fusion_config = FusionConfig(ensemble=ensemble, model3d=model3d)

    # Test.
    audit: list[tuple[str, PipelineResult, Label]] = []
    for entry in test.entries:
        pair = load_capture_pair(test, entry, lights, config.mask_fraction)
        result = run_pipeline(pair, fusion_config, banks, config.box_fraction)
        audit.append((entry.sample_id, result, entry.label))

    labels = [label for _, _, label in audit]
    unscorable = sum(1 for _, r, _ in audit if r.d3 is None)
    warnings: tuple[str, ...] = ()
    if unscorable > UNSCORABLE_WARNING_FRACTION * len(audit):
        warnings = (
            f"{unscorable} of {len(audit)} test samples were unscorable in 3d "
            "(insufficient valid pixels); their fused decisions used the 2d path alone",
        )

    report_2d = compute_report(
        [r.d2 for _, r, _ in audit], labels, config.group_by, warnings
    )
    scored = [(r, label) for _, r, label in audit if r.d3 is not None]
    report_3d = (
        compute_report(
            [r.d3 for r, _ in scored], [label for _, label in scored], config.group_by, warnings
        )
        if scored
        else None
    )
    report_fusion = compute_report(
        [r.fused for _, r, _ in audit], labels, config.group_by, warnings
    )
    scatter = [(r.q, r.s2, label) for _, r, label in audit if r.q is not None]

    result = ExperimentResult(
        report_2d=report_2d,
        report_3d=report_3d,
        report_fusion=report_fusion,
        scatter=scatter,
        audit=audit,
        model3d=model3d,
        ensemble=ensemble,
        unscorable_count=unscorable,
        warnings=warnings,
    )

    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        write_report_json(report_2d, out_dir / "report_2d.json")
        result.artifacts.append(out_dir / "report_2d.json")
        if report_3d is not None:
            write_report_json(report_3d, out_dir / "report_3d.json")
            result.artifacts.append(out_dir / "report_3d.json")
        write_report_json(report_fusion, out_dir / "report_fusion.json")
        result.artifacts.append(out_dir / "report_fusion.json")
        if scatter:
            export_scatter(scatter, out_dir / "scatter.csv")
            result.artifacts.append(out_dir / "scatter.csv")
        if plot and scatter:
            from . import plotting

            try:
                figures = plotting.save_score_figures(scatter, out_dir)
                result.artifacts.extend(figures)
            except Exception as exc:  # plotting is best-effort; CSV is canonical
                result.warnings = result.warnings + (f"figure rendering failed: {exc}",)
    return result
