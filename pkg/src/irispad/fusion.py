"""Cascaded 2D->3D fusion.

The texture classifier has a low false-alarm rate but misses unfamiliar lens
prints, while the shape score generalizes across prints but is blind to highly
opaque ones. The cascade exploits that asymmetry: a texture attack verdict is
final; everything else defers to the shape verdict. When a sample has too few
solved pixels for a trustworthy shape score, the decision falls through to the
texture verdict alone and the sample is flagged.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

from .bsif import FilterBank, extract_features
from .classifier import Ensemble2D, classify_2d, pair_score_2d
from .core import CapturePair, Decision, DecisionSource, Label, PadClass
from .errors import DataError
from .photometric import (
    ThresholdModel3D,
    classify_3d,
    estimate_normals,
    is_scorable,
    normal_variance_score,
)
from .segmentation import centered_box_mask, intersect_masks

UNSCORABLE_3D_FLAG = "unscorable3d"

DEFAULT_BOX_FRACTION = 0.5


@dataclass(frozen=True)
class FusionConfig:
    """The two fitted sub-models the cascade composes."""

    ensemble: Ensemble2D
    model3d: ThresholdModel3D


@dataclass(frozen=True)
class PipelineResult:
    """All decisions and intermediate scores for one capture pair.

    ``q`` and ``d3`` are None when the sample was unscorable in 3-D (see
    flags); the fused decision then mirrors the texture decision.
    """

    fused: Decision
    d2: Decision
    d3: Optional[Decision]
    q: Optional[float]
    s2: float
    flags: tuple[str, ...] = ()


def fuse_decide(d2: Decision, d3: Decision) -> Decision:
    """Cascade rule: a texture attack verdict is final; otherwise the shape
    verdict decides. The fused score is the score of the deciding branch."""
    if d2.source is not DecisionSource.PAD_2D:
        raise DataError(f"first argument must come from the 2d path, got {d2.source.value}")
    if d3.source is not DecisionSource.PAD_3D:
        raise DataError(f"second argument must come from the 3d path, got {d3.source.value}")
    if d2.kind is PadClass.ATTACK:
        return Decision(kind=PadClass.ATTACK, score=d2.score, source=DecisionSource.FUSION)
    return Decision(kind=d3.kind, score=d3.score, source=DecisionSource.FUSION)


def run_pipeline(
    pair: CapturePair,
    config: FusionConfig,
    banks: Sequence[FilterBank],
    box_fraction: float = DEFAULT_BOX_FRACTION,
) -> PipelineResult:
    """Score one capture pair along both paths and fuse.

    The texture path pools features over a centered box (the default guess for
    the iris position); the shape path uses the pair's occlusion masks.
    """
    combined = intersect_masks(pair.mask_left, pair.mask_right)
    normal_map = estimate_normals(pair)

    region = centered_box_mask(pair.width, pair.height, box_fraction)
    features_left = extract_features(pair.left, region, banks)
    features_right = extract_features(pair.right, region, banks)
    s2 = pair_score_2d(config.ensemble, (features_left, features_right))
    d2 = classify_2d(s2, config.ensemble)

    if is_scorable(normal_map, combined.popcount):
        q = normal_variance_score(normal_map)
        d3 = classify_3d(q, config.model3d)
        return PipelineResult(fused=fuse_decide(d2, d3), d2=d2, d3=d3, q=q, s2=s2)

    fused = Decision(kind=d2.kind, score=d2.score, source=DecisionSource.FUSION)
    return PipelineResult(
        fused=fused, d2=d2, d3=None, q=None, s2=s2, flags=(UNSCORABLE_3D_FLAG,)
    )


def write_audit_csv(
    records: Sequence[tuple[str, PipelineResult, Label]], path
) -> None:
    """Audit export: CSV 'sample_id,q,s2,d3,d2,fused,label,flags'.

    Missing 3-D fields are left empty; multiple flags are ';'-joined.
    """
    from .core import format_float

    lines = ["sample_id,q,s2,d3,d2,fused,label,flags"]
    for sample_id, result, label in records:
        q = format_float(result.q) if result.q is not None else ""
        d3 = result.d3.kind.value if result.d3 is not None else ""
        lines.append(
            ",".join(
                [
                    sample_id,
                    q,
                    format_float(result.s2),
                    d3,
                    result.d2.kind.value,
                    result.fused.kind.value,
                    label.kind.value,
                    ";".join(result.flags),
                ]
            )
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
