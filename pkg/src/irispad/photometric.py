"""Shape-based PAD: per-pixel surface normals from a two-illuminant pair and
the normal-spread variance score.

The per-pixel model is Lambertian: stacking the two observed intensities as
``I = [I_left, I_right]`` and the two unit light directions as the rows of a
2x3 matrix ``L``, the scaled normal solves ``I = L n_hat``. The system is
underdetermined, so the minimum-norm Moore-Penrose solution
``n_hat = L^T (L L^T)^-1 I`` is used; with both lights in the x-z plane this
pins the unsolvable y-component to exactly zero. Unit normals come from
normalizing ``n_hat``, which also cancels the (uniform) albedo.

A genuine iris is close to planar at sensor resolution, so the recovered
normals cluster around their mean; a textured contact lens casts different
shadows under each light and spreads the normals widely. The PAD score is the
population variance of the Euclidean distances between each valid normal and
the mean normal. Pixels outside the combined occlusion mask, or too dark to
normalize, are excluded.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .core import (
    CapturePair,
    Decision,
    DecisionSource,
    Label,
    LightingGeometry,
    PadClass,
    format_float,
)
from .errors import DataError, NumericsError
from .segmentation import intersect_masks
from .thresholding import minimum_error_threshold

# Pixels with ||n_hat|| at or below this (e.g. dark under both lights) are
# marked invalid instead of being normalized.
MIN_SOLVE_NORM = 1e-8

# sin^2 of the smallest tolerated angle between the two light directions;
# below this the Gram matrix L L^T is treated as singular.
_COLLINEAR_TOL = 1e-9

# Samples whose solved-pixel count falls below this fraction of the combined
# mask area are "unscorable" rather than silently classified.
MIN_VALID_FRACTION = 0.01

DEFAULT_LIGHT_ANGLE_DEG = 30.0


def default_lights(angle_deg: float = DEFAULT_LIGHT_ANGLE_DEG) -> LightingGeometry:
    """Two illuminants at +/- angle from the optical axis in the x-z plane.

    Index 0 (the "left" image's light) sits at +angle, mirroring a sensor with
    two NIR illuminators placed symmetrically beside the lens.
    """
    if not 0.0 < angle_deg < 90.0:
        raise DataError("light angle must lie strictly between 0 and 90 degrees")
    rad = math.radians(angle_deg)
    s, c = math.sin(rad), math.cos(rad)
    return LightingGeometry(np.array([[s, 0.0, c], [-s, 0.0, c]]))


@dataclass(frozen=True)
class NormalMap:
    """Per-pixel estimated unit normals with a validity grid.

    Invalid pixels (outside the combined mask, or with an ill-posed solve)
    carry the zero-vector sentinel and are excluded from all statistics.
    """

    normals: np.ndarray
    valid: np.ndarray

    def __post_init__(self) -> None:
        normals = np.array(self.normals, dtype=np.float64)
        valid = np.array(self.valid, dtype=bool)
        if normals.ndim != 3 or normals.shape[2] != 3:
            raise DataError("normal grid must have shape (height, width, 3)")
        if valid.shape != normals.shape[:2]:
            raise DataError("validity grid must match the normal grid dimensions")
        lengths = np.linalg.norm(normals[valid], axis=1)
        if lengths.size and np.any(np.abs(lengths - 1.0) > 1e-6):
            raise DataError("valid normals must have unit length within 1e-6")
        normals.setflags(write=False)
        valid.setflags(write=False)
        object.__setattr__(self, "normals", normals)
        object.__setattr__(self, "valid", valid)

    @property
    def height(self) -> int:
        return int(self.normals.shape[0])

    @property
    def width(self) -> int:
        return int(self.normals.shape[1])

    @property
    def valid_count(self) -> int:
        return int(self.valid.sum())

    def valid_normals(self) -> np.ndarray:
        """(n, 3) array of the valid unit normals, row-major pixel order."""
        return self.normals[self.valid]


@dataclass(frozen=True)
class ThresholdModel3D:
    """Fixed-orientation decision rule: score > threshold => attack."""

    threshold: float

    def __post_init__(self) -> None:
        if not math.isfinite(self.threshold):
            raise DataError("threshold must be finite")


def estimate_normals(pair: CapturePair) -> NormalMap:
    """Recover unit surface normals over the combined occlusion mask.

    For each masked pixel the minimum-norm pseudoinverse solution of the 2x3
    Lambertian system is computed in closed form; pixels whose scaled normal
    has length <= MIN_SOLVE_NORM stay invalid. Raises NumericsError when the
    two light directions are collinear.
    """
    lights = pair.lights.directions
    l1, l2 = lights[0], lights[1]
    a = float(np.dot(l1, l1))
    d = float(np.dot(l2, l2))
    b = float(np.dot(l1, l2))
    det = a * d - b * b
    if det <= _COLLINEAR_TOL:
        raise NumericsError(
            "light directions are collinear; the photometric system is singular"
        )

    combined = intersect_masks(pair.mask_left, pair.mask_right)
    selected = combined.bits
    i1 = pair.left.intensities[selected]
    i2 = pair.right.intensities[selected]

    # n_hat = L^T (L L^T)^-1 I, written out so that jointly swapping
    # (i1, l1) with (i2, l2) is bitwise exact (IEEE ops are commutative).
    u1 = (d * i1 - b * i2) / det
    u2 = (a * i2 - b * i1) / det
    n_hat = l1[np.newaxis, :] * u1[:, np.newaxis] + l2[np.newaxis, :] * u2[:, np.newaxis]

    lengths = np.sqrt(np.sum(n_hat * n_hat, axis=1))
    well_posed = lengths > MIN_SOLVE_NORM
    units = np.zeros_like(n_hat)
    np.divide(n_hat, lengths[:, np.newaxis], out=units, where=well_posed[:, np.newaxis])

    height, width = selected.shape
    normals = np.zeros((height, width, 3), dtype=np.float64)
    normals[selected] = units
    valid = np.zeros((height, width), dtype=bool)
    valid[selected] = well_posed
    return NormalMap(normals=normals, valid=valid)


def mean_normal(normal_map: NormalMap) -> np.ndarray:
    """Arithmetic mean of the valid normals (not renormalized)."""
    points = normal_map.valid_normals()
    if points.shape[0] < 1:
        raise NumericsError("no valid pixels to average")
    return points.mean(axis=0)


def normal_variance_score(normal_map: NormalMap) -> float:
    """PAD score: population variance of ||n_i - mean|| over valid pixels.

    Zero for a constant normal field; grows with surface irregularity.
    """
    points = normal_map.valid_normals()
    if points.shape[0] < 2:
        raise NumericsError("variance score needs at least two valid pixels")
    center = points.mean(axis=0)
    distances = np.linalg.norm(points - center, axis=1)
    return float(np.var(distances))


def is_scorable(normal_map: NormalMap, mask_area: int) -> bool:
    """Whether enough pixels solved to trust a variance score.

    Requires at least max(2, ceil(MIN_VALID_FRACTION * mask_area)) valid
    pixels and a nonempty combined mask.
    """
    if mask_area <= 0:
        return False
    needed = max(2, math.ceil(MIN_VALID_FRACTION * mask_area))
    return normal_map.valid_count >= needed


def fit_threshold(scored: Iterable[tuple[float, Label]]) -> ThresholdModel3D:
    """Fit the decision threshold from labeled training scores.

    Minimizes misclassifications under (score > t => attack); ties prefer the
    candidate with the smallest |APCER - BPCER|, then the smallest value.
    """
    pairs = list(scored)
    if not pairs:
        raise DataError("threshold fitting needs at least one score")
    scores = np.array([s for s, _ in pairs], dtype=np.float64)
    attacks = np.array([label.kind is PadClass.ATTACK for _, label in pairs], dtype=bool)
    if not attacks.any() or attacks.all():
        raise DataError("threshold fitting needs scores from both classes")
    return ThresholdModel3D(threshold=minimum_error_threshold(scores, attacks))


def classify_3d(score: float, model: ThresholdModel3D) -> Decision:
    """Attack iff score strictly exceeds the threshold."""
    kind = PadClass.ATTACK if score > model.threshold else PadClass.BONA_FIDE
    return Decision(kind=kind, score=float(score), source=DecisionSource.PAD_3D)


# ---------------------------------------------------------------------------
# File formats


def save_threshold_model(model: ThresholdModel3D, path) -> None:
    Path(path).write_text(f"threshold {format_float(model.threshold)}\n", encoding="utf-8")


def load_threshold_model(path) -> ThresholdModel3D:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"threshold model not found: {path}")
    fields = path.read_text(encoding="utf-8").split()
    if len(fields) != 2 or fields[0] != "threshold":
        raise DataError(f"{path}: expected a single 'threshold <value>' line")
    try:
        return ThresholdModel3D(threshold=float(fields[1]))
    except ValueError:
        raise DataError(f"{path}: non-numeric threshold '{fields[1]}'") from None


def write_normal_map(normal_map: NormalMap, path) -> None:
    """Text export: header 'width height', then 'x y nx ny nz valid' per pixel."""
    lines = [f"{normal_map.width} {normal_map.height}"]
    normals = normal_map.normals
    valid = normal_map.valid
    for y in range(normal_map.height):
        for x in range(normal_map.width):
            nx, ny, nz = normals[y, x]
            lines.append(
                f"{x} {y} {format_float(nx)} {format_float(ny)} {format_float(nz)} "
                f"{1 if valid[y, x] else 0}"
            )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_normal_map(path) -> NormalMap:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"normal map not found: {path}")
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines:
        raise DataError(f"{path}: empty normal map file")
    header = lines[0].split()
    if len(header) != 2:
        raise DataError(f"{path}: header must be 'width height'")
    try:
        width, height = int(header[0]), int(header[1])
    except ValueError:
        raise DataError(f"{path}: non-numeric header") from None
    body = [line for line in lines[1:] if line.strip()]
    if len(body) != width * height:
        raise DataError(
            f"{path}: expected {width * height} pixel lines, found {len(body)}"
        )
    normals = np.zeros((height, width, 3), dtype=np.float64)
    valid = np.zeros((height, width), dtype=bool)
    for lineno, line in enumerate(body, start=2):
        fields = line.split()
        if len(fields) != 6:
            raise DataError(f"{path}: line {lineno}: expected 'x y nx ny nz valid'")
        try:
            x, y = int(fields[0]), int(fields[1])
            vec = [float(fields[2]), float(fields[3]), float(fields[4])]
            flag = int(fields[5])
        except ValueError:
            raise DataError(f"{path}: line {lineno}: non-numeric field") from None
        if not (0 <= x < width and 0 <= y < height) or flag not in (0, 1):
            raise DataError(f"{path}: line {lineno}: out-of-range pixel or flag")
        normals[y, x] = vec
        valid[y, x] = bool(flag)
    return NormalMap(normals=normals, valid=valid)


def write_scores_csv(rows: Sequence[tuple[str, float, Label]], path) -> None:
    """Score export: CSV 'sample_id,q,label' (q is the population-variance score)."""
    out = ["sample_id,q,label"]
    for sample_id, score, label in rows:
        out.append(f"{sample_id},{format_float(score)},{label.kind.value}")
    Path(path).write_text("\n".join(out) + "\n", encoding="utf-8")
