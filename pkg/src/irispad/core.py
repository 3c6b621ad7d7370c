"""Shared domain types: rasters, capture pairs, labels, decisions, manifests.

Conventions used throughout the package:

* Rasters are row-major ``(height, width)`` numpy arrays indexed ``[y, x]``.
  Pixel ``(x, y)`` covers a unit square whose center sits at the continuous
  image coordinate ``(x + 0.5, y + 0.5)``.
* Intensities are floats in ``[0, 1]``, normalized from 8-bit sources as
  ``value / 255``; the photometric solve is linear in intensity and must not
  depend on bit depth.
* 3-vectors use x right, y up, z toward the camera.
* All types are immutable after construction (backing arrays are marked
  read-only) and safe to share across concurrent readers.

Image files are binary 8-bit PGM (magic ``P5``); mask files are PGM where a
value >= 128 marks a usable pixel. Dataset manifests are UTF-8 CSV tables with
the exact header ``left,right,mask_left,mask_right,class,subject,brand,sensor,
pattern``; ``-`` marks an absent optional value, and an absent mask means
"generate a geometric mask".
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterator, Optional, Sequence

import numpy as np

from .errors import DataError

_WHITESPACE = b" \t\n\r\x0b\x0c"
_UNIT_TOL = 1e-9
_MISSING = "-"

MANIFEST_COLUMNS = (
    "left",
    "right",
    "mask_left",
    "mask_right",
    "class",
    "subject",
    "brand",
    "sensor",
    "pattern",
)


def format_float(value) -> str:
    """Shortest decimal string that round-trips the float exactly."""
    return repr(float(value))


class PadClass(Enum):
    """Binary presentation-attack vocabulary: genuine iris vs artifact."""

    BONA_FIDE = "bonafide"
    ATTACK = "attack"


class LensPattern(Enum):
    """Texture family of a printed contact lens."""

    REGULAR = "regular"
    IRREGULAR = "irregular"


class DecisionSource(Enum):
    """Which scoring path produced a decision."""

    PAD_2D = "pad2d"
    PAD_3D = "pad3d"
    FUSION = "fusion"


def _readonly(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class NirImage:
    """Single-channel near-infrared intensity raster with values in [0, 1]."""

    intensities: np.ndarray

    def __post_init__(self) -> None:
        arr = np.array(self.intensities, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise DataError("image must be a 2-D grid with positive dimensions")
        if not np.isfinite(arr).all():
            raise DataError("image intensities must be finite")
        if float(arr.min()) < 0.0 or float(arr.max()) > 1.0:
            raise DataError("image intensities must lie in [0, 1]")
        object.__setattr__(self, "intensities", _readonly(arr))

    @property
    def height(self) -> int:
        return int(self.intensities.shape[0])

    @property
    def width(self) -> int:
        return int(self.intensities.shape[1])


@dataclass(frozen=True)
class Mask:
    """Boolean raster; True marks a usable (non-occluded) pixel."""

    bits: np.ndarray

    def __post_init__(self) -> None:
        arr = np.array(self.bits, dtype=bool)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise DataError("mask must be a 2-D grid with positive dimensions")
        object.__setattr__(self, "bits", _readonly(arr))

    @property
    def height(self) -> int:
        return int(self.bits.shape[0])

    @property
    def width(self) -> int:
        return int(self.bits.shape[1])

    @property
    def popcount(self) -> int:
        return int(self.bits.sum())


@dataclass(frozen=True)
class LightingGeometry:
    """Ordered unit illumination directions, one per illuminator.

    Directions point from the surface toward the light and must sit in front
    of the surface (positive z).
    """

    directions: np.ndarray

    def __post_init__(self) -> None:
        arr = np.array(self.directions, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[1] != 3:
            raise DataError("light directions must form a (k, 3) array")
        if arr.shape[0] < 2:
            raise DataError("at least two illumination directions are required")
        norms = np.linalg.norm(arr, axis=1)
        if np.any(np.abs(norms - 1.0) > _UNIT_TOL):
            raise DataError("light directions must be unit vectors")
        if np.any(arr[:, 2] <= 0.0):
            raise DataError("light directions must have positive z")
        object.__setattr__(self, "directions", _readonly(arr))

    @property
    def count(self) -> int:
        return int(self.directions.shape[0])


@dataclass(frozen=True)
class CapturePair:
    """Left- and right-illuminated images of one eye plus lighting geometry.

    Index 0 of ``lights`` illuminated ``left``, index 1 illuminated ``right``.
    """

    left: NirImage
    right: NirImage
    mask_left: Mask
    mask_right: Mask
    lights: LightingGeometry

    def __post_init__(self) -> None:
        shape = self.left.intensities.shape
        rasters = (
            ("right image", self.right.intensities),
            ("left mask", self.mask_left.bits),
            ("right mask", self.mask_right.bits),
        )
        for name, arr in rasters:
            if arr.shape != shape:
                raise DataError(
                    f"{name} has shape {arr.shape}, expected {shape} to match the left image"
                )
        if self.lights.count != 2:
            raise DataError("a capture pair uses exactly two illuminants")

    @property
    def height(self) -> int:
        return self.left.height

    @property
    def width(self) -> int:
        return self.left.width


@dataclass(frozen=True)
class Label:
    """Ground truth attached to one dataset sample."""

    kind: PadClass
    subject_id: str
    brand: Optional[str] = None
    sensor: Optional[str] = None
    pattern: Optional[LensPattern] = None

    def __post_init__(self) -> None:
        if not self.subject_id:
            raise DataError("label subject_id must be nonempty")


@dataclass(frozen=True)
class Decision:
    """A classifier verdict with its raw score (higher = more attack-like)."""

    kind: PadClass
    score: float
    source: DecisionSource

    def __post_init__(self) -> None:
        score = float(self.score)
        if not math.isfinite(score):
            raise DataError("decision score must be finite")
        object.__setattr__(self, "score", score)


# ---------------------------------------------------------------------------
# PGM I/O


def _split_pgm(data: bytes, path: Path) -> tuple[int, int, int, np.ndarray]:
    tokens: list[bytes] = []
    pos, n = 0, len(data)
    while len(tokens) < 4 and pos < n:
        byte = data[pos]
        if byte in _WHITESPACE:
            pos += 1
        elif byte == ord("#"):
            while pos < n and data[pos] not in b"\r\n":
                pos += 1
        else:
            start = pos
            while pos < n and data[pos] not in _WHITESPACE:
                pos += 1
            tokens.append(data[start:pos])
    if len(tokens) < 4:
        raise DataError(f"{path}: truncated PGM header")
    if tokens[0] != b"P5":
        raise DataError(f"{path}: not a binary PGM (magic {tokens[0]!r}, expected b'P5')")
    try:
        width, height, maxval = (int(t) for t in tokens[1:4])
    except ValueError:
        raise DataError(f"{path}: non-numeric PGM header fields") from None
    if width < 1 or height < 1:
        raise DataError(f"{path}: invalid PGM dimensions {width}x{height}")
    if not 1 <= maxval <= 255:
        raise DataError(f"{path}: only 8-bit PGM supported (maxval {maxval})")
    if pos >= n or data[pos] not in _WHITESPACE:
        raise DataError(f"{path}: missing whitespace after PGM header")
    raster = data[pos + 1 :]
    if len(raster) != width * height:
        raise DataError(
            f"{path}: raster holds {len(raster)} bytes, expected {width * height}"
        )
    grid = np.frombuffer(raster, dtype=np.uint8).reshape(height, width)
    return width, height, maxval, grid


def read_pgm_bytes(path) -> np.ndarray:
    """Read a binary 8-bit PGM; returns the raw uint8 grid."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"PGM file not found: {path}")
    _, _, _, grid = _split_pgm(path.read_bytes(), path)
    return grid


def write_pgm_bytes(grid: np.ndarray, path) -> None:
    """Write a uint8 grid as binary PGM with maxval 255."""
    arr = np.asarray(grid, dtype=np.uint8)
    if arr.ndim != 2:
        raise DataError("PGM raster must be 2-D")
    height, width = arr.shape
    header = f"P5\n{width} {height}\n255\n".encode("ascii")
    Path(path).write_bytes(header + arr.tobytes())


def read_pgm_image(path) -> NirImage:
    """Load an 8-bit PGM as a normalized intensity raster (value / 255)."""
    return NirImage(read_pgm_bytes(path).astype(np.float64) / 255.0)


def write_pgm_image(image: NirImage, path) -> None:
    """Quantize intensities to 8 bits (round(value * 255)) and write PGM."""
    write_pgm_bytes(np.round(image.intensities * 255.0).astype(np.uint8), path)


def read_pgm_mask(path) -> Mask:
    """Load a PGM as a mask: value >= 128 marks a usable pixel."""
    return Mask(read_pgm_bytes(path) >= 128)


def write_pgm_mask(mask: Mask, path) -> None:
    write_pgm_bytes(np.where(mask.bits, 255, 0).astype(np.uint8), path)


# ---------------------------------------------------------------------------
# Dataset manifest


@dataclass(frozen=True)
class ManifestEntry:
    """One capture pair: file paths as written in the manifest, plus label.

    ``mask_left``/``mask_right`` are None when the manifest asks for a
    generated geometric mask.
    """

    left: str
    right: str
    mask_left: Optional[str]
    mask_right: Optional[str]
    label: Label

    @property
    def sample_id(self) -> str:
        return Path(self.left).stem


@dataclass(frozen=True)
class DatasetManifest:
    """Ordered list of capture-pair entries with a resolution root.

    Relative paths resolve against ``root`` (the directory holding the
    manifest file); absolute paths pass through unchanged.
    """

    root: Path
    entries: tuple[ManifestEntry, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "root", Path(self.root))
        object.__setattr__(self, "entries", tuple(self.entries))

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[ManifestEntry]:
        return iter(self.entries)

    def resolve(self, relpath: str) -> Path:
        p = Path(relpath)
        return p if p.is_absolute() else self.root / p

    def subjects(self) -> list[str]:
        """Distinct subject ids in first-appearance order."""
        return list(dict.fromkeys(e.label.subject_id for e in self.entries))

    def with_entries(self, entries: Sequence[ManifestEntry]) -> "DatasetManifest":
        return DatasetManifest(root=self.root, entries=tuple(entries))


def _parse_optional(field: str) -> Optional[str]:
    return None if field in ("", _MISSING) else field


def load_manifest(path) -> DatasetManifest:
    """Parse and validate a manifest CSV.

    Every referenced file must exist; malformed rows are reported with their
    file line number; duplicate (subject, left-path) entries are rejected.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"manifest not found: {path}")
    root = path.parent
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != MANIFEST_COLUMNS:
        raise DataError(
            f"{path}: first line must be the header {','.join(MANIFEST_COLUMNS)}"
        )

    entries: list[ManifestEntry] = []
    seen: set[tuple[str, str]] = set()
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(MANIFEST_COLUMNS):
            raise DataError(
                f"{path}: row {lineno}: expected {len(MANIFEST_COLUMNS)} columns, got {len(row)}"
            )
        left, right, mask_l, mask_r, klass, subject, brand, sensor, pattern = (
            field.strip() for field in row
        )
        if not left or left == _MISSING or not right or right == _MISSING:
            raise DataError(f"{path}: row {lineno}: left/right image paths are required")
        try:
            kind = PadClass(klass)
        except ValueError:
            raise DataError(f"{path}: row {lineno}: unknown class '{klass}'") from None
        pattern_value = _parse_optional(pattern)
        try:
            lens_pattern = LensPattern(pattern_value) if pattern_value else None
        except ValueError:
            raise DataError(f"{path}: row {lineno}: unknown pattern '{pattern}'") from None
        if not subject:
            raise DataError(f"{path}: row {lineno}: subject must be nonempty")
        label = Label(
            kind=kind,
            subject_id=subject,
            brand=_parse_optional(brand),
            sensor=_parse_optional(sensor),
            pattern=lens_pattern,
        )
        entry = ManifestEntry(
            left=left,
            right=right,
            mask_left=_parse_optional(mask_l),
            mask_right=_parse_optional(mask_r),
            label=label,
        )
        key = (subject, left)
        if key in seen:
            raise DataError(
                f"{path}: row {lineno}: duplicate entry for subject '{subject}' and image '{left}'"
            )
        seen.add(key)
        for column, value in (
            ("left", entry.left),
            ("right", entry.right),
            ("mask_left", entry.mask_left),
            ("mask_right", entry.mask_right),
        ):
            if value is None:
                continue
            resolved = Path(value)
            if not resolved.is_absolute():
                resolved = root / resolved
            if not resolved.is_file():
                raise DataError(f"{path}: row {lineno}: {column} file missing: {resolved}")
        entries.append(entry)
    return DatasetManifest(root=root, entries=tuple(entries))


def save_manifest(manifest: DatasetManifest, path) -> None:
    """Write a manifest CSV; paths are emitted exactly as stored."""
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(MANIFEST_COLUMNS)
        for e in manifest.entries:
            writer.writerow(
                [
                    e.left,
                    e.right,
                    e.mask_left or _MISSING,
                    e.mask_right or _MISSING,
                    e.label.kind.value,
                    e.label.subject_id,
                    e.label.brand or _MISSING,
                    e.label.sensor or _MISSING,
                    e.label.pattern.value if e.label.pattern else _MISSING,
                ]
            )


# ---------------------------------------------------------------------------
# Split protocols


def split_subject_disjoint(
    manifest: DatasetManifest, fraction: float, seed: int
) -> tuple[DatasetManifest, DatasetManifest]:
    """Random subject-disjoint split.

    The train side receives ``round(fraction * n_subjects)`` subjects (Python
    round, ties half-to-even); entry order is preserved within each side and
    the partition is deterministic for a fixed seed.
    """
    if not 0.0 < fraction < 1.0:
        raise DataError("split fraction must lie strictly between 0 and 1")
    subjects = manifest.subjects()
    if len(subjects) < 2:
        raise DataError("subject-disjoint split needs at least 2 distinct subjects")
    order = np.random.default_rng(seed).permutation(len(subjects))
    n_train = round(fraction * len(subjects))
    train_subjects = {subjects[i] for i in order[:n_train]}
    train = [e for e in manifest.entries if e.label.subject_id in train_subjects]
    test = [e for e in manifest.entries if e.label.subject_id not in train_subjects]
    return manifest.with_entries(train), manifest.with_entries(test)


def split_by_pattern(
    manifest: DatasetManifest,
) -> tuple[DatasetManifest, DatasetManifest]:
    """Partition into a regular-pattern set and an irregular-pattern set.

    Attack entries follow their pattern tag. Bona fide entries follow their
    subject: a subject's genuine images go wherever that subject's attack
    images went; subjects without attack entries alternate deterministically
    (first-appearance order, starting with the regular side) so the two sets
    stay subject-disjoint.
    """
    subject_pattern: dict[str, LensPattern] = {}
    for e in manifest.entries:
        if e.label.kind is not PadClass.ATTACK:
            continue
        if e.label.pattern is None:
            raise DataError(
                f"attack entry '{e.left}' (subject '{e.label.subject_id}') lacks a pattern tag"
            )
        previous = subject_pattern.get(e.label.subject_id)
        if previous is not None and previous is not e.label.pattern:
            raise DataError(
                f"subject '{e.label.subject_id}' has attacks of both patterns; "
                "a subject-disjoint pattern split is impossible"
            )
        subject_pattern[e.label.subject_id] = e.label.pattern

    assignment: dict[str, LensPattern] = {}
    toggle = 0
    for subject in manifest.subjects():
        if subject in subject_pattern:
            assignment[subject] = subject_pattern[subject]
        else:
            assignment[subject] = (
                LensPattern.REGULAR if toggle % 2 == 0 else LensPattern.IRREGULAR
            )
            toggle += 1

    regular = [
        e for e in manifest.entries if assignment[e.label.subject_id] is LensPattern.REGULAR
    ]
    irregular = [
        e
        for e in manifest.entries
        if assignment[e.label.subject_id] is LensPattern.IRREGULAR
    ]
    return manifest.with_entries(regular), manifest.with_entries(irregular)


def kfold_subject_splits(
    manifest: DatasetManifest, folds: int, seed: int
) -> list[tuple[DatasetManifest, DatasetManifest]]:
    """Subject-disjoint k-fold partition: fold i tests on subject group i."""
    if folds < 2:
        raise DataError("k-fold splitting needs at least 2 folds")
    subjects = manifest.subjects()
    if folds > len(subjects):
        raise DataError(
            f"cannot make {folds} subject-disjoint folds from {len(subjects)} subjects"
        )
    order = np.random.default_rng(seed).permutation(len(subjects))
    groups = np.array_split(order, folds)
    splits = []
    for group in groups:
        test_subjects = {subjects[i] for i in group}
        train = [e for e in manifest.entries if e.label.subject_id not in test_subjects]
        test = [e for e in manifest.entries if e.label.subject_id in test_subjects]
        splits.append((manifest.with_entries(train), manifest.with_entries(test)))
    return splits
