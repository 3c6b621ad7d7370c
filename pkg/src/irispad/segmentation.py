"""Occlusion masks without a learned segmenter.

Masks are either ingested from files (see core PGM conventions) or generated
geometrically: an annulus standing in for the iris ring, or a centered box
standing in for "the iris is roughly centered in the frame".
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Mask
from .errors import DataError


@dataclass(frozen=True)
class AnnulusSpec:
    """Annulus in continuous image coordinates (pixels).

    ``center_x``/``center_y`` locate the annulus center; pixel (x, y) has its
    center at (x + 0.5, y + 0.5).
    """

    center_x: float
    center_y: float
    pupil_radius: float
    iris_radius: float

    def __post_init__(self) -> None:
        if not 0.0 < self.pupil_radius < self.iris_radius:
            raise DataError("annulus needs 0 < pupil_radius < iris_radius")


def annulus_mask(spec: AnnulusSpec, width: int, height: int) -> Mask:
    """Pixels whose centers fall inside [pupil_radius, iris_radius] of the center.

    Both radius bounds are inclusive; the annulus is implicitly clipped to the
    image. The center must lie inside the image bounds.
    """
    if width < 1 or height < 1:
        raise DataError("mask dimensions must be positive")
    if not (0.0 <= spec.center_x <= width and 0.0 <= spec.center_y <= height):
        raise DataError("annulus center must lie inside the image bounds")
    px = np.arange(width, dtype=np.float64) + 0.5
    py = np.arange(height, dtype=np.float64) + 0.5
    dist = np.hypot(px[np.newaxis, :] - spec.center_x, py[:, np.newaxis] - spec.center_y)
    return Mask((dist >= spec.pupil_radius) & (dist <= spec.iris_radius))


def centered_box_mask(width: int, height: int, fraction: float) -> Mask:
    """Centered axis-aligned box of side round(fraction * dimension).

    Rounding is Python's round (ties half-to-even); odd leftover margins put
    the extra pixel on the right/bottom.
    """
    if width < 1 or height < 1:
        raise DataError("mask dimensions must be positive")
    if not 0.0 < fraction <= 1.0:
        raise DataError("box fraction must lie in (0, 1]")
    box_w = round(fraction * width)
    box_h = round(fraction * height)
    bits = np.zeros((height, width), dtype=bool)
    x0 = (width - box_w) // 2
    y0 = (height - box_h) // 2
    bits[y0 : y0 + box_h, x0 : x0 + box_w] = True
    return Mask(bits)


def intersect_masks(a: Mask, b: Mask) -> Mask:
    """Pixelwise AND of two masks of equal dimensions."""
    if a.bits.shape != b.bits.shape:
        raise DataError(
            f"mask dimensions differ: {a.bits.shape} vs {b.bits.shape}"
        )
    return Mask(a.bits & b.bits)
