"""Desk-scale verification oracle: Lambertian renders of known normal fields.

Three scene families bracket the behaviors the detectors must separate:

* ``FLAT`` - a perfect plane with uniform albedo: the idealized genuine iris.
  Under symmetric lights its two renders are identical, so the shape score is
  exactly zero.
* ``BUMPY`` - normals from a seeded band-limited height field (summed random
  cosines) rescaled so the mean gradient magnitude equals ``amplitude``: a
  strongly textured lens whose relief casts different shadows per light.
* ``OPAQUE_PRINT`` - a flat base carrying bright near-flat printed dots. The
  dots dominate the image as 2-D texture, but because albedo scales both
  renders equally it cancels out of the normal solve, so the recovered surface
  stays nearly flat - the failure mode that motivates cascading with the
  texture path. Dot relief is ``print_relief`` of the bumpy amplitude.

Scenes also carry an annulus mask and, for relief scenes, the generating
height field so tests can check slopes by finite differences.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path
from typing import Optional

import numpy as np

from .core import (
    DatasetManifest,
    Label,
    LensPattern,
    ManifestEntry,
    Mask,
    NirImage,
    PadClass,
    load_manifest,
    save_manifest,
    write_pgm_image,
    write_pgm_mask,
)
from .errors import DataError
from .photometric import NormalMap, default_lights, write_normal_map
from .segmentation import AnnulusSpec, annulus_mask

# Smallest bumpy amplitude for which the default (noiseless, 8-bit, 64x64)
# corpus guarantees every bumpy shape score above every flat shape score.
# Flat renders are constant images, so their scores are exactly zero; the
# floor keeps bumpy scores well clear of 8-bit quantization effects.
SEPARATION_AMPLITUDE_FLOOR = 0.05

_SENSOR_TAG = "synthcam"
_BUMPY_BRAND = "SynthRelief"
_OPAQUE_BRAND = "SynthOpaque"


class SceneKind(Enum):
    FLAT = "flat"
    BUMPY = "bumpy"
    OPAQUE_PRINT = "opaque"


@dataclass(frozen=True)
class SceneParams:
    """Generator knobs shared by all scene kinds.

    amplitude: target mean gradient magnitude of the bumpy height field.
    components: number of random cosine waves summed into the height field.
    max_frequency: upper bound on wave frequency, in cycles across the image.
    ridges_only: restrict height variation to x, keeping every normal in the
        x-z plane (exact ground truth for two lights in that plane).
    coverage: fraction of the image area covered by printed dots.
    dot_radius_fraction: dot radius relative to min(width, height).
    print_relief: dot slope amplitude as a fraction of ``amplitude``.
    """

    amplitude: float = 0.3
    components: int = 12
    max_frequency: float = 5.0
    ridges_only: bool = False
    coverage: float = 0.25
    dot_radius_fraction: float = 0.07
    print_relief: float = 0.1

    def __post_init__(self) -> None:
        if self.amplitude < 0.0:
            raise DataError("amplitude must be nonnegative")
        if self.components < 1:
            raise DataError("height field needs at least one cosine component")
        if self.max_frequency < 1.0:
            raise DataError("max_frequency must be at least 1 cycle")
        if not 0.0 <= self.coverage < 1.0:
            raise DataError("print coverage must lie in [0, 1)")
        if not 0.0 < self.dot_radius_fraction < 0.5:
            raise DataError("dot radius fraction must lie in (0, 0.5)")
        if self.print_relief < 0.0:
            raise DataError("print relief must be nonnegative")


@dataclass(frozen=True)
class Scene:
    """Ground-truth surface: unit normals, albedo, mask, and provenance."""

    kind: SceneKind
    normals: np.ndarray
    albedo: np.ndarray
    mask: Mask
    params: SceneParams
    height_field: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        normals = np.array(self.normals, dtype=np.float64)
        albedo = np.array(self.albedo, dtype=np.float64)
        if normals.ndim != 3 or normals.shape[2] != 3:
            raise DataError("scene normals must have shape (height, width, 3)")
        if albedo.shape != normals.shape[:2]:
            raise DataError("scene albedo must match the normal grid dimensions")
        lengths = np.linalg.norm(normals.reshape(-1, 3), axis=1)
        if np.any(np.abs(lengths - 1.0) > 1e-9):
            raise DataError("scene normals must be unit length")
        if np.any(normals[:, :, 2] <= 0.0):
            raise DataError("scene normals must face the camera (z > 0)")
        if float(albedo.min()) < 0.0 or float(albedo.max()) > 1.0:
            raise DataError("scene albedo must lie in [0, 1]")
        normals.setflags(write=False)
        albedo.setflags(write=False)
        object.__setattr__(self, "normals", normals)
        object.__setattr__(self, "albedo", albedo)
        if self.height_field is not None:
            field = np.array(self.height_field, dtype=np.float64)
            field.setflags(write=False)
            object.__setattr__(self, "height_field", field)

    @property
    def height(self) -> int:
        return int(self.normals.shape[0])

    @property
    def width(self) -> int:
        return int(self.normals.shape[1])


def _scene_mask(width: int, height: int) -> Mask:
    side = min(width, height)
    spec = AnnulusSpec(
        center_x=width / 2.0,
        center_y=height / 2.0,
        pupil_radius=0.15 * side,
        iris_radius=0.45 * side,
    )
    return annulus_mask(spec, width, height)


def _normals_from_gradient(gx: np.ndarray, gy: np.ndarray) -> np.ndarray:
    stack = np.stack([-gx, -gy, np.ones_like(gx)], axis=-1)
    return stack / np.linalg.norm(stack, axis=-1, keepdims=True)


def _cosine_height_field(
    rng: np.random.Generator, width: int, height: int, params: SceneParams
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Summed random cosines rescaled to the target mean slope; returns
    (height field, analytic d/dx, analytic d/dy)."""
    xs = np.arange(width, dtype=np.float64) + 0.5
    ys = np.arange(height, dtype=np.float64) + 0.5
    xx = xs[np.newaxis, :]
    yy = ys[:, np.newaxis]
    scale = float(min(width, height))

    field = np.zeros((height, width))
    gx = np.zeros((height, width))
    gy = np.zeros((height, width))
    for _ in range(params.components):
        theta = rng.uniform(0.0, 2.0 * math.pi)
        freq = rng.uniform(1.0, params.max_frequency)
        phase = rng.uniform(0.0, 2.0 * math.pi)
        amp = rng.uniform(0.5, 1.0)
        cx, cy = (1.0, 0.0) if params.ridges_only else (math.cos(theta), math.sin(theta))
        wave_rate = 2.0 * math.pi * freq / scale
        arg = wave_rate * (cx * xx + cy * yy) + phase
        field += amp * np.cos(arg)
        gx += -amp * wave_rate * cx * np.sin(arg)
        gy += -amp * wave_rate * cy * np.sin(arg)

    if params.amplitude == 0.0:
        zero = np.zeros((height, width))
        return zero, zero.copy(), zero.copy()
    mean_slope = float(np.hypot(gx, gy).mean())
    rescale = params.amplitude / mean_slope
    return field * rescale, gx * rescale, gy * rescale


def _printed_dots(
    rng: np.random.Generator, width: int, height: int, params: SceneParams
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Seeded circular dots: returns (painted mask, bump field, d/dx, d/dy).

    Each dot is a smooth cosine-squared dome, zero-sloped at center and rim;
    dots accumulate until the painted fraction reaches ``coverage``. The dome
    field is rescaled afterwards so the mean slope over painted pixels equals
    amplitude * print_relief.
    """
    xs = np.arange(width, dtype=np.float64) + 0.5
    ys = np.arange(height, dtype=np.float64) + 0.5
    xx = xs[np.newaxis, :]
    yy = ys[:, np.newaxis]
    radius = max(2.0, params.dot_radius_fraction * min(width, height))

    painted = np.zeros((height, width), dtype=bool)
    bump = np.zeros((height, width))
    gx = np.zeros((height, width))
    gy = np.zeros((height, width))
    target = params.coverage * width * height
    attempts = 0
    while painted.sum() < target and attempts < 10_000:
        attempts += 1
        cx = rng.uniform(0.0, width)
        cy = rng.uniform(0.0, height)
        dx = xx - cx
        dy = yy - cy
        dist = np.hypot(dx, dy)
        inside = dist < radius
        if not inside.any():
            continue
        painted |= inside
        dome = np.where(inside, np.cos(np.pi * dist / (2.0 * radius)) ** 2, 0.0)
        bump += dome
        slope = np.where(
            inside, -(np.pi / (2.0 * radius)) * np.sin(np.pi * dist / radius), 0.0
        )
        with np.errstate(invalid="ignore", divide="ignore"):
            ux = np.where(dist > 0.0, dx / dist, 0.0)
            uy = np.where(dist > 0.0, dy / dist, 0.0)
        gx += slope * ux
        gy += slope * uy

    target_slope = params.amplitude * params.print_relief
    if painted.any() and target_slope > 0.0:
        mean_slope = float(np.hypot(gx[painted], gy[painted]).mean())
        if mean_slope > 0.0:
            rescale = target_slope / mean_slope
            bump *= rescale
            gx *= rescale
            gy *= rescale
    else:
        bump[:] = 0.0
        gx[:] = 0.0
        gy[:] = 0.0
    return painted, bump, gx, gy


def make_scene(
    kind: SceneKind,
    width: int,
    height: int,
    params: Optional[SceneParams] = None,
    seed: int = 0,
) -> Scene:
    """Deterministically generate one ground-truth scene."""
    if width < 1 or height < 1:
        raise DataError("scene dimensions must be positive")
    params = params if params is not None else SceneParams()
    rng = np.random.default_rng(seed)
    mask = _scene_mask(width, height)

    if kind is SceneKind.FLAT or (kind is SceneKind.BUMPY and params.amplitude == 0.0):
        albedo_value = rng.uniform(0.55, 0.85)
        normals = np.zeros((height, width, 3))
        normals[:, :, 2] = 1.0
        field = np.zeros((height, width)) if kind is SceneKind.BUMPY else None
        return Scene(
            kind=kind,
            normals=normals,
            albedo=np.full((height, width), albedo_value),
            mask=mask,
            params=params,
            height_field=field,
        )

    if kind is SceneKind.BUMPY:
        albedo_value = rng.uniform(0.55, 0.85)
        field, gx, gy = _cosine_height_field(rng, width, height, params)
        return Scene(
            kind=kind,
            normals=_normals_from_gradient(gx, gy),
            albedo=np.full((height, width), albedo_value),
            mask=mask,
            params=params,
            height_field=field,
        )

    if kind is SceneKind.OPAQUE_PRINT:
        base_albedo = rng.uniform(0.45, 0.6)
        painted, bump, gx, gy = _printed_dots(rng, width, height, params)
        albedo = np.full((height, width), base_albedo)
        albedo[painted] = 0.95
        return Scene(
            kind=kind,
            normals=_normals_from_gradient(gx, gy),
            albedo=albedo,
            mask=mask,
            params=params,
            height_field=bump,
        )

    raise DataError(f"unknown scene kind: {kind!r}")


def render(scene: Scene, light, noise_sd: float = 0.0, seed: int = 0) -> NirImage:
    """Clamped Lambertian render: albedo * max(0, light . normal) plus optional
    Gaussian pixel noise, clipped to [0, 1]. Deterministic per seed."""
    direction = np.asarray(light, dtype=np.float64)
    if direction.shape != (3,) or abs(float(np.linalg.norm(direction)) - 1.0) > 1e-9:
        raise DataError("render light must be a unit 3-vector")
    if noise_sd < 0.0:
        raise DataError("noise standard deviation must be nonnegative")
    shading = scene.albedo * np.clip(scene.normals @ direction, 0.0, None)
    if noise_sd > 0.0:
        shading = shading + np.random.default_rng(seed).normal(0.0, noise_sd, shading.shape)
    return NirImage(np.clip(shading, 0.0, 1.0))


@dataclass(frozen=True)
class CorpusConfig:
    """Counts, sizes, and seeds for a rendered corpus.

    Flat scenes are labeled bona fide; bumpy scenes are attacks tagged with the
    regular pattern, opaque-print scenes with the irregular pattern. Attack
    scene i and flat scene i share subject ``s{i:03d}``, so subject-disjoint
    and pattern-disjoint protocols keep genuine/attack images of one eye
    together.
    """

    n_flat: int = 8
    n_bumpy: int = 8
    n_opaque: int = 0
    width: int = 64
    height: int = 64
    amplitude: float = 0.3
    coverage: float = 0.25
    noise_sd: float = 0.0
    light_angle_deg: float = 30.0
    seed: int = 1

    def __post_init__(self) -> None:
        if min(self.n_flat, self.n_bumpy, self.n_opaque) < 0:
            raise DataError("scene counts must be nonnegative")
        if self.width < 1 or self.height < 1:
            raise DataError("corpus image dimensions must be positive")


def make_corpus(config: CorpusConfig, out_dir) -> DatasetManifest:
    """Render a labeled corpus to disk and return its validated manifest.

    Per scene: left/right PGM renders under the +/-angle lights, two identical
    mask PGMs, and the ground-truth normal map in the text export format. The
    manifest (manifest.csv, relative paths) carries subject/brand/sensor/
    pattern tags enabling every split protocol. Byte-identical across runs for
    a fixed config. Flat/bumpy score separation is guaranteed for amplitudes
    at or above SEPARATION_AMPLITUDE_FLOOR on the default noiseless corpus.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    lights = default_lights(config.light_angle_deg)
    params = SceneParams(amplitude=config.amplitude, coverage=config.coverage)

    plan: list[tuple[SceneKind, Optional[LensPattern], Optional[str], str]] = []
    attack_kinds = [SceneKind.BUMPY] * config.n_bumpy + [SceneKind.OPAQUE_PRINT] * config.n_opaque
    for i, kind in enumerate(attack_kinds):
        pattern = LensPattern.REGULAR if kind is SceneKind.BUMPY else LensPattern.IRREGULAR
        brand = _BUMPY_BRAND if kind is SceneKind.BUMPY else _OPAQUE_BRAND
        plan.append((kind, pattern, brand, f"s{i:03d}"))
    for j in range(config.n_flat):
        plan.append((SceneKind.FLAT, None, None, f"s{j:03d}"))

    entries: list[ManifestEntry] = []
    for index, (kind, pattern, brand, subject) in enumerate(plan):
        scene_seed = config.seed * 100_003 + index
        scene = make_scene(kind, config.width, config.height, params, seed=scene_seed)
        image_left = render(scene, lights.directions[0], config.noise_sd, seed=scene_seed + 1)
        image_right = render(scene, lights.directions[1], config.noise_sd, seed=scene_seed + 2)

        stem = f"{subject}_{kind.value}"
        write_pgm_image(image_left, out_dir / f"{stem}_L.pgm")
        write_pgm_image(image_right, out_dir / f"{stem}_R.pgm")
        write_pgm_mask(scene.mask, out_dir / f"{stem}_mL.pgm")
        write_pgm_mask(scene.mask, out_dir / f"{stem}_mR.pgm")
        truth = NormalMap(normals=scene.normals, valid=scene.mask.bits)
        write_normal_map(truth, out_dir / f"{stem}_normals.txt")

        entries.append(
            ManifestEntry(
                left=f"{stem}_L.pgm",
                right=f"{stem}_R.pgm",
                mask_left=f"{stem}_mL.pgm",
                mask_right=f"{stem}_mR.pgm",
                label=Label(
                    kind=PadClass.ATTACK if pattern else PadClass.BONA_FIDE,
                    subject_id=subject,
                    brand=brand,
                    sensor=_SENSOR_TAG,
                    pattern=pattern,
                ),
            )
        )

    manifest_path = out_dir / "manifest.csv"
    save_manifest(DatasetManifest(root=out_dir, entries=tuple(entries)), manifest_path)
    return load_manifest(manifest_path)


def scene_params_for(config: CorpusConfig) -> SceneParams:
    """The SceneParams make_corpus uses, exposed for oracle tests."""
    return SceneParams(amplitude=config.amplitude, coverage=config.coverage)


def planar_scene_params(amplitude: float = 0.3) -> SceneParams:
    """Bumpy params whose normals stay in the lights' (x-z) plane."""
    return replace(SceneParams(amplitude=amplitude), ridges_only=True)
