"""Texture features: filter-bank correlation, sign binarization into per-pixel
codes, masked histograms, and multi-scale concatenation.

Responses are computed by cross-correlation of each kernel with the raw
normalized intensities under replicate (clamp-to-edge) border padding; no
per-patch mean removal is applied, since properly constructed texture filters
are zero-mean already and ingested banks are used as-is. Bit i of a code is 1
iff kernel i's response is strictly positive, so codes are invariant to any
positive rescaling of the image.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import ndimage

from .core import Mask, NirImage, format_float
from .errors import DataError

MAX_BANK_BITS = 12

DEFAULT_BANK_SIZES = (7, 9, 11)
DEFAULT_BANK_BITS = 8
DEFAULT_BANK_SEED = 101


@dataclass(frozen=True)
class FilterBank:
    """A named stack of square odd-sized filter kernels."""

    name: str
    kernels: np.ndarray

    def __post_init__(self) -> None:
        arr = np.array(self.kernels, dtype=np.float64)
        if arr.ndim != 3 or arr.shape[1] != arr.shape[2]:
            raise DataError("filter bank kernels must form an (n, s, s) array")
        n, s, _ = arr.shape
        if s % 2 == 0:
            raise DataError("filter size must be odd")
        if not 1 <= n <= MAX_BANK_BITS:
            raise DataError(f"filter count must lie in [1, {MAX_BANK_BITS}]")
        if not np.isfinite(arr).all():
            raise DataError("filter kernels must be finite")
        if not self.name:
            raise DataError("filter bank needs a nonempty name")
        arr.setflags(write=False)
        object.__setattr__(self, "kernels", arr)

    @property
    def count(self) -> int:
        return int(self.kernels.shape[0])

    @property
    def size(self) -> int:
        return int(self.kernels.shape[1])

    @property
    def histogram_length(self) -> int:
        return 1 << self.count


@dataclass(frozen=True)
class CodeImage:
    """Per-pixel integer codes in [0, 2^bits)."""

    codes: np.ndarray
    bits: int

    def __post_init__(self) -> None:
        arr = np.array(self.codes, dtype=np.uint16)
        if arr.ndim != 2:
            raise DataError("code grid must be 2-D")
        if not 1 <= self.bits <= MAX_BANK_BITS:
            raise DataError(f"code bit count must lie in [1, {MAX_BANK_BITS}]")
        if arr.size and int(arr.max()) >= (1 << self.bits):
            raise DataError("code values must be below 2^bits")
        arr.setflags(write=False)
        object.__setattr__(self, "codes", arr)

    @property
    def height(self) -> int:
        return int(self.codes.shape[0])

    @property
    def width(self) -> int:
        return int(self.codes.shape[1])


@dataclass(frozen=True)
class FeatureVector:
    """Concatenated per-bank histograms with a recorded block layout."""

    values: np.ndarray
    layout: tuple[tuple[str, int], ...]

    def __post_init__(self) -> None:
        arr = np.array(self.values, dtype=np.float64)
        layout = tuple((str(name), int(length)) for name, length in self.layout)
        if arr.ndim != 1:
            raise DataError("feature values must form a 1-D vector")
        if sum(length for _, length in layout) != arr.size:
            raise DataError("feature layout lengths must sum to the vector length")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)
        object.__setattr__(self, "layout", layout)

    def __len__(self) -> int:
        return int(self.values.size)


def load_filter_bank(path) -> FilterBank:
    """Parse a filter-bank file: line 1 's n', then n blocks of s lines of s values."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"filter bank not found: {path}")
    lines = [line for line in path.read_text(encoding="utf-8").splitlines() if line.strip()]
    if not lines:
        raise DataError(f"{path}: empty filter bank file")
    header = lines[0].split()
    if len(header) != 2:
        raise DataError(f"{path}: header must be 's n'")
    try:
        size, count = int(header[0]), int(header[1])
    except ValueError:
        raise DataError(f"{path}: non-numeric header fields") from None
    if size % 2 == 0:
        raise DataError(f"{path}: filter size must be odd, got {size}")
    body = lines[1:]
    if len(body) != count * size:
        raise DataError(
            f"{path}: header declares {count} kernels of {size} rows "
            f"({count * size} lines), found {len(body)}"
        )
    rows = []
    for lineno, line in enumerate(body, start=2):
        fields = line.split()
        if len(fields) != size:
            raise DataError(f"{path}: line {lineno}: expected {size} values, got {len(fields)}")
        try:
            rows.append([float(f) for f in fields])
        except ValueError:
            raise DataError(f"{path}: line {lineno}: non-numeric kernel value") from None
    kernels = np.array(rows, dtype=np.float64).reshape(count, size, size)
    return FilterBank(name=path.stem, kernels=kernels)


def save_filter_bank(bank: FilterBank, path) -> None:
    """Write a bank in the text format read by load_filter_bank (full precision)."""
    lines = [f"{bank.size} {bank.count}"]
    for kernel in bank.kernels:
        for row in kernel:
            lines.append(" ".join(format_float(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def default_filter_banks(
    sizes: Sequence[int] = DEFAULT_BANK_SIZES,
    bits: int = DEFAULT_BANK_BITS,
    seed: int = DEFAULT_BANK_SEED,
) -> list[FilterBank]:
    """Seeded pixel-difference banks: each kernel holds one +1 and one -1 at
    distinct random offsets, so its response is a local intensity difference.

    Difference kernels are exactly zero-sum, so constant regions yield an
    exactly zero response (bit 0) rather than floating-point noise, and larger
    kernel sizes probe longer-range structure. They are a file-compatible
    stand-in for learned texture filters; drop real banks in via
    load_filter_bank to replace them.
    """
    rng = np.random.default_rng(seed)
    banks = []
    for size in sizes:
        kernels = np.zeros((bits, size, size))
        used: set[tuple[int, int]] = set()
        for i in range(bits):
            while True:
                flat = rng.choice(size * size, size=2, replace=False)
                pair = (int(flat[0]), int(flat[1]))
                if pair not in used:
                    used.add(pair)
                    break
            kernels[i].flat[pair[0]] = 1.0
            kernels[i].flat[pair[1]] = -1.0
        banks.append(FilterBank(name=f"diff-{size}x{size}-{bits}bit", kernels=kernels))
    return banks


def bsif_code(image: NirImage, bank: FilterBank) -> CodeImage:
    """Binarize filter responses into per-pixel codes.

    Bit i is set iff the cross-correlation of kernel i with the image (replicate
    padding) is strictly positive at that pixel; zero responses leave the bit 0.
    """
    if image.height < bank.size or image.width < bank.size:
        raise DataError(
            f"image {image.width}x{image.height} is smaller than the "
            f"{bank.size}x{bank.size} kernels"
        )
    codes = np.zeros((image.height, image.width), dtype=np.uint16)
    for i in range(bank.count):
        response = ndimage.correlate(image.intensities, bank.kernels[i], mode="nearest")
        codes |= (response > 0.0).astype(np.uint16) << np.uint16(i)
    return CodeImage(codes=codes, bits=bank.count)


def bsif_histogram(codes: CodeImage, region: Mask) -> np.ndarray:
    """Normalized histogram of code values over the region's true pixels."""
    if region.bits.shape != codes.codes.shape:
        raise DataError(
            f"region dimensions {region.bits.shape} do not match codes {codes.codes.shape}"
        )
    selected = codes.codes[region.bits]
    if selected.size == 0:
        raise DataError("histogram region is empty")
    counts = np.bincount(selected, minlength=1 << codes.bits)
    return counts.astype(np.float64) / selected.size


def extract_features(
    image: NirImage, region: Mask, banks: Sequence[FilterBank]
) -> FeatureVector:
    """Concatenate per-bank histograms in bank order."""
    if not banks:
        raise DataError("feature extraction needs at least one filter bank")
    names = [b.name for b in banks]
    if len(set(names)) != len(names):
        raise DataError("filter bank names must be distinct")
    blocks = [bsif_histogram(bsif_code(image, bank), region) for bank in banks]
    layout = tuple((bank.name, bank.histogram_length) for bank in banks)
    return FeatureVector(values=np.concatenate(blocks), layout=layout)


def slice_bank(features: FeatureVector, bank_name: str) -> FeatureVector:
    """Extract one bank's histogram block as a standalone feature vector."""
    offset = 0
    for name, length in features.layout:
        if name == bank_name:
            return FeatureVector(
                values=features.values[offset : offset + length],
                layout=((name, length),),
            )
        offset += length
    raise DataError(f"feature vector has no block for bank '{bank_name}'")


def write_features_csv(
    rows: Sequence[tuple[str, str, FeatureVector]], path
) -> None:
    """Feature export: CSV 'sample_id,side,v1,...,vD' (one row per image)."""
    if not rows:
        raise DataError("no feature rows to export")
    dim = len(rows[0][2])
    header = "sample_id,side," + ",".join(f"v{i + 1}" for i in range(dim))
    lines = [header]
    for sample_id, side, features in rows:
        if len(features) != dim:
            raise DataError("feature rows must share one dimension")
        values = ",".join(format_float(v) for v in features.values)
        lines.append(f"{sample_id},{side},{values}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
