"""Per-raster preprocessing: radiance capping, social-media transform, resampling."""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from ..errors import ConfigError, DataError
from .grid import BBox, sort_cell_ids

RADIANCE_CAP = 300.0
SUITABILITY_THRESHOLD = 8000.0


class NegativeRadianceWarning(UserWarning):
    pass


@dataclass
class CapStats:
    """Counts negative radiance values clamped to zero."""

    negatives: int = 0


def cap_radiance(raster, stats: CapStats | None = None, cap: float = RADIANCE_CAP) -> np.ndarray:
    """Clamp nighttime radiance into [0, cap]; negatives are counted and warned about."""
    r = np.asarray(raster)
    if not np.issubdtype(r.dtype, np.floating):
        r = r.astype(np.float64)
    neg = int(np.count_nonzero(r < 0))
    if neg:
        if stats is not None:
            stats.negatives += neg
        warnings.warn(f"{neg} negative radiance values clamped to 0", NegativeRadianceWarning, stacklevel=2)
    return np.minimum(np.maximum(r, 0), cap).astype(r.dtype, copy=False)


def radiance_sums(night_by_cell: Mapping[str, np.ndarray]) -> dict[str, float]:
    return {cid: float(np.sum(cap_radiance(r), dtype=np.float64)) for cid, r in night_by_cell.items()}


def select_suitable(night_by_cell: Mapping[str, np.ndarray], threshold: float = SUITABILITY_THRESHOLD) -> list[str]:
    """Cells whose total capped radiance is at least ``threshold``, in grid order."""
    sums = radiance_sums(night_by_cell)
    return sort_cell_ids(cid for cid, s in sums.items() if s >= threshold)


def mean_filter3(values: np.ndarray) -> np.ndarray:
    """3 x 3 uniform mean with edge-inclusive reflection (a b | b a)."""
    v = np.asarray(values, dtype=np.float64)
    p = np.pad(v, 1, mode="symmetric")
    h, w = v.shape
    acc = np.zeros_like(v)
    for di in range(3):
        for dj in range(3):
            acc += p[di : di + h, dj : dj + w]
    return acc / 9.0


def sm_transform(counts) -> np.ndarray:
    """ln(1 + count) followed by a 3 x 3 low-pass filter."""
    c = np.asarray(counts, dtype=np.float64)
    if c.ndim != 2:
        raise DataError(f"count raster must be 2-d, got shape {c.shape}")
    if np.any(c < 0) or not np.isfinite(c).all():
        raise DataError("social-media counts must be finite and non-negative")
    return mean_filter3(np.log1p(c))


@dataclass
class GeoRaster:
    """North-up raster whose pixels evenly tile ``bbox``."""

    values: np.ndarray
    bbox: BBox

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


def _source_coords(src: GeoRaster, target: BBox, out_h: int, out_w: int) -> tuple[np.ndarray, np.ndarray]:
    """Fractional source (row, col) of each target pixel centre."""
    sh, sw = src.shape
    b = src.bbox
    lat = target.lat_max - (np.arange(out_h) + 0.5) * (target.lat_max - target.lat_min) / out_h
    lon = target.lon_min + (np.arange(out_w) + 0.5) * (target.lon_max - target.lon_min) / out_w
    rows = (b.lat_max - lat) / ((b.lat_max - b.lat_min) / sh) - 0.5
    cols = (lon - b.lon_min) / ((b.lon_max - b.lon_min) / sw) - 0.5
    return rows, cols


def resample_to_tile(src: GeoRaster, target: BBox, out_shape: tuple[int, int], method: str = "bilinear") -> np.ndarray:
    """Sample ``src`` at the pixel centres of an ``out_shape`` grid over ``target``.

    Samples past the source edge take the nearest edge value.
    """
    if not src.bbox.intersects(target):
        raise DataError(f"source raster {src.bbox} does not overlap cell {target}")
    out_h, out_w = out_shape
    rows, cols = _source_coords(src, target, out_h, out_w)
    sh, sw = src.shape
    v = np.asarray(src.values, dtype=np.float64)
    if method == "nearest":
        r = np.clip(np.floor(rows + 0.5).astype(int), 0, sh - 1)
        c = np.clip(np.floor(cols + 0.5).astype(int), 0, sw - 1)
        return v[np.ix_(r, c)]
    if method != "bilinear":
        raise ConfigError(f"unknown resampling method {method!r}")
    rows = np.clip(rows, 0, sh - 1)
    cols = np.clip(cols, 0, sw - 1)
    r0 = np.minimum(np.floor(rows).astype(int), max(sh - 2, 0))
    c0 = np.minimum(np.floor(cols).astype(int), max(sw - 2, 0))
    r1, c1 = np.minimum(r0 + 1, sh - 1), np.minimum(c0 + 1, sw - 1)
    fr = (rows - r0)[:, None]
    fc = (cols - c0)[None, :]
    top = v[np.ix_(r0, c0)] * (1 - fc) + v[np.ix_(r0, c1)] * fc
    bottom = v[np.ix_(r1, c0)] * (1 - fc) + v[np.ix_(r1, c1)] * fc
    return top * (1 - fr) + bottom * fr
