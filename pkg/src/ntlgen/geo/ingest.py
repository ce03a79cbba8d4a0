"""Import of pre-exported georeferenced rasters into tile bundles.

Flat raster file: ``NTLRAST1`` magic, little-endian uint32 header length, a
UTF-8 JSON header ``{lat_min, lat_max, lon_min, lon_max, width, height}``,
then ``width * height`` little-endian float32 values, rows north to south.
"""
from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import Mapping

import numpy as np

from ..errors import DataError, FormatError
from .grid import BBox, Cell, GeoGrid
from .preprocess import CapStats, GeoRaster, cap_radiance, resample_to_tile, sm_transform
from .tiles import DEFAULT_TILE_SIZE, TileBundle

FLAT_MAGIC = b"NTLRAST1"
REFLECTANCE_BANDS = ("red", "green", "blue", "nir")
SOURCE_CHANNELS = REFLECTANCE_BANDS + ("night", "sm_counts")


def write_flat_raster(path: str | Path, raster: GeoRaster) -> None:
    h, w = raster.shape
    b = raster.bbox
    header = json.dumps(
        {"lat_min": b.lat_min, "lat_max": b.lat_max, "lon_min": b.lon_min, "lon_max": b.lon_max, "width": w, "height": h}
    ).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(FLAT_MAGIC + struct.pack("<I", len(header)) + header)
        fh.write(np.ascontiguousarray(raster.values, dtype="<f4").tobytes())


def read_flat_raster(path: str | Path) -> GeoRaster:
    raw = Path(path).read_bytes()
    if raw[:8] != FLAT_MAGIC or len(raw) < 12:
        raise FormatError(f"{path}: not a flat raster (bad magic)")
    (hlen,) = struct.unpack_from("<I", raw, 8)
    try:
        hdr = json.loads(raw[12 : 12 + hlen].decode("utf-8"))
        bbox = BBox(hdr["lat_min"], hdr["lat_max"], hdr["lon_min"], hdr["lon_max"])
        h, w = int(hdr["height"]), int(hdr["width"])
    except (UnicodeDecodeError, json.JSONDecodeError, KeyError) as exc:
        raise FormatError(f"{path}: bad header ({exc})") from None
    body = raw[12 + hlen :]
    if len(body) != h * w * 4:
        raise FormatError(f"{path}: {len(body)} data bytes, expected {h * w * 4}")
    return GeoRaster(np.frombuffer(body, dtype="<f4").reshape(h, w).astype(np.float32), bbox)


def build_bundle(
    cell: Cell,
    sources: Mapping[str, GeoRaster],
    size: int = DEFAULT_TILE_SIZE,
    cap_stats: CapStats | None = None,
) -> TileBundle:
    """Resample every available source onto the cell's tile grid and preprocess it.

    Reflectance and radiance use bilinear sampling; tweet counts are sampled
    nearest-neighbour, then log-transformed and smoothed. The sm
    standardization range is provisional until ``finalize_sm_range``.
    """
    unknown = set(sources) - set(SOURCE_CHANNELS)
    if unknown:
        raise DataError(f"unknown source channels {sorted(unknown)}")
    if "night" not in sources:
        raise DataError("a nighttime radiance source is required")
    bundle = TileBundle(cell.cell_id, cell.bbox)
    shape = (size, size)
    for band in REFLECTANCE_BANDS:
        if band in sources:
            bundle.add(band, np.clip(resample_to_tile(sources[band], cell.bbox, shape, "bilinear"), 0.0, 1.0))
    night = resample_to_tile(sources["night"], cell.bbox, shape, "bilinear")
    bundle.add("night", cap_radiance(night, cap_stats))
    if "sm_counts" in sources:
        counts = resample_to_tile(sources["sm_counts"], cell.bbox, shape, "nearest")
        bundle.add("sm", sm_transform(counts))
    return bundle


def finalize_sm_range(bundles: list[TileBundle]) -> float:
    """Set every bundle's sm standardization range to [0, dataset-wide max]."""
    tops = [float(b["sm"].max()) for b in bundles if "sm" in b.channels]
    top = max(tops, default=0.0)
    top = top if top > 0 else 1.0
    for b in bundles:
        if "sm" in b.channels:
            b.channels["sm"].standardize_min = 0.0
            b.channels["sm"].standardize_max = top
    return top


def ingest(grid: GeoGrid, sources: Mapping[str, GeoRaster], size: int = DEFAULT_TILE_SIZE) -> list[TileBundle]:
    """Bundles for every grid cell covered by all sources."""
    cells = [c for c in grid.cells() if all(src.bbox.intersects(c.bbox) for src in sources.values())]
    if not cells:
        raise DataError("no grid cell overlaps every source raster")
    stats = CapStats()
    bundles = [build_bundle(c, sources, size, stats) for c in cells]
    finalize_sm_range(bundles)
    return bundles
