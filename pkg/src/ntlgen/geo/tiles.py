"""Tile bundles: co-registered channel rasters for one grid cell, and their disk format.

A tile directory holds ``manifest.json`` plus one ``<channel>.f32`` file per
channel: little-endian float32, row-major, rows north to south, columns west
to east, exactly ``width * height * 4`` bytes.
"""
from __future__ import annotations

import json
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import DataError, FormatError
from ..metrics import NIGHT_RANGE, REFLECTANCE_RANGE, destandardize, standardize
from ..model.specs import ScenarioConfig
from .grid import BBox

RAW_DTYPE = np.dtype("<f4")
DEFAULT_TILE_SIZE = 256

CHANNEL_UNITS = {
    "red": "surface_reflectance",
    "green": "surface_reflectance",
    "blue": "surface_reflectance",
    "nir": "surface_reflectance",
    "sm": "log_count_smoothed",
    "night": "nW cm-2 sr-1",
}


def default_range(name: str, values: np.ndarray) -> tuple[float, float]:
    if name == "night":
        return NIGHT_RANGE
    if name == "sm":
        top = float(np.max(values)) if values.size else 0.0
        return (0.0, top if top > 0 else 1.0)
    return REFLECTANCE_RANGE


@dataclass
class Channel:
    name: str
    data: np.ndarray
    units: str = ""
    standardize_min: float = 0.0
    standardize_max: float = 1.0

    @classmethod
    def create(cls, name: str, data, vrange: tuple[float, float] | None = None) -> "Channel":
        arr = np.ascontiguousarray(data, dtype=np.float32)
        lo, hi = vrange if vrange is not None else default_range(name, arr)
        return cls(name, arr, CHANNEL_UNITS.get(name, ""), float(lo), float(hi))


@dataclass
class TileBundle:
    cell_id: str
    bbox: BBox
    channels: dict[str, Channel] = field(default_factory=dict)

    @property
    def shape(self) -> tuple[int, int]:
        return next(iter(self.channels.values())).data.shape

    def __getitem__(self, name: str) -> np.ndarray:
        return self.channels[name].data

    def add(self, name: str, data, vrange: tuple[float, float] | None = None) -> None:
        self.channels[name] = Channel.create(name, data, vrange)

    def validate(self) -> None:
        shapes = {c.data.shape for c in self.channels.values()}
        if len(shapes) > 1:
            raise DataError(f"tile {self.cell_id}: channel shapes differ {sorted(shapes)}")
        for c in self.channels.values():
            if c.data.ndim != 2:
                raise DataError(f"tile {self.cell_id}: channel {c.name} is not 2-d")
            if not np.isfinite(c.data).all():
                raise DataError(f"tile {self.cell_id}: channel {c.name} has non-finite values")
        if "night" in self.channels:
            night = self.channels["night"].data
            if night.min() < NIGHT_RANGE[0] or night.max() > NIGHT_RANGE[1]:
                raise DataError(f"tile {self.cell_id}: night radiance outside [0, 300]")
        if "sm" in self.channels and self.channels["sm"].data.min() < 0:
            raise DataError(f"tile {self.cell_id}: negative social-media values")


def _crc(raw: bytes) -> int:
    return zlib.crc32(raw) & 0xFFFFFFFF


def write_tile(bundle: TileBundle, tile_dir: str | Path) -> Path:
    bundle.validate()
    d = Path(tile_dir)
    d.mkdir(parents=True, exist_ok=True)
    h, w = bundle.shape
    entries = []
    for c in bundle.channels.values():
        raw = np.ascontiguousarray(c.data, dtype=RAW_DTYPE).tobytes()
        (d / f"{c.name}.f32").write_bytes(raw)
        entries.append(
            {
                "name": c.name,
                "units": c.units,
                "standardize_min": c.standardize_min,
                "standardize_max": c.standardize_max,
                "crc32": _crc(raw),
            }
        )
    manifest = {
        "cell_id": bundle.cell_id,
        "lat_min": bundle.bbox.lat_min,
        "lat_max": bundle.bbox.lat_max,
        "lon_min": bundle.bbox.lon_min,
        "lon_max": bundle.bbox.lon_max,
        "width": w,
        "height": h,
        "channels": entries,
    }
    (d / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    return d


def read_manifest(tile_dir: str | Path) -> dict:
    path = Path(tile_dir) / "manifest.json"
    try:
        m = json.loads(path.read_text())
    except FileNotFoundError:
        raise FormatError(f"{path} not found") from None
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON ({exc})") from None
    required = ("cell_id", "lat_min", "lat_max", "lon_min", "lon_max", "width", "height", "channels")
    missing = [k for k in required if k not in m]
    if missing:
        raise FormatError(f"{path}: missing fields {missing}")
    return m


def read_tile(tile_dir: str | Path, channels: list[str] | None = None) -> TileBundle:
    """Load a tile, verifying file set, lengths and checksums.

    ``channels`` restricts which channel files are decoded; the manifest is
    still checked against every file present.
    """
    d = Path(tile_dir)
    m = read_manifest(d)
    names = [c["name"] for c in m["channels"]]
    present = sorted(p.stem for p in d.glob("*.f32"))
    if sorted(names) != present:
        raise FormatError(f"{d}: manifest lists {sorted(names)} but files present are {present}")
    h, w = int(m["height"]), int(m["width"])
    bundle = TileBundle(m["cell_id"], BBox(m["lat_min"], m["lat_max"], m["lon_min"], m["lon_max"]))
    for entry in m["channels"]:
        name = entry["name"]
        if channels is not None and name not in channels:
            continue
        raw = (d / f"{name}.f32").read_bytes()
        if len(raw) != h * w * RAW_DTYPE.itemsize:
            raise FormatError(f"{d / (name + '.f32')}: {len(raw)} bytes, expected {h * w * RAW_DTYPE.itemsize}")
        if "crc32" in entry and _crc(raw) != entry["crc32"]:
            raise FormatError(f"{d / (name + '.f32')}: checksum mismatch")
        data = np.frombuffer(raw, dtype=RAW_DTYPE).reshape(h, w).astype(np.float32)
        bundle.channels[name] = Channel(
            name, data, entry.get("units", ""), float(entry["standardize_min"]), float(entry["standardize_max"])
        )
    return bundle


@dataclass
class StackedTile:
    condition: np.ndarray  # C x H x W in [-1, 1]
    target: np.ndarray | None  # 1 x H x W in [-1, 1]
    ranges: dict[str, tuple[float, float]]

    def invert(self, channels: tuple[str, ...]) -> dict[str, np.ndarray]:
        """Undo the standardization, channel by channel."""
        out = {name: destandardize(self.condition[i], *self.ranges[name]) for i, name in enumerate(channels)}
        if self.target is not None:
            out["night"] = destandardize(self.target[0], *self.ranges["night"])
        return out


def stack_scenario(bundle: TileBundle, scenario: ScenarioConfig, require_target: bool = True) -> StackedTile:
    """Standardize and stack the scenario's condition channels plus the night target."""
    needed = list(scenario.channels) + (["night"] if require_target else [])
    missing = [c for c in needed if c not in bundle.channels]
    if missing:
        raise DataError(f"tile {bundle.cell_id} lacks channels {missing} for scenario {scenario.name}")
    ranges, layers = {}, []
    for name in scenario.channels:
        c = bundle.channels[name]
        ranges[name] = (c.standardize_min, c.standardize_max)
        layers.append(standardize(c.data, c.standardize_min, c.standardize_max))
    target = None
    if "night" in bundle.channels:
        c = bundle.channels["night"]
        ranges["night"] = (c.standardize_min, c.standardize_max)
        target = standardize(c.data, c.standardize_min, c.standardize_max)[None]
    return StackedTile(np.stack(layers), target, ranges)
