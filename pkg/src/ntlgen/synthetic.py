"""Procedural paired scenes: reflectance, tweet density and nighttime radiance.

Each tile is built from three seeded Gaussian-bump fields:

* urban density ``D`` - lights scale with it; built-up surfaces are bright in
  RGB and dark in NIR;
* bare-soil decoys ``S`` - same RGB signature as built-up land but moderate
  NIR, so RGB alone cannot tell them from towns;
* activity hotspots ``H`` - one per town with a random amplitude, visible only
  through the tweet counts.

Night radiance is ``gain * ((1 - share) * D + share * H)`` plus Gaussian
noise, capped to [0, 300], where ``share`` is ``sm_signal_share``.
"""
from __future__ import annotations

import json
import math
import shutil
import zlib
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .geo.dataset import split_dataset, write_bundle, write_grid, write_split, write_suitable, Suitability
from .geo.grid import CELL_SPAN, CONUS_BBOX, BBox, GeoGrid, partition_grid
from .geo.ingest import finalize_sm_range
from .geo.preprocess import RADIANCE_CAP, radiance_sums, sm_transform
from .geo.tiles import TileBundle

URBAN_RGB = (0.22, 0.21, 0.20)
VEGETATION_RGB = (0.04, 0.09, 0.035)
SOIL_NIR = 0.30
MASK_LEVEL = 0.3


@dataclass(frozen=True)
class SceneParams:
    size: int = 64
    seed: int = 0
    n_blobs: int = 3
    blob_radius: tuple[float, float] = (0.06, 0.14)  # fraction of tile size
    n_decoys: int = 2
    vegetation_nir: float = 0.45
    urban_nir: float = 0.10
    night_gain: float = 250.0
    noise: float = 0.02  # fraction of night_gain
    texture: float = 0.01
    sm_signal_share: float = 0.3
    sm_count_scale: float = 100.0

    def __post_init__(self):
        if self.size < 1:
            raise ConfigError("size must be positive")
        lo, hi = self.blob_radius
        numbers = (self.n_blobs, self.n_decoys, lo, hi, self.vegetation_nir, self.urban_nir,
                   self.night_gain, self.noise, self.texture, self.sm_count_scale)
        if min(numbers) < 0 or hi < lo:
            raise ConfigError("scene parameters must be non-negative with a valid radius range")
        if not 0.0 <= self.sm_signal_share <= 1.0:
            raise ConfigError("sm_signal_share must lie in [0, 1]")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["blob_radius"] = list(self.blob_radius)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SceneParams":
        d = dict(d)
        d["blob_radius"] = tuple(d["blob_radius"])
        return cls(**d)


@dataclass
class SceneFields:
    """Latent fields behind one generated tile, kept for diagnostics."""

    urban: np.ndarray
    soil: np.ndarray
    hotspot: np.ndarray
    urban_mask: np.ndarray
    vegetation_mask: np.ndarray


def _rng(seed: int, cell_id: str) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), zlib.crc32(cell_id.encode())]))


def _bumps(rng: np.random.Generator, n: int, size: int, radius: tuple[float, float], amp: tuple[float, float]):
    """Sum of ``n`` Gaussian bumps; also returns (centre row, centre col, radius) per bump."""
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    field = np.zeros((size, size))
    placed = []
    for _ in range(n):
        cy, cx = rng.uniform(0, size, 2)
        r = rng.uniform(*radius) * size
        a = rng.uniform(*amp)
        field += a * np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2 * r * r))
        placed.append((cy, cx, r))
    return field, placed


def _hotspots(rng: np.random.Generator, towns, size: int) -> np.ndarray:
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    field = np.zeros((size, size))
    for cy, cx, r in towns:
        hy, hx = cy + rng.normal(0, 0.3 * r), cx + rng.normal(0, 0.3 * r)
        hr = rng.uniform(0.4, 0.8) * r
        amp = rng.uniform(0.0, 1.0)
        field += amp * np.exp(-((yy - hy) ** 2 + (xx - hx) ** 2) / (2 * hr * hr))
    return np.clip(field, 0.0, 1.0)


def generate_fields(params: SceneParams, cell_id: str) -> tuple[dict[str, np.ndarray], SceneFields]:
    """Raw channel rasters (reflectance, tweet counts, radiance) plus latent fields."""
    rng = _rng(params.seed, cell_id)
    n = params.size
    urban, towns = _bumps(rng, params.n_blobs, n, params.blob_radius, (0.7, 1.0))
    urban = np.clip(urban, 0.0, 1.0)
    soil, _ = _bumps(rng, params.n_decoys, n, params.blob_radius, (0.7, 1.0))
    soil = np.clip(soil, 0.0, 1.0) * (1.0 - urban)
    hot = _hotspots(rng, towns, n)
    veg = 1.0 - urban - soil

    channels = {}
    bright = urban + soil
    for name, u, v in zip(("red", "green", "blue"), URBAN_RGB, VEGETATION_RGB):
        tex = rng.normal(0.0, params.texture, (n, n))
        channels[name] = np.clip(bright * u + veg * v + tex, 0.0, 1.0)
    nir = urban * params.urban_nir + soil * SOIL_NIR + veg * params.vegetation_nir
    channels["nir"] = np.clip(nir + rng.normal(0.0, params.texture, (n, n)), 0.0, 1.0)

    share = params.sm_signal_share
    lam = params.sm_count_scale * (0.2 * urban + hot)
    channels["sm_counts"] = rng.poisson(lam).astype(np.float64)

    light = params.night_gain * ((1.0 - share) * urban + share * hot)
    if params.noise > 0:
        light = light + rng.normal(0.0, params.noise * params.night_gain, (n, n))
    channels["night"] = np.clip(light, 0.0, RADIANCE_CAP)

    urban_mask = urban >= MASK_LEVEL
    fields = SceneFields(urban, soil, hot, urban_mask, (~urban_mask) & (soil < MASK_LEVEL))
    return channels, fields


def generate_scene(params: SceneParams, cell_id: str, bbox: BBox | None = None) -> TileBundle:
    """One deterministic tile bundle for ``(params, cell_id)``."""
    raw, _ = generate_fields(params, cell_id)
    if bbox is None:
        bbox = BBox(CONUS_BBOX[0], CONUS_BBOX[0] + CELL_SPAN, CONUS_BBOX[2], CONUS_BBOX[2] + CELL_SPAN)
    bundle = TileBundle(cell_id, bbox)
    for name in ("red", "green", "blue", "nir"):
        bundle.add(name, raw[name])
    bundle.add("sm", sm_transform(raw["sm_counts"]))
    bundle.add("night", raw["night"])
    return bundle


def synthetic_grid(n: int, span: float = CELL_SPAN) -> GeoGrid:
    """Smallest near-square grid anchored at the north-west CONUS corner holding ``n`` cells."""
    cols = math.ceil(math.sqrt(n))
    rows = math.ceil(n / cols)
    lat_max, lon_min = CONUS_BBOX[1], CONUS_BBOX[2]
    return partition_grid(BBox(lat_max - rows * span, lat_max, lon_min, lon_min + cols * span), span)


def generate_dataset(
    out: str | Path,
    n: int,
    params: SceneParams,
    seed: int | None = None,
    overwrite: bool = False,
    train_fraction: float = 0.8,
) -> list[str]:
    """Write ``n`` tiles plus grid, suitability, split and scene manifests.

    ``seed`` overrides ``params.seed`` and also seeds the split. Every tile
    counts as suitable (threshold 0): the radiance threshold is calibrated
    for full-size tiles and is applied separately with ``select``.
    """
    if n < 1:
        raise ConfigError("n must be at least 1")
    out = Path(out)
    if out.exists() and any(out.iterdir()):
        if not overwrite:
            raise FileExistsError(f"{out} is not empty; pass overwrite to replace it")
        shutil.rmtree(out)
    if seed is not None:
        params = SceneParams.from_dict({**params.to_dict(), "seed": seed})
    out.mkdir(parents=True, exist_ok=True)

    grid = synthetic_grid(n)
    cells = grid.cells()[:n]
    bundles = [generate_scene(params, c.cell_id, c.bbox) for c in cells]
    finalize_sm_range(bundles)
    for b in bundles:
        write_bundle(out, b)

    ids = [c.cell_id for c in cells]
    write_grid(out, grid)
    sums = radiance_sums({b.cell_id: b["night"] for b in bundles})
    write_suitable(out, Suitability(0.0, ids, sums))
    n_train = min(n, max(1, round(train_fraction * n)))
    write_split(out, split_dataset(ids, n_train, n - n_train, params.seed))
    (out / "scene_params.json").write_text(json.dumps({**params.to_dict(), "n": n}, indent=2) + "\n")
    return ids
