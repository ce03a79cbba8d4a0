"""Image-pair metrics on standardized rasters.

All three metrics compare a generated raster G with a ground-truth raster O
after both are mapped affinely into [-1, 1]:

* ``d_eu``  - Euclidean distance, sqrt(sum (G - O)^2)
* ``d_ma``  - Manhattan distance, sum |G - O|
* ``r_ncc`` - normalized cross-correlation of the mean-centred images
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

from .errors import ConfigError, DataError, DegenerateImageError, ShapeError

NIGHT_RANGE = (0.0, 300.0)
REFLECTANCE_RANGE = (0.0, 1.0)


def standardize(raster, vmin: float, vmax: float) -> np.ndarray:
    """Clip into [vmin, vmax] then map affinely onto [-1, 1]."""
    if not vmax > vmin:
        raise ConfigError(f"standardization needs max > min, got [{vmin}, {vmax}]")
    r = np.clip(np.asarray(raster, dtype=np.float64), vmin, vmax)
    return 2.0 * (r - vmin) / (vmax - vmin) - 1.0


def destandardize(values, vmin: float, vmax: float) -> np.ndarray:
    if not vmax > vmin:
        raise ConfigError(f"standardization needs max > min, got [{vmin}, {vmax}]")
    return (np.asarray(values, dtype=np.float64) + 1.0) * 0.5 * (vmax - vmin) + vmin


@dataclass
class StandardizedImage:
    values: np.ndarray
    vmin: float
    vmax: float
    provenance: str = "ground_truth"

    @classmethod
    def from_raster(cls, raster, vmin: float, vmax: float, provenance: str = "ground_truth") -> "StandardizedImage":
        return cls(standardize(raster, vmin, vmax), vmin, vmax, provenance)

    def invert(self) -> np.ndarray:
        return destandardize(self.values, self.vmin, self.vmax)


def _pair(g, o) -> tuple[np.ndarray, np.ndarray]:
    g = np.asarray(getattr(g, "values", g), dtype=np.float64)
    o = np.asarray(getattr(o, "values", o), dtype=np.float64)
    if g.shape != o.shape:
        raise ShapeError(f"images differ in shape: {g.shape} vs {o.shape}")
    return g, o


def d_eu(g, o) -> float:
    g, o = _pair(g, o)
    diff = g - o
    return float(np.sqrt(np.sum(diff * diff)))


def d_ma(g, o) -> float:
    g, o = _pair(g, o)
    return float(np.sum(np.abs(g - o)))


def r_ncc(g, o) -> float:
    g, o = _pair(g, o)
    gc = g - g.mean()
    oc = o - o.mean()
    sg, so = np.sum(gc * gc), np.sum(oc * oc)
    if sg == 0.0 or so == 0.0:
        raise DegenerateImageError("normalized cross-correlation is undefined for a constant image")
    r = float(np.sum(gc * oc) / np.sqrt(sg * so))
    return min(1.0, max(-1.0, r))


@dataclass
class TileMetrics:
    cell_id: str
    d_eu: float
    d_ma: float
    r_ncc: float


@dataclass
class MetricReport:
    scenario: str
    tiles: list[TileMetrics] = field(default_factory=list)

    @property
    def n_tiles(self) -> int:
        return len(self.tiles)

    def mean(self, metric: str) -> float:
        if not self.tiles:
            raise DataError("report has no tiles")
        return float(np.mean([getattr(t, metric) for t in self.tiles]))

    def summary(self) -> dict:
        return {
            "scenario": self.scenario,
            "n_tiles": self.n_tiles,
            "mean_d_eu": self.mean("d_eu"),
            "mean_d_ma": self.mean("d_ma"),
            "mean_r_ncc": self.mean("r_ncc"),
        }

    def write(self, out_dir: str | Path) -> tuple[Path, Path]:
        """Write ``report.csv`` and ``summary.json`` into ``out_dir``."""
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        csv_path, json_path = out / "report.csv", out / "summary.json"
        with open(csv_path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["cell_id", "d_eu", "d_ma", "r_ncc"])
            for t in self.tiles:
                w.writerow([t.cell_id, repr(t.d_eu), repr(t.d_ma), repr(t.r_ncc)])
        json_path.write_text(json.dumps(self.summary(), indent=2) + "\n")
        return csv_path, json_path


def evaluate_arrays(
    pairs: Iterable[tuple[str, np.ndarray, np.ndarray]],
    scenario: str = "unknown",
) -> MetricReport:
    """Metrics for (cell_id, generated, truth) triples of already-standardized rasters."""
    report = MetricReport(scenario)
    for cell_id, g, o in pairs:
        report.tiles.append(TileMetrics(cell_id, d_eu(g, o), d_ma(g, o), r_ncc(g, o)))
    return report
