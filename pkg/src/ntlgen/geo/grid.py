"""Regular lat/lon grids over a bounding box and per-cell suitability selection."""
from __future__ import annotations

import re
from dataclasses import asdict, dataclass
from typing import Iterable

import numpy as np

from ..errors import ConfigError

CONUS_BBOX = (24.0, 49.0, -125.0, -65.0)
CELL_SPAN = 0.625
SPAN_TOLERANCE = 1e-9

_CELL_ID = re.compile(r"^r(\d+)c(\d+)$")


@dataclass(frozen=True)
class BBox:
    lat_min: float
    lat_max: float
    lon_min: float
    lon_max: float

    def __post_init__(self):
        if not (self.lat_max > self.lat_min and self.lon_max > self.lon_min):
            raise ConfigError(f"degenerate bounding box {self}")

    def intersects(self, other: "BBox") -> bool:
        return (
            self.lat_min < other.lat_max
            and other.lat_min < self.lat_max
            and self.lon_min < other.lon_max
            and other.lon_min < self.lon_max
        )


@dataclass(frozen=True)
class Cell:
    cell_id: str
    row: int
    col: int
    bbox: BBox


def cell_id(row: int, col: int) -> str:
    return f"r{row}c{col}"


def parse_cell_id(cid: str) -> tuple[int, int] | None:
    m = _CELL_ID.match(cid)
    return (int(m.group(1)), int(m.group(2))) if m else None


def cell_sort_key(cid: str):
    rc = parse_cell_id(cid)
    return (0, rc, "") if rc else (1, (0, 0), cid)


def _edges(lo: float, hi: float, n: int, span: float) -> np.ndarray:
    edges = lo + span * np.arange(n + 1, dtype=np.float64)
    edges[-1] = hi
    return edges


@dataclass(frozen=True)
class GeoGrid:
    """Row 0 is the northernmost row; columns run west to east."""

    bbox: BBox
    span: float
    rows: int
    cols: int

    @property
    def n_cells(self) -> int:
        return self.rows * self.cols

    def lat_edges(self) -> np.ndarray:
        return _edges(self.bbox.lat_min, self.bbox.lat_max, self.rows, self.span)

    def lon_edges(self) -> np.ndarray:
        return _edges(self.bbox.lon_min, self.bbox.lon_max, self.cols, self.span)

    def cell(self, row: int, col: int) -> Cell:
        if not (0 <= row < self.rows and 0 <= col < self.cols):
            raise ConfigError(f"cell ({row}, {col}) outside a {self.rows}x{self.cols} grid")
        lat, lon = self.lat_edges(), self.lon_edges()
        south = self.rows - 1 - row
        return Cell(cell_id(row, col), row, col, BBox(lat[south], lat[south + 1], lon[col], lon[col + 1]))

    def cells(self) -> list[Cell]:
        return [self.cell(r, c) for r in range(self.rows) for c in range(self.cols)]

    def to_dict(self) -> dict:
        return {"bbox": asdict(self.bbox), "span": self.span, "rows": self.rows, "cols": self.cols}

    @classmethod
    def from_dict(cls, d: dict) -> "GeoGrid":
        grid = partition_grid(BBox(**d["bbox"]), d["span"])
        if (grid.rows, grid.cols) != (d["rows"], d["cols"]):
            raise ConfigError("grid rows/cols disagree with bbox and span")
        return grid


def _count(extent: float, span: float, axis: str) -> int:
    n = int(round(extent / span))
    if n < 1 or abs(n * span - extent) > SPAN_TOLERANCE:
        raise ConfigError(f"span {span} does not divide the {axis} extent {extent}")
    return n


def partition_grid(bbox: BBox | tuple[float, float, float, float], span: float = CELL_SPAN) -> GeoGrid:
    """Split ``bbox`` (lat_min, lat_max, lon_min, lon_max) into square cells of ``span`` degrees."""
    if not isinstance(bbox, BBox):
        bbox = BBox(*map(float, bbox))
    if span <= 0:
        raise ConfigError(f"span must be positive, got {span}")
    rows = _count(bbox.lat_max - bbox.lat_min, span, "latitude")
    cols = _count(bbox.lon_max - bbox.lon_min, span, "longitude")
    return GeoGrid(bbox, float(span), rows, cols)


def sort_cell_ids(ids: Iterable[str]) -> list[str]:
    return sorted(ids, key=cell_sort_key)
