"""Dataset directories: tiles plus grid, suitability and split manifests.

Layout::

    <dataset>/grid.json
    <dataset>/suitable.json
    <dataset>/split.json
    <dataset>/tiles/<cell_id>/manifest.json
    <dataset>/tiles/<cell_id>/<channel>.f32
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from ..errors import ConfigError, DataError, FormatError
from ..model.specs import ScenarioConfig
from ..model.training import Example
from .grid import GeoGrid, sort_cell_ids
from .preprocess import radiance_sums, select_suitable
from .tiles import TileBundle, read_tile, stack_scenario, write_tile

SPLITS = ("train", "validation")


def _dump(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2) + "\n")


def _load(path: Path):
    try:
        return json.loads(path.read_text())
    except FileNotFoundError:
        raise DataError(f"{path} not found") from None
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON ({exc})") from None


def tiles_root(dataset: str | Path) -> Path:
    return Path(dataset) / "tiles"


def tile_path(dataset: str | Path, cell_id: str) -> Path:
    return tiles_root(dataset) / cell_id


def list_cell_ids(dataset: str | Path) -> list[str]:
    root = tiles_root(dataset)
    if not root.is_dir():
        return []
    return sort_cell_ids(p.name for p in root.iterdir() if (p / "manifest.json").is_file())


def write_bundle(dataset: str | Path, bundle: TileBundle) -> Path:
    return write_tile(bundle, tile_path(dataset, bundle.cell_id))


def read_bundle(dataset: str | Path, cell_id: str, channels: list[str] | None = None) -> TileBundle:
    return read_tile(tile_path(dataset, cell_id), channels)


def write_grid(dataset: str | Path, grid: GeoGrid) -> Path:
    path = Path(dataset) / "grid.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    _dump(path, grid.to_dict())
    return path


def read_grid(dataset: str | Path) -> GeoGrid:
    return GeoGrid.from_dict(_load(Path(dataset) / "grid.json"))


@dataclass
class Suitability:
    threshold: float
    cell_ids: list[str]
    sums: dict[str, float]


def compute_suitability(dataset: str | Path, threshold: float) -> Suitability:
    ids = list_cell_ids(dataset)
    if not ids:
        raise DataError(f"no tiles found under {tiles_root(dataset)}")
    nights = {cid: read_bundle(dataset, cid, ["night"])["night"] for cid in ids}
    return Suitability(float(threshold), select_suitable(nights, threshold), radiance_sums(nights))


def write_suitable(dataset: str | Path, suit: Suitability) -> Path:
    path = Path(dataset) / "suitable.json"
    _dump(path, {"threshold": suit.threshold, "cell_ids": suit.cell_ids, "sums": suit.sums})
    return path


def read_suitable(dataset: str | Path) -> list[str]:
    return list(_load(Path(dataset) / "suitable.json")["cell_ids"])


@dataclass
class SplitAssignment:
    seed: int
    assignments: dict[str, str]

    def ids(self, split: str) -> list[str]:
        if split not in SPLITS:
            raise ConfigError(f"unknown split {split!r}; expected one of {SPLITS}")
        return sort_cell_ids(cid for cid, s in self.assignments.items() if s == split)

    def counts(self) -> dict[str, int]:
        return {s: len(self.ids(s)) for s in SPLITS}


def split_dataset(suitable_ids: Iterable[str], train_count: int, val_count: int, seed: int) -> SplitAssignment:
    """Seeded uniform shuffle of the (sorted) ids, then a prefix split."""
    ids = sort_cell_ids(set(suitable_ids))
    if train_count < 0 or val_count < 0 or train_count + val_count != len(ids):
        raise ConfigError(f"train {train_count} + validation {val_count} must equal {len(ids)} suitable cells")
    order = np.random.default_rng(seed).permutation(len(ids))
    assignments = {ids[i]: ("train" if rank < train_count else "validation") for rank, i in enumerate(order)}
    return SplitAssignment(int(seed), {cid: assignments[cid] for cid in ids})


def write_split(dataset: str | Path, split: SplitAssignment) -> Path:
    path = Path(dataset) / "split.json"
    _dump(path, {"seed": split.seed, "assignments": split.assignments})
    return path


def read_split(dataset: str | Path) -> SplitAssignment:
    d = _load(Path(dataset) / "split.json")
    bad = {v for v in d["assignments"].values()} - set(SPLITS)
    if bad:
        raise FormatError(f"split.json has unknown split labels {sorted(bad)}")
    return SplitAssignment(int(d["seed"]), dict(d["assignments"]))


def load_examples(
    dataset: str | Path,
    scenario: ScenarioConfig,
    split: str | None = "train",
    cell_ids: Sequence[str] | None = None,
) -> list[Example]:
    """Standardized (condition, target) pairs for one split of a dataset."""
    if cell_ids is None:
        cell_ids = read_split(dataset).ids(split) if split else list_cell_ids(dataset)
    out = []
    for cid in cell_ids:
        bundle = read_bundle(dataset, cid, list(scenario.channels) + ["night"])
        st = stack_scenario(bundle, scenario)
        out.append(Example(cid, st.condition.astype(np.float32), st.target.astype(np.float32)))
    return out
