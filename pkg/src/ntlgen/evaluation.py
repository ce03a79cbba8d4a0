"""Directory-level evaluation of translated tiles against ground truth."""
from __future__ import annotations

import json
from pathlib import Path

from .errors import DataError
from .geo.dataset import list_cell_ids, read_bundle
from .metrics import MetricReport, StandardizedImage, evaluate_arrays


def _night(root: Path, cell_id: str) -> StandardizedImage:
    b = read_bundle(root, cell_id, ["night"])
    if "night" not in b.channels:
        raise DataError(f"{root}: tile {cell_id} has no night channel")
    c = b.channels["night"]
    return StandardizedImage.from_raster(c.data, c.standardize_min, c.standardize_max)


def _scenario_of(pred_dir: Path) -> str:
    meta = pred_dir / "translate.json"
    if meta.is_file():
        return json.loads(meta.read_text()).get("scenario", "unknown")
    return "unknown"


def evaluate_pairs(pred_dir: str | Path, truth_dir: str | Path, scenario: str | None = None) -> MetricReport:
    """Compare the night channel of every predicted tile with its ground-truth tile.

    Each side is standardized with the range recorded in its own manifest.
    Every predicted cell must exist in ``truth_dir``; ground-truth cells
    without a prediction are ignored.
    """
    pred_dir, truth_dir = Path(pred_dir), Path(truth_dir)
    pred_ids = list_cell_ids(pred_dir)
    if not pred_ids:
        raise DataError(f"no predicted tiles under {pred_dir}")
    truth_ids = set(list_cell_ids(truth_dir))
    unmatched = [cid for cid in pred_ids if cid not in truth_ids]
    if unmatched:
        raise DataError(f"predicted tiles without ground truth: {', '.join(unmatched)}")
    triples = ((cid, _night(pred_dir, cid).values, _night(truth_dir, cid).values) for cid in pred_ids)
    return evaluate_arrays(triples, scenario or _scenario_of(pred_dir))
