from .dataset import (
    SplitAssignment,
    Suitability,
    compute_suitability,
    list_cell_ids,
    load_examples,
    read_bundle,
    read_grid,
    read_split,
    read_suitable,
    split_dataset,
    write_bundle,
    write_grid,
    write_split,
    write_suitable,
)
from .grid import CELL_SPAN, CONUS_BBOX, BBox, Cell, GeoGrid, partition_grid
from .preprocess import (
    RADIANCE_CAP,
    SUITABILITY_THRESHOLD,
    CapStats,
    GeoRaster,
    NegativeRadianceWarning,
    cap_radiance,
    radiance_sums,
    resample_to_tile,
    select_suitable,
    sm_transform,
)
from .tiles import Channel, StackedTile, TileBundle, read_tile, stack_scenario, write_tile
