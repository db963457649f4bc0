"""Persistence of atlases, chords and flow snapshots."""

from src.chordatlas.store.atlas import (
    ATLAS_FORMAT,
    ATLAS_VERSION,
    AtlasFormatError,
    atlas_lines,
    read_atlases,
    write_atlases,
)
from src.chordatlas.store.bundle import (
    ATLAS_COLUMNS,
    FLOW_COLUMNS,
    ChordRecord,
    flow_snapshots_csv,
    write_atlas_csv,
    write_gnuplot_script,
    write_jsonl,
)

__all__ = [
    "ATLAS_FORMAT",
    "ATLAS_VERSION",
    "ATLAS_COLUMNS",
    "FLOW_COLUMNS",
    "AtlasFormatError",
    "ChordRecord",
    "atlas_lines",
    "read_atlases",
    "write_atlases",
    "write_atlas_csv",
    "write_gnuplot_script",
    "flow_snapshots_csv",
    "write_jsonl",
]
