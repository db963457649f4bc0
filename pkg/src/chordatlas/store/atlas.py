"""Line-delimited persistence of family atlases.

File layout, one JSON object per line:

    {"record": "header", "format": "chordatlas-atlas", "version": 1, "system_id": ..., "direction": ...}
    {"record": "row", <AtlasRow fields>}
    {"record": "event", <FamilyEvent fields>}
    {"record": "probe", <OmegaProbe fields>}
    {"record": "census", <CensusResult fields>}

A header starts a new family, so several families can share one file.
Floats are written with repr precision and read back bit-for-bit.
"""

import json
import logging
from pathlib import Path
from typing import Iterable, List, Union

from pydantic import ValidationError

from src.chordatlas.continuation.models import (
    AtlasRow,
    CensusResult,
    FamilyAtlas,
    FamilyEvent,
    OmegaProbe,
)

logger = logging.getLogger(__name__)

ATLAS_FORMAT = "chordatlas-atlas"
ATLAS_VERSION = 1


class AtlasFormatError(ValueError):
    """Raised when an atlas file cannot be parsed."""

    def __init__(self, path: Union[str, Path], line: int, reason: str):
        self.path = str(path)
        self.line = line
        self.reason = reason
        super().__init__(f"{self.path}:{line}: {reason}")


_RECORDS = {
    "row": (AtlasRow, "rows"),
    "event": (FamilyEvent, "events"),
    "probe": (OmegaProbe, "probes"),
    "census": (CensusResult, "census"),
}


def atlas_lines(atlas: FamilyAtlas) -> List[str]:
    """Serialize one family to its JSON lines."""
    header = {
        "record": "header",
        "format": ATLAS_FORMAT,
        "version": ATLAS_VERSION,
        "system_id": atlas.system_id,
        "direction": atlas.direction,
    }
    lines = [json.dumps(header)]
    for tag, (_, attr) in _RECORDS.items():
        for item in getattr(atlas, attr):
            lines.append(json.dumps({"record": tag, **item.model_dump()}))
    return lines


def write_atlases(atlases: Iterable[FamilyAtlas], path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as f:
        for atlas in atlases:
            for line in atlas_lines(atlas):
                f.write(line + "\n")
    logger.debug("Atlas written", extra={"path": str(path)})
    return path


def read_atlases(path: Union[str, Path]) -> List[FamilyAtlas]:
    """Parse every family in an atlas file.

    Raises:
        AtlasFormatError: Bad JSON, a record before any header, an unknown
            tag, a foreign format or version, or an invalid record.
    """
    path = Path(path)
    atlases: List[FamilyAtlas] = []
    with path.open("r", encoding="utf-8") as f:
        for number, raw in enumerate(f, start=1):
            if not raw.strip():
                continue
            try:
                record = json.loads(raw)
            except json.JSONDecodeError as e:
                raise AtlasFormatError(path, number, f"invalid JSON: {e.msg}")
            if not isinstance(record, dict):
                raise AtlasFormatError(path, number, "record is not an object")
            tag = record.pop("record", None)
            if tag == "header":
                if record.get("format") != ATLAS_FORMAT:
                    raise AtlasFormatError(path, number, f"unknown format {record.get('format')!r}")
                if record.get("version") != ATLAS_VERSION:
                    raise AtlasFormatError(path, number, f"unsupported version {record.get('version')!r}")
                try:
                    atlases.append(
                        FamilyAtlas(system_id=record["system_id"], direction=record.get("direction", 1))
                    )
                except (KeyError, ValidationError) as e:
                    raise AtlasFormatError(path, number, f"invalid header: {e}")
                continue
            if tag not in _RECORDS:
                raise AtlasFormatError(path, number, f"unknown record tag {tag!r}")
            if not atlases:
                raise AtlasFormatError(path, number, "record before header")
            model, attr = _RECORDS[tag]
            try:
                getattr(atlases[-1], attr).append(model.model_validate(record))
            except ValidationError as e:
                raise AtlasFormatError(path, number, f"invalid {tag} record: {e.error_count()} errors")
    return atlases
