"""Result file writers shared by the command line entry point."""

import csv
import json
import logging
from pathlib import Path
from typing import Any, Iterable, Sequence

from pydantic import BaseModel


_logger = logging.getLogger(__name__)


def format_cell(value: Any) -> str:
    """Render one CSV cell; floats use 17 significant digits."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


def dump_json(data: BaseModel | dict) -> str:
    if isinstance(data, BaseModel):
        data = data.model_dump(mode="json")
    return json.dumps(data, indent=2, sort_keys=True) + "\n"


def write_json(path: Path, data: BaseModel | dict) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dump_json(data))
    _logger.info(f"Wrote {path}")
    return path


def write_csv(
    path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]]
) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_cell(value) for value in row])
    _logger.info(f"Wrote {path}")
    return path
