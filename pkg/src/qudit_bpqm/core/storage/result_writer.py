"""
File persistence of experiment results with a metadata header kept apart from the data.
"""

import csv
import io
import logging
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Any

import orjson
from pydantic import BaseModel

from qudit_bpqm import __version__

CSV_HEADER_PREFIX = "# "


class OutputFormat(str, Enum):
    CSV = "csv"
    JSON = "json"


class ResultFile(BaseModel):
    metadata: dict[str, Any]
    data: list[dict[str, Any]] | dict[str, Any]


def _rows(data: list[dict] | dict) -> list[dict]:
    return data if isinstance(data, list) else [data]


def render_csv(rows: list[dict]) -> str:
    buffer = io.StringIO()
    if rows:
        writer = csv.DictWriter(buffer, fieldnames=list(rows[0].keys()), lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
    return buffer.getvalue()


def _parse_cell(cell: str) -> Any:
    if cell == "":
        return None
    for cast in (int, float):
        try:
            return cast(cell)
        except ValueError:
            pass
    return cell


class ResultWriter:
    """Writes one result file per run: metadata header (version, config, timestamp, wall time) then data."""

    def __init__(self, output_path: str | Path, fmt: OutputFormat = OutputFormat.CSV):
        self.output_path = Path(output_path)
        self.fmt = fmt

    def metadata(self, command: str, config: dict, wall_time: float) -> dict:
        return {
            "tool": "qudit-bpqm",
            "version": __version__,
            "command": command,
            "config": config,
            "timestamp": datetime.now(timezone.utc).isoformat(),
            "wall_time_seconds": wall_time,
        }

    def log_result(self, command: str, config: dict, data: list[dict] | dict, wall_time: float) -> Path:
        header = self.metadata(command, config, wall_time)
        self.output_path.parent.mkdir(parents=True, exist_ok=True)

        if self.fmt == OutputFormat.JSON:
            payload = orjson.dumps({"metadata": header, "data": data}, option=orjson.OPT_INDENT_2 | orjson.OPT_SERIALIZE_NUMPY)
            self.output_path.write_bytes(payload)
        else:
            text = CSV_HEADER_PREFIX + orjson.dumps(header).decode() + "\n" + render_csv(_rows(data))
            self.output_path.write_text(text, encoding="utf-8")

        logging.info(f"Wrote {command} result to {self.output_path}")
        return self.output_path


def read_result(path: str | Path) -> ResultFile:
    path = Path(path)
    if path.suffix == ".json":
        record = orjson.loads(path.read_bytes())
        return ResultFile(metadata=record["metadata"], data=record["data"])

    lines = path.read_text(encoding="utf-8").splitlines(keepends=True)
    metadata = {}
    if lines and lines[0].startswith(CSV_HEADER_PREFIX):
        metadata = orjson.loads(lines[0][len(CSV_HEADER_PREFIX):])
        lines = lines[1:]
    rows = [{key: _parse_cell(value) for key, value in row.items()} for row in csv.DictReader(lines)]
    return ResultFile(metadata=metadata, data=rows)


def data_section(path: str | Path) -> bytes:
    """File contents without the metadata header, for rerun comparisons."""
    path = Path(path)
    if path.suffix == ".json":
        return orjson.dumps(orjson.loads(path.read_bytes())["data"])
    text = path.read_text(encoding="utf-8")
    if text.startswith(CSV_HEADER_PREFIX):
        text = text.split("\n", 1)[1]
    return text.encode("utf-8")
