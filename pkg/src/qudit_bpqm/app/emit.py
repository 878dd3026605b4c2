"""
Plot-ready CSV emission, one file per curve.
"""

import logging
from enum import Enum
from itertools import groupby
from pathlib import Path
from typing import Any

from qudit_bpqm.core.density_evolution import CurvePoint, PolarDesignResult, SweepRow
from qudit_bpqm.core.errors import FigureTypeMismatch
from qudit_bpqm.core.storage import render_csv


class FigureId(str, Enum):
    POLAR_RATE = "polar-rate"
    POLAR_RANK = "polar-rank"
    LDPC_THRESHOLD = "ldpc-threshold"


def _as_list(result: Any) -> list:
    return list(result) if isinstance(result, (list, tuple)) else [result]


def _require(items: list, kind: type, figure_id: FigureId) -> None:
    if not items or not all(isinstance(item, kind) for item in items):
        raise FigureTypeMismatch(f"{figure_id.value} needs {kind.__name__} results")


def _write(path: Path, rows: list[dict]) -> Path:
    path.write_text(render_csv(rows), encoding="utf-8")
    logging.info(f"Wrote {len(rows)} points to {path}")
    return path


def emit_figure_data(result: Any, figure_id: FigureId | str, out_dir: str | Path) -> list[Path]:
    figure_id = FigureId(figure_id)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    items = _as_list(result)

    if figure_id == FigureId.POLAR_RATE:
        _require(items, SweepRow, figure_id)
        paths = []
        for n, rows in groupby(sorted(items, key=lambda r: (r.n, r.lambda0)), key=lambda r: r.n):
            curve = [{"lambda0": r.lambda0, "rate": r.design_rate, "holevo": r.holevo_qits} for r in rows]
            paths.append(_write(out_dir / f"{figure_id.value}_n{n}.csv", curve))
        return paths

    if figure_id == FigureId.POLAR_RANK:
        _require(items, PolarDesignResult, figure_id)
        return [
            _write(
                out_dir / f"{figure_id.value}_n{r.n}.csv",
                [{"rank_over_N": x, "mean_error": e} for x, e in r.normalized_rank_curve()],
            )
            for r in items
        ]

    _require(items, CurvePoint, figure_id)
    curve = [{"lambda0": p.lambda0, "final_error": p.final_error} for p in items]
    return [_write(out_dir / f"{figure_id.value}.csv", curve)]
