"""Exhaustive hyperparameter search with deterministic selection."""

from __future__ import annotations

import itertools
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

log = logging.getLogger(__name__)


class GridSearchError(RuntimeError):
    pass


@dataclass
class GridResult:
    best_params: dict
    best_score: float
    best_index: int
    table: list  # one dict per cell: index, params..., score, error


def grid_cells(grid: dict) -> list[dict]:
    """All parameter combinations, in lexicographic order of the axes as given."""
    if not grid:
        return [{}]
    keys = list(grid)
    for k in keys:
        if len(grid[k]) == 0:
            raise ValueError(f"grid axis {k!r} is empty")
    return [dict(zip(keys, combo)) for combo in itertools.product(*(grid[k] for k in keys))]


def select_best(table, maximize=False):
    """Index of the best finite score; ties go to the lowest cell index."""
    ok = [row for row in table if row["score"] is not None and math.isfinite(row["score"])]
    if not ok:
        return None
    sign = -1.0 if maximize else 1.0
    return min(ok, key=lambda row: (sign * row["score"], row["index"]))["index"]


def grid_search(evaluate, grid: dict, maximize: bool = False, n_jobs: int = 1) -> GridResult:
    """Score every cell with ``evaluate(**params)`` and pick the best.

    Cells that raise are recorded with their error and skipped; if none
    succeed, :class:`GridSearchError` lists the per-cell failures.
    """
    cells = grid_cells(grid)

    def run(i):
        params = cells[i]
        try:
            score = float(evaluate(**params))
            err = None
        except (ArithmeticError, ValueError, RuntimeError, np.linalg.LinAlgError) as exc:
            score, err = math.nan, f"{type(exc).__name__}: {exc}"
        log.debug("cell %d %s -> %s", i, params, score if err is None else err)
        return {"index": i, **params, "score": score, "error": err}

    if n_jobs == 1:
        table = [run(i) for i in range(len(cells))]
    else:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            table = list(pool.map(run, range(len(cells))))
    table.sort(key=lambda row: row["index"])
    best = select_best(table, maximize)
    if best is None:
        msgs = "; ".join(f"{row['index']}: {row['error'] or 'non-finite score'}" for row in table)
        raise GridSearchError(f"all {len(table)} grid cells failed ({msgs})")
    return GridResult(best_params=dict(cells[best]), best_score=table[best]["score"],
                      best_index=best, table=table)
