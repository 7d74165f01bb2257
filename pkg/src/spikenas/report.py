"""Machine-readable run reports.

A report is a flat JSON document with a stable field set; the best
architecture is serialized as (operation-set name, per-cell candidate
indices, macro configuration).  A singular best score is stored as JSON
null with `singular` set, since strict JSON has no -inf.  Reports also
export as one-row-per-run CSV for plotting, and candidate logs stream
as line-delimited JSON records.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable

from .arch import MacroConfig
from .memmodel import MemoryBudget
from .search import CandidateRecord, SearchReport

ENGINE_VERSION = "0.1.0"

REPORT_FIELDS = (
    "scenario", "dataset", "opset", "cells", "budget", "best_arch",
    "best_score", "singular", "n_param", "mem_bits", "evaluations_total",
    "evaluations_skipped", "seed", "wall_time_ms", "engine_version",
    "strategy", "iterations", "removed_op",
)

TABLE_COLUMNS = (
    "scenario", "dataset", "opset", "cells", "budget_params", "best_score",
    "n_param", "mem_bits", "evaluations_total", "evaluations_skipped",
    "seed", "wall_time_ms",
)


@dataclass(frozen=True)
class ReportDoc:
    scenario: str | None
    dataset: str
    opset: str
    cells: int
    budget: MemoryBudget | None
    cell_indices: tuple[int, ...]
    macro: MacroConfig
    best_score: float
    singular: bool
    n_param: int
    mem_bits: int
    evaluations_total: int
    evaluations_skipped: int
    seed: int
    wall_time_ms: float
    engine_version: str = ENGINE_VERSION
    strategy: str = "memory_aware"
    iterations: int | None = None
    removed_op: str | None = None

    def without_wall_time(self) -> "ReportDoc":
        return replace(self, wall_time_ms=0.0)


def from_search_report(result: SearchReport, scenario: str | None,
                       dataset: str, bit_precision: int) -> ReportDoc:
    return ReportDoc(
        scenario=scenario,
        dataset=dataset,
        opset=result.opset_name,
        cells=result.num_cells,
        budget=result.budget,
        cell_indices=result.per_cell_best_indices,
        macro=result.best_arch.macro,
        best_score=result.best_score,
        singular=result.singular,
        n_param=result.n_param,
        mem_bits=result.n_param * bit_precision,
        evaluations_total=result.evaluations_total,
        evaluations_skipped=result.evaluations_skipped_by_budget,
        seed=result.seed,
        wall_time_ms=result.wall_time_s * 1000.0,
        strategy=result.strategy,
        iterations=result.iterations,
        removed_op=None if result.removed_op is None else result.removed_op.label,
    )


def _macro_to_dict(macro: MacroConfig) -> dict:
    return {
        "stem_channels": macro.stem_channels,
        "width_mult": macro.width_mult,
        "num_classes": macro.num_classes,
        "input_shape": list(macro.input_shape),
        "stem_bias": macro.stem_bias,
        "cell_bias": macro.cell_bias,
        "down_bias": macro.down_bias,
        "fc_bias": macro.fc_bias,
    }


def _macro_from_dict(d: dict) -> MacroConfig:
    return MacroConfig(
        stem_channels=d["stem_channels"],
        width_mult=d["width_mult"],
        num_classes=d["num_classes"],
        input_shape=tuple(d["input_shape"]),
        stem_bias=d["stem_bias"],
        cell_bias=d["cell_bias"],
        down_bias=d["down_bias"],
        fc_bias=d["fc_bias"],
    )


def to_dict(doc: ReportDoc) -> dict:
    budget = None
    if doc.budget is not None:
        budget = {"max_params": doc.budget.max_params,
                  "bit_precision": doc.budget.bit_precision}
    return {
        "scenario": doc.scenario,
        "dataset": doc.dataset,
        "opset": doc.opset,
        "cells": doc.cells,
        "budget": budget,
        "best_arch": {
            "cell_indices": list(doc.cell_indices),
            "opset": doc.opset,
            "macro": _macro_to_dict(doc.macro),
        },
        "best_score": None if doc.singular else doc.best_score,
        "singular": doc.singular,
        "n_param": doc.n_param,
        "mem_bits": doc.mem_bits,
        "evaluations_total": doc.evaluations_total,
        "evaluations_skipped": doc.evaluations_skipped,
        "seed": doc.seed,
        "wall_time_ms": doc.wall_time_ms,
        "engine_version": doc.engine_version,
        "strategy": doc.strategy,
        "iterations": doc.iterations,
        "removed_op": doc.removed_op,
    }


def from_dict(d: dict) -> ReportDoc:
    budget = None
    if d["budget"] is not None:
        budget = MemoryBudget(d["budget"]["max_params"],
                              d["budget"]["bit_precision"])
    singular = d["singular"]
    return ReportDoc(
        scenario=d["scenario"],
        dataset=d["dataset"],
        opset=d["opset"],
        cells=d["cells"],
        budget=budget,
        cell_indices=tuple(d["best_arch"]["cell_indices"]),
        macro=_macro_from_dict(d["best_arch"]["macro"]),
        best_score=-math.inf if singular else d["best_score"],
        singular=singular,
        n_param=d["n_param"],
        mem_bits=d["mem_bits"],
        evaluations_total=d["evaluations_total"],
        evaluations_skipped=d["evaluations_skipped"],
        seed=d["seed"],
        wall_time_ms=d["wall_time_ms"],
        engine_version=d["engine_version"],
        strategy=d["strategy"],
        iterations=d["iterations"],
        removed_op=d["removed_op"],
    )


def to_json(doc: ReportDoc) -> str:
    return json.dumps(to_dict(doc), indent=2, sort_keys=True, allow_nan=False)


def from_json(text: str) -> ReportDoc:
    return from_dict(json.loads(text))


def write_report(path, doc: ReportDoc) -> None:
    Path(path).write_text(to_json(doc) + "\n", encoding="utf-8")


def read_report(path) -> ReportDoc:
    return from_json(Path(path).read_text(encoding="utf-8"))


def append_table_row(path, doc: ReportDoc) -> None:
    """Append one flat CSV row per run, writing the header on first use."""
    path = Path(path)
    fresh = not path.exists() or path.stat().st_size == 0
    row = {
        "scenario": doc.scenario or "",
        "dataset": doc.dataset,
        "opset": doc.opset,
        "cells": doc.cells,
        "budget_params": doc.budget.max_params if doc.budget else "",
        "best_score": "" if doc.singular else repr(doc.best_score),
        "n_param": doc.n_param,
        "mem_bits": doc.mem_bits,
        "evaluations_total": doc.evaluations_total,
        "evaluations_skipped": doc.evaluations_skipped,
        "seed": doc.seed,
        "wall_time_ms": doc.wall_time_ms,
    }
    with path.open("a", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=TABLE_COLUMNS)
        if fresh:
            writer.writeheader()
        writer.writerow(row)


def write_candidate_log(path, records: Iterable[CandidateRecord]) -> None:
    """One JSON object per visited candidate, in visit order."""
    with Path(path).open("w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps({
                "phase": rec.phase,
                "index": rec.index,
                "n_param": rec.n_param,
                "feasible": rec.feasible,
                "score": None if rec.score in (None, -math.inf) else rec.score,
                "singular": rec.score == -math.inf,
            }, allow_nan=False))
            fh.write("\n")
