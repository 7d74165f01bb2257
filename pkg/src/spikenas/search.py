"""Memory-aware per-cell search, random baseline, and ablation runner.

The memory-aware search proceeds in one phase per cell.  Phase 1 tries
every candidate as the shared architecture of all cells and fixes the
best feasible one; each later phase re-searches a single cell over the
full per-cell space while the earlier cells keep the best configuration
found so far.  Candidates whose parameter count exceeds the budget are
skipped without scoring, so a run visits exactly
``num_cells * len(opset) ** 6`` candidates but may evaluate far fewer.

Scores are reproducible and schedule-independent: every candidate's
weights are seeded from (run seed, phase, candidate index) and the
best-candidate reduction breaks ties toward the lowest (phase, index),
so reports do not depend on the worker pool size.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from functools import partial
from typing import Callable, Iterable

import numpy as np

from . import score as score_mod
from .arch import (
    CellArch,
    MacroConfig,
    NetworkArch,
    Operation,
    OpSet,
    build_network,
    decode_cell,
    encode_cell,
    search_space_size,
)
from .data import Dataset, sample_batch
from .errors import NoFeasibleArchitecture, OpSetTooSmall
from .memmodel import MemoryBudget, count_network_params, within_budget
from .snn import LIFParams

MEMORY_AWARE = "memory_aware"
RANDOM = "random"

# Carryover policies between phases: fix earlier cells to the best
# configuration found so far, or keep the last-tried candidate in place
# the way the in-place nested-loop formulation leaves them.
CARRY_BEST = "best"
CARRY_LITERAL = "literal"

ScoreFn = Callable[..., score_mod.ScoreResult]


@dataclass(frozen=True, eq=False)
class SearchConfig:
    dataset: Dataset
    opset: OpSet
    num_cells: int
    macro: MacroConfig = MacroConfig()
    budget: MemoryBudget | None = None
    seed: int = 0
    batch_size: int = 16
    lif: LIFParams = LIFParams()
    alpha: float = 1.0
    jobs: int = 1
    strategy: str = MEMORY_AWARE
    carryover: str = CARRY_BEST
    code_mode: str = "any"
    input_coding: str = "direct"
    keep_candidate_log: bool = False

    def __post_init__(self) -> None:
        if self.num_cells not in (1, 2, 3):
            raise ValueError(f"num_cells must be 1..3, got {self.num_cells}")
        if self.jobs < 1:
            raise ValueError(f"jobs must be >= 1, got {self.jobs}")
        if self.batch_size < 2:
            raise ValueError(f"batch_size must be >= 2, got {self.batch_size}")
        if self.seed < 0:
            raise ValueError(f"seed must be non-negative, got {self.seed}")
        if self.strategy not in (MEMORY_AWARE, RANDOM):
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if self.carryover not in (CARRY_BEST, CARRY_LITERAL):
            raise ValueError(f"unknown carryover policy {self.carryover!r}")


@dataclass(frozen=True)
class CandidateRecord:
    """Outcome of visiting one candidate; score is None when skipped."""

    phase: int
    index: int
    n_param: int
    feasible: bool
    score: float | None


@dataclass(frozen=True)
class SearchReport:
    opset_name: str
    num_cells: int
    strategy: str
    best_arch: NetworkArch
    per_cell_best_indices: tuple[int, ...]
    best_score: float
    singular: bool
    n_param: int
    evaluations_total: int
    evaluations_skipped_by_budget: int
    wall_time_s: float
    seed: int
    budget: MemoryBudget | None
    iterations: int | None = None
    removed_op: Operation | None = None
    candidate_log: tuple[CandidateRecord, ...] | None = None

    @property
    def candidates_visited(self) -> int:
        return self.evaluations_total + self.evaluations_skipped_by_budget


def candidate_seed(run_seed: int, phase: int, index: int) -> int:
    """Weight seed for one candidate, stable across evaluation order."""
    seq = np.random.SeedSequence([run_seed, phase, index])
    return int(seq.generate_state(1)[0])


def _beats(rec: CandidateRecord, best: CandidateRecord | None) -> bool:
    if best is None:
        return True
    if rec.score != best.score:
        return rec.score > best.score
    return (rec.phase, rec.index) < (best.phase, best.index)


def _visit(cfg: SearchConfig, pixels: np.ndarray, score_fn: ScoreFn,
           base_cells: tuple[CellArch, ...] | None, phase: int,
           index: int) -> CandidateRecord:
    index = int(index)
    cand = decode_cell(index, cfg.opset)
    if phase == 1:
        cells: tuple[CellArch, ...] = (cand,) * cfg.num_cells
    else:
        mutable = list(base_cells)
        mutable[phase - 1] = cand
        cells = tuple(mutable)
    net = build_network(cells, cfg.macro)
    n_param = count_network_params(net)
    if not within_budget(n_param, cfg.budget):
        return CandidateRecord(phase, index, n_param, False, None)
    result = score_fn(net, pixels, cfg.lif,
                      candidate_seed(cfg.seed, phase, index), cfg.alpha,
                      code_mode=cfg.code_mode, input_coding=cfg.input_coding)
    return CandidateRecord(phase, index, n_param, True, result.value)


def _run_all(visit: Callable[[int], CandidateRecord], indices: Iterable[int],
             jobs: int) -> list[CandidateRecord]:
    if jobs <= 1:
        return [visit(i) for i in indices]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(visit, indices))


def _cells_of(cfg: SearchConfig, base_cells: tuple[CellArch, ...] | None,
              rec: CandidateRecord) -> tuple[CellArch, ...]:
    cand = decode_cell(rec.index, cfg.opset)
    if rec.phase == 1:
        return (cand,) * cfg.num_cells
    mutable = list(base_cells)
    mutable[rec.phase - 1] = cand
    return tuple(mutable)


def _finish(cfg: SearchConfig, best: CandidateRecord,
            best_cells: tuple[CellArch, ...], total: int, skipped: int,
            elapsed: float, strategy: str, iterations: int | None,
            log: list[CandidateRecord] | None) -> SearchReport:
    return SearchReport(
        opset_name=cfg.opset.name,
        num_cells=cfg.num_cells,
        strategy=strategy,
        best_arch=build_network(best_cells, cfg.macro),
        per_cell_best_indices=tuple(encode_cell(c, cfg.opset) for c in best_cells),
        best_score=best.score,
        singular=best.score == score_mod.NEG_INF,
        n_param=best.n_param,
        evaluations_total=total,
        evaluations_skipped_by_budget=skipped,
        wall_time_s=elapsed,
        seed=cfg.seed,
        budget=cfg.budget,
        iterations=iterations,
        candidate_log=tuple(log) if log is not None else None,
    )


def search_memory_aware(cfg: SearchConfig, *,
                        score_fn: ScoreFn | None = None) -> SearchReport:
    """Per-cell consecutive search under the configured memory budget."""
    score_fn = score_fn or score_mod.score_candidate
    start = time.perf_counter()
    pixels = sample_batch(cfg.dataset, cfg.batch_size, cfg.seed).pixels
    space = search_space_size(cfg.opset)
    last_candidate = decode_cell(space - 1, cfg.opset)

    best: CandidateRecord | None = None
    best_cells: tuple[CellArch, ...] | None = None
    total = skipped = 0
    log: list[CandidateRecord] | None = [] if cfg.keep_candidate_log else None

    for phase in range(1, cfg.num_cells + 1):
        if phase == 1:
            base = None
        elif cfg.carryover == CARRY_LITERAL:
            base = (last_candidate,) * cfg.num_cells
        else:
            base = best_cells
        visit = partial(_visit, cfg, pixels, score_fn, base, phase)
        for rec in _run_all(visit, range(space), cfg.jobs):
            if rec.feasible:
                total += 1
            else:
                skipped += 1
            if log is not None:
                log.append(rec)
            if rec.feasible and _beats(rec, best):
                best = rec
                best_cells = _cells_of(cfg, base, rec)
        if phase == 1 and best is None:
            raise NoFeasibleArchitecture(
                f"all {space} shared-cell candidates exceed the budget of "
                f"{cfg.budget.max_params} parameters"
            )

    return _finish(cfg, best, best_cells, total, skipped,
                   time.perf_counter() - start, MEMORY_AWARE, None, log)


def search_random(cfg: SearchConfig, iterations: int, *,
                  score_fn: ScoreFn | None = None) -> SearchReport:
    """Baseline: seeded uniform draws of one shared cell architecture.

    Draws are with replacement; a repeated index reuses the same derived
    weight seed and therefore the same score.  The budget filter applies
    exactly as in the memory-aware search.
    """
    if iterations < 1:
        raise ValueError(f"iterations must be >= 1, got {iterations}")
    score_fn = score_fn or score_mod.score_candidate
    start = time.perf_counter()
    pixels = sample_batch(cfg.dataset, cfg.batch_size, cfg.seed).pixels
    space = search_space_size(cfg.opset)
    draws = np.random.default_rng(
        np.random.SeedSequence([cfg.seed, 1])
    ).integers(0, space, size=iterations)

    best: CandidateRecord | None = None
    total = skipped = 0
    log: list[CandidateRecord] | None = [] if cfg.keep_candidate_log else None
    visit = partial(_visit, cfg, pixels, score_fn, None, 1)
    for rec in _run_all(visit, draws, cfg.jobs):
        if rec.feasible:
            total += 1
        else:
            skipped += 1
        if log is not None:
            log.append(rec)
        if rec.feasible and _beats(rec, best):
            best = rec
    if best is None:
        raise NoFeasibleArchitecture(
            f"none of the {iterations} drawn candidates fit the budget of "
            f"{cfg.budget.max_params} parameters"
        )

    best_cells = (decode_cell(best.index, cfg.opset),) * cfg.num_cells
    return _finish(cfg, best, best_cells, total, skipped,
                   time.perf_counter() - start, RANDOM, iterations, log)


def ablate_operation(cfg: SearchConfig, removed: Operation, *,
                     iterations: int = 5000,
                     score_fn: ScoreFn | None = None) -> SearchReport:
    """Re-run the configured search with one operation removed."""
    if removed not in cfg.opset:
        raise ValueError(
            f"{removed.label} is not in operation set {cfg.opset.name!r}"
        )
    if len(cfg.opset) - 1 < 2:
        raise OpSetTooSmall(
            f"removing {removed.label} leaves {len(cfg.opset) - 1} operation(s); "
            "need at least 2 to search"
        )
    sub = replace(cfg, opset=cfg.opset.without(removed))
    if cfg.strategy == RANDOM:
        report = search_random(sub, iterations, score_fn=score_fn)
    else:
        report = search_memory_aware(sub, score_fn=score_fn)
    return replace(report, removed_op=removed)
