"""Command-line entry point.

Scenario names follow the ``pCqO`` / ``pCqO_M`` convention: p cells,
q operation types, with ``_M`` marking a memory-constrained run.  The
constrained presets are 1.2M parameters for cifar10 and 2M for
cifar100.  Setting precedence is: command-line flags, then the JSON
config file given by --config, then environment variables, then
built-in defaults.
"""

from __future__ import annotations

import argparse
import json
import os
import re
import sys
from dataclasses import dataclass

from . import report as report_mod
from .arch import (
    MacroConfig,
    Operation,
    OPSETS,
    build_network,
    decode_cell,
    get_opset,
    search_space_size,
)
from .data import DATA_DIR_ENV, load_dataset, sample_batch
from .errors import ConfigError, SpikeNasError
from .memmodel import MemoryBudget, count_network_params, footprint
from .score import score_candidate, write_kernel_dump
from .search import (
    MEMORY_AWARE,
    RANDOM,
    SearchConfig,
    SearchReport,
    ablate_operation,
    search_memory_aware,
    search_random,
)
from .snn import LIFParams

PRESET_BUDGET_PARAMS = {"cifar10": 1_200_000, "cifar100": 2_000_000}

_SCENARIO_RE = re.compile(r"^(\d+)C(\d+)O(_M)?$")
_OPSET_BY_SIZE = {2: "2O", 3: "3O", 5: "5O"}


@dataclass(frozen=True)
class Scenario:
    name: str
    cells: int
    opset_size: int
    constrained: bool


def parse_scenario(name: str) -> Scenario:
    m = _SCENARIO_RE.match(name.strip())
    if not m:
        raise ConfigError(
            f"malformed scenario {name!r}; expected pCqO or pCqO_M, e.g. 2C3O_M"
        )
    cells, opset_size = int(m.group(1)), int(m.group(2))
    if cells not in (1, 2, 3):
        raise ConfigError(f"scenario {name!r}: cell count must be 1..3, got {cells}")
    if opset_size not in _OPSET_BY_SIZE:
        raise ConfigError(
            f"scenario {name!r}: no {opset_size}-operation preset "
            f"(choose from {sorted(_OPSET_BY_SIZE)})"
        )
    return Scenario(name.strip(), cells, opset_size, m.group(3) is not None)


def scenario_name(cells: int, opset_size: int, constrained: bool) -> str:
    return f"{cells}C{opset_size}O" + ("_M" if constrained else "")


@dataclass(frozen=True)
class Settings:
    """Resolved run settings shared by all subcommands."""

    data_dir: str | None
    seed: int
    alpha: float
    batch_size: int
    jobs: int
    bits: int
    budget_params: int | None
    macro: MacroConfig
    lif: LIFParams
    code_mode: str
    input_coding: str
    carryover: str
    keep_log: bool


def _load_config_file(path: str | None) -> dict:
    if not path:
        return {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")
    return cfg


def _resolve(flag_value, file_cfg: dict, key: str, default, cast=None,
             env_var: str | None = None):
    """Apply the flag > config file > environment > default precedence."""
    if flag_value is not None:
        return flag_value
    sources = []
    if key in file_cfg:
        sources.append(file_cfg[key])
    elif env_var and os.environ.get(env_var):
        sources.append(os.environ[env_var])
    if not sources:
        return default
    value = sources[0]
    if cast is None:
        return value
    try:
        return cast(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value for {key!r}: {value!r}") from exc


def _settings_from_args(args: argparse.Namespace) -> Settings:
    cfg = _load_config_file(getattr(args, "config", None))

    def res(attr, key, default, cast=None, env_var=None):
        flag = getattr(args, attr, None) if attr else None
        return _resolve(flag, cfg, key, default, cast, env_var)

    no_bias = res("no_bias", "no_bias", False, bool)
    macro = MacroConfig(
        stem_channels=res("stem_channels", "stem_channels", 64, int),
        width_mult=res("width_mult", "width_mult", 2, int),
        num_classes=res("classes", "classes", 10, int),
    )
    if no_bias:
        macro = macro.without_bias()
    try:
        lif = LIFParams(
            tau_leak=res(None, "tau_leak", 2.0, float),
            v_threshold=res(None, "v_threshold", 1.0, float),
            v_reset=res(None, "v_reset", 0.0, float),
            timesteps=res("timesteps", "timesteps", 5, int),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    bits = res("bits", "bits", 32, int)
    if not 1 <= bits <= 64:
        raise ConfigError(f"--bits must be in 1..64, got {bits}")
    return Settings(
        data_dir=res("data_dir", "data_dir", None, str, env_var=DATA_DIR_ENV),
        seed=res("seed", "seed", 0, int),
        alpha=res("alpha", "alpha", 1.0, float),
        batch_size=res("batch_size", "batch_size", 16, int),
        jobs=res("jobs", "jobs", 1, int),
        bits=bits,
        budget_params=res("budget", "budget", None, int),
        macro=macro,
        lif=lif,
        code_mode=res("code_mode", "code_mode", "any", str),
        input_coding=res("input_coding", "input_coding", "direct", str),
        carryover=res("carryover", "carryover", "best", str),
        keep_log=bool(getattr(args, "candidate_log", None)),
    )


def _make_budget(max_params: int, bits: int) -> MemoryBudget:
    try:
        return MemoryBudget(max_params, bits)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _resolve_budget(scenario: Scenario | None, dataset: str,
                    s: Settings) -> MemoryBudget | None:
    if s.budget_params is not None:
        return _make_budget(s.budget_params, s.bits)
    if scenario is not None and scenario.constrained:
        preset = PRESET_BUDGET_PARAMS.get(dataset)
        if preset is None:
            raise ConfigError(
                f"scenario {scenario.name} is memory-constrained but dataset "
                f"{dataset!r} has no preset budget; pass --budget"
            )
        return _make_budget(preset, s.bits)
    return None


def _search_config(dataset_name: str, opset_name: str, cells: int,
                   budget: MemoryBudget | None, s: Settings,
                   strategy: str = MEMORY_AWARE) -> SearchConfig:
    dataset = load_dataset(dataset_name, s.data_dir, seed=s.seed)
    try:
        return SearchConfig(
            dataset=dataset,
            opset=get_opset(opset_name),
            num_cells=cells,
            macro=s.macro,
            budget=budget,
            seed=s.seed,
            batch_size=s.batch_size,
            lif=s.lif,
            alpha=s.alpha,
            jobs=s.jobs,
            strategy=strategy,
            carryover=s.carryover,
            code_mode=s.code_mode,
            input_coding=s.input_coding,
            keep_candidate_log=s.keep_log,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def run_scenario(scenario: Scenario, dataset_name: str, s: Settings, *,
                 strategy: str = MEMORY_AWARE,
                 iterations: int = 5000) -> tuple[report_mod.ReportDoc, SearchReport]:
    """Execute one scenario and return its report document."""
    budget = _resolve_budget(scenario, dataset_name, s)
    cfg = _search_config(dataset_name, _OPSET_BY_SIZE[scenario.opset_size],
                         scenario.cells, budget, s, strategy)
    if strategy == RANDOM:
        result = search_random(cfg, iterations)
    else:
        result = search_memory_aware(cfg)
    doc = report_mod.from_search_report(result, scenario.name, dataset_name, s.bits)
    return doc, result


def _emit(args: argparse.Namespace, doc: report_mod.ReportDoc,
          result: SearchReport | None) -> None:
    out = getattr(args, "report_out", None)
    if out:
        report_mod.write_report(out, doc)
        print(f"report written to {out}")
    else:
        print(report_mod.to_json(doc))
    log_path = getattr(args, "candidate_log", None)
    if log_path and result is not None and result.candidate_log is not None:
        report_mod.write_candidate_log(log_path, result.candidate_log)
    table = getattr(args, "table_out", None)
    if table:
        report_mod.append_table_row(table, doc)


def _cmd_search(args: argparse.Namespace) -> int:
    s = _settings_from_args(args)
    scenario = parse_scenario(args.scenario)
    doc, result = run_scenario(scenario, args.dataset, s)
    _emit(args, doc, result)
    return 0


def _cmd_random_search(args: argparse.Namespace) -> int:
    s = _settings_from_args(args)
    scenario = parse_scenario(args.scenario)
    cfg_file = _load_config_file(getattr(args, "config", None))
    iterations = _resolve(args.iterations, cfg_file, "iterations", 5000, int)
    doc, result = run_scenario(scenario, args.dataset, s,
                               strategy=RANDOM, iterations=iterations)
    _emit(args, doc, result)
    return 0


def _cmd_ablate(args: argparse.Namespace) -> int:
    s = _settings_from_args(args)
    try:
        removed = Operation.from_label(args.remove)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    budget = None
    if s.budget_params is not None:
        budget = _make_budget(s.budget_params, s.bits)
    cfg = _search_config(args.dataset, args.opset, args.cells, budget, s,
                         strategy=args.strategy)
    cfg_file = _load_config_file(getattr(args, "config", None))
    iterations = _resolve(args.iterations, cfg_file, "iterations", 5000, int)
    result = ablate_operation(cfg, removed, iterations=iterations)
    doc = report_mod.from_search_report(result, None, args.dataset, s.bits)
    _emit(args, doc, result)
    return 0


def _parse_indices(text: str, opset_name: str) -> tuple[int, ...]:
    opset = get_opset(opset_name)
    space = search_space_size(opset)
    try:
        indices = tuple(int(tok) for tok in text.split(","))
    except ValueError as exc:
        raise ConfigError(f"bad --indices {text!r}: {exc}") from exc
    for i in indices:
        if not 0 <= i < space:
            raise ConfigError(
                f"candidate index {i} outside [0, {space}) for operation set {opset_name}"
            )
    return indices


def _net_from_args(args: argparse.Namespace, s: Settings):
    opset = get_opset(args.opset)
    indices = _parse_indices(args.indices, args.opset)
    cells = [decode_cell(i, opset) for i in indices]
    try:
        return build_network(cells, s.macro)
    except SpikeNasError as exc:
        raise ConfigError(str(exc)) from exc


def _cmd_score(args: argparse.Namespace) -> int:
    s = _settings_from_args(args)
    net = _net_from_args(args, s)
    dataset = load_dataset(args.dataset, s.data_dir, seed=s.seed)
    batch = sample_batch(dataset, s.batch_size, s.seed)
    result = score_candidate(net, batch.pixels, s.lif, s.seed, s.alpha,
                             code_mode=s.code_mode, input_coding=s.input_coding,
                             keep_kernels=bool(args.dump_kernels))
    if args.dump_kernels:
        write_kernel_dump(args.dump_kernels, result)
    print(json.dumps({
        "score": None if result.singular else result.value,
        "singular": result.singular,
        "n_param": count_network_params(net),
        "seed": s.seed,
    }, allow_nan=False))
    return 0


def _cmd_memcalc(args: argparse.Namespace) -> int:
    s = _settings_from_args(args)
    net = _net_from_args(args, s)
    n_param = count_network_params(net)
    fp = footprint(n_param, s.bits)
    print(f"n_param={n_param} mem_bits={fp.bits} mem_bytes={fp.bytes}")
    return 0


def _cmd_enumerate(args: argparse.Namespace) -> int:
    opset = get_opset(args.opset)
    for index in range(search_space_size(opset)):
        edges = decode_cell(index, opset).edges()
        print(f"{index}\t{','.join(op.label for op in edges)}")
    return 0


def _add_common(parser: argparse.ArgumentParser, *, with_outputs: bool = True) -> None:
    parser.add_argument("--config", help="JSON config file")
    parser.add_argument("--data-dir", dest="data_dir",
                        help=f"dataset root (default: ${DATA_DIR_ENV})")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--alpha", type=float, help="sparsity normalization factor")
    parser.add_argument("--timesteps", type=int, help="simulation horizon")
    parser.add_argument("--batch-size", dest="batch_size", type=int)
    parser.add_argument("--jobs", type=int, help="worker threads for scoring")
    parser.add_argument("--bits", type=int, help="bit precision per parameter")
    parser.add_argument("--stem-channels", dest="stem_channels", type=int)
    parser.add_argument("--width-mult", dest="width_mult", type=int)
    parser.add_argument("--classes", type=int)
    parser.add_argument("--no-bias", dest="no_bias", action="store_true",
                        default=None, help="count and simulate without biases")
    parser.add_argument("--code-mode", dest="code_mode", choices=("any", "concat"))
    parser.add_argument("--input-coding", dest="input_coding",
                        choices=("direct", "rate"))
    parser.add_argument("--carryover", choices=("best", "literal"))
    if with_outputs:
        parser.add_argument("--report-out", dest="report_out")
        parser.add_argument("--candidate-log", dest="candidate_log")
        parser.add_argument("--table-out", dest="table_out")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spikenas",
        description="Training-free, memory-aware architecture search for "
                    "spiking neural networks",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("search", help="memory-aware per-cell search")
    p.add_argument("--scenario", required=True, help="pCqO or pCqO_M")
    p.add_argument("--dataset", required=True,
                   choices=("cifar10", "cifar100", "synth"))
    p.add_argument("--budget", type=int, help="max parameter count")
    _add_common(p)
    p.set_defaults(handler=_cmd_search)

    p = sub.add_parser("random-search", help="random baseline search")
    p.add_argument("--scenario", required=True)
    p.add_argument("--dataset", required=True,
                   choices=("cifar10", "cifar100", "synth"))
    p.add_argument("--budget", type=int)
    p.add_argument("--iterations", type=int, help="number of draws (default 5000)")
    _add_common(p)
    p.set_defaults(handler=_cmd_random_search)

    p = sub.add_parser("ablate", help="search with one operation removed")
    p.add_argument("--opset", default="5O", choices=sorted(OPSETS))
    p.add_argument("--cells", type=int, default=2)
    p.add_argument("--remove", required=True, help="operation label to drop")
    p.add_argument("--dataset", required=True,
                   choices=("cifar10", "cifar100", "synth"))
    p.add_argument("--budget", type=int)
    p.add_argument("--strategy", default=MEMORY_AWARE,
                   choices=(MEMORY_AWARE, RANDOM))
    p.add_argument("--iterations", type=int)
    _add_common(p)
    p.set_defaults(handler=_cmd_ablate)

    p = sub.add_parser("score", help="score one architecture")
    p.add_argument("--opset", required=True, choices=sorted(OPSETS))
    p.add_argument("--indices", required=True,
                   help="comma-separated per-cell candidate indices")
    p.add_argument("--dataset", required=True,
                   choices=("cifar10", "cifar100", "synth"))
    p.add_argument("--dump-kernels", dest="dump_kernels",
                   help="write kernel matrices to this file")
    _add_common(p, with_outputs=False)
    p.set_defaults(handler=_cmd_score)

    p = sub.add_parser("memcalc", help="parameter count and memory footprint")
    p.add_argument("--opset", required=True, choices=sorted(OPSETS))
    p.add_argument("--indices", required=True)
    _add_common(p, with_outputs=False)
    p.set_defaults(handler=_cmd_memcalc)

    p = sub.add_parser("enumerate", help="list every candidate of an operation set")
    p.add_argument("--opset", required=True, choices=sorted(OPSETS))
    p.set_defaults(handler=_cmd_enumerate)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except SpikeNasError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
