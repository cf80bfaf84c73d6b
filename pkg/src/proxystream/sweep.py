"""Run configuration, experiment grids, and deterministic result files.

A run config names the data source (a synthetic generator spec or an events
CSV), the use case and its knobs, and the pipeline parameters. A sweep
expands a base config over rho/tau/seed lists, executes each combination
(continuing past per-run failures), and writes long-format CSVs plus one
tau x rho pivot per metric. CSV bodies are byte-stable across reruns; wall
clock and environment facts go to manifest.json only.
"""
from __future__ import annotations

import csv
import datetime as _dt
import json
import logging
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__
from .clustering import BINNED, EUCLIDEAN
from .filtering import filter_invoice_cases, invoice_log_schema
from .logio import read_event_log
from .metrics import METRIC_NAMES, format_value
from .models import ModelSpec
from .pipeline import ALL_TOKEN, KMEDOIDS, RANDOM, RunResult, run_stream
from .synthetic import (
    archetype_invoice_spec,
    archetype_shopper_spec,
    generate_invoice_stream,
    generate_shopper_stream,
    noise_dominated_shopper_spec,
    shopper_log_schema,
)
from .usecases import PaintFactoryUseCase, SupermarketUseCase

logger = logging.getLogger(__name__)

SUPERMARKET = "supermarket"
PAINT_FACTORY = "paint_factory"

RESULT_COLUMNS = ("run_id", "use_case", "rho", "tau", "seed", "step", "metric", "value")
SUMMARY_COLUMNS = ("run_id", "use_case", "rho", "tau", "seed", "metric", "value")


def _reject_unknown(data: dict, allowed: set[str], what: str) -> None:
    unknown = set(data) - allowed
    if unknown:
        raise ValueError(f"unknown {what} keys: {sorted(unknown)}")


def model_spec_from_dict(data: dict) -> ModelSpec:
    _reject_unknown(data, {"kind", "input_width", "ridge", "hidden",
                           "learning_rate", "epochs"}, "model")
    return ModelSpec(**data)


@dataclass(frozen=True)
class RunConfig:
    """Everything needed to reproduce one pipeline run."""

    use_case: str = SUPERMARKET
    rho: int | str = 1
    tau: int | None = 3
    seed: int = 0
    model: ModelSpec = field(default_factory=ModelSpec)
    partitioner: str = KMEDOIDS
    distance: str = EUCLIDEAN
    n_bins: int = 20
    standardize: bool = True
    bypass_clustering: bool = False
    max_iter: int = 100
    t_start: int | None = None
    t_end: int | None = None
    events: str | None = None
    time_format: str = "number"
    filter_cases: bool = True
    generator: dict | None = None

    def __post_init__(self) -> None:
        if self.use_case not in (SUPERMARKET, PAINT_FACTORY):
            raise ValueError(f"unknown use case {self.use_case!r}")
        if self.rho != ALL_TOKEN and (not isinstance(self.rho, int) or self.rho < 1):
            raise ValueError(f"rho must be a positive integer or {ALL_TOKEN!r}")
        if self.partitioner not in (KMEDOIDS, RANDOM):
            raise ValueError(f"unknown partitioner {self.partitioner!r}")
        if self.use_case == SUPERMARKET and (self.tau is None or self.tau < 2):
            raise ValueError("supermarket runs need tau >= 2")
        if (self.t_start is None) != (self.t_end is None):
            raise ValueError("t_start and t_end must be given together")
        if self.events is None and self.generator is None:
            raise ValueError("config needs an events path or a generator block")
        if self.events is not None and self.generator is not None:
            raise ValueError("give either an events path or a generator block, not both")

    @property
    def rho_token(self) -> str:
        return str(self.rho)

    @property
    def tau_token(self) -> str:
        return "" if self.use_case == PAINT_FACTORY or self.tau is None else str(self.tau)


_RUN_KEYS = {
    "use_case", "rho", "tau", "seed", "model", "partitioner", "distance",
    "n_bins", "standardize", "bypass_clustering", "max_iter",
    "t_start", "t_end", "events", "time_format", "filter_cases", "generator",
}


def run_config_from_dict(data: dict) -> RunConfig:
    _reject_unknown(data, _RUN_KEYS, "run config")
    data = dict(data)
    if "model" in data and isinstance(data["model"], dict):
        data["model"] = model_spec_from_dict(data["model"])
    return RunConfig(**data)


def load_run_config(path: str | Path) -> RunConfig:
    return run_config_from_dict(json.loads(Path(path).read_text()))


def run_id_for(cfg: RunConfig) -> str:
    parts = [cfg.use_case, f"rho-{cfg.rho_token}"]
    if cfg.tau_token:
        parts.append(f"tau-{cfg.tau_token}")
    parts.append(f"seed-{cfg.seed}")
    if cfg.partitioner != KMEDOIDS:
        parts.append(cfg.partitioner)
    if cfg.bypass_clustering:
        parts.append("bypass")
    if cfg.model.kind != ModelSpec().kind:
        parts.append(cfg.model.kind)
    return "_".join(parts)


# -- data sources ----------------------------------------------------------

def generate_from_dict(data: dict):
    """Build a synthetic stream from a generator config block.

    Keys: kind ("shopper" | "invoice"), optional preset
    ("archetype" | "noise_dominated"), then the preset's keyword arguments.
    Returns (store, truth).
    """
    _reject_unknown(data, {"kind", "preset"} | _GENERATOR_PARAMS, "generator")
    data = dict(data)
    kind = data.pop("kind", None)
    preset = data.pop("preset", "archetype")
    try:
        if kind == "shopper":
            if preset == "noise_dominated":
                spec = noise_dominated_shopper_spec(**data)
            elif preset == "archetype":
                spec = archetype_shopper_spec(**data)
            else:
                raise ValueError(f"unknown shopper preset {preset!r}")
            return generate_shopper_stream(spec)
        if kind == "invoice":
            if preset != "archetype":
                raise ValueError(f"unknown invoice preset {preset!r}")
            return generate_invoice_stream(archetype_invoice_spec(**data))
    except TypeError as exc:
        raise ValueError(f"bad generator parameters: {exc}") from None
    raise ValueError(f"unknown generator kind {kind!r}")


_GENERATOR_PARAMS = {"n_entities", "horizon", "n_archetypes", "noise_scale",
                     "entity_spread", "seed"}


def load_store_for(cfg: RunConfig):
    """Materialise the run's event store (generated or loaded, filtered for
    invoice runs when configured)."""
    if cfg.generator is not None:
        store, _ = generate_from_dict(cfg.generator)
    else:
        if cfg.use_case == SUPERMARKET:
            schema = shopper_log_schema()
        else:
            schema = invoice_log_schema(cfg.time_format)
        store = read_event_log(cfg.events, schema)
    if cfg.use_case == PAINT_FACTORY and cfg.filter_cases:
        store, report = filter_invoice_cases(store)
        logger.info("invoice filter: kept %d of %d cases",
                    report.cases_kept, report.cases_in)
    return store


def make_usecase(cfg: RunConfig):
    if cfg.use_case == SUPERMARKET:
        return SupermarketUseCase(tau=cfg.tau, distance_kind=cfg.distance,
                                  n_bins=cfg.n_bins, standardize=cfg.standardize)
    return PaintFactoryUseCase()


def execute_run(cfg: RunConfig, store=None) -> RunResult:
    """Run one config end to end; raises on failure."""
    if store is None:
        store = load_store_for(cfg)
    usecase = make_usecase(cfg)
    steps = None
    if cfg.t_start is not None:
        steps = range(cfg.t_start, cfg.t_end)
    return run_stream(
        store, usecase, cfg.rho,
        model=cfg.model,
        seed=cfg.seed,
        steps=steps,
        partitioner=cfg.partitioner,
        bypass_clustering=cfg.bypass_clustering,
        max_iter=cfg.max_iter,
    )


# -- sweeps ----------------------------------------------------------------

@dataclass(frozen=True)
class SweepConfig:
    base: RunConfig
    rhos: tuple = (1,)
    taus: tuple | None = None
    seeds: tuple = (0,)


def sweep_config_from_dict(data: dict) -> SweepConfig:
    _reject_unknown(data, {"base", "rhos", "taus", "seeds"}, "sweep config")
    base = run_config_from_dict(data.get("base", {}))
    rhos = tuple(data.get("rhos", [base.rho]))
    taus = data.get("taus")
    seeds = tuple(data.get("seeds", [base.seed]))
    return SweepConfig(base=base, rhos=rhos,
                       taus=None if taus is None else tuple(taus),
                       seeds=seeds)


def load_sweep_config(path: str | Path) -> SweepConfig:
    return sweep_config_from_dict(json.loads(Path(path).read_text()))


def expand_grid(sweep: SweepConfig) -> list[RunConfig]:
    """Base config crossed with rho/tau/seed lists, duplicates dropped."""
    rhos: list = []
    for rho in sweep.rhos:
        if rho in rhos:
            logger.warning("duplicate rho %r in grid, skipping", rho)
            continue
        rhos.append(rho)
    taus = [None] if sweep.taus is None else list(dict.fromkeys(sweep.taus))
    configs = []
    for seed in sweep.seeds:
        for tau in taus:
            for rho in rhos:
                cfg = replace(sweep.base, rho=rho, seed=seed)
                if tau is not None:
                    cfg = replace(cfg, tau=tau)
                configs.append(cfg)
    return configs


@dataclass
class RunOutput:
    run_id: str
    config: RunConfig
    result: RunResult | None = None
    error: str | None = None


def _execute_for_pool(cfg: RunConfig) -> RunOutput:
    try:
        return RunOutput(run_id_for(cfg), cfg, result=execute_run(cfg))
    except Exception:
        return RunOutput(run_id_for(cfg), cfg, error=traceback.format_exc())


def execute_sweep(sweep: SweepConfig, jobs: int = 1) -> list[RunOutput]:
    """Run every grid point; failures are recorded, not raised.

    With jobs == 1 the store for each distinct data source is loaded once
    and shared across its runs; with more jobs each worker process loads
    its own copy.
    """
    configs = expand_grid(sweep)
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_execute_for_pool, configs))

    outputs: list[RunOutput] = []
    stores: dict[str, Any] = {}
    for cfg in configs:
        source = json.dumps(
            {"events": cfg.events, "generator": cfg.generator,
             "use_case": cfg.use_case, "filter": cfg.filter_cases},
            sort_keys=True)
        run_id = run_id_for(cfg)
        try:
            if source not in stores:
                stores[source] = load_store_for(cfg)
            result = execute_run(cfg, store=stores[source])
            outputs.append(RunOutput(run_id, cfg, result=result))
            logger.info("run %s done", run_id)
        except Exception:
            outputs.append(RunOutput(run_id, cfg, error=traceback.format_exc()))
            logger.exception("run %s failed", run_id)
    return outputs


# -- output files ----------------------------------------------------------

def _result_rows(out: RunOutput) -> list[tuple]:
    cfg = out.config
    rows = []
    for step, metric, value in out.result.metrics.value_rows():
        rows.append((out.run_id, cfg.use_case, cfg.rho_token, cfg.tau_token,
                     cfg.seed, step, metric, format_value(value)))
    return rows


def _summary_rows(out: RunOutput) -> list[tuple]:
    cfg = out.config
    rows = []
    for metric in METRIC_NAMES:
        value = out.result.metrics.average(metric)
        rows.append((out.run_id, cfg.use_case, cfg.rho_token, cfg.tau_token,
                     cfg.seed, metric, format_value(value)))
    return rows


def _write_csv(path: Path, header: Sequence[str], rows: list) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _rho_sort_key(token: str):
    return (1, 0) if token == ALL_TOKEN else (0, int(token))


def write_pivot_csv(path: Path, outputs: list[RunOutput], metric: str) -> None:
    """tau rows x rho columns of time-averaged metric values.

    Cells average over seeds when the grid repeats a (tau, rho) pair; "NA"
    where nothing is defined.
    """
    cells: dict[tuple[str, str], list[float]] = {}
    taus: list[str] = []
    rhos: list[str] = []
    for out in outputs:
        if out.result is None:
            continue
        tau, rho = out.config.tau_token, out.config.rho_token
        if tau not in taus:
            taus.append(tau)
        if rho not in rhos:
            rhos.append(rho)
        value = out.result.metrics.average(metric)
        if value is not None:
            cells.setdefault((tau, rho), []).append(value)
    taus.sort(key=lambda t: (t != "", int(t) if t else 0))
    rhos.sort(key=_rho_sort_key)
    rows = []
    for tau in taus:
        row = [tau]
        for rho in rhos:
            got = cells.get((tau, rho))
            row.append(format_value(float(np.mean(got)) if got else None))
        rows.append(row)
    _write_csv(path, ["tau", *rhos], rows)


def _manifest(outdir: Path, payload: dict) -> None:
    payload = dict(payload)
    payload["created_utc"] = _dt.datetime.now(_dt.timezone.utc).isoformat()
    payload["package_version"] = __version__
    payload["numpy_version"] = np.__version__
    (outdir / "manifest.json").write_text(json.dumps(payload, indent=2, default=str) + "\n")


def write_run_outputs(outdir: str | Path, out: RunOutput) -> None:
    """results.csv, summary.csv, steps.csv and manifest.json for one run."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    _write_csv(outdir / "results.csv", RESULT_COLUMNS, _result_rows(out))
    _write_csv(outdir / "summary.csv", SUMMARY_COLUMNS, _summary_rows(out))
    step_rows = [
        (s.step, s.n_train, s.k_train, s.n_pred, s.k_pred,
         int(s.trained), int(s.predicted), int(s.reused_encoding))
        for s in out.result.steps
    ]
    _write_csv(outdir / "steps.csv",
               ("step", "n_train", "k_train", "n_pred", "k_pred",
                "trained", "predicted", "reused_encoding"),
               step_rows)
    _manifest(outdir, {"kind": "run", "run_id": out.run_id,
                       "config": asdict(out.config),
                       "unresolved": out.result.config["unresolved"]})


def write_sweep_outputs(outdir: str | Path, outputs: list[RunOutput],
                        sweep: SweepConfig | None = None) -> None:
    """Aggregate files for a grid: long CSVs, per-metric pivots, run status."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    result_rows: list[tuple] = []
    summary_rows: list[tuple] = []
    status_rows: list[tuple] = []
    for out in outputs:
        if out.result is not None:
            result_rows.extend(_result_rows(out))
            summary_rows.extend(_summary_rows(out))
            status_rows.append((out.run_id, "ok", ""))
        else:
            last = out.error.strip().splitlines()[-1] if out.error else "unknown error"
            status_rows.append((out.run_id, "failed", last))
    _write_csv(outdir / "results.csv", RESULT_COLUMNS, result_rows)
    _write_csv(outdir / "summary.csv", SUMMARY_COLUMNS, summary_rows)
    _write_csv(outdir / "runs.csv", ("run_id", "status", "message"), status_rows)
    for metric in METRIC_NAMES:
        write_pivot_csv(outdir / f"pivot_{metric}.csv", outputs, metric)
    payload = {"kind": "sweep", "runs": len(outputs),
               "failed": sum(1 for o in outputs if o.result is None)}
    if sweep is not None:
        payload["base"] = asdict(sweep.base)
        payload["rhos"] = list(sweep.rhos)
        payload["taus"] = None if sweep.taus is None else list(sweep.taus)
        payload["seeds"] = list(sweep.seeds)
    _manifest(outdir, payload)
