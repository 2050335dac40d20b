"""Federation round loop, centralized baseline, and run logging.

Two round-loop flavors:

* academic: fixed horizon; after every aggregation the server scores the new
  global weights on the pooled global test set.
* industrial: every client scores the incoming global weights on its local
  test split before training; the server averages those reports and stops at
  the first round whose aggregate reaches the halting threshold.

Per-client RNG streams are child streams of the master seed keyed by
(round, client_id), so client execution order or parallelism cannot change
any result.
"""

from __future__ import annotations

import json
import os
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .aggregation import (
    AggregationKind,
    ClientUpdate,
    HaltingCriterion,
    aggregate,
    aggregate_metrics,
    should_halt,
    threshold_met,
)
from .data import ClientDataset, EvalSets, Split
from .errors import ConfigurationError, DataError, ProtocolError, ShapeError
from .nn import (
    MAX_SEED,
    ModelSpec,
    OptimizerConfig,
    ParameterVector,
    init_optimizer,
    init_parameters,
    train_epoch,
)
from .strategies import (
    LocalRunResult,
    MetricsReport,
    SelectionMetric,
    StrategyKind,
    evaluate,
    mean_correct_confidence,
    run_local,
)

METRIC_NAMES = ("accuracy", "macro_precision", "macro_recall", "macro_f1")


class Workflow(str, Enum):
    ACADEMIC = "academic"
    INDUSTRIAL = "industrial"


def client_stream(master_seed: int, round_index: int, client_id: int) -> np.random.Generator:
    """Independent generator for one client in one round."""
    seq = np.random.SeedSequence(master_seed, spawn_key=(1, round_index, client_id))
    return np.random.default_rng(seq)


def baseline_stream(master_seed: int, tag: int = 0) -> np.random.Generator:
    """Independent generator for a non-federated training run; distinct tags
    give distinct streams (e.g. one per local-client baseline)."""
    seq = np.random.SeedSequence(master_seed, spawn_key=(2, tag))
    return np.random.default_rng(seq)


@dataclass(frozen=True)
class FederationConfig:
    model: ModelSpec
    client_count: int = 4
    rounds: int = 5
    local_epochs: int = 15
    strategy: StrategyKind = StrategyKind.FEWS
    selection_metric: SelectionMetric = SelectionMetric.MACRO_F1
    aggregation: AggregationKind = AggregationKind.PLAIN
    workflow: Workflow = Workflow.ACADEMIC
    halting: HaltingCriterion | None = None
    optimizer: OptimizerConfig = OptimizerConfig()
    master_seed: int = 0
    parallel: bool = True

    def __post_init__(self) -> None:
        for name, low in (("client_count", 1), ("rounds", 1), ("local_epochs", 1)):
            if getattr(self, name) < low:
                raise ConfigurationError(f"{name} must be >= {low}, got {getattr(self, name)}")
        if not 0 <= self.master_seed <= MAX_SEED:
            raise ConfigurationError("master_seed must fit in 64 unsigned bits")
        object.__setattr__(self, "strategy", StrategyKind(self.strategy))
        object.__setattr__(self, "selection_metric", SelectionMetric(self.selection_metric))
        object.__setattr__(self, "aggregation", AggregationKind(self.aggregation))
        object.__setattr__(self, "workflow", Workflow(self.workflow))
        if self.workflow is Workflow.INDUSTRIAL and self.halting is None:
            raise ConfigurationError("industrial workflow requires a halting criterion")


@dataclass(frozen=True)
class RoundRecord:
    round: int
    global_metrics: MetricsReport | None
    per_client_metrics: tuple[MetricsReport, ...]
    aggregated_metrics: MetricsReport | None
    selected_epochs: tuple[int, ...]
    halted: bool


def _run_clients(
    cfg: FederationConfig,
    clients: list[ClientDataset],
    incoming: ParameterVector,
    round_index: int,
) -> list[LocalRunResult]:
    def job(client: ClientDataset) -> LocalRunResult:
        rng = client_stream(cfg.master_seed, round_index, client.client_id)
        return run_local(
            incoming,
            cfg.model,
            client,
            cfg.optimizer,
            cfg.local_epochs,
            cfg.strategy,
            rng,
            cfg.selection_metric,
        )

    if cfg.parallel and len(clients) > 1:
        with ThreadPoolExecutor(max_workers=len(clients)) as pool:
            futures = [pool.submit(job, c) for c in clients]
            results = []
            for client, fut in zip(clients, futures):
                try:
                    results.append(fut.result())
                except Exception as exc:
                    raise ProtocolError(
                        f"client {client.client_id} failed in round {round_index}: {exc}"
                    ) from exc
            return results
    results = []
    for client in clients:
        try:
            results.append(job(client))
        except Exception as exc:
            raise ProtocolError(
                f"client {client.client_id} failed in round {round_index}: {exc}"
            ) from exc
    return results


def run_federation(
    cfg: FederationConfig, clients: list[ClientDataset], evals: EvalSets
) -> tuple[list[RoundRecord], ParameterVector]:
    """Execute the round loop; returns one record per executed round plus the
    final aggregated weights."""
    if len(clients) != cfg.client_count:
        raise ConfigurationError(
            f"config says {cfg.client_count} clients, got {len(clients)} datasets"
        )
    dim = clients[0].train.x.shape[1]
    if dim != cfg.model.feature_dim:
        raise ShapeError(
            f"model expects {cfg.model.feature_dim} features, data has {dim}"
        )
    industrial = cfg.workflow is Workflow.INDUSTRIAL
    horizon = cfg.halting.max_rounds if industrial else cfg.rounds

    params = init_parameters(cfg.model)
    records: list[RoundRecord] = []
    for t in range(1, horizon + 1):
        incoming_reports: tuple[MetricsReport, ...] = ()
        if industrial:
            incoming_reports = tuple(
                evaluate(params, cfg.model, c.test.x, c.test.y) for c in clients
            )
        results = _run_clients(cfg, clients, params, t)
        updates = [
            ClientUpdate(
                client_id=c.client_id,
                params=r.selected_params,
                train_sample_count=r.train_sample_count,
                local_metrics=rep,
            )
            for c, r, rep in zip(
                clients, results, incoming_reports or [None] * len(clients)
            )
        ]
        params = aggregate(updates, cfg.aggregation)
        selected = tuple(r.selected_epoch for r in results)

        if industrial:
            agg = aggregate_metrics(incoming_reports)
            records.append(
                RoundRecord(
                    round=t,
                    global_metrics=None,
                    per_client_metrics=incoming_reports,
                    aggregated_metrics=agg,
                    selected_epochs=selected,
                    halted=threshold_met(agg, cfg.halting),
                )
            )
            if should_halt(agg, cfg.halting, t):
                break
        else:
            global_report = evaluate(
                params, cfg.model, evals.global_test.x, evals.global_test.y
            )
            # local val reports at each client's selected epoch, for diagnostics
            per_client = tuple(r.per_epoch_val[r.selected_epoch - 1] for r in results)
            records.append(
                RoundRecord(
                    round=t,
                    global_metrics=global_report,
                    per_client_metrics=per_client,
                    aggregated_metrics=None,
                    selected_epochs=selected,
                    halted=False,
                )
            )
    return records, params


@dataclass(frozen=True)
class BaselineConfig:
    max_epochs: int = 100
    patience: int = 30
    optimizer: OptimizerConfig = OptimizerConfig()

    def __post_init__(self) -> None:
        if self.max_epochs < 1:
            raise ConfigurationError(f"max_epochs must be >= 1, got {self.max_epochs}")
        if not 1 <= self.patience <= self.max_epochs:
            raise ConfigurationError(
                f"patience must be in 1..max_epochs, got {self.patience}"
            )


@dataclass(frozen=True)
class CentralizedResult:
    params: ParameterVector
    best_epoch: int
    epochs_run: int
    trace: tuple[float, ...]
    per_epoch_val: tuple[MetricsReport, ...]


def run_centralized(
    bcfg: BaselineConfig,
    train: Split,
    val: Split,
    model: ModelSpec,
    rng: np.random.Generator,
) -> CentralizedResult:
    """Single-model baseline on pooled data: train up to max_epochs, stop
    after `patience` consecutive epochs without a strict val macro-F1
    improvement, return the best epoch's snapshot."""
    if len(train) == 0 or len(val) == 0:
        raise DataError("centralized baseline needs nonempty train and val splits")
    params = init_parameters(model)
    state = init_optimizer(params, bcfg.optimizer)
    best_params = params
    best_score = -np.inf
    best_epoch = 0
    stale = 0
    trace: list[float] = []
    reports: list[MetricsReport] = []
    epochs_run = 0
    for epoch in range(1, bcfg.max_epochs + 1):
        params, state = train_epoch(params, model, state, train.x, train.y, rng)
        report = evaluate(params, model, val.x, val.y)
        reports.append(report)
        trace.append(report.macro_f1)
        epochs_run = epoch
        if report.macro_f1 > best_score:
            best_score = report.macro_f1
            best_params = params
            best_epoch = epoch
            stale = 0
        else:
            stale += 1
            if stale >= bcfg.patience:
                break
    return CentralizedResult(
        params=best_params,
        best_epoch=best_epoch,
        epochs_run=epochs_run,
        trace=tuple(trace),
        per_epoch_val=tuple(reports),
    )


@dataclass(frozen=True)
class FinalReport:
    global_test: MetricsReport
    external_test: MetricsReport
    per_client: tuple[MetricsReport, ...]
    confidence_global: float
    confidence_external: float


def evaluate_final(
    params: ParameterVector,
    model: ModelSpec,
    evals: EvalSets,
    clients: list[ClientDataset],
) -> FinalReport:
    """Score one trained model everywhere it matters: pooled global test,
    shifted external test, each client's local test, plus mean softmax
    confidence on correct predictions for both shared sets."""
    return FinalReport(
        global_test=evaluate(params, model, evals.global_test.x, evals.global_test.y),
        external_test=evaluate(params, model, evals.external_test.x, evals.external_test.y),
        per_client=tuple(evaluate(params, model, c.test.x, c.test.y) for c in clients),
        confidence_global=mean_correct_confidence(
            params, model, evals.global_test.x, evals.global_test.y
        ),
        confidence_external=mean_correct_confidence(
            params, model, evals.external_test.x, evals.external_test.y
        ),
    )


def atomic_write_text(path: Path | str, text: str) -> None:
    """Write via a sibling temp file and rename, so readers never observe a
    half-written file."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def round_metrics(record: RoundRecord) -> dict[str, float]:
    """The scalar metrics a round is judged by: global-test metrics in the
    academic flow, aggregated client metrics in the industrial flow."""
    report = record.global_metrics if record.global_metrics is not None else record.aggregated_metrics
    if report is None:
        raise ProtocolError(f"round {record.round} carries no metrics")
    return {name: round(report.scalar(name), 6) for name in METRIC_NAMES}


def write_metrics_logs(
    records: list[RoundRecord],
    run_id: str,
    workflow: Workflow,
    strategy: StrategyKind,
    out_dir: Path | str,
) -> tuple[Path, Path]:
    """Persist one structured JSON line and one human-readable text line per
    round. Returns (jsonl path, txt path). Output contains no timestamps, so
    identical runs produce identical bytes."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    jsonl_path = out_dir / f"{run_id}.metrics.jsonl"
    txt_path = out_dir / f"{run_id}.metrics.txt"

    json_lines = []
    txt_lines = []
    for r in records:
        metrics = round_metrics(r)
        json_lines.append(
            json.dumps(
                {
                    "run_id": run_id,
                    "round": r.round,
                    "workflow": workflow.value,
                    "strategy": strategy.value,
                    "metrics": metrics,
                    "selected_epochs": list(r.selected_epochs),
                    "halted": r.halted,
                },
                sort_keys=True,
            )
        )
        cells = " ".join(f"{name}={metrics[name]:.6f}" for name in METRIC_NAMES)
        epochs = ",".join(str(e) for e in r.selected_epochs)
        txt_lines.append(
            f"round {r.round} [{workflow.value}/{strategy.value}] {cells} "
            f"selected_epochs={epochs} halted={'yes' if r.halted else 'no'}"
        )
    atomic_write_text(jsonl_path, "\n".join(json_lines) + "\n")
    atomic_write_text(txt_path, "\n".join(txt_lines) + "\n")
    return jsonl_path, txt_path
