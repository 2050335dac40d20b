"""Multi-seed comparison campaigns and their CSV/text tables.

A campaign runs, per seed: both federation strategies, one isolated model per
client, and the merged centralized baseline, all on the same generated
datasets, then scores everything on the global and external test sets. The
summary lists mean and sample standard deviation across seeds.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, replace
from pathlib import Path

from .config import RunConfig
from .data import make_dataset, merge_for_centralized
from .errors import ConfigurationError
from .nn import ParameterVector
from .orchestrator import (
    atomic_write_text,
    baseline_stream,
    run_centralized,
    run_federation,
)
from .strategies import StrategyKind, evaluate, mean_correct_confidence

METRIC_COLUMNS = ("accuracy", "macro_precision", "macro_recall", "macro_f1", "confidence")
TEST_SETS = ("global", "external")


@dataclass(frozen=True)
class ComparisonRow:
    seed: int
    variant: str
    test_set: str
    status: str  # "ok" or "failed"
    metrics: dict[str, float] | None
    error: str = ""


def variant_order(rows: list[ComparisonRow]) -> list[str]:
    locals_ = sorted({r.variant for r in rows if r.variant.startswith("local_client_")})
    tail = [v for v in ("centralized", "fl_fews", "fl_oews") if any(r.variant == v for r in rows)]
    return locals_ + tail


def _score(params: ParameterVector, model, x, y) -> dict[str, float]:
    report = evaluate(params, model, x, y)
    return {
        "accuracy": report.accuracy,
        "macro_precision": report.macro_precision,
        "macro_recall": report.macro_recall,
        "macro_f1": report.macro_f1,
        "confidence": mean_correct_confidence(params, model, x, y),
    }


def run_comparison(cfg: RunConfig, seeds: list[int]) -> list[ComparisonRow]:
    """One ComparisonRow per (seed, variant, test set). A variant that raises
    is recorded as failed for both test sets and the campaign proceeds."""
    if not seeds:
        raise ConfigurationError("comparison needs at least one seed")
    model = cfg.federation.model
    rows: list[ComparisonRow] = []
    for seed in seeds:
        corpus = replace(cfg.corpus, seed=seed)
        clients, evals = make_dataset(corpus, cfg.partition)
        sets = {
            "global": (evals.global_test.x, evals.global_test.y),
            "external": (evals.external_test.x, evals.external_test.y),
        }

        def attempt(variant: str, train_fn) -> None:
            try:
                params = train_fn()
                for name, (x, y) in sets.items():
                    rows.append(
                        ComparisonRow(seed, variant, name, "ok", _score(params, model, x, y))
                    )
            except Exception as exc:
                for name in sets:
                    rows.append(ComparisonRow(seed, variant, name, "failed", None, str(exc)))

        for client in clients:
            attempt(
                f"local_client_{client.client_id}",
                lambda c=client: run_centralized(
                    cfg.baseline, c.train, c.val, model,
                    baseline_stream(seed, tag=c.client_id + 1),
                ).params,
            )
        attempt(
            "centralized",
            lambda: run_centralized(
                cfg.baseline, *merge_for_centralized(clients), model,
                baseline_stream(seed, tag=0),
            ).params,
        )
        for strategy in (StrategyKind.FEWS, StrategyKind.OEWS):
            fed_cfg = replace(cfg.federation, strategy=strategy, master_seed=seed)
            attempt(
                f"fl_{strategy.value}",
                lambda fc=fed_cfg: run_federation(fc, clients, evals)[1],
            )
    return rows


@dataclass(frozen=True)
class SummaryRow:
    variant: str
    test_set: str
    means: dict[str, float]
    sds: dict[str, float]
    ok: int
    failed: int


def _sample_sd(values: list[float], mean: float) -> float:
    if len(values) < 2:
        return 0.0
    return (sum((v - mean) ** 2 for v in values) / (len(values) - 1)) ** 0.5


def summarize(rows: list[ComparisonRow]) -> list[SummaryRow]:
    out = []
    for variant in variant_order(rows):
        for test_set in TEST_SETS:
            group = [r for r in rows if r.variant == variant and r.test_set == test_set]
            if not group:
                continue
            ok = [r for r in group if r.status == "ok"]
            means, sds = {}, {}
            for metric in METRIC_COLUMNS:
                values = [r.metrics[metric] for r in ok]
                means[metric] = sum(values) / len(values) if values else float("nan")
                sds[metric] = _sample_sd(values, means[metric]) if values else float("nan")
            out.append(
                SummaryRow(variant, test_set, means, sds, len(ok), len(group) - len(ok))
            )
    return out


def rows_to_csv(rows: list[ComparisonRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["seed", "variant", "test_set", "status", *METRIC_COLUMNS, "error"])
    for r in rows:
        cells = [str(r.seed), r.variant, r.test_set, r.status]
        if r.metrics is None:
            cells += [""] * len(METRIC_COLUMNS)
        else:
            cells += [f"{r.metrics[m]:.6f}" for m in METRIC_COLUMNS]
        cells.append(r.error)
        writer.writerow(cells)
    return buf.getvalue()


def csv_to_rows(text: str) -> list[ComparisonRow]:
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    expected = ["seed", "variant", "test_set", "status", *METRIC_COLUMNS, "error"]
    if header != expected:
        raise ConfigurationError(f"unexpected comparison CSV header: {header}")
    rows = []
    for cells in reader:
        seed, variant, test_set, status = cells[0], cells[1], cells[2], cells[3]
        metric_cells = cells[4 : 4 + len(METRIC_COLUMNS)]
        metrics = None
        if status == "ok":
            metrics = {m: float(v) for m, v in zip(METRIC_COLUMNS, metric_cells)}
        rows.append(
            ComparisonRow(int(seed), variant, test_set, status, metrics, cells[-1])
        )
    return rows


def summary_to_csv(summaries: list[SummaryRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    header = ["variant", "test_set"]
    for metric in METRIC_COLUMNS:
        header += [f"{metric}_mean", f"{metric}_sd"]
    header += ["runs_ok", "runs_failed"]
    writer.writerow(header)
    for s in summaries:
        cells = [s.variant, s.test_set]
        for metric in METRIC_COLUMNS:
            cells += [f"{s.means[metric]:.6f}", f"{s.sds[metric]:.6f}"]
        cells += [str(s.ok), str(s.failed)]
        writer.writerow(cells)
    return buf.getvalue()


def summary_to_text(summaries: list[SummaryRow]) -> str:
    lines = []
    width = max([len(s.variant) for s in summaries], default=10) + 2
    for test_set in TEST_SETS:
        block = [s for s in summaries if s.test_set == test_set]
        if not block:
            continue
        lines.append(f"{test_set} test set")
        head = "variant".ljust(width) + "".join(m.rjust(22) for m in METRIC_COLUMNS)
        lines.append(head)
        lines.append("-" * len(head))
        for s in block:
            cells = "".join(
                f"{s.means[m]:.6f} ± {s.sds[m]:.6f}".rjust(22) for m in METRIC_COLUMNS
            )
            row = s.variant.ljust(width) + cells
            if s.failed:
                row += f"   ({s.failed} failed)"
            lines.append(row)
        lines.append("")
    return "\n".join(lines)


def write_comparison(
    rows: list[ComparisonRow], run_id: str, out_dir: Path | str
) -> dict[str, Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    summaries = summarize(rows)
    paths = {
        "rows": out_dir / f"{run_id}.compare.csv",
        "summary_csv": out_dir / f"{run_id}.summary.csv",
        "summary_txt": out_dir / f"{run_id}.summary.txt",
    }
    atomic_write_text(paths["rows"], rows_to_csv(rows))
    atomic_write_text(paths["summary_csv"], summary_to_csv(summaries))
    atomic_write_text(paths["summary_txt"], summary_to_text(summaries))
    return paths
