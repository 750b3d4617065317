"""Dataset ingestion, batch episode execution, and accuracy/cost reporting.

Records are newline-delimited JSON with image paths resolved relative to the
dataset file. Per-episode failures are recorded as incorrect rows; the batch
itself never crashes. Reports are deterministic: rows are sorted by record id
regardless of worker scheduling.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from decimal import Decimal
from pathlib import Path
from typing import Callable

from .costs import CostLedger, PriceTable, total_cost
from .engine import RunConfig, Task, run_episode
from .media import decode_size, load_image
from .reasoner import FinalAnswer


class DatasetError(ValueError):
    pass


class ParseError(DatasetError):
    def __init__(self, line_number: int, reason: str):
        super().__init__(f"line {line_number}: {reason}")
        self.line_number = line_number


class MissingImage(DatasetError):
    def __init__(self, record_id: str, path: str):
        super().__init__(f"record {record_id}: image unreadable at {path}")
        self.record_id = record_id


class BadGold(DatasetError):
    def __init__(self, record_id: str, gold: str):
        super().__init__(f"record {record_id}: gold {gold!r} not among option labels")
        self.record_id = record_id


@dataclass(frozen=True)
class DatasetRecord:
    id: str
    question: str
    options: tuple
    image_path: Path
    gold: str


def load_dataset(path: str | Path) -> list[DatasetRecord]:
    """Parse and validate a dataset file; a single bad record fails the load."""
    path = Path(path)
    records: list[DatasetRecord] = []
    for line_number, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            raw = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(line_number, f"invalid JSON ({exc})") from None
        try:
            record_id = str(raw["id"])
            question = raw["question"]
            options = tuple((str(label), str(text)) for label, text in raw.get("options", []))
            image_path = (path.parent / raw["image"]).resolve()
            gold = str(raw["gold"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(line_number, f"bad record shape ({exc})") from None
        if not question:
            raise ParseError(line_number, "question must be non-empty")
        if options and gold not in [label for label, _ in options]:
            raise BadGold(record_id, gold)
        try:
            decode_size(load_image(image_path))
        except Exception:
            raise MissingImage(record_id, str(image_path)) from None
        records.append(DatasetRecord(record_id, question, options, image_path, gold))
    return records


def record_to_task(record: DatasetRecord) -> Task:
    return Task(
        task_id=record.id,
        question=record.question,
        options=record.options,
        image=load_image(record.image_path),
    )


def score_prediction(pred: FinalAnswer, gold: str, options) -> bool:
    """MCQ: label equality (fallback text only counts if string-equal).
    Open-ended: case-insensitive, whitespace-normalized exact match."""
    if options:
        return pred.normalized == gold
    squash = lambda s: " ".join(s.split()).lower()
    return squash(pred.normalized) == squash(gold)


@dataclass(frozen=True)
class EpisodeRow:
    id: str
    predicted: str
    gold: str
    correct: bool
    cost_usd: Decimal
    outer_iterations_used: int
    forced: bool
    error: str | None = None


@dataclass(frozen=True)
class BenchReport:
    max_iters: int
    n_total: int
    n_correct: int
    accuracy_percent: float
    cost_mean_usd: Decimal
    cost_median_usd: Decimal
    rows: tuple

    def to_json(self) -> dict:
        return {
            "max_iters": self.max_iters,
            "n_total": self.n_total,
            "n_correct": self.n_correct,
            "accuracy_percent": self.accuracy_percent,
            "cost_mean_usd": str(self.cost_mean_usd),
            "cost_median_usd": str(self.cost_median_usd),
            "rows": [
                {
                    "id": row.id,
                    "predicted": row.predicted,
                    "gold": row.gold,
                    "correct": row.correct,
                    "cost_usd": str(row.cost_usd),
                    "outer_iterations_used": row.outer_iterations_used,
                    "forced": row.forced,
                    "error": row.error,
                }
                for row in self.rows
            ],
        }


# Supplies per-episode agents and toolbox; scripted setups are per-record,
# live setups may return the same shared instances every time.
AgentFactory = Callable[[DatasetRecord, RunConfig], "EpisodeSetup"]


@dataclass
class EpisodeSetup:
    translator: object
    reasoner: object
    toolbox: object
    sandbox: object | None = None


def lower_median(values: list[Decimal]) -> Decimal:
    if not values:
        return Decimal(0)
    ordered = sorted(values)
    return ordered[(len(ordered) - 1) // 2]


def build_report(max_iters: int, rows: list[EpisodeRow]) -> BenchReport:
    rows = sorted(rows, key=lambda row: row.id)
    n_total = len(rows)
    n_correct = sum(1 for row in rows if row.correct)
    accuracy = round(100 * n_correct / n_total, 2) if n_total else 0.0
    costs = [row.cost_usd for row in rows]
    mean = sum(costs, Decimal(0)) / n_total if n_total else Decimal(0)
    return BenchReport(
        max_iters=max_iters,
        n_total=n_total,
        n_correct=n_correct,
        accuracy_percent=accuracy,
        cost_mean_usd=mean,
        cost_median_usd=lower_median(costs),
        rows=tuple(rows),
    )


def run_benchmark(
    records: list[DatasetRecord],
    config: RunConfig,
    agent_factory: AgentFactory,
    *,
    parallelism: int = 1,
    ablate_iters: list[int] | None = None,
    prices: PriceTable | None = None,
    trace_store_factory: Callable[[int], object] | None = None,
) -> list[BenchReport]:
    """Run every record once per ablation value (default: just config.max_iters).

    Returns one report per value, in the given order.
    """
    if parallelism < 1:
        raise ValueError("parallelism must be >= 1")
    values = list(ablate_iters) if ablate_iters else [config.max_iters]
    reports = []
    for max_iters in values:
        run_config = replace(config, max_iters=max_iters)
        store = trace_store_factory(max_iters) if trace_store_factory else None
        rows = _run_batch(records, run_config, agent_factory, parallelism, prices, store)
        reports.append(build_report(max_iters, rows))
    return reports


def _run_batch(records, config, agent_factory, parallelism, prices, trace_store):
    def worker(record: DatasetRecord) -> EpisodeRow:
        ledger = CostLedger()
        try:
            setup = agent_factory(record, config)
            outcome = run_episode(
                record_to_task(record),
                config,
                setup.translator,
                setup.reasoner,
                setup.toolbox,
                trace_store=trace_store,
                ledger=ledger,
                sandbox=setup.sandbox,
            )
        except Exception as exc:
            return EpisodeRow(
                id=record.id,
                predicted="",
                gold=record.gold,
                correct=False,
                cost_usd=_safe_cost(ledger, prices),
                outer_iterations_used=0,
                forced=False,
                error=f"{type(exc).__name__}: {exc}",
            )
        return EpisodeRow(
            id=record.id,
            predicted=outcome.answer.normalized,
            gold=record.gold,
            correct=score_prediction(outcome.answer, record.gold, record.options),
            cost_usd=_safe_cost(ledger, prices),
            outer_iterations_used=outcome.outer_iterations_used,
            forced=outcome.forced,
        )

    if parallelism == 1:
        return [worker(record) for record in records]
    with ThreadPoolExecutor(max_workers=parallelism) as pool:
        return list(pool.map(worker, records))


def _safe_cost(ledger: CostLedger, prices: PriceTable | None) -> Decimal:
    if prices is None:
        return Decimal(0)
    return total_cost(ledger, prices).total_usd


def render_report(report: BenchReport) -> str:
    lines = [
        f"episodes: {report.n_total}   correct: {report.n_correct}   "
        f"accuracy: {report.accuracy_percent:.2f}%",
        f"cost per question (USD): mean {report.cost_mean_usd}  "
        f"median {report.cost_median_usd}",
        "",
        f"{'id':<16} {'pred':<12} {'gold':<12} {'ok':<3} {'iters':<5} "
        f"{'forced':<6} {'cost':<12} error",
    ]
    for row in report.rows:
        lines.append(
            f"{row.id:<16} {row.predicted[:12]:<12} {row.gold[:12]:<12} "
            f"{'y' if row.correct else 'n':<3} {row.outer_iterations_used:<5} "
            f"{'y' if row.forced else 'n':<6} {str(row.cost_usd):<12} {row.error or ''}"
        )
    return "\n".join(lines)


def render_ablation_table(reports: list[BenchReport]) -> str:
    """One accuracy column per ablation value."""
    header_cells = ["max outer iterations"] + [str(r.max_iters) for r in reports]
    accuracy_cells = ["accuracy (%)"] + [f"{r.accuracy_percent:.2f}" for r in reports]
    cost_cells = ["median cost (USD)"] + [str(r.cost_median_usd) for r in reports]
    widths = [
        max(len(row[i]) for row in (header_cells, accuracy_cells, cost_cells))
        for i in range(len(header_cells))
    ]
    render = lambda cells: " | ".join(cell.ljust(width) for cell, width in zip(cells, widths))
    ruler = "-+-".join("-" * width for width in widths)
    return "\n".join([render(header_cells), ruler, render(accuracy_cells), render(cost_cells)])
