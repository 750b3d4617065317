"""Command-line surface: ask one question, run a benchmark, inspect traces,
and price a finished run. Credentials come from environment variables only
(TRANSLATOR_API_KEY / REASONER_API_KEY); everything else is config or flags.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
import uuid
from pathlib import Path

from .backend import LiveBackend
from .bench import (
    EpisodeSetup,
    load_dataset,
    render_ablation_table,
    render_report,
    run_benchmark,
)
from .costs import CostLedger, PriceTable, format_usd, total_cost
from .engine import RunConfig, Task, run_episode
from .media import load_image
from .prompts import check_registry_closure
from .tools.builtin import standard_registry
from .tools.sandbox import DEFAULT_RUNNER_COMMAND, ProcessSandboxClient
from .trace import TraceStore, replay
from .reasoner import ReasonerAgent
from .translator import TranslatorAgent

DEFAULT_CONFIG = {
    "translator": {"base_url": "http://localhost:8000/v1", "model": "qwen2.5-vl-3b"},
    "reasoner": {"base_url": "http://localhost:8001/v1", "model": "qwen3-8b"},
    "max_iters": 3,
    "max_steps_translator": 3,
    "max_steps_reasoner": 3,
    "tau_t": 0.9,
    "tau_r": 0.9,
    "response_token_limit": 1024,
    "temperature": 0.0,
    "runs_dir": "runs",
    "sandbox_command": list(DEFAULT_RUNNER_COMMAND),
}

TRANSLATOR_KEY_ENV = "TRANSLATOR_API_KEY"
REASONER_KEY_ENV = "REASONER_API_KEY"


def load_config(path: str | None) -> dict:
    config = dict(DEFAULT_CONFIG)
    if path:
        config.update(json.loads(Path(path).read_text(encoding="utf-8")))
    return config


def build_run_config(config: dict, max_iters: int | None = None) -> RunConfig:
    return RunConfig(
        translator_model=config["translator"]["model"],
        reasoner_model=config["reasoner"]["model"],
        max_iters=max_iters or config["max_iters"],
        max_steps_translator=config["max_steps_translator"],
        max_steps_reasoner=config["max_steps_reasoner"],
        tau_t=config["tau_t"],
        tau_r=config["tau_r"],
        response_token_limit=config["response_token_limit"],
        temperature=config["temperature"],
        translator_base_url=config["translator"]["base_url"],
        reasoner_base_url=config["reasoner"]["base_url"],
    )


def build_live_setup(config: dict, run_config: RunConfig) -> EpisodeSetup:
    registry = standard_registry()
    check_registry_closure(registry)
    retry = run_config.retry
    translator = TranslatorAgent(
        backend=LiveBackend(run_config.translator_base_url, api_key_env=TRANSLATOR_KEY_ENV),
        model=run_config.translator_model,
        registry=registry,
        retry=retry,
        max_output_tokens=run_config.response_token_limit,
        temperature=run_config.temperature,
    )
    reasoner = ReasonerAgent(
        backend=LiveBackend(run_config.reasoner_base_url, api_key_env=REASONER_KEY_ENV),
        model=run_config.reasoner_model,
        registry=registry,
        retry=retry,
        max_output_tokens=run_config.response_token_limit,
        temperature=run_config.temperature,
    )
    sandbox = ProcessSandboxClient(tuple(config["sandbox_command"]))
    return EpisodeSetup(translator, reasoner, registry, sandbox)


def new_run_id() -> str:
    return time.strftime("%Y%m%d-%H%M%S") + "-" + uuid.uuid4().hex[:6]


def parse_options(pairs: list[str]) -> tuple:
    options = []
    for pair in pairs:
        label, _, text = pair.partition(":")
        if not label or not text:
            raise SystemExit(f"option must look like LABEL:text, got {pair!r}")
        options.append((label, text))
    return tuple(options)


def ledger_from_trace(events) -> CostLedger:
    ledger = CostLedger()
    for event in events:
        if event.kind != "backend_call":
            continue
        payload = event.payload
        ledger.record(
            model=payload["model"],
            outer_iteration=payload["outer_iteration"],
            input_tokens=payload["input_tokens"],
            output_tokens=payload["output_tokens"],
            approximate=payload.get("approximate", False),
        )
    return ledger


def cmd_ask(args) -> int:
    config = load_config(args.config)
    run_config = build_run_config(config, args.max_iters)
    setup = build_live_setup(config, run_config)
    runs_dir = Path(args.runs_dir or config["runs_dir"])
    run_id = args.run_id or new_run_id()
    store = TraceStore(runs_dir, run_id)
    task = Task(
        task_id=args.task_id,
        question=args.question,
        options=parse_options(args.options or []),
        image=load_image(args.image),
    )
    ledger = CostLedger()
    outcome = run_episode(
        task,
        run_config,
        setup.translator,
        setup.reasoner,
        setup.toolbox,
        trace_store=store,
        ledger=ledger,
        sandbox=setup.sandbox,
    )
    print(f"answer: {outcome.answer.normalized}")
    print(f"confidence: {outcome.answer.confidence}")
    print(f"reasoning: {outcome.answer.reasoning}")
    print(f"outer iterations used: {outcome.outer_iterations_used}  forced: {outcome.forced}")
    print(f"trace: {store.episode_path(task.task_id)}")
    if args.prices:
        cost = total_cost(ledger, PriceTable.from_file(args.prices))
        print(
            f"cost (USD): input {format_usd(cost.input_usd)}  "
            f"output {format_usd(cost.output_usd)}  total {format_usd(cost.total_usd)}"
        )
    return 0


def cmd_bench(args) -> int:
    config = load_config(args.config)
    run_config = build_run_config(config)
    records = load_dataset(args.dataset)
    prices = PriceTable.from_file(args.prices) if args.prices else None
    out_dir = Path(args.out or config["runs_dir"])
    run_id = args.run_id or new_run_id()
    ablate = [int(v) for v in args.ablate_iters.split(",")] if args.ablate_iters else None

    def store_factory(max_iters: int) -> TraceStore:
        return TraceStore(out_dir, f"{run_id}-iters{max_iters}")

    reports = run_benchmark(
        records,
        run_config,
        lambda record, cfg: build_live_setup(config, cfg),
        parallelism=args.parallelism,
        ablate_iters=ablate,
        prices=prices,
        trace_store_factory=store_factory,
    )
    for report in reports:
        print(f"--- max outer iterations = {report.max_iters} ---")
        print(render_report(report))
        print()
        summary_path = out_dir / f"{run_id}-iters{report.max_iters}" / "report.json"
        summary_path.parent.mkdir(parents=True, exist_ok=True)
        summary_path.write_text(json.dumps(report.to_json(), indent=2), encoding="utf-8")
        print(f"summary written to {summary_path}")
    if len(reports) > 1:
        print()
        print(render_ablation_table(reports))
    return 0


def cmd_trace_show(args) -> int:
    runs_dir = Path(args.runs_dir)
    run_dirs = [runs_dir / args.run_id] if args.run_id else sorted(runs_dir.glob("*"))
    for run_dir in run_dirs:
        path = run_dir / f"{args.episode_id}.trace.jsonl"
        if not path.exists():
            continue
        store = TraceStore(runs_dir, run_dir.name)
        events = store.events(args.episode_id)
        for event in events:
            payload = {
                key: value
                for key, value in event.payload.items()
                if key not in ("request", "response")
            }
            print(f"{event.seq:>4} {event.kind:<18} {json.dumps(payload, ensure_ascii=False)}")
        try:
            view = replay(store, args.episode_id)
        except Exception as exc:
            print(f"(replay unavailable: {exc})")
            return 0
        print()
        print(
            f"outcome: answer={view.answer['normalized']!r} "
            f"iterations={view.outer_iterations_used} forced={view.forced} "
            f"snapshots={len(view.snapshots)}"
        )
        return 0
    print(f"episode {args.episode_id!r} not found under {runs_dir}", file=sys.stderr)
    return 1


def cmd_cost_report(args) -> int:
    runs_dir = Path(args.runs_dir)
    store = TraceStore(runs_dir, args.run_id)
    prices = PriceTable.from_file(args.prices)
    grand_total = None
    for episode_id in store.episode_ids():
        ledger = ledger_from_trace(store.events(episode_id))
        cost = total_cost(ledger, prices)
        grand_total = cost if grand_total is None else grand_total + cost
        print(
            f"{episode_id:<24} calls {len(ledger.entries):>3}  "
            f"input {format_usd(cost.input_usd)}  output {format_usd(cost.output_usd)}  "
            f"total {format_usd(cost.total_usd)}"
        )
    if grand_total is None:
        print(f"no episodes found in run {args.run_id!r}", file=sys.stderr)
        return 1
    print(
        f"{'TOTAL':<24} {'':>9}  input {format_usd(grand_total.input_usd)}  "
        f"output {format_usd(grand_total.output_usd)}  total {format_usd(grand_total.total_usd)}"
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="seeingeye",
        description="Two-agent visual question answering with a structured caption channel.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    ask = sub.add_parser("ask", help="run one question end to end")
    ask.add_argument("--image", required=True)
    ask.add_argument("--question", required=True)
    ask.add_argument("--options", nargs="*", metavar="LABEL:text")
    ask.add_argument("--max-iters", type=int, default=None)
    ask.add_argument("--config", default=None)
    ask.add_argument("--prices", default=None)
    ask.add_argument("--runs-dir", default=None)
    ask.add_argument("--run-id", default=None)
    ask.add_argument("--task-id", default="adhoc")
    ask.set_defaults(func=cmd_ask)

    bench = sub.add_parser("bench", help="run a dataset and report accuracy/cost")
    bench.add_argument("--dataset", required=True)
    bench.add_argument("--ablate-iters", default=None, metavar="1,2,3")
    bench.add_argument("--parallelism", type=int, default=1)
    bench.add_argument("--out", default=None)
    bench.add_argument("--config", default=None)
    bench.add_argument("--prices", default=None)
    bench.add_argument("--run-id", default=None)
    bench.set_defaults(func=cmd_bench)

    trace = sub.add_parser("trace", help="inspect persisted traces")
    trace_sub = trace.add_subparsers(dest="trace_command", required=True)
    show = trace_sub.add_parser("show", help="print one episode's events")
    show.add_argument("episode_id")
    show.add_argument("--runs-dir", default="runs")
    show.add_argument("--run-id", default=None)
    show.set_defaults(func=cmd_trace_show)

    cost = sub.add_parser("cost", help="price finished runs")
    cost_sub = cost.add_subparsers(dest="cost_command", required=True)
    report = cost_sub.add_parser("report", help="per-episode and total cost for a run")
    report.add_argument("run_id")
    report.add_argument("--prices", required=True)
    report.add_argument("--runs-dir", default="runs")
    report.set_defaults(func=cmd_cost_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
