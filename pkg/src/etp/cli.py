"""Command line interface.

Exit codes: 0 success, 1 usage errors, 2 data errors (bad files, failed
validation, fixture problems). Every report-producing subcommand prints
tab-delimited key/value lines by default, canonical JSON with --json, and
renders bar-chart PNGs next to the delimited output when --figures DIR is
given.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path
from typing import Any

from . import benchgen, harness, reporting
from .canonical import canonical_dumps
from .cards import CardError, parse_card, validate_value
from .execution import CountingClock, ExecutionEngine, ExecutionError
from .fixtures import (
    FixtureError,
    build_mock_tables,
    load_fixture_dir,
    packaged_fixture_root,
    packaged_trajectory_dir,
)
from .metrics import MetricReport, MetricsError
from .registry import RegistryError, load_registry_file
from .server import ServerError, serve
from .toolchain import ChainError
from .wire import ADDR_ENV_VAR, DEFAULT_ADDR, FrameError

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2

_DATA_ERRORS = (
    CardError,
    RegistryError,
    ChainError,
    MetricsError,
    ExecutionError,
    FixtureError,
    benchgen.GenerationError,
    harness.HarnessError,
    reporting.ReportingError,
    ServerError,
    FrameError,
    OSError,
    json.JSONDecodeError,
    ValueError,
)


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # usage problems exit 1, not argparse's 2
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _packaged_registry_path() -> Path:
    return packaged_fixture_root() / "registry_112.json"


def _load_registry(path: str | None):
    return load_registry_file(path or _packaged_registry_path())


def _load_fixtures(path: str | None):
    return load_fixture_dir(path or packaged_trajectory_dir())


def _emit_report(report: Any, args) -> None:
    if getattr(args, "json", False):
        body = report.to_json() if isinstance(report, MetricReport) else report
        text = canonical_dumps(body)
    else:
        text = "\n".join(reporting.render_report_lines(report))
    out = getattr(args, "out", None)
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text + "\n", encoding="utf-8")
        print(f"wrote report to {out}")
    else:
        print(text)
    figures_dir = getattr(args, "figures", None)
    if figures_dir:
        from .figures import render_report_figures

        prefix = getattr(args, "task", None) or "report"
        written = render_report_figures(report, figures_dir, prefix)
        for path in written:
            print(f"wrote figure {path}")


# --------------------------------------------------------------------------
# subcommands

def _cmd_serve(args) -> int:
    registry = _load_registry(args.registry)
    engine = ExecutionEngine(registry.snapshot())
    if not args.no_mocks:
        fixtures = _load_fixtures(args.fixtures)
        for tool_id, table in build_mock_tables(fixtures).items():
            engine.register_mock_executor(tool_id, table)
    server = serve(args.addr, registry, engine=engine,
                   allow_mutation=args.allow_mutation)
    print(f"listening on {server.addr}", flush=True)
    try:
        while True:
            time.sleep(0.2)
    except KeyboardInterrupt:
        pass
    finally:
        server.close()
    return EXIT_OK


def _cmd_validate_card(args) -> int:
    raw = Path(args.card).read_text(encoding="utf-8")
    try:
        card = parse_card(raw)
    except CardError as exc:
        if args.json:
            print(canonical_dumps({"ok": False, "error": str(exc)}))
        else:
            print(f"invalid card: {exc}", file=sys.stderr)
        return EXIT_DATA
    if args.query:
        query = json.loads(Path(args.query).read_text(encoding="utf-8"))
        schema = card.output_schema if args.direction == "output" else card.input_schema
        report = validate_value(query, schema)
        if args.json:
            print(canonical_dumps({"ok": report.ok, "tool_id": card.tool_id,
                                   "violations": report.to_json()}))
        elif report.ok:
            print(f"{card.tool_id}: query valid")
        else:
            for violation in report.violations:
                print(f"{violation.path or '/'}: {violation.message}",
                      file=sys.stderr)
        return EXIT_OK if report.ok else EXIT_DATA
    if args.json:
        print(canonical_dumps({"ok": True, "tool_id": card.tool_id}))
    else:
        print(f"{card.tool_id}: card valid")
    return EXIT_OK


def _cmd_bench_gen(args) -> int:
    fixtures = _load_fixtures(args.fixtures)
    registry = _load_registry(args.registry).snapshot()
    dataset = benchgen.generate(args.task, fixtures, registry,
                                n=args.n, seed=args.seed)
    samples_path, gold_path = benchgen.write_dataset(dataset, args.out)
    print(f"wrote {len(dataset.samples)} samples to {samples_path}")
    print(f"wrote gold sidecar to {gold_path}")
    if args.report:
        report = benchgen.dataset_report(dataset.samples, dataset.golds)
        Path(args.report).parent.mkdir(parents=True, exist_ok=True)
        Path(args.report).write_text(canonical_dumps(report) + "\n",
                                     encoding="utf-8")
        print(f"wrote dataset report to {args.report}")
    return EXIT_OK


def _cmd_bench_score(args) -> int:
    preds = benchgen.read_jsonl(args.pred)
    golds = benchgen.read_jsonl(args.gold)
    report = reporting.score_predictions(args.task, preds, golds)
    _emit_report(report, args)
    return EXIT_OK


def _cmd_report(args) -> int:
    samples = benchgen.read_jsonl(args.samples)
    golds = benchgen.read_jsonl(args.gold)
    report = benchgen.dataset_report(samples, golds)
    _emit_report(report, args)
    return EXIT_OK


def _cmd_run_episode(args) -> int:
    fixtures = _load_fixtures(args.fixtures)
    registry = _load_registry(args.registry).snapshot()
    if args.episodes != ["all"]:
        wanted = set(args.episodes)
        missing = wanted - {f.episode_id for f in fixtures}
        if missing:
            raise FixtureError(f"unknown episodes: {sorted(missing)}")
        fixtures = [f for f in fixtures if f.episode_id in wanted]

    if args.agent == "oracle":
        agent = harness.make_oracle_agent()
    else:
        agent = harness.make_noisy_agent(registry, tuple(args.rates),
                                         seed=args.seed)

    engine = None
    if args.deterministic:
        counter = iter(range(1, 10 ** 9))
        engine = ExecutionEngine(
            registry,
            clock=CountingClock(start=0, step=10),
            session_id_factory=lambda: f"s-{next(counter):06d}",
        )
        for tool_id, table in build_mock_tables(fixtures).items():
            engine.register_mock_executor(tool_id, table)

    traces = harness.run_suite(
        fixtures, registry, agent,
        engine=engine, passes=args.passes,
        check_state=not args.no_state_check,
    )
    path = harness.write_traces(traces, args.out)
    rows = sum(len(t.steps) for t in traces)
    print(f"wrote {rows} step rows covering {len(traces)} episode runs to {path}")
    return EXIT_OK


def _cmd_score_trace(args) -> int:
    rows = harness.load_trace_rows(args.trace)
    chain_specs = None
    if not args.no_chain:
        fixtures = _load_fixtures(args.fixtures)
        registry = _load_registry(args.registry).snapshot()
        chain_specs = harness.build_chain_specs(fixtures, registry)
    report = harness.score_trace_rows(rows, chain_specs=chain_specs)
    _emit_report(report, args)
    return EXIT_OK


# --------------------------------------------------------------------------

def build_parser() -> _Parser:
    parser = _Parser(prog="etp", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True,
                               parser_class=_Parser)

    p = sub.add_parser("serve",
                       help="run a tool server over the wire protocol")
    p.add_argument("--addr", default=os.environ.get(ADDR_ENV_VAR, DEFAULT_ADDR),
                   help=f"host:port (default ${ADDR_ENV_VAR} or {DEFAULT_ADDR})")
    p.add_argument("--registry", help="registry JSON file (default: bundled pack)")
    p.add_argument("--fixtures", help="trajectory dir for mock outputs")
    p.add_argument("--no-mocks", action="store_true",
                   help="serve without mock executors")
    p.add_argument("--allow-mutation", action="store_true",
                   help="enable register/deregister methods")
    p.set_defaults(func=_cmd_serve)

    p = sub.add_parser("validate-card",
                       help="validate a tool card file")
    p.add_argument("card")
    p.add_argument("--query", help="JSON file to validate against the card")
    p.add_argument("--direction", choices=["input", "output"], default="input")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=_cmd_validate_card)

    bench = sub.add_parser("bench",
                           help="benchmark dataset commands")
    bench_sub = bench.add_subparsers(dest="bench_command", required=True,
                                     parser_class=_Parser)

    p = bench_sub.add_parser("gen",
                             help="generate a task dataset with gold sidecar")
    p.add_argument("--task", choices=benchgen.TASKS, required=True)
    p.add_argument("--out", required=True, help="samples JSONL path")
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--fixtures")
    p.add_argument("--registry")
    p.add_argument("--report", help="also write a dataset report JSON")
    p.set_defaults(func=_cmd_bench_gen)

    p = bench_sub.add_parser("score",
                             help="score a prediction file against gold")
    p.add_argument("--task", choices=benchgen.TASKS, required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--gold", required=True)
    p.add_argument("--out", help="write the report here instead of stdout")
    p.add_argument("--figures", help="directory for rendered figures")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=_cmd_bench_score)

    p = sub.add_parser("report",
                       help="dataset composition report")
    p.add_argument("--samples", required=True)
    p.add_argument("--gold", required=True)
    p.add_argument("--out")
    p.add_argument("--figures")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=_cmd_report)

    p = sub.add_parser("run-episode",
                       help="replay fixture episodes with a scripted agent")
    p.add_argument("--episodes", nargs="+", default=["all"],
                   help="episode ids, or 'all'")
    p.add_argument("--agent", choices=["oracle", "noisy"], default="oracle")
    p.add_argument("--rates", nargs=5, type=float, metavar="R",
                   default=[0.2, 0.1, 0.1, 0.1, 0.1],
                   help="noisy agent slot rates")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--passes", type=int, default=1)
    p.add_argument("--deterministic", action="store_true",
                   help="counting clock and sequential session ids")
    p.add_argument("--no-state-check", action="store_true",
                   help="skip precondition gating during invocation")
    p.add_argument("--fixtures")
    p.add_argument("--registry")
    p.add_argument("--out", required=True, help="trace JSONL path")
    p.set_defaults(func=_cmd_run_episode)

    p = sub.add_parser("score-trace",
                       help="score an episode trace across all axes")
    p.add_argument("trace")
    p.add_argument("--fixtures")
    p.add_argument("--registry")
    p.add_argument("--no-chain", action="store_true",
                   help="skip chain scoring (no fixture lookup)")
    p.add_argument("--out")
    p.add_argument("--figures")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=_cmd_score_trace)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _DATA_ERRORS as exc:
        print(f"etp: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
