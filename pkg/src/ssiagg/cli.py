"""Command-line front end: ``ssiagg run`` and ``ssiagg inspect``.

Exit codes: 0 when every assertion holds, 1 on an assertion failure, 2 on a
configuration error or an unreadable trace.
"""

from __future__ import annotations

import argparse
import json
import sys
from collections.abc import Sequence
from pathlib import Path

from . import canonical
from .ledger import TxKind
from .netsim.scenario import ConfigError, bundled_names, run_scenario
from .trace import EventKind, PayloadClass, TraceEvent, filter_events, load_events

EXIT_OK, EXIT_ASSERTION, EXIT_CONFIG = 0, 1, 2

# "τ_e", "tau_e" and "e" all name the endorsement transaction kind
_TX_LETTERS = {
    "p": TxKind.PROPAGATION,
    "u": TxKind.UPDATE,
    "d": TxKind.DELETION,
    "l": TxKind.LOCATION,
    "c": TxKind.COLLECTION,
    "e": TxKind.ENDORSEMENT,
    "s": TxKind.STORAGE,
}


def _tx_alias(value: str) -> TxKind | None:
    for prefix in ("τ_", "tau_", "tx_"):
        if value.startswith(prefix) and value[len(prefix):] in _TX_LETTERS:
            return _TX_LETTERS[value[len(prefix):]]
    try:
        return TxKind(value)
    except ValueError:
        return None


def _write(path: Path, data: object, pretty: bool) -> None:
    if pretty:
        path.write_text(json.dumps(canonical.to_plain(data), indent=2, sort_keys=True) + "\n")
    else:
        path.write_text(canonical.dumps_text(data) + "\n")


def cmd_run(args: argparse.Namespace) -> int:
    try:
        outcome = run_scenario(args.scenario, seed=args.seed, mode=args.mode, strict=args.strict_termination or None)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    report = outcome.report()
    _write(out / "report.json", report, args.pretty)
    outcome.trace.export(out / "trace.jsonl")
    outputs = {
        mode: (result.output.to_dict() if result.output is not None else None)
        for mode, result in outcome.results.items()
    }
    _write(out / "output.json", outputs, args.pretty)
    for mode, run in report["runs"].items():
        states = ", ".join(f"{s.get('name', did)}={s['status']}" + (f"({s['reason']})" if s["reason"] else "") for did, s in run["sources"].items())
        print(f"{mode}: {states}; ledger +{run['ledger_growth']}; output {run['output_sha256'] or '-'}")
    for failure in outcome.failures:
        print(f"ASSERTION FAILED: {failure}", file=sys.stderr)
    return EXIT_OK if outcome.ok else EXIT_ASSERTION


def _describe(event: TraceEvent) -> str:
    step = "-" if event.step is None else str(event.step)
    parts = [f"{event.seq:>5}", f"step={step:>2}", f"{event.kind.value:<7}", event.actor or "-"]
    if event.peer:
        parts.append(f"-> {event.peer}")
    if event.channel:
        parts.append(f"[{event.channel}]")
    if event.payload_class is not None:
        parts.append(f"{event.payload_class.value} {len(event.payload)}B")
    if event.detail:
        parts.append(canonical.dumps_text(event.detail))
    return " ".join(parts)


def cmd_inspect(args: argparse.Namespace) -> int:
    try:
        events = load_events(args.trace)
    except (OSError, ValueError, KeyError, TypeError) as exc:
        print(f"cannot read trace {args.trace}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    kind, tx_kind = args.kind, args.tx_kind
    if kind is not None and kind not in {k.value for k in EventKind}:
        alias = _tx_alias(kind)
        if alias is None:
            print(f"unknown event kind {kind!r}", file=sys.stderr)
            return EXIT_CONFIG
        kind, tx_kind = EventKind.LEDGER.value, alias.value
    elif tx_kind is not None:
        alias = _tx_alias(tx_kind)
        if alias is None:
            print(f"unknown transaction kind {tx_kind!r}", file=sys.stderr)
            return EXIT_CONFIG
        tx_kind = alias.value
    selected = filter_events(
        events, step=args.step, actor=args.actor, payload_class=args.payload_class, kind=kind, tx_kind=tx_kind
    )
    for event in selected:
        print(_describe(event))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ssiagg", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a scenario file or bundled scenario")
    run.add_argument("scenario", help=f"path to a scenario file, or one of: {', '.join(bundled_names())}")
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--out", default="out", help="directory for report.json, trace.jsonl and output.json")
    run.add_argument("--mode", choices=("onchain", "offchain", "both"))
    run.add_argument("--strict-termination", action="store_true", help="end the run on the first excluded source")
    run.add_argument("--pretty", action="store_true", help="indent the JSON files")
    run.set_defaults(func=cmd_run)

    inspect = sub.add_parser("inspect", help="list events of an exported trace")
    inspect.add_argument("trace")
    inspect.add_argument("--step", type=int)
    inspect.add_argument("--actor", help="DID appearing as sender or recipient")
    inspect.add_argument("--payload-class", choices=[c.value for c in PayloadClass])
    inspect.add_argument("--kind", help="event kind, or a transaction kind such as tau_e")
    inspect.add_argument("--tx-kind", help="transaction kind of ledger events")
    inspect.set_defaults(func=cmd_inspect)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
