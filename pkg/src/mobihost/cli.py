"""Command-line entry point: ``mobihost run|validate|query|snapshot|restore``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .adverts import dump_caches
from .context import ClientContext, ContextProfile
from .discovery import Query
from .errors import ConfigInvalid, MobiHostError
from .mediation import Simulation, restore_caches, run_scenario, snapshot_caches
from .scenario import ScenarioConfig, parse_profile, parse_signature, load_scenario


def _emit(record: dict) -> None:
    print(json.dumps(record, sort_keys=True, separators=(",", ":")))


def _load(args) -> ScenarioConfig:
    config = load_scenario(args.scenario)
    if getattr(args, "seed", None) is not None:
        config.seed = args.seed
    if getattr(args, "ticks", None) is not None:
        config.ticks = args.ticks
    return config


def cmd_run(args) -> int:
    result = run_scenario(_load(args))
    if args.out:
        out = result.write(args.out)
        print(f"wrote outputs to {out}", file=sys.stderr)
    else:
        sys.stdout.write(result.trace_lines())
    return 0


def cmd_validate(args) -> int:
    config = load_scenario(args.scenario)
    _emit({
        "ok": True,
        "peers": len(config.topology["peers"]),
        "services": len(config.services),
        "queries": len(config.queries),
        "ticks": config.ticks,
    })
    return 0


def _client_from_file(path: str | None, ontology) -> ClientContext:
    if path is None:
        return ClientContext(ContextProfile())
    doc = json.loads(Path(path).read_text())
    return ClientContext(
        parse_profile(doc.get("client", {}), "context.client"),
        parse_signature(doc.get("requested", {}), "context.requested", ontology),
    )


def cmd_query(args) -> int:
    config = _load(args)
    sim = Simulation(config)
    sim.run_until(args.at_tick)
    sim.housekeeping()
    query = Query(
        "cli",
        args.keywords,
        group_filter=args.group,
        search_wsdl=args.wsdl,
        hop_budget=args.hop_budget or config.params.hop_budget,
        max_results=config.params.max_results,
    )
    trace = sim.execute_query(args.origin, query, _client_from_file(args.context, config.ontology))
    for rec in trace.final_records():
        _emit(rec)
    _emit({"trace": trace.to_record()})
    return 0


def cmd_snapshot(args) -> int:
    sim = Simulation(_load(args))
    sim.run_until(args.at_tick + 1)
    snapshot_caches(sim.overlay, args.out)
    print(f"wrote snapshot of {len(sim.overlay.peers)} caches to {args.out}", file=sys.stderr)
    return 0


def cmd_restore(args) -> int:
    caches = restore_caches(args.file)
    for pid in sorted(caches):
        _emit({"peer": pid.value, "entries": len(caches[pid])})
    if args.check and dump_caches(caches) != Path(args.file).read_bytes():
        print("snapshot is not in canonical form", file=sys.stderr)
        return 1
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mobihost", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a scenario end to end")
    p.add_argument("scenario")
    p.add_argument("--seed", type=int)
    p.add_argument("--ticks", type=int)
    p.add_argument("--out", help="directory for line-delimited outputs")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("validate", help="validate a scenario file")
    p.add_argument("scenario")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("query", help="one-shot pipeline query against the state at a tick")
    p.add_argument("scenario")
    p.add_argument("--at-tick", type=int, required=True)
    p.add_argument("--origin", required=True)
    p.add_argument("--keywords", required=True)
    p.add_argument("--group")
    p.add_argument("--wsdl", action="store_true", help="extend keyword matching into WSDL text")
    p.add_argument("--hop-budget", type=int)
    p.add_argument("--context", help="JSON file with 'client' profile and 'requested' signature")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("snapshot", help="persist every peer cache after a tick")
    p.add_argument("scenario")
    p.add_argument("--at-tick", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_snapshot)

    p = sub.add_parser("restore", help="load a cache snapshot and summarize it")
    p.add_argument("file")
    p.add_argument("--check", action="store_true", help="fail unless the file is canonical")
    p.set_defaults(func=cmd_restore)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigInvalid as exc:
        _emit(exc.to_record())
        return 2
    except MobiHostError as exc:
        _emit({"error": type(exc).__name__, "message": str(exc)})
        return 1


if __name__ == "__main__":
    sys.exit(main())
