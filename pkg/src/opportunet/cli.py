"""Command-line entry point: ``opportunet {run,sweep,validate,replay}``."""

from __future__ import annotations

import argparse
import csv
import io
import logging
import sys
from pathlib import Path

from .config import ConfigError, default_document, parse_config
from .engine import InvariantViolation, SweepError, run, sweep
from .link import contacts_from_csv
from .metrics import emit_tables
from .routing import ROUTERS, Message
from .world import MapError

log = logging.getLogger("opportunet")

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_INVARIANT = 3


def _load_doc(path):
    if path is None:
        return default_document()
    return parse_config(Path(path).read_text(encoding="utf-8"))


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _router_list(text: str) -> list[str]:
    names = [x.strip() for x in text.split(",") if x.strip()]
    bad = [n for n in names if n not in ROUTERS]
    if bad:
        raise argparse.ArgumentTypeError(f"unknown router(s): {', '.join(bad)}")
    return names


def run_dir(out: Path, router: str, size: int, seed: int) -> Path:
    return out / f"run_{router}_{size}_{seed}"


def _write_run(out: Path, router, size, seed, events_csv: str, report) -> Path:
    d = run_dir(out, router, size, seed)
    d.mkdir(parents=True, exist_ok=True)
    (d / "events.csv").write_text(events_csv)
    (d / "report.csv").write_text(report.to_csv())
    return d


def read_messages(text: str) -> list[Message]:
    """Message list CSV: ``time,source,destination,size[,id]``."""
    out = []
    rows = list(csv.reader(io.StringIO(text)))
    for lineno, row in enumerate(rows, start=1):
        if not row or row[0].startswith("#") or (lineno == 1 and row[0].strip() == "time"):
            continue
        try:
            t, src, dst, size = float(row[0]), int(row[1]), int(row[2]), int(row[3])
        except (ValueError, IndexError):
            raise ValueError(f"messages line {lineno}: expected time,source,destination,size[,id]") from None
        mid = row[4].strip() if len(row) > 4 and row[4].strip() else f"M{len(out) + 1}"
        out.append(Message(mid, src, dst, size, t))
    return out


def cmd_validate(args) -> int:
    doc = _load_doc(args.config)
    cfg = doc.scenario()
    groups = ", ".join(f"{g.count} {g.name} @ {g.speed:g} m/s" for g in cfg.groups)
    print(f"ok: router={cfg.router} duration={cfg.duration:g}s tick={cfg.tick:g}s groups: {groups}")
    if args.dump:
        sys.stdout.write(doc.to_text())
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = _load_doc(args.config).scenario()
    result = run(cfg)
    out = Path(args.output)
    d = _write_run(out, cfg.router, cfg.traffic.size, cfg.seed, result.events_csv(), result.report)
    if args.contacts:
        (d / "contacts.csv").write_text(result.contacts_csv())
    sys.stdout.write(result.report.to_csv())
    return EXIT_OK


def cmd_sweep(args) -> int:
    doc = _load_doc(args.config)
    out = Path(args.output)
    sizes = args.sizes or [doc["traffic.size"]]
    seeds = args.seeds or [doc["sim.seed"]]
    routers = args.routers or [doc["router"]]

    def save(key, report, events):
        _write_run(out, *key, events, report)

    try:
        result = sweep(doc, sizes, seeds, routers, workers=args.workers, keep_events=True, on_result=save)
    except SweepError as exc:
        if exc.partial.reports:
            emit_tables(exc.partial.reports, out)
            (out / "PARTIAL").write_text(str(exc) + "\n")
        raise
    emit_tables(result.reports, out)
    print(f"{len(result.reports)} runs written to {out}")
    return EXIT_OK


def cmd_replay(args) -> int:
    doc = _load_doc(args.config)
    cfg = doc.scenario()
    contacts = contacts_from_csv(Path(args.trace).read_text(encoding="utf-8"))
    messages = read_messages(Path(args.messages).read_text(encoding="utf-8")) if args.messages else None
    hosts = cfg.n_hosts
    if contacts:
        hosts = max(hosts, max(max(e.a, e.b) for e in contacts) + 1)
    if messages:
        hosts = max(hosts, max(max(m.source, m.destination) for m in messages) + 1)
    result = run(cfg, contacts=contacts, messages=messages, n_hosts=hosts)
    if args.output:
        _write_run(Path(args.output), cfg.router, cfg.traffic.size, cfg.seed, result.events_csv(), result.report)
    sys.stdout.write(result.report.to_csv())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="opportunet", description="Delay-tolerant network routing simulator.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("validate", help="parse and validate a scenario config")
    sp.add_argument("-c", "--config")
    sp.add_argument("--dump", action="store_true", help="print the fully resolved config")
    sp.set_defaults(func=cmd_validate)

    sp = sub.add_parser("run", help="run one simulation")
    sp.add_argument("-c", "--config")
    sp.add_argument("-o", "--output", required=True)
    sp.add_argument("--contacts", action="store_true", help="also export the contact trace")
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("sweep", help="run a router x size x seed grid")
    sp.add_argument("-c", "--config")
    sp.add_argument("-o", "--output", required=True)
    sp.add_argument("--sizes", type=_int_list, help="message sizes in bytes")
    sp.add_argument("--seeds", type=_int_list)
    sp.add_argument("--routers", type=_router_list)
    sp.add_argument("--workers", type=int, help="parallel runs (default: $OPPORTUNET_THREADS or CPU count)")
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("replay", help="drive routing from a contact trace")
    sp.add_argument("-t", "--trace", required=True)
    sp.add_argument("-c", "--config")
    sp.add_argument("-m", "--messages", help="CSV time,source,destination,size[,id]; default: generated traffic")
    sp.add_argument("-o", "--output")
    sp.set_defaults(func=cmd_replay)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, MapError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InvariantViolation as exc:
        print(f"invariant violated: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except SweepError as exc:
        cause = exc.__cause__
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVARIANT if isinstance(cause, InvariantViolation) else EXIT_FAILURE
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
