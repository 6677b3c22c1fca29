"""Command-line front end: ``cps-hier <command> ...``.

Exit codes: 0 success / valid / all matched, 1 domain failure, 2 usage or
I/O error.  ``--format json`` switches every report to a structured form.
Set ``CPS_HIER_COLOR`` to ``auto`` (default), ``always`` or ``never``.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import __version__
from .cps import validate_cps
from .errors import (
    BaseMismatch,
    CpsHierError,
    InvalidMorphism,
    NonPositiveOrder,
    StructureSyntaxError,
    UnknownType,
    ValidationError,
)
from .hierarchy import (
    finitely_terminal_at,
    refine,
    refine_to_fixpoint,
    serialize_point,
    terminal_over,
    unfold,
)
from .measure import format_rational
from .structure import (
    CPS_HEADER,
    PLAYERS,
    MorphismCandidate,
    completeness_status,
    disjoint_union,
    parse_cps,
    parse_structure,
    verify_type_morphism,
)

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class _Usage(Exception):
    pass


class Styler:
    def __init__(self, stream):
        mode = os.environ.get("CPS_HIER_COLOR", "auto").lower()
        if mode == "always":
            self.on = True
        elif mode == "never":
            self.on = False
        else:
            self.on = hasattr(stream, "isatty") and stream.isatty()

    def good(self, s: str) -> str:
        return f"\x1b[32m{s}\x1b[0m" if self.on else s

    def bad(self, s: str) -> str:
        return f"\x1b[31m{s}\x1b[0m" if self.on else s


def _read(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise _Usage(f"cannot read {path}: {exc.strerror or exc}") from None


def _load(path: str):
    try:
        return parse_structure(_read(path))
    except StructureSyntaxError as exc:
        raise _Usage(f"{path}: {exc}") from None


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _table(rows: list, header: list) -> str:
    cols = [header] + [[str(c) for c in r] for r in rows]
    widths = [max(len(r[k]) for r in cols) for k in range(len(header))]
    lines = ["  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in cols]
    return "\n".join(lines) + "\n"


def cmd_validate(args, out, style) -> int:
    text = _read(args.file)
    first = next((ln.split("#", 1)[0].strip() for ln in text.splitlines() if ln.split("#", 1)[0].strip()), "")
    try:
        if first == CPS_HEADER:
            report = validate_cps(parse_cps(text))
            problems = [{"kind": v.kind, "detail": str(v)} for v in report]
            status = None
        else:
            ts = parse_structure(text)
            problems = []
            status = completeness_status(ts)
    except StructureSyntaxError as exc:
        raise _Usage(f"{args.file}: {exc}") from None
    except ValidationError as exc:
        problems = []
        for p in exc.problems:
            rec = {"kind": p.kind, "detail": p.detail}
            for key in ("player", "type", "line"):
                val = getattr(p, key, None)
                if val is not None:
                    rec[key] = val
            problems.append(rec)
        status = None
    if args.format == "json":
        payload = {"valid": not problems, "problems": problems}
        if status is not None:
            payload["complete"] = status.complete
            if not status.complete:
                payload["incomplete_player"] = status.player
        out.write(_dump(payload))
    elif problems:
        out.write(style.bad("INVALID") + "\n")
        for p in problems:
            where = ", ".join(f"{k} {p[k]}" for k in ("player", "type", "line") if k in p)
            out.write(f"  {p['kind']}" + (f" [{where}]" if where else "") + f": {p['detail']}\n")
    else:
        out.write(style.good("OK") + "\n")
        if status is not None:
            verdict = "complete" if status.complete else f"incomplete (player {status.player})"
            out.write(f"completeness: {verdict}\n")
    return EXIT_OK if not problems else EXIT_FAIL


def cmd_unfold(args, out, style) -> int:
    ts = _load(args.file)
    if args.player not in ("1", "2"):
        sys.stderr.write("usage: --player must be 1 or 2\n")
        return EXIT_FAIL
    try:
        hp = unfold(ts, int(args.player), args.type, args.order)
    except (UnknownType, NonPositiveOrder) as exc:
        sys.stderr.write(f"usage: cps-hier unfold FILE --player P --type T --order N (N >= 1): {exc}\n")
        return EXIT_FAIL
    text = serialize_point(hp)
    if args.out:
        try:
            Path(args.out).write_text(text, encoding="utf-8")
        except OSError as exc:
            raise _Usage(f"cannot write {args.out}: {exc.strerror or exc}") from None
    else:
        out.write(text)
    return EXIT_OK


def _partition_records(p) -> list:
    recs = []
    for i in PLAYERS:
        for cid, cell in enumerate(p.cells[i]):
            for t in cell:
                recs.append({"player": i, "type": t, "cell": cid})
    return recs


def cmd_partition(args, out, style) -> int:
    ts = _load(args.file)
    if args.order is None:
        p, depth = refine_to_fixpoint(ts)
        label = f"fixpoint (depth {depth})"
    else:
        if args.order < 0:
            sys.stderr.write("usage: --order must be non-negative\n")
            return EXIT_FAIL
        p, depth = refine(ts, args.order), None
        label = f"order {args.order}"
    if args.format == "json":
        out.write(_dump({"order": args.order, "depth": depth, "records": _partition_records(p)}))
    else:
        out.write(f"partition at {label}\n")
        rows = [[i, cid, " ".join(cell)] for i in PLAYERS for cid, cell in enumerate(p.cells[i])]
        out.write(_table(rows, ["player", "cell", "types"]))
    return EXIT_OK


def _base_diff(exc: BaseMismatch, names=("left", "right")) -> str:
    return (
        f"base mismatch in {exc.component}\n"
        f"  {names[0]}: {exc.left}\n"
        f"  {names[1]}: {exc.right}\n"
    )


def cmd_compare(args, out, style) -> int:
    a, b = _load(args.left), _load(args.right)
    try:
        u = disjoint_union(a, b, tags=("left", "right"))
    except BaseMismatch as exc:
        out.write(_base_diff(exc))
        return EXIT_FAIL
    if args.order is None:
        p, depth = refine_to_fixpoint(u.structure)
    else:
        p, depth = refine(u.structure, args.order), None
    recs = []
    for i in PLAYERS:
        idx = p.cell_index(i)
        for side, emb in (("left", u.embed_a), ("right", u.embed_b)):
            for t, tag in emb[i].items():
                recs.append({"player": i, "side": side, "type": t, "cell": idx[tag]})
    if args.format == "json":
        out.write(_dump({"order": args.order, "depth": depth, "records": recs}))
    else:
        out.write(_table([[r["player"], r["side"], r["type"], r["cell"]] for r in recs],
                         ["player", "side", "type", "cell"]))
    return EXIT_OK


def cmd_terminal(args, out, style) -> int:
    target, probe = _load(args.target), _load(args.probe)
    try:
        if args.order is None:
            rep = terminal_over(target, probe)
        else:
            if args.order < 0:
                sys.stderr.write("usage: --order must be non-negative\n")
                return EXIT_FAIL
            rep = finitely_terminal_at(target, probe, args.order)
    except BaseMismatch as exc:
        out.write(_base_diff(exc, ("target", "probe")))
        return EXIT_FAIL
    if args.format == "json":
        recs = [
            {"player": r.player, "type": r.type, "matches": list(r.matches), "failed_order": r.failed_order}
            for r in rep.rows
        ]
        out.write(_dump({"order": rep.order, "depth": rep.depth, "all_matched": rep.all_matched, "records": recs}))
    else:
        scope = "full hierarchies" if rep.order is None else f"order {rep.order}"
        out.write(f"terminality check at {scope} (union fixpoint depth {rep.depth})\n")
        rows = []
        for r in rep.rows:
            if r.matched:
                rows.append([r.player, r.type, " ".join(r.matches)])
            else:
                rows.append([r.player, r.type, style.bad(f"Unmatched at order {r.failed_order}")])
        out.write(_table(rows, ["player", "probe type", "target matches"]))
        out.write((style.good("ALL MATCHED") if rep.all_matched else style.bad("NOT ALL MATCHED")) + "\n")
    return EXIT_OK if rep.all_matched else EXIT_FAIL


def parse_morphism(text: str) -> MorphismCandidate:
    """Lines ``<player> <source type> <target type>``; ``#`` starts a comment."""
    maps = {1: {}, 2: {}}
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.replace("->", " ").split()
        if len(parts) != 3 or parts[0] not in ("1", "2"):
            raise StructureSyntaxError("expected '<player> <source> <target>'", n)
        i = int(parts[0])
        if parts[1] in maps[i]:
            raise StructureSyntaxError(f"type {parts[1]} mapped twice", n)
        maps[i][parts[1]] = parts[2]
    return MorphismCandidate(maps)


def cmd_morphism(args, out, style) -> int:
    src, dst = _load(args.source), _load(args.target)
    try:
        phi = parse_morphism(_read(args.map))
    except StructureSyntaxError as exc:
        raise _Usage(f"{args.map}: {exc}") from None
    try:
        res = verify_type_morphism(src, dst, phi)
    except BaseMismatch as exc:
        out.write(_base_diff(exc, ("source", "target")))
        return EXIT_FAIL
    except InvalidMorphism as exc:
        out.write(f"invalid map: {exc}\n")
        return EXIT_FAIL
    if args.format == "json":
        payload = {"preserving": res.preserving}
        if res.witness is not None:
            w = res.witness
            payload["witness"] = {
                "player": w.player,
                "type": w.type,
                "condition": sorted(w.condition.members),
                "event": str(w.event),
                "image": format_rational(w.got),
                "target": format_rational(w.expected),
            }
        out.write(_dump(payload))
    else:
        out.write((style.good("Preserving") if res.preserving else style.bad(f"Broken: {res.witness}")) + "\n")
    return EXIT_OK if res.preserving else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cps-hier", description="Finite conditional type structures and belief hierarchies.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def fmt(p):
        p.add_argument("--format", choices=("table", "json"), default="table")

    p = sub.add_parser("validate", help="check a structure or standalone CPS file")
    p.add_argument("file")
    fmt(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("unfold", help="write the order-n hierarchy of one type")
    p.add_argument("file")
    p.add_argument("--player", required=True)
    p.add_argument("--type", required=True)
    p.add_argument("--order", type=int, required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_unfold, format="table")

    p = sub.add_parser("partition", help="group types by equal hierarchies")
    p.add_argument("file")
    p.add_argument("--order", type=int)
    fmt(p)
    p.set_defaults(func=cmd_partition)

    p = sub.add_parser("compare", help="group the types of two structures by equal hierarchies")
    p.add_argument("left")
    p.add_argument("right")
    p.add_argument("--order", type=int)
    fmt(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("terminal", help="does TARGET realize every hierarchy of PROBE?")
    p.add_argument("target")
    p.add_argument("probe")
    p.add_argument("--order", type=int)
    fmt(p)
    p.set_defaults(func=cmd_terminal)

    p = sub.add_parser("morphism", help="verify a hierarchy-preserving type map")
    p.add_argument("source")
    p.add_argument("target")
    p.add_argument("map")
    fmt(p)
    p.set_defaults(func=cmd_morphism)
    return ap


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    style = Styler(out)
    try:
        return args.func(args, out, style)
    except _Usage as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_USAGE
    except CpsHierError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
