"""Command-line front end.

Exit codes: 0 done, 1 input error, 2 limit exceeded, 3 soundness diff,
4 assertion violations with --fail-on-assert.
"""

import argparse
import json
import sys
from pathlib import Path
from typing import List, Optional

from .analysis import EQUIVALENCES
from .dsl import ProgramError, load_program
from .report import compare, run_engine

EXIT_OK, EXIT_INPUT, EXIT_LIMIT, EXIT_DIFF, EXIT_ASSERT = 0, 1, 2, 3, 4

CORPUS = Path(__file__).parent / "corpus"


def _classes(text: Optional[str]) -> List[str]:
    if not text:
        return []
    out = [c.strip() for c in text.split(",") if c.strip()]
    for c in out:
        if c not in EQUIVALENCES:
            raise argparse.ArgumentTypeError(f"unknown equivalence {c!r}")
    return out


def _event_json(p, e) -> dict:
    return {"thread": p.thread_names[e.tid], "index": e.index, "kind": e.kind, "var": e.var, "value": e.value}


def cmd_run(args) -> int:
    p = load_program(args.file)
    res = run_engine(
        p,
        args.algo,
        args.root,
        args.classes,
        args.max_traces,
        args.time_limit,
        args.prune,
        args.read_priority,
        keep_traces=bool(args.dump_traces),
        timing=not args.no_timing,
    )
    if args.dump_traces:
        with open(args.dump_traces, "w", encoding="utf-8") as f:
            for t in res.traces:
                f.write(json.dumps([_event_json(p, e) for e in t]) + "\n")
    if args.json:
        print(json.dumps(res.as_json(), indent=2))
        print(res.table(), file=sys.stderr)
    else:
        print(res.table())
    if res.status != "done":
        return EXIT_LIMIT
    if args.fail_on_assert and res.violations:
        return EXIT_ASSERT
    return EXIT_OK


def _compare_file(path, args):
    p = load_program(path)
    return compare(p, args.root, args.prune, args.read_priority, args.max_traces, args.time_limit,
                   timing=not args.no_timing)


def _comparison_json(c) -> dict:
    return {
        "benchmark": c.benchmark,
        "status": c.status,
        "problems": c.problems,
        "oracle": c.oracle.as_json(),
        "vcdpor": c.vcdpor.as_json(),
    }


def cmd_compare(args) -> int:
    c = _compare_file(args.file, args)
    if args.json:
        print(json.dumps(_comparison_json(c), indent=2))
    else:
        print(f"{c.benchmark}: {c.status}")
        print(f"  oracle maximal={c.oracle.maximal} vhb={c.oracle.classes.get('vhb')} digest={c.oracle.as_json()['states_digest']}")
        print(f"  vcdpor maximal={c.vcdpor.maximal} realized={c.vcdpor.realized} digest={c.vcdpor.as_json()['states_digest']}")
        for prob in c.problems:
            print(f"  DIFF {prob}")
    return {"pass": EXIT_OK, "limit": EXIT_LIMIT, "diff": EXIT_DIFF}[c.status]


def check_expectations(c, expect: dict) -> List[str]:
    """Compare a comparison against a sidecar of expected values."""
    got = {
        "maximal_traces": c.vcdpor.maximal,
        "realized_traces": c.vcdpor.realized,
        "oracle_traces": c.oracle.maximal,
    }
    got.update(c.oracle.classes)
    out = []
    for k, want in expect.items():
        if k == "comment":
            continue
        if k not in got:
            out.append(f"{k}: not measured")
        elif got[k] != want:
            out.append(f"{k}: expected {want}, got {got[k]}")
    return out


def cmd_corpus(args) -> int:
    d = Path(args.dir) if args.dir else CORPUS
    if not d.is_dir():
        print(f"error: {d} is not a directory", file=sys.stderr)
        return EXIT_INPUT
    rows = []
    codes = set()
    for path in sorted(d.glob("*.vp")):
        try:
            c = _compare_file(path, args)
        except ProgramError as exc:
            rows.append((path.stem, "error", "-", "-", "-", str(exc)))
            codes.add(EXIT_INPUT)
            continue
        notes = list(c.problems)
        side = path.with_suffix(".expect.json")
        status = c.status
        if side.exists() and status == "pass":
            miss = check_expectations(c, json.loads(side.read_text(encoding="utf-8")))
            if miss:
                status = "expect"
                notes += miss
        codes.add({"pass": EXIT_OK, "limit": EXIT_LIMIT, "diff": EXIT_DIFF, "expect": EXIT_INPUT}[status])
        rows.append((path.stem, status, c.oracle.maximal, c.oracle.classes.get("vhb", "-"), c.vcdpor.maximal,
                     "; ".join(notes)))
    out = sys.stdout
    print(f"{'benchmark':18} {'status':7} {'oracle':>7} {'vhb':>5} {'vcdpor':>7}  notes", file=out)
    for r in rows:
        print(f"{r[0]:18} {r[1]:7} {r[2]!s:>7} {r[3]!s:>5} {r[4]!s:>7}  {r[5]}", file=out)
    print(f"{len(rows)} programs, {sum(r[1] == 'pass' for r in rows)} passed", file=out)
    for code in (EXIT_DIFF, EXIT_LIMIT, EXIT_INPUT):
        if code in codes:
            return code
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="vcdpor", description="Stateless model checking by value-happens-before classes.")
    sub = ap.add_subparsers(dest="cmd", required=True)

    def common(sp):
        sp.add_argument("--root", help="root thread name (default: first thread spawned by main)")
        sp.add_argument("--max-traces", type=int, default=None, help="trace cap; exceeding it exits with 2")
        sp.add_argument("--time-limit", type=float, default=None, help="seconds; exceeding it exits with 2")
        sp.add_argument("--prune", action="store_true", help="skip ordering unobservable leaf writes")
        sp.add_argument("--read-priority", action="store_true", help="process reads followed by writes first")
        sp.add_argument("--json", action="store_true", help="JSON on stdout, table on stderr")
        sp.add_argument("--no-timing", action="store_true", help="report time_ms as null (byte-stable output)")

    run = sub.add_parser("run", help="explore one program")
    run.add_argument("file")
    run.add_argument("--algo", choices=("vcdpor", "oracle"), default="vcdpor")
    run.add_argument("--classes", type=_classes, default=[], help="comma list of hb,vhb,obs,obs_c")
    run.add_argument("--dump-traces", metavar="PATH", help="write explored traces as JSON lines")
    run.add_argument("--fail-on-assert", action="store_true", help="exit 4 when an assertion can fail")
    common(run)
    run.set_defaults(func=cmd_run)

    cmp = sub.add_parser("compare", help="check vcdpor against the oracle")
    cmp.add_argument("file")
    common(cmp)
    cmp.set_defaults(func=cmd_compare)

    cor = sub.add_parser("corpus", help="compare every .vp file in a directory")
    cor.add_argument("dir", nargs="?", help="directory (default: the shipped corpus)")
    common(cor)
    cor.set_defaults(func=cmd_corpus)
    return ap


def main(argv: Optional[List[str]] = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        return args.func(args)
    except ProgramError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
