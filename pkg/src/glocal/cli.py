"""Command-line front end: ``glocal fmt|run|explore|analyze|check``.

Exit codes: 0 pass, 1 policy failure, 2 parse or input error, 3 I/O
error, 4 inconclusive dynamic check.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path
from typing import Dict, List, Optional, Sequence

from . import __version__
from .cfa import faulty_traces, least_estimate, unreleased_report
from .explorer import DEFAULT_CAP, complies_with, explore, run_random
from .parser import GlpSyntaxError, SourceDocument, load, parse_policies, parse_script, pretty_document
from .policy import PolicyAutomaton
from .report import build_report, figure_estimate, figure_lts, figure_run, render_json, render_tsv
from .scenarios import NAMES as SCENARIOS, path_of
from .terms import label_boundaries

EXIT_OK, EXIT_POLICY, EXIT_INPUT, EXIT_IO, EXIT_INCONCLUSIVE = 0, 1, 2, 3, 4
BUILTIN = "builtin:"


class _InputError(Exception):
    pass


def _resolve_path(spec: str) -> Path:
    if spec.startswith(BUILTIN):
        name = spec[len(BUILTIN):]
        if name not in SCENARIOS:
            raise _InputError(f"unknown bundled scenario {name!r} (have: {', '.join(SCENARIOS)})")
        return path_of(name)
    return Path(spec)


def _policies(args) -> Dict[str, PolicyAutomaton]:
    table: Dict[str, PolicyAutomaton] = {}
    for f in args.policy or ():
        p = Path(f)
        table.update(parse_policies(p.read_text(encoding="utf-8"), str(p)))
    return table


def _load(args) -> SourceDocument:
    path = _resolve_path(args.file)
    args.inputs = [(args.file, path)] + [(f, Path(f)) for f in args.policy or ()]
    doc = load(path, _policies(args), search_path=args.policy_dir or ())
    args.inputs += [(f"import:{p.name}", p) for p in doc.imports]
    script = getattr(args, "script", None)
    if script:
        sp = Path(script)
        args.inputs.append((script, sp))
        doc.script = parse_script(sp.read_text(encoding="utf-8"), doc.policies, str(sp))
    return doc


def _emit(args, result: dict, rows: List[Sequence[object]], timing: Optional[dict]) -> None:
    report = build_report(args.argv, args.inputs, result, timing if args.timing else None)
    if args.json:
        sys.stdout.write(render_json(report))
    else:
        head = [("tool", f"glocal {__version__}"), ("command", " ".join(args.argv))]
        head += [("input", f"{p}\t{d}") for p, d in report["inputs"].items()]
        sys.stdout.write(render_tsv(head + list(rows)))
        if args.timing and timing:
            sys.stdout.write(render_tsv(("time", k, f"{v:.3f}") for k, v in sorted(timing.items())))


def _figures(args, make) -> List[Path]:
    if not args.figures:
        return []
    return make(Path(args.figures))


# -- subcommands ------------------------------------------------------------

def cmd_fmt(args) -> int:
    doc = _load(args)
    sys.stdout.write(pretty_document(doc))
    return EXIT_OK


def cmd_run(args) -> int:
    doc = _load(args)
    t0 = time.perf_counter()
    run = run_random(doc.main, doc.script, args.seed, args.steps, budget=args.budget)
    elapsed = time.perf_counter() - t0
    labels = [str(mu) for mu in run.labels]
    figs = _figures(args, lambda d: figure_run(run.labels, d))
    result = {"seed": args.seed, "steps": len(labels), "stuck": run.stuck, "trace": labels,
              "figures": [str(f) for f in figs]}
    rows = [("seed", args.seed), ("steps", len(labels)), ("stuck", str(run.stuck).lower())]
    rows += [("step", i, mu) for i, mu in enumerate(labels)]
    rows += [("figure", f) for f in figs]
    _emit(args, result, rows, {"run": elapsed})
    return EXIT_OK


def cmd_explore(args) -> int:
    doc = _load(args)
    t0 = time.perf_counter()
    g = explore(doc.main, doc.script, depth=args.depth, budget=args.budget, cap=args.cap,
                jobs=args.jobs)
    elapsed = time.perf_counter() - t0
    if args.out:
        out = Path(args.out)
        out.write_text(g.to_json() + "\n" if out.suffix == ".json" else g.to_edge_list(),
                       encoding="utf-8")
    faults = sorted({str(mu) for _, mu, _ in g.edges if str(mu).startswith("fault ")})
    figs = _figures(args, lambda d: figure_lts(g, d))
    result = {"nodes": len(g.nodes), "edges": len(g.edges), "depth": g.depth,
              "truncated": g.truncated, "bounds": g.bounds.as_dict(), "faulty_labels": faults,
              "out": args.out, "figures": [str(f) for f in figs]}
    rows = [("nodes", len(g.nodes)), ("edges", len(g.edges)), ("depth", g.depth),
            ("truncated", str(g.truncated).lower())]
    rows += [("faulty", f) for f in faults] + [("figure", f) for f in figs]
    _emit(args, result, rows, {"explore": elapsed})
    return EXIT_OK


def cmd_analyze(args) -> int:
    doc = _load(args)
    t0 = time.perf_counter()
    e = least_estimate(label_boundaries(doc.main))
    elapsed = time.perf_counter() - t0
    if args.out:
        Path(args.out).write_text(e.to_json() + "\n", encoding="utf-8")
    figs = _figures(args, lambda d: figure_estimate(e, d))
    summary = {str(r): {"traces": len(es), "faulty": len(faulty_traces(e, r))}
               for r, es in sorted(e.gamma.items(), key=lambda kv: str(kv[0]))}
    result = {"summary": summary, "unreleased": len(unreleased_report(e)),
              "out": args.out, "figures": [str(f) for f in figs]}
    if not args.out:
        result["estimate"] = e.to_dict()
    rows = [("resource", r, v["traces"], v["faulty"]) for r, v in summary.items()]
    rows += [("unreleased", len(unreleased_report(e)))] + [("figure", f) for f in figs]
    _emit(args, result, rows, {"analyze": elapsed})
    return EXIT_OK


def cmd_check(args) -> int:
    doc = _load(args)
    term = label_boundaries(doc.main)
    t0 = time.perf_counter()
    e = least_estimate(term)
    bad = sorted((".".join(map(str, eta)) or "eps", ".".join(s))
                 for eta, s in faulty_traces(e, args.resource))
    t1 = time.perf_counter()
    verdict = complies_with(term, args.resource, doc.script, depth=args.depth, budget=args.budget,
                            cap=args.cap, jobs=args.jobs)
    t2 = time.perf_counter()
    static_ok = not bad
    result = {"resource": args.resource, "respects": static_ok, "faulty_traces": len(bad),
              "faulty_examples": [list(b) for b in bad[:args.examples]],
              "complies": verdict.status, "witness": verdict.witness_text(), "stats": verdict.stats}
    rows = [("respects", str(static_ok).lower()), ("faulty_traces", len(bad))]
    rows += [("faulty_trace", t, s) for t, s in bad[:args.examples]]
    rows += [("complies", verdict.status)] + [("witness", i, mu) for i, mu in enumerate(verdict.witness_text())]
    _emit(args, result, rows, {"analyze": t1 - t0, "explore": t2 - t1})
    if not static_ok or verdict.status == "violates":
        return EXIT_POLICY
    if verdict.status == "inconclusive":
        return EXIT_INCONCLUSIVE
    return EXIT_OK


# -- argument parsing -------------------------------------------------------

def _bounds(sp) -> None:
    sp.add_argument("--depth", type=int, default=None, help="maximum number of steps from the root")
    sp.add_argument("--budget", type=int, default=None, help="copies allowed per replication")
    sp.add_argument("--cap", type=int, default=DEFAULT_CAP, help="maximum number of states")
    sp.add_argument("--jobs", type=int, default=1, help="worker processes for frontier expansion")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("file", help=f".glp file, or {BUILTIN}NAME for a bundled scenario")
    common.add_argument("--policy", action="append", metavar="FILE",
                        help="preload policies from a .pol file (repeatable)")
    common.add_argument("--policy-dir", action="append", metavar="DIR",
                        help="extra directory searched by import (repeatable); "
                             "GLOCAL_POLICY_PATH is searched too")
    common.add_argument("--json", action="store_true", help="print the report as JSON")
    common.add_argument("--timing", action="store_true",
                        help="include wall-clock timings (reports are no longer byte-stable)")
    common.add_argument("--figures", metavar="DIR", help="render figures into DIR")

    ap = argparse.ArgumentParser(prog="glocal", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"glocal {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    sub.add_parser("fmt", parents=[common], help="parse and pretty-print").set_defaults(fn=cmd_fmt)

    sp = sub.add_parser("run", parents=[common], help="one seeded random run")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--steps", type=int, default=100)
    sp.add_argument("--budget", type=int, default=None)
    sp.add_argument("--script", metavar="FILE", help="reconfiguration script")
    sp.set_defaults(fn=cmd_run)

    sp = sub.add_parser("explore", parents=[common], help="bounded exhaustive exploration")
    _bounds(sp)
    sp.add_argument("--script", metavar="FILE", help="reconfiguration script")
    sp.add_argument("--out", metavar="FILE", help="write the graph (.json, otherwise an edge list)")
    sp.set_defaults(fn=cmd_explore)

    sp = sub.add_parser("analyze", parents=[common], help="least control flow estimate")
    sp.add_argument("--out", metavar="FILE", help="write the estimate as JSON")
    sp.set_defaults(fn=cmd_analyze)

    sp = sub.add_parser("check", parents=[common], help="static and dynamic policy check")
    sp.add_argument("--resource", required=True, help="resource name, e.g. mallet")
    sp.add_argument("--examples", type=int, default=5, help="faulty traces to list")
    _bounds(sp)
    sp.set_defaults(fn=cmd_check)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    args.argv = argv
    args.inputs = []
    try:
        return args.fn(args)
    except GlpSyntaxError as exc:
        print(f"glocal: syntax error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (_InputError, ValueError) as exc:
        print(f"glocal: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"glocal: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
