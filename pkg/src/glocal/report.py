"""Run reports and the figures rendered next to them."""

from __future__ import annotations

import hashlib
import json
from collections import Counter
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from . import __version__  # noqa: E402
from .cfa import Estimate, is_faulty  # noqa: E402
from .explorer import LtsGraph  # noqa: E402
from .semantics import ClosedAccess, ClosedRelease, FaultyAccess  # noqa: E402

__all__ = ["digest", "build_report", "render_tsv", "figure_lts", "figure_estimate", "figure_run"]

# drop the Software entry so that figure bytes do not depend on the library version
_PNG_META = {"Software": None}


def digest(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def build_report(command: Sequence[str], inputs: Iterable[Tuple[str, Path]], result: dict,
                 timing: Optional[Dict[str, float]] = None) -> dict:
    """``inputs`` pairs a display name with the file to digest."""
    report = {
        "tool": "glocal",
        "version": __version__,
        "command": list(command),
        "inputs": {name: digest(p) for name, p in inputs},
        "result": result,
    }
    if timing is not None:
        report["timing"] = timing
    return report


def render_json(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True) + "\n"


def render_tsv(rows: Iterable[Sequence[object]]) -> str:
    """Tab-separated lines; values are flattened with ``str``."""
    return "".join("\t".join(str(c) for c in row) + "\n" for row in rows)


def _save(fig, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="png", dpi=100, metadata=_PNG_META)
    plt.close(fig)
    return path


def _levels(graph: LtsGraph) -> List[int]:
    depth = {graph.root: 0}
    order = [graph.root]
    out: Dict[int, List[int]] = {}
    for s, _, d in graph.edges:
        out.setdefault(s, []).append(d)
    for n in order:
        for d in out.get(n, ()):
            if d not in depth:
                depth[d] = depth[n] + 1
                order.append(d)
    counts = Counter(depth.values())
    return [counts[i] for i in range(max(counts) + 1)] if counts else []


def figure_lts(graph: LtsGraph, out_dir: Path, stem: str = "explore") -> List[Path]:
    """States per breadth-first level and the mix of edge labels."""
    levels = _levels(graph)
    kinds = Counter(type(mu).__name__ for _, mu, _ in graph.edges)
    fig, (a, b) = plt.subplots(1, 2, figsize=(9, 3.5))
    a.bar(range(len(levels)), levels, color="tab:blue")
    a.set_xlabel("depth")
    a.set_ylabel("new states")
    a.set_title("frontier size" + (" (truncated)" if graph.truncated else ""))
    names = sorted(kinds)
    b.bar(names, [kinds[k] for k in names], color="tab:gray")
    b.set_title("edge labels")
    b.tick_params(axis="x", rotation=30)
    fig.tight_layout()
    return [_save(fig, Path(out_dir) / f"{stem}.png")]


def figure_estimate(e: Estimate, out_dir: Path, stem: str = "analyze") -> List[Path]:
    """Trace counts per resource, split into clean and faulty."""
    rs = sorted(e.gamma, key=str)
    clean = [sum(1 for _, eta, _ in e.gamma[r] if not is_faulty(eta)) for r in rs]
    bad = [sum(1 for _, eta, _ in e.gamma[r] if is_faulty(eta)) for r in rs]
    fig, ax = plt.subplots(figsize=(max(4, 0.6 * len(rs) + 2), 3.5))
    xs = range(len(rs))
    ax.bar(xs, clean, color="tab:green", label="clean")
    ax.bar(xs, bad, bottom=clean, color="tab:red", label="faulty")
    ax.set_xticks(list(xs))
    ax.set_xticklabels([str(r) for r in rs], rotation=30)
    ax.set_ylabel("traces")
    if any(v > 1000 for v in (c + f for c, f in zip(clean, bad))):
        ax.set_yscale("log")
    ax.legend()
    ax.set_title("resource traces in the estimate")
    fig.tight_layout()
    return [_save(fig, Path(out_dir) / f"{stem}.png")]


def figure_run(labels: Sequence[object], out_dir: Path, stem: str = "run") -> List[Path]:
    """Cumulative resource actions along a run, one line per resource."""
    series: Dict[str, List[int]] = {}
    for i, mu in enumerate(labels):
        if isinstance(mu, (ClosedAccess, ClosedRelease, FaultyAccess)):
            series.setdefault(str(mu.resource), []).append(i)
    fig, ax = plt.subplots(figsize=(6, 3.5))
    for r in sorted(series):
        steps = series[r]
        ax.step(steps, range(1, len(steps) + 1), where="post", label=r)
    faults = [i for i, mu in enumerate(labels) if isinstance(mu, FaultyAccess)]
    for i in faults:
        ax.axvline(i, color="tab:red", linestyle=":", linewidth=1)
    ax.set_xlabel("step")
    ax.set_ylabel("actions so far")
    ax.set_xlim(0, max(1, len(labels)))
    if series:
        ax.legend(fontsize="small")
    ax.set_title("resource activity")
    fig.tight_layout()
    return [_save(fig, Path(out_dir) / f"{stem}.png")]
