"""Bounded exhaustive exploration and dynamic compliance checking.

States are congruence-normal labelled terms. While scripted
reconfigurations are still pending, the step index is part of the state
so that runs reaching the same term at different times stay apart.
Only moves a closed system can make on its own are followed: silent
steps and closed or faulty resource actions.
"""

from __future__ import annotations

import json
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from .parser import pretty
from .semantics import (
    ClosedAccess, ClosedRelease, FaultyAccess, ReconfigEvent, check_script,
    congruence_normalize, is_system_label, replication_unfold, step,
)
from .terms import Boundary, Name, Process, is_labeled, label_boundaries, term_key

__all__ = [
    "Bounds", "LtsGraph", "Verdict", "RandomRun", "explore", "complies_with", "replay",
    "run_random", "system_successors", "prepare",
]

DEFAULT_CAP = 200_000


@dataclass(frozen=True)
class Bounds:
    depth: Optional[int] = None
    budget: Optional[int] = None
    cap: Optional[int] = DEFAULT_CAP

    def as_dict(self) -> dict:
        return {"depth": self.depth, "budget": self.budget, "cap": self.cap}


@dataclass
class LtsGraph:
    nodes: List[Process]
    edges: List[Tuple[int, object, int]]
    root: int = 0
    truncated: bool = False
    bounds: Bounds = field(default_factory=Bounds)
    depth: int = 0

    def labels(self) -> List[object]:
        return [mu for _, mu, _ in self.edges]

    def successors(self, i: int) -> List[Tuple[object, int]]:
        return [(mu, d) for s, mu, d in self.edges if s == i]

    def to_edge_list(self) -> str:
        lines = [f"{s}\t{mu}\t{d}" for s, mu, d in self.edges]
        return "\n".join(lines) + ("\n" if lines else "")

    def to_dict(self) -> dict:
        return {
            "root": self.root,
            "truncated": self.truncated,
            "bounds": self.bounds.as_dict(),
            "depth": self.depth,
            "nodes": [{"id": i, "term": pretty(t)} for i, t in enumerate(self.nodes)],
            "edges": [{"src": s, "label": str(mu), "dst": d} for s, mu, d in self.edges],
        }

    def to_json(self, indent: Optional[int] = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent, sort_keys=True)


@dataclass(frozen=True)
class Verdict:
    status: str  # "complies" | "violates" | "inconclusive"
    witness: Optional[Tuple[object, ...]] = None
    stats: Dict[str, object] = field(default_factory=dict)

    def witness_text(self) -> List[str]:
        return [str(mu) for mu in self.witness or ()]


@dataclass(frozen=True)
class RandomRun:
    labels: Tuple[object, ...]
    final: Process
    stuck: bool


def prepare(p: Process, budget: Optional[int] = None) -> Process:
    """Label if needed, attach the replication budget, normalize."""
    if not is_labeled(p):
        p = label_boundaries(p)
    if budget is not None:
        p = replication_unfold(p, budget)
    return congruence_normalize(p)


def system_successors(p: Process, script: Sequence[ReconfigEvent] = (), step_index: int = 0):
    return [(mu, q) for mu, q in step(p, script, step_index) if is_system_label(mu)]


def _expand(arg):
    term, script, idx = arg
    return system_successors(term, script, idx)


def _phase(script: Sequence[ReconfigEvent], idx: int) -> Optional[int]:
    return idx if any(ev.at_step >= idx for ev in script) else None


def _resource_matches(name: Name, r) -> bool:
    if isinstance(r, Name):
        return name.canonical == r.canonical
    return name.resource and name.ident == str(r).lstrip("#")


def _declared(p: Process, r, script) -> bool:
    def walk(q):
        if isinstance(q, Boundary) and _resource_matches(q.resource, r):
            return True
        for attr in ("cont", "body", "left", "right"):
            sub = getattr(q, attr, None)
            if sub is not None and walk(sub):
                return True
        return False
    return walk(p) or any(ev.kind == "appear" and _resource_matches(ev.resource, r) for ev in script)


def _search(p: Process, script, bounds: Bounds, jobs: int, stop=None):
    """Breadth-first search; ``stop(label)`` ends it early on a matching edge."""
    check_script(script)
    root = prepare(p, bounds.budget)
    index: Dict[tuple, int] = {(root, _phase(script, 0)): 0}
    nodes = [root]
    step_of = [0]
    parent: Dict[int, Tuple[int, object]] = {}
    edges: List[Tuple[int, object, int]] = []
    frontier = [0]
    level = 0
    truncated = False
    hit = None
    pool = ProcessPoolExecutor(max_workers=jobs) if jobs > 1 else None
    try:
        while frontier:
            if bounds.depth is not None and level >= bounds.depth:
                # anything left to do past the horizon means the search was cut
                truncated = any(_expand((nodes[i], script, step_of[i])) for i in frontier)
                break
            args = [(nodes[i], script, step_of[i]) for i in frontier]
            if pool is not None and len(args) > 1:
                results = list(pool.map(_expand, args, chunksize=max(1, len(args) // (4 * jobs))))
            else:
                results = [_expand(a) for a in args]
            nxt = []
            for i, succ in zip(frontier, results):
                idx = step_of[i] + 1
                for mu, q in succ:
                    key = (q, _phase(script, idx))
                    j = index.get(key)
                    if j is None:
                        if bounds.cap is not None and len(nodes) >= bounds.cap:
                            truncated = True
                            continue
                        j = index[key] = len(nodes)
                        nodes.append(q)
                        step_of.append(idx)
                        parent[j] = (i, mu)
                        nxt.append(j)
                    edges.append((i, mu, j))
                    if stop is not None and stop(mu):
                        hit = (i, mu)
                        break
                if hit:
                    break
            if hit:
                break
            frontier = nxt
            level += 1
    finally:
        if pool is not None:
            pool.shutdown()
    graph = LtsGraph(nodes, edges, 0, truncated, bounds, level)
    return graph, parent, hit


def explore(p: Process, script: Sequence[ReconfigEvent] = (), *, depth: Optional[int] = None,
            budget: Optional[int] = None, cap: Optional[int] = DEFAULT_CAP,
            jobs: int = 1) -> LtsGraph:
    graph, _, _ = _search(p, tuple(script), Bounds(depth, budget, cap), jobs)
    return graph


def _path_to(parent, i: int) -> List[object]:
    path = []
    while i in parent:
        i, mu = parent[i]
        path.append(mu)
    return path[::-1]


def complies_with(p: Process, r, script: Sequence[ReconfigEvent] = (), *,
                  depth: Optional[int] = None, budget: Optional[int] = None,
                  cap: Optional[int] = DEFAULT_CAP, jobs: int = 1) -> Verdict:
    """Search for a faulty action on ``r``; shortest witness first."""
    script = tuple(script)
    if not _declared(p, r, script):
        raise ValueError(f"resource {r} is not declared in the process")

    def faulty(mu):
        return isinstance(mu, FaultyAccess) and _resource_matches(mu.resource, r)

    graph, parent, hit = _search(p, script, Bounds(depth, budget, cap), jobs, faulty)
    stats = {"nodes": len(graph.nodes), "edges": len(graph.edges), "depth": graph.depth,
             "truncated": graph.truncated}
    if hit is not None:
        i, mu = hit
        return Verdict("violates", tuple(_path_to(parent, i) + [mu]), stats)
    return Verdict("inconclusive" if graph.truncated else "complies", None, stats)


def replay(p: Process, labels: Sequence, script: Sequence[ReconfigEvent] = (), *,
           budget: Optional[int] = None) -> List[Process]:
    """Follow ``labels`` (objects or their text) from ``p``.

    Labels do not determine the successor, so the set of states consistent
    with the prefix is tracked. Returns the reachable end states in
    canonical order; raises ValueError once no state can continue.
    """
    current = [prepare(p, budget)]
    for idx, want in enumerate(labels):
        nxt = {}
        for cur in current:
            for mu, q in system_successors(cur, script, idx):
                if mu == want or str(mu) == str(want):
                    nxt.setdefault(q, None)
        if not nxt:
            raise ValueError(f"step {idx}: {want} is not enabled")
        current = sorted(nxt, key=term_key)
    return current


def run_random(p: Process, script: Sequence[ReconfigEvent] = (), seed: int = 0,
               max_steps: int = 100, *, budget: Optional[int] = None) -> RandomRun:
    """One reproducible random run: a uniform choice among ordered successors."""
    rng = random.Random(seed)
    cur = prepare(p, budget)
    trace = []
    for idx in range(max_steps):
        succ = system_successors(cur, script, idx)
        if not succ:
            return RandomRun(tuple(trace), cur, True)
        mu, cur = succ[rng.randrange(len(succ))]
        trace.append(mu)
    return RandomRun(tuple(trace), cur, False)


def resource_traces(labels: Sequence, r) -> Tuple[str, ...]:
    """The closed actions on ``r`` along a run, as a dynamic trace."""
    out = []
    for mu in labels:
        if isinstance(mu, ClosedAccess) and _resource_matches(mu.resource, r):
            out.append(mu.action)
        elif isinstance(mu, ClosedRelease) and _resource_matches(mu.resource, r):
            out.append("rel")
    return tuple(out)
