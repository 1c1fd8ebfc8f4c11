"""Control flow analysis: estimates, validation and the least estimate.

An estimate ``(rho, kappa, gamma, psi)`` over-approximates name bindings,
channel contents, the traces every resource can exhibit (with the
special events ``in``/``out``/``err_out`` recording who held it), and the
scope contexts in which a process may get stuck holding resources.

Judgements run under a context ``delta``: a tuple of frames
``(resource, policy, trace, labels)``, innermost last.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Dict, FrozenSet, Iterable, Optional, Set, Tuple

from .policy import PolicyAutomaton, admits
from .terms import (
    REL, Boundary, Choice, Input, Name, Nil, Output, Par, Prefix, Process, Release,
    Replicate, Request, Restrict, Special, Tau, Access, free_names, is_labeled,
    is_sequential, substitute,
)

__all__ = [
    "Estimate", "Frame", "least_estimate", "validate", "faulty_traces", "respects",
    "unreleased_report", "is_faulty", "resource_named",
]

Frame = Tuple[Name, PolicyAutomaton, tuple, Tuple[str, ...]]
Entry = Tuple[PolicyAutomaton, tuple, Tuple[str, ...]]


def _fz(d) -> Dict:
    return {k: frozenset(v) for k, v in d.items() if v}


@dataclass(frozen=True)
class Estimate:
    rho: Dict[Name, FrozenSet[Name]] = field(default_factory=dict)
    kappa: Dict[Name, FrozenSet[Name]] = field(default_factory=dict)
    gamma: Dict[Name, FrozenSet[Entry]] = field(default_factory=dict)
    psi: FrozenSet[Tuple[Frame, ...]] = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "rho", _fz(self.rho))
        object.__setattr__(self, "kappa", _fz(self.kappa))
        object.__setattr__(self, "gamma", _fz(self.gamma))
        object.__setattr__(self, "psi", frozenset(self.psi))

    def rho_of(self, n: Name) -> FrozenSet[Name]:
        return self.rho.get(n.canonical, frozenset())

    def kappa_of(self, n: Name) -> FrozenSet[Name]:
        return self.kappa.get(n.canonical, frozenset())

    def gamma_of(self, r: Name) -> FrozenSet[Entry]:
        return self.gamma.get(r.canonical, frozenset())

    def __le__(self, other: "Estimate") -> bool:
        def sub(a, b):
            return all(v <= b.get(k, frozenset()) for k, v in a.items())
        return (sub(self.rho, other.rho) and sub(self.kappa, other.kappa)
                and sub(self.gamma, other.gamma) and self.psi <= other.psi)

    def meet(self, other: "Estimate") -> "Estimate":
        """Pointwise intersection."""
        def inter(a, b):
            return {k: a[k] & b[k] for k in a.keys() & b.keys()}
        return Estimate(inter(self.rho, other.rho), inter(self.kappa, other.kappa),
                        inter(self.gamma, other.gamma), self.psi & other.psi)

    def join(self, other: "Estimate") -> "Estimate":
        def union(a, b):
            return {k: a.get(k, frozenset()) | b.get(k, frozenset()) for k in a.keys() | b.keys()}
        return Estimate(union(self.rho, other.rho), union(self.kappa, other.kappa),
                        union(self.gamma, other.gamma), self.psi | other.psi)

    def is_empty(self) -> bool:
        return not (self.rho or self.kappa or self.gamma or self.psi)

    # -- serialization -----------------------------------------------------

    def _namer(self) -> Callable[[Name], str]:
        names: Set[Name] = set()
        for m in (self.rho, self.kappa):
            for k, vs in m.items():
                names.add(k)
                names.update(vs)
        names.update(self.gamma)
        for delta in self.psi:
            names.update(f[0] for f in delta)
        by_text: Dict[str, Set[Name]] = {}
        for n in names:
            by_text.setdefault(str(n), set()).add(n)

        def render(n: Name) -> str:
            n = n.canonical
            return str(n) if len(by_text.get(str(n), ())) <= 1 else f"{n}~{n.site}"
        return render

    def to_dict(self) -> dict:
        name = self._namer()
        trace = _trace_str

        def frame(f):
            return {"resource": name(f[0]), "policy": f[1].name, "trace": trace(f[2]),
                    "labels": list(f[3])}

        return {
            "rho": {name(k): sorted(name(v) for v in vs) for k, vs in self.rho.items()},
            "kappa": {name(k): sorted(name(v) for v in vs) for k, vs in self.kappa.items()},
            "gamma": {
                name(r): sorted(({"policy": phi.name, "trace": trace(eta), "labels": list(s)}
                                 for phi, eta, s in es),
                                key=lambda d: (d["policy"], d["trace"], d["labels"]))
                for r, es in self.gamma.items()
            },
            "psi": sorted(([frame(f) for f in delta] for delta in self.psi),
                          key=lambda fs: json.dumps(fs, sort_keys=True)),
        }

    def to_json(self, indent: Optional[int] = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent, sort_keys=True)


def _trace_str(eta) -> str:
    return ".".join(str(e) for e in eta) if eta else "eps"


def _frame_labels(p: Boundary) -> Tuple[str, ...]:
    if p.holders:
        return tuple(p.holders)
    return (p.label,) if p.label is not None else ()


def _find_frame(delta, r: Name) -> int:
    for i in range(len(delta) - 1, -1, -1):
        f = delta[i][0]
        if f is r or f == r:
            return i
    return -1


def _check_input(p: Process) -> None:
    if not is_labeled(p):
        raise ValueError("the analysis needs a labelled term (run label_boundaries first)")
    if not is_sequential(p):
        raise ValueError("resource-scope bodies must be sequential for the analysis")


def _seed_names(p: Process):
    return [n.canonical for n in free_names(p) if not n.variable]


# -- least estimate ---------------------------------------------------------

class _Solver:
    """Worklist fixpoint over subscription sets.

    Keys are ``("rho", n)``, ``("kappa", a)`` and ``("gamma", r)``; a
    watcher fires once per element, old or new. Analysis tasks are
    memoized on ``(term, delta)``.
    """

    def __init__(self, max_steps: Optional[int] = None):
        self.sets: Dict[tuple, set] = {}
        self.watchers: Dict[tuple, list] = {}
        self.psi: Set[tuple] = set()
        self.done: Set[tuple] = set()
        self.links: Set[tuple] = set()
        self.queue: deque = deque()
        self.max_steps = max_steps
        self.steps = 0

    def add(self, key, value) -> None:
        s = self.sets.get(key)
        if s is None:
            s = self.sets[key] = set()
        if value in s:
            return
        s.add(value)
        ws = self.watchers.get(key)
        if ws:
            self.queue.extend([(cb, value) for cb in ws])

    def watch(self, key, cb) -> None:
        self.watchers.setdefault(key, []).append(cb)
        for v in list(self.sets.get(key, ())):
            self.queue.append((cb, v))

    def link(self, src, dst, kind: Optional[bool] = None) -> None:
        """``src`` subset of ``dst``, restricted to resources (True) or channels (False)."""
        k = (src, dst, kind)
        if k in self.links:
            return
        self.links.add(k)
        if kind is None:
            self.watch(src, lambda v: self.add(dst, v))
        else:
            self.watch(src, lambda v: self.add(dst, v) if v.resource == kind else None)

    def task(self, p: Process, delta: tuple) -> None:
        k = (p, delta)
        if k not in self.done:
            self.done.add(k)
            self.queue.append((self.analyze, k))

    def run(self) -> None:
        q = self.queue
        while q:
            fn, arg = q.popleft()
            self.steps += 1
            if self.max_steps is not None and self.steps > self.max_steps:
                raise RuntimeError(f"analysis exceeded {self.max_steps} steps")
            fn(arg)

    def analyze(self, item) -> None:
        p, delta = item
        # walk straight-line prefixes in place; only branch points are memoized
        while isinstance(p, Prefix):
            nxt = self._prefix(p, delta)
            if nxt is None:
                return
            p, delta = nxt
        if isinstance(p, Nil):
            # a finished body leaves every enclosing resource available again
            for r, phi, eta, s in delta:
                self.add(("gamma", r), (phi, eta, s))
        elif isinstance(p, (Choice, Par)):
            self.task(p.left, delta)
            self.task(p.right, delta)
        elif isinstance(p, Restrict):
            n = p.name.canonical
            self.add(("rho", n), n)
            self.task(p.body, delta)
        elif isinstance(p, Replicate):
            self.task(p.body, delta)
        elif isinstance(p, Boundary):
            r = p.resource.canonical
            if isinstance(p.body, Nil):
                self.add(("gamma", r), (p.policy, p.state, tuple(p.holders or ())))
            else:
                self.task(p.body, delta + ((r, p.policy, p.state, _frame_labels(p)),))
        elif isinstance(p, Request):
            r, chi, body = p.resource.canonical, p.label, p.body

            def on_entry(entry, r=r, chi=chi, body=body, delta=delta):
                phi, eta, s = entry
                if chi not in s:
                    self.task(body, delta + ((r, phi, eta + (Special("in", chi),), s + (chi,)),))
            self.watch(("gamma", r), on_entry)
        else:
            raise TypeError(p)

    def _prefix(self, p: Prefix, delta):
        """Apply one prefix clause; return the continuation to analyze next, if any."""
        pi, cont = p.prefix, p.cont
        if isinstance(pi, Tau):
            return cont, delta
        if isinstance(pi, Output):
            w = ("rho", pi.payload.canonical)
            self.watch(("rho", pi.channel.canonical), lambda a: self.link(w, ("kappa", a)))
            return cont, delta
        if isinstance(pi, Input):
            b = pi.binder
            dst = ("rho", b.canonical)
            self.watch(("rho", pi.channel.canonical),
                       lambda a: self.link(("kappa", a), dst, b.resource))
            if b.resource:
                # only resource names can instantiate a resource variable
                self.watch(dst, lambda r: r.resource and self.task(substitute(cont, b, r), delta))
                return None
            return cont, delta
        if isinstance(pi, Access):
            r = pi.resource.canonical
            i = _find_frame(delta, r)
            if i < 0:
                self.psi.add(delta)
                return None
            _, phi, eta, s = delta[i]
            eta2 = eta + (pi.action,)
            if admits(phi, eta2):
                return cont, delta[:i] + ((r, phi, eta2, s),) + delta[i + 1:]
            self.add(("gamma", r), (phi, eta + (Special("err_out", s[-1]),), s))
            return cont, delta[:i] + delta[i + 1:]
        if isinstance(pi, Release):
            r = pi.resource.canonical
            i = _find_frame(delta, r)
            if i < 0:
                self.psi.add(delta)
                return None
            _, phi, eta, s = delta[i]
            self.add(("gamma", r), (phi, eta + (REL, Special("out", s[-1])), s))
            return cont, delta[:i] + delta[i + 1:]
        raise TypeError(pi)

    def estimate(self) -> Estimate:
        parts = {"rho": {}, "kappa": {}, "gamma": {}}
        for (kind, key), vs in self.sets.items():
            parts[kind][key] = vs
        return Estimate(parts["rho"], parts["kappa"], parts["gamma"], self.psi)


def least_estimate(p: Process, base: Optional[Estimate] = None, *,
                   max_steps: Optional[int] = None) -> Estimate:
    """The least estimate valid for ``p`` under the empty context.

    With ``base`` the result is the least valid estimate containing it.
    """
    _check_input(p)
    solver = _Solver(max_steps)
    if base is not None:
        for kind, m in (("rho", base.rho), ("kappa", base.kappa), ("gamma", base.gamma)):
            for k, vs in m.items():
                for v in vs:
                    solver.add((kind, k), v)
        solver.psi.update(base.psi)
    for n in _seed_names(p):
        solver.add(("rho", n), n)
    solver.task(p, ())
    solver.run()
    return solver.estimate()


# -- validation -------------------------------------------------------------

def validate(e: Estimate, delta: Iterable[Frame], p: Process) -> bool:
    """Check the judgement ``e |=_delta p`` clause by clause.

    Free constant names must be bound to themselves in ``rho``.
    """
    _check_input(p)
    delta = tuple((f[0].canonical, f[1], tuple(f[2]), tuple(f[3])) for f in delta)
    if any(n not in e.rho_of(n) for n in _seed_names(p)):
        return False
    return _Validator(e).check(p, delta)


class _Validator:
    def __init__(self, e: Estimate):
        self.e = e
        self.memo: Dict[tuple, bool] = {}

    def check(self, p: Process, delta: tuple) -> bool:
        k = (p, delta)
        hit = self.memo.get(k)
        if hit is None:
            self.memo[k] = True  # co-inductive guard, terms are finite anyway
            hit = self.memo[k] = self._check(p, delta)
        return hit

    def _check(self, p: Process, delta: tuple) -> bool:
        e = self.e
        if isinstance(p, Nil):
            return all((phi, eta, s) in e.gamma_of(r) for r, phi, eta, s in delta)
        if isinstance(p, (Choice, Par)):
            return self.check(p.left, delta) and self.check(p.right, delta)
        if isinstance(p, Restrict):
            return p.name.canonical in e.rho_of(p.name) and self.check(p.body, delta)
        if isinstance(p, Replicate):
            return self.check(p.body, delta)
        if isinstance(p, Boundary):
            r = p.resource.canonical
            if isinstance(p.body, Nil):
                return (p.policy, p.state, tuple(p.holders or ())) in e.gamma_of(r)
            return self.check(p.body, delta + ((r, p.policy, p.state, _frame_labels(p)),))
        if isinstance(p, Request):
            r, chi = p.resource.canonical, p.label
            for phi, eta, s in e.gamma_of(r):
                if chi in s:
                    continue
                frame = (r, phi, eta + (Special("in", chi),), s + (chi,))
                if not self.check(p.body, delta + (frame,)):
                    return False
            return True
        if isinstance(p, Prefix):
            return self._prefix(p, delta)
        raise TypeError(p)

    def _prefix(self, p: Prefix, delta: tuple) -> bool:
        e = self.e
        pi, cont = p.prefix, p.cont
        if isinstance(pi, Tau):
            return self.check(cont, delta)
        if isinstance(pi, Output):
            w = e.rho_of(pi.payload)
            if any(not w <= e.kappa_of(a) for a in e.rho_of(pi.channel)):
                return False
            return self.check(cont, delta)
        if isinstance(pi, Input):
            b = pi.binder
            rb = e.rho_of(b)
            for a in e.rho_of(pi.channel):
                if any(v.resource == b.resource and v not in rb for v in e.kappa_of(a)):
                    return False
            if b.resource:
                return all(self.check(substitute(cont, b, r), delta) for r in rb if r.resource)
            return self.check(cont, delta)
        if isinstance(pi, Access):
            r = pi.resource.canonical
            i = _find_frame(delta, r)
            if i < 0:
                return delta in e.psi
            _, phi, eta, s = delta[i]
            eta2 = eta + (pi.action,)
            if admits(phi, eta2):
                return self.check(cont, delta[:i] + ((r, phi, eta2, s),) + delta[i + 1:])
            return ((phi, eta + (Special("err_out", s[-1]),), s) in e.gamma_of(r)
                    and self.check(cont, delta[:i] + delta[i + 1:]))
        if isinstance(pi, Release):
            r = pi.resource.canonical
            i = _find_frame(delta, r)
            if i < 0:
                return delta in e.psi
            _, phi, eta, s = delta[i]
            return ((phi, eta + (REL, Special("out", s[-1])), s) in e.gamma_of(r)
                    and self.check(cont, delta[:i] + delta[i + 1:]))
        raise TypeError(pi)


# -- reports ----------------------------------------------------------------

def is_faulty(eta) -> bool:
    return any(isinstance(ev, Special) and ev.kind == "err_out" for ev in eta)


def resource_named(e: Estimate, r) -> Name:
    """Accept a resource ``Name`` or its identifier (with or without ``#``)."""
    if isinstance(r, Name):
        return r.canonical
    ident = str(r).lstrip("#")
    hits = {n for n in e.gamma if n.ident == ident}
    if len(hits) > 1:
        raise ValueError(f"resource name {r!r} is ambiguous")
    return hits.pop() if hits else Name(ident, True)


def faulty_traces(e: Estimate, r) -> Set[Tuple[tuple, Tuple[str, ...]]]:
    r = resource_named(e, r)
    return {(eta, s) for _, eta, s in e.gamma_of(r) if is_faulty(eta)}


def respects(p: Process, r, e: Optional[Estimate] = None) -> bool:
    """No faulty trace for ``r`` in the least estimate of ``p``."""
    e = least_estimate(p) if e is None else e
    return not faulty_traces(e, r)


def unreleased_report(e: Estimate) -> Set[Tuple[Name, tuple]]:
    return {(f[0], delta) for delta in e.psi for f in delta}
