"""Structural congruence and the labelled transition relation."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import List, Optional, Sequence, Tuple

from .policy import PolicyAutomaton, admits
from .terms import (
    NIL, REL, Access, Boundary, Choice, Input, Name, Nil, Output, Par, Prefix,
    Process, Release, Replicate, Request, Restrict, Special, Tau, Trace, all_names,
    choice_components, free_names, is_available, is_labeled, labels_of,
    par_components, substitute, term_key,
)

__all__ = [
    "Silent", "FreeInput", "FreeOutput", "BoundOutput", "OpenAccess", "OpenRelease",
    "ClosedAccess", "ClosedRelease", "FaultyAccess", "Label", "label_names",
    "is_system_label", "ReconfigEvent", "congruence_normalize", "step",
    "replication_unfold", "build_par", "build_choice",
]


# -- labels -----------------------------------------------------------------

@dataclass(frozen=True)
class Silent:
    def __str__(self):
        return "tau"


@dataclass(frozen=True)
class FreeInput:
    channel: Name
    binder: Name

    def __str__(self):
        return f"{self.channel}({self.binder})"


@dataclass(frozen=True)
class FreeOutput:
    channel: Name
    payload: Name

    def __str__(self):
        return f"{self.channel}<{self.payload}>"


@dataclass(frozen=True)
class BoundOutput:
    channel: Name
    payload: Name

    def __str__(self):
        return f"{self.channel}<({self.payload})>"


@dataclass(frozen=True)
class OpenAccess:
    action: str
    resource: Name

    def __str__(self):
        return f"{self.action}?{self.resource}"


@dataclass(frozen=True)
class OpenRelease:
    resource: Name

    def __str__(self):
        return f"rel?{self.resource}"


@dataclass(frozen=True)
class ClosedAccess:
    action: str
    resource: Name

    def __str__(self):
        return f"{self.action}({self.resource})"


@dataclass(frozen=True)
class ClosedRelease:
    resource: Name

    def __str__(self):
        return f"rel({self.resource})"


@dataclass(frozen=True)
class FaultyAccess:
    action: str
    resource: Name

    def __str__(self):
        return f"fault {self.action}({self.resource})"


Label = object
SILENT = Silent()


def label_names(mu) -> frozenset:
    if isinstance(mu, (FreeInput,)):
        return frozenset((mu.channel, mu.binder))
    if isinstance(mu, (FreeOutput, BoundOutput)):
        return frozenset((mu.channel, mu.payload))
    if isinstance(mu, (OpenAccess, OpenRelease, ClosedAccess, ClosedRelease, FaultyAccess)):
        return frozenset((mu.resource,))
    return frozenset()


def is_system_label(mu) -> bool:
    """Labels a closed system can perform on its own."""
    return isinstance(mu, (Silent, ClosedAccess, ClosedRelease, FaultyAccess))


@dataclass(frozen=True)
class ReconfigEvent:
    """A resource-manager action fired at a fixed step of a run."""

    kind: str  # "appear" | "disappear"
    resource: Name
    at_step: int
    policy: Optional[PolicyAutomaton] = None
    state: Trace = ()

    def __post_init__(self):
        if self.kind not in ("appear", "disappear"):
            raise ValueError(f"unknown reconfiguration {self.kind!r}")
        if self.kind == "appear" and self.policy is None:
            raise ValueError("appear needs a policy")


def check_script(script: Sequence[ReconfigEvent]) -> None:
    steps = [e.at_step for e in script]
    if any(b <= a for a, b in zip(steps, steps[1:])):
        raise ValueError("reconfiguration steps must be strictly increasing")


# -- structural congruence --------------------------------------------------

def build_par(comps) -> Process:
    flat = []
    for c in comps:
        flat.extend(par_components(c))
    flat.sort(key=term_key)
    if not flat:
        return NIL
    out = flat[-1]
    for c in reversed(flat[:-1]):
        out = Par(c, out)
    return out


def build_choice(comps) -> Process:
    flat = []
    for c in comps:
        flat.extend(choice_components(c))
    flat.sort(key=term_key)
    if not flat:
        return NIL
    out = flat[-1]
    for c in reversed(flat[:-1]):
        out = Choice(c, out)
    return out


def _restrict(x: Name, body: Process) -> Process:
    """Normal form of ``(nu x) body`` for an already normal ``body``."""
    if x not in free_names(body):
        return body
    if isinstance(body, Par):
        comps = par_components(body)
        using = [c for c in comps if x in free_names(c)]
        rest = [c for c in comps if x not in free_names(c)]
        if len(using) == 1:
            return build_par(rest + [_restrict(x, using[0])])
        return build_par(rest + [Restrict(x, build_par(using))])
    if isinstance(body, (Boundary, Request)) and not is_available(body):
        return replace(body, body=_restrict(x, body.body))
    return Restrict(x, body)


def congruence_normalize(p: Process) -> Process:
    """Canonical representative of the congruence class of ``p``.

    Parallel and choice operands are flattened and sorted, nils dropped,
    restrictions pushed as far in as their scope allows, and available
    resources floated out of every enclosing resource boundary.
    """
    if isinstance(p, Nil):
        return NIL
    if isinstance(p, Prefix):
        return Prefix(p.prefix, congruence_normalize(p.cont))
    if isinstance(p, Choice):
        return build_choice([congruence_normalize(c) for c in choice_components(p)])
    if isinstance(p, Par):
        return build_par([congruence_normalize(c) for c in par_components(p)])
    if isinstance(p, Restrict):
        return _restrict(p.name, congruence_normalize(p.body))
    if isinstance(p, Boundary):
        body = congruence_normalize(p.body)
        if isinstance(body, Nil):
            return replace(p, body=NIL)
        comps = par_components(body)
        avail = [c for c in comps if is_available(c)]
        if not avail:
            return replace(p, body=body)
        rest = [c for c in comps if not is_available(c)]
        return build_par(avail + [replace(p, body=build_par(rest))])
    if isinstance(p, Request):
        return replace(p, body=congruence_normalize(p.body))
    if isinstance(p, Replicate):
        return replace(p, body=congruence_normalize(p.body))
    raise TypeError(p)


def replication_unfold(p: Process, budget: Optional[int]) -> Process:
    """Attach a remaining-copies budget to every replication."""
    if isinstance(p, Replicate):
        return Replicate(replication_unfold(p.body, budget), budget)
    if isinstance(p, Prefix):
        return Prefix(p.prefix, replication_unfold(p.cont, budget))
    if isinstance(p, (Restrict, Boundary, Request)):
        return replace(p, body=replication_unfold(p.body, budget))
    if isinstance(p, (Choice, Par)):
        return type(p)(replication_unfold(p.left, budget), replication_unfold(p.right, budget))
    return p


# -- transitions ------------------------------------------------------------

class _Ctx:
    """Per-step freshness source for extruded names."""

    def __init__(self, top: Process):
        self.top = top
        self.issued: list = []

    def fresh(self, n: Name) -> Name:
        top = n.copy
        for m in list(all_names(self.top)) + self.issued:
            if m.canonical == n.canonical:
                top = max(top, m.copy)
        out = replace(n, copy=top + 1)
        self.issued.append(out)
        return out


def _active_requests(p: Process):
    """Requests that a sibling available resource can reach through law 3."""
    if isinstance(p, Request):
        yield p, lambda new: new
    elif isinstance(p, Par):
        comps = par_components(p)
        for i, c in enumerate(comps):
            for req, rebuild in _active_requests(c):
                yield req, (lambda new, i=i, rebuild=rebuild:
                            build_par(comps[:i] + [rebuild(new)] + comps[i + 1:]))
    elif isinstance(p, Boundary) and not is_available(p):
        for req, rebuild in _active_requests(p.body):
            yield req, (lambda new, rebuild=rebuild: replace(p, body=rebuild(new)))
    elif isinstance(p, Restrict):
        for req, rebuild in _active_requests(p.body):
            yield req, (lambda new, rebuild=rebuild: Restrict(p.name, rebuild(new)))


def _acquire(avail: Boundary, req: Request) -> Boundary:
    chi = req.label
    return Boundary(avail.resource, avail.policy, avail.state + (Special("in", chi),), req.body,
                    avail.label, (avail.holders or ()) + (chi,))


def _par_trans(comps: List[Process], ctx: _Ctx):
    out = []
    singles = [_trans(c, ctx) for c in comps]
    for i, moves in enumerate(singles):
        others = comps[:i] + comps[i + 1:]
        fn_others = frozenset().union(*(free_names(o) for o in others)) if others else frozenset()
        for mu, c2 in moves:
            if isinstance(mu, FreeInput) and mu.binder in fn_others:
                z = ctx.fresh(mu.binder)
                c2 = substitute(c2, mu.binder, z)
                mu = FreeInput(mu.channel, z)
            if isinstance(mu, BoundOutput) and mu.payload in fn_others:
                continue
            out.append((mu, build_par(comps[:i] + [c2] + comps[i + 1:])))
    # Comm, Comm_R and Close
    for i, outs in enumerate(singles):
        for mu_o, ci in outs:
            if not isinstance(mu_o, (FreeOutput, BoundOutput)):
                continue
            for j, ins in enumerate(singles):
                if i == j:
                    continue
                for mu_i, cj in ins:
                    if not isinstance(mu_i, FreeInput) or mu_i.channel != mu_o.channel:
                        continue
                    if mu_i.binder.resource != mu_o.payload.resource:
                        continue
                    cj2 = substitute(cj, mu_i.binder, mu_o.payload)
                    rest = [c for k, c in enumerate(comps) if k not in (i, j)]
                    if isinstance(mu_o, FreeOutput):
                        out.append((SILENT, build_par(rest + [ci, cj2])))
                    else:
                        out.append((SILENT, build_par(rest + [Restrict(mu_o.payload, build_par([ci, cj2]))])))
    # Acquire
    for i, a in enumerate(comps):
        if not is_available(a):
            continue
        for j, c in enumerate(comps):
            if i == j:
                continue
            for req, rebuild in _active_requests(c):
                if req.resource != a.resource:
                    continue
                rest = [x for k, x in enumerate(comps) if k not in (i, j)]
                out.append((SILENT, build_par(rest + [rebuild(_acquire(a, req))])))
    return out


def _trans(p: Process, ctx: _Ctx):
    if isinstance(p, Nil):
        return []
    if isinstance(p, Prefix):
        pi = p.prefix
        if isinstance(pi, Tau):
            return [(SILENT, p.cont)]
        if isinstance(pi, Output):
            return [(FreeOutput(pi.channel, pi.payload), p.cont)]
        if isinstance(pi, Input):
            return [(FreeInput(pi.channel, pi.binder), p.cont)]
        if isinstance(pi, Access):
            return [(OpenAccess(pi.action, pi.resource), p.cont)]
        if isinstance(pi, Release):
            return [(OpenRelease(pi.resource), p.cont)]
    if isinstance(p, Choice):
        return [m for c in choice_components(p) for m in _trans(c, ctx)]
    if isinstance(p, Par):
        return _par_trans(par_components(p), ctx)
    if isinstance(p, Restrict):
        z = p.name
        out = []
        for mu, b in _trans(p.body, ctx):
            if z not in label_names(mu):
                out.append((mu, Restrict(z, b)))
            elif isinstance(mu, FreeOutput) and mu.payload == z and mu.channel != z:
                z2 = ctx.fresh(z)
                out.append((BoundOutput(mu.channel, z2), substitute(b, z, z2)))
        return out
    if isinstance(p, Boundary):
        return _boundary_trans(p, ctx)
    if isinstance(p, Request):
        return [(mu, replace(p, body=b)) for mu, b in _trans(p.body, ctx)
                if p.resource not in label_names(mu)]
    if isinstance(p, Replicate):
        return _replicate_trans(p, ctx)
    raise TypeError(p)


def _boundary_trans(p: Boundary, ctx: _Ctx):
    if isinstance(p.body, Nil):
        return []
    r = p.resource
    holder = p.holders[-1] if p.holders else p.label
    out = []
    for mu, b in _trans(p.body, ctx):
        if isinstance(mu, OpenAccess) and mu.resource == r:
            eta = p.state + (mu.action,)
            if admits(p.policy, eta):
                out.append((ClosedAccess(mu.action, r), replace(p, state=eta, body=b)))
            else:
                reset = replace(p, state=p.state + (Special("err_out", holder),), body=NIL)
                out.append((FaultyAccess(mu.action, r), build_par([reset, b])))
        elif isinstance(mu, OpenRelease) and mu.resource == r:
            freed = replace(p, state=p.state + (REL, Special("out", holder)), body=NIL)
            out.append((ClosedRelease(r), build_par([freed, b])))
        elif r not in label_names(mu):
            out.append((mu, replace(p, body=b)))
    return out


def _replicate_trans(p: Replicate, ctx: _Ctx):
    if p.budget is not None and p.budget <= 0:
        return []
    rest1 = Replicate(p.body, None if p.budget is None else p.budget - 1)
    moves = _trans(p.body, ctx)
    out = [(mu, build_par([b, rest1])) for mu, b in moves]
    if p.budget is None or p.budget >= 2:
        rest2 = Replicate(p.body, None if p.budget is None else p.budget - 2)
        for mu_o, ci in moves:
            if not isinstance(mu_o, (FreeOutput, BoundOutput)):
                continue
            for mu_i, cj in moves:
                if (isinstance(mu_i, FreeInput) and mu_i.channel == mu_o.channel
                        and mu_i.binder.resource == mu_o.payload.resource):
                    cj2 = substitute(cj, mu_i.binder, mu_o.payload)
                    if isinstance(mu_o, FreeOutput):
                        out.append((SILENT, build_par([ci, cj2, rest2])))
                    else:
                        out.append((SILENT, build_par([Restrict(mu_o.payload, build_par([ci, cj2])), rest2])))
    return out


def _disappear(p: Process, r: Name):
    """Every way of deleting one boundary for ``r`` at an active position."""
    if isinstance(p, Boundary):
        if p.resource == r:
            yield NIL
        if not is_available(p):
            for b in _disappear(p.body, r):
                yield replace(p, body=b)
    elif isinstance(p, Par):
        comps = par_components(p)
        for i, c in enumerate(comps):
            for c2 in _disappear(c, r):
                yield build_par(comps[:i] + [c2] + comps[i + 1:])
    elif isinstance(p, (Restrict, Request)):
        for b in _disappear(p.body, r):
            yield replace(p, body=b)


def _appear_label(p: Process, step_index: int) -> str:
    used = set(labels_of(p))
    k = 0
    while f"chi_app{step_index}_{k}" in used:
        k += 1
    return f"chi_app{step_index}_{k}"


def step(p: Process, script: Sequence[ReconfigEvent] = (), step_index: int = 0):
    """All one-step successors of a labelled term, normalized and ordered.

    A scripted reconfiguration due at ``step_index`` preempts the process
    moves for that step; if it cannot apply, the process moves instead.
    """
    if not is_labeled(p):
        raise ValueError("step needs a labelled term (run label_boundaries first)")
    moves = []
    for ev in script:
        if ev.at_step != step_index:
            continue
        if ev.kind == "appear":
            fresh = Boundary(ev.resource, ev.policy, tuple(ev.state), NIL, _appear_label(p, step_index), ())
            moves.append((SILENT, Par(p, fresh)))
        else:
            moves.extend((SILENT, q) for q in _disappear(p, ev.resource))
    if not moves:
        moves = _trans(p, _Ctx(p))
    seen = {}
    for mu, q in moves:
        q = congruence_normalize(q)
        seen.setdefault((mu, q), None)
    return sorted(seen, key=lambda m: (str(m[0]), term_key(m[1])))
