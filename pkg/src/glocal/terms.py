"""Process terms for the G-Local pi-calculus.

Names carry a canonical class ``(ident, site)`` fixed at parse time plus a
``copy`` index used only by alpha-renaming, so analysis results stay
attached to the names of the original program.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from typing import Iterable, Iterator, NamedTuple, Optional, Tuple, Union

__all__ = [
    "Name", "Special", "REL", "Trace", "event_str",
    "Tau", "Input", "Output", "Access", "Release",
    "Nil", "NIL", "Prefix", "Restrict", "Choice", "Par", "Boundary",
    "Request", "Replicate", "Process",
    "par", "choice", "par_components", "choice_components", "is_available",
    "free_names", "all_names", "substitute", "label_boundaries",
    "erase_labels", "labels_of", "is_labeled", "is_sequential",
    "alpha_equivalent", "term_key", "default_holders",
]


class _Cached:
    """Mixin: cache the structural hash, drop caches when pickling."""

    _CACHES = ("_hash", "_key", "_fn")

    def __hash__(self):
        d = self.__dict__
        h = d.get("_hash")
        if h is None:
            h = hash((type(self).__name__,) + tuple(getattr(self, f.name) for f in fields(self)))
            object.__setattr__(self, "_hash", h)
        return h

    def __getstate__(self):
        return {k: v for k, v in self.__dict__.items() if k not in self._CACHES}

    def __setstate__(self, state):
        for k, v in state.items():
            object.__setattr__(self, k, v)


@dataclass(frozen=True)
class Name:
    ident: str
    resource: bool = False
    site: int = 0
    copy: int = 0
    variable: bool = field(default=False, compare=False)

    def __hash__(self):
        h = self.__dict__.get("_hash")
        if h is None:
            h = hash((self.ident, self.resource, self.site, self.copy))
            object.__setattr__(self, "_hash", h)
        return h

    def __getstate__(self):
        return {k: v for k, v in self.__dict__.items() if k != "_hash"}

    def __setstate__(self, state):
        for k, v in state.items():
            object.__setattr__(self, k, v)

    @property
    def kind(self) -> str:
        base = "resource" if self.resource else "channel"
        return f"{base}-{'variable' if self.variable else 'name'}"

    @property
    def canonical(self) -> "Name":
        return self if self.copy == 0 else replace(self, copy=0)

    @property
    def display(self) -> str:
        return self.ident if self.copy == 0 else f"{self.ident}'{self.copy}"

    def __str__(self) -> str:
        return ("#" if self.resource else "") + self.display


class Special(NamedTuple):
    """Analysis-only trace event: ``in``, ``out`` or ``err_out`` of a label.

    A named tuple rather than a dataclass: traces are hashed constantly
    during analysis and tuple hashing stays in C.
    """

    kind: str
    label: str

    def __str__(self) -> str:
        return f"{self.kind}({self.label})"



REL = "rel"
Event = Union[str, Special]
Trace = Tuple[Event, ...]


def event_str(e: Event) -> str:
    return str(e)


# -- prefixes ---------------------------------------------------------------

@dataclass(frozen=True)
class Tau:
    def __str__(self):
        return "tau"


@dataclass(frozen=True)
class Input:
    channel: Name
    binder: Name

    def __str__(self):
        b = f"res {self.binder}" if self.binder.resource else str(self.binder)
        return f"{self.channel}({b})"


@dataclass(frozen=True)
class Output:
    channel: Name
    payload: Name

    def __str__(self):
        return f"{self.channel}<{self.payload}>"


@dataclass(frozen=True)
class Access:
    action: str
    resource: Name

    def __str__(self):
        return f"{self.action}({self.resource})"


@dataclass(frozen=True)
class Release:
    resource: Name

    def __str__(self):
        return f"rel({self.resource})"


PrefixAction = Union[Tau, Input, Output, Access, Release]


# -- processes --------------------------------------------------------------

@dataclass(frozen=True, eq=True)
class Nil(_Cached):
    __hash__ = _Cached.__hash__


NIL = Nil()


@dataclass(frozen=True, eq=True)
class Prefix(_Cached):
    prefix: PrefixAction
    cont: "Process"
    __hash__ = _Cached.__hash__


@dataclass(frozen=True, eq=True)
class Restrict(_Cached):
    name: Name
    body: "Process"
    __hash__ = _Cached.__hash__

    def __post_init__(self):
        if self.name.resource:
            raise ValueError("restriction is not applied to resource names")


@dataclass(frozen=True, eq=True)
class Choice(_Cached):
    left: "Process"
    right: "Process"
    __hash__ = _Cached.__hash__


@dataclass(frozen=True, eq=True)
class Par(_Cached):
    left: "Process"
    right: "Process"
    __hash__ = _Cached.__hash__


@dataclass(frozen=True, eq=True)
class Boundary(_Cached):
    """Resource joint point ``(r, phi, eta){P}``.

    ``state`` is the usage history; at run time it also records the
    special in/out/err_out events so a successor can be checked against an
    estimate. ``holders`` is the label sequence of processes that entered.
    """

    resource: Name
    policy: object
    state: Trace
    body: "Process"
    label: Optional[str] = None
    holders: Optional[Tuple[str, ...]] = None
    __hash__ = _Cached.__hash__

    def __post_init__(self):
        if not self.resource.resource:
            raise ValueError(f"boundary over non-resource name {self.resource}")


@dataclass(frozen=True, eq=True)
class Request(_Cached):
    resource: Name
    body: "Process"
    label: Optional[str] = None
    __hash__ = _Cached.__hash__

    def __post_init__(self):
        if not self.resource.resource:
            raise ValueError(f"request over non-resource name {self.resource}")


@dataclass(frozen=True, eq=True)
class Replicate(_Cached):
    body: "Process"
    budget: Optional[int] = None
    __hash__ = _Cached.__hash__


Process = Union[Nil, Prefix, Restrict, Choice, Par, Boundary, Request, Replicate]


def par(*ps: Process) -> Process:
    """Right-nested parallel composition, dropping nils."""
    ps = [p for p in ps if not isinstance(p, Nil)]
    if not ps:
        return NIL
    out = ps[-1]
    for p in reversed(ps[:-1]):
        out = Par(p, out)
    return out


def choice(*ps: Process) -> Process:
    ps = [p for p in ps if not isinstance(p, Nil)]
    if not ps:
        return NIL
    out = ps[-1]
    for p in reversed(ps[:-1]):
        out = Choice(p, out)
    return out


def par_components(p: Process) -> list:
    if isinstance(p, Par):
        return par_components(p.left) + par_components(p.right)
    return [] if isinstance(p, Nil) else [p]


def choice_components(p: Process) -> list:
    if isinstance(p, Choice):
        return choice_components(p.left) + choice_components(p.right)
    return [] if isinstance(p, Nil) else [p]


def is_available(p: Process) -> bool:
    return isinstance(p, Boundary) and isinstance(p.body, Nil)


def default_holders(label: Optional[str], body: Process) -> Tuple[str, ...]:
    if isinstance(body, Nil) or label is None:
        return ()
    return (label,)


# -- names ------------------------------------------------------------------

def _prefix_names(pi) -> Tuple[Name, ...]:
    if isinstance(pi, Input):
        return (pi.channel,)
    if isinstance(pi, Output):
        return (pi.channel, pi.payload)
    if isinstance(pi, (Access, Release)):
        return (pi.resource,)
    return ()


def free_names(p: Process) -> frozenset:
    cached = p.__dict__.get("_fn")
    if cached is not None:
        return cached
    if isinstance(p, Nil):
        fn = frozenset()
    elif isinstance(p, Prefix):
        fn = free_names(p.cont)
        if isinstance(p.prefix, Input):
            fn = fn - {p.prefix.binder}
        fn = fn | frozenset(_prefix_names(p.prefix))
    elif isinstance(p, Restrict):
        fn = free_names(p.body) - {p.name}
    elif isinstance(p, (Choice, Par)):
        fn = free_names(p.left) | free_names(p.right)
    elif isinstance(p, (Boundary, Request)):
        fn = free_names(p.body) | {p.resource}
    elif isinstance(p, Replicate):
        fn = free_names(p.body)
    else:
        raise TypeError(p)
    object.__setattr__(p, "_fn", fn)
    return fn


def all_names(p: Process) -> Iterator[Name]:
    """Every name occurrence, binders included."""
    if isinstance(p, Prefix):
        yield from _prefix_names(p.prefix)
        if isinstance(p.prefix, Input):
            yield p.prefix.binder
        yield from all_names(p.cont)
    elif isinstance(p, Restrict):
        yield p.name
        yield from all_names(p.body)
    elif isinstance(p, (Choice, Par)):
        yield from all_names(p.left)
        yield from all_names(p.right)
    elif isinstance(p, (Boundary, Request)):
        yield p.resource
        yield from all_names(p.body)
    elif isinstance(p, Replicate):
        yield from all_names(p.body)


def _fresh_copy(n: Name, *ps: Process, avoid: Iterable[Name] = ()) -> Name:
    top = n.copy
    for q in ps:
        for m in all_names(q):
            if m.canonical == n.canonical:
                top = max(top, m.copy)
    for m in avoid:
        if m.canonical == n.canonical:
            top = max(top, m.copy)
    return replace(n, copy=top + 1)


def _sub_name(n: Name, old: Name, new: Name) -> Name:
    return new if n == old else n


def _sub_prefix(pi, old, new):
    if isinstance(pi, Input):
        return Input(_sub_name(pi.channel, old, new), pi.binder)
    if isinstance(pi, Output):
        return Output(_sub_name(pi.channel, old, new), _sub_name(pi.payload, old, new))
    if isinstance(pi, Access):
        return Access(pi.action, _sub_name(pi.resource, old, new))
    if isinstance(pi, Release):
        return Release(_sub_name(pi.resource, old, new))
    return pi


def substitute(p: Process, old: Name, new: Name) -> Process:
    """Capture-avoiding ``p{new/old}``.

    A binder that would capture ``new`` is renamed to a fresh copy of its
    own canonical class.
    """
    if old.resource != new.resource:
        raise ValueError(f"cannot substitute {new} ({new.kind}) for {old} ({old.kind})")
    if old == new or old not in free_names(p):
        return p
    return _subst(p, old, new)


def _subst(p, old, new):
    if old not in free_names(p):
        return p
    if isinstance(p, Prefix):
        pi = p.prefix
        cont = p.cont
        if isinstance(pi, Input):
            b = pi.binder
            if b == old:
                return Prefix(_sub_prefix(pi, old, new), cont)
            if b == new:
                fresh = _fresh_copy(b, cont, avoid=(new,))
                cont = _subst(cont, b, fresh)
                pi = Input(pi.channel, fresh)
        return Prefix(_sub_prefix(pi, old, new), _subst(cont, old, new))
    if isinstance(p, Restrict):
        x, body = p.name, p.body
        if x == new:
            fresh = _fresh_copy(x, body, avoid=(new,))
            body = _subst(body, x, fresh)
            x = fresh
        return Restrict(x, _subst(body, old, new))
    if isinstance(p, Choice):
        return Choice(_subst(p.left, old, new), _subst(p.right, old, new))
    if isinstance(p, Par):
        return Par(_subst(p.left, old, new), _subst(p.right, old, new))
    if isinstance(p, Boundary):
        return replace(p, resource=_sub_name(p.resource, old, new), body=_subst(p.body, old, new))
    if isinstance(p, Request):
        return replace(p, resource=_sub_name(p.resource, old, new), body=_subst(p.body, old, new))
    if isinstance(p, Replicate):
        return replace(p, body=_subst(p.body, old, new))
    return p


# -- labels -----------------------------------------------------------------

def labels_of(p: Process) -> list:
    out = []

    def walk(q):
        if isinstance(q, (Boundary, Request)):
            if q.label is not None:
                out.append(q.label)
            walk(q.body)
        elif isinstance(q, Prefix):
            walk(q.cont)
        elif isinstance(q, (Restrict, Replicate)):
            walk(q.body)
        elif isinstance(q, (Choice, Par)):
            walk(q.left)
            walk(q.right)

    walk(p)
    return out


def is_labeled(p: Process) -> bool:
    if isinstance(p, Boundary):
        return p.label is not None and p.holders is not None and is_labeled(p.body)
    if isinstance(p, Request):
        return p.label is not None and is_labeled(p.body)
    if isinstance(p, Prefix):
        return is_labeled(p.cont)
    if isinstance(p, (Restrict, Replicate)):
        return is_labeled(p.body)
    if isinstance(p, (Choice, Par)):
        return is_labeled(p.left) and is_labeled(p.right)
    return True


def label_boundaries(p: Process, prefix: str = "chi") -> Process:
    """Give every boundary and request a unique label.

    Existing labels are kept; duplicates among them are rejected. Copies
    produced by replication share labels at run time, so this is meant for
    source terms.
    """
    existing = labels_of(p)
    seen = set()
    for lab in existing:
        if lab in seen:
            raise ValueError(f"duplicate boundary label {lab!r}")
        seen.add(lab)
    counter = [0]

    def fresh():
        while True:
            counter[0] += 1
            cand = f"{prefix}{counter[0]}"
            if cand not in seen:
                seen.add(cand)
                return cand

    def walk(q):
        if isinstance(q, Boundary):
            body = walk(q.body)
            label = q.label if q.label is not None else fresh()
            holders = q.holders if q.holders is not None else default_holders(label, body)
            if body is q.body and label == q.label and holders == q.holders:
                return q
            return replace(q, body=body, label=label, holders=holders)
        if isinstance(q, Request):
            body = walk(q.body)
            label = q.label if q.label is not None else fresh()
            if body is q.body and label == q.label:
                return q
            return replace(q, body=body, label=label)
        if isinstance(q, Prefix):
            c = walk(q.cont)
            return q if c is q.cont else Prefix(q.prefix, c)
        if isinstance(q, (Restrict, Replicate)):
            b = walk(q.body)
            return q if b is q.body else replace(q, body=b)
        if isinstance(q, (Choice, Par)):
            l, r = walk(q.left), walk(q.right)
            return q if (l is q.left and r is q.right) else type(q)(l, r)
        return q

    return walk(p)


def erase_labels(p: Process) -> Process:
    if isinstance(p, Boundary):
        return replace(p, body=erase_labels(p.body), label=None, holders=None)
    if isinstance(p, Request):
        return replace(p, body=erase_labels(p.body), label=None)
    if isinstance(p, Prefix):
        return Prefix(p.prefix, erase_labels(p.cont))
    if isinstance(p, (Restrict, Replicate)):
        return replace(p, body=erase_labels(p.body))
    if isinstance(p, (Choice, Par)):
        return type(p)(erase_labels(p.left), erase_labels(p.right))
    return p


# -- sequential fragment ----------------------------------------------------

def _is_q(q: Process) -> bool:
    if isinstance(q, Nil):
        return True
    if isinstance(q, Restrict):
        return _is_q(q.body)
    if isinstance(q, Prefix):
        return _is_q(q.cont)
    if isinstance(q, Choice):
        return _is_q(q.left) and _is_q(q.right)
    if isinstance(q, (Boundary, Request)):
        return _is_q(q.body)
    if isinstance(q, Par):
        comps = par_components(q)
        busy = [c for c in comps if not is_available(c)]
        return len(busy) <= 1 and all(_is_q(c) for c in comps)
    return False


def is_sequential(p: Process) -> bool:
    """True iff every resource-scope body lies in the sequential sub-grammar."""
    if isinstance(p, (Boundary, Request)):
        return _is_q(p.body)
    if isinstance(p, Prefix):
        return is_sequential(p.cont)
    if isinstance(p, (Restrict, Replicate)):
        return is_sequential(p.body)
    if isinstance(p, (Choice, Par)):
        return is_sequential(p.left) and is_sequential(p.right)
    return True


# -- ordering and alpha-equivalence -----------------------------------------

def _nkey(n: Name):
    return (n.ident, int(n.resource), n.site, n.copy)


def _pikey(pi):
    if isinstance(pi, Tau):
        return ("tau",)
    if isinstance(pi, Input):
        return ("in", _nkey(pi.channel), _nkey(pi.binder))
    if isinstance(pi, Output):
        return ("out", _nkey(pi.channel), _nkey(pi.payload))
    if isinstance(pi, Access):
        return ("acc", pi.action, _nkey(pi.resource))
    return ("rel", _nkey(pi.resource))


def term_key(p: Process):
    """Total structural order used to sort parallel and choice operands."""
    k = p.__dict__.get("_key")
    if k is not None:
        return k
    if isinstance(p, Nil):
        k = ("0",)
    elif isinstance(p, Prefix):
        k = ("p", _pikey(p.prefix), term_key(p.cont))
    elif isinstance(p, Restrict):
        k = ("nu", _nkey(p.name), term_key(p.body))
    elif isinstance(p, Choice):
        k = ("+", term_key(p.left), term_key(p.right))
    elif isinstance(p, Par):
        k = ("|", term_key(p.left), term_key(p.right))
    elif isinstance(p, Boundary):
        k = ("res", _nkey(p.resource), getattr(p.policy, "name", str(p.policy)),
             tuple(str(e) for e in p.state), p.label or "", p.holders or (), term_key(p.body))
    elif isinstance(p, Request):
        k = ("req", _nkey(p.resource), p.label or "", term_key(p.body))
    elif isinstance(p, Replicate):
        k = ("!", -1 if p.budget is None else p.budget, term_key(p.body))
    else:
        raise TypeError(p)
    object.__setattr__(p, "_key", k)
    return k


def alpha_equivalent(p: Process, q: Process) -> bool:
    """Structural equality up to consistent renaming of bound names.

    Free names are compared by kind and display text, which is what a
    pretty-print/parse cycle preserves.
    """

    def name_eq(a: Name, b: Name, env) -> bool:
        for x, y in reversed(env):
            if a == x or b == y:
                return a == x and b == y
        return a.resource == b.resource and a.display == b.display

    def go(a, b, env) -> bool:
        if type(a) is not type(b):
            return False
        if isinstance(a, Nil):
            return True
        if isinstance(a, Prefix):
            pa, pb = a.prefix, b.prefix
            if type(pa) is not type(pb):
                return False
            if isinstance(pa, Input):
                if pa.binder.resource != pb.binder.resource or not name_eq(pa.channel, pb.channel, env):
                    return False
                return go(a.cont, b.cont, env + [(pa.binder, pb.binder)])
            if isinstance(pa, Output):
                ok = name_eq(pa.channel, pb.channel, env) and name_eq(pa.payload, pb.payload, env)
            elif isinstance(pa, Access):
                ok = pa.action == pb.action and name_eq(pa.resource, pb.resource, env)
            elif isinstance(pa, Release):
                ok = name_eq(pa.resource, pb.resource, env)
            else:
                ok = True
            return ok and go(a.cont, b.cont, env)
        if isinstance(a, Restrict):
            return go(a.body, b.body, env + [(a.name, b.name)])
        if isinstance(a, (Choice, Par)):
            return go(a.left, b.left, env) and go(a.right, b.right, env)
        if isinstance(a, Boundary):
            return (name_eq(a.resource, b.resource, env)
                    and getattr(a.policy, "name", a.policy) == getattr(b.policy, "name", b.policy)
                    and a.state == b.state and a.label == b.label and a.holders == b.holders
                    and go(a.body, b.body, env))
        if isinstance(a, Request):
            return name_eq(a.resource, b.resource, env) and a.label == b.label and go(a.body, b.body, env)
        if isinstance(a, Replicate):
            return a.budget == b.budget and go(a.body, b.body, env)
        return False

    return go(p, q, [])
