"""Seeded generator of small closed terms in the sequential fragment.

Every term declares one available boundary per resource (``#r1``, ``#r2``)
at top level, so every request has at least one Gamma entry to start
from, and no request or boundary sits under a replication. Threads talk
over channels ``x`` and ``y`` and act with ``a`` and ``b``.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import List

from glocal.policy import PolicyAutomaton
from glocal.terms import (
    NIL, Access, Boundary, Choice, Input, Name, Output, Par, Prefix, Process, Release,
    Replicate, Request, Restrict, Tau, label_boundaries,
)

R1, R2 = Name("r1", True), Name("r2", True)
X, Y = Name("x"), Name("y")
RESOURCES = (R1, R2)
CHANNELS = (X, Y)
ACTIONS = ("a", "b")

POLICIES = {
    "only_a": PolicyAutomaton.build("only_a", "q", {("q", "a"): "q"}),
    "ab_alt": PolicyAutomaton.build("ab_alt", "q0", {("q0", "a"): "q1", ("q1", "b"): "q0"}),
    "any": PolicyAutomaton.build("any", "q", {}, missing="stay"),
    "a_once": PolicyAutomaton.build("a_once", "q0", {("q0", "a"): "q1", ("q0", "b"): "q0",
                                                     ("q1", "b"): "q1"}),
}


def size(p: Process) -> int:
    if isinstance(p, Prefix):
        return 1 + size(p.cont)
    if isinstance(p, (Restrict, Replicate, Boundary, Request)):
        return 1 + size(p.body)
    if isinstance(p, (Choice, Par)):
        return 1 + size(p.left) + size(p.right)
    return 1


@dataclass
class _Gen:
    rng: random.Random
    budget: int
    stray: float
    site: int = 100

    def spend(self, n: int = 1) -> bool:
        if self.budget < n:
            return False
        self.budget -= n
        return True

    def fresh(self, ident: str, resource: bool = False) -> Name:
        self.site += 1
        return Name(ident, resource, self.site, variable=True)

    def chan(self, env) -> Name:
        return self.rng.choice(list(CHANNELS) + [n for n in env if not n.resource])

    def value(self, env) -> Name:
        if self.rng.random() < 0.6:
            return self.resource(env)
        return self.rng.choice(list(CHANNELS) + [n for n in env if not n.resource])

    def thread(self, env, depth: int, held: tuple = (), replicable: bool = False,
               nested: bool = False) -> Process:
        """A sequential process; ``held`` lists resources in scope (innermost last).

        ``nested`` marks code inside a request body, which must stay free of
        replication even after everything has been released.
        """
        rng = self.rng
        if depth <= 0 or not self.spend():
            return self.finish(held)
        weights = {"tau": 1, "out": 1, "in": 1, "choice": 1}
        free = [r for r in self.resources(env) if r not in held]
        if held:
            weights.update({"act": 5, "rel": 2, "tau": 0.5, "out": 0.5, "in": 0.5})
        elif rng.random() < self.stray:
            weights["act"] = 1
        if not replicable and free:
            weights["req"] = 1 if held else 4
        if not replicable and not nested:
            weights.update(rin=1, new=0.5, bang=0.5)
        kinds = sorted(weights)
        k = rng.choices(kinds, [weights[c] for c in kinds])[0]
        if k == "tau":
            return Prefix(Tau(), self.thread(env, depth - 1, held, replicable, nested))
        if k == "out":
            return Prefix(Output(self.chan(env), self.value(env)), self.thread(env, depth - 1, held, replicable, nested))
        if k == "in":
            z = self.fresh("z")
            return Prefix(Input(self.chan(env), z), self.thread(env + [z], depth - 1, held, replicable, nested))
        if k == "rin":
            s = self.fresh("s", True)
            return Prefix(Input(self.chan(env), s), self.thread(env + [s], depth - 1, held, nested=nested))
        if k == "choice":
            left = self.thread(env, depth - 1, held, replicable, nested)
            return Choice(left, self.thread(env, depth - 1, held, replicable, nested))
        if k == "new":
            n = self.fresh("n")
            n = Name(n.ident, False, n.site)
            return Restrict(n, self.thread(env + [n], depth - 1, held, nested=nested))
        if k == "bang":
            return Replicate(self.thread(env, 2, (), True))
        if k == "act":
            r = rng.choice(held) if held and rng.random() > self.stray else self.resource(env)
            return Prefix(Access(rng.choice(ACTIONS), r), self.thread(env, depth - 1, held, replicable, nested))
        if k == "rel":
            r = held[-1] if rng.random() > self.stray else rng.choice(held)
            rest = tuple(h for h in held if h != r)
            return Prefix(Release(r), self.thread(env, depth - 1, rest, replicable, nested))
        # request, possibly on a resource variable
        r = rng.choice(free)
        body = self.thread(env, depth - 1, held + (r,), nested=True)
        return Request(r, body)

    def resources(self, env) -> list:
        return list(RESOURCES) + [n for n in env if n.resource]

    def resource(self, env) -> Name:
        return self.rng.choice(self.resources(env))

    def finish(self, held) -> Process:
        # usually release what is held, innermost first
        p = NIL
        for r in held:
            if self.rng.random() < 0.8 and self.spend():
                p = Prefix(Release(r), p)
        return p


def random_term(seed: int, max_size: int = 25, stray: float = 0.0) -> Process:
    """One labelled term of at most ``max_size`` nodes.

    ``stray`` is the probability of resource actions outside any scope.
    """
    rng = random.Random(seed)
    while True:
        gen = _Gen(rng, budget=max_size - 6, stray=stray)
        comps: List[Process] = []
        for r in RESOURCES:
            phi = POLICIES[rng.choice(sorted(POLICIES))]
            comps.append(Boundary(r, phi, (), NIL))
        for _ in range(rng.randint(1, 3)):
            comps.append(gen.thread([], rng.randint(2, 5)))
        p = comps[-1]
        for c in reversed(comps[:-1]):
            p = Par(c, p)
        if size(p) <= max_size:
            return label_boundaries(p)


def corpus(n: int, seed: int = 0, max_size: int = 25, stray: float = 0.0) -> List[Process]:
    return [random_term(seed * 100_003 + i, max_size, stray) for i in range(n)]
