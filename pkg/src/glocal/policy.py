"""Usage policies as deterministic automata over action names."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, Iterable, Mapping, Tuple

from .terms import REL, Special, Trace

__all__ = ["PolicyAutomaton", "VIOLATION", "run", "admits", "strip_special", "dynamic_projection"]


class _Violation:
    def __repr__(self):
        return "VIOLATION"

    def __reduce__(self):
        return "VIOLATION"


VIOLATION = _Violation()


@dataclass(frozen=True)
class PolicyAutomaton:
    """Deterministic automaton; entering a violating state rejects.

    Actions without an outgoing edge either violate or leave the state
    unchanged, per ``missing``. ``rel`` and analysis events never move it.
    """

    name: str
    initial: str
    violating: frozenset = frozenset()
    transitions: Tuple[Tuple[Tuple[str, str], str], ...] = ()
    missing: str = "violate"
    extra_states: frozenset = frozenset()
    _delta: Dict = field(default=None, init=False, repr=False, compare=False)
    _hash: int = field(default=0, init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.missing not in ("violate", "stay"):
            raise ValueError(f"unknown missing-action rule {self.missing!r}")
        delta = {}
        for (state, action), target in self.transitions:
            if (state, action) in delta and delta[(state, action)] != target:
                raise ValueError(
                    f"policy {self.name}: nondeterministic transitions on ({state}, {action})")
            delta[(state, action)] = target
        object.__setattr__(self, "transitions", tuple(sorted(set(self.transitions))))
        object.__setattr__(self, "violating", frozenset(self.violating))
        object.__setattr__(self, "_delta", delta)
        object.__setattr__(self, "_hash", hash(("policy", self.name)))

    def __hash__(self):
        return self._hash

    @classmethod
    def build(cls, name: str, initial: str, edges: Mapping[Tuple[str, str], str] | Iterable,
              violating: Iterable[str] = (), missing: str = "violate") -> "PolicyAutomaton":
        items = edges.items() if isinstance(edges, Mapping) else edges
        return cls(name, initial, frozenset(violating), tuple(items), missing)

    @property
    def states(self) -> frozenset:
        out = {self.initial, *self.violating, *self.extra_states}
        for (s, _), t in self.transitions:
            out.update((s, t))
        return frozenset(out)

    def move(self, state, action: str):
        target = self._delta.get((state, action))
        if target is None:
            return VIOLATION if self.missing == "violate" else state
        return VIOLATION if target in self.violating else target


@lru_cache(maxsize=200_000)
def run(phi: PolicyAutomaton, eta: Trace):
    """Fold ``eta`` through ``phi``; VIOLATION is absorbing."""
    if phi.initial in phi.violating:
        return VIOLATION
    state = phi.initial
    for e in eta:
        if isinstance(e, Special) or e == REL:
            continue
        state = phi.move(state, e)
        if state is VIOLATION:
            return VIOLATION
    return state


def admits(phi: PolicyAutomaton, eta: Trace) -> bool:
    return run(phi, tuple(eta)) is not VIOLATION


def dynamic_projection(eta: Trace) -> Trace:
    """Drop the analysis-only events."""
    return tuple(e for e in eta if not isinstance(e, Special))


def strip_special(eta: Trace) -> Trace:
    """Drop analysis events and releases; the policy verdict only sees the rest."""
    return tuple(e for e in eta if not isinstance(e, Special) and e != REL)
