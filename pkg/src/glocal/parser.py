"""Concrete syntax for processes (``.glp``) and policies (``.pol``).

Process grammar, loosest first::

    P   ::= C ("|" C)*
    C   ::= A ("+" A)*
    A   ::= "0" | "(" P ")" | "new" ident "." A | "!" ["[" int "]"] A
          | "res" rname "," ident "," trace "{" P "}" [label]
          | "req" rname "{" P "}" [label]
          | pi ["." A] | ProcName
    pi  ::= "tau" | ident "(" ident ")" | ident "(" "res" rname ")"
          | ident "(" rname ")" | "rel" "(" rname ")" | ident "<" (ident | rname) ">"
    label ::= "@" ident ["[" [ident ("," ident)*] "]"]
    trace ::= "eps" | event ("." event)*
    event ::= ident | "rel" | ("in" | "out" | "err_out") "(" ident ")"

Resource identifiers carry a ``#`` sigil. ``x(y)`` binds a channel
variable, ``x(res #s)`` a resource variable, ``act(#r)`` is an access.
Comments run from ``//`` to end of line.

A document is either a bare process or a sequence of ``import "f.pol"``,
``policy`` blocks, ``def Name = P``, ``main Name`` and ``script { ... }``
items; the entry point defaults to the last definition. Definitions are
closed terms expanded at their use sites.

Policy blocks::

    policy phi {
      initial q0
      violating bad            // optional, comma separated
      q0 -act-> q1
      missing: violate         // or: stay
    }
"""

from __future__ import annotations

import os
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from .policy import PolicyAutomaton
from .semantics import ReconfigEvent, check_script
from .terms import (
    NIL, REL, Access, Boundary, Choice, Input, Name, Nil, Output, Par, Prefix,
    Process, Release, Replicate, Request, Restrict, Special, Tau, all_names, default_holders, free_names,
)

__all__ = [
    "GlpSyntaxError", "SourceDocument", "parse", "parse_process", "parse_policy",
    "parse_policies", "parse_script", "pretty", "pretty_trace", "pretty_policy",
    "pretty_script", "pretty_document", "load", "POLICY_PATH_ENV",
]

POLICY_PATH_ENV = "GLOCAL_POLICY_PATH"

KEYWORDS = {"tau", "new", "res", "req", "rel", "eps", "def", "main", "import",
            "script", "appear", "disappear", "policy"}
SPECIALS = ("in", "out", "err_out")


class GlpSyntaxError(ValueError):
    def __init__(self, message: str, line: int = 0, col: int = 0, source: str = "<input>"):
        super().__init__(f"{source}:{line}:{col}: {message}")
        self.message = message
        self.line = line
        self.col = col
        self.source = source


_TOKEN = re.compile(r"""
    (?P<ws>[ \t\r\n]+|//[^\n]*)
  | (?P<arrow>->)
  | (?P<rname>\#[A-Za-z_][A-Za-z0-9_']*)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_']*)
  | (?P<num>[0-9]+)
  | (?P<str>"[^"\n]*")
  | (?P<punct>[()<>.,{}|+!@\[\]=:\-;])
""", re.VERBOSE)


@dataclass
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _lex(text: str, source: str) -> List[_Tok]:
    toks = []
    pos, line, col = 0, 1, 1
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise GlpSyntaxError(f"unexpected character {text[pos]!r}", line, col, source)
        kind = m.lastgroup
        s = m.group()
        if kind != "ws":
            toks.append(_Tok(kind, s, line, col))
        nl = s.count("\n")
        if nl:
            line += nl
            col = len(s) - s.rfind("\n")
        else:
            col += len(s)
        pos = m.end()
    toks.append(_Tok("eof", "", line, col))
    return toks


@dataclass(frozen=True)
class _Ref:
    """Placeholder for a process-name reference, expanded after parsing."""

    name: str
    line: int
    col: int


@dataclass(frozen=True)
class _PolicyRef:
    name: str
    line: int
    col: int

    def __hash__(self):
        return hash(("policyref", self.name))


@dataclass
class SourceDocument:
    policies: Dict[str, PolicyAutomaton] = field(default_factory=dict)
    processes: Dict[str, Process] = field(default_factory=dict)
    entry: Optional[str] = None
    script: Tuple[ReconfigEvent, ...] = ()
    main: Process = NIL
    imports: Tuple[Path, ...] = ()


class _Parser:
    def __init__(self, text: str, source: str = "<input>", site_start: int = 0):
        self.toks = _lex(text, source)
        self.i = 0
        self.source = source
        self.site = site_start
        self.constants: Dict[Tuple[str, bool], Name] = {}

    # token helpers
    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> _Tok:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def error(self, msg: str, tok: Optional[_Tok] = None):
        t = tok or self.tok
        raise GlpSyntaxError(msg, t.line, t.col, self.source)

    def at(self, text: str) -> bool:
        t = self.tok
        return t.kind in ("punct", "arrow", "ident") and t.text == text

    def eat(self, text: str) -> _Tok:
        if not self.at(text):
            self.error(f"expected {text!r}, found {self.tok.text or 'end of input'!r}")
        t = self.tok
        self.i += 1
        return t

    def ident(self, what: str = "identifier", allow_kw: bool = False) -> _Tok:
        t = self.tok
        if t.kind != "ident" or (not allow_kw and t.text in KEYWORDS):
            self.error(f"expected {what}, found {t.text or 'end of input'!r}")
        self.i += 1
        return t

    def rname(self) -> _Tok:
        t = self.tok
        if t.kind != "rname":
            if t.kind == "ident":
                self.error(f"resource names need a '#' sigil: {t.text!r}")
            self.error(f"expected resource name, found {t.text or 'end of input'!r}")
        self.i += 1
        return t

    def fresh_site(self) -> int:
        self.site += 1
        return self.site

    # names
    def resolve(self, env, ident: str, resource: bool) -> Name:
        for n in reversed(env):
            if n.ident == ident and n.resource == resource and n.copy == 0:
                return n
        # one shared object per free constant keeps lookups on the identity fast path
        return self.constants.setdefault((ident, resource), Name(ident, resource))

    @staticmethod
    def _split_copy(text: str) -> Tuple[str, int]:
        m = re.fullmatch(r"(.*?)'([0-9]+)", text)
        if m and m.group(1):
            return m.group(1), int(m.group(2))
        return text, 0

    def name_at(self, env, text: str, resource: bool) -> Name:
        ident, copy = self._split_copy(text.lstrip("#"))
        if copy:
            for n in reversed(env):
                if n.ident == ident and n.resource == resource and n.copy == copy:
                    return n
            return Name(ident, resource, 0, copy)
        return self.resolve(env, ident, resource)

    def binder(self, text: str, resource: bool, variable: bool) -> Name:
        ident, copy = self._split_copy(text.lstrip("#"))
        return Name(ident, resource, self.fresh_site(), copy, variable=variable)

    # processes
    def process(self, env) -> Process:
        left = self.choice(env)
        if self.at("|"):
            self.eat("|")
            return Par(left, self.process(env))
        return left

    def choice(self, env) -> Process:
        left = self.atom(env)
        if self.at("+"):
            self.eat("+")
            return Choice(left, self.choice(env))
        return left

    def label_suffix(self):
        if not self.at("@"):
            return None, None
        self.eat("@")
        label = self.ident("boundary label", allow_kw=True).text
        holders = None
        if self.at("["):
            self.eat("[")
            hs = []
            while not self.at("]"):
                hs.append(self.ident("label", allow_kw=True).text)
                if not self.at("]"):
                    self.eat(",")
            self.eat("]")
            holders = tuple(hs)
        return label, holders

    def trace(self) -> tuple:
        if self.tok.kind == "ident" and self.tok.text == "eps":
            self.i += 1
            return ()
        events = [self.event()]
        while self.at("."):
            self.eat(".")
            events.append(self.event())
        return tuple(events)

    def event(self):
        t = self.ident("trace event", allow_kw=True)
        if t.text in SPECIALS and self.at("("):
            self.eat("(")
            lab = self.ident("label", allow_kw=True).text
            self.eat(")")
            return Special(t.text, lab)
        if t.text == "rel":
            return REL
        if t.text in KEYWORDS:
            self.error(f"keyword {t.text!r} is not an action", t)
        return t.text

    def atom(self, env) -> Process:
        t = self.tok
        if t.kind == "num":
            if t.text != "0":
                self.error(f"unexpected number {t.text}")
            self.i += 1
            return NIL
        if self.at("("):
            self.eat("(")
            p = self.process(env)
            self.eat(")")
            return p
        if self.at("!"):
            self.eat("!")
            budget = None
            if self.at("["):
                self.eat("[")
                n = self.tok
                if n.kind != "num":
                    self.error("expected replication budget")
                self.i += 1
                budget = int(n.text)
                self.eat("]")
            return Replicate(self.atom(env), budget)
        if t.kind == "ident" and t.text == "new":
            self.i += 1
            if self.tok.kind == "rname":
                self.error("restriction is not applied to resource names")
            x = self.binder(self.ident("channel name").text, False, False)
            self.eat(".")
            return Restrict(x, self.atom(env + [x]))
        if t.kind == "ident" and t.text == "res":
            self.i += 1
            r = self.name_at(env, self.rname().text, True)
            self.eat(",")
            pt = self.ident("policy name")
            pol = _PolicyRef(pt.text, pt.line, pt.col)
            self.eat(",")
            state = self.trace()
            self.eat("{")
            body = self.process(env)
            self.eat("}")
            label, holders = self.label_suffix()
            if holders is None and label is not None:
                holders = default_holders(label, body)
            return Boundary(r, pol, state, body, label, holders)
        if t.kind == "ident" and t.text == "req":
            self.i += 1
            r = self.name_at(env, self.rname().text, True)
            self.eat("{")
            body = self.process(env)
            self.eat("}")
            label, holders = self.label_suffix()
            if holders is not None:
                self.error("requests carry no holder list")
            return Request(r, body, label)
        if t.kind == "ident":
            pi, new_env = self.prefix(env)
            if pi is None:
                self.i += 1
                return _Ref(t.text, t.line, t.col)  # type: ignore[return-value]
            if self.at("."):
                self.eat(".")
                return Prefix(pi, self.atom(new_env))
            return Prefix(pi, NIL)
        self.error(f"expected a process, found {t.text or 'end of input'!r}")

    def prefix(self, env):
        t = self.tok
        nxt = self.peek()
        if t.text == "tau":
            self.i += 1
            return Tau(), env
        if t.text == "rel":
            self.i += 1
            self.eat("(")
            r = self.name_at(env, self.rname().text, True)
            self.eat(")")
            return Release(r), env
        if t.text in KEYWORDS:
            self.error(f"unexpected keyword {t.text!r}")
        if nxt.kind == "punct" and nxt.text == "<":
            self.i += 1
            self.eat("<")
            ch = self.name_at(env, t.text, False)
            v = self.tok
            if v.kind == "rname":
                payload = self.name_at(env, v.text, True)
            elif v.kind == "ident" and v.text not in KEYWORDS:
                payload = self.name_at(env, v.text, False)
            else:
                self.error("expected a name to send")
            self.i += 1
            self.eat(">")
            return Output(ch, payload), env
        if nxt.kind == "punct" and nxt.text == "(":
            self.i += 2
            inner = self.tok
            if inner.kind == "rname":
                self.i += 1
                self.eat(")")
                return Access(t.text, self.name_at(env, inner.text, True)), env
            if inner.kind == "ident" and inner.text == "res":
                self.i += 1
                b = self.binder(self.rname().text, True, True)
                self.eat(")")
                return Input(self.name_at(env, t.text, False), b), env + [b]
            b = self.binder(self.ident("input binder").text, False, True)
            self.eat(")")
            return Input(self.name_at(env, t.text, False), b), env + [b]
        return None, env

    # policies
    def policy_block(self) -> PolicyAutomaton:
        self.eat("policy")
        name = self.ident("policy name").text
        self.eat("{")
        initial = None
        violating: List[str] = []
        states: List[str] = []
        edges = []
        missing = "violate"
        while not self.at("}"):
            t = self.tok
            if t.kind == "eof":
                self.error("unterminated policy block")
            if t.kind == "ident" and t.text == "initial" and self.peek().kind == "ident":
                self.i += 1
                initial = self.ident("state", allow_kw=True).text
            elif t.kind == "ident" and t.text in ("violating", "states") and self.peek().kind == "ident":
                self.i += 1
                bucket = violating if t.text == "violating" else states
                bucket.append(self.ident("state", allow_kw=True).text)
                while self.at(","):
                    self.eat(",")
                    bucket.append(self.ident("state", allow_kw=True).text)
            elif t.kind == "ident" and t.text == "missing" and self.peek().text == ":":
                self.i += 2
                rule = self.ident("missing-action rule", allow_kw=True)
                if rule.text not in ("violate", "stay"):
                    self.error(f"unknown missing-action rule {rule.text!r}", rule)
                missing = rule.text
            else:
                src = self.ident("state", allow_kw=True).text
                self.eat("-")
                act_tok = self.ident("action", allow_kw=True)
                if act_tok.text == "rel":
                    self.error("'rel' cannot label a policy edge", act_tok)
                self.eat("->")
                dst = self.ident("state", allow_kw=True).text
                for (s, a), d in edges:
                    if s == src and a == act_tok.text and d != dst:
                        self.error(f"nondeterministic transitions on ({src}, {act_tok.text})", act_tok)
                edges.append(((src, act_tok.text), dst))
            if self.at(";"):
                self.eat(";")
        self.eat("}")
        if initial is None:
            self.error(f"policy {name} has no initial state")
        return PolicyAutomaton(name, initial, frozenset(violating), tuple(edges), missing,
                               frozenset(states))


def parse_policies(text: str, source: str = "<input>") -> Dict[str, PolicyAutomaton]:
    p = _Parser(text, source)
    out: Dict[str, PolicyAutomaton] = {}
    while p.tok.kind != "eof":
        t = p.tok
        pol = p.policy_block()
        if pol.name in out:
            p.error(f"duplicate policy {pol.name!r}", t)
        out[pol.name] = pol
    return out


def parse_policy(text: str, source: str = "<input>") -> PolicyAutomaton:
    pols = parse_policies(text, source)
    if len(pols) != 1:
        raise GlpSyntaxError(f"expected exactly one policy, found {len(pols)}", 1, 1, source)
    return next(iter(pols.values()))


def _search_dirs(base_dir: Optional[Path], search_path: Sequence[str]) -> List[Path]:
    dirs = [base_dir] if base_dir else []
    dirs += [Path(d) for d in search_path]
    env = os.environ.get(POLICY_PATH_ENV)
    if env:
        dirs += [Path(d) for d in env.split(os.pathsep) if d]
    return dirs


def _expand(p, defs: Dict[str, Process], parser: _Parser, stack=()) -> Process:
    if isinstance(p, _Ref):
        if p.name not in defs:
            raise GlpSyntaxError(f"unknown process {p.name!r}", p.line, p.col, parser.source)
        if p.name in stack:
            raise GlpSyntaxError(f"recursive definition of {p.name!r}", p.line, p.col, parser.source)
        return _expand(defs[p.name], defs, parser, stack + (p.name,))
    if isinstance(p, Prefix):
        return Prefix(p.prefix, _expand(p.cont, defs, parser, stack))
    if isinstance(p, (Restrict, Boundary, Request, Replicate)):
        return replace(p, body=_expand(p.body, defs, parser, stack))
    if isinstance(p, (Choice, Par)):
        return type(p)(_expand(p.left, defs, parser, stack), _expand(p.right, defs, parser, stack))
    return p


def _resolve_policies(p: Process, table: Dict[str, PolicyAutomaton], source: str) -> Process:
    if isinstance(p, Boundary):
        pol = p.policy
        if isinstance(pol, _PolicyRef):
            if pol.name not in table:
                raise GlpSyntaxError(f"unresolved policy {pol.name!r}", pol.line, pol.col, source)
            pol = table[pol.name]
        return replace(p, policy=pol, body=_resolve_policies(p.body, table, source))
    if isinstance(p, Prefix):
        return Prefix(p.prefix, _resolve_policies(p.cont, table, source))
    if isinstance(p, (Restrict, Request, Replicate)):
        return replace(p, body=_resolve_policies(p.body, table, source))
    if isinstance(p, (Choice, Par)):
        return type(p)(_resolve_policies(p.left, table, source), _resolve_policies(p.right, table, source))
    return p


_DOC_KEYWORDS = {"import", "def", "main", "policy", "script"}


def parse(text: str, policies: Optional[Dict[str, PolicyAutomaton]] = None, *,
          source: str = "<input>", base_dir: Optional[Path] = None,
          search_path: Sequence[str] = ()) -> SourceDocument:
    """Parse a ``.glp`` document, resolving imports and policy references."""
    p = _Parser(text, source)
    table: Dict[str, PolicyAutomaton] = dict(policies or {})
    defs: Dict[str, Process] = {}
    order: List[str] = []
    entry = None
    script: List[ReconfigEvent] = []
    pending_script = []
    imports: List[Path] = []
    bare = None
    if p.tok.kind == "eof" or not (p.tok.kind == "ident" and p.tok.text in _DOC_KEYWORDS):
        if p.tok.kind == "eof":
            p.error("empty document")
        bare = p.process([])
    while p.tok.kind != "eof":
        t = p.tok
        if t.kind != "ident" or t.text not in _DOC_KEYWORDS:
            p.error(f"unexpected {t.text!r}")
        if t.text == "import":
            p.i += 1
            s = p.tok
            if s.kind != "str":
                p.error("expected a quoted file name")
            p.i += 1
            fname = s.text[1:-1]
            for d in _search_dirs(base_dir, search_path):
                cand = d / fname
                if cand.is_file():
                    table.update(parse_policies(cand.read_text(encoding="utf-8"), str(cand)))
                    imports.append(cand)
                    break
            else:
                if Path(fname).is_file():
                    table.update(parse_policies(Path(fname).read_text(encoding="utf-8"), fname))
                    imports.append(Path(fname))
                else:
                    p.error(f"cannot find policy file {fname!r}", s)
        elif t.text == "policy":
            pol = p.policy_block()
            table[pol.name] = pol
        elif t.text == "def":
            p.i += 1
            nt = p.ident("process name")
            if nt.text in defs:
                p.error(f"duplicate process name {nt.text!r}", nt)
            p.eat("=")
            defs[nt.text] = p.process([])
            order.append(nt.text)
        elif t.text == "main":
            p.i += 1
            entry = p.ident("process name")
        else:
            p.i += 1
            p.eat("{")
            while not p.at("}"):
                pending_script.append(_script_event(p))
            p.eat("}")
    for raw in pending_script:
        kind, rtok, pol_tok, state, at = raw
        r = Name(rtok.text[1:], True)
        pol = None
        if pol_tok is not None:
            if pol_tok.text not in table:
                p.error(f"unresolved policy {pol_tok.text!r}", pol_tok)
            pol = table[pol_tok.text]
        script.append(ReconfigEvent(kind, r, at, pol, state))
    try:
        check_script(script)
    except ValueError as exc:
        raise GlpSyntaxError(str(exc), 1, 1, source) from None
    processes = {}
    for name in order:
        processes[name] = _resolve_policies(_expand(defs[name], defs, p), table, source)
    if bare is not None:
        if defs:
            p.error("a bare process cannot be mixed with definitions")
        main = _resolve_policies(_expand(bare, {}, p), table, source)
        return SourceDocument(table, {"main": main}, "main", tuple(script), main, tuple(imports))
    if entry is not None:
        if entry.text not in processes:
            p.error(f"unknown entry point {entry.text!r}", entry)
        name = entry.text
    elif order:
        name = order[-1]
    else:
        raise GlpSyntaxError("document defines no process", 1, 1, source)
    return SourceDocument(table, processes, name, tuple(script), processes[name], tuple(imports))


def _script_event(p: _Parser):
    t = p.ident("appear or disappear", allow_kw=True)
    if t.text not in ("appear", "disappear"):
        p.error(f"unknown reconfiguration {t.text!r}", t)
    r = p.rname()
    pol_tok, state = None, ()
    if t.text == "appear":
        pol_tok = p.ident("policy name")
        state = p.trace()
    p.eat("@")
    n = p.tok
    if n.kind != "num":
        p.error("expected a step number")
    p.i += 1
    return t.text, r, pol_tok, state, int(n.text)


def parse_script(text: str, policies: Optional[Dict[str, PolicyAutomaton]] = None,
                 source: str = "<input>") -> Tuple[ReconfigEvent, ...]:
    """Parse reconfiguration events, optionally wrapped in ``script { ... }``."""
    p = _Parser(text, source)
    table = dict(policies or {})
    wrapped = p.tok.kind == "ident" and p.tok.text == "script"
    if wrapped:
        p.i += 1
        p.eat("{")
    events = []
    while p.tok.kind != "eof" and not (wrapped and p.at("}")):
        kind, rtok, pol_tok, state, at = _script_event(p)
        pol = None
        if pol_tok is not None:
            if pol_tok.text not in table:
                p.error(f"unresolved policy {pol_tok.text!r}", pol_tok)
            pol = table[pol_tok.text]
        events.append(ReconfigEvent(kind, Name(rtok.text[1:], True), at, pol, state))
    if wrapped:
        p.eat("}")
    if p.tok.kind != "eof":
        p.error(f"unexpected {p.tok.text!r}")
    try:
        check_script(events)
    except ValueError as exc:
        raise GlpSyntaxError(str(exc), 1, 1, source) from None
    return tuple(events)


def parse_process(text: str, policies: Optional[Dict[str, PolicyAutomaton]] = None) -> Process:
    """Parse a single process term against a policy table."""
    p = _Parser(text)
    proc = p.process([])
    if p.tok.kind != "eof":
        p.error(f"unexpected {p.tok.text!r}")
    proc = _expand(proc, {}, p)
    return _resolve_policies(proc, dict(policies or {}), p.source)


def load(path, policies: Optional[Dict[str, PolicyAutomaton]] = None,
         search_path: Sequence[str] = ()) -> SourceDocument:
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    return parse(text, policies, source=str(path), base_dir=path.parent, search_path=search_path)


# -- pretty printing --------------------------------------------------------

def pretty_trace(eta) -> str:
    return ".".join(str(e) for e in eta) if eta else "eps"


def _suffix(label, holders, body) -> str:
    if label is None:
        return ""
    out = f" @{label}"
    if holders is not None and holders != default_holders(label, body):
        out += "[" + ", ".join(holders) + "]"
    return out


def pretty(p: Process, level: int = 0) -> str:
    """Render a term in the concrete syntax; deterministic.

    A binder whose text would shadow or capture a different name in its
    scope is printed under a fresh ``ident_k`` so the output parses back
    to the same term.
    """
    return _Printer(p).term(p, level, {})


class _Printer:
    def __init__(self, p: Process):
        self.taken = {str(n) for n in all_names(p)}

    def name(self, n: Name, env) -> str:
        return env.get(n) or str(n)

    def bind(self, b: Name, body: Process, env) -> dict:
        text = str(b)
        occupied = {self.name(n, env) for n in free_names(body) if n != b}
        if text in occupied:
            sigil = "#" if b.resource else ""
            k = 1
            while f"{sigil}{b.ident}_{k}" in self.taken | occupied:
                k += 1
            text = f"{sigil}{b.ident}_{k}"
            self.taken.add(text)
        if text == str(b) and b not in env:
            return env
        return {**env, b: text}

    def prefix(self, pi, env) -> str:
        n = lambda x: self.name(x, env)  # noqa: E731
        if isinstance(pi, Output):
            return f"{n(pi.channel)}<{n(pi.payload)}>"
        if isinstance(pi, Access):
            return f"{pi.action}({n(pi.resource)})"
        if isinstance(pi, Release):
            return f"rel({n(pi.resource)})"
        return str(pi)

    def term(self, p: Process, level: int, env) -> str:
        if isinstance(p, Nil):
            return "0"
        if isinstance(p, Par):
            s = f"{self.term(p.left, 1, env)} | {self.term(p.right, 0, env)}"
            return f"({s})" if level > 0 else s
        if isinstance(p, Choice):
            s = f"{self.term(p.left, 2, env)} + {self.term(p.right, 1, env)}"
            return f"({s})" if level > 1 else s
        if isinstance(p, Prefix):
            pi = p.prefix
            if isinstance(pi, Input):
                # the channel is read outside the binder's scope
                inner = self.bind(pi.binder, p.cont, env)
                b = ("res " if pi.binder.resource else "") + self.name(pi.binder, inner)
                return f"{self.name(pi.channel, env)}({b}).{self.term(p.cont, 2, inner)}"
            return f"{self.prefix(p.prefix, env)}.{self.term(p.cont, 2, env)}"
        if isinstance(p, Restrict):
            inner = self.bind(p.name, p.body, env)
            return f"new {self.name(p.name, inner)}. {self.term(p.body, 2, inner)}"
        if isinstance(p, Replicate):
            b = "" if p.budget is None else f"[{p.budget}] "
            return f"!{b}{self.term(p.body, 2, env)}"
        if isinstance(p, Boundary):
            pol = getattr(p.policy, "name", p.policy)
            return (f"res {self.name(p.resource, env)}, {pol}, {pretty_trace(p.state)} "
                    f"{{ {self.term(p.body, 0, env)} }}" + _suffix(p.label, p.holders, p.body))
        if isinstance(p, Request):
            return (f"req {self.name(p.resource, env)} {{ {self.term(p.body, 0, env)} }}"
                    + _suffix(p.label, None, p.body))
        raise TypeError(p)


def pretty_policy(phi: PolicyAutomaton) -> str:
    lines = [f"policy {phi.name} {{", f"  initial {phi.initial}"]
    if phi.violating:
        lines.append("  violating " + ", ".join(sorted(phi.violating)))
    if phi.extra_states:
        lines.append("  states " + ", ".join(sorted(phi.extra_states)))
    for (src, act), dst in phi.transitions:
        lines.append(f"  {src} -{act}-> {dst}")
    lines.append(f"  missing: {phi.missing}")
    lines.append("}")
    return "\n".join(lines)


def pretty_script(script: Sequence[ReconfigEvent]) -> str:
    items = []
    for ev in script:
        if ev.kind == "appear":
            items.append(f"  appear {ev.resource} {ev.policy.name} {pretty_trace(ev.state)} @{ev.at_step}")
        else:
            items.append(f"  disappear {ev.resource} @{ev.at_step}")
    return "script {\n" + "\n".join(items) + "\n}"


def pretty_document(doc: SourceDocument) -> str:
    """A self-contained document: policies inline, then the entry term."""
    parts = [pretty_policy(doc.policies[k]) for k in sorted(doc.policies)]
    if doc.script:
        parts.append(pretty_script(doc.script))
    parts.append(f"def {doc.entry or 'main'} = {pretty(doc.main)}")
    return "\n\n".join(parts) + "\n"
