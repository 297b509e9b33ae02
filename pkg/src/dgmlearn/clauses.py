"""Relational features as Horn clauses, plus the shared clause text format.

Text format, one clause per line::

    Interacts(X,Y) :- EnzymeInhib(X,E), _EnzymeInhib(E,Y).

Terms starting with an uppercase letter are variables.  Constants are either
single-quoted (``'Pravastatin'``) or start with a lowercase letter or digit.
A leading underscore on a predicate marks the inverse predicate, whose
arguments are matched against facts in reverse order.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Union

from .errors import ParseError


@dataclass(frozen=True, order=True)
class Var:
    name: str

    def __str__(self):
        return self.name


Term = Union[Var, str]


def is_var(t) -> bool:
    return isinstance(t, Var)


def _fmt_term(t: Term) -> str:
    if isinstance(t, Var):
        return t.name
    return "'" + t.replace("\\", "\\\\").replace("'", "\\'") + "'"


@dataclass(frozen=True)
class Literal:
    predicate: str
    args: tuple
    inverse: bool = False

    def fact_args(self) -> tuple:
        """Arguments in the order they appear in the underlying fact."""
        return tuple(reversed(self.args)) if self.inverse else self.args

    def variables(self) -> list[Var]:
        return [a for a in self.args if isinstance(a, Var)]

    def substitute(self, theta: dict) -> Literal:
        return Literal(self.predicate, tuple(theta.get(a, a) if isinstance(a, Var) else a
                                             for a in self.args), self.inverse)

    def __str__(self):
        name = ("_" if self.inverse else "") + self.predicate
        return f"{name}({','.join(_fmt_term(a) for a in self.args)})"

    def sort_key(self):
        return str(self)


@dataclass(frozen=True)
class Clause:
    head: Literal
    body: tuple[Literal, ...] = ()
    source: str = ""

    def __len__(self):
        return len(self.body)

    def head_vars(self) -> list[Var]:
        return self.head.variables()

    def variables(self) -> list[Var]:
        seen: dict[Var, None] = {}
        for lit in (self.head, *self.body):
            for v in lit.variables():
                seen.setdefault(v)
        return list(seen)

    def body_vars(self) -> list[Var]:
        seen: dict[Var, None] = {}
        for lit in self.body:
            for v in lit.variables():
                seen.setdefault(v)
        return list(seen)

    def extend(self, lit: Literal) -> Clause:
        return Clause(self.head, self.body + (lit,), self.source)

    def text(self) -> str:
        if not self.body:
            return f"{self.head}."
        return f"{self.head} :- {', '.join(str(b) for b in self.body)}."

    def __str__(self):
        return self.text()

    # equality for dedup ignores provenance
    def key(self) -> str:
        return self.text()


# --------------------------------------------------------------------------
# parsing
# --------------------------------------------------------------------------

_TOKEN = re.compile(r"\s*(?:(:-)|('(?:[^'\\]|\\.)*')|([A-Za-z0-9_][A-Za-z0-9_.\-]*)|([(),.]))")


def _tokenize(line: str, lineno):
    pos, out = 0, []
    line = line.rstrip()
    while pos < len(line):
        m = _TOKEN.match(line, pos)
        if not m or m.end() == pos:
            if line[pos:].strip() == "":
                break
            raise ParseError(f"unexpected character {line[pos]!r}", lineno)
        pos = m.end()
        if m.group(1):
            out.append(("NECK", ":-"))
        elif m.group(2):
            raw = m.group(2)[1:-1]
            out.append(("CONST", re.sub(r"\\(.)", r"\1", raw)))
        elif m.group(3):
            out.append(("IDENT", m.group(3)))
        else:
            out.append(("PUNCT", m.group(4)))
    return out


class _Parser:
    def __init__(self, tokens, lineno):
        self.toks = tokens
        self.i = 0
        self.lineno = lineno

    def peek(self):
        return self.toks[self.i] if self.i < len(self.toks) else (None, None)

    def take(self, kind=None, value=None):
        tok = self.peek()
        if tok[0] is None or (kind and tok[0] != kind) or (value and tok[1] != value):
            raise ParseError(f"expected {value or kind}, got {tok[1]!r}", self.lineno)
        self.i += 1
        return tok

    def literal(self) -> Literal:
        _, name = self.take("IDENT")
        inverse = False
        if name.startswith("_") and len(name) > 1:
            inverse, name = True, name[1:]
        self.take("PUNCT", "(")
        args = [self.term()]
        while self.peek() == ("PUNCT", ","):
            self.take()
            args.append(self.term())
        self.take("PUNCT", ")")
        return Literal(name, tuple(args), inverse)

    def term(self) -> Term:
        kind, val = self.peek()
        if kind == "CONST":
            self.take()
            return val
        _, val = self.take("IDENT")
        return Var(val) if val[0].isupper() else val


def parse_clause(line: str, lineno=None, source: str = "") -> Clause:
    p = _Parser(_tokenize(line, lineno), lineno)
    head = p.literal()
    if any(not isinstance(a, Var) for a in head.args):
        raise ParseError("clause head must contain only variables", lineno)
    body = []
    if p.peek() == ("NECK", ":-"):
        p.take()
        body.append(p.literal())
        while p.peek() == ("PUNCT", ","):
            p.take()
            body.append(p.literal())
    if p.peek() == ("PUNCT", "."):
        p.take()
    if p.peek()[0] is not None:
        raise ParseError(f"trailing input {p.peek()[1]!r}", lineno)
    return Clause(head, tuple(body), source)


def parse_clauses(text: str, predicates: Iterable[str] | None = None) -> list[Clause]:
    """Parse a clause file.  ``%`` comments a line out.

    If ``predicates`` is given, predicate names are resolved against it
    case-insensitively (so ``enzymeinhib`` matches ``EnzymeInhib``).
    """
    lookup = None
    if predicates is not None:
        lookup = {}
        for p in predicates:
            lookup.setdefault(p.lower(), p)
            lookup[p] = p
    out = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("%", 1)[0].strip()
        if not line:
            continue
        c = parse_clause(line, lineno)
        if lookup is not None:
            c = _resolve(c, lookup, lineno)
        out.append(c)
    return out


def _resolve(c: Clause, lookup, lineno) -> Clause:
    def fix(lit):
        name = lookup.get(lit.predicate) or lookup.get(lit.predicate.lower())
        if name is None:
            raise ParseError(f"unknown predicate {lit.predicate!r}", lineno)
        return Literal(name, lit.args, lit.inverse)
    return Clause(fix(c.head), tuple(fix(b) for b in c.body), c.source)


def format_clauses(clauses: Iterable[Clause]) -> str:
    return "".join(c.text() + "\n" for c in clauses)


def dedup(clauses: Iterable[Clause]) -> list[Clause]:
    seen, out = set(), []
    for c in clauses:
        if c.key() not in seen:
            seen.add(c.key())
            out.append(c)
    return out
