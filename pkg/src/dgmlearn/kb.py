"""Knowledge base: fact-file parsing, positive examples, closed-world negatives.

Fact file format (UTF-8, ``%`` starts a comment)::

    @schema EnzymeInhib(drug, enzyme)
    @target Interacts
    EnzymeInhib(Pravastatin, CytochromeP4502C9).

Entities are referenced by their symbol (a case-sensitive string); the KB
interns them to dense integer ids for the numeric code paths.
"""

from __future__ import annotations

import math
import re
import warnings
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .errors import ConfigError, DGMWarning, ParseError

UNTYPED = "untyped"

_IDENT = r"[A-Za-z0-9_][A-Za-z0-9_.\-]*"
_ATOM_RE = re.compile(rf"^({_IDENT})\s*\((.*)\)\s*\.?\s*$")
_SCHEMA_RE = re.compile(rf"^@schema\s+({_IDENT})\s*\((.*)\)\s*\.?\s*$")
_TARGET_RE = re.compile(rf"^@target\s+({_IDENT})\s*\.?\s*$")
_ARG_RE = re.compile(rf"^{_IDENT}$")


def types_compatible(a: str, b: str) -> bool:
    return a == b or a == UNTYPED or b == UNTYPED


@dataclass(frozen=True)
class PredicateSchema:
    name: str
    arg_types: tuple[str, ...]

    @property
    def arity(self) -> int:
        return len(self.arg_types)

    @property
    def typed(self) -> bool:
        return any(t != UNTYPED for t in self.arg_types)


@dataclass(frozen=True, order=True)
class GroundAtom:
    predicate: str
    args: tuple[str, ...]

    def __str__(self):
        return f"{self.predicate}({', '.join(self.args)})."


@dataclass(frozen=True, order=True)
class LabeledTuple:
    args: tuple[str, ...]
    label: int  # 1 positive, 0 negative

    @property
    def positive(self) -> bool:
        return self.label == 1


@dataclass(frozen=True)
class KnowledgeBase:
    schemas: dict[str, PredicateSchema]
    facts: frozenset[GroundAtom]
    entity_types: dict[str, str]
    target: str | None = None
    _index: dict = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        names = tuple(sorted(self.entity_types))
        object.__setattr__(self, "_index", {
            "names": names,
            "ids": {s: i for i, s in enumerate(names)},
            "by_pred": _group_by_predicate(self.facts),
        })

    # interning ------------------------------------------------------------
    @property
    def entities(self) -> tuple[str, ...]:
        return self._index["names"]

    @property
    def entity_ids(self) -> dict[str, int]:
        return self._index["ids"]

    def etype(self, symbol: str) -> str:
        return self.entity_types[symbol]

    def facts_of(self, predicate: str) -> tuple[GroundAtom, ...]:
        return self._index["by_pred"].get(predicate, ())

    # target ---------------------------------------------------------------
    def target_schema(self) -> PredicateSchema:
        if self.target is None:
            raise ConfigError("no @target declared in the knowledge base")
        if self.target not in self.schemas:
            raise ConfigError(f"target predicate {self.target!r} has no schema")
        return self.schemas[self.target]

    def with_target(self, target: str) -> KnowledgeBase:
        return KnowledgeBase(self.schemas, self.facts, self.entity_types, target)

    def without_facts(self, atoms: Iterable[GroundAtom]) -> KnowledgeBase:
        drop = set(atoms)
        return KnowledgeBase(self.schemas, self.facts - drop, self.entity_types, self.target)

    def __len__(self):
        return len(self.facts)


def _group_by_predicate(facts):
    groups: dict[str, list] = {}
    for atom in sorted(facts):
        groups.setdefault(atom.predicate, []).append(atom)
    return {k: tuple(v) for k, v in groups.items()}


def _split_args(body: str, lineno: int) -> list[str]:
    if not body.strip():
        raise ParseError("empty argument list", lineno)
    args = [a.strip() for a in body.split(",")]
    for a in args:
        if not _ARG_RE.match(a):
            raise ParseError(f"malformed argument {a!r}", lineno)
    return args


def parse_facts(text: str) -> KnowledgeBase:
    """Parse a fact file into a :class:`KnowledgeBase`."""
    schemas: dict[str, PredicateSchema] = {}
    declared: set[str] = set()
    facts: set[GroundAtom] = set()
    target = None
    order: list[GroundAtom] = []

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("%", 1)[0].strip()
        if not line:
            continue
        if line.startswith("@"):
            m = _SCHEMA_RE.match(line)
            if m:
                name, types = m.group(1), tuple(_split_args(m.group(2), lineno))
                old = schemas.get(name)
                if old is not None and old.arity != len(types):
                    raise ParseError(
                        f"schema for {name} has arity {len(types)}, earlier use has {old.arity}", lineno)
                schemas[name] = PredicateSchema(name, types)
                declared.add(name)
                continue
            m = _TARGET_RE.match(line)
            if m:
                target = m.group(1)
                continue
            raise ParseError(f"unknown directive {line!r}", lineno)

        m = _ATOM_RE.match(line)
        if not m:
            raise ParseError(f"malformed fact {line!r}", lineno)
        name, args = m.group(1), tuple(_split_args(m.group(2), lineno))
        schema = schemas.get(name)
        if schema is None:
            schemas[name] = PredicateSchema(name, (UNTYPED,) * len(args))
        elif schema.arity != len(args):
            raise ParseError(
                f"{name} used with arity {len(args)}, schema has arity {schema.arity}", lineno)
        atom = GroundAtom(name, args)
        if atom not in facts:
            facts.add(atom)
            order.append(atom)

    if target is not None and target not in schemas:
        # declared but never used: binary untyped is the only sensible default
        schemas[target] = PredicateSchema(target, (UNTYPED, UNTYPED))

    # entity type = first typed occurrence; two different declared types downgrade
    entity_types: dict[str, str] = {}
    conflicted: set[str] = set()
    for atom in order:
        for pos, sym in enumerate(atom.args):
            t = schemas[atom.predicate].arg_types[pos]
            seen = entity_types.get(sym, UNTYPED)
            if sym in conflicted or t == UNTYPED:
                entity_types.setdefault(sym, UNTYPED)
            elif seen == UNTYPED:
                entity_types[sym] = t
            elif seen != t:
                entity_types[sym] = UNTYPED
                conflicted.add(sym)

    return KnowledgeBase(schemas, frozenset(facts), entity_types, target)


def serialize_kb(kb: KnowledgeBase) -> str:
    """Canonical text: schemas, target, then facts sorted lexicographically."""
    lines = []
    for name in sorted(kb.schemas):
        s = kb.schemas[name]
        lines.append(f"@schema {name}({', '.join(s.arg_types)})")
    if kb.target is not None:
        lines.append(f"@target {kb.target}")
    lines.extend(str(a) for a in sorted(kb.facts))
    return "\n".join(lines) + "\n"


def load_kb(path, target: str | None = None) -> KnowledgeBase:
    with open(path, encoding="utf-8") as fh:
        kb = parse_facts(fh.read())
    if target is not None:
        kb = kb.with_target(target)
        kb.target_schema()
    return kb


def positive_tuples(kb: KnowledgeBase) -> list[LabeledTuple]:
    kb.target_schema()
    return sorted(LabeledTuple(a.args, 1) for a in kb.facts_of(kb.target))


def _candidates_for(kb: KnowledgeBase, arg_type: str) -> list[str]:
    return [e for e in kb.entities if types_compatible(kb.entity_types[e], arg_type)]


def generate_negatives(kb: KnowledgeBase, ratio: float, seed: int) -> list[LabeledTuple]:
    """Sample closed-world negatives: type-compatible target tuples that are not facts.

    Draws ``round(ratio * #positives)`` tuples uniformly without replacement
    (fewer if not enough candidates exist).  Reflexive tuples are skipped when
    all argument types coincide.
    """
    schema = kb.target_schema()
    if ratio < 0:
        raise ConfigError("negative ratio must be nonnegative")
    positives = {a.args for a in kb.facts_of(kb.target)}
    wanted = int(math.floor(ratio * len(positives) + 0.5))
    if wanted == 0:
        return []

    pools = [_candidates_for(kb, t) for t in schema.arg_types]
    no_reflexive = len(set(schema.arg_types)) == 1
    sizes = [len(p) for p in pools]
    total = math.prod(sizes)
    rng = np.random.default_rng(seed)

    def decode(flat):
        idx = []
        for s in reversed(sizes):
            flat, r = divmod(flat, s)
            idx.append(r)
        return tuple(pools[i][j] for i, j in enumerate(reversed(idx)))

    def admissible(tup):
        if tup in positives:
            return False
        return not (no_reflexive and len(set(tup)) < len(tup))

    chosen: list[tuple[str, ...]] = []
    if total <= 2_000_000:
        cands = [t for t in map(decode, range(total)) if admissible(t)]
        if cands:
            take = min(wanted, len(cands))
            picks = rng.choice(len(cands), size=take, replace=False)
            chosen = [cands[i] for i in picks]
    else:
        # candidate space too large to enumerate; rejection-sample distinct tuples
        seen: set[tuple[str, ...]] = set()
        budget = 100 * wanted
        while len(chosen) < wanted and budget > 0:
            budget -= 1
            tup = decode(int(rng.integers(total)))
            if tup not in seen and admissible(tup):
                seen.add(tup)
                chosen.append(tup)

    if not chosen:
        warnings.warn("no type-compatible unobserved target tuples; no negatives generated",
                      DGMWarning, stacklevel=2)
    return sorted(LabeledTuple(t, 0) for t in chosen)
