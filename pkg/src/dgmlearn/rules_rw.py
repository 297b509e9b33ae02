"""Relational random walks over the schema graph.

A walk starts at the type of the target's first argument and follows
predicate edges (forward or inverse) until it reaches the type of the
target's second argument; the edge sequence is read off as a clause body.
"""

from __future__ import annotations

import itertools
import logging
import warnings
from dataclasses import dataclass

import numpy as np

from .clauses import Clause, Literal, Var, dedup
from .errors import ConfigError, DGMWarning
from .kb import UNTYPED, KnowledgeBase, PredicateSchema, types_compatible

log = logging.getLogger(__name__)


@dataclass(frozen=True, order=True)
class SchemaEdge:
    src: str
    dst: str
    predicate: str
    from_pos: int
    to_pos: int
    arity: int

    @property
    def inverse(self) -> bool:
        return self.arity == 2 and self.from_pos > self.to_pos

    @property
    def label(self) -> str:
        if self.arity == 2:
            return ("_" if self.inverse else "") + self.predicate
        return f"{self.predicate}[{self.from_pos}->{self.to_pos}]"


@dataclass(frozen=True)
class SchemaGraph:
    nodes: tuple[str, ...]
    edges: tuple[SchemaEdge, ...]

    def outgoing(self, etype: str) -> list[SchemaEdge]:
        return [e for e in self.edges if types_compatible(e.src, etype)]


def build_schema_graph(kb: KnowledgeBase) -> SchemaGraph:
    """One edge per ordered pair of distinct argument positions of every non-target predicate."""
    nodes, edges = set(), []
    for name in sorted(kb.schemas):
        s = kb.schemas[name]
        nodes.update(s.arg_types)
        if name == kb.target or s.arity < 2:
            continue
        for i, j in itertools.permutations(range(s.arity), 2):
            edges.append(SchemaEdge(s.arg_types[i], s.arg_types[j], name, i, j, s.arity))
    return SchemaGraph(tuple(sorted(nodes)), tuple(sorted(edges)))


def _var_prefix(etype: str) -> str:
    if etype == UNTYPED or not etype[:1].isalpha():
        return "V"
    return etype[0].upper()


def walk_to_clause(target: PredicateSchema, path: list[SchemaEdge]) -> Clause:
    types = [target.arg_types[0]] + [e.dst for e in path]
    chain = [Var(f"{_var_prefix(t)}{i}") for i, t in enumerate(types)]
    body = []
    for i, e in enumerate(path):
        if e.arity == 2:
            body.append(Literal(e.predicate, (chain[i], chain[i + 1]), e.inverse))
        else:
            args = [Var(f"{chain[i].name}_{p}") for p in range(e.arity)]
            args[e.from_pos] = chain[i]
            args[e.to_pos] = chain[i + 1]
            body.append(Literal(e.predicate, tuple(args)))
    head = Literal(target.name, (chain[0], chain[-1]))
    return Clause(head, tuple(body), "rw")


def _sort_key(c: Clause):
    return (len(c.body), c.text())


def sample_walks(sg: SchemaGraph, target: PredicateSchema, max_len: int = 4, n_walks: int = 50,
                 seed: int = 0, budget_factor: int = 100) -> list[Clause]:
    """Sample up to ``n_walks`` distinct type-sound walks of length 1..``max_len``.

    Each attempt draws a length uniformly, then steps uniformly over the
    outgoing edges of the current type; attempts that dead-end or finish on
    the wrong type are rejected.  Sampling stops after ``n_walks`` distinct
    clauses or ``budget_factor * n_walks`` attempts.
    """
    if max_len < 1:
        raise ConfigError("max_len must be >= 1")
    if target.arity != 2:
        raise ConfigError("random walks need a binary target predicate")
    start, goal = target.arg_types
    rng = np.random.default_rng(seed)
    found: dict[str, Clause] = {}
    attempts = budget_factor * max(n_walks, 1)
    out_cache: dict[str, list[SchemaEdge]] = {}

    for _ in range(attempts):
        if len(found) >= n_walks:
            break
        length = int(rng.integers(1, max_len + 1))
        cur, path = start, []
        for _ in range(length):
            out = out_cache.setdefault(cur, sg.outgoing(cur))
            if not out:
                break
            e = out[int(rng.integers(len(out)))]
            path.append(e)
            cur = e.dst
        if len(path) != length or not types_compatible(cur, goal):
            continue
        c = walk_to_clause(target, path)
        found.setdefault(c.text(), c)

    clauses = dedup(sorted(found.values(), key=_sort_key))
    if not clauses:
        warnings.warn(f"no type-sound walk of length <= {max_len} connects "
                      f"{start} to {goal}", DGMWarning, stacklevel=2)
    log.debug("sampled %d distinct walks", len(clauses))
    return clauses


def enumerate_walks(sg: SchemaGraph, target: PredicateSchema, max_len: int) -> list[Clause]:
    """Every type-sound walk up to ``max_len``; exponential, for small schemas and tests."""
    start, goal = target.arg_types
    out = []

    def rec(cur, path):
        if path and types_compatible(cur, goal):
            out.append(walk_to_clause(target, list(path)))
        if len(path) == max_len:
            return
        for e in sg.outgoing(cur):
            path.append(e)
            rec(e.dst, path)
            path.pop()

    rec(start, [])
    return dedup(sorted(out, key=_sort_key))


def learn_walk_clauses(kb: KnowledgeBase, max_len: int = 4, n_walks: int = 50, seed: int = 0) -> list[Clause]:
    return sample_walks(build_schema_graph(kb), kb.target_schema(), max_len, n_walks, seed)
