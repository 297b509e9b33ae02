"""Greedy sequential covering with top-down beam search over Horn clauses."""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .clauses import Clause, Literal, Var
from .errors import ConfigError
from .grounder import has_grounding, partial_ground
from .kb import KnowledgeBase, LabeledTuple, types_compatible

log = logging.getLogger(__name__)


def head_clause(kb: KnowledgeBase, source: str = "ilp") -> Clause:
    schema = kb.target_schema()
    if schema.arity == 2:
        names = ["X", "Y"]
    else:
        names = [f"X{i}" for i in range(schema.arity)]
    return Clause(Literal(schema.name, tuple(Var(n) for n in names)), (), source)


def var_types(clause: Clause, kb: KnowledgeBase) -> dict[Var, str]:
    types: dict[Var, str] = {}
    for lit in (clause.head, *clause.body):
        schema = kb.schemas[lit.predicate]
        for a, t in zip(lit.fact_args(), schema.arg_types):
            if isinstance(a, Var):
                types.setdefault(a, t)
    return types


def refinements(clause: Clause, kb: KnowledgeBase) -> list[Literal]:
    """Literals that can be appended to ``clause``.

    Every argument is an existing variable of compatible type or a fresh
    variable; at least one argument must be an existing variable.  Fresh
    variables are named by their order of appearance so equal clauses get
    equal text.  The target predicate is never used in a body.
    """
    types = var_types(clause, kb)
    existing = list(types)
    next_id = len(existing)
    present = {str(b) for b in clause.body}
    out = []
    for name in sorted(kb.schemas):
        if name == kb.target:
            continue
        schema = kb.schemas[name]
        options = []
        for t in schema.arg_types:
            options.append([v for v in existing if types_compatible(types[v], t)] + [None])
        for combo in itertools.product(*options):
            if all(c is None for c in combo):
                continue
            args, fresh = [], next_id
            for c in combo:
                if c is None:
                    args.append(Var(f"V{fresh}"))
                    fresh += 1
                else:
                    args.append(c)
            lit = Literal(name, tuple(args))
            if str(lit) not in present:
                out.append(lit)
    return out


def covers(clause: Clause, tup: LabeledTuple | Sequence[str], kb: KnowledgeBase) -> bool:
    """True iff the body has at least one satisfying grounding once the head is bound."""
    args = tup.args if isinstance(tup, LabeledTuple) else tuple(tup)
    pg = partial_ground(clause, args, kb)
    return pg is not None and has_grounding(pg, kb)


def coverage_mask(clause: Clause, tuples: Sequence[LabeledTuple], kb: KnowledgeBase,
                  within: np.ndarray | None = None) -> np.ndarray:
    """Boolean coverage per tuple; positions outside ``within`` are left False."""
    mask = np.zeros(len(tuples), dtype=bool)
    idx = range(len(tuples)) if within is None else np.flatnonzero(within)
    for i in idx:
        mask[i] = covers(clause, tuples[i], kb)
    return mask


@dataclass(frozen=True)
class ClauseScore:
    pos_covered: int
    neg_covered: int

    @property
    def score(self) -> int:
        return self.pos_covered - self.neg_covered


@dataclass
class _Candidate:
    clause: Clause
    pos_mask: np.ndarray
    neg_mask: np.ndarray

    @property
    def score(self) -> ClauseScore:
        return ClauseScore(int(self.pos_mask.sum()), int(self.neg_mask.sum()))

    def order(self):
        # best first: higher score, then shorter (more general), then text
        return (-self.score.score, len(self.clause.body), self.clause.text())


def score_clause(clause: Clause, pos: Sequence[LabeledTuple], neg: Sequence[LabeledTuple],
                 kb: KnowledgeBase) -> ClauseScore:
    return ClauseScore(int(coverage_mask(clause, pos, kb).sum()), int(coverage_mask(clause, neg, kb).sum()))


def best_clause(kb: KnowledgeBase, pos: Sequence[LabeledTuple], neg: Sequence[LabeledTuple],
                max_len: int, beam: int = 10) -> _Candidate | None:
    """Beam search from the empty body; returns the best non-empty clause found."""
    root = _Candidate(head_clause(kb), np.ones(len(pos), bool), np.ones(len(neg), bool))
    frontier = [root]
    best: _Candidate | None = None
    seen: set[str] = set()
    for _ in range(max_len):
        cands = []
        for parent in frontier:
            for lit in refinements(parent.clause, kb):
                child = parent.clause.extend(lit)
                key = child.text()
                if key in seen:
                    continue
                seen.add(key)
                # refinement only specializes, so test only what the parent covers
                pm = coverage_mask(child, pos, kb, parent.pos_mask)
                if not pm.any():
                    continue
                nm = coverage_mask(child, neg, kb, parent.neg_mask)
                cands.append(_Candidate(child, pm, nm))
        if not cands:
            break
        cands.sort(key=_Candidate.order)
        if best is None or cands[0].order() < best.order():
            best = cands[0]
        # a child's score can never exceed its positive coverage
        bound = best.score.score
        frontier = [c for c in cands if c.score.pos_covered > bound][:beam]
        if not frontier:
            break
    return best


def learn_clauses(kb: KnowledgeBase, pos: Sequence[LabeledTuple], neg: Sequence[LabeledTuple],
                  max_rules: int = 10, max_len: int = 3, min_score: int = 1,
                  beam: int = 10) -> list[Clause]:
    """Sequential covering: learn the best clause, drop the positives it covers, repeat.

    Scores are ``#pos covered - #neg covered`` over the still-uncovered
    positives and all negatives.  Stops at ``max_rules`` clauses, when no
    clause reaches ``min_score``, or when every positive is covered.
    """
    if max_rules < 1 or max_len < 1:
        raise ConfigError("max_rules and max_len must be >= 1")
    pool = list(pos)
    neg = list(neg)
    rules: list[Clause] = []
    while pool and len(rules) < max_rules:
        cand = best_clause(kb, pool, neg, max_len, beam)
        if cand is None or cand.score.score < min_score or cand.score.pos_covered == 0:
            break
        rules.append(cand.clause)
        log.debug("rule %d: %s  %s", len(rules), cand.clause.text(), cand.score)
        pool = [p for p, hit in zip(pool, cand.pos_mask) if not hit]
    return rules
