"""Partial grounding, substitution enumeration and neighborhood-restricted counts.

:func:`lge_embed` turns a list of clauses into count-based embeddings: one
row per (query tuple, sampled neighborhood), one column per clause.
"""

from __future__ import annotations

import csv
import json
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import kernels
from .clauses import Clause, Literal, Var
from .errors import DGMWarning
from .gaifman import GaifmanGraph, NeighborhoodSample, build_gaifman_graph, generate_neighborhoods
from .kb import KnowledgeBase, LabeledTuple, types_compatible


class FactIndex:
    """Facts as integer tuples, indexed by (predicate, position, entity)."""

    def __init__(self, kb: KnowledgeBase):
        self.kb = kb
        ids = kb.entity_ids
        self.tuples: dict[str, list[tuple[int, ...]]] = {}
        self.sets: dict[str, set[tuple[int, ...]]] = {}
        self.by_arg: dict[tuple[str, int, int], list[tuple[int, ...]]] = {}
        for pred, atoms in kb._index["by_pred"].items():
            rows = [tuple(ids[a] for a in atom.args) for atom in atoms]
            self.tuples[pred] = rows
            self.sets[pred] = set(rows)
            for row in rows:
                for pos, e in enumerate(row):
                    self.by_arg.setdefault((pred, pos, e), []).append(row)

    def candidates(self, pred: str, pattern: Sequence) -> list[tuple[int, ...]]:
        """Facts of ``pred`` compatible with the bound positions of ``pattern``.

        ``pattern`` holds an entity id for bound positions and ``None`` otherwise.
        """
        best = None
        for pos, e in enumerate(pattern):
            if e is not None:
                bucket = self.by_arg.get((pred, pos, e), ())
                if best is None or len(bucket) < len(best):
                    best = bucket
                    if not best:
                        return []
        return self.tuples.get(pred, []) if best is None else best


_INDEX_CACHE: dict[int, FactIndex] = {}


def fact_index(kb: KnowledgeBase) -> FactIndex:
    idx = _INDEX_CACHE.get(id(kb))
    if idx is None or idx.kb is not kb:
        if len(_INDEX_CACHE) > 16:
            _INDEX_CACHE.clear()
        idx = FactIndex(kb)
        _INDEX_CACHE[id(kb)] = idx
    return idx


@dataclass(frozen=True)
class PartialGrounding:
    """Clause body with head variables replaced by the query entities."""
    clause: Clause
    tuple: tuple[str, ...]
    body: tuple[Literal, ...]

    @property
    def free_vars(self) -> list[Var]:
        seen: dict[Var, None] = {}
        for lit in self.body:
            for v in lit.variables():
                seen.setdefault(v)
        return list(seen)

    def __str__(self):
        return " ∧ ".join(str(b) for b in self.body) or "true"


def partial_ground(clause: Clause, tup: Sequence[str], kb: KnowledgeBase) -> PartialGrounding | None:
    """Substitute the query tuple for the head variables.

    Returns ``None`` when the tuple cannot ground the clause (wrong arity,
    incompatible entity types, or a repeated head variable bound twice).
    """
    head = clause.head
    if len(head.args) != len(tup):
        return None
    schema = kb.schemas.get(head.predicate)
    theta: dict[Var, str] = {}
    for pos, (v, e) in enumerate(zip(head.args, tup)):
        if schema is not None and e in kb.entity_types:
            if not types_compatible(kb.entity_types[e], schema.arg_types[pos]):
                return None
        if theta.get(v, e) != e:
            return None
        theta[v] = e
    return PartialGrounding(clause, tuple(tup), tuple(b.substitute(theta) for b in clause.body))


def _compile(body: Sequence[Literal], kb: KnowledgeBase, var_order: list[Var]):
    """Literal patterns in fact order: ints for constants, negative codes for variables."""
    ids = kb.entity_ids
    vpos = {v: i for i, v in enumerate(var_order)}
    out = []
    for lit in body:
        pat = []
        for a in lit.fact_args():
            if isinstance(a, Var):
                pat.append(-1 - vpos[a])
            else:
                e = ids.get(a)
                if e is None:
                    return None  # unknown constant: nothing can match
                pat.append(e)
        out.append((lit.predicate, tuple(pat)))
    return out


def _solve(patterns, index: FactIndex, n_vars: int, limit: int = 0):
    """Backtracking enumeration; yields binding tuples over the free variables.

    Picks the most constrained literal (fewest candidate facts) at each step.
    """
    binding: list[int | None] = [None] * n_vars
    results: list[tuple[int, ...]] = []

    def resolve(pat):
        return [e if e >= 0 else binding[-1 - e] for e in pat]

    def step(remaining):
        if not remaining:
            results.append(tuple(binding))
            return limit and len(results) >= limit
        best_i, best_c = -1, None
        for i, (pred, pat) in enumerate(remaining):
            c = index.candidates(pred, resolve(pat))
            if best_c is None or len(c) < len(best_c):
                best_i, best_c = i, c
                if not c:
                    return False
        pred, pat = remaining[best_i]
        rest = remaining[:best_i] + remaining[best_i + 1:]
        cur = resolve(pat)
        for fact in best_c:
            newly = []
            ok = True
            for p, e in enumerate(fact):
                want = cur[p]
                if want is None:
                    code = -1 - pat[p]
                    if binding[code] is None:
                        binding[code] = e
                        newly.append(code)
                    elif binding[code] != e:
                        ok = False
                        break
                elif want != e:
                    ok = False
                    break
            if ok and step(rest):
                for code in newly:
                    binding[code] = None
                return True
            for code in newly:
                binding[code] = None
        return False

    step(list(patterns))
    return results


def grounding_array(pg: PartialGrounding, kb: KnowledgeBase) -> tuple[list[Var], np.ndarray]:
    """All satisfying substitutions as an int array (n_subs, n_free_vars), sorted."""
    fv = pg.free_vars
    patterns = _compile(pg.body, kb, fv)
    if patterns is None:
        return fv, np.empty((0, len(fv)), dtype=np.int64)
    rows = _solve(patterns, fact_index(kb), len(fv))
    if not rows:
        return fv, np.empty((0, len(fv)), dtype=np.int64)
    uniq = sorted(set(rows))
    if not fv:
        return fv, np.empty((len(uniq), 0), dtype=np.int64)
    return fv, np.array(uniq, dtype=np.int64)


def has_grounding(pg: PartialGrounding, kb: KnowledgeBase) -> bool:
    fv = pg.free_vars
    patterns = _compile(pg.body, kb, fv)
    if patterns is None:
        return False
    return bool(_solve(patterns, fact_index(kb), len(fv), limit=1))


def satisfying_groundings(pg: PartialGrounding, kb: KnowledgeBase) -> list[dict[str, str]]:
    fv, arr = grounding_array(pg, kb)
    names = kb.entities
    return [{v.name: names[e] for v, e in zip(fv, row)} for row in arr]


def count_in_neighborhood(pg: PartialGrounding | None, kb: KnowledgeBase,
                          nb: NeighborhoodSample) -> int:
    """Satisfying substitutions whose bound entities all lie in the sampled neighborhood."""
    if pg is None:
        return 0
    _, arr = grounding_array(pg, kb)
    return int(kernels.count_inside(arr, nb.mask(len(kb.entities))))


# --------------------------------------------------------------------------
# embeddings
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class EmbeddingRow:
    tuple: tuple[str, ...]
    neighborhood_index: int
    counts: np.ndarray
    label: int


def _embed_tuple(clauses, kb, g, lt: LabeledTuple, r, k, w, seed):
    n_ent = len(kb.entities)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        hoods = generate_neighborhoods(g, lt.args, r, k, w, seed)
    masks = [nb.mask(n_ent) for nb in hoods]
    counts = np.zeros((w, len(clauses)), dtype=np.int64)
    for j, clause in enumerate(clauses):
        pg = partial_ground(clause, lt.args, kb)
        if pg is None:
            continue
        _, arr = grounding_array(pg, kb)
        if arr.shape[0] == 0:
            continue
        for i, m in enumerate(masks):
            counts[i, j] = kernels.count_inside(arr, m)
    rows = [EmbeddingRow(lt.args, i, counts[i], lt.label) for i in range(w)]
    return rows, [str(c.message) for c in caught]


def lge_embed(kb: KnowledgeBase, clauses: Sequence[Clause], pos: Sequence[LabeledTuple],
              neg: Sequence[LabeledTuple], r: int = 1, k: int = 10, w: int = 5, seed: int = 0,
              graph: GaifmanGraph | None = None, threads: int = 1) -> list[EmbeddingRow]:
    """Count-based embeddings for every positive, then every negative tuple.

    Emits ``w`` rows per tuple in (positives sorted, negatives sorted,
    neighborhood index) order.  The output does not depend on ``threads``.
    """
    if not clauses:
        raise ValueError("need at least one clause to embed")
    g = graph if graph is not None else build_gaifman_graph(kb)
    ordered = sorted(LabeledTuple(t.args, 1) for t in pos) + sorted(LabeledTuple(t.args, 0) for t in neg)
    fact_index(kb)  # build before fanning out

    def work(lt):
        return _embed_tuple(clauses, kb, g, lt, r, k, w, seed)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            results = list(ex.map(work, ordered))
    else:
        results = [work(lt) for lt in ordered]

    rows: list[EmbeddingRow] = []
    for chunk, msgs in results:
        rows.extend(chunk)
        for msg in msgs:
            warnings.warn(msg, DGMWarning, stacklevel=2)
    return rows


def rows_to_arrays(rows: Sequence[EmbeddingRow]):
    """(X, y, groups) with one group id per distinct tuple, in row order."""
    n_feat = len(rows[0].counts) if rows else 0
    X = np.array([r.counts for r in rows], dtype=np.float64).reshape(len(rows), n_feat)
    y = np.array([r.label for r in rows], dtype=np.int64)
    keys: dict[tuple, int] = {}
    groups = np.array([keys.setdefault((r.tuple, r.label), len(keys)) for r in rows], dtype=np.int64)
    return X, y, groups


def _tuple_str(t):
    return "|".join(t)


def write_embedding_csv(rows: Sequence[EmbeddingRow], path) -> None:
    n_feat = len(rows[0].counts) if rows else 0
    with open(path, "w", encoding="utf-8", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["tuple", "neighborhood", "label"] + [f"f{i + 1}" for i in range(n_feat)])
        for r in rows:
            wr.writerow([_tuple_str(r.tuple), r.neighborhood_index, r.label] + [int(c) for c in r.counts])


def write_embedding_jsonl(rows: Sequence[EmbeddingRow], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for r in rows:
            fh.write(json.dumps({"tuple": list(r.tuple), "neighborhood": r.neighborhood_index,
                                 "label": r.label, "counts": [int(c) for c in r.counts]}) + "\n")


def read_embedding_csv(path) -> list[EmbeddingRow]:
    rows = []
    with open(path, encoding="utf-8", newline="") as fh:
        rd = csv.reader(fh)
        header = next(rd, None)
        if header is None or header[:3] != ["tuple", "neighborhood", "label"]:
            raise ValueError(f"{path}: not an embedding CSV")
        for rec in rd:
            rows.append(EmbeddingRow(tuple(rec[0].split("|")), int(rec[1]),
                                     np.array([int(x) for x in rec[3:]], dtype=np.int64), int(rec[2])))
    return rows
