"""Relational one-class classification with tree-based distances.

A relational tree routes an example left when the conjunction of the tests
on its left-ancestor path, extended by the node's test, has a grounding.
A node test is one literal, or two when lookahead is on (the second literal
must reuse a variable introduced by the first).
Two examples are at distance ``exp(-lam * depth(LCA))`` in a tree unless
they end in the same leaf (distance 0).  An ensemble combines tree
distances with weights ``beta``; the density of "not in class" for ``z`` is
the ``alpha``-weighted distance to the positive training examples.

Trees are grown greedily, picking at each node the test with the smallest
two-branch squared error, where unlabeled examples (the negative pool) are
pulled towards 1 and positives towards 0 by the cross-branch distance mass.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .clauses import Clause, Literal
from .errors import ConfigError, DGMWarning, ModelError
from .grounder import has_grounding, partial_ground
from .kb import KnowledgeBase, LabeledTuple
from .rules_ilp import covers, head_clause, refinements


@dataclass
class TreeNode:
    depth: int
    test: tuple[Literal, ...] | None = None
    left: TreeNode | None = None
    right: TreeNode | None = None
    # set when the tree was grown with trace=True: (test text, objective) for each candidate
    scored: list[tuple[str, float]] | None = None
    baseline: float | None = None

    @property
    def is_leaf(self) -> bool:
        return self.test is None


@dataclass
class RelationalTree:
    root: TreeNode
    head: Literal
    lam: float = 1.0

    def route(self, tup: Sequence[str], kb: KnowledgeBase) -> tuple[bool, ...]:
        """Branch decisions from the root to a leaf (True = left)."""
        node, context, path = self.root, [], []
        while not node.is_leaf:
            went_left = _satisfied(self.head, context + list(node.test), tup, kb)
            path.append(went_left)
            if went_left:
                context.extend(node.test)
                node = node.left
            else:
                node = node.right
        return tuple(path)

    def left_branch(self) -> Clause:
        body, node = [], self.root
        while not node.is_leaf:
            body.extend(node.test)
            node = node.left
        return Clause(self.head, tuple(body), "relocc")

    def leaves(self) -> list[tuple[bool, ...]]:
        out = []

        def rec(node, path):
            if node.is_leaf:
                out.append(tuple(path))
            else:
                rec(node.left, path + [True])
                rec(node.right, path + [False])
        rec(self.root, [])
        return out

    def internal_nodes(self) -> list[TreeNode]:
        out, stack = [], [self.root]
        while stack:
            n = stack.pop()
            if not n.is_leaf:
                out.append(n)
                stack.extend([n.right, n.left])
        return out


def _satisfied(head: Literal, body: list[Literal], tup, kb) -> bool:
    pg = partial_ground(Clause(head, tuple(body)), tuple(tup), kb)
    return pg is not None and has_grounding(pg, kb)


def path_distance(p1: tuple[bool, ...], p2: tuple[bool, ...], lam: float) -> float:
    """Distance between two routings of the same tree."""
    if p1 == p2:
        return 0.0  # same leaf
    depth = 0
    for a, b in zip(p1, p2):
        if a != b:
            break
        depth += 1
    return math.exp(-lam * depth)


def tree_distance(tree: RelationalTree, x1, x2, kb: KnowledgeBase) -> float:
    a1 = x1.args if isinstance(x1, LabeledTuple) else tuple(x1)
    a2 = x2.args if isinstance(x2, LabeledTuple) else tuple(x2)
    return path_distance(tree.route(a1, kb), tree.route(a2, kb), tree.lam)


@dataclass
class DistanceModel:
    trees: list[RelationalTree] = field(default_factory=list)
    betas: list[float] = field(default_factory=list)
    alphas: list[float] = field(default_factory=list)
    training_examples: list[LabeledTuple] = field(default_factory=list)

    def set_uniform_weights(self):
        n = len(self.trees)
        self.betas = [1.0 / n] * n if n else []
        m = len(self.training_examples)
        self.alphas = [1.0 / m] * m if m else []


def combined_distance(model: DistanceModel, x1, x2, kb: KnowledgeBase) -> float:
    if not model.trees:
        raise ModelError("distance model has no trees")
    return sum(b * tree_distance(t, x1, x2, kb) for t, b in zip(model.trees, model.betas))


def density_estimate(model: DistanceModel, z, kb: KnowledgeBase) -> float:
    """Weighted distance of ``z`` to the training examples (high = unlike the class)."""
    if not model.training_examples:
        raise ModelError("distance model has no training examples")
    return sum(a * combined_distance(model, x, z, kb)
               for a, x in zip(model.alphas, model.training_examples))


def density_vector(model: DistanceModel, zs: Sequence[LabeledTuple], kb: KnowledgeBase) -> np.ndarray:
    """:func:`density_estimate` for many examples, routing each example once per tree."""
    out = np.zeros(len(zs))
    if not model.trees:
        return out
    alphas = np.asarray(model.alphas)
    for tree, beta in zip(model.trees, model.betas):
        leaves = tree.leaves()
        lid = {p: i for i, p in enumerate(leaves)}
        dmat = np.array([[path_distance(a, b, tree.lam) for b in leaves] for a in leaves])
        xs = np.array([lid[tree.route(x.args, kb)] for x in model.training_examples], dtype=np.int64)
        zl = np.array([lid[tree.route(z.args, kb)] for z in zs], dtype=np.int64)
        # per-leaf alpha mass, then leaf-to-leaf distances
        mass = np.bincount(xs, weights=alphas, minlength=len(leaves))
        out += beta * (mass @ dmat[:, zl])
    return out


# --------------------------------------------------------------------------
# split objective and greedy growth
# --------------------------------------------------------------------------

def split_objective(go_left: np.ndarray, target: np.ndarray, density: np.ndarray,
                    alpha: np.ndarray, labeled: np.ndarray, beta: float, lam: float,
                    depth: int) -> float:
    """Two-branch squared error of a candidate split at a node of the given depth.

    Every example on one side is scored against the alpha mass of the labeled
    examples on the other side, which sit at distance ``exp(-lam*depth)``.
    ``target`` is 1 for unlabeled examples and 0 for labeled ones.
    """
    c = beta * math.exp(-lam * depth)
    mass_l = float(alpha[go_left & labeled].sum())
    mass_r = float(alpha[~go_left & labeled].sum())
    resid = target - density
    err_r = resid[~go_left] - c * mass_l
    err_l = resid[go_left] - c * mass_r
    return float(err_r @ err_r + err_l @ err_l)


@dataclass
class _NodeData:
    examples: list[LabeledTuple]
    target: np.ndarray
    density: np.ndarray
    alpha: np.ndarray
    labeled: np.ndarray

    def subset(self, mask):
        return _NodeData([e for e, m in zip(self.examples, mask) if m], self.target[mask],
                         self.density[mask], self.alpha[mask], self.labeled[mask])


def learn_tree(kb: KnowledgeBase, pos: Sequence[LabeledTuple], neg: Sequence[LabeledTuple],
               model: DistanceModel | None = None, max_depth: int = 3, lam: float = 1.0,
               beta: float = 1.0, alpha: float | None = None, trace: bool = False,
               lookahead: int = 2, max_candidates: int | None = None) -> RelationalTree:
    """Grow one relational tree greedily.

    ``pos`` are the labeled examples, ``neg`` the unlabeled ones.  ``model``
    (the trees learned so far) supplies the current density estimate;
    ``beta`` is the weight the new tree will carry and ``alpha`` the weight
    of each labeled example (default ``1/len(pos)``).
    """
    if lam <= 0:
        raise ConfigError("lambda must be > 0")
    head = head_clause(kb, "relocc").head
    examples = list(pos) + list(neg)
    labeled = np.array([True] * len(pos) + [False] * len(neg))
    target = (~labeled).astype(float)
    if alpha is None:
        alpha = 1.0 / len(pos) if len(pos) else 0.0
    alphas = np.where(labeled, alpha, 0.0)
    if model is not None and model.trees:
        density = density_vector(model, examples, kb)
    else:
        density = np.zeros(len(examples))
    data = _NodeData(examples, target, density, alphas, labeled)
    opts = dict(max_depth=max_depth, lam=lam, beta=beta, trace=trace, lookahead=lookahead,
                max_candidates=max_candidates)
    root = _grow(kb, head, [], data, 0, opts)
    return RelationalTree(root, head, lam)


def candidate_tests(kb: KnowledgeBase, head: Literal, context: list[Literal],
                    lookahead: int = 2) -> list[tuple[Literal, ...]]:
    """Single-literal refinements of the node context, plus two-literal lookahead tests."""
    ctx = Clause(head, tuple(context))
    known = set(ctx.variables())
    tests = []
    for lit in refinements(ctx, kb):
        tests.append((lit,))
        if lookahead < 2:
            continue
        fresh = set(lit.variables()) - known
        if not fresh:
            continue
        for lit2 in refinements(ctx.extend(lit), kb):
            if fresh & set(lit2.variables()):
                tests.append((lit, lit2))
    return tests


def test_text(test: tuple[Literal, ...]) -> str:
    return ", ".join(str(t) for t in test)


def _grow(kb, head, context, data: _NodeData, depth, opts):
    node = TreeNode(depth)
    if depth >= opts["max_depth"] or len(data.examples) < 2:
        return node
    resid = data.target - data.density
    baseline = float(resid @ resid)
    cands = candidate_tests(kb, head, context, opts["lookahead"])
    if opts["max_candidates"] is not None:
        cands = cands[:opts["max_candidates"]]
    best = None
    scored = []
    first_hits: dict[str, np.ndarray] = {}
    for test in cands:
        body = context + list(test)
        # a two-literal test can only hold where its first literal does
        within = first_hits.get(str(test[0])) if len(test) > 1 else None
        go_left = np.zeros(len(data.examples), dtype=bool)
        for i, e in enumerate(data.examples):
            if within is None or within[i]:
                go_left[i] = _satisfied(head, body, e.args, kb)
        if len(test) == 1:
            first_hits[str(test[0])] = go_left
        obj = split_objective(go_left, data.target, data.density, data.alpha, data.labeled,
                              opts["beta"], opts["lam"], depth)
        scored.append((test_text(test), obj))
        key = (obj, len(test), test_text(test))
        if best is None or key < best[0]:
            best = (key, test, go_left)
    if opts["trace"]:
        node.scored = scored
        node.baseline = baseline
    if best is None or not best[0][0] < baseline - 1e-12:
        return node
    _, test, go_left = best
    node.test = test
    node.left = _grow(kb, head, context + list(test), data.subset(go_left), depth + 1, opts)
    node.right = _grow(kb, head, context, data.subset(~go_left), depth + 1, opts)
    return node


def learn_distance_model(kb: KnowledgeBase, pos: Sequence[LabeledTuple], neg: Sequence[LabeledTuple],
                         n_trees: int = 5, lam: float = 1.0, max_depth: int = 3,
                         lookahead: int = 2) -> tuple[DistanceModel, list[Clause]]:
    """Learn ``n_trees`` trees in sequence; return the model and each tree's left-most path.

    After every tree the positives covered by its left-most path are removed
    from the pool the next tree is grown on.  Weights stay uniform.
    """
    if n_trees < 1:
        raise ConfigError("n_trees must be >= 1")
    pos = list(pos)
    model = DistanceModel(training_examples=pos)
    model.set_uniform_weights()
    alpha = 1.0 / len(pos) if pos else 0.0
    pool = list(pos)
    clauses: list[Clause] = []
    for t in range(n_trees):
        if not pool:
            break
        tree = learn_tree(kb, pool, neg, model, max_depth, lam, beta=1.0 / (t + 1), alpha=alpha,
                          lookahead=lookahead)
        model.trees.append(tree)
        model.set_uniform_weights()
        clause = tree.left_branch()
        if not clause.body:
            warnings.warn(f"tree {t} is a single leaf; no feature extracted", DGMWarning, stacklevel=2)
            continue
        if clause.text() not in {c.text() for c in clauses}:
            clauses.append(clause)
        pool = [p for p in pool if not covers(clause, p, kb)]
    return model, clauses


def dump_model(model: DistanceModel) -> str:
    """Human-readable model dump: weights, then each tree in pre-order."""
    lines = [f"trees {len(model.trees)}", f"training_examples {len(model.training_examples)}",
             "alpha " + (f"{model.alphas[0]:.17g}" if model.alphas else "-") + " (uniform)"]
    for i, (tree, beta) in enumerate(zip(model.trees, model.betas)):
        lines.append(f"tree {i} beta {beta:.17g} lambda {tree.lam:.17g}")

        def rec(node, indent):
            pad = "  " * indent
            if node.is_leaf:
                lines.append(f"{pad}leaf")
            else:
                lines.append(f"{pad}{test_text(node.test)}")
                rec(node.left, indent + 1)
                rec(node.right, indent + 1)
        rec(tree.root, 1)
    return "\n".join(lines) + "\n"
