"""Acceptance criteria, one test each.

Every test prints a single ``criterion N: PASS|FAIL ...`` line (also repeated
in the terminal summary) and then asserts.  Oracles here are deliberately
naive: BFS over adjacency sets, exhaustive substitution, and routing trees by
brute-force satisfiability instead of the grounder.
"""

import math
import time
from collections import deque
from pathlib import Path

import numpy as np
import pytest

from dgmlearn.cli import main, run_sweep
from dgmlearn.clauses import Clause, Literal, Var, parse_clause
from dgmlearn.gaifman import (GaifmanGraph, build_gaifman_graph, generate_neighborhoods, hop_distance,
                              r_neighborhood)
from dgmlearn.grounder import count_in_neighborhood, partial_ground
from dgmlearn.kb import LabeledTuple, generate_negatives, positive_tuples
from dgmlearn.learn_eval import Dataset, auc_roc, evaluate, logistic_loss_grad, train_gbt
from dgmlearn.pipeline import PipelineConfig, cross_validate
from dgmlearn.rules_relocc import DistanceModel, RelationalTree, TreeNode, learn_tree, tree_distance
from dgmlearn.synthetic import planted_ddi_text

from conftest import D1, D2, D3, E1, T1, brute_force_groundings, brute_force_satisfiable, random_kb

RESULTS: dict[int, str] = {}


@pytest.fixture
def report(capsys):
    def _report(n, ok, detail=""):
        line = f"criterion {n}: {'PASS' if ok else 'FAIL'}" + (f"  {detail}" if detail else "")
        RESULTS[n] = line
        with capsys.disabled():
            print("\n" + line)
        return ok
    return _report


# --------------------------------------------------------------------------
# 1. neighborhoods vs all-pairs BFS
# --------------------------------------------------------------------------

def _bfs_all_pairs(n, edges):
    adj = [set() for _ in range(n)]
    for a, b in edges:
        adj[a].add(b)
        adj[b].add(a)
    dist = []
    for s in range(n):
        d = {s: 0}
        q = deque([s])
        while q:
            u = q.popleft()
            for v in adj[u]:
                if v not in d:
                    d[v] = d[u] + 1
                    q.append(v)
        dist.append(d)
    return dist


def test_criterion_1_neighborhood_oracle(report):
    rng = np.random.default_rng(101)
    t0 = time.perf_counter()
    mismatches = 0
    for _ in range(200):
        n = int(rng.integers(1, 61))
        p = float(rng.uniform(0.0, 0.15))
        edges = {(a, b) for a in range(n) for b in range(a + 1, n) if rng.random() < p}
        names = [f"n{i:02d}" for i in range(n)]
        g = GaifmanGraph(names, edges)
        dist = _bfs_all_pairs(n, edges)
        for s in range(n):
            for t in range(n):
                if hop_distance(g, names[s], names[t]) != dist[s].get(t):
                    mismatches += 1
            prev = set()
            for r in (1, 2, 3, 4):
                got = r_neighborhood(g, names[s], r)
                want = {names[t] for t, d in dist[s].items() if 0 < d <= r}
                if got != want or not prev <= got:
                    mismatches += 1
                prev = got
    elapsed = time.perf_counter() - t0
    ok = mismatches == 0 and elapsed < 10
    report(1, ok, f"mismatches={mismatches} time={elapsed:.2f}s (<10s)")
    assert ok


# --------------------------------------------------------------------------
# 2. statin micro-examples
# --------------------------------------------------------------------------

def test_criterion_2_statins(report, statin_kb):
    g = build_gaifman_graph(statin_kb)
    checks = {
        "d(d1,t1)=1": hop_distance(g, D1, T1) == 1,
        "d(d1,d2)=2": hop_distance(g, D1, D2) == 2,
        "N1(d1)": r_neighborhood(g, D1, 1) == {T1, E1},
        "N2(d1)": r_neighborhood(g, D1, 2) == {T1, E1, D2, D3},
    }
    c = parse_clause("Interacts(X,Y) :- EnzymeInhib(X,Z), EnzymeInhib(Y,Z).")
    pg = partial_ground(c, (D1, D2), statin_kb)
    [nb] = generate_neighborhoods(g, (D1, D2), 1, 10, 1, 0)
    checks["count=1"] = count_in_neighborhood(pg, statin_kb, nb) == 1
    ok = all(checks.values())
    report(2, ok, " ".join(f"{k}:{'ok' if v else 'NO'}" for k, v in checks.items()))
    assert ok


# --------------------------------------------------------------------------
# 3. counting vs exhaustive substitution
# --------------------------------------------------------------------------

def _random_clause(rng, kb):
    preds = [p for p in sorted(kb.schemas) if p != "T"]
    X, Y, A, B = Var("X"), Var("Y"), Var("A"), Var("B")
    pool = [X, Y, A, B]
    body = []
    for _ in range(int(rng.integers(1, 4))):
        p = preds[int(rng.integers(len(preds)))]
        ar = kb.schemas[p].arity
        args = []
        for _ in range(ar):
            if rng.random() < 0.1:
                args.append(kb.entities[int(rng.integers(len(kb.entities)))])
            else:
                args.append(pool[int(rng.integers(len(pool)))])
        inverse = ar == 2 and rng.random() < 0.3
        body.append(Literal(p, tuple(args), inverse))
    return Clause(Literal("T", (X, Y)), tuple(body))


def test_criterion_3_counting_oracle(report):
    rng = np.random.default_rng(303)
    t0 = time.perf_counter()
    checked = mismatches = nonzero = 0
    for _ in range(100):
        kb = random_kb(rng, n_entities=int(rng.integers(5, 41)), n_preds=int(rng.integers(1, 5)),
                       n_facts=int(rng.integers(10, 80)))
        g = build_gaifman_graph(kb)
        for _ in range(5):
            c = _random_clause(rng, kb)
            ents = kb.entities
            tup = (ents[int(rng.integers(len(ents)))], ents[int(rng.integers(len(ents)))])
            pg = partial_ground(c, tup, kb)
            fixed = {Var("X"): tup[0], Var("Y"): tup[1]}
            oracle = brute_force_groundings(c.body, kb, fixed)
            for nb in generate_neighborhoods(g, tup, int(rng.integers(1, 3)), int(rng.integers(1, 8)), 2,
                                             int(rng.integers(1000))):
                want = sum(all(e in nb.members for e in s.values()) for s in oracle)
                checked += 1
                nonzero += want > 0
                mismatches += count_in_neighborhood(pg, kb, nb) != want
    elapsed = time.perf_counter() - t0
    ok = mismatches == 0 and elapsed < 30
    report(3, ok, f"cases={checked} nonzero={nonzero} mismatches={mismatches} time={elapsed:.2f}s (<30s)")
    assert ok


# --------------------------------------------------------------------------
# 4. distance axioms with independent routing
# --------------------------------------------------------------------------

def _random_tree(rng, kb, max_depth):
    preds = [p for p in sorted(kb.schemas) if p != "T"]
    counter = [0]

    def grow(depth, known):
        if depth >= max_depth or rng.random() < 0.25:
            return TreeNode(depth)
        p = preds[int(rng.integers(len(preds)))]
        ar = kb.schemas[p].arity
        args = []
        for i in range(ar):
            if i == 0 or rng.random() < 0.5:
                args.append(known[int(rng.integers(len(known)))])
            else:
                counter[0] += 1
                args.append(Var(f"V{counter[0]}"))
        lit = Literal(p, tuple(args))
        new = known + [a for a in args if a not in known]
        return TreeNode(depth, (lit,), grow(depth + 1, new), grow(depth + 1, known))
    return RelationalTree(grow(0, [Var("X"), Var("Y")]), Literal("T", (Var("X"), Var("Y"))),
                          float(rng.uniform(0.1, 3.0)))


def _oracle_route(tree, tup, kb):
    fixed = dict(zip(tree.head.args, tup))
    node, ctx, path = tree.root, [], []
    while node.test is not None:
        left = brute_force_satisfiable(ctx + list(node.test), kb, fixed)
        path.append(left)
        if left:
            ctx = ctx + list(node.test)
            node = node.left
        else:
            node = node.right
    return tuple(path)


def _oracle_distance(p, q, lam):
    if p == q:
        return 0.0
    depth = next(i for i, (a, b) in enumerate(zip(p + (None,), q + (None,))) if a != b)
    return math.exp(-lam * depth)


def test_criterion_4_distance_axioms(report):
    rng = np.random.default_rng(404)
    failures = []
    for case in range(1000):
        if case % 20 == 0:
            kb = random_kb(rng, n_entities=8, n_preds=3, n_facts=25, arities=(1, 2, 2))
        tree = _random_tree(rng, kb, int(rng.integers(1, 4)))
        ents = kb.entities
        x, y, z = [(ents[int(rng.integers(len(ents)))], ents[int(rng.integers(len(ents)))])
                   for _ in range(3)]
        d = {(a, b): tree_distance(tree, a, b, kb) for a in (x, y, z) for b in (x, y, z)}
        routes = {a: _oracle_route(tree, a, kb) for a in (x, y, z)}
        for (a, b), v in d.items():
            ref = _oracle_distance(routes[a], routes[b], tree.lam)
            if not (abs(v - d[(b, a)]) <= 1e-12 and -1e-12 <= v <= 1 + 1e-12 and abs(v - ref) <= 1e-12):
                failures.append((case, "value"))
            if routes[a] == routes[b] and v != 0.0:
                failures.append((case, "identity"))
        for a, b, c in [(x, y, z), (y, z, x), (z, x, y)]:
            if d[(a, c)] > max(d[(a, b)], d[(b, c)]) + 1e-12:
                failures.append((case, "ultrametric"))
    ok = not failures
    report(4, ok, f"cases=1000 failures={len(failures)}")
    assert ok, failures[:5]


# --------------------------------------------------------------------------
# 5. greedy split optimality, exhaustive re-scoring
# --------------------------------------------------------------------------

def _rescore_tree(tree, kb, examples, labeled, alpha, beta, density):
    """Re-score every traced node independently; returns violations."""
    head = tree.head
    fixed = lambda e: dict(zip(head.args, e.args))
    bad = []

    def visit(node, ctx, idx):
        if node.scored is None:
            return
        c = beta * math.exp(-tree.lam * node.depth)
        scores = {}
        for text, traced in node.scored:
            body = list(ctx) + list(parse_clause(f"{head} :- {text}.").body)
            go_left = np.array([brute_force_satisfiable(body, kb, fixed(examples[i])) for i in idx], dtype=bool)
            lab, a = labeled[idx], alpha[idx]
            resid = np.where(lab, 0.0, 1.0) - density[idx]
            ml, mr = a[go_left & lab].sum(), a[~go_left & lab].sum()
            obj = sum((resid[i] - c * (mr if go_left[i] else ml)) ** 2 for i in range(len(idx)))
            scores[text] = obj
            if abs(obj - traced) > 1e-9:
                bad.append(("traced", node.depth, text, obj, traced))
        if node.test is None:
            base = float(((np.where(labeled[idx], 0.0, 1.0) - density[idx]) ** 2).sum())
            if scores and min(scores.values()) < base - 1e-9:
                bad.append(("unsplit", node.depth))
            return
        chosen = ", ".join(str(t) for t in node.test)
        if any(scores[chosen] > s + 1e-12 for s in scores.values()):
            bad.append(("not-min", node.depth, chosen))
        body = list(ctx) + list(node.test)
        left = [i for i in idx if brute_force_satisfiable(body, kb, fixed(examples[i]))]
        right = [i for i in idx if i not in set(left)]
        visit(node.left, body, np.array(left, dtype=np.int64))
        visit(node.right, ctx, np.array(right, dtype=np.int64))

    visit(tree.root, [], np.arange(len(examples)))
    return bad


def test_criterion_5_greedy_optimality(report, planted_kb):
    rng = np.random.default_rng(505)
    pos_all = positive_tuples(planted_kb)
    neg_all = generate_negatives(planted_kb, 1, 0)
    violations, nodes, max_cands = [], 0, 0
    for inst in range(6):
        n_pos = int(rng.integers(4, 16))
        pos = [pos_all[i] for i in rng.choice(len(pos_all), n_pos, replace=False)]
        neg = [neg_all[i] for i in rng.choice(len(neg_all), 30 - n_pos, replace=False)]
        examples = pos + neg
        labeled = np.array([True] * len(pos) + [False] * len(neg))
        a = 1.0 / len(pos)
        alpha = np.where(labeled, a, 0.0)
        model, beta, density = None, 1.0, np.zeros(len(examples))
        if inst % 2:
            # second tree on top of a first one: density is non-zero
            t0 = learn_tree(planted_kb, pos, neg, max_depth=1, lookahead=1, max_candidates=15)
            model = DistanceModel([t0], [1.0], [a] * len(pos), pos)
            beta = 0.5
            routes = [_oracle_route(t0, e.args, planted_kb) for e in examples]
            density = np.array([sum(a * _oracle_distance(routes[i], routes[j], t0.lam)
                                    for i in range(len(pos))) for j in range(len(examples))])
        tree = learn_tree(planted_kb, pos, neg, model, max_depth=2, lam=float(rng.uniform(0.5, 2)),
                          beta=beta, alpha=a, trace=True, lookahead=1, max_candidates=15)
        violations += _rescore_tree(tree, planted_kb, examples, labeled, alpha, beta, density)
        stack = [tree.root]
        while stack:
            n = stack.pop()
            if n.scored is not None:
                nodes += 1
                max_cands = max(max_cands, len(n.scored))
            if n.test is not None:
                stack += [n.left, n.right]
    ok = not violations and nodes > 0 and max_cands <= 15
    report(5, ok, f"instances=6 scored_nodes={nodes} max_candidates={max_cands} violations={len(violations)}")
    assert ok, violations[:5]


# --------------------------------------------------------------------------
# 6. classifier sanity
# --------------------------------------------------------------------------

def test_criterion_6_classifiers(report):
    rng = np.random.default_rng(606)
    X = rng.normal(size=(50, 4))
    y = (rng.random(50) < 0.5).astype(float)
    p = rng.normal(size=5)
    _, g = logistic_loss_grad(p, X, y, 0.01)
    worst = 0.0
    for i in range(5):
        e = np.zeros(5)
        e[i] = 1e-6
        num = (logistic_loss_grad(p + e, X, y, 0.01)[0] - logistic_loss_grad(p - e, X, y, 0.01)[0]) / 2e-6
        worst = max(worst, abs(num - g[i]) / max(1.0, abs(num)))

    def xor(n):
        Z = rng.uniform(-1, 1, size=(n, 2))
        return Dataset(Z, ((Z[:, 0] > 0) ^ (Z[:, 1] > 0)).astype(int), None)
    gb_acc = evaluate(train_gbt(xor(400), n_rounds=50, depth=2, shrinkage=0.3), xor(400), "per_row").accuracy

    auc_err = 0.0
    for _ in range(50):
        n = int(rng.integers(2, 101))
        yy = rng.integers(0, 2, n)
        if len(set(yy)) < 2:
            continue
        s = rng.integers(0, 10, n).astype(float)
        pos, neg = s[yy == 1], s[yy == 0]
        conc = sum((a > b) + 0.5 * (a == b) for a in pos for b in neg) / (len(pos) * len(neg))
        auc_err = max(auc_err, abs(auc_roc(yy, s) - conc))
    ok = worst <= 1e-5 and gb_acc >= 0.95 and auc_err <= 1e-12
    report(6, ok, f"grad_rel_err={worst:.2e} (<=1e-5) xor_acc={gb_acc:.4f} (>=0.95) auc_err={auc_err:.1e}")
    assert ok


# --------------------------------------------------------------------------
# 7. end-to-end planted rule
# --------------------------------------------------------------------------

def test_criterion_7_end_to_end(report, planted_kb):
    assert len(planted_kb.entities) == 80 and len(positive_tuples(planted_kb)) == 200
    cfg = PipelineConfig(method="ilp,relocc,rw", classifier="gb", r=1, k=10, w=5, seed=0, folds=5)
    t0 = time.perf_counter()
    res = cross_validate(planted_kb, cfg)
    elapsed = time.perf_counter() - t0
    m = {meth: res.mean(meth, "gb") for meth in ("ilp", "relocc", "rw")}
    ok = (all(m[k].auc_roc >= 0.95 and m[k].recall >= 0.9 for k in ("ilp", "relocc"))
          and m["rw"].auc_roc >= 0.8 and elapsed < 120)
    detail = " ".join(f"{k}:auc={v.auc_roc:.3f},recall={v.recall:.3f}" for k, v in m.items())
    report(7, ok, f"{detail} time={elapsed:.1f}s (<120s)")
    assert ok


# --------------------------------------------------------------------------
# 8. runtime sweep
# --------------------------------------------------------------------------

def test_criterion_8_sweep(report, planted_kb):
    cfg = PipelineConfig(method="relocc", r=1, k=10, w=5, seed=0)
    table = run_sweep(planted_kb, cfg, {"w": [1, 5, 10, 20], "k": [5, 10, 20]}, repeats=3)
    lines = ["param value   embed_seconds"] + [f"{r['param']:5s} {r['value']:5d}   {r['embed_seconds']:.4f}"
                                                for r in table]
    w_times = [r["embed_seconds"] for r in table if r["param"] == "w"]
    k_times = [r["embed_seconds"] for r in table if r["param"] == "k"]
    monotone = all(a <= b for a, b in zip(w_times, w_times[1:]))
    k_ratio = max(k_times) / min(k_times)
    ok = monotone
    report(8, ok, f"w monotone={monotone} k max/min={k_ratio:.2f} ({'flat' if k_ratio <= 2 else 'NOT flat'})\n"
           + "\n".join("    " + s for s in lines))
    assert ok


# --------------------------------------------------------------------------
# 9. determinism across runs and thread counts
# --------------------------------------------------------------------------

def _run_all(out: Path, facts: Path, threads: int):
    base = ["--facts", str(facts), "--out", str(out), "--seed", "7", "--threads", str(threads)]
    cmds = [["graph"], ["rules", "--method", "relocc"], ["embed"], ["train"], ["eval"],
            ["run", "--method", "ilp,relocc,rw", "--classifier", "lr,gb", "--folds", "3"]]
    for cmd in cmds:
        assert main(cmd + base) == 0, cmd


def test_criterion_9_determinism(report, tmp_path, capsys):
    facts = tmp_path / "planted.pl"
    facts.write_text(planted_ddi_text())
    _run_all(tmp_path / "a", facts, 1)
    _run_all(tmp_path / "b", facts, 4)
    capsys.readouterr()
    files_a = {p.name for p in (tmp_path / "a").iterdir() if not p.name.startswith("timings_")}
    files_b = {p.name for p in (tmp_path / "b").iterdir() if not p.name.startswith("timings_")}
    differing = sorted(n for n in files_a & files_b
                       if (tmp_path / "a" / n).read_bytes() != (tmp_path / "b" / n).read_bytes())
    ok = files_a == files_b and not differing and len(files_a) > 10
    report(9, ok, f"files={len(files_a)} differing={differing or 'none'} (threads 1 vs 4)")
    assert ok
