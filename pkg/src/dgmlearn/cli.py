"""Command-line driver.

    dgmlearn graph  --facts kb.pl --out out/
    dgmlearn rules  --facts kb.pl --method relocc --out out/
    dgmlearn embed  --facts kb.pl --out out/          # uses out/examples.tsv, out/rules.pl
    dgmlearn train  --out out/ --classifier gb        # uses out/embedding.csv
    dgmlearn eval   --out out/                        # uses out/model.json, out/embedding.csv
    dgmlearn run    --facts kb.pl --method rw,ilp,relocc --classifier lr,gb --out out/
    dgmlearn sweep  --facts kb.pl --sweep w=1,5,10,20 --out out/

Every flag can also come from ``--config FILE`` (flat ``key = value`` lines);
flags win over the file.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

from . import gaifman
from .errors import DGMError
from .grounder import lge_embed, read_embedding_csv, rows_to_arrays, write_embedding_csv, write_embedding_jsonl
from .kb import load_kb
from .learn_eval import Dataset, dump_model, evaluate, load_model
from .pipeline import (FoldResult, PipelineConfig, cross_validate, format_rules_file, learn_rules,
                       load_config, make_examples, read_examples, read_rules, stage, train_classifier,
                       write_examples, write_metrics)
from .rules_relocc import dump_model as dump_distance_model

log = logging.getLogger("dgmlearn")


def _config_args(p: argparse.ArgumentParser):
    g = p.add_argument_group("pipeline")
    g.add_argument("--config", help="flat key = value config file")
    g.add_argument("--facts", dest="facts_path")
    g.add_argument("--target")
    g.add_argument("--method", help="rw, ilp, relocc (comma-separated for run/sweep)")
    g.add_argument("-r", type=int, dest="r")
    g.add_argument("-k", type=int, dest="k")
    g.add_argument("-w", type=int, dest="w")
    g.add_argument("--lambda", type=float, dest="lam")
    g.add_argument("--neg-ratio", type=float, dest="neg_ratio")
    g.add_argument("--classifier", help="lr, gb (comma-separated for run)")
    g.add_argument("--seed", type=int)
    g.add_argument("--out", dest="output_dir")
    g.add_argument("--folds", type=int)
    g.add_argument("--aggregate", choices=["per_tuple_mean", "per_row"])
    g.add_argument("--max-rules", type=int, dest="max_rules")
    g.add_argument("--max-clause-len", type=int, dest="max_clause_len")
    g.add_argument("--beam", type=int)
    g.add_argument("--min-score", type=int, dest="min_score")
    g.add_argument("--n-walks", type=int, dest="n_walks")
    g.add_argument("--walk-len", type=int, dest="walk_len")
    g.add_argument("--n-trees", type=int, dest="n_trees")
    g.add_argument("--max-depth", type=int, dest="max_depth")
    g.add_argument("--threads", type=int)


_CONFIG_KEYS = set(PipelineConfig.__dataclass_fields__)


def _config(ns) -> PipelineConfig:
    overrides = {k: v for k, v in vars(ns).items() if k in _CONFIG_KEYS}
    return load_config(ns.config, overrides)


def _kb(cfg: PipelineConfig):
    if not cfg.facts_path:
        raise DGMError("no facts file given (--facts)")
    path = Path(cfg.facts_path)
    if not path.is_file():
        raise DGMError(f"facts file not found: {path}")
    return load_kb(path, cfg.target)


def _single(value: str, what: str) -> str:
    items = [v for v in value.split(",") if v]
    if len(items) != 1:
        raise DGMError(f"this command takes exactly one {what}, got {value!r}")
    return items[0]


def cmd_graph(cfg: PipelineConfig, ns) -> int:
    kb = _kb(cfg)
    g = gaifman.build_gaifman_graph(kb)
    stats = gaifman.graph_stats(g)
    with stage("graph", cfg, {"facts": cfg.facts_path}) as outs:
        gaifman.write_edge_list(g, outs.path("graph.tsv"))
        outs.path("graph_stats.json").write_text(json.dumps(stats, indent=1, sort_keys=True) + "\n")
    print(f"nodes {stats['nodes']}  edges {stats['edges']}")
    print("degree histogram: " + " ".join(f"{d}:{c}" for d, c in stats["degree_histogram"].items()))
    return 0


def cmd_rules(cfg: PipelineConfig, ns) -> int:
    kb = _kb(cfg)
    method = _single(cfg.method, "method")
    with stage("rules", cfg, {"facts": cfg.facts_path}) as outs:
        pos, neg = make_examples(kb, cfg)
        write_examples(outs.path("examples.tsv"), pos, neg)
        clauses, model = learn_rules(kb, method, pos, neg, cfg)
        outs.path("rules.pl").write_text(format_rules_file(clauses, method), encoding="utf-8")
        if model is not None:
            outs.path("relocc_model.txt").write_text(dump_distance_model(model), encoding="utf-8")
    print(f"{len(clauses)} rules ({method}), {len(pos)} positive / {len(neg)} negative examples")
    return 0


def cmd_embed(cfg: PipelineConfig, ns) -> int:
    kb = _kb(cfg)
    out = Path(cfg.output_dir)
    examples = ns.examples or out / "examples.tsv"
    rules = ns.rules or out / "rules.pl"
    with stage("embed", cfg, {"facts": cfg.facts_path, "examples": examples, "rules": rules}) as outs:
        pos, neg = read_examples(examples)
        clauses = read_rules(rules, kb)
        if not clauses:
            raise DGMError(f"{rules}: no clauses to embed")
        rows = lge_embed(kb, clauses, pos, neg, cfg.r, cfg.k, cfg.w, cfg.seed, threads=cfg.threads)
        write_embedding_csv(rows, outs.path("embedding.csv"))
        write_embedding_jsonl(rows, outs.path("embedding.jsonl"))
    print(f"{len(rows)} rows x {len(clauses)} features")
    return 0


def _dataset(path) -> Dataset:
    X, y, groups = rows_to_arrays(read_embedding_csv(path))
    return Dataset(X, y, groups)


def cmd_train(cfg: PipelineConfig, ns) -> int:
    out = Path(cfg.output_dir)
    emb = ns.embedding or out / "embedding.csv"
    clf = _single(cfg.classifier, "classifier")
    with stage("train", cfg, {"embedding": emb}) as outs:
        model = train_classifier(_dataset(emb), clf, cfg)
        outs.path("model.json").write_text(dump_model(model), encoding="utf-8")
    print(f"trained {clf} model")
    return 0


def cmd_eval(cfg: PipelineConfig, ns) -> int:
    out = Path(cfg.output_dir)
    emb = ns.embedding or out / "embedding.csv"
    model_path = ns.model or out / "model.json"
    with stage("eval", cfg, {"embedding": emb, "model": model_path}) as outs:
        model = load_model(Path(model_path).read_text(encoding="utf-8"))
        m = evaluate(model, _dataset(emb), cfg.aggregate)
        row = FoldResult("all", cfg.method, model.kind, m)
        write_metrics([row], outs.path("metrics.csv"), outs.path("metrics.json"))
    print(_fmt_metrics(m))
    return 0


def _fmt_metrics(m) -> str:
    return "  ".join(f"{k}={v:.4f}" for k, v in m.as_dict().items())


def cmd_run(cfg: PipelineConfig, ns) -> int:
    kb = _kb(cfg)
    t0 = time.perf_counter()
    with stage("run", cfg, {"facts": cfg.facts_path}) as outs:
        g = gaifman.build_gaifman_graph(kb)
        gaifman.write_edge_list(g, outs.path("graph.tsv"))
        pos, neg = make_examples(kb, cfg)
        write_examples(outs.path("examples.tsv"), pos, neg)
        res = cross_validate(kb, cfg)
        for (method, fold), clauses in sorted(res.rules.items()):
            outs.path(f"rules_{method}_fold{fold}.pl").write_text(
                format_rules_file(clauses, method), encoding="utf-8")
        rows = res.with_means()
        write_metrics(rows, outs.path("metrics.csv"), outs.path("metrics.json"))
    Path(cfg.output_dir, "timings_cv.json").write_text(
        json.dumps({"total_s": time.perf_counter() - t0, **res.timings}, indent=1, sort_keys=True) + "\n")
    for r in rows:
        if r.fold == "mean":
            print(f"{r.method:7s} {r.classifier:3s} {_fmt_metrics(r.metrics)}")
    return 0


def run_sweep(kb, cfg: PipelineConfig, grid: dict[str, list[int]], repeats: int = 3,
              with_metrics: bool = False) -> list[dict]:
    """Embedding wall time (best of ``repeats``) for one parameter varied at a time."""
    method = _single(cfg.method, "method")
    pos, neg = make_examples(kb, cfg)
    clauses, _ = learn_rules(kb, method, pos, neg, cfg)
    if not clauses:
        raise DGMError("no rules learned; nothing to sweep")
    graph = gaifman.build_gaifman_graph(kb)
    # warm-up so kernel compilation is not charged to the first setting
    lge_embed(kb, clauses, pos[:2], neg[:2], cfg.r, cfg.k, cfg.w, cfg.seed, graph)
    table = []
    for param, values in grid.items():
        for v in values:
            c = cfg.replace(**{param: v})
            best = float("inf")
            for _ in range(repeats):
                t = time.perf_counter()
                lge_embed(kb, clauses, pos, neg, c.r, c.k, c.w, c.seed, graph, c.threads)
                best = min(best, time.perf_counter() - t)
            row = {"param": param, "value": v, "r": c.r, "k": c.k, "w": c.w, "method": method,
                   "n_rules": len(clauses), "embed_seconds": round(best, 6)}
            if with_metrics:
                res = cross_validate(kb, c)
                m = res.mean(method, c.classifiers[0])
                row["auc_roc"] = round(m.auc_roc, 6)
                row["auc_pr"] = round(m.auc_pr, 6)
            table.append(row)
    return table


def _parse_grid(specs) -> dict[str, list[int]]:
    grid = {}
    for spec in specs or []:
        if "=" not in spec:
            raise DGMError(f"bad --sweep {spec!r}; expected name=v1,v2,...")
        name, vals = spec.split("=", 1)
        if name not in ("r", "k", "w"):
            raise DGMError(f"can only sweep r, k or w, not {name!r}")
        grid[name] = [int(v) for v in vals.split(",") if v]
    return grid or {"r": [1, 2, 3], "k": [5, 10, 20], "w": [1, 5, 10, 20]}


def cmd_sweep(cfg: PipelineConfig, ns) -> int:
    kb = _kb(cfg)
    grid = _parse_grid(ns.sweep)
    with stage("sweep", cfg, {"facts": cfg.facts_path}) as outs:
        table = run_sweep(kb, cfg, grid, ns.repeats, ns.metrics)
        cols = list(table[0])
        lines = [",".join(cols)] + [",".join(str(r.get(c, "")) for c in cols) for r in table]
        # timings vary run to run, so the table is not part of the hashed outputs
        Path(cfg.output_dir, "sweep.csv").write_text("\n".join(lines) + "\n")
    for line in lines:
        print(line)
    return 0


COMMANDS = {"graph": cmd_graph, "rules": cmd_rules, "embed": cmd_embed, "train": cmd_train,
            "eval": cmd_eval, "run": cmd_run, "sweep": cmd_sweep}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dgmlearn", description=__doc__.split("\n")[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        _config_args(p)
        if name == "embed":
            p.add_argument("--examples")
            p.add_argument("--rules")
        if name in ("train", "eval"):
            p.add_argument("--embedding")
        if name == "eval":
            p.add_argument("--model")
        if name == "sweep":
            p.add_argument("--sweep", action="append", help="name=v1,v2,... (repeatable)")
            p.add_argument("--repeats", type=int, default=3)
            p.add_argument("--metrics", action="store_true", help="also run CV per setting")
    return parser


def main(argv=None) -> int:
    ns = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(ns.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _config(ns)
        return COMMANDS[ns.command](cfg, ns)
    except DGMError as exc:
        print(f"dgmlearn {ns.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
