"""End-to-end pipeline: examples -> rules -> embeddings -> classifier -> metrics."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
import os
import time
import warnings
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import rules_ilp, rules_relocc, rules_rw
from .clauses import Clause, format_clauses, parse_clauses
from .errors import ConfigError, DGMError, DGMWarning
from .gaifman import build_gaifman_graph
from .grounder import lge_embed, rows_to_arrays
from .kb import KnowledgeBase, LabeledTuple, generate_negatives, positive_tuples
from .learn_eval import (Dataset, Metrics, evaluate, mean_metrics, train, tuple_folds)

log = logging.getLogger(__name__)

METHODS = ("rw", "ilp", "relocc")
CLASSIFIERS = ("lr", "gb")


@dataclass
class PipelineConfig:
    facts_path: str = ""
    target: str | None = None
    method: str = "relocc"
    r: int = 1
    k: int = 10
    w: int = 5
    lam: float = 1.0
    neg_ratio: float = 1.0
    classifier: str = "gb"
    seed: int = 0
    output_dir: str = "out"
    folds: int = 5
    aggregate: str = "per_tuple_mean"
    # rule learners
    max_rules: int = 10
    max_clause_len: int = 3
    beam: int = 10
    min_score: int = 1
    n_walks: int = 50
    walk_len: int = 4
    n_trees: int = 5
    max_depth: int = 3
    lookahead: int = 2
    # classifiers
    lr_rate: float = 0.1
    lr_epochs: int = 500
    l2: float = 1e-4
    gb_rounds: int = 100
    gb_depth: int = 3
    shrinkage: float = 0.1
    threads: int = 1

    def validate(self) -> PipelineConfig:
        if self.r < 1 or self.k < 1 or self.w < 1:
            raise ConfigError("r, k and w must all be >= 1")
        if self.lam <= 0:
            raise ConfigError("lambda must be > 0")
        for m in self.methods:
            if m not in METHODS:
                raise ConfigError(f"unknown method {m!r}; choose from {', '.join(METHODS)}")
        for c in self.classifiers:
            if c not in CLASSIFIERS:
                raise ConfigError(f"unknown classifier {c!r}; choose from {', '.join(CLASSIFIERS)}")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        return self

    @property
    def methods(self) -> list[str]:
        return [m.strip() for m in self.method.split(",") if m.strip()]

    @property
    def classifiers(self) -> list[str]:
        return [c.strip() for c in self.classifier.split(",") if c.strip()]

    def replace(self, **kw) -> PipelineConfig:
        return dataclasses.replace(self, **kw)

    def reproducible_dict(self) -> dict:
        """Config fields that influence artifacts (not where they go, nor thread count)."""
        d = dataclasses.asdict(self)
        d.pop("output_dir")
        d.pop("threads")
        return d


_ALIASES = {"lambda": "lam", "facts": "facts_path", "neg-ratio": "neg_ratio"}


def _coerce(name: str, value: str):
    fld = PipelineConfig.__dataclass_fields__[name]
    kind = fld.type if isinstance(fld.type, str) else fld.type.__name__
    if kind.startswith("int"):
        return int(value)
    if kind.startswith("float"):
        return float(value)
    if name == "target" and value in ("", "none", "None"):
        return None
    return value


def parse_config_text(text: str) -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = _ALIASES.get(key, key.replace("-", "_"))
        if key not in PipelineConfig.__dataclass_fields__:
            raise ConfigError(f"config line {lineno}: unknown key {key!r}")
        try:
            out[key] = _coerce(key, value)
        except ValueError:
            raise ConfigError(f"config line {lineno}: bad value {value!r} for {key}") from None
    return out


def load_config(path: str | None, overrides: dict | None = None) -> PipelineConfig:
    values = {}
    if path:
        try:
            values.update(parse_config_text(Path(path).read_text(encoding="utf-8")))
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return PipelineConfig(**values).validate()


# --------------------------------------------------------------------------
# stages as library calls
# --------------------------------------------------------------------------

def make_examples(kb: KnowledgeBase, cfg: PipelineConfig):
    pos = positive_tuples(kb)
    neg = generate_negatives(kb, cfg.neg_ratio, cfg.seed)
    return pos, neg


def learn_rules(kb: KnowledgeBase, method: str, pos: Sequence[LabeledTuple],
                neg: Sequence[LabeledTuple], cfg: PipelineConfig):
    """Returns ``(clauses, extra)``; ``extra`` is the distance model for relOCC, else None."""
    if method == "rw":
        return rules_rw.learn_walk_clauses(kb, cfg.walk_len, cfg.n_walks, cfg.seed), None
    if method == "ilp":
        return rules_ilp.learn_clauses(kb, pos, neg, cfg.max_rules, cfg.max_clause_len,
                                       cfg.min_score, cfg.beam), None
    if method == "relocc":
        model, clauses = rules_relocc.learn_distance_model(
            kb, pos, neg, cfg.n_trees, cfg.lam, cfg.max_depth, cfg.lookahead)
        return clauses, model
    raise ConfigError(f"unknown method {method!r}")


def _fallback_clauses(kb: KnowledgeBase, clauses: list[Clause]) -> list[Clause]:
    if clauses:
        return clauses
    warnings.warn("no rules learned; using a single constant feature", DGMWarning, stacklevel=2)
    return [rules_ilp.head_clause(kb, "none")]


def embed_dataset(kb, clauses, pos, neg, cfg: PipelineConfig, graph=None) -> Dataset:
    rows = lge_embed(kb, clauses, pos, neg, cfg.r, cfg.k, cfg.w, cfg.seed, graph, cfg.threads)
    X, y, groups = rows_to_arrays(rows)
    return Dataset(X, y, groups)


def train_classifier(ds: Dataset, classifier: str, cfg: PipelineConfig):
    if classifier == "lr":
        return train(ds, "lr", cfg.seed, lr=cfg.lr_rate, epochs=cfg.lr_epochs, l2=cfg.l2)
    return train(ds, "gb", cfg.seed, n_rounds=cfg.gb_rounds, depth=cfg.gb_depth,
                 shrinkage=cfg.shrinkage)


@dataclass
class FoldResult:
    fold: int | str
    method: str
    classifier: str
    metrics: Metrics
    n_rules: int = 0


@dataclass
class CVResult:
    rows: list[FoldResult] = field(default_factory=list)
    rules: dict = field(default_factory=dict)  # (method, fold) -> clauses
    timings: dict = field(default_factory=dict)

    def mean(self, method: str, classifier: str) -> Metrics:
        return mean_metrics([r.metrics for r in self.rows
                             if r.method == method and r.classifier == classifier and r.fold != "mean"])

    def with_means(self) -> list[FoldResult]:
        out = list(self.rows)
        seen = []
        for r in self.rows:
            if (r.method, r.classifier) not in seen:
                seen.append((r.method, r.classifier))
        for m, c in seen:
            n = float(np.mean([r.n_rules for r in self.rows if r.method == m and r.classifier == c]))
            out.append(FoldResult("mean", m, c, self.mean(m, c), n))
        return out


def cross_validate(kb: KnowledgeBase, cfg: PipelineConfig, folds: int | None = None,
                   seed: int | None = None) -> CVResult:
    """Tuple-level stratified k-fold CV; rules are learned on each training split only."""
    folds = folds or cfg.folds
    seed = cfg.seed if seed is None else seed
    cfg = cfg.replace(seed=seed)
    pos, neg = make_examples(kb, cfg)
    pf, nf = tuple_folds(pos, neg, folds, seed)
    graph = build_gaifman_graph(kb)
    res = CVResult()
    for method in cfg.methods:
        t_rules = t_embed = 0.0
        for f in range(folds):
            tr_pos = [p for p, k in zip(pos, pf) if k != f]
            tr_neg = [n for n, k in zip(neg, nf) if k != f]
            te_pos = [p for p, k in zip(pos, pf) if k == f]
            te_neg = [n for n, k in zip(neg, nf) if k == f]
            t0 = time.perf_counter()
            clauses, _ = learn_rules(kb, method, tr_pos, tr_neg, cfg)
            t1 = time.perf_counter()
            res.rules[(method, f)] = clauses
            feats = _fallback_clauses(kb, clauses)
            train_ds = embed_dataset(kb, feats, tr_pos, tr_neg, cfg, graph)
            test_ds = embed_dataset(kb, feats, te_pos, te_neg, cfg, graph)
            t2 = time.perf_counter()
            t_rules += t1 - t0
            t_embed += t2 - t1
            for clf in cfg.classifiers:
                model = train_classifier(train_ds, clf, cfg)
                m = evaluate(model, test_ds, cfg.aggregate)
                res.rows.append(FoldResult(f, method, clf, m, len(clauses)))
                log.info("fold %d %s/%s auc_roc=%.3f", f, method, clf, m.auc_roc)
        res.timings[method] = {"rules_s": t_rules, "embed_s": t_embed}
    return res


# --------------------------------------------------------------------------
# artifact I/O
# --------------------------------------------------------------------------

def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def write_examples(path, pos, neg) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("tuple\tlabel\n")
        for t in list(pos) + list(neg):
            fh.write(f"{'|'.join(t.args)}\t{t.label}\n")


def read_examples(path):
    pos, neg = [], []
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        if header != "tuple\tlabel":
            raise DGMError(f"{path}: not an examples file")
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            tup, label = line.split("\t")
            lt = LabeledTuple(tuple(tup.split("|")), int(label))
            (pos if lt.label == 1 else neg).append(lt)
    return pos, neg


def read_rules(path, kb: KnowledgeBase) -> list[Clause]:
    return parse_clauses(Path(path).read_text(encoding="utf-8"), kb.schemas)


def metrics_table(rows: Sequence[FoldResult]) -> list[dict]:
    out = []
    for r in rows:
        d = {"fold": r.fold, "method": r.method, "classifier": r.classifier, "n_rules": r.n_rules}
        d.update({k: _round(v) for k, v in r.metrics.as_dict().items()})
        out.append(d)
    return out


def _round(v: float):
    return None if v is None or (isinstance(v, float) and np.isnan(v)) else round(float(v), 12)


def write_metrics(rows: Sequence[FoldResult], csv_path, json_path) -> None:
    table = metrics_table(rows)
    cols = ["fold", "method", "classifier", "n_rules", "accuracy", "precision", "recall", "f1",
            "auc_roc", "auc_pr"]
    with open(csv_path, "w", encoding="utf-8") as fh:
        fh.write(",".join(cols) + "\n")
        for d in table:
            fh.write(",".join("nan" if d[c] is None else str(d[c]) for c in cols) + "\n")
    with open(json_path, "w", encoding="utf-8") as fh:
        json.dump(table, fh, indent=1, sort_keys=True)
        fh.write("\n")


class StageError(DGMError):
    def __init__(self, stage: str, cause: BaseException):
        self.stage = stage
        super().__init__(f"[{stage}] {cause}")


class StageOutputs:
    """Collects a stage's files under temporary names; commits them on success."""

    def __init__(self, out_dir: Path):
        self.out_dir = out_dir
        self.files: dict[str, Path] = {}

    def path(self, name: str) -> Path:
        tmp = self.out_dir / f".{name}.partial"
        self.files[name] = tmp
        return tmp

    def commit(self) -> dict[str, str]:
        hashes = {}
        for name, tmp in self.files.items():
            final = self.out_dir / name
            os.replace(tmp, final)
            hashes[name] = sha256_file(final)
        return hashes

    def discard(self):
        for tmp in self.files.values():
            if tmp.exists():
                tmp.unlink()


@contextmanager
def stage(name: str, cfg: PipelineConfig, inputs: dict[str, str] | None = None):
    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    outs = StageOutputs(out_dir)
    t0 = time.perf_counter()
    try:
        yield outs
    except DGMError as exc:
        outs.discard()
        raise exc if isinstance(exc, StageError) else StageError(name, exc) from exc
    except (OSError, ValueError, KeyError) as exc:
        outs.discard()
        raise StageError(name, exc) from exc
    except BaseException:
        outs.discard()
        raise
    hashes = outs.commit()
    manifest = {
        "stage": name,
        "config": cfg.reproducible_dict(),
        "seed": cfg.seed,
        "inputs": {k: sha256_file(v) for k, v in sorted((inputs or {}).items())},
        "outputs": dict(sorted(hashes.items())),
    }
    (out_dir / f"manifest_{name}.json").write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")
    (out_dir / f"timings_{name}.json").write_text(
        json.dumps({"stage": name, "wall_s": time.perf_counter() - t0}, indent=1) + "\n")


def format_rules_file(clauses: Sequence[Clause], method: str) -> str:
    return f"% method: {method}\n" + format_clauses(clauses)
