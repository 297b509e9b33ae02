import itertools
from pathlib import Path

import numpy as np
import pytest

from dgmlearn.clauses import Var
from dgmlearn.kb import GroundAtom, KnowledgeBase, PredicateSchema, load_kb, parse_facts
from dgmlearn.synthetic import planted_ddi_kb

DATA = Path(__file__).parent / "data"

# entity names in the statin fragment
D1, D2, D3 = "Pravastatin", "Simvastatin", "Acetaminophen"
T1, T2, E1 = "BileSaltExportPump", "MultidrugResistProtein1", "CytochromeP4502C9"


@pytest.fixture(scope="session")
def statin_path():
    return DATA / "statins.pl"


@pytest.fixture(scope="session")
def statin_kb(statin_path):
    return load_kb(statin_path)


@pytest.fixture(scope="session")
def planted_kb():
    return planted_ddi_kb()


def random_kb(rng, n_entities=20, n_preds=3, n_facts=40, arities=(1, 2, 2, 3)):
    """Untyped random KB with binary target T; predicates P0..Pn-1."""
    ents = [f"e{i}" for i in range(n_entities)]
    schemas = {}
    for p in range(n_preds):
        ar = int(rng.choice(arities))
        schemas[f"P{p}"] = PredicateSchema(f"P{p}", ("untyped",) * ar)
    schemas["T"] = PredicateSchema("T", ("untyped", "untyped"))
    facts = set()
    names = sorted(schemas)
    for _ in range(n_facts):
        name = names[int(rng.integers(len(names)))]
        ar = schemas[name].arity
        facts.add(GroundAtom(name, tuple(ents[int(i)] for i in rng.integers(n_entities, size=ar))))
    types = {}
    for a in facts:
        for e in a.args:
            types[e] = "untyped"
    return KnowledgeBase(schemas, frozenset(facts), types, "T")


def brute_force_groundings(body, kb, fixed=None):
    """All substitutions of the free variables of ``body`` (by exhaustive product over entities)."""
    fixed = fixed or {}
    fvars = []
    for lit in body:
        for a in lit.args:
            if isinstance(a, Var) and a not in fvars and a not in fixed:
                fvars.append(a)
    facts = {(a.predicate, a.args) for a in kb.facts}
    out = []
    for combo in itertools.product(kb.entities, repeat=len(fvars)):
        theta = dict(fixed)
        theta.update(zip(fvars, combo))
        ok = True
        for lit in body:
            args = tuple(theta[a] if isinstance(a, Var) else a for a in lit.args)
            if lit.inverse:
                args = args[::-1]
            if (lit.predicate, args) not in facts:
                ok = False
                break
        if ok:
            out.append({v: theta[v] for v in fvars})
    return out


def brute_force_satisfiable(body, kb, fixed):
    return bool(brute_force_groundings(body, kb, fixed))


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    if mod is None or not getattr(mod, "RESULTS", None):
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[k])
