"""Synthetic drug-drug-interaction KB with one planted interaction rule.

``Interacts(x, y)`` holds exactly when some enzyme has ``x`` as a substrate
and ``y`` as an inhibitor.  Transporter facts are noise.
"""

from __future__ import annotations

import numpy as np

from .kb import KnowledgeBase, parse_facts

SCHEMA = """\
@schema EnzymeSubstr(drug, enzyme)
@schema EnzymeInhib(drug, enzyme)
@schema TransportSubstr(drug, transporter)
@schema TransportInhib(drug, transporter)
@schema Interacts(drug, drug)
@target Interacts
"""


def _planted_pairs(substr, inhib):
    pairs = set()
    for e in set(substr) | set(inhib):
        for x in substr.get(e, ()):
            for y in inhib.get(e, ()):
                if x != y:
                    pairs.add((x, y))
    return pairs


def planted_ddi_text(n_drugs: int = 50, n_enzymes: int = 15, n_transporters: int = 15,
                     n_pos: int = 200, noise_facts: int = 120, seed: int = 0) -> str:
    rng = np.random.default_rng(seed)
    drugs = [f"Drug{i:03d}" for i in range(n_drugs)]
    enzymes = [f"Enzyme{i:02d}" for i in range(n_enzymes)]
    transporters = [f"Transporter{i:02d}" for i in range(n_transporters)]

    substr: dict[str, set] = {}
    inhib: dict[str, set] = {}
    facts = set()
    stall = 0
    while stall < 10_000:
        pairs = _planted_pairs(substr, inhib)
        if len(pairs) == n_pos:
            break
        d = drugs[rng.integers(n_drugs)]
        e = enzymes[rng.integers(n_enzymes)]
        table, pred = (substr, "EnzymeSubstr") if rng.random() < 0.5 else (inhib, "EnzymeInhib")
        if d in table.get(e, ()):
            stall += 1
            continue
        table.setdefault(e, set()).add(d)
        if len(_planted_pairs(substr, inhib)) > n_pos:
            table[e].discard(d)
            stall += 1
            continue
        facts.add(f"{pred}({d}, {e}).")
    else:
        raise RuntimeError("could not plant the requested number of positives")

    while sum(f.startswith("Transport") for f in facts) < noise_facts:
        d = drugs[rng.integers(n_drugs)]
        t = transporters[rng.integers(n_transporters)]
        pred = "TransportSubstr" if rng.random() < 0.5 else "TransportInhib"
        facts.add(f"{pred}({d}, {t}).")

    # every entity appears in some fact; an enzyme with no inhibitor adds no pairs
    used = {tok for f in facts for tok in f[f.index("(") + 1:-2].split(", ")}
    for e in enzymes:
        if e not in used:
            facts.add(f"EnzymeSubstr({drugs[rng.integers(n_drugs)]}, {e}).")
    for t in transporters:
        if t not in used:
            facts.add(f"TransportInhib({drugs[rng.integers(n_drugs)]}, {t}).")
    for d in drugs:
        if d not in used:
            facts.add(f"TransportSubstr({d}, {transporters[rng.integers(n_transporters)]}).")

    for x, y in _planted_pairs(substr, inhib):
        facts.add(f"Interacts({x}, {y}).")
    return SCHEMA + "\n".join(sorted(facts)) + "\n"


def planted_ddi_kb(**kwargs) -> KnowledgeBase:
    return parse_facts(planted_ddi_text(**kwargs))
