"""Gaifman (primal) graph, hop distances, r-neighborhoods and neighborhood sampling."""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import kernels
from .errors import DGMWarning
from .kb import KnowledgeBase


class GaifmanGraph:
    """Undirected entity co-occurrence graph stored as CSR arrays.

    Node ids follow the KB's sorted entity order.
    """

    def __init__(self, names: Sequence[str], edges: set[tuple[int, int]]):
        self.names = tuple(names)
        self.ids = {s: i for i, s in enumerate(self.names)}
        n = len(self.names)
        nbrs: list[list[int]] = [[] for _ in range(n)]
        for a, b in edges:
            nbrs[a].append(b)
            nbrs[b].append(a)
        for lst in nbrs:
            lst.sort()
        self.indptr = np.zeros(n + 1, dtype=np.int64)
        self.indptr[1:] = np.cumsum([len(x) for x in nbrs])
        self.indices = np.fromiter(itertools.chain.from_iterable(nbrs), dtype=np.int64,
                                   count=int(self.indptr[-1]))
        self.n_edges = len(edges)
        self._bfs_cache: dict[tuple[int, int], np.ndarray] = {}

    @property
    def nodes(self) -> tuple[str, ...]:
        return self.names

    def __len__(self):
        return len(self.names)

    def node_id(self, symbol: str) -> int:
        try:
            return self.ids[symbol]
        except KeyError:
            raise KeyError(f"unknown entity {symbol!r}") from None

    def neighbor_ids(self, i: int) -> np.ndarray:
        return self.indices[self.indptr[i]:self.indptr[i + 1]]

    def adjacency(self, symbol: str) -> list[str]:
        return [self.names[j] for j in self.neighbor_ids(self.node_id(symbol))]

    def degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    def edges(self) -> list[tuple[str, str]]:
        out = []
        for i in range(len(self.names)):
            for j in self.neighbor_ids(i):
                if i < j:
                    out.append((self.names[i], self.names[j]))
        return sorted(out)

    def depths_from(self, i: int, max_depth: int = -1) -> np.ndarray:
        key = (i, max_depth)
        dist = self._bfs_cache.get(key)
        if dist is None:
            dist = kernels.bfs_depths(self.indptr, self.indices, i, max_depth)
            if len(self._bfs_cache) > 4096:
                self._bfs_cache.clear()
            self._bfs_cache[key] = dist
        return dist

    def neighborhood_ids(self, i: int, r: int) -> np.ndarray:
        dist = self.depths_from(i, r)
        return np.flatnonzero(dist > 0)


def build_gaifman_graph(kb: KnowledgeBase, exclude_target: bool = True) -> GaifmanGraph:
    ids = kb.entity_ids
    edges: set[tuple[int, int]] = set()
    for atom in kb.facts:
        if exclude_target and atom.predicate == kb.target:
            continue
        members = sorted({ids[a] for a in atom.args})
        edges.update(itertools.combinations(members, 2))
    return GaifmanGraph(kb.entities, edges)


def hop_distance(g: GaifmanGraph, a: str, b: str) -> int | None:
    """Shortest-path length in hops, or ``None`` if ``b`` is unreachable."""
    ia, ib = g.node_id(a), g.node_id(b)
    d = int(g.depths_from(ia)[ib])
    return None if d < 0 else d


def r_neighborhood(g: GaifmanGraph, a: str, r: int) -> set[str]:
    """Nodes within ``r`` hops of ``a``, excluding ``a`` itself."""
    if r < 1:
        raise ValueError("r must be >= 1")
    return {g.names[j] for j in g.neighborhood_ids(g.node_id(a), r)}


@dataclass(frozen=True)
class NeighborhoodSample:
    tuple: tuple[str, ...]
    member_ids: np.ndarray
    r: int
    k: int
    index: int
    names: tuple[str, ...] = ()

    @property
    def members(self) -> frozenset[str]:
        return frozenset(self.names[j] for j in self.member_ids)

    def mask(self, n_entities: int) -> np.ndarray:
        m = np.zeros(n_entities, dtype=np.bool_)
        m[self.member_ids] = True
        return m


def _draw_seed(seed: int, index: int, tuple_ids: Sequence[int]) -> np.random.Generator:
    # draw i uses seed xor i, further keyed by the tuple so tuples do not share streams
    return np.random.default_rng([seed ^ index, *[t + 1 for t in tuple_ids]])


def generate_neighborhoods(g: GaifmanGraph, tup: Sequence[str], r: int, k: int, w: int,
                           seed: int) -> list[NeighborhoodSample]:
    """Draw ``w`` neighborhood samples around a query tuple.

    For every tuple entity the r-neighborhood is subsampled to at most ``k``
    nodes (uniformly, without replacement); the sample is the union.
    """
    if r < 1 or k < 1 or w < 1:
        raise ValueError("r, k and w must all be >= 1")
    hoods = []
    tuple_ids = []
    for e in tup:
        i = g.ids.get(e)
        if i is None:
            warnings.warn(f"entity {e!r} not in the Gaifman graph; contributes no neighbors",
                          DGMWarning, stacklevel=2)
            hoods.append(np.empty(0, dtype=np.int64))
            tuple_ids.append(-1)
        else:
            hoods.append(g.neighborhood_ids(i, r))
            tuple_ids.append(i)

    samples = []
    for index in range(w):
        rng = _draw_seed(seed, index, tuple_ids)
        parts = []
        for nb in hoods:
            if nb.size > k:
                parts.append(nb[rng.choice(nb.size, size=k, replace=False)])
            else:
                parts.append(nb)
        members = np.unique(np.concatenate(parts)) if parts else np.empty(0, dtype=np.int64)
        samples.append(NeighborhoodSample(tuple(tup), members, r, k, index, g.names))
    return samples


def write_edge_list(g: GaifmanGraph, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for a, b in g.edges():
            fh.write(f"{a}\t{b}\n")


def graph_stats(g: GaifmanGraph) -> dict:
    deg = g.degrees()
    hist = np.bincount(deg) if deg.size else np.zeros(0, dtype=np.int64)
    return {
        "nodes": len(g),
        "edges": g.n_edges,
        "degree_histogram": {int(d): int(c) for d, c in enumerate(hist) if c},
    }
