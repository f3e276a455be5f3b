"""Seeded Louvain-style modularity maximization.

Works on the undirected projection. Nodes are visited in a seed-shuffled
order; each node moves to the neighbouring community with the largest
strictly positive gain (first one found wins ties). Levels are aggregated
until a full level produces no move. Resolution is fixed at 1.
"""

from __future__ import annotations

import random

import numpy as np
from scipy import sparse

_EPS = 1e-12


def _one_level(adj: list[dict[int, float]], k: list[float], two_m: float, rng: random.Random) -> tuple[list[int], bool]:
    n = len(adj)
    comm = list(range(n))
    tot = list(k)
    order = list(range(n))
    rng.shuffle(order)
    moved_any = False
    improved = True
    while improved:
        improved = False
        for i in order:
            ki = k[i]
            if ki == 0:
                continue
            ci = comm[i]
            links: dict[int, float] = {}
            for j, w in adj[i].items():
                if j != i:
                    cj = comm[j]
                    links[cj] = links.get(cj, 0.0) + w
            tot[ci] -= ki
            scale = ki / two_m
            best = ci
            best_gain = links.get(ci, 0.0) - tot[ci] * scale
            for c, w in links.items():
                gain = w - tot[c] * scale
                if gain > best_gain + _EPS:
                    best, best_gain = c, gain
            tot[best] += ki
            if best != ci:
                comm[i] = best
                improved = True
                moved_any = True
    return comm, moved_any


def _relabel(comm: list[int]) -> tuple[list[int], int]:
    mapping: dict[int, int] = {}
    out = []
    for c in comm:
        if c not in mapping:
            mapping[c] = len(mapping)
        out.append(mapping[c])
    return out, len(mapping)


def _aggregate(adj: list[dict[int, float]], comm: list[int], size: int) -> list[dict[int, float]]:
    new: list[dict[int, float]] = [dict() for _ in range(size)]
    for i, nbrs in enumerate(adj):
        ci = comm[i]
        row = new[ci]
        for j, w in nbrs.items():
            cj = comm[j]
            row[cj] = row.get(cj, 0.0) + w
    return new


def louvain(adjacency: sparse.csr_matrix, seed: int | None = 0) -> np.ndarray:
    """Community label per node (0..K-1, numbered by smallest member)."""
    n = adjacency.shape[0]
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    a = adjacency.tocsr()
    adj: list[dict[int, float]] = []
    for i in range(n):
        lo, hi = a.indptr[i], a.indptr[i + 1]
        adj.append({int(j): float(w) for j, w in zip(a.indices[lo:hi], a.data[lo:hi])})
    k = [sum(row.values()) for row in adj]
    two_m = sum(k)
    labels = list(range(n))
    if two_m == 0:
        return np.arange(n, dtype=np.int64)

    rng = random.Random(seed)
    while True:
        comm, moved = _one_level(adj, k, two_m, rng)
        if not moved:
            break
        comm, size = _relabel(comm)
        labels = [comm[c] for c in labels]
        adj = _aggregate(adj, comm, size)
        k = [sum(row.values()) for row in adj]

    # number communities by their smallest member
    first: dict[int, int] = {}
    for node, c in enumerate(labels):
        first.setdefault(c, node)
    rank = {c: r for r, c in enumerate(sorted(first, key=first.__getitem__))}
    return np.array([rank[c] for c in labels], dtype=np.int64)
