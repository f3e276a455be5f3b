"""Topological metrics of a supply network.

Everything except ``density`` and ``edge_count`` is measured on the
undirected, unweighted projection (reciprocal supply pairs collapse into one
undirected edge). Degenerate quantities come back as ``None`` rather than 0
so that averaging code can skip them.
"""

from __future__ import annotations

import dataclasses
import math
from collections import deque
from dataclasses import dataclass
from typing import Mapping

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

from scpolicy.community import louvain
from scpolicy.errors import MetricError
from scpolicy.network import SupplyNetwork, UndirectedView

_BFS_CHUNK = 256


# -- path mode ---------------------------------------------------------------

@dataclass(frozen=True)
class PathMode:
    """``exact`` (all sources) or ``sampled`` with ``k`` random sources."""

    k: int | None = None

    @property
    def exact(self) -> bool:
        return self.k is None

    @classmethod
    def parse(cls, text: str | PathMode) -> PathMode:
        if isinstance(text, PathMode):
            return text
        text = text.strip().lower()
        if text == "exact":
            return cls(None)
        if text.startswith("sampled:"):
            try:
                k = int(text.split(":", 1)[1])
            except ValueError:
                raise MetricError(f"bad path mode {text!r}") from None
            if k < 1:
                raise MetricError("sampled path mode needs k >= 1")
            return cls(k)
        raise MetricError(f"bad path mode {text!r}; use 'exact' or 'sampled:K'")

    def __str__(self) -> str:
        return "exact" if self.exact else f"sampled:{self.k}"


# -- helpers -----------------------------------------------------------------

def _largest_component(view: UndirectedView) -> np.ndarray:
    """Node indices of the largest component (ties: the one holding the lowest index)."""
    if view.n == 0:
        return np.zeros(0, dtype=np.int64)
    _, labels = csgraph.connected_components(view.adjacency, directed=False)
    sizes = np.bincount(labels)
    best = int(np.argmax(sizes))  # argmax returns first maximum; labels follow node order
    return np.flatnonzero(labels == best)


def _distances(adj: sparse.csr_matrix, sources: np.ndarray):
    for lo in range(0, len(sources), _BFS_CHUNK):
        chunk = sources[lo:lo + _BFS_CHUNK]
        yield chunk, csgraph.shortest_path(adj, method="D", directed=False, unweighted=True, indices=chunk)


# -- scalar metrics ------------------------------------------------------------

def density(net: SupplyNetwork) -> float:
    n = net.firm_count
    if n < 2:
        raise MetricError("degenerate network")
    return net.edge_count / (n * (n - 1))


def degree_assortativity(net: SupplyNetwork) -> float | None:
    view = net.undirected
    if view.edge_count == 0:
        return None
    coo = view.adjacency.tocoo()
    deg = view.degrees.astype(np.float64)
    x = deg[coo.row]
    y = deg[coo.col]
    xc = x - x.mean()
    yc = y - y.mean()
    var = float(np.sqrt((xc * xc).sum() * (yc * yc).sum()))
    if var == 0.0:
        return None
    return float((xc * yc).sum() / var)


def location_assortativity(net: SupplyNetwork) -> float | None:
    view = net.undirected
    if view.edge_count == 0:
        return None
    countries = sorted({net.firms[f].country for f in view.ids})
    cidx = {c: i for i, c in enumerate(countries)}
    attr = np.array([cidx[net.firms[f].country] for f in view.ids], dtype=np.int64)
    coo = view.adjacency.tocoo()
    k = len(countries)
    e = np.zeros((k, k))
    np.add.at(e, (attr[coo.row], attr[coo.col]), 1.0)
    e /= e.sum()
    a = e.sum(axis=1)
    b = e.sum(axis=0)
    expected = float((a * b).sum())
    denom = 1.0 - expected
    if denom <= 1e-15:
        return None
    return float((np.trace(e) - expected) / denom)


def avg_shortest_path(net: SupplyNetwork, mode: PathMode | str = PathMode(), seed: int | None = 0) -> float:
    """Mean distance between ordered node pairs of the largest connected component.

    In sampled mode the mean runs over ``k`` uniformly drawn sources (without
    replacement); with ``k`` at least the component size this equals the exact value.
    """
    mode = PathMode.parse(mode)
    view = net.undirected
    comp = _largest_component(view)
    size = len(comp)
    if size < 2:
        raise MetricError("no paths")
    sub = view.adjacency[comp][:, comp].tocsr()
    if mode.exact or mode.k >= size:
        sources = np.arange(size)
    else:
        rng = np.random.default_rng(seed)
        sources = np.sort(rng.choice(size, size=mode.k, replace=False))
    total = 0
    for _, dist in _distances(sub, sources):
        total += int(dist.sum())
    return total / (len(sources) * (size - 1))


def avg_connection_split(net: SupplyNetwork) -> tuple[float, float]:
    """Mean number of distinct same-country and other-country neighbours per firm."""
    view = net.undirected
    if view.n == 0:
        return (0.0, 0.0)
    coo = view.adjacency.tocoo()
    countries = [net.firms[f].country for f in view.ids]
    same = np.fromiter((countries[i] == countries[j] for i, j in zip(coo.row, coo.col)), dtype=bool, count=coo.nnz)
    domestic = int(same.sum())
    international = coo.nnz - domestic
    return domestic / view.n, international / view.n


def local_clustering(view: UndirectedView) -> np.ndarray:
    a = view.adjacency.astype(np.int64)
    triangles = np.asarray(a.multiply(a @ a).sum(axis=1)).ravel() / 2.0
    deg = view.degrees.astype(np.float64)
    pairs = deg * (deg - 1) / 2.0
    out = np.zeros(view.n)
    mask = pairs > 0
    out[mask] = triangles[mask] / pairs[mask]
    return out


def clustering_coefficient(net: SupplyNetwork) -> float:
    """Average local clustering; nodes of degree < 2 count as 0."""
    view = net.undirected
    if view.n == 0:
        return 0.0
    return float(local_clustering(view).mean())


# -- communities -------------------------------------------------------------

def _labels_array(view: UndirectedView, part: Mapping[str, object]) -> np.ndarray:
    missing = [f for f in view.ids if f not in part]
    if missing:
        raise MetricError(f"partition not total: {len(missing)} firms unassigned (e.g. {missing[0]!r})")
    codes: dict[object, int] = {}
    return np.array([codes.setdefault(part[f], len(codes)) for f in view.ids], dtype=np.int64)


def _modularity(view: UndirectedView, labels: np.ndarray) -> float:
    m = view.edge_count
    if m == 0:
        raise MetricError("modularity undefined without edges")
    coo = sparse.triu(view.adjacency, k=1).tocoo()
    internal = np.bincount(labels[coo.row[labels[coo.row] == labels[coo.col]]], minlength=labels.max() + 1)
    degsum = np.bincount(labels, weights=view.degrees, minlength=labels.max() + 1)
    return float((internal / m - (degsum / (2.0 * m)) ** 2).sum())


def modularity_of_partition(net: SupplyNetwork, part: Mapping[str, object]) -> float:
    view = net.undirected
    return _modularity(view, _labels_array(view, part))


def detect_communities(net: SupplyNetwork, seed: int | None = 0) -> tuple[dict[str, int], float | None]:
    """Seeded Louvain partition and its modularity (None when there are no edges)."""
    view = net.undirected
    labels = louvain(view.adjacency, seed=seed)
    part = {f: int(c) for f, c in zip(view.ids, labels)}
    q = modularity_of_partition(net, part) if view.edge_count else None
    return part, q


# -- centralities ----------------------------------------------------------

def eigenvector_centrality(net: SupplyNetwork, tol: float = 1e-8, max_iter: int = 1000) -> dict[str, float]:
    """Power iteration on A + I restricted to the largest component (others get 0).

    The result has unit Euclidean norm.
    """
    view = net.undirected
    if view.n == 0:
        raise MetricError("empty network")
    comp = _largest_component(view)
    sub = view.adjacency[comp][:, comp].astype(np.float64).tocsr()
    size = len(comp)
    x = np.full(size, 1.0 / size)
    for _ in range(max_iter):
        prev = x
        x = prev + sub @ prev
        x /= np.linalg.norm(x)
        if np.abs(x - prev).sum() < size * tol:
            break
    else:
        raise MetricError("no convergence")
    out = dict.fromkeys(view.ids, 0.0)
    for i, v in zip(comp, x):
        out[view.ids[i]] = float(v)
    return out


def closeness_centrality(net: SupplyNetwork) -> dict[str, float]:
    """(r - 1) / sum of distances, with r the size of the node's component; isolated nodes get 0."""
    view = net.undirected
    n = view.n
    if n == 0:
        raise MetricError("empty network")
    out = dict.fromkeys(view.ids, 0.0)
    if n == 1:
        return out
    for chunk, dist in _distances(view.adjacency, np.arange(n)):
        for row, src in zip(dist, chunk):
            reach = np.isfinite(row)
            r = int(reach.sum())
            total = row[reach].sum()
            if total > 0:
                out[view.ids[src]] = (r - 1) / total
    return out


def betweenness_centrality(net: SupplyNetwork, normalized: bool = True) -> dict[str, float]:
    """Brandes betweenness on the undirected projection (each pair counted once)."""
    view = net.undirected
    n = view.n
    if n == 0:
        raise MetricError("empty network")
    nbrs = view.neighbors
    cb = np.zeros(n)
    for s in range(n):
        stack = []
        preds: list[list[int]] = [[] for _ in range(n)]
        sigma = np.zeros(n)
        sigma[s] = 1.0
        dist = np.full(n, -1, dtype=np.int64)
        dist[s] = 0
        queue = deque([s])
        while queue:
            v = queue.popleft()
            stack.append(v)
            for w in nbrs[v]:
                if dist[w] < 0:
                    dist[w] = dist[v] + 1
                    queue.append(w)
                if dist[w] == dist[v] + 1:
                    sigma[w] += sigma[v]
                    preds[w].append(v)
        delta = np.zeros(n)
        while stack:
            w = stack.pop()
            for v in preds[w]:
                delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w])
            if w != s:
                cb[w] += delta[w]
    cb /= 2.0
    if normalized and n > 2:
        cb *= 2.0 / ((n - 1) * (n - 2))
    return {f: float(v) for f, v in zip(view.ids, cb)}


# -- report --------------------------------------------------------------------

@dataclass(frozen=True)
class MetricReport:
    edge_count: int
    density: float | None
    degree_assortativity: float | None
    location_assortativity: float | None
    avg_shortest_path: float | None
    avg_domestic: float
    avg_international: float
    clustering_coefficient: float
    modularity: float | None
    community_count: int

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in dataclasses.fields(cls)]

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)

    def undefined(self) -> list[str]:
        return [k for k, v in self.as_dict().items() if v is None]


METRIC_LABELS = {
    "edge_count": "No. Edges",
    "density": "Density",
    "degree_assortativity": "Degree Assortativity",
    "location_assortativity": "Location Assortativity",
    "avg_shortest_path": "Avg. Shortest Path Length",
    "avg_domestic": "Avg. Domestic Connections",
    "avg_international": "Avg. International Connections",
    "clustering_coefficient": "Clustering Coefficient",
    "modularity": "Modularity",
    "community_count": "No. Communities",
}


def _guard(fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except MetricError:
        return None


def metric_report(net: SupplyNetwork, seed: int | None = 0, path_mode: PathMode | str = PathMode()) -> MetricReport:
    """All Table-style network measures; failing components are reported as None."""
    part, q = detect_communities(net, seed=seed)
    dom, intl = avg_connection_split(net)
    return MetricReport(
        edge_count=net.edge_count,
        density=_guard(density, net),
        degree_assortativity=degree_assortativity(net),
        location_assortativity=location_assortativity(net),
        avg_shortest_path=_guard(avg_shortest_path, net, path_mode, seed),
        avg_domestic=dom,
        avg_international=intl,
        clustering_coefficient=clustering_coefficient(net),
        modularity=q,
        community_count=len(set(part.values())) if part else 0,
    )


def is_close_report(a: MetricReport, b: MetricReport, tol: float = 1e-12) -> bool:
    for x, y in zip(dataclasses.astuple(a), dataclasses.astuple(b)):
        if (x is None) != (y is None):
            return False
        if x is not None and not math.isclose(x, y, rel_tol=tol, abs_tol=tol):
            return False
    return True
