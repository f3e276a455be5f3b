"""Independent reference implementations used by the tests.

Nothing here imports the metric or policy code under test; the rewiring
oracles restate each procedure literally, loop by loop, and the metric oracles
work from definitions on plain Python adjacency sets.
"""

from __future__ import annotations

import itertools
import math
import random
from collections import deque

import numpy as np

from scpolicy.network import Firm, Product, SupplyEdge, build_network

COUNTRY_POOL = ("US", "CA", "MX", "DE", "FR", "IT", "CN", "JP", "KR", "RU")


# -- random fixtures -----------------------------------------------------------

def random_network(rng: random.Random, max_firms=50, max_countries=10, max_products=30, edge_factor=3.0):
    n = rng.randint(2, max_firms)
    countries = rng.sample(COUNTRY_POOL, rng.randint(1, max_countries))
    n_products = rng.randint(1, max_products)
    pids = [f"p{j}" for j in range(n_products)]
    products = [Product(p, f"cat {p}", rng.choice(["Auto", "Steel", "Mine"]), False) for p in pids]
    firms = []
    for i in range(n):
        size = 0 if rng.random() < 0.1 else rng.randint(1, min(4, n_products))
        firms.append(Firm(f"f{i:02d}", f"firm {i}", rng.choice(countries), "Auto", frozenset(rng.sample(pids, size))))
    makers = [f.id for f in firms if f.products]
    edges = []
    if makers:
        for _ in range(int(edge_factor * n)):
            s, c = rng.choice(makers), rng.choice(firms).id
            if s != c:
                edges.append(SupplyEdge(s, c))
    return build_network(firms, edges, products)


def small_connected_graph(rng: random.Random, n: int):
    """Random directed network whose undirected projection is connected (n nodes)."""
    countries = rng.sample(COUNTRY_POOL[:4], rng.randint(1, 3))
    firms = [Firm(f"v{i}", f"v{i}", rng.choice(countries), "X", frozenset({"p"})) for i in range(n)]
    pairs = set()
    order = list(range(n))
    rng.shuffle(order)
    for i in range(1, n):  # random spanning tree
        a, b = order[i], order[rng.randrange(i)]
        pairs.add((a, b) if rng.random() < 0.5 else (b, a))
    p_extra = rng.random()
    for a, b in itertools.permutations(range(n), 2):
        if rng.random() < p_extra * 0.4:
            pairs.add((a, b))
    edges = [SupplyEdge(f"v{a}", f"v{b}") for a, b in sorted(pairs)]
    return build_network(firms, edges, [Product("p", "p", "X", False)])


# -- literal rewiring procedures -----------------------------------------------

def _companies(net, countries):
    return {f.id for f in net.firms.values() if f.country in countries}


def _suppliers(edges, c):
    return {s for (s, cc) in edges if cc == c}


def oracle_country_plus_one(net, X, S):
    """Procedure for Country+1: add every in-scope alternative for products bought from X."""
    edges = set(net.edges)
    C_S = _companies(net, S)
    C_X = _companies(net, X)
    NS_p, NS_c, flags = set(), set(), set()
    for c in C_S:
        for x in _suppliers(set(net.edges), c):
            if x not in C_X:
                continue
            for p in net.firms[x].products:
                found = False
                for s in C_S:
                    if s != c and p in net.firms[s].products:
                        edges.add((s, c))
                        found = True
                if not found:
                    NS_p.add(p)
                    NS_c.add(c)
                    flags.add((c, p))
    return edges, NS_p, NS_c, flags


def oracle_friendshoring(net, S):
    """Procedure for Friendshoring: replace out-of-scope suppliers, keep them unless fully substitutable."""
    edges = set(net.edges)
    C = _companies(net, S)
    NS_p, NS_c, flags = set(), set(), set()
    for c in C:
        for s in _suppliers(set(net.edges), c):
            if s in C:
                continue
            all_substitutable = True
            for p in net.firms[s].products:
                alternatives = [k for k in C if k != c and p in net.firms[k].products]
                if alternatives:
                    for k in alternatives:
                        edges.add((k, c))
                else:
                    all_substitutable = False
                    NS_p.add(p)
                    NS_c.add(c)
                    flags.add((c, p))
            if all_substitutable:
                edges.discard((s, c))
    return edges, NS_p, NS_c, flags


def oracle_reshoring(net, S1):
    """Procedure for Reshoring: the only alternatives are firms in the customer's home country."""
    edges = set(net.edges)
    C = _companies(net, S1)
    NS_p, NS_c, flags = set(), set(), set()
    for c in C:
        home = net.firms[c].country
        C_home = _companies(net, {home})
        for s in _suppliers(set(net.edges), c):
            if net.firms[s].country == home:
                continue
            all_substitutable = True
            for p in net.firms[s].products:
                alternatives = [k for k in C_home if k != c and p in net.firms[k].products]
                if alternatives:
                    for k in alternatives:
                        edges.add((k, c))
                else:
                    all_substitutable = False
                    NS_p.add(p)
                    NS_c.add(c)
                    flags.add((c, p))
            if all_substitutable:
                edges.discard((s, c))
    return edges, NS_p, NS_c, flags


# -- brute-force metrics -------------------------------------------------------

def undirected(net):
    ids = sorted(net.firms)
    nbr = {f: set() for f in ids}
    for s, c in net.edges:
        nbr[s].add(c)
        nbr[c].add(s)
    return ids, nbr


def bf_density(net):
    n = len(net.firms)
    return len(net.edges) / (n * (n - 1))


def _pearson(xs, ys):
    n = len(xs)
    mx, my = sum(xs) / n, sum(ys) / n
    cov = sum((x - mx) * (y - my) for x, y in zip(xs, ys))
    vx = sum((x - mx) ** 2 for x in xs)
    vy = sum((y - my) ** 2 for y in ys)
    if vx == 0 or vy == 0:
        return None
    return cov / math.sqrt(vx * vy)


def bf_degree_assortativity(net):
    ids, nbr = undirected(net)
    xs, ys = [], []
    for a in ids:
        for b in nbr[a]:  # each undirected edge appears in both orientations
            xs.append(len(nbr[a]))
            ys.append(len(nbr[b]))
    return _pearson(xs, ys) if xs else None


def bf_location_assortativity(net):
    ids, nbr = undirected(net)
    cats = sorted({net.firms[f].country for f in ids})
    idx = {c: i for i, c in enumerate(cats)}
    e = [[0.0] * len(cats) for _ in cats]
    total = 0
    for a in ids:
        for b in nbr[a]:
            e[idx[net.firms[a].country]][idx[net.firms[b].country]] += 1
            total += 1
    if total == 0:
        return None
    e = [[v / total for v in row] for row in e]
    a_ = [sum(row) for row in e]
    b_ = [sum(e[i][j] for i in range(len(cats))) for j in range(len(cats))]
    tr = sum(e[i][i] for i in range(len(cats)))
    ab = sum(x * y for x, y in zip(a_, b_))
    if abs(1 - ab) < 1e-15:
        return None
    return (tr - ab) / (1 - ab)


def bf_distances(net):
    ids, nbr = undirected(net)
    INF = float("inf")
    d = {a: {b: (0 if a == b else (1 if b in nbr[a] else INF)) for b in ids} for a in ids}
    for k in ids:
        for i in ids:
            for j in ids:
                if d[i][k] + d[k][j] < d[i][j]:
                    d[i][j] = d[i][k] + d[k][j]
    return ids, d


def bf_avg_shortest_path(net):
    ids, d = bf_distances(net)
    # largest component by reachability
    comps = []
    seen = set()
    for a in ids:
        if a in seen:
            continue
        comp = {b for b in ids if d[a][b] < float("inf")}
        seen |= comp
        comps.append(sorted(comp))
    comp = max(comps, key=len)
    pairs = [d[a][b] for a in comp for b in comp if a != b]
    return sum(pairs) / len(pairs)


def bf_clustering(net):
    ids, nbr = undirected(net)
    total = 0.0
    for v in ids:
        k = len(nbr[v])
        if k < 2:
            continue
        tri = sum(1 for a, b in itertools.combinations(sorted(nbr[v]), 2) if b in nbr[a])
        total += tri / (k * (k - 1) / 2)
    return total / len(ids)


def bf_avg_connection_split(net):
    ids, nbr = undirected(net)
    dom = sum(sum(net.firms[b].country == net.firms[a].country for b in nbr[a]) for a in ids)
    intl = sum(sum(net.firms[b].country != net.firms[a].country for b in nbr[a]) for a in ids)
    return dom / len(ids), intl / len(ids)


def bf_modularity(net, part):
    ids, nbr = undirected(net)
    two_m = sum(len(nbr[a]) for a in ids)
    q = 0.0
    for i in ids:
        for j in ids:
            if part[i] == part[j]:
                q += (1.0 if j in nbr[i] else 0.0) - len(nbr[i]) * len(nbr[j]) / two_m
    return q / two_m


def set_partitions(n: int) -> np.ndarray:
    """All set partitions of n items as restricted-growth label rows (Bell(n) rows)."""
    out = []

    def grow(prefix, top):
        if len(prefix) == n:
            out.append(list(prefix))
            return
        for lab in range(top + 2):
            grow(prefix + [lab], max(top, lab))

    grow([0], 0) if n else out.append([])
    return np.array(out, dtype=np.int64)


def best_modularity(net, partitions: np.ndarray) -> float:
    """Maximum Q over every partition, via the modularity matrix."""
    ids, nbr = undirected(net)
    n = len(ids)
    A = np.array([[1.0 if ids[j] in nbr[ids[i]] else 0.0 for j in range(n)] for i in range(n)])
    k = A.sum(1)
    two_m = k.sum()
    B = A - np.outer(k, k) / two_m
    same = partitions[:, :, None] == partitions[:, None, :]
    return float((same.reshape(len(partitions), -1) @ B.ravel()).max() / two_m)


def bf_bfs(nbr, src):
    dist = {src: 0}
    q = deque([src])
    while q:
        v = q.popleft()
        for w in nbr[v]:
            if w not in dist:
                dist[w] = dist[v] + 1
                q.append(w)
    return dist
