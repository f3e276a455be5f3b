"""Supply network representation.

Nodes are firms, directed edges run supplier -> customer. Every firm carries
a product portfolio; ``product_index`` is its exact inverse and is what the
policies use to look for alternative suppliers.

A :class:`SupplyNetwork` is treated as immutable once built. Policies produce
new networks through :meth:`SupplyNetwork.rewired`.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable

import numpy as np
from scipy import sparse

from scpolicy.errors import NetworkError


@dataclass(frozen=True)
class Firm:
    id: str
    name: str
    country: str
    industry: str
    products: frozenset[str] = frozenset()
    market_cap: float | None = None

    def __post_init__(self):
        if not isinstance(self.products, frozenset):
            object.__setattr__(self, "products", frozenset(self.products))
        if self.market_cap is not None and self.market_cap < 0:
            raise NetworkError(f"negative market cap for firm {self.id!r}")


@dataclass(frozen=True)
class Product:
    id: str
    category: str
    industry: str
    is_mining: bool = False


@dataclass(frozen=True)
class SupplyEdge:
    supplier: str
    customer: str
    products: frozenset[str] | None = None  # None: supplier's whole portfolio
    weight: float | None = None

    def __post_init__(self):
        if self.products is not None and not isinstance(self.products, frozenset):
            object.__setattr__(self, "products", frozenset(self.products))

    @property
    def key(self) -> tuple[str, str]:
        return (self.supplier, self.customer)


class EdgeKind(str, enum.Enum):
    DOMESTIC = "domestic"
    INTERNATIONAL = "international"


@dataclass
class BuildReport:
    input_edges: int = 0
    duplicates: int = 0
    rejected: list[tuple[int, str]] = field(default_factory=list)

    @property
    def accepted(self) -> int:
        return self.input_edges - self.duplicates - len(self.rejected)


@dataclass(frozen=True)
class UndirectedView:
    """Undirected, unweighted projection with firms mapped to 0..n-1 (sorted ids)."""

    ids: tuple[str, ...]
    index: dict[str, int]
    adjacency: sparse.csr_matrix  # symmetric 0/1, no self-loops

    @property
    def n(self) -> int:
        return len(self.ids)

    @cached_property
    def degrees(self) -> np.ndarray:
        return np.diff(self.adjacency.indptr).astype(np.int64)

    @cached_property
    def neighbors(self) -> list[np.ndarray]:
        a = self.adjacency
        return [a.indices[a.indptr[i]:a.indptr[i + 1]] for i in range(self.n)]

    @property
    def edge_count(self) -> int:
        return int(self.adjacency.nnz // 2)


class SupplyNetwork:
    """Directed firm-to-firm supply network with a product -> producers index."""

    def __init__(
        self,
        firms: dict[str, Firm],
        products: dict[str, Product],
        edges: dict[tuple[str, str], SupplyEdge],
        report: BuildReport | None = None,
    ):
        self.firms = firms
        self.products = products
        self.edges = edges
        self.report = report or BuildReport(input_edges=len(edges))
        suppliers: dict[str, set[str]] = {f: set() for f in firms}
        customers: dict[str, set[str]] = {f: set() for f in firms}
        for s, c in edges:
            suppliers[c].add(s)
            customers[s].add(c)
        self._suppliers = {f: frozenset(v) for f, v in suppliers.items()}
        self._customers = {f: frozenset(v) for f, v in customers.items()}

    @cached_property
    def product_index(self) -> dict[str, frozenset[str]]:
        index: dict[str, set[str]] = {p: set() for p in self.products}
        for firm in self.firms.values():
            for p in firm.products:
                index[p].add(firm.id)
        return {p: frozenset(v) for p, v in index.items()}

    def __repr__(self) -> str:
        return f"SupplyNetwork(firms={len(self.firms)}, edges={len(self.edges)}, products={len(self.products)})"

    def __eq__(self, other) -> bool:
        if not isinstance(other, SupplyNetwork):
            return NotImplemented
        return (
            self.firms == other.firms
            and self.products == other.products
            and self.edges == other.edges
        )

    __hash__ = None

    @property
    def firm_count(self) -> int:
        return len(self.firms)

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    def _firm(self, f: str) -> Firm:
        try:
            return self.firms[f]
        except KeyError:
            raise NetworkError(f"unknown firm id: {f!r}") from None

    def country_of(self, f: str) -> str:
        return self._firm(f).country

    def products_of(self, f: str) -> frozenset[str]:
        return self._firm(f).products

    def producers_of(self, p: str) -> frozenset[str]:
        try:
            return self.product_index[p]
        except KeyError:
            raise NetworkError(f"unknown product: {p!r}") from None

    def suppliers_of(self, f: str) -> frozenset[str]:
        self._firm(f)
        return self._suppliers[f]

    def customers_of(self, f: str) -> frozenset[str]:
        self._firm(f)
        return self._customers[f]

    def degree(self, f: str) -> int:
        """Directed total degree (in + out)."""
        return len(self.suppliers_of(f)) + len(self._customers[f])

    def classify_edge(self, e: SupplyEdge | tuple[str, str]) -> EdgeKind:
        s, c = e.key if isinstance(e, SupplyEdge) else e
        if self.country_of(s) == self.country_of(c):
            return EdgeKind.DOMESTIC
        return EdgeKind.INTERNATIONAL

    def firms_in_countries(self, countries: Iterable[str]) -> frozenset[str]:
        countries = frozenset(countries)
        if not countries:
            raise NetworkError("empty scope")
        return frozenset(f.id for f in self.firms.values() if f.country in countries)

    @cached_property
    def countries(self) -> frozenset[str]:
        return frozenset(f.country for f in self.firms.values())

    @cached_property
    def undirected(self) -> UndirectedView:
        ids = tuple(sorted(self.firms))
        index = {f: i for i, f in enumerate(ids)}
        n = len(ids)
        if self.edges:
            pairs = np.array([(index[s], index[c]) for s, c in self.edges], dtype=np.int64)
            rows = np.concatenate([pairs[:, 0], pairs[:, 1]])
            cols = np.concatenate([pairs[:, 1], pairs[:, 0]])
        else:
            rows = cols = np.zeros(0, dtype=np.int64)
        adj = sparse.csr_matrix((np.ones(len(rows), dtype=np.int8), (rows, cols)), shape=(n, n))
        adj.sum_duplicates()
        adj.data[:] = 1  # reciprocal pairs collapse
        adj.sort_indices()
        return UndirectedView(ids, index, adj)

    def rewired(
        self,
        added: Iterable[SupplyEdge] = (),
        removed: Iterable[tuple[str, str]] = (),
    ) -> SupplyNetwork:
        """New network with ``added`` edges inserted and ``removed`` keys dropped.

        Firms and products are shared with the original (they are immutable).
        """
        edges = dict(self.edges)
        for key in removed:
            edges.pop(key, None)
        for e in added:
            if e.supplier == e.customer:
                raise NetworkError("self-supply rejected")
            if e.supplier not in self.firms or e.customer not in self.firms:
                raise NetworkError("unknown firm id")
            edges.setdefault(e.key, e)
        net = SupplyNetwork(self.firms, self.products, edges)
        net.__dict__["product_index"] = self.product_index
        return net


def _merge(a: SupplyEdge, b: SupplyEdge) -> SupplyEdge:
    if a.products is None or b.products is None:
        products = None
    else:
        products = a.products | b.products
    if a.weight is None:
        weight = b.weight
    elif b.weight is None:
        weight = a.weight
    else:
        weight = a.weight + b.weight
    return SupplyEdge(a.supplier, a.customer, products, weight)


def build_network(
    firms: Iterable[Firm],
    edges: Iterable[SupplyEdge],
    products: Iterable[Product] = (),
    strict: bool = True,
) -> SupplyNetwork:
    """Validate and index firms and edges.

    Duplicate (supplier, customer) pairs collapse into one edge with summed
    weight; the count lands in ``net.report.duplicates``. With ``strict=False``
    invalid edges are recorded in ``net.report.rejected`` instead of raising.
    Products referenced by portfolios but missing from ``products`` get a
    placeholder entry named after the id.
    """
    firm_map: dict[str, Firm] = {}
    for f in firms:
        if f.id in firm_map:
            raise NetworkError(f"duplicate firm id: {f.id!r}")
        firm_map[f.id] = f

    product_map: dict[str, Product] = {}
    for p in products:
        if p.id in product_map and product_map[p.id] != p:
            raise NetworkError(f"conflicting product definitions for {p.id!r}")
        product_map[p.id] = p
    for fid in sorted(firm_map):
        f = firm_map[fid]
        for pid in sorted(f.products):
            if pid not in product_map:
                product_map[pid] = Product(pid, pid, f.industry, False)

    report = BuildReport()
    edge_map: dict[tuple[str, str], SupplyEdge] = {}
    for i, e in enumerate(edges):
        report.input_edges += 1
        reason = None
        if e.supplier not in firm_map or e.customer not in firm_map:
            reason = "unknown firm id"
        elif e.supplier == e.customer:
            reason = "self-supply rejected"
        elif not firm_map[e.supplier].products:
            reason = "supplier has no products"
        elif e.products is not None and not e.products <= firm_map[e.supplier].products:
            reason = "edge-product mismatch"
        if reason is not None:
            if strict:
                raise NetworkError(f"{reason}: {e.supplier!r} -> {e.customer!r}")
            report.rejected.append((i, reason))
            continue
        if e.key in edge_map:
            report.duplicates += 1
            edge_map[e.key] = _merge(edge_map[e.key], e)
        else:
            edge_map[e.key] = e

    return SupplyNetwork(firm_map, product_map, edge_map, report)
