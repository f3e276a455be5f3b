"""Synthetic supply networks with planted country/community structure.

Firms get a country and an industry by weight, a heavy-tailed fitness for
being a supplier and another for being a customer, and a planted community
nested inside their country. Every community also has a few partner
communities abroad. An edge is grown by drawing a customer by fitness, then
a supplier by fitness from one of four pools:

* same community                  (domestic, local)
* same country                    (domestic, non-local)
* the partner communities         (international, local)
* any other country               (international, non-local)

``domestic_preference`` picks domestic vs international. A domestic edge
stays local with probability ``domestic_locality`` and an international one
with probability ``community_locality``. Keeping the two apart means the share
of edges inside planted communities does not shrink when countries are split
into more communities.

Portfolios are drawn from a product catalog whose products belong to
industries; a firm mostly makes products of its own industry. Mining
products belong to the mining industries only.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np
import yaml

from scpolicy.errors import GeneratorError
from scpolicy.metrics import MetricReport, PathMode, metric_report
from scpolicy.network import Firm, Product, SupplyEdge, SupplyNetwork, build_network

MINING_INDUSTRIES = ("Mine", "Refinery", "Smelter")

DEFAULT_COUNTRY_WEIGHTS: dict[str, float] = {
    "CN": 2111, "JP": 1325, "US": 1322, "DE": 1050, "KR": 700, "TW": 640, "IN": 600,
    "GB": 520, "FR": 430, "IT": 400, "ES": 300, "CA": 290, "MX": 250, "HK": 210,
    "SE": 160, "NL": 160, "CH": 150, "BR": 150, "TH": 150, "AU": 150, "MY": 120,
    "SG": 120, "ID": 120, "VN": 100, "PL": 100, "AT": 100, "BE": 100, "CZ": 80,
    "TR": 80, "RU": 80, "FI": 60, "DK": 60, "NO": 60, "ZA": 60, "CL": 60, "IE": 50,
    "PT": 50, "HU": 50, "RO": 50, "SK": 40, "AR": 40, "PE": 40, "IL": 40, "SA": 40,
    "AE": 40, "PH": 40, "NZ": 30, "SI": 30, "CD": 20, "IR": 20, "BY": 15, "ZW": 15,
}

DEFAULT_INDUSTRY_WEIGHTS: dict[str, float] = {
    "Automotive": 18, "Machinery": 10, "Transportation Equipment": 8,
    "Industrial Intermediate Products": 6, "Electrical Equipment": 5, "Chemicals": 5,
    "Semiconductors": 4, "Electronic Components": 4, "Steel": 4, "Technology Services": 3,
    "Software": 3, "Telecommunications": 2, "Cable & Satellite": 1.5,
    "Construction Materials": 2, "Metals & Mining": 2, "Mine": 3, "Refinery": 1.5,
    "Smelter": 1.5, "Aerospace & Defense": 1.5, "Renewable Energy": 1.5,
    "Oil & Gas Services & Equipment": 1.5, "Transportation & Logistics": 1.5,
    "Diversified Industrials": 1.5, "Electric Utilities": 1.5, "Batteries": 2,
    "Rubber & Plastics": 2, "Glass": 1, "Textiles": 1, "Consumer Electronics": 1.5,
    "Industrial Services": 1, "Packaging": 1, "Medical Equipment": 0.5,
}


@dataclass(frozen=True)
class GeneratorConfig:
    n_firms: int = 18000
    n_edges: int = 56000
    country_weights: Mapping[str, float] = field(default_factory=lambda: dict(DEFAULT_COUNTRY_WEIGHTS))
    industry_weights: Mapping[str, float] = field(default_factory=lambda: dict(DEFAULT_INDUSTRY_WEIGHTS))
    products_per_firm: tuple[float, float] = (5.0, 2.0)  # (mean, negative-binomial shape)
    n_products: int = 3000
    degree_exponent: float = 2.5
    fitness_cap: float | None = 300.0  # None: uncapped
    domestic_preference: float = 0.51
    community_locality: float = 0.6
    domestic_locality: float = 1.0
    n_planted_communities: int = 60
    partners_per_community: int = 3
    industry_affinity: float = 0.8
    mining_fraction: float = 0.13
    seed: int = 0

    def __post_init__(self):
        if self.n_firms < 2:
            raise GeneratorError("n_firms must be >= 2")
        if self.n_edges < 0:
            raise GeneratorError("n_edges must be >= 0")
        for name in ("country_weights", "industry_weights"):
            w = getattr(self, name)
            if not w or any(v < 0 for v in w.values()) or not any(v > 0 for v in w.values()):
                raise GeneratorError(f"{name} must be non-negative with at least one positive weight")
        mean, shape = self.products_per_firm
        if mean < 1 or shape <= 0:
            raise GeneratorError("products_per_firm needs mean >= 1 and shape > 0")
        if self.n_products < 1:
            raise GeneratorError("n_products must be >= 1")
        if self.fitness_cap is not None and self.fitness_cap < 1:
            raise GeneratorError("fitness_cap must be >= 1")
        if self.degree_exponent <= 1:
            raise GeneratorError("degree_exponent must be > 1")
        for name in ("domestic_preference", "community_locality", "domestic_locality", "industry_affinity",
                     "mining_fraction"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise GeneratorError(f"{name} must lie in [0, 1]")
        if self.n_planted_communities < 1:
            raise GeneratorError("n_planted_communities must be >= 1")

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["country_weights"] = dict(self.country_weights)
        d["industry_weights"] = dict(self.industry_weights)
        d["products_per_firm"] = list(self.products_per_firm)
        return d

    @classmethod
    def from_dict(cls, doc: Mapping) -> GeneratorConfig:
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise GeneratorError(f"unknown generator fields: {sorted(unknown)}")
        doc = dict(doc)
        if "products_per_firm" in doc:
            doc["products_per_firm"] = tuple(doc["products_per_firm"])
        return cls(**doc)

    @classmethod
    def load(cls, path: str | Path) -> GeneratorConfig:
        doc = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
        return cls.from_dict(doc.get("generator", doc))


def _pareto(rng: np.random.Generator, n: int, exponent: float) -> np.ndarray:
    # density ~ w^-exponent on [1, inf)
    return (1.0 - rng.random(n)) ** (-1.0 / (exponent - 1.0))


class _Pool:
    """Fitness-weighted sampler over the members of one group."""

    __slots__ = ("members", "cum")

    def __init__(self, members: np.ndarray, weights: np.ndarray):
        self.members = members
        self.cum = np.cumsum(weights[members])

    def draw(self, rng: np.random.Generator, size: int) -> np.ndarray:
        u = rng.random(size) * self.cum[-1]
        return self.members[np.minimum(np.searchsorted(self.cum, u, side="right"), len(self.members) - 1)]


def _groups(labels: np.ndarray, count: int) -> list[np.ndarray]:
    order = np.argsort(labels, kind="stable")
    bounds = np.searchsorted(labels[order], np.arange(count + 1))
    return [order[bounds[i]:bounds[i + 1]] for i in range(count)]


def _catalog(cfg: GeneratorConfig, rng: np.random.Generator, industries: list[str], ind_w: np.ndarray):
    mining = [i for i, name in enumerate(industries) if name in MINING_INDUSTRIES]
    other = [i for i, name in enumerate(industries) if name not in MINING_INDUSTRIES]
    n_mining = int(round(cfg.mining_fraction * cfg.n_products)) if mining else 0
    if not other:
        n_mining = cfg.n_products
    prod_industry = np.empty(cfg.n_products, dtype=np.int64)
    if n_mining:
        w = ind_w[mining] / ind_w[mining].sum() if ind_w[mining].sum() > 0 else None
        prod_industry[:n_mining] = rng.choice(mining, size=n_mining, p=w)
    if cfg.n_products > n_mining:
        w = ind_w[other] / ind_w[other].sum() if ind_w[other].sum() > 0 else None
        prod_industry[n_mining:] = rng.choice(other, size=cfg.n_products - n_mining, p=w)
    popularity = _pareto(rng, cfg.n_products, 2.2)
    is_mining = np.zeros(cfg.n_products, dtype=bool)
    is_mining[:n_mining] = True
    return prod_industry, popularity, is_mining


def _portfolios(cfg, rng, firm_industry, prod_industry, popularity, n_industries) -> list[np.ndarray]:
    mean, shape = cfg.products_per_firm
    extra = mean - 1.0
    if extra > 0:
        sizes = 1 + rng.negative_binomial(shape, shape / (shape + extra), size=cfg.n_firms)
    else:
        sizes = np.ones(cfg.n_firms, dtype=np.int64)
    sizes = np.minimum(sizes, cfg.n_products)
    by_industry = _groups(prod_industry, n_industries)
    pools = [_Pool(m, popularity) if len(m) else None for m in by_industry]
    everything = _Pool(np.arange(cfg.n_products), popularity)
    out = []
    for f in range(cfg.n_firms):
        own = pools[firm_industry[f]]
        want = int(sizes[f])
        chosen: set[int] = set()
        tries = 0
        while len(chosen) < want and tries < 20:
            n_draw = 2 * (want - len(chosen)) + 2
            local = rng.random(n_draw) < cfg.industry_affinity
            draws = everything.draw(rng, n_draw)
            if own is not None and local.any():
                draws[local] = own.draw(rng, int(local.sum()))
            for p in draws:
                if len(chosen) == want:
                    break
                chosen.add(int(p))
            tries += 1
        out.append(np.array(sorted(chosen), dtype=np.int64))
    return out


def generate(cfg: GeneratorConfig = GeneratorConfig()) -> SupplyNetwork:
    """Deterministic synthetic network for ``cfg`` (same config and seed, same network)."""
    return _generate(cfg)[0]


def planted_labels(cfg: GeneratorConfig) -> tuple[SupplyNetwork, dict[str, int]]:
    """The generated network together with each firm's planted community."""
    net, comm = _generate(cfg)
    ids = sorted(net.firms)
    return net, {f: int(c) for f, c in zip(ids, comm)}


def _generate(cfg: GeneratorConfig) -> tuple[SupplyNetwork, np.ndarray]:
    # independent streams: firm attributes, product portfolios, topology
    attr_rng, prod_rng, rng = (np.random.default_rng(s) for s in np.random.SeedSequence(cfg.seed).spawn(3))
    n = cfg.n_firms

    countries = sorted(c for c, w in cfg.country_weights.items() if w > 0)
    c_w = np.array([cfg.country_weights[c] for c in countries], dtype=float)
    firm_country = attr_rng.choice(len(countries), size=n, p=c_w / c_w.sum())
    industries = sorted(cfg.industry_weights)
    i_w = np.array([cfg.industry_weights[i] for i in industries], dtype=float)
    firm_industry = attr_rng.choice(len(industries), size=n, p=i_w / i_w.sum())

    prod_industry, popularity, is_mining = _catalog(cfg, prod_rng, industries, i_w)
    portfolios = _portfolios(cfg, prod_rng, firm_industry, prod_industry, popularity, len(industries))

    cap = cfg.fitness_cap if cfg.fitness_cap is not None else np.inf
    supply_fit = np.minimum(_pareto(rng, n, cfg.degree_exponent), cap)
    demand_fit = np.minimum(_pareto(rng, n, cfg.degree_exponent), cap)

    # planted communities, nested in countries, sized by country share
    country_members = _groups(firm_country, len(countries))
    firm_comm = np.empty(n, dtype=np.int64)
    comm_country: list[int] = []
    total = sum(len(m) for m in country_members)
    for ci, members in enumerate(country_members):
        if not len(members):
            continue
        k = max(1, int(round(cfg.n_planted_communities * len(members) / total)))
        k = min(k, len(members))
        firm_comm[members] = len(comm_country) + rng.integers(0, k, size=len(members))
        comm_country.extend([ci] * k)
    n_comm = len(comm_country)
    comm_country_arr = np.array(comm_country)
    comm_members = _groups(firm_comm, n_comm)
    partners = []
    for g in range(n_comm):
        foreign = np.flatnonzero((comm_country_arr != comm_country_arr[g]) & np.array([len(m) > 0 for m in comm_members]))
        k = min(cfg.partners_per_community, len(foreign))
        partners.append(rng.choice(foreign, size=k, replace=False) if k else np.zeros(0, dtype=np.int64))

    if cfg.domestic_preference == 1.0 and cfg.n_edges > 0 and any(len(m) == 1 for m in country_members):
        raise GeneratorError("cannot satisfy: domestic_preference=1 with single-firm countries")

    comm_pool = [_Pool(m, supply_fit) if len(m) > 1 else None for m in comm_members]
    country_pool = [_Pool(m, supply_fit) if len(m) > 1 else None for m in country_members]
    global_pool = _Pool(np.arange(n), supply_fit)
    demand_pool = _Pool(np.arange(n), demand_fit)

    edges: dict[tuple[int, int], None] = {}
    stalls = 0
    while len(edges) < cfg.n_edges and stalls < 50:
        need = cfg.n_edges - len(edges)
        batch = int(need * 1.2) + 16
        cust = demand_pool.draw(rng, batch)
        dom = rng.random(batch) < cfg.domestic_preference
        loc = rng.random(batch) < np.where(dom, cfg.domestic_locality, cfg.community_locality)
        supp = np.full(batch, -1, dtype=np.int64)

        # domestic & local: own community
        for g, idx in _bucket(firm_comm[cust], dom & loc):
            pool = comm_pool[g] or country_pool[comm_country[g]]
            if pool is not None:
                supp[idx] = pool.draw(rng, len(idx))
        # domestic & non-local, or local fallback: own country
        for ci, idx in _bucket(firm_country[cust], dom & (supp < 0)):
            pool = country_pool[ci]
            if pool is not None:
                supp[idx] = pool.draw(rng, len(idx))
        # international & local: a partner community
        for g, idx in _bucket(firm_comm[cust], ~dom & loc):
            if len(partners[g]):
                pick = partners[g][rng.integers(0, len(partners[g]), size=len(idx))]
                for pg, sub in _bucket(pick, np.ones(len(idx), dtype=bool)):
                    supp[idx[sub]] = comm_pool[pg].draw(rng, len(sub)) if comm_pool[pg] else comm_members[pg][0]
        # everything left: any firm abroad (rejection sampling)
        rest = np.flatnonzero(supp < 0)
        for _ in range(20):
            if not len(rest):
                break
            supp[rest] = global_pool.draw(rng, len(rest))
            bad = firm_country[supp[rest]] == firm_country[cust[rest]]
            if cfg.domestic_preference < 1.0:
                rest = rest[bad]
            else:
                rest = rest[:0]
        ok = (supp >= 0) & (supp != cust)
        before = len(edges)
        for s, c in zip(supp[ok], cust[ok]):
            if len(edges) >= cfg.n_edges:
                break
            edges.setdefault((int(s), int(c)))
        stalls = stalls + 1 if len(edges) == before else 0

    width = len(str(n - 1))
    ids = [f"F{i:0{width}d}" for i in range(n)]
    pwidth = len(str(cfg.n_products - 1))
    pids = [f"P{j:0{pwidth}d}" for j in range(cfg.n_products)]
    products = [
        Product(pids[j], f"{industries[prod_industry[j]]} product {j}", industries[prod_industry[j]], bool(is_mining[j]))
        for j in range(cfg.n_products)
    ]
    firms = [
        Firm(ids[i], f"Firm {i}", countries[firm_country[i]], industries[firm_industry[i]],
             frozenset(pids[j] for j in portfolios[i]))
        for i in range(n)
    ]
    edge_list = [SupplyEdge(ids[s], ids[c]) for s, c in edges]
    return build_network(firms, edge_list, products), firm_comm


def _bucket(keys: np.ndarray, mask: np.ndarray):
    """Yield (key, positions) for the masked positions grouped by key."""
    pos = np.flatnonzero(mask)
    if not len(pos):
        return
    k = keys[pos]
    order = np.argsort(k, kind="stable")
    pos, k = pos[order], k[order]
    starts = np.flatnonzero(np.r_[True, k[1:] != k[:-1]])
    ends = np.r_[starts[1:], len(k)]
    for a, b in zip(starts, ends):
        yield int(k[a]), pos[a:b]


# -- calibration ---------------------------------------------------------------

# Reference values of the empirical EV network and default tolerances.
REFERENCE_TARGETS: dict[str, tuple[float, float]] = {
    "modularity": (0.57, 0.05),
    "clustering_coefficient": (0.026, 0.01),
    "avg_shortest_path": (4.57, 0.5),
    "domestic_international_ratio": (1.0, 0.10),  # relative tolerance
    "mean_products_per_firm": (5.0, 0.5),
}

_RELATIVE = {"domestic_international_ratio"}


@dataclass(frozen=True)
class CalibrationRow:
    target: float
    achieved: float | None
    tolerance: float
    within_tolerance: bool


@dataclass
class CalibrationReport:
    rows: dict[str, CalibrationRow]
    report: MetricReport

    @property
    def ok(self) -> bool:
        return all(r.within_tolerance for r in self.rows.values())


def _achieved(net: SupplyNetwork, report: MetricReport, name: str) -> float | None:
    if name == "domestic_international_ratio":
        if report.avg_international == 0:
            return None
        return report.avg_domestic / report.avg_international
    if name == "mean_products_per_firm":
        return sum(len(f.products) for f in net.firms.values()) / max(net.firm_count, 1)
    if name in MetricReport.field_names():
        return getattr(report, name)
    raise GeneratorError(f"unknown calibration target {name!r}")


def calibrate_check(
    net: SupplyNetwork,
    targets: Mapping[str, tuple[float, float]] = REFERENCE_TARGETS,
    seed: int = 0,
    path_mode: PathMode | str = PathMode(200),
    report: MetricReport | None = None,
) -> CalibrationReport:
    """Compare measured metrics against ``{name: (target, tolerance)}``.

    Tolerances are absolute except for ``domestic_international_ratio``
    (relative to the target).
    """
    for name in targets:
        if name not in _RELATIVE and name != "mean_products_per_firm" and name not in MetricReport.field_names():
            raise GeneratorError(f"unknown calibration target {name!r}")
    report = report or metric_report(net, seed=seed, path_mode=path_mode)
    rows = {}
    for name, (target, tol) in targets.items():
        value = _achieved(net, report, name)
        bound = tol * abs(target) if name in _RELATIVE else tol
        ok = value is not None and abs(value - target) <= bound
        rows[name] = CalibrationRow(target, value, tol, ok)
    return CalibrationReport(rows, report)
