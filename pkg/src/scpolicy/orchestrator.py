"""Seeded multi-iteration policy scenarios.

Seed derivation
---------------
Every random decision comes from ``child_seed(master_seed, iteration, purpose)``:
the first 8 bytes (big-endian) of ``sha256(f"{master_seed}/{iteration}/{purpose}")``
masked to 63 bits. Purposes in use:

* ``("baseline", "metrics")``  community detection / path sampling on the baseline
* ``(i, "selection")``         alternative-supplier sampling in iteration ``i``
* ``(i, "metrics")``           community detection / path sampling after iteration ``i``
* ``(0, "generate")``          synthetic network, unless the generator config pins a seed

Scenario documents are YAML::

    name: reshoring-american
    network:
      generator: {n_firms: 2000, n_edges: 6000}   # or
      # files: {firms: firms.csv, products: products.csv, edges: edges.csv}
      # dir: data/                                 # holding those three files
    scopes: builtin          # or a path to a scope document
    policy: reshoring
    acting: American          # cluster expression, e.g. "Low Risk + Medium Risk"
    risky: China              # country_plus_one only
    selection: all            # or sample:K
    iterations: 5
    master_seed: 0
    path_mode: sampled:200    # or exact

A document may instead hold ``scenarios: [...]`` (each entry merged over an
optional ``defaults:`` mapping) or ``suite: standard`` to expand the fifteen
standard cells over the ``defaults``. Relative paths resolve against the
document's directory.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np
import yaml

from scpolicy.errors import ScenarioError, ScPolicyError
from scpolicy.metrics import MetricReport, PathMode, metric_report
from scpolicy.network import SupplyNetwork
from scpolicy.policies import (
    Policy,
    PolicyOutcome,
    PolicyScope,
    SelectionStrategy,
    apply_policy,
    rank_vulnerable_industries,
    rank_vulnerable_products,
)
from scpolicy.scopes import ScopeSet, builtin_scopes, country_name, load_scopes
from scpolicy.synth import GeneratorConfig, generate

_MASK63 = (1 << 63) - 1


def child_seed(master_seed: int, iteration: int | str, purpose: str) -> int:
    digest = hashlib.sha256(f"{master_seed}/{iteration}/{purpose}".encode()).digest()
    return int.from_bytes(digest[:8], "big") & _MASK63


# -- network sources -----------------------------------------------------------

def _mtime(path: str) -> int | None:
    try:
        return Path(path).stat().st_mtime_ns
    except OSError:
        return None


@dataclass(frozen=True)
class NetworkSource:
    """Either three table files or a generator config (``seed_pinned`` keeps cfg.seed)."""

    files: tuple[str, str, str] | None = None
    generator: GeneratorConfig | None = None
    seed_pinned: bool = False

    def __post_init__(self):
        if (self.files is None) == (self.generator is None):
            raise ScenarioError("network source needs exactly one of files or generator")

    def cache_key(self, master_seed: int) -> tuple:
        if self.files is not None:
            return ("files",) + tuple((str(Path(f).resolve()), _mtime(f)) for f in self.files)
        cfg = self.resolved_generator(master_seed)
        return ("generator", json.dumps(cfg.to_dict(), sort_keys=True))

    def resolved_generator(self, master_seed: int) -> GeneratorConfig:
        if self.seed_pinned:
            return self.generator
        return dataclasses.replace(self.generator, seed=child_seed(master_seed, 0, "generate"))

    def describe(self, master_seed: int) -> dict:
        if self.files is not None:
            return {"files": dict(zip(("firms", "products", "edges"), self.files))}
        return {"generator": self.resolved_generator(master_seed).to_dict()}

    def load(self, master_seed: int) -> SupplyNetwork:
        if self.files is not None:
            from scpolicy.dataio import load_tables

            net, _ = load_tables(*self.files)
            return net
        return generate(self.resolved_generator(master_seed))


@dataclass(frozen=True)
class Scenario:
    name: str
    network_source: NetworkSource
    scope: PolicyScope
    scope_set: str = "builtin"
    acting_expr: str = ""
    risky_expr: str | None = None
    selection: SelectionStrategy = SelectionStrategy()
    iterations: int = 5
    master_seed: int = 0
    path_mode: PathMode = PathMode(200)

    def __post_init__(self):
        if not self.name:
            raise ScenarioError("scenario needs a name")
        if self.iterations < 1:
            raise ScenarioError(f"{self.name}: iterations must be >= 1")

    @property
    def policy(self) -> Policy:
        return self.scope.policy

    def describe(self) -> dict:
        return {
            "name": self.name,
            "policy": self.policy.value,
            "scope_set": self.scope_set,
            "acting": self.acting_expr or self.scope.acting.name,
            "acting_countries": sorted(self.scope.acting.countries),
            "risky": self.risky_expr,
            "risky_countries": sorted(self.scope.risky.countries) if self.scope.risky else None,
            "selection": str(self.selection),
            "iterations": self.iterations,
            "master_seed": self.master_seed,
            "path_mode": str(self.path_mode),
            "network": self.network_source.describe(self.master_seed),
        }


def make_scenario(
    name: str,
    policy: Policy | str,
    acting: str,
    risky: str | None = None,
    *,
    network_source: NetworkSource,
    scopes: ScopeSet | None = None,
    scope_set: str = "builtin",
    selection: SelectionStrategy | str = "all",
    iterations: int = 5,
    master_seed: int = 0,
    path_mode: PathMode | str = PathMode(200),
) -> Scenario:
    scopes = scopes or builtin_scopes()
    try:
        policy = Policy(policy)
    except ValueError:
        raise ScenarioError(f"{name}: unknown policy {policy!r}") from None
    try:
        acting_c = scopes.resolve_expr(acting, name=acting)
        risky_c = scopes.resolve_expr(risky, name=risky) if risky else None
        scope = PolicyScope(policy, acting_c, risky_c)
    except ScPolicyError as exc:
        raise ScenarioError(f"{name}: {exc}") from exc
    return Scenario(
        name=name,
        network_source=network_source,
        scope=scope,
        scope_set=scope_set,
        acting_expr=acting,
        risky_expr=risky,
        selection=SelectionStrategy.parse(selection),
        iterations=int(iterations),
        master_seed=int(master_seed),
        path_mode=PathMode.parse(path_mode),
    )


# (acting, risky for country_plus_one) per standard cluster
STANDARD_CLUSTERS: tuple[tuple[str, str, str], ...] = (
    ("American", "American", "China"),
    ("European", "European", "China"),
    ("Asian", "Asian - China", "China"),
    ("Low Risk", "Low Risk", "High Risk"),
    ("Low Risk + Medium Risk", "Low Risk + Medium Risk", "High Risk"),
)


def standard_suite(network_source: NetworkSource, **kwargs) -> list[Scenario]:
    """The 5 clusters x 3 policies grid. Country+1 acts from the cluster minus the risky set."""
    out = []
    for cluster, cp1_acting, risky in STANDARD_CLUSTERS:
        for policy in Policy:
            if policy is Policy.COUNTRY_PLUS_ONE:
                acting, risky_expr = cp1_acting, risky
            else:
                acting, risky_expr = cluster, None
            out.append(make_scenario(f"{policy.value}:{cluster}", policy, acting, risky_expr,
                                     network_source=network_source, **kwargs))
    return out


# -- scenario documents --------------------------------------------------------

_SCENARIO_KEYS = {"name", "network", "scopes", "policy", "acting", "risky", "selection",
                  "iterations", "master_seed", "path_mode"}


def _source_from(doc: Any, base: Path) -> NetworkSource:
    if doc is None:
        return NetworkSource(generator=GeneratorConfig())
    if not isinstance(doc, Mapping) or len(doc) != 1:
        raise ScenarioError("network must be a mapping with one of: generator, files, dir")
    (kind, value), = doc.items()
    if kind == "generator":
        value = value or {}
        if isinstance(value, str):
            path = base / value
            gdoc = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
            value = gdoc.get("generator", gdoc)
        return NetworkSource(generator=GeneratorConfig.from_dict(value), seed_pinned="seed" in value)
    if kind == "files":
        try:
            files = tuple(str(base / value[k]) for k in ("firms", "products", "edges"))
        except (KeyError, TypeError):
            raise ScenarioError("network.files needs firms, products and edges") from None
        return NetworkSource(files=files)
    if kind == "dir":
        d = base / value
        return NetworkSource(files=tuple(str(d / f"{t}.csv") for t in ("firms", "products", "edges")))
    raise ScenarioError(f"unknown network source {kind!r}")


def _scopes_from(ref: Any, base: Path) -> tuple[ScopeSet, str]:
    if ref is None or ref == "builtin":
        return builtin_scopes(), "builtin"
    if isinstance(ref, Mapping):
        return load_scopes(ref), "inline"
    return load_scopes(base / ref), str(ref)


def _common(doc: Mapping, base: Path) -> dict:
    scopes, scope_ref = _scopes_from(doc.get("scopes"), base)
    return dict(
        network_source=_source_from(doc.get("network"), base),
        scopes=scopes,
        scope_set=scope_ref,
        selection=str(doc.get("selection", "all")),
        iterations=doc.get("iterations", 5),
        master_seed=doc.get("master_seed", 0),
        path_mode=str(doc.get("path_mode", "sampled:200")),
    )


def scenarios_from_doc(doc: Mapping, base: str | Path = ".") -> list[Scenario]:
    base = Path(base)
    if not isinstance(doc, Mapping):
        raise ScenarioError("scenario document must be a mapping")
    defaults = dict(doc.get("defaults") or {})
    if "suite" in doc:
        if doc["suite"] != "standard":
            raise ScenarioError(f"unknown suite {doc['suite']!r}; only 'standard' is built in")
        return standard_suite(**_common(defaults, base))
    entries = doc["scenarios"] if "scenarios" in doc else [doc]
    out = []
    for entry in entries:
        merged = {**defaults, **entry}
        unknown = set(merged) - _SCENARIO_KEYS
        if unknown:
            raise ScenarioError(f"unknown scenario keys: {sorted(unknown)}")
        for key in ("name", "policy", "acting"):
            if key not in merged:
                raise ScenarioError(f"scenario missing {key!r}")
        out.append(make_scenario(merged["name"], merged["policy"], merged["acting"], merged.get("risky"),
                                 **_common(merged, base)))
    names = [s.name for s in out]
    if len(set(names)) != len(names):
        raise ScenarioError("scenario names must be unique")
    return out


def load_scenarios(path: str | Path) -> list[Scenario]:
    path = Path(path)
    try:
        doc = yaml.safe_load(path.read_text(encoding="utf-8"))
    except (OSError, yaml.YAMLError) as exc:
        raise ScenarioError(f"cannot read scenario file {path}: {exc}") from exc
    return scenarios_from_doc(doc or {}, path.parent)


# -- results -------------------------------------------------------------------

@dataclass(frozen=True)
class Distribution:
    mean: float | None
    std: float | None
    min: float | None
    q1: float | None
    median: float | None
    q3: float | None
    max: float | None

    @classmethod
    def of(cls, values: Sequence[float | None]) -> Distribution:
        """Population std and linearly interpolated quartiles; undefined if any sample is."""
        if not values or any(v is None for v in values):
            return cls(*(None,) * 7)
        a = np.asarray(values, dtype=float)
        q1, med, q3 = np.percentile(a, [25, 50, 75])
        return cls(float(a.mean()), float(a.std()), float(a.min()), float(q1), float(med), float(q3), float(a.max()))

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


def affected_tables(outcome: PolicyOutcome, k: int = 5) -> dict[str, list[dict]]:
    """Row dicts for the affected-by-country/industry and top-k tables."""
    products = outcome.network_before.products
    return {
        "affected_by_country": [
            {"country": c, "country_name": country_name(c), "companies": n}
            for c, n in outcome.affected_by_country.items()
        ],
        "affected_by_industry": [{"industry": i, "products": n} for i, n in outcome.affected_by_industry.items()],
        "top_industries": [
            {"rank": r, "industry": i, "products": n}
            for r, (i, n) in enumerate(rank_vulnerable_industries(outcome, k), 1)
        ],
        "top_products": [
            {"rank": r, "product_id": p, "category": products[p].category, "industry": products[p].industry,
             "is_mining": products[p].is_mining, "customers": n}
            for r, (p, n) in enumerate(rank_vulnerable_products(outcome, k), 1)
        ],
    }


@dataclass(frozen=True)
class IterationSummary:
    index: int
    selection_seed: int
    metrics_seed: int
    report: MetricReport
    ns_products: int
    ns_companies: int
    added_edges: int
    removed_edges: int
    tables: dict[str, list[dict]]

    def as_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["report"] = self.report.as_dict()
        return d


COUNT_FIELDS = ("ns_products", "ns_companies", "added_edges", "removed_edges")


@dataclass(frozen=True)
class AggregateResult:
    scenario: dict
    baseline: MetricReport
    baseline_seed: int
    distributions: dict[str, Distribution]
    mean_ns_products: float
    mean_ns_companies: float
    ns_products_union: tuple[str, ...]
    ns_products_intersection: tuple[str, ...]
    iterations: tuple[IterationSummary, ...]

    @property
    def name(self) -> str:
        return self.scenario["name"]

    def mean_report(self) -> MetricReport:
        return MetricReport(**{k: self.distributions[k].mean for k in MetricReport.field_names()})

    def as_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "baseline": self.baseline.as_dict(),
            "baseline_seed": self.baseline_seed,
            "distributions": {k: v.as_dict() for k, v in self.distributions.items()},
            "mean_ns_products": self.mean_ns_products,
            "mean_ns_companies": self.mean_ns_companies,
            "ns_products_union": list(self.ns_products_union),
            "ns_products_intersection": list(self.ns_products_intersection),
            "iterations": [it.as_dict() for it in self.iterations],
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2, sort_keys=True, ensure_ascii=False) + "\n"


@dataclass(frozen=True)
class ScenarioFailure:
    name: str
    error: str

    def as_dict(self) -> dict:
        return {"name": self.name, "error": self.error}


# -- running -------------------------------------------------------------------

class _Baselines:
    """Per-process cache so scenarios over one network share load and baseline metrics."""

    def __init__(self):
        self.networks: dict[tuple, SupplyNetwork] = {}
        self.reports: dict[tuple, MetricReport] = {}

    def network(self, sc: Scenario) -> SupplyNetwork:
        key = sc.network_source.cache_key(sc.master_seed)
        if key not in self.networks:
            self.networks.clear()
            self.reports.clear()
            self.networks[key] = sc.network_source.load(sc.master_seed)
        return self.networks[key]

    def report(self, sc: Scenario, net: SupplyNetwork, seed: int) -> MetricReport:
        key = (sc.network_source.cache_key(sc.master_seed), seed, str(sc.path_mode))
        if key not in self.reports:
            self.reports[key] = metric_report(net, seed=seed, path_mode=sc.path_mode)
        return self.reports[key]


_CACHE = _Baselines()


def run_scenario(sc: Scenario, *, cache: bool = True, top_k: int = 5) -> AggregateResult:
    """Baseline once, then policy + metrics per iteration, aggregated in iteration order."""
    store = _CACHE if cache else _Baselines()
    try:
        net = store.network(sc)
        baseline_seed = child_seed(sc.master_seed, "baseline", "metrics")
        baseline = store.report(sc, net, baseline_seed)
        summaries = []
        ns_sets = []
        for i in range(sc.iterations):
            sel_seed = child_seed(sc.master_seed, i, "selection")
            met_seed = child_seed(sc.master_seed, i, "metrics")
            outcome = apply_policy(net, sc.scope, sc.selection, sel_seed)
            report = metric_report(outcome.network_after, seed=met_seed, path_mode=sc.path_mode)
            ns_sets.append(outcome.ns_products)
            summaries.append(IterationSummary(
                index=i,
                selection_seed=sel_seed,
                metrics_seed=met_seed,
                report=report,
                ns_products=len(outcome.ns_products),
                ns_companies=len(outcome.ns_companies),
                added_edges=len(outcome.added_edges),
                removed_edges=len(outcome.removed_edges),
                tables=affected_tables(outcome, top_k),
            ))
    except ScPolicyError as exc:
        raise ScenarioError(f"scenario {sc.name!r}: {exc}") from exc

    dists = {name: Distribution.of([getattr(s.report, name) for s in summaries]) for name in MetricReport.field_names()}
    for name in COUNT_FIELDS:
        dists[name] = Distribution.of([getattr(s, name) for s in summaries])
    return AggregateResult(
        scenario=sc.describe(),
        baseline=baseline,
        baseline_seed=baseline_seed,
        distributions=dists,
        mean_ns_products=dists["ns_products"].mean,
        mean_ns_companies=dists["ns_companies"].mean,
        ns_products_union=tuple(sorted(frozenset().union(*ns_sets))),
        ns_products_intersection=tuple(sorted(frozenset.intersection(*ns_sets))),
        iterations=tuple(summaries),
    )


def _run_safe(sc: Scenario) -> AggregateResult | ScenarioFailure:
    try:
        return run_scenario(sc)
    except ScPolicyError as exc:
        return ScenarioFailure(sc.name, str(exc))


def run_suite(scenarios: Sequence[Scenario], workers: int = 1) -> list[AggregateResult | ScenarioFailure]:
    """Results in input order; a failing scenario yields a ScenarioFailure in its slot."""
    scenarios = list(scenarios)
    if not scenarios:
        return []
    if workers <= 1:
        return [_run_safe(sc) for sc in scenarios]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_safe, scenarios))


# -- report bundle -------------------------------------------------------------

def slug(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9]+", "_", name).strip("_").lower() or "scenario"


def write_results(results: Sequence[AggregateResult | ScenarioFailure], out: str | Path) -> dict[str, Any]:
    """Write the report bundle under ``out``.

    Top level: ``metric_table`` (baseline + one mean column per scenario),
    ``summary`` (NS counts per scenario), ``failures.json``. One directory per
    scenario with ``metric_table``, ``affected_by_country``,
    ``affected_by_industry``, ``top_industries``, ``top_products``,
    ``boxplot`` and ``aggregate.json``.
    """
    from scpolicy.dataio import write_affected, write_boxplot_data, write_json, write_metric_table, write_summary

    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    ok = [r for r in results if isinstance(r, AggregateResult)]
    failures = [r for r in results if isinstance(r, ScenarioFailure)]
    written: dict[str, Any] = {"scenarios": {}}
    if ok:
        columns: list[tuple[str, MetricReport]] = []
        baselines = {json.dumps(r.baseline.as_dict(), sort_keys=True) for r in ok}
        shared = len(baselines) == 1
        if shared:
            columns.append(("baseline", ok[0].baseline))
        for r in ok:
            if not shared:
                columns.append((f"baseline {r.name}", r.baseline))
            columns.append((r.name, r.mean_report()))
        written["metric_table"] = write_metric_table(columns, out / "metric_table.csv")
        written["summary"] = write_summary(ok, out / "summary.csv")
    used: set[str] = set()
    for r in ok:
        d = slug(r.name)
        while d in used:
            d += "_"
        used.add(d)
        sdir = out / d
        files = {"metric_table": write_metric_table([("baseline", r.baseline), (r.name, r.mean_report())],
                                                    sdir / "metric_table.csv")}
        files.update(write_affected(r, sdir))
        files["boxplot"] = write_boxplot_data(r, sdir / "boxplot.csv")
        (sdir / "aggregate.json").write_text(r.to_json(), encoding="utf-8")
        files["aggregate"] = sdir / "aggregate.json"
        written["scenarios"][r.name] = files
    write_json([f.as_dict() for f in failures], out / "failures.json")
    written["failures"] = out / "failures.json"
    return written
