"""Reading and writing network tables and reports.

Table schemas (comma separated, UTF-8, header row, RFC 4180 quoting):

``firms.csv``     id, name, country, industry, market_cap, product_ids
``products.csv``  id, category, industry, is_mining
``edges.csv``     supplier_id, customer_id, product_ids, weight

``product_ids`` cells hold ``;``-separated ids; ``market_cap``, ``weight`` and
the edge ``product_ids`` may be empty. Countries are names or alpha-2 codes.

Every report table is written as ``<name>.csv`` plus a ``<name>.json`` mirror.
"""

from __future__ import annotations

import csv
import json
import re
import string
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

from scpolicy.countries import to_code
from scpolicy.errors import IngestError
from scpolicy.metrics import METRIC_LABELS, MetricReport
from scpolicy.network import Firm, Product, SupplyEdge, SupplyNetwork, build_network
from scpolicy.policies import PolicyOutcome

FIRM_COLUMNS = ("id", "name", "country", "industry", "market_cap", "product_ids")
PRODUCT_COLUMNS = ("id", "category", "industry", "is_mining")
EDGE_COLUMNS = ("supplier_id", "customer_id", "product_ids", "weight")
_REQUIRED = {
    "firms": ("id", "country", "industry"),
    "products": ("id", "category", "industry"),
    "edges": ("supplier_id", "customer_id"),
}
_TRUE = {"true", "1", "yes", "y", "t"}
_FALSE = {"false", "0", "no", "n", "f", ""}


@dataclass
class TableStats:
    rows_read: int = 0
    rows_rejected: int = 0

    @property
    def rows_accepted(self) -> int:
        return self.rows_read - self.rows_rejected


@dataclass
class IngestReport:
    tables: dict[str, TableStats] = field(default_factory=lambda: {t: TableStats() for t in _REQUIRED})
    reject_reasons: list[tuple[str, int, str]] = field(default_factory=list)  # (table, line, reason)
    duplicate_edges: int = 0
    firms: int = 0
    products: int = 0
    edges: int = 0

    def reject(self, table: str, line: int, reason: str):
        self.tables[table].rows_rejected += 1
        self.reject_reasons.append((table, line, reason))

    @property
    def rows_read(self) -> int:
        return sum(t.rows_read for t in self.tables.values())

    @property
    def rows_rejected(self) -> int:
        return sum(t.rows_rejected for t in self.tables.values())

    def to_dict(self) -> dict:
        return {
            "rows_read": self.rows_read,
            "rows_rejected": self.rows_rejected,
            "tables": {k: {"rows_read": v.rows_read, "rows_accepted": v.rows_accepted, "rows_rejected": v.rows_rejected}
                       for k, v in self.tables.items()},
            "reject_reasons": [{"table": t, "line": ln, "reason": r} for t, ln, r in self.reject_reasons],
            "duplicate_edges": self.duplicate_edges,
            "firms": self.firms,
            "products": self.products,
            "edges": self.edges,
        }


def _rows(path: str | Path, table: str):
    """Yield (line number, row dict); header is line 1."""
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise IngestError(f"cannot open {table} file {path}: {exc}") from exc
    with fh:
        reader = csv.DictReader(fh)
        try:
            header = reader.fieldnames
        except (csv.Error, UnicodeDecodeError) as exc:
            raise IngestError(f"unparseable {table} file {path}: {exc}") from exc
        if header is None:
            raise IngestError(f"{table} file {path} is empty")
        missing = [c for c in _REQUIRED[table] if c not in header]
        if missing:
            raise IngestError(f"{table} file {path} is missing required column(s): {missing}")
        line = reader.line_num
        try:
            for row in reader:
                yield line + 1, row
                line = reader.line_num
        except (csv.Error, UnicodeDecodeError) as exc:
            raise IngestError(f"unparseable {table} file {path} near line {reader.line_num}: {exc}") from exc


def _cell(row: dict, key: str) -> str:
    value = row.get(key)
    return "" if value is None else value.strip()


def _ids(text: str) -> list[str]:
    return [t.strip() for t in text.split(";") if t.strip()]


def load_tables(firms_file, products_file, edges_file) -> tuple[SupplyNetwork, IngestReport]:
    """Build a network from the three tables; malformed rows are rejected with a reason."""
    report = IngestReport()

    products: dict[str, Product] = {}
    for line, row in _rows(products_file, "products"):
        report.tables["products"].rows_read += 1
        pid, category, industry = _cell(row, "id"), _cell(row, "category"), _cell(row, "industry")
        flag = _cell(row, "is_mining").lower()
        if not pid or not category or not industry:
            report.reject("products", line, "missing required value")
        elif pid in products:
            report.reject("products", line, "duplicate product id")
        elif flag not in _TRUE | _FALSE:
            report.reject("products", line, f"bad is_mining {flag!r}")
        else:
            products[pid] = Product(pid, category, industry, flag in _TRUE)

    firms: dict[str, Firm] = {}
    for line, row in _rows(firms_file, "firms"):
        report.tables["firms"].rows_read += 1
        fid = _cell(row, "id")
        raw_country = _cell(row, "country")
        country = to_code(raw_country) if raw_country else None
        cap_text = _cell(row, "market_cap")
        portfolio = _ids(_cell(row, "product_ids"))
        if not fid or not _cell(row, "industry"):
            report.reject("firms", line, "missing required value")
            continue
        if fid in firms:
            report.reject("firms", line, "duplicate firm id")
            continue
        if country is None:
            report.reject("firms", line, f"unknown country {raw_country!r}")
            continue
        cap = None
        if cap_text:
            try:
                cap = float(cap_text)
            except ValueError:
                report.reject("firms", line, f"bad market_cap {cap_text!r}")
                continue
            if cap < 0:
                report.reject("firms", line, "negative market_cap")
                continue
        unknown = [p for p in portfolio if p not in products]
        if unknown:
            report.reject("firms", line, f"unknown product {unknown[0]!r}")
            continue
        firms[fid] = Firm(fid, _cell(row, "name") or fid, country, _cell(row, "industry"), frozenset(portfolio), cap)

    edges: list[SupplyEdge] = []
    edge_lines: list[int] = []
    for line, row in _rows(edges_file, "edges"):
        report.tables["edges"].rows_read += 1
        weight_text = _cell(row, "weight")
        weight = None
        if weight_text:
            try:
                weight = float(weight_text)
            except ValueError:
                report.reject("edges", line, f"bad weight {weight_text!r}")
                continue
            if weight < 0:
                report.reject("edges", line, "negative weight")
                continue
        ids = _ids(_cell(row, "product_ids"))
        edges.append(SupplyEdge(_cell(row, "supplier_id"), _cell(row, "customer_id"), frozenset(ids) if ids else None, weight))
        edge_lines.append(line)

    net = build_network(firms.values(), edges, products.values(), strict=False)
    for index, reason in net.report.rejected:
        report.reject("edges", edge_lines[index], reason)
    report.duplicate_edges = net.report.duplicates
    report.firms, report.products, report.edges = net.firm_count, len(net.products), net.edge_count
    return net, report


def load_dir(directory: str | Path) -> tuple[SupplyNetwork, IngestReport]:
    d = Path(directory)
    return load_tables(d / "firms.csv", d / "products.csv", d / "edges.csv")


def _num(x: float | None) -> str:
    return "" if x is None else repr(x)


def export_tables(net: SupplyNetwork, directory: str | Path) -> dict[str, Path]:
    """Write firms.csv, products.csv and edges.csv (sorted, so output is deterministic)."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    paths = {name: d / f"{name}.csv" for name in ("firms", "products", "edges")}
    with open(paths["products"], "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PRODUCT_COLUMNS)
        for pid in sorted(net.products):
            p = net.products[pid]
            w.writerow([p.id, p.category, p.industry, "true" if p.is_mining else "false"])
    with open(paths["firms"], "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(FIRM_COLUMNS)
        for fid in sorted(net.firms):
            f = net.firms[fid]
            w.writerow([f.id, f.name, f.country, f.industry, _num(f.market_cap), ";".join(sorted(f.products))])
    with open(paths["edges"], "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(EDGE_COLUMNS)
        for key in sorted(net.edges):
            e = net.edges[key]
            prods = "" if e.products is None else ";".join(sorted(e.products))
            w.writerow([e.supplier, e.customer, prods, _num(e.weight)])
    return paths


# -- product name mapping ------------------------------------------------------

_PUNCT = re.compile(f"[{re.escape(string.punctuation)}]")


def normalize_name(text: str) -> str:
    """Lowercase, punctuation to spaces, collapse whitespace."""
    return " ".join(_PUNCT.sub(" ", text.lower()).split())


@dataclass(frozen=True)
class Category:
    name: str
    industry: str
    is_mining: bool = False


class CategoryCatalog:
    def __init__(self, categories: Iterable[Category]):
        self.categories = list(categories)
        if not self.categories:
            raise IngestError("category catalog is empty")
        self._by_norm: dict[str, Category] = {}
        for c in self.categories:
            key = normalize_name(c.name)
            if key in self._by_norm:
                raise IngestError(f"duplicate category after normalization: {c.name!r}")
            self._by_norm[key] = c
        self._tokens = {key: frozenset(key.split()) for key in self._by_norm}

    def __len__(self) -> int:
        return len(self.categories)

    def __getitem__(self, name: str) -> Category:
        return self._by_norm[normalize_name(name)]

    def map(self, raw: str, threshold: float = 0.5) -> str | None:
        if not 0 < threshold <= 1:
            raise IngestError("threshold must lie in (0, 1]")
        key = normalize_name(raw)
        if key in self._by_norm:
            return self._by_norm[key].name
        tokens = frozenset(key.split())
        if not tokens:
            return None
        best = None
        for cand, ctoks in self._tokens.items():
            score = len(tokens & ctoks) / len(tokens | ctoks)
            if score < threshold:
                continue
            rank = (-score, len(cand), cand)
            if best is None or rank < best[0]:
                best = (rank, cand)
        return None if best is None else self._by_norm[best[1]].name


def map_product_name(raw: str, catalog: CategoryCatalog, threshold: float = 0.5) -> str | None:
    """Canonical category for a raw product name, or None when nothing scores >= threshold."""
    return catalog.map(raw, threshold)


def load_catalog(path: str | Path) -> CategoryCatalog:
    cats = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            cats.append(Category(row["category"].strip(), row["industry"].strip(),
                                 row.get("is_mining", "").strip().lower() in _TRUE))
    return CategoryCatalog(cats)


def default_catalog() -> CategoryCatalog:
    """Small demonstrative catalog shipped with the package."""
    with resources.as_file(resources.files("scpolicy") / "data" / "categories.csv") as path:
        return load_catalog(path)


# -- report writers ------------------------------------------------------------

def _write_pair(rows: Sequence[Sequence], header: Sequence[str], doc, out: Path) -> Path:
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    write_json(doc, out.with_suffix(".json"))
    return out


def write_json(doc, path: Path):
    path.write_text(json.dumps(doc, indent=2, sort_keys=True, ensure_ascii=False) + "\n", encoding="utf-8")


def fmt(value) -> str:
    if value is None:
        return "undefined"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_metric_table(reports: Sequence[tuple[str, MetricReport]], out: str | Path) -> Path:
    """One metric per row, one labelled report per column."""
    if not reports:
        raise IngestError("no reports to write")
    out = Path(out)
    header = ["metric", "label"] + [label for label, _ in reports]
    rows = [[name, METRIC_LABELS[name]] + [fmt(getattr(r, name)) for _, r in reports] for name in MetricReport.field_names()]
    doc = {"columns": [label for label, _ in reports], "metrics": {label: r.as_dict() for label, r in reports}}
    return _write_pair(rows, header, doc, out)


def write_affected(outcome, directory: str | Path, k: int = 5) -> dict[str, Path]:
    """Affected-by-country/industry tables plus top-k vulnerable industries and products.

    ``outcome`` is a PolicyOutcome or an aggregated scenario; the latter uses its
    first iteration (non-substitutability does not depend on the seed).
    """
    from scpolicy.orchestrator import affected_tables

    if isinstance(outcome, PolicyOutcome):
        tables = affected_tables(outcome, k)
    else:
        tables = outcome.iterations[0].tables
    d = Path(directory)
    paths = {}
    for name, columns in _AFFECTED_COLUMNS.items():
        rows = tables[name]
        csv_rows = [[_cell_text(r[c]) for c in columns] for r in rows]
        paths[name] = _write_pair(csv_rows, columns, rows, d / f"{name}.csv")
    return paths


_AFFECTED_COLUMNS = {
    "affected_by_country": ("country", "country_name", "companies"),
    "affected_by_industry": ("industry", "products"),
    "top_industries": ("rank", "industry", "products"),
    "top_products": ("rank", "product_id", "category", "industry", "is_mining", "customers"),
}


def _cell_text(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    return fmt(v)


SUMMARY_COLUMNS = ("scenario", "policy", "iterations", "mean_ns_products", "mean_ns_companies",
                   "ns_products_union", "ns_products_intersection", "mean_added_edges", "mean_removed_edges")


def write_summary(results, out: str | Path) -> Path:
    """Per-scenario non-substitutability counts and rewiring volume."""
    if not results:
        raise IngestError("no results to write")
    docs = []
    for r in results:
        docs.append({
            "scenario": r.name,
            "policy": r.scenario["policy"],
            "iterations": len(r.iterations),
            "mean_ns_products": r.mean_ns_products,
            "mean_ns_companies": r.mean_ns_companies,
            "ns_products_union": len(r.ns_products_union),
            "ns_products_intersection": len(r.ns_products_intersection),
            "mean_added_edges": r.distributions["added_edges"].mean,
            "mean_removed_edges": r.distributions["removed_edges"].mean,
        })
    rows = [[_cell_text(d[c]) for c in SUMMARY_COLUMNS] for d in docs]
    return _write_pair(rows, SUMMARY_COLUMNS, docs, Path(out))


BOXPLOT_COLUMNS = ("metric", "min", "q1", "median", "q3", "max")


def write_boxplot_data(agg, out: str | Path) -> Path:
    """(metric, min, q1, median, q3, max) per metric of an aggregated scenario."""
    if not agg.distributions:
        raise IngestError("no distributions to write")
    rows = []
    doc = {}
    for name, dist in agg.distributions.items():
        rows.append([name] + [fmt(getattr(dist, c)) for c in BOXPLOT_COLUMNS[1:]])
        doc[name] = dist.as_dict()
    return _write_pair(rows, BOXPLOT_COLUMNS, doc, Path(out))
