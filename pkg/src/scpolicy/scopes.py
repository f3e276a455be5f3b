"""Named country clusters (geographical and geopolitical scopes).

Scope documents are YAML (JSON works too, being a YAML subset)::

    kind: custom            # geographical | geopolitical | custom
    clusters:
      EU-mini: [Germany, FR]
      Nordics: [Denmark, Finland, Norway, Sweden]

Countries may be given by name or alpha-2 code; they are stored as codes.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

import yaml

from scpolicy.countries import CODE_NAMES, to_code
from scpolicy.errors import ScopeError

log = logging.getLogger(__name__)

KINDS = ("geographical", "geopolitical", "custom")
RISK_TIERS = ("Low Risk", "Medium Risk", "High Risk")


@dataclass(frozen=True)
class CountryCluster:
    name: str
    countries: frozenset[str]

    def __post_init__(self):
        if not isinstance(self.countries, frozenset):
            object.__setattr__(self, "countries", frozenset(self.countries))
        if not self.countries:
            raise ScopeError(f"cluster {self.name!r} has no countries")

    def __len__(self) -> int:
        return len(self.countries)

    def __contains__(self, code: str) -> bool:
        return code in self.countries


def union_cluster(a: CountryCluster, b: CountryCluster, name: str) -> CountryCluster:
    return CountryCluster(name, a.countries | b.countries)


@dataclass(frozen=True)
class ScopeSet:
    clusters: Mapping[str, CountryCluster]
    kind: str = "custom"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ScopeError(f"unknown scope kind {self.kind!r}")
        for key, cluster in self.clusters.items():
            if key != cluster.name:
                raise ScopeError(f"cluster key {key!r} does not match name {cluster.name!r}")
        if self.kind == "geopolitical":
            missing = [t for t in RISK_TIERS if t not in self.clusters]
            if missing:
                raise ScopeError(f"geopolitical scope set lacks tiers: {missing}")

    def names(self) -> list[str]:
        return list(self.clusters)

    def resolve(self, name: str) -> CountryCluster:
        try:
            return self.clusters[name]
        except KeyError:
            raise ScopeError(f"unknown cluster {name!r}; known: {sorted(self.clusters)}") from None

    def resolve_expr(self, expr: str, name: str | None = None) -> CountryCluster:
        """Resolve ``"Low Risk + Medium Risk"`` or ``"Asian - China"``.

        Terms are cluster names or single countries, joined by `` + `` (union)
        and `` - `` (difference), evaluated left to right.
        """
        tokens = _split_expr(expr)
        codes: set[str] = set()
        op = "+"
        for i, tok in enumerate(tokens):
            if i % 2 == 1:
                op = tok
                continue
            term = self._term(tok)
            codes = codes | term if op == "+" else codes - term
        if not codes:
            raise ScopeError(f"scope expression {expr!r} is empty")
        return CountryCluster(name or expr, frozenset(codes))

    def _term(self, tok: str) -> frozenset[str]:
        if tok in self.clusters:
            return self.clusters[tok].countries
        code = to_code(tok)
        if code is None:
            raise ScopeError(f"unknown cluster or country {tok!r}")
        return frozenset({code})

    def tier_of(self, code: str) -> str | None:
        for tier in RISK_TIERS:
            if tier in self.clusters and code in self.clusters[tier]:
                return tier
        return None

    def all_countries(self) -> frozenset[str]:
        out: set[str] = set()
        for c in self.clusters.values():
            out |= c.countries
        return frozenset(out)


def _split_expr(expr: str) -> list[str]:
    tokens: list[str] = []
    buf = expr
    while True:
        cut = [(buf.find(sep), sep) for sep in (" + ", " - ") if buf.find(sep) >= 0]
        if not cut:
            tokens.append(buf.strip())
            break
        pos, sep = min(cut)
        tokens.append(buf[:pos].strip())
        tokens.append(sep.strip())
        buf = buf[pos + len(sep):]
    if any(not t for t in tokens):
        raise ScopeError(f"malformed scope expression {expr!r}")
    return tokens


# Country lists exactly as printed in the source table, duplicates included.
_GEOPOLITICAL = {
    "Low Risk": [
        "Australia", "Belgium", "Canada", "Denmark", "Finland", "France", "Germany",
        "Ireland", "Italy", "Japan", "Netherlands", "New Zealand", "Norway",
        "South Korea", "Spain", "Sweden", "Taiwan", "United Kingdom", "United States",
    ],
    "Medium Risk": [
        "Algeria", "Angola", "Argentina", "Aruba", "Austria", "Azerbaijan", "Bahrain",
        "Bangladesh", "Bermuda", "Bhutan", "Bolivia", "Bosnia-Herzegovina", "Brazil",
        "Bulgaria", "Burkina Faso", "Cameroon", "Cayman Islands", "Chad", "Chile",
        "Colombia", "Costa Rica", "Croatia", "Curaçao", "Cyprus", "Czech Republic",
        "Czechia", "Côte d'Ivoire", "Dominica", "Dominican Republic", "Ecuador", "Egypt",
        "El Salvador", "Estonia", "Ethiopia", "Fiji", "Ghana",
        "Ghana", "Greece", "Guatemala", "Guinea", "Guyana", "Honduras", "Hong Kong",
        "Hungary", "Iceland", "India", "Indonesia", "Israel", "Jamaica", "Jordan",
        "Kazakhstan", "Kenya", "Kuwait", "Kyrgyzstan", "Laos", "Latvia", "Liberia",
        "Liechtenstein", "Lithuania", "Luxembourg", "Madagascar", "Malaysia", "Mali",
        "Malta", "Marshall Islands", "Mauritania", "Mauritius", "Mexico", "Moldova",
        "Mongolia", "Morocco", "Mozambique",
        "Namibia", "New Caledonia", "Nigeria", "Oman", "Pakistan", "Panama",
        "Papua New Guinea", "Peru", "Philippines", "Poland", "Portugal", "Puerto Rico",
        "Qatar", "Romania", "Saudi Arabia", "Serbia", "Singapore", "Slovakia", "Slovenia",
        "South Africa", "Sri Lanka", "Suriname", "Switzerland", "Tanzania", "Thailand",
        "Tunisia", "Türkiye", "Uganda", "Ukraine", "United Arab Emirates", "Uruguay",
        "Uzbekistan", "Vietnam", "Virgin Islands", "Zambia",
    ],
    "High Risk": [
        "Belarus", "Cambodia", "China", "DR Congo", "Cuba", "Iran", "Iran", "Iraq",
        "Lebanon", "Libya", "Myanmar", "North Korea", "Russian Federation", "Venezuela",
        "Zimbabwe",
    ],
}

_GEOGRAPHICAL = {
    "Asian": [
        "China", "Hong Kong", "India", "Indonesia", "Japan", "Malaysia", "Singapore",
        "South Korea", "Taiwan", "Vietnam",
    ],
    "American": ["Canada", "Mexico", "United States"],
    "European": [
        "Austria", "Belgium", "Bulgaria", "Croatia", "Cyprus", "Czech Republic", "Denmark",
        "Estonia", "Finland", "France", "Germany", "Greece", "Hungary", "Ireland", "Italy",
        "Latvia", "Lithuania", "Luxembourg", "Malta", "Netherlands", "Norway", "Poland",
        "Portugal", "Romania", "Slovakia", "Slovenia", "Spain", "Sweden", "Switzerland",
        "United Kingdom",
    ],
}


def _codes(names: Iterable[str], cluster: str) -> frozenset[str]:
    seen: set[str] = set()
    for name in names:
        code = to_code(name)
        if code is None:
            raise ScopeError(f"unknown country {name!r} in cluster {cluster!r}")
        if code in seen:
            log.debug("duplicate %s (%s) in cluster %r dropped", name, code, cluster)
        seen.add(code)
    return frozenset(seen)


def _partition_tiers(tiers: dict[str, frozenset[str]]) -> dict[str, frozenset[str]]:
    """Make risk tiers disjoint; a country listed in several tiers keeps the lowest."""
    out: dict[str, frozenset[str]] = {}
    claimed: set[str] = set()
    for tier in RISK_TIERS:
        if tier not in tiers:
            continue
        overlap = tiers[tier] & claimed
        for code in sorted(overlap):
            log.warning("country %s listed in several risk tiers; keeping the lower-risk one", code)
        out[tier] = tiers[tier] - claimed
        claimed |= out[tier]
    return out


def builtin_scopes() -> ScopeSet:
    """The six builtin clusters: three risk tiers plus Asian, American, European.

    Low & Medium Risk is ``union_cluster(Low Risk, Medium Risk)`` or the
    expression ``"Low Risk + Medium Risk"``.
    """
    tiers = _partition_tiers({k: _codes(v, k) for k, v in _GEOPOLITICAL.items()})
    clusters = {k: CountryCluster(k, v) for k, v in tiers.items()}
    for k, v in _GEOGRAPHICAL.items():
        clusters[k] = CountryCluster(k, _codes(v, k))
    return ScopeSet(clusters, kind="geopolitical")


def load_scopes(source: str | Path | Mapping) -> ScopeSet:
    """Load a scope document from a path, a YAML/JSON string, or a parsed mapping."""
    if isinstance(source, Mapping):
        return _from_mapping(source)
    if isinstance(source, Path) or (isinstance(source, str) and "\n" not in source and Path(source).is_file()):
        text = Path(source).read_text(encoding="utf-8")
    else:
        text = source
    try:
        root = yaml.compose(text)
    except yaml.YAMLError as exc:
        raise ScopeError(f"cannot parse scope document: {exc}") from exc
    if root is None:
        raise ScopeError("empty scope document")
    return _from_node(root)


def _line(node) -> int:
    return node.start_mark.line + 1


def _from_node(root) -> ScopeSet:
    if not isinstance(root, yaml.MappingNode):
        raise ScopeError(f"line {_line(root)}: scope document must be a mapping")
    top = {k.value: v for k, v in root.value}
    kind = "custom"
    clusters_node = root
    if "clusters" in top:
        clusters_node = top["clusters"]
        if "kind" in top:
            kind = top["kind"].value
    if not isinstance(clusters_node, yaml.MappingNode):
        raise ScopeError(f"line {_line(clusters_node)}: 'clusters' must be a mapping")

    raw: dict[str, frozenset[str]] = {}
    for key_node, val_node in clusters_node.value:
        name = key_node.value
        if name in raw:
            raise ScopeError(f"line {_line(key_node)}: duplicate cluster {name!r}")
        if not isinstance(val_node, yaml.SequenceNode) or not val_node.value:
            raise ScopeError(f"line {_line(val_node)}: cluster {name!r} must list at least one country")
        codes: set[str] = set()
        for item in val_node.value:
            code = to_code(str(item.value))
            if code is None:
                raise ScopeError(f"line {_line(item)}: unknown country {item.value!r} in cluster {name!r}")
            codes.add(code)
        raw[name] = frozenset(codes)
    return _assemble(raw, kind)


def _from_mapping(doc: Mapping) -> ScopeSet:
    kind = "custom"
    clusters = doc
    if "clusters" in doc:
        clusters = doc["clusters"]
        kind = doc.get("kind", "custom")
    raw: dict[str, frozenset[str]] = {}
    for name, countries in clusters.items():
        if not countries:
            raise ScopeError(f"cluster {name!r} must list at least one country")
        raw[name] = _codes(countries, name)
    return _assemble(raw, kind)


def _assemble(raw: dict[str, frozenset[str]], kind: str) -> ScopeSet:
    if kind == "geopolitical":
        raw = {**raw, **_partition_tiers({t: raw[t] for t in RISK_TIERS if t in raw})}
    return ScopeSet({k: CountryCluster(k, v) for k, v in raw.items()}, kind=kind)


def dump_scopes(scopes: ScopeSet) -> str:
    doc = {
        "kind": scopes.kind,
        "clusters": {name: sorted(c.countries) for name, c in scopes.clusters.items()},
    }
    return yaml.safe_dump(doc, sort_keys=False, allow_unicode=True)


def country_name(code: str) -> str:
    return CODE_NAMES.get(code, code)
