"""Country+1, Friendshoring and Reshoring rewiring policies.

All three share one loop: every acting customer walks its (pre-policy)
suppliers in id order, and for each supplier that the policy deems foreign it
looks for alternative producers of each product that supplier makes. Products
without an admissible alternative are flagged; otherwise alternatives are
attached as new suppliers. Friendshoring and Reshoring additionally drop the
foreign supplier when every one of its products was substitutable.

Substitutability is a pure portfolio check, so the flagged pairs do not
depend on the selection strategy or the seed; only the set of added edges does.
"""

from __future__ import annotations

import enum
import random
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable

from scpolicy.errors import PolicyError
from scpolicy.network import SupplyEdge, SupplyNetwork
from scpolicy.scopes import CountryCluster


class Policy(str, enum.Enum):
    COUNTRY_PLUS_ONE = "country_plus_one"
    FRIENDSHORING = "friendshoring"
    RESHORING = "reshoring"


@dataclass(frozen=True)
class PolicyScope:
    """``acting`` is the cluster whose customers rewire; ``risky`` is only used by Country+1."""

    policy: Policy
    acting: CountryCluster
    risky: CountryCluster | None = None

    def __post_init__(self):
        object.__setattr__(self, "policy", Policy(self.policy))
        if self.policy is Policy.COUNTRY_PLUS_ONE:
            if self.risky is None:
                raise PolicyError("country_plus_one needs a risky cluster")
            if self.risky.countries & self.acting.countries:
                raise PolicyError(
                    f"scope overlap: {sorted(self.risky.countries & self.acting.countries)}"
                )
        elif self.risky is not None:
            raise PolicyError(f"{self.policy.value} takes no risky cluster")


@dataclass(frozen=True)
class SelectionStrategy:
    """Attach every alternative (``all``) or a uniform sample of ``k`` of them."""

    mode: str = "all"
    k: int = 1

    def __post_init__(self):
        if self.mode not in ("all", "sample"):
            raise PolicyError(f"unknown selection mode {self.mode!r}")
        if self.k < 1:
            raise PolicyError("selection sample size must be >= 1")

    @classmethod
    def parse(cls, text: str | SelectionStrategy) -> SelectionStrategy:
        if isinstance(text, SelectionStrategy):
            return text
        text = text.strip().lower()
        if text == "all":
            return cls("all")
        if text.startswith("sample:"):
            try:
                return cls("sample", int(text.split(":", 1)[1]))
            except ValueError:
                raise PolicyError(f"bad selection {text!r}") from None
        if text == "sample":
            return cls("sample", 1)
        raise PolicyError(f"bad selection {text!r}; use 'all' or 'sample:K'")

    def __str__(self) -> str:
        return "all" if self.mode == "all" else f"sample:{self.k}"


@dataclass
class PolicyOutcome:
    policy: Policy
    network_before: SupplyNetwork
    network_after: SupplyNetwork
    flagged_pairs: frozenset[tuple[str, str]]
    added_edges: frozenset[SupplyEdge]
    removed_edges: frozenset[SupplyEdge]
    ns_products: frozenset[str] = field(init=False)
    ns_companies: frozenset[str] = field(init=False)
    affected_by_country: dict[str, int] = field(init=False)
    affected_by_industry: dict[str, int] = field(init=False)

    def __post_init__(self):
        net = self.network_before
        self.ns_companies = frozenset(c for c, _ in self.flagged_pairs)
        self.ns_products = frozenset(p for _, p in self.flagged_pairs)
        self.affected_by_country = dict(sorted(Counter(net.firms[c].country for c in self.ns_companies).items()))
        self.affected_by_industry = dict(sorted(Counter(net.products[p].industry for p in self.ns_products).items()))


def alternative_suppliers(net: SupplyNetwork, p: str, candidates, exclude: str) -> frozenset[str]:
    producers = net.producers_of(p)
    return frozenset(k for k in candidates if k != exclude and k in producers)


def _rewire(
    net: SupplyNetwork,
    policy: Policy,
    customers: frozenset[str],
    foreign: Callable[[str, str], bool],
    alternatives: Callable[[str, str], tuple[str, ...]],
    remove: bool,
    sel: SelectionStrategy,
    seed: int | None,
) -> PolicyOutcome:
    rng = random.Random(seed)
    flagged: set[tuple[str, str]] = set()
    added: dict[tuple[str, str], SupplyEdge] = {}
    removed: list[SupplyEdge] = []
    sample = sel.mode == "sample"

    for c in sorted(customers):
        original = net.suppliers_of(c)
        current = set(original)
        for s in sorted(original):
            if not foreign(c, s):
                continue
            substitutable = True
            for p in sorted(net.products_of(s)):
                alts = alternatives(c, p)
                if c in alts:
                    alts = tuple(k for k in alts if k != c)
                if not alts:
                    flagged.add((c, p))
                    substitutable = False
                    continue
                chosen = rng.sample(alts, min(sel.k, len(alts))) if sample else alts
                for k in chosen:
                    if k not in current:
                        current.add(k)
                        added[(k, c)] = SupplyEdge(k, c, frozenset({p}))
            if remove and substitutable:
                current.discard(s)
                removed.append(net.edges[(s, c)])

    after = net.rewired(added.values(), (e.key for e in removed))
    return PolicyOutcome(
        policy=policy,
        network_before=net,
        network_after=after,
        flagged_pairs=frozenset(flagged),
        added_edges=frozenset(added.values()),
        removed_edges=frozenset(removed),
    )


class _ProducerCache:
    """Sorted producers of a product restricted to a firm set, memoized per key."""

    def __init__(self, net: SupplyNetwork):
        self.net = net
        self._cache: dict[tuple, tuple[str, ...]] = {}

    def within(self, key, p: str, firms: frozenset[str]) -> tuple[str, ...]:
        hit = self._cache.get((key, p))
        if hit is None:
            hit = tuple(sorted(self.net.producers_of(p) & firms))
            self._cache[(key, p)] = hit
        return hit


def apply_country_plus_one(
    net: SupplyNetwork,
    scope: PolicyScope,
    sel: SelectionStrategy = SelectionStrategy(),
    seed: int | None = 0,
) -> PolicyOutcome:
    """Add suppliers from the acting cluster for everything currently sourced from the risky one.

    No edge is ever removed.
    """
    if scope.policy is not Policy.COUNTRY_PLUS_ONE:
        raise PolicyError(f"expected a country_plus_one scope, got {scope.policy.value}")
    acting = net.firms_in_countries(scope.acting.countries)
    risky = scope.risky.countries
    cache = _ProducerCache(net)
    return _rewire(
        net,
        Policy.COUNTRY_PLUS_ONE,
        acting,
        foreign=lambda c, s: net.firms[s].country in risky,
        alternatives=lambda c, p: cache.within(None, p, acting),
        remove=False,
        sel=sel,
        seed=seed,
    )


def apply_friendshoring(
    net: SupplyNetwork,
    scope: PolicyScope,
    sel: SelectionStrategy = SelectionStrategy(),
    seed: int | None = 0,
) -> PolicyOutcome:
    """Replace suppliers outside the acting cluster with in-cluster producers."""
    if scope.policy is not Policy.FRIENDSHORING:
        raise PolicyError(f"expected a friendshoring scope, got {scope.policy.value}")
    acting = net.firms_in_countries(scope.acting.countries)
    cache = _ProducerCache(net)
    return _rewire(
        net,
        Policy.FRIENDSHORING,
        acting,
        foreign=lambda c, s: s not in acting,
        alternatives=lambda c, p: cache.within(None, p, acting),
        remove=True,
        sel=sel,
        seed=seed,
    )


def apply_reshoring(
    net: SupplyNetwork,
    scope: PolicyScope,
    sel: SelectionStrategy = SelectionStrategy(),
    seed: int | None = 0,
) -> PolicyOutcome:
    """Replace suppliers from other countries with producers in the customer's own country."""
    if scope.policy is not Policy.RESHORING:
        raise PolicyError(f"expected a reshoring scope, got {scope.policy.value}")
    acting = net.firms_in_countries(scope.acting.countries)
    by_country: dict[str, set[str]] = {}
    for f in acting:
        by_country.setdefault(net.firms[f].country, set()).add(f)
    home = {k: frozenset(v) for k, v in by_country.items()}
    cache = _ProducerCache(net)
    country = {f: net.firms[f].country for f in net.firms}
    return _rewire(
        net,
        Policy.RESHORING,
        acting,
        foreign=lambda c, s: country[s] != country[c],
        alternatives=lambda c, p: cache.within(country[c], p, home[country[c]]),
        remove=True,
        sel=sel,
        seed=seed,
    )


_APPLY = {
    Policy.COUNTRY_PLUS_ONE: apply_country_plus_one,
    Policy.FRIENDSHORING: apply_friendshoring,
    Policy.RESHORING: apply_reshoring,
}


def apply_policy(net: SupplyNetwork, scope: PolicyScope, sel: SelectionStrategy = SelectionStrategy(), seed: int | None = 0) -> PolicyOutcome:
    return _APPLY[scope.policy](net, scope, sel, seed)


# -- reports -------------------------------------------------------------------

def _top(counts: dict[str, int], k: int, label=lambda x: x) -> list[tuple[str, int]]:
    if k < 1:
        raise PolicyError("k must be >= 1")
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], label(kv[0]), kv[0]))
    return ranked[:k]


def rank_vulnerable_industries(outcome: PolicyOutcome, k: int = 5) -> list[tuple[str, int]]:
    """Industries by number of distinct non-substitutable products."""
    return _top(outcome.affected_by_industry, k)


def rank_vulnerable_products(outcome: PolicyOutcome, k: int = 5) -> list[tuple[str, int]]:
    """Product ids by number of distinct customers that could not substitute them.

    Ties are broken by product category, then id.
    """
    counts = Counter(p for _, p in outcome.flagged_pairs)
    products = outcome.network_before.products
    return _top(dict(counts), k, label=lambda p: products[p].category)


def mining_share(outcome: PolicyOutcome) -> float:
    if not outcome.ns_products:
        return 0.0
    products = outcome.network_before.products
    return sum(products[p].is_mining for p in outcome.ns_products) / len(outcome.ns_products)


def affected_degree_distribution(net_before: SupplyNetwork, outcome: PolicyOutcome) -> dict[int, int]:
    """Histogram {total degree: firm count} of non-substitutable companies, pre-policy."""
    return dict(sorted(Counter(net_before.degree(c) for c in outcome.ns_companies).items()))
