import random

import pytest
from hypothesis import given, settings, strategies as st

from scpolicy.errors import PolicyError
from scpolicy.network import Firm, Product, SupplyEdge, build_network
from scpolicy.policies import (
    Policy,
    PolicyOutcome,
    PolicyScope,
    SelectionStrategy,
    affected_degree_distribution,
    alternative_suppliers,
    apply_country_plus_one,
    apply_friendshoring,
    apply_policy,
    apply_reshoring,
    mining_share,
    rank_vulnerable_industries,
    rank_vulnerable_products,
)
from scpolicy.scopes import CountryCluster

import oracles

ALL = SelectionStrategy("all")


def cl(*codes, name=None):
    return CountryCluster(name or "+".join(codes), frozenset(codes))


def F(fid, country, products=(), industry="Auto"):
    return Firm(fid, fid, country, industry, frozenset(products))


def cp1(acting, risky):
    return PolicyScope(Policy.COUNTRY_PLUS_ONE, acting, risky)


# -- scope / selection ---------------------------------------------------------

def test_country_plus_one_needs_disjoint_scopes():
    with pytest.raises(PolicyError, match="scope overlap"):
        cp1(cl("US", "CN"), cl("CN"))
    with pytest.raises(PolicyError):
        PolicyScope(Policy.COUNTRY_PLUS_ONE, cl("US"))
    with pytest.raises(PolicyError):
        PolicyScope(Policy.RESHORING, cl("US"), cl("CN"))


def test_selection_parse():
    assert SelectionStrategy.parse("all") == SelectionStrategy("all")
    assert SelectionStrategy.parse("sample:3") == SelectionStrategy("sample", 3)
    assert str(SelectionStrategy("sample", 2)) == "sample:2"
    for bad in ("sample:0", "some", "sample:x"):
        with pytest.raises(PolicyError):
            SelectionStrategy.parse(bad)


def test_alternative_suppliers():
    net = build_network([F("a", "US", {"p"}), F("b", "US", {"q"}), F("c", "US", {"p"})], [])
    assert alternative_suppliers(net, "q", {"a", "c"}, "c") == frozenset()
    assert alternative_suppliers(net, "p", {"c"}, "c") == frozenset()
    assert alternative_suppliers(net, "p", {"a", "b", "c"}, "c") == {"a"}


# -- worked examples -----------------------------------------------------------

def test_country_plus_one_adds_alternative():
    net = build_network([F("c", "US"), F("x", "CN", {"p"}), F("k", "JP", {"p"})], [SupplyEdge("x", "c")])
    out = apply_country_plus_one(net, cp1(cl("US", "JP"), cl("CN")), ALL)
    assert set(out.network_after.edges) == {("x", "c"), ("k", "c")}
    assert out.ns_products == frozenset() and out.ns_companies == frozenset()
    assert out.network_after.edges[("k", "c")].products == {"p"}


def test_country_plus_one_flags_when_no_alternative():
    net = build_network([F("c", "US"), F("x", "CN", {"p"}), F("y", "CN", {"p"})], [SupplyEdge("x", "c")])
    out = apply_country_plus_one(net, cp1(cl("US", "JP"), cl("CN")), ALL)
    assert out.ns_products == {"p"} and out.ns_companies == {"c"}
    assert set(out.network_after.edges) == set(net.edges)


def test_friendshoring_replaces_external_supplier():
    net = build_network([F("c", "US"), F("s", "CN", {"p"}), F("k", "CA", {"p"})], [SupplyEdge("s", "c")])
    out = apply_friendshoring(net, PolicyScope(Policy.FRIENDSHORING, cl("US", "CA")), ALL)
    assert set(out.network_after.edges) == {("k", "c")}
    assert {e.key for e in out.removed_edges} == {("s", "c")}


def test_friendshoring_keeps_partially_substitutable_supplier():
    net = build_network([F("c", "US"), F("s", "CN", {"p", "q"}), F("k", "CA", {"p"})], [SupplyEdge("s", "c")])
    out = apply_friendshoring(net, PolicyScope(Policy.FRIENDSHORING, cl("US", "CA")), ALL)
    assert set(out.network_after.edges) == {("s", "c"), ("k", "c")}
    assert out.flagged_pairs == {("c", "q")}


def test_reshoring_examples():
    firms = [F("c", "FR"), F("s", "DE", {"p"}), F("k", "FR", {"p"})]
    net = build_network(firms, [SupplyEdge("s", "c")])
    out = apply_reshoring(net, PolicyScope(Policy.RESHORING, cl("FR", "DE")), ALL)
    assert set(out.network_after.edges) == {("k", "c")}

    net = build_network([F("c", "FR"), F("s", "DE", {"p"})], [SupplyEdge("s", "c")])
    out = apply_reshoring(net, PolicyScope(Policy.RESHORING, cl("FR", "DE")), ALL)
    assert out.flagged_pairs == {("c", "p")}
    assert set(out.network_after.edges) == {("s", "c")}


def test_customer_is_not_its_own_alternative():
    net = build_network([F("c", "FR", {"p"}), F("s", "DE", {"p"})], [SupplyEdge("s", "c")])
    out = apply_reshoring(net, PolicyScope(Policy.RESHORING, cl("FR")), ALL)
    assert out.flagged_pairs == {("c", "p")}


def test_wrong_scope_kind_rejected():
    net = build_network([F("c", "FR")], [])
    with pytest.raises(PolicyError):
        apply_reshoring(net, PolicyScope(Policy.FRIENDSHORING, cl("FR")))


def test_non_acting_customers_untouched():
    firms = [F("c", "DE"), F("s", "CN", {"p"}), F("k", "DE", {"p"})]
    net = build_network(firms, [SupplyEdge("s", "c")])
    out = apply_reshoring(net, PolicyScope(Policy.RESHORING, cl("FR")), ALL)
    assert set(out.network_after.edges) == set(net.edges)


def test_sampling_respects_k_and_seed():
    firms = [F("c", "US"), F("x", "CN", {"p"})] + [F(f"k{i}", "US", {"p"}) for i in range(6)]
    net = build_network(firms, [SupplyEdge("x", "c")])
    scope = cp1(cl("US"), cl("CN"))
    a = apply_country_plus_one(net, scope, SelectionStrategy("sample", 2), seed=1)
    assert len(a.added_edges) == 2
    b = apply_country_plus_one(net, scope, SelectionStrategy("sample", 2), seed=1)
    assert a.added_edges == b.added_edges
    seen = {frozenset(apply_country_plus_one(net, scope, SelectionStrategy("sample", 2), s).added_edges)
            for s in range(20)}
    assert len(seen) > 1


# -- oracle equivalence --------------------------------------------------------

def _scopes_for(net, rng):
    countries = sorted(net.countries)
    S = set(rng.sample(countries, rng.randint(1, min(len(countries), len(oracles.COUNTRY_POOL) - 1))))
    rest = [c for c in oracles.COUNTRY_POOL if c not in S]
    X = set(rng.sample(rest, rng.randint(1, min(3, len(rest)))))
    return S, X


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 1_000_000))
def test_policies_match_literal_procedures(seed):
    rng = random.Random(seed)
    net = oracles.random_network(rng)
    S, X = _scopes_for(net, rng)
    cases = [
        (apply_country_plus_one(net, cp1(cl(*S), cl(*X)), ALL), oracles.oracle_country_plus_one(net, X, S)),
        (apply_friendshoring(net, PolicyScope(Policy.FRIENDSHORING, cl(*S)), ALL), oracles.oracle_friendshoring(net, S)),
        (apply_reshoring(net, PolicyScope(Policy.RESHORING, cl(*S)), ALL), oracles.oracle_reshoring(net, S)),
    ]
    for out, (edges, ns_p, ns_c, flags) in cases:
        assert set(out.network_after.edges) == edges
        assert out.ns_products == ns_p
        assert out.ns_companies == ns_c
        assert out.flagged_pairs == flags


# -- invariants ----------------------------------------------------------------

def _outcome_invariants(net, out: PolicyOutcome):
    added = {e.key for e in out.added_edges}
    removed = {e.key for e in out.removed_edges}
    assert not added & removed
    assert set(out.network_after.edges) == (set(net.edges) | added) - removed
    assert out.ns_companies == {c for c, _ in out.flagged_pairs}
    assert out.ns_products == {p for _, p in out.flagged_pairs}
    for f in net.firms:
        assert out.network_after.firms[f].products == net.firms[f].products


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 1_000_000), st.sampled_from(["all", "sample:1", "sample:2"]), st.integers(0, 99))
def test_policy_postconditions(seed, sel, pseed):
    rng = random.Random(seed)
    net = oracles.random_network(rng)
    S, X = _scopes_for(net, rng)
    sel = SelectionStrategy.parse(sel)
    C = net.firms_in_countries(S)

    out = apply_country_plus_one(net, cp1(cl(*S), cl(*X)), sel, pseed)
    _outcome_invariants(net, out)
    assert set(out.network_after.edges) >= set(net.edges) and not out.removed_edges

    out = apply_friendshoring(net, PolicyScope(Policy.FRIENDSHORING, cl(*S)), sel, pseed)
    _outcome_invariants(net, out)
    for s, c in out.network_after.edges:
        if c in C and s not in C and (s, c) in net.edges:
            assert any(net.producers_of(p) & C <= {c} for p in net.firms[s].products)

    out = apply_reshoring(net, PolicyScope(Policy.RESHORING, cl(*S)), sel, pseed)
    _outcome_invariants(net, out)
    for s, c in out.network_after.edges:
        home = net.firms[c].country
        if c in C and net.firms[s].country != home and (s, c) in net.edges:
            local = net.firms_in_countries({home})
            assert any(net.producers_of(p) & local <= {c} for p in net.firms[s].products)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 1_000_000))
def test_flags_do_not_depend_on_selection(seed):
    rng = random.Random(seed)
    net = oracles.random_network(rng)
    S, _ = _scopes_for(net, rng)
    scope = PolicyScope(Policy.FRIENDSHORING, cl(*S))
    a = apply_policy(net, scope, ALL)
    b = apply_policy(net, scope, SelectionStrategy("sample", 1), seed=seed)
    assert a.flagged_pairs == b.flagged_pairs


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 1_000_000))
def test_idempotent_under_all(seed):
    rng = random.Random(seed)
    net = oracles.random_network(rng)
    S, X = _scopes_for(net, rng)
    for scope in (cp1(cl(*S), cl(*X)), PolicyScope(Policy.FRIENDSHORING, cl(*S)), PolicyScope(Policy.RESHORING, cl(*S))):
        once = apply_policy(net, scope, ALL)
        twice = apply_policy(once.network_after, scope, ALL)
        assert set(twice.network_after.edges) == set(once.network_after.edges)
        assert twice.flagged_pairs == once.flagged_pairs


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 1_000_000))
def test_friendshoring_flags_contained_in_reshoring(seed):
    rng = random.Random(seed)
    net = oracles.random_network(rng)
    S, _ = _scopes_for(net, rng)
    fr = apply_friendshoring(net, PolicyScope(Policy.FRIENDSHORING, cl(*S)), ALL)
    re_ = apply_reshoring(net, PolicyScope(Policy.RESHORING, cl(*S)), ALL)
    assert fr.ns_products <= re_.ns_products
    assert fr.flagged_pairs <= re_.flagged_pairs


def test_input_network_not_mutated():
    net = oracles.random_network(random.Random(99))
    before = dict(net.edges)
    apply_friendshoring(net, PolicyScope(Policy.FRIENDSHORING, cl(*sorted(net.countries)[:1])), ALL)
    assert net.edges == before


# -- reports -------------------------------------------------------------------

def _flag_fixture():
    products = [
        Product("p1", "Axle", "auto"), Product("p2", "Brake", "auto"), Product("p3", "Coil", "steel"),
        Product("m1", "Lithium", "Mine", True),
    ]
    firms = [F("c1", "US"), F("c2", "US"), F("c3", "US"),
             F("s", "CN", {"p1", "p2", "p3", "m1"}, industry="mixed")]
    edges = [SupplyEdge("s", c) for c in ("c1", "c2", "c3")]
    net = build_network(firms, edges, products)
    return net, apply_friendshoring(net, PolicyScope(Policy.FRIENDSHORING, cl("US")), ALL)


def test_rank_industries():
    net, out = _flag_fixture()
    assert rank_vulnerable_industries(out, 5) == [("auto", 2), ("Mine", 1), ("steel", 1)]
    with pytest.raises(PolicyError):
        rank_vulnerable_industries(out, 0)


def test_rank_products_ties_by_category():
    net, out = _flag_fixture()
    # every product flagged for all three customers; categories order the tie
    assert rank_vulnerable_products(out, 2) == [("p1", 3), ("p2", 3)]


def test_rank_empty():
    net = build_network([F("c", "US")], [])
    out = apply_friendshoring(net, PolicyScope(Policy.FRIENDSHORING, cl("US")), ALL)
    assert rank_vulnerable_industries(out) == [] and rank_vulnerable_products(out) == []
    assert mining_share(out) == 0.0
    assert affected_degree_distribution(net, out) == {}


def test_mining_share_and_affected_maps():
    net, out = _flag_fixture()
    assert mining_share(out) == 0.25
    assert out.affected_by_country == {"US": 3}
    assert out.affected_by_industry == {"Mine": 1, "auto": 2, "steel": 1}


def test_mining_share_two_of_ten():
    products = [Product(f"p{i}", f"c{i}", "Mine" if i < 2 else "auto", i < 2) for i in range(10)]
    firms = [F("c", "US"), F("s", "CN", {p.id for p in products})]
    net = build_network(firms, [SupplyEdge("s", "c")], products)
    out = apply_friendshoring(net, PolicyScope(Policy.FRIENDSHORING, cl("US")), ALL)
    assert mining_share(out) == pytest.approx(0.2)


def test_affected_degree_distribution():
    firms = [F("c", "US"), F("s", "CN", {"p"}), F("t", "CN", {"q"}), F("u", "US", {"r"}), F("d", "US")]
    edges = [SupplyEdge("s", "c"), SupplyEdge("t", "c"), SupplyEdge("u", "c")]
    net = build_network(firms, edges)
    out = apply_friendshoring(net, PolicyScope(Policy.FRIENDSHORING, cl("US")), ALL)
    assert out.ns_companies == {"c"}
    assert affected_degree_distribution(net, out) == {3: 1}
