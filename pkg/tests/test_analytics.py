import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from crisisnet.analytics import (
    TgpPoint,
    avalanche_network,
    coarse_grain_continental,
    intra_continental_fraction,
    max_spanning_forest,
    spearman_gdp_avalanche,
    summary_stats,
    symmetrized_weights,
    tgp_profile,
)
from crisisnet.cascade import CascadeParams, run_all, run_avalanche
from crisisnet.data_model import Country, TradeLink, build_network

from oracles import pearson_on_midranks, random_digraph, spanning_forest_weight_exhaustive

P = CascadeParams(0.7, 0.1)


def test_tgp_profile_seed_a(m2):
    pts = tgp_profile(m2, run_avalanche(m2, "A", P))
    assert pts == [
        TgpPoint("B", 10.0, 2.0, True),
        TgpPoint("D", 20.0, 1.6, True),
        TgpPoint("E", 1000.0, 110.0, False),
    ]


def test_tgp_profile_seed_f(m2):
    assert tgp_profile(m2, run_avalanche(m2, "F", P)) == [TgpPoint("D", 20.0, 1.0, False)]


def test_tgp_profile_isolated():
    net = build_network([Country("A", "a", "X", 1.0), Country("B", "b", "X", 1.0)], [])
    assert tgp_profile(net, run_avalanche(net, "A", P)) == []


# -- Spearman ----------------------------------------------------------------


def test_spearman_perfect():
    assert spearman_gdp_avalanche([1, 2, 3, 4], [10, 20, 30, 40]).rho == 1.0
    r = spearman_gdp_avalanche([1, 2, 3, 4], [4, 3, 2, 1])
    assert r.rho == -1.0 and r.p_value == 0.0


def test_spearman_m2(m2):
    sizes = run_all(m2, P)
    r = spearman_gdp_avalanche([m2.country(c).gdp for c in m2.codes], [sizes[c].size for c in m2.codes])
    assert r.rho == pytest.approx(0.9747, abs=1e-4)
    assert r.n == 5


def test_spearman_constant_vector():
    with pytest.raises(ValueError, match="constant"):
        spearman_gdp_avalanche([1, 2, 3], [0, 0, 0])


def test_spearman_too_short():
    with pytest.raises(ValueError):
        spearman_gdp_avalanche([1, 2], [2, 1])


vec = st.lists(st.integers(0, 6), min_size=4, max_size=25)


@settings(max_examples=100, deadline=None)
@given(data=st.data())
def test_spearman_matches_references(data):
    x = data.draw(vec)
    y = data.draw(st.lists(st.integers(0, 6), min_size=len(x), max_size=len(x)))
    if len(set(x)) < 2 or len(set(y)) < 2:
        return
    r = spearman_gdp_avalanche(x, y)
    assert r.rho == pytest.approx(pearson_on_midranks(x, y), abs=1e-12)
    ref = stats.spearmanr(x, y)
    assert r.rho == pytest.approx(ref.statistic, abs=1e-12)
    if abs(r.rho) < 1:
        assert r.p_value == pytest.approx(ref.pvalue, rel=1e-9, abs=1e-15)


@settings(max_examples=50, deadline=None)
@given(x=st.lists(st.integers(1, 10**5), min_size=4, max_size=20, unique=True), seed=st.integers(0, 1000))
def test_spearman_invariant_under_monotone_transform(x, seed):
    y = random.Random(seed).sample(range(len(x)), len(x))
    a = spearman_gdp_avalanche(x, y).rho
    b = spearman_gdp_avalanche([v**3 + 7 for v in x], y).rho
    assert a == pytest.approx(b, abs=1e-12)


# -- spanning forest ---------------------------------------------------------


def test_forest_m2(m2):
    forest = max_spanning_forest(m2)
    assert forest.edges == (("A", "E", 110.0), ("A", "B", 2.0), ("A", "D", 1.6), ("D", "F", 1.0))
    assert forest.total_weight == pytest.approx(114.6)
    assert forest.n_components == 1


def test_forest_triangle_drops_lightest():
    cs = [Country(c, c, "X", 1.0) for c in "ABC"]
    net = build_network(cs, [TradeLink("A", "B", 3.0), TradeLink("B", "C", 2.0), TradeLink("C", "A", 1.0)])
    assert max_spanning_forest(net).pairs() == [("A", "B"), ("B", "C")]


def test_forest_disconnected():
    cs = [Country(c, c, "X", 1.0) for c in "ABCD"]
    net = build_network(cs, [TradeLink("A", "B", 3.0), TradeLink("C", "D", 2.0)])
    forest = max_spanning_forest(net)
    assert forest.n_components == 2 and len(forest.edges) == 2


def test_symmetrized_weights_sum_both_directions(m2):
    assert symmetrized_weights(m2)["A", "E"] == 110.0


@pytest.mark.parametrize("seed", range(25))
def test_forest_is_optimal(seed):
    nodes, weights, caps = random_digraph(random.Random(seed), 7)
    net = build_network([Country(v, v, "X", caps[v]) for v in nodes], [TradeLink(a, b, w) for (a, b), w in weights.items()])
    forest = max_spanning_forest(net)
    sym = [(a, b, w) for (a, b), w in symmetrized_weights(net).items()]
    assert forest.total_weight == pytest.approx(spanning_forest_weight_exhaustive(nodes, sym), rel=1e-12)


# -- avalanche network -------------------------------------------------------


def test_avalanche_network_m2(m2):
    avnet = avalanche_network(run_all(m2, P))
    assert avnet.edges == (
        ("A", "B"), ("A", "D"), ("A", "F"),
        ("D", "B"), ("D", "F"),
        ("E", "A"), ("E", "B"), ("E", "D"), ("E", "F"),
    )  # fmt: skip
    assert avnet.out_degree("E") == 4
    assert avnet.isolated == []
    frac = intra_continental_fraction(avnet.edges, m2.continents)
    assert (frac.intra, frac.total) == (5, 9)
    assert coarse_grain_continental(avnet, m2.continents) == {("X1", "X1"): 5, ("X2", "X1"): 4}


def test_avalanche_network_no_edges(m2):
    avnet = avalanche_network(run_all(m2, CascadeParams(0.001, 1.0)))
    assert avnet.edges == ()
    assert avnet.isolated == list(m2.codes)
    frac = intra_continental_fraction(avnet.edges, m2.continents)
    assert frac.fraction is None
    assert coarse_grain_continental(avnet, m2.continents) == {}


def test_intra_fraction_forest(m2):
    frac = intra_continental_fraction(max_spanning_forest(m2).edges, m2.continents)
    assert (frac.intra, frac.inter, frac.fraction) == (3, 1, 0.75)


def test_intra_fraction_missing_tag():
    with pytest.raises(KeyError, match="Q"):
        intra_continental_fraction([("A", "Q")], {"A": "X"})


def test_coarse_grain_preserves_edge_count(s1_blocks):
    avnet = avalanche_network(run_all(s1_blocks, CascadeParams.from_ratio(7)))
    coarse = coarse_grain_continental(avnet, s1_blocks.continents)
    assert sum(coarse.values()) == len(avnet.edges)
    intra = sum(v for (x, y), v in coarse.items() if x == y)
    assert intra == intra_continental_fraction(avnet.edges, s1_blocks.continents).intra


# -- summary -----------------------------------------------------------------


def test_summary_m2(m2):
    s = summary_stats(run_all(m2, P))
    assert (s.sum_sizes, s.typical_nonzero, s.likelihood, s.n) == (9, 3.0, 0.6, 5)


def test_summary_all_zero():
    s = summary_stats([0, 0, 0])
    assert s.typical_nonzero is None and s.likelihood == 0.0


def test_summary_empty():
    with pytest.raises(ValueError):
        summary_stats([])
