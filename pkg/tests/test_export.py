import io
import json
import math

from crisisnet.analytics import avalanche_network, coarse_grain_continental, max_spanning_forest, tgp_profile
from crisisnet.cascade import CascadeParams, cumulative_size_counts, run_all
from crisisnet.export import (
    avalanche_network_dot,
    continental_json,
    dump_json,
    fraction_line,
    read_continental_json,
    read_distribution_csv,
    read_events_csv,
    read_results_csv,
    read_tgp_csv,
    spanning_forest_dot,
    write_distribution_csv,
    write_events_csv,
    write_results_csv,
    write_tgp_csv,
)

P = CascadeParams(0.7, 0.1)


def roundtrip(write, obj, read, *args):
    buf = io.StringIO()
    write(obj, buf)
    return read(io.StringIO(buf.getvalue()), *args), buf.getvalue()


def test_results_csv(m2):
    rows, text = roundtrip(write_results_csv, run_all(m2, P), read_results_csv)
    assert "E,4,4,1,1,1,1" in text.splitlines()
    assert [r["size"] for r in rows] == [3, 0, 2, 4, 0]


def test_events_round_trip(m2):
    res = run_all(m2, P)
    again, _ = roundtrip(write_events_csv, res, read_events_csv, m2.codes)
    assert again == res


def test_events_round_trip_s1(s1):
    res = run_all(s1, CascadeParams.from_ratio(7))
    again, _ = roundtrip(write_events_csv, res, read_events_csv, s1.codes)
    assert again == res


def test_distribution_round_trip(m2):
    curve = cumulative_size_counts(run_all(m2, P))
    again, text = roundtrip(write_distribution_csv, curve, read_distribution_csv)
    assert again == curve
    assert text.startswith("A,count_ge_A\n0,5\n")


def test_tgp_round_trip(m2):
    pts = tgp_profile(m2, run_all(m2, P)["A"])
    again, _ = roundtrip(write_tgp_csv, pts, read_tgp_csv)
    assert again == pts


def test_continental_json_round_trip(m2):
    coarse = coarse_grain_continental(avalanche_network(run_all(m2, P)), m2.continents)
    doc = continental_json(coarse)
    assert doc["nodes"] == ["X1", "X2"]
    assert read_continental_json(json.loads(json.dumps(doc))) == coarse


def test_avalanche_dot(m2):
    dot = avalanche_network_dot(avalanche_network(run_all(m2, P)), m2.continents)
    assert dot.startswith("digraph")
    assert '"E" [continent="X2"];' in dot
    assert '"E" -> "A" [intra=false];' in dot
    assert '"A" -> "B" [intra=true];' in dot
    assert dot.count("->") == 9


def test_forest_dot(m2):
    dot = spanning_forest_dot(max_spanning_forest(m2), m2.continents)
    assert dot.startswith("graph")
    assert '"A" -- "E" [weight=110.0, intra=false];' in dot
    assert dot.count("--") == 4


def test_dump_json_is_stable_and_strict():
    buf = io.StringIO()
    dump_json({"b": math.nan, "a": [1.5, math.inf]}, buf)
    assert buf.getvalue() == '{\n  "a": [\n    1.5,\n    null\n  ],\n  "b": null\n}\n'


def test_fraction_line():
    assert fraction_line("spanning forest", 97, 174) == "spanning forest: 97 out of 174 links (56%) are intra-continental"
    assert "undefined" in fraction_line("x", 0, 0)
