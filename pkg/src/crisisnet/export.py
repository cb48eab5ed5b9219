"""CSV / DOT / JSON writers and the matching readers.

Floats go through ``repr`` so that files round-trip bit-exactly and are
byte-identical between runs.
"""

from __future__ import annotations

import csv
import json
import math
from typing import IO, Iterable, Mapping, Optional, Sequence

from .analytics import AvalancheNetwork, SpanningForest, SummaryStats, TgpPoint
from .cascade import (
    LABEL_ORDER,
    AvalancheResult,
    Cause,
    CollapseEvent,
    Label,
    Side,
    SweepResult,
)

RESULT_COLUMNS = (
    "seed",
    "size",
    "duration",
    "n_one_step_direct",
    "n_multi_step_direct",
    "n_indirect",
    "n_residual",
)
EVENT_COLUMNS = ("seed", "country", "step", "side", "cause", "trigger", "label")


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def write_results_csv(results: Mapping[str, AvalancheResult], sink: IO[str]) -> None:
    w = csv.writer(sink, lineterminator="\n")
    w.writerow(RESULT_COLUMNS)
    for seed, r in results.items():
        prof = r.profile
        w.writerow([seed, r.size, r.duration] + [prof[l] for l in LABEL_ORDER])


def read_results_csv(source: IO[str]) -> list[dict]:
    rows = []
    for row in csv.DictReader(source):
        rows.append({k: (row[k] if k == "seed" else int(row[k])) for k in RESULT_COLUMNS})
    return rows


def write_events_csv(results: Mapping[str, AvalancheResult], sink: IO[str]) -> None:
    w = csv.writer(sink, lineterminator="\n")
    w.writerow(EVENT_COLUMNS)
    for seed, r in results.items():
        for e in r.events:
            w.writerow([seed, e.country, e.step, e.side.value, e.cause.value, e.trigger or "", e.label.value])


def read_events_csv(source: IO[str], seeds: Sequence[str]) -> dict[str, AvalancheResult]:
    """Rebuild per-seed results from an events file; seeds absent from the file get empty avalanches."""
    events: dict[str, list[CollapseEvent]] = {s: [] for s in seeds}
    for row in csv.DictReader(source):
        seed = row["seed"]
        if seed not in events:
            raise ValueError(f"events file mentions unknown seed {seed!r}")
        events[seed].append(
            CollapseEvent(
                row["country"],
                int(row["step"]),
                Side(row["side"]),
                Cause(row["cause"]),
                row["trigger"] or None,
                Label(row["label"]),
            )
        )
    return {s: AvalancheResult(s, tuple(ev)) for s, ev in events.items()}


def write_distribution_csv(curve: Iterable[tuple[int, int]], sink: IO[str]) -> None:
    w = csv.writer(sink, lineterminator="\n")
    w.writerow(["A", "count_ge_A"])
    w.writerows(curve)


def read_distribution_csv(source: IO[str]) -> list[tuple[int, int]]:
    return [(int(r["A"]), int(r["count_ge_A"])) for r in csv.DictReader(source)]


def write_sweep_csv(result: SweepResult, sink: IO[str]) -> None:
    w = csv.writer(sink, lineterminator="\n")
    w.writerow(["ratio", "f", "t", "max_size", "sum_sizes", "tail_slope", "regime", "decades"])
    for r in result.rows:
        w.writerow([_fmt(r.ratio), _fmt(r.f), _fmt(r.t), r.max_size, r.sum_sizes, _fmt(r.slope), r.regime.value, _fmt(r.decades)])


def write_tgp_csv(points: Iterable[TgpPoint], sink: IO[str]) -> None:
    w = csv.writer(sink, lineterminator="\n")
    w.writerow(["partner", "partner_gdp_musd", "trade_volume_musd", "collapsed"])
    for p in points:
        w.writerow([p.partner, _fmt(p.partner_gdp), _fmt(p.trade_volume), str(p.collapsed_by_profiled).lower()])


def read_tgp_csv(source: IO[str]) -> list[TgpPoint]:
    return [
        TgpPoint(r["partner"], float(r["partner_gdp_musd"]), float(r["trade_volume_musd"]), r["collapsed"] == "true")
        for r in csv.DictReader(source)
    ]


def summary_dict(s: SummaryStats) -> dict:
    return {"sum_sizes": s.sum_sizes, "typical_nonzero": s.typical_nonzero, "likelihood": s.likelihood, "n": s.n}


def _q(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


def avalanche_network_dot(avnet: AvalancheNetwork, continents: Mapping[str, str]) -> str:
    lines = ["digraph avalanche_network {"]
    for n in avnet.nodes:
        lines.append(f"  {_q(n)} [continent={_q(continents[n])}];")
    for a, b in avnet.edges:
        intra = "true" if continents[a] == continents[b] else "false"
        lines.append(f"  {_q(a)} -> {_q(b)} [intra={intra}];")
    lines.append("}")
    return "\n".join(lines) + "\n"


def spanning_forest_dot(forest: SpanningForest, continents: Mapping[str, str]) -> str:
    lines = ["graph spanning_forest {"]
    for n in forest.nodes:
        lines.append(f"  {_q(n)} [continent={_q(continents[n])}];")
    for a, b, w in forest.edges:
        intra = "true" if continents[a] == continents[b] else "false"
        lines.append(f"  {_q(a)} -- {_q(b)} [weight={w!r}, intra={intra}];")
    lines.append("}")
    return "\n".join(lines) + "\n"


def continental_json(coarse: Mapping[tuple[str, str], int]) -> dict:
    nodes = sorted({x for pair in coarse for x in pair})
    return {
        "nodes": nodes,
        "edges": [{"source": a, "target": b, "weight": w} for (a, b), w in sorted(coarse.items())],
    }


def read_continental_json(data: dict) -> dict[tuple[str, str], int]:
    return {(e["source"], e["target"]): int(e["weight"]) for e in data["edges"]}


def _clean(obj):
    if isinstance(obj, float) and (math.isnan(obj) or math.isinf(obj)):
        return None
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj


def dump_json(obj, sink: IO[str]) -> None:
    json.dump(_clean(obj), sink, indent=2, sort_keys=True, allow_nan=False)
    sink.write("\n")


def write_ensemble_samples_csv(values: Mapping[str, Sequence[float]], indices: Sequence[int], sink: IO[str]) -> None:
    w = csv.writer(sink, lineterminator="\n")
    names = list(values)
    w.writerow(["sample"] + names)
    for k, idx in enumerate(indices):
        w.writerow([idx] + [_fmt(None if math.isnan(values[n][k]) else values[n][k]) for n in names])


def fraction_line(label: str, intra: int, total: int) -> str:
    if total == 0:
        return f"{label}: 0 links (intra-continental fraction undefined)"
    return f"{label}: {intra} out of {total} links ({100 * intra / total:.0f}%) are intra-continental"


def maybe(x: Optional[float], fmt: str = ".4g") -> str:
    return "undefined" if x is None else format(x, fmt)
