"""Structural and statistical views of cascade results.

Trade-volume/GDP profiles, GDP-vs-avalanche rank correlation, the maximum
spanning forest of the symmetrized trade graph, the avalanche network and
its continental coarse-graining, plus per-network summary statistics.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np
from scipy import stats

from .cascade import AvalancheResult, SizesLike, sizes_of
from .data_model import MacroNet


@dataclass(frozen=True)
class TgpPoint:
    partner: str
    partner_gdp: float
    trade_volume: float
    collapsed_by_profiled: bool


def tgp_profile(net: MacroNet, result: AvalancheResult) -> list[TgpPoint]:
    """One point per trading partner of ``result.seed``; volume is bilateral (both directions)."""
    c = result.seed
    partners = net.partners(c)
    hit = result.collapsed
    points = []
    for p in sorted(partners):
        vol = net.weight(c, p) + net.weight(p, c)
        points.append(TgpPoint(p, net.country(p).gdp, vol, p in hit))
    return points


@dataclass(frozen=True)
class SpearmanResult:
    rho: float
    p_value: float
    n: int


def spearman_gdp_avalanche(gdps: Sequence[float], sizes: Sequence[float]) -> SpearmanResult:
    """Spearman rank correlation with a two-sided t-approximation p-value.

    Ties receive mid-ranks. A constant input leaves rho undefined and raises
    ``ValueError``.
    """
    x = np.asarray(gdps, dtype=float)
    y = np.asarray(sizes, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("gdps and sizes must be 1-d vectors of equal length")
    n = len(x)
    if n < 3:
        raise ValueError(f"need at least 3 observations, got {n}")
    rx = stats.rankdata(x) - (n + 1) / 2
    ry = stats.rankdata(y) - (n + 1) / 2
    sxx, syy = float(rx @ rx), float(ry @ ry)
    if sxx == 0 or syy == 0:
        raise ValueError("rank correlation undefined for a constant vector")
    rho = float(rx @ ry) / math.sqrt(sxx * syy)
    rho = min(1.0, max(-1.0, rho))
    if abs(rho) == 1.0:
        p = 0.0
    else:
        tstat = rho * math.sqrt((n - 2) / (1 - rho * rho))
        p = float(2 * stats.t.sf(abs(tstat), n - 2))
    return SpearmanResult(rho, p, n)


@dataclass(frozen=True)
class SpanningForest:
    nodes: tuple[str, ...]
    edges: tuple[tuple[str, str, float], ...]

    @property
    def n_components(self) -> int:
        return len(self.nodes) - len(self.edges)

    @property
    def total_weight(self) -> float:
        return math.fsum(w for _, _, w in self.edges)

    def pairs(self) -> list[tuple[str, str]]:
        return [(a, b) for a, b, _ in self.edges]


def symmetrized_weights(net: MacroNet) -> dict[tuple[str, str], float]:
    """Undirected weight W(i,j) + W(j,i) keyed by the sorted code pair."""
    out: dict[tuple[str, str], float] = {}
    for l in net.links:
        key = (l.exporter, l.importer) if l.exporter < l.importer else (l.importer, l.exporter)
        out[key] = out.get(key, 0.0) + l.volume
    return out


def max_spanning_forest(net: MacroNet) -> SpanningForest:
    # Kruskal on descending weight; ties by (min code, max code)
    sym = symmetrized_weights(net)
    parent = {c: c for c in net.codes}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    chosen = []
    for (a, b), w in sorted(sym.items(), key=lambda kv: (-kv[1], kv[0])):
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[ra] = rb
            chosen.append((a, b, w))
    return SpanningForest(tuple(net.codes), tuple(chosen))


@dataclass(frozen=True)
class AvalancheNetwork:
    nodes: tuple[str, ...]
    edges: tuple[tuple[str, str], ...]

    @property
    def isolated(self) -> list[str]:
        touched = {a for a, _ in self.edges} | {b for _, b in self.edges}
        return [n for n in self.nodes if n not in touched]

    def out_degree(self, node: str) -> int:
        return sum(1 for a, _ in self.edges if a == node)


def avalanche_network(results: Mapping[str, AvalancheResult]) -> AvalancheNetwork:
    """Edge i -> j whenever j collapses in the avalanche seeded at i."""
    edges = []
    for seed, res in results.items():
        edges.extend((seed, e.country) for e in sorted(res.events, key=lambda e: e.country))
    return AvalancheNetwork(tuple(results), tuple(edges))


@dataclass(frozen=True)
class IntraFraction:
    intra: int
    total: int

    @property
    def fraction(self) -> Optional[float]:
        return self.intra / self.total if self.total else None

    @property
    def inter(self) -> int:
        return self.total - self.intra


def intra_continental_fraction(edges: Iterable[Sequence], continents: Mapping[str, str]) -> IntraFraction:
    """Share of edges whose two endpoints carry the same continent tag.

    Accepts ``(a, b)`` pairs or ``(a, b, weight)`` triples.
    """
    intra = total = 0
    for e in edges:
        a, b = e[0], e[1]
        try:
            same = continents[a] == continents[b]
        except KeyError as exc:
            raise KeyError(f"no continent tag for {exc.args[0]!r}") from None
        intra += same
        total += 1
    return IntraFraction(intra, total)


def coarse_grain_continental(avnet: AvalancheNetwork, continents: Mapping[str, str]) -> dict[tuple[str, str], int]:
    """Count avalanche edges between continents; self-edges keep intra-continental mass."""
    counts = Counter((continents[a], continents[b]) for a, b in avnet.edges)
    return dict(sorted(counts.items()))


@dataclass(frozen=True)
class SummaryStats:
    sum_sizes: int
    typical_nonzero: Optional[float]
    likelihood: float
    n: int


def summary_stats(results: SizesLike) -> SummaryStats:
    """Sum of sizes, mean nonzero size (None if every avalanche is empty), share of nonzero avalanches."""
    sizes = sizes_of(results)
    if not sizes:
        raise ValueError("no avalanche results")
    nz = [s for s in sizes if s > 0]
    typical = sum(nz) / len(nz) if nz else None
    return SummaryStats(sum(sizes), typical, len(nz) / len(sizes), len(sizes))
