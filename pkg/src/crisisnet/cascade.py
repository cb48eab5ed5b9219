"""Threshold cascade of country collapses on a trade network.

A collapsing country cuts every incident link (both directions) by a fraction
``f`` of its original volume. A live country collapses in the next round when
the accumulated cut on its import side, or on its export side, exceeds ``t``
times its capacity. Rounds are synchronous; the seed collapses at round 0 and
is not counted in the avalanche size.

Only the ratio ``f / t`` affects the dynamics.
"""

from __future__ import annotations

import enum
import math
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Sequence, Union

import numpy as np

from .data_model import MacroNet


class Side(str, enum.Enum):
    IN = "IN"
    OUT = "OUT"


class Cause(str, enum.Enum):
    DIRECT = "DIRECT"
    INDIRECT = "INDIRECT"


class Label(str, enum.Enum):
    ONE_STEP_DIRECT = "ONE_STEP_DIRECT"
    MULTI_STEP_DIRECT = "MULTI_STEP_DIRECT"
    INDIRECT = "INDIRECT"
    RESIDUAL = "RESIDUAL"


LABEL_ORDER = (Label.ONE_STEP_DIRECT, Label.MULTI_STEP_DIRECT, Label.INDIRECT, Label.RESIDUAL)


@dataclass(frozen=True)
class CascadeParams:
    f: float = 0.7
    t: float = 0.1

    def __post_init__(self):
        for name in ("f", "t"):
            v = getattr(self, name)
            if not (0 < v <= 1):
                raise ValueError(f"{name} must lie in (0, 1], got {v}")

    @property
    def ratio(self) -> float:
        return self.f / self.t

    @classmethod
    def from_ratio(cls, ratio: float) -> "CascadeParams":
        """Fixed realization of a ratio: t = 0.1 up to ratio 10, then f = 1 and t = 1/ratio."""
        if not (ratio > 0 and math.isfinite(ratio)):
            raise ValueError(f"ratio must be positive and finite, got {ratio}")
        if ratio <= 10:
            return cls(f=0.1 * ratio, t=0.1)
        return cls(f=1.0, t=1.0 / ratio)


@dataclass(frozen=True)
class CollapseEvent:
    country: str
    step: int
    side: Side
    cause: Cause
    trigger: Optional[str]
    label: Label


@dataclass(frozen=True)
class AvalancheResult:
    seed: str
    events: tuple[CollapseEvent, ...]

    @property
    def size(self) -> int:
        return len(self.events)

    @property
    def duration(self) -> int:
        return max((e.step for e in self.events), default=0)

    @property
    def profile(self) -> dict[Label, int]:
        counts = Counter(e.label for e in self.events)
        return {label: counts.get(label, 0) for label in LABEL_ORDER}

    @property
    def collapsed(self) -> set[str]:
        return {e.country for e in self.events}


class _Compiled:
    """Dense arrays for one network, reused across seeds."""

    def __init__(self, net: MacroNet):
        self.codes = net.codes
        self.index = net.index
        self.w = np.asarray(net.weights)
        self.wt = np.ascontiguousarray(self.w.T)
        self.cap = np.asarray(net.capacities)
        order = sorted(range(len(self.codes)), key=self.codes.__getitem__)
        self.code_rank = np.empty(len(self.codes), dtype=np.int64)
        self.code_rank[order] = np.arange(len(self.codes))


_COMPILED_ATTR = "_crisisnet_compiled"


def _compiled(net: MacroNet) -> _Compiled:
    comp = net.__dict__.get(_COMPILED_ATTR)
    if comp is None:
        comp = _Compiled(net)
        net.__dict__[_COMPILED_ATTR] = comp
    return comp


def _run(comp: _Compiled, seed_idx: int, f: float, t: float) -> AvalancheResult:
    n = len(comp.codes)
    w, wt = comp.w, comp.wt
    thr = t * comp.cap
    step_of = np.full(n, -1, dtype=np.int64)
    step_of[seed_idx] = 0
    label_of: dict[int, Label] = {}
    in_cut = np.zeros(n)
    out_cut = np.zeros(n)
    frontier = np.array([seed_idx])
    events: list[CollapseEvent] = []
    step = 0
    while frontier.size:
        step += 1
        # volume exported by the newly collapsed to j hits j's import side
        in_cut += w[frontier].sum(axis=0)
        out_cut += wt[frontier].sum(axis=0)
        live = step_of < 0
        in_hit = live & (f * in_cut > thr)
        out_hit = live & (f * out_cut > thr)
        new = np.flatnonzero(in_hit | out_hit)
        if not new.size:
            break
        collapsed = np.flatnonzero(step_of >= 0)
        round_events = []
        for j in new:
            side = Side.IN if in_hit[j] and (not out_hit[j] or in_cut[j] >= out_cut[j]) else Side.OUT
            # single-neighbour contributions on every crossing side
            best: dict[int, float] = {}
            for hit, mat in ((in_hit[j], wt), (out_hit[j], w)):
                if not hit:
                    continue
                contrib = mat[j, collapsed]
                for k in collapsed[f * contrib > thr[j]]:
                    v = float(mat[j, k])
                    if v > best.get(k, -1.0):
                        best[k] = v
            if best:
                trig = min(best, key=lambda k: (-best[k], step_of[k], comp.code_rank[k]))
                if trig == seed_idx:
                    label = Label.ONE_STEP_DIRECT
                elif label_of[trig] in (Label.ONE_STEP_DIRECT, Label.MULTI_STEP_DIRECT):
                    label = Label.MULTI_STEP_DIRECT
                else:
                    label = Label.RESIDUAL
                ev = CollapseEvent(comp.codes[j], step, side, Cause.DIRECT, comp.codes[trig], label)
            else:
                label = Label.INDIRECT
                ev = CollapseEvent(comp.codes[j], step, side, Cause.INDIRECT, None, label)
            round_events.append((int(j), ev))
        for j, ev in round_events:
            step_of[j] = step
            label_of[j] = ev.label
        round_events.sort(key=lambda item: item[1].country)
        events.extend(ev for _, ev in round_events)
        frontier = new
    return AvalancheResult(comp.codes[seed_idx], tuple(events))


def run_avalanche(net: MacroNet, seed: str, params: CascadeParams = CascadeParams()) -> AvalancheResult:
    """Run the cascade started by the collapse of ``seed``.

    Events come ordered by step, then by country code. A collapse is DIRECT
    when a single collapsed neighbour's cut on a crossing side alone exceeds
    the threshold; the trigger is the largest such contributor (ties go to
    the earlier collapse, then the smaller code).
    """
    if seed not in net:
        raise KeyError(f"unknown seed country {seed!r}")
    comp = _compiled(net)
    return _run(comp, comp.index[seed], params.f, params.t)


def _run_chunk(args):
    net, seeds, f, t = args
    comp = _compiled(net)
    return [_run(comp, comp.index[s], f, t) for s in seeds]


def run_all(
    net: MacroNet, params: CascadeParams = CascadeParams(), *, workers: Optional[int] = None
) -> dict[str, AvalancheResult]:
    """Independent avalanche from every country, keyed by seed in network order."""
    codes = net.codes
    if not workers or workers <= 1 or len(codes) < 2:
        comp = _compiled(net)
        return {c: _run(comp, i, params.f, params.t) for i, c in enumerate(codes)}
    chunks = [codes[i::workers] for i in range(workers)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        parts = pool.map(_run_chunk, [(net, ch, params.f, params.t) for ch in chunks])
        by_seed = {r.seed: r for part in parts for r in part}
    return {c: by_seed[c] for c in codes}


SizesLike = Union[Mapping[str, AvalancheResult], Iterable[AvalancheResult], Iterable[int]]


def sizes_of(results: SizesLike) -> list[int]:
    if isinstance(results, Mapping):
        results = results.values()
    return [r.size if isinstance(r, AvalancheResult) else int(r) for r in results]


def cumulative_size_counts(results: SizesLike) -> list[tuple[int, int]]:
    """``(A, number of seeds with size >= A)`` for every A from 0 to the largest size."""
    sizes = sizes_of(results)
    if not sizes:
        raise ValueError("no avalanche results")
    hist = np.bincount(np.asarray(sizes, dtype=np.int64))
    tail = np.cumsum(hist[::-1])[::-1]
    return [(a, int(c)) for a, c in enumerate(tail)]


class InsufficientDataError(ValueError):
    pass


def default_fit_range(curve: Sequence[tuple[int, int]]) -> tuple[int, int]:
    """A from 1 to the largest A still reached by at least two seeds."""
    a_max = max((a for a, c in curve if c >= 2), default=0)
    return 1, a_max


def tail_exponent(curve: Sequence[tuple[int, int]], fit_range: Optional[tuple[int, int]] = None) -> float:
    """Least-squares slope of log10(count) against log10(A + 1).

    A slope near -1 on the cumulative counts corresponds to P(A) ~ A^-2.
    """
    lo, hi = fit_range if fit_range is not None else default_fit_range(curve)
    pts = [(a, c) for a, c in curve if lo <= a <= hi and c > 0]
    if len({a for a, _ in pts}) < 3:
        raise InsufficientDataError(f"need at least 3 points in A range [{lo}, {hi}], got {len(pts)}")
    x = np.log10(np.array([a for a, _ in pts], dtype=float) + 1.0)
    y = np.log10(np.array([c for _, c in pts], dtype=float))
    slope, _ = np.polyfit(x, y, 1)
    return float(slope)


class Regime(str, enum.Enum):
    RAPID_DECAY = "rapid-decay"
    BROAD = "broad"
    SPANNING_PEAK = "spanning-peak"


@dataclass(frozen=True)
class SweepRow:
    ratio: float
    f: float
    t: float
    max_size: int
    sum_sizes: int
    slope: Optional[float]
    regime: Regime
    curve: tuple[tuple[int, int], ...]

    @property
    def decades(self) -> float:
        """Span of the cumulative curve on the offset-by-one axis."""
        return math.log10(self.max_size + 1)


@dataclass(frozen=True)
class SweepResult:
    rows: tuple[SweepRow, ...]
    n_countries: int
    critical_ratio: Optional[float]
    low_confidence: bool
    subcritical_max_ratio: Optional[float]
    supercritical_min_ratio: Optional[float]

    def row(self, ratio: float) -> SweepRow:
        for r in self.rows:
            if r.ratio == ratio:
                return r
        raise KeyError(ratio)


def log_grid(start: float = 1.0, stop: float = 30.0, num: int = 30) -> list[float]:
    return [float(x) for x in np.geomspace(start, stop, num)]


def sweep(
    net: MacroNet,
    ratios: Sequence[float],
    *,
    fit_range: Optional[tuple[int, int]] = None,
    workers: Optional[int] = None,
) -> SweepResult:
    """Run every seed at each f/t ratio and locate the power-law-like regime.

    The critical estimate is the ratio whose tail slope is closest to -1.
    Regimes: rapid decay when the largest avalanche stays under 5% of the
    countries, spanning peak when some avalanche covers more than half.
    """
    if not ratios:
        raise ValueError("empty ratio grid")
    n = len(net)
    rows = []
    for r in sorted(ratios):
        params = CascadeParams.from_ratio(r)
        sizes = sizes_of(run_all(net, params, workers=workers))
        curve = cumulative_size_counts(sizes) if sizes else [(0, 0)]
        try:
            slope = tail_exponent(curve, fit_range)
        except InsufficientDataError:
            slope = None
        mx = max(sizes, default=0)
        if mx < 0.05 * n:
            regime = Regime.RAPID_DECAY
        elif mx > 0.5 * n:
            regime = Regime.SPANNING_PEAK
        else:
            regime = Regime.BROAD
        rows.append(SweepRow(r, params.f, params.t, mx, sum(sizes), slope, regime, tuple(curve)))
    fitted = [row for row in rows if row.slope is not None]
    critical = min(fitted, key=lambda row: abs(row.slope + 1)).ratio if fitted else None
    low = [row.ratio for row in rows if row.regime is Regime.RAPID_DECAY]
    high = [row.ratio for row in rows if row.regime is Regime.SPANNING_PEAK]
    return SweepResult(
        rows=tuple(rows),
        n_countries=n,
        critical_ratio=critical,
        low_confidence=critical is not None and len(rows) < 3,
        subcritical_max_ratio=max(low) if low else None,
        supercritical_min_ratio=min(high) if high else None,
    )
