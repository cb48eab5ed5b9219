"""Null-model randomizations of a trade network and ensemble statistics over them.

Two generators:

* GSN (globally shuffled network): partner swaps between links of nearly
  equal weight. Link weights stay attached to their exporter, so in/out
  degrees and each country's outgoing weights are kept exactly.
* GDN (globally distributed network): every link is cut into 1 M$ units
  whose export and import ends are re-paired uniformly at random, excluding
  same-country pairs, then merged back into weighted links.

Reproducibility: a sample's RNG seed is the first 64-bit word produced by
``numpy.random.SeedSequence(master_seed, spawn_key=(index,))``, and all
streams are ``numpy.random.Generator(PCG64)``. Results therefore depend only
on ``(master_seed, index)``, not on scheduling.
"""

from __future__ import annotations

import enum
import logging
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .analytics import (
    avalanche_network,
    intra_continental_fraction,
    max_spanning_forest,
    summary_stats,
)
from .cascade import CascadeParams, run_all
from .data_model import DataWarning, MacroNet, TradeLink

log = logging.getLogger(__name__)


class RandomizationError(RuntimeError):
    pass


class RandomizationWarning(UserWarning):
    pass


# -- GSN ---------------------------------------------------------------------


@dataclass(frozen=True)
class GsnConfig:
    weight_tolerance: float = 0.01
    max_accepted_swaps: Optional[int] = None  # default 20 * |E|
    max_attempts: Optional[int] = None  # default 200 * |E|
    rng_seed: int = 0

    def __post_init__(self):
        if not self.weight_tolerance > 0:
            raise ValueError("weight_tolerance must be positive")
        for name in ("max_accepted_swaps", "max_attempts"):
            v = getattr(self, name)
            if v is not None and v <= 0:
                raise ValueError(f"{name} must be positive")

    def budgets(self, n_links: int) -> tuple[int, int]:
        acc = self.max_accepted_swaps if self.max_accepted_swaps is not None else 20 * n_links
        att = self.max_attempts if self.max_attempts is not None else 200 * n_links
        return acc, att


@dataclass(frozen=True)
class GsnRun:
    net: MacroNet
    accepted: int
    attempts: int
    trace: tuple[tuple[int, int], ...]  # (attempts, accepted) checkpoints


def weights_compatible(w1: float, w2: float, tolerance: float = 0.01) -> bool:
    """Relative difference below ``tolerance`` measured against both weights."""
    d = abs(w1 - w2)
    return d < tolerance * w1 and d < tolerance * w2


_GSN_BATCH = 8192


def gsn_shuffle(net: MacroNet, config: GsnConfig = GsnConfig()) -> GsnRun:
    """Partner-swap randomization with full bookkeeping.

    Each attempt draws two distinct links (i->j, w1) and (k->l, w2) uniformly
    and proposes (i->l, w1), (k->j, w2). It is accepted when the two original
    weights are within the relative tolerance of each other and the result
    has no self-loop or repeated ordered pair. Stops at the accepted-swap or
    attempt budget, whichever comes first.

    Weights never change, so the tolerance test depends only on which two
    links were drawn; it is evaluated for a whole batch of draws at once and
    only the survivors are checked against the current topology, in draw
    order.
    """
    links = net.links
    n_links = len(links)
    if n_links < 2:
        raise RandomizationError("GSN needs at least two links")
    max_acc, max_att = config.budgets(n_links)
    idx = net.index
    n = len(net)
    src = np.array([idx[l.exporter] for l in links], dtype=np.int64)
    dst = np.array([idx[l.importer] for l in links], dtype=np.int64)
    w = np.array([l.volume for l in links])
    present = set((src * n + dst).tolist())
    rng = np.random.default_rng(config.rng_seed)
    tol = config.weight_tolerance
    accepted = attempts = 0
    trace = []
    while accepted < max_acc and attempts < max_att:
        m = min(_GSN_BATCH, max_att - attempts)
        a = rng.integers(n_links, size=m)
        b = rng.integers(n_links - 1, size=m)
        b += b >= a
        d = np.abs(w[a] - w[b])
        ok = np.flatnonzero((d < tol * w[a]) & (d < tol * w[b]))
        used = m
        for p in ok:
            x, y = a[p], b[p]
            i, j, k, l = src[x], dst[x], src[y], dst[y]
            if i == l or k == j:
                continue
            e1, e2 = i * n + l, k * n + j
            if e1 in present or e2 in present:
                continue
            present.discard(i * n + j)
            present.discard(k * n + l)
            present.add(e1)
            present.add(e2)
            dst[x], dst[y] = l, j
            accepted += 1
            if accepted >= max_acc:
                used = int(p) + 1
                break
        attempts += used
        trace.append((attempts, accepted))
    codes = net.codes
    new_links = tuple(TradeLink(codes[s], codes[t], float(v)) for s, t, v in zip(src, dst, w))
    if accepted == 0:
        warnings.warn(
            f"GSN accepted no swaps in {attempts} attempts; sample equals the input",
            RandomizationWarning,
            stacklevel=2,
        )
    return GsnRun(net.with_links(new_links), accepted, attempts, tuple(trace))


def gsn_sample(net: MacroNet, config: GsnConfig = GsnConfig()) -> MacroNet:
    return gsn_shuffle(net, config).net


# -- GDN ---------------------------------------------------------------------


def round_half_up(x):
    return np.floor(np.asarray(x, dtype=float) + 0.5).astype(np.int64)


def unit_totals(net: MacroNet) -> tuple[dict[str, int], dict[str, int]]:
    """Per-country export and import unit counts after rounding each link to whole M$."""
    exp: dict[str, int] = {}
    imp: dict[str, int] = {}
    for l, u in zip(net.links, round_half_up([l.volume for l in net.links]).tolist()):
        if u <= 0:
            continue
        exp[l.exporter] = exp.get(l.exporter, 0) + u
        imp[l.importer] = imp.get(l.importer, 0) + u
    return exp, imp


def gdn_sample(net: MacroNet, rng_seed: int = 0) -> MacroNet:
    """Unit-stub re-pairing with same-country pairings rejected.

    Unmatched stubs are re-paired in rounds by a fresh random permutation,
    keeping every cross-country pair each round. If the leftovers all belong
    to one country on both sides, each leftover pair (c, c) is repaired by
    picking a uniformly random existing pair (x, y) with x, y != c and
    replacing it by (x, c), (c, y).
    """
    rng = np.random.default_rng(rng_seed)
    idx = net.index
    codes = net.codes
    n = len(net)
    vols = [l.volume for l in net.links]
    units = round_half_up(vols) if vols else np.zeros(0, dtype=np.int64)
    dropped = [l for l, u in zip(net.links, units) if u <= 0]
    if dropped:
        warnings.warn(
            f"GDN dropped {len(dropped)} link(s) rounding to zero units, e.g. "
            f"{dropped[0].exporter}->{dropped[0].importer} ({dropped[0].volume:g} M$)",
            DataWarning,
            stacklevel=2,
        )
    src = np.array([idx[l.exporter] for l in net.links], dtype=np.int64)
    dst = np.array([idx[l.importer] for l in net.links], dtype=np.int64)
    pool_e = np.repeat(src, units) if len(src) else np.zeros(0, dtype=np.int64)
    pool_i = np.repeat(dst, units) if len(dst) else np.zeros(0, dtype=np.int64)
    done_e: list[np.ndarray] = []
    done_i: list[np.ndarray] = []
    while pool_e.size:
        shuffled = pool_i[rng.permutation(pool_i.size)]
        ok = pool_e != shuffled
        if ok.any():
            done_e.append(pool_e[ok])
            done_i.append(shuffled[ok])
            pool_e, pool_i = pool_e[~ok], shuffled[~ok]
            continue
        c = pool_e[0]
        if not (np.all(pool_e == c) and np.all(pool_i == c)):
            pool_i = shuffled
            continue
        me = np.concatenate(done_e) if done_e else np.zeros(0, dtype=np.int64)
        mi = np.concatenate(done_i) if done_i else np.zeros(0, dtype=np.int64)
        # a repaired pair (x, c) is never eligible again, so one-at-a-time uniform
        # picks are the same as drawing without replacement
        eligible = np.flatnonzero((me != c) & (mi != c))
        if eligible.size < pool_e.size:
            raise RandomizationError(
                f"GDN deadlock: {codes[c]} holds more units than can be paired with other countries"
            )
        log.debug("GDN repair: %d leftover %s->%s unit(s)", pool_e.size, codes[c], codes[c])
        chosen = rng.choice(eligible, size=pool_e.size, replace=False)
        moved = mi[chosen].copy()
        mi[chosen] = c
        done_e = [me, np.full(pool_e.size, c, dtype=np.int64)]
        done_i = [mi, moved]
        pool_e = pool_i = np.zeros(0, dtype=np.int64)
    if done_e:
        pairs = np.concatenate(done_e) * n + np.concatenate(done_i)
        keys, counts = np.unique(pairs, return_counts=True)
    else:
        keys = counts = np.zeros(0, dtype=np.int64)
    new_links = tuple(TradeLink(codes[k // n], codes[k % n], float(c)) for k, c in zip(keys.tolist(), counts.tolist()))
    return net.with_links(new_links)


# -- empirical p-values ------------------------------------------------------


class Tail(str, enum.Enum):
    UPPER = "upper"
    LOWER = "lower"


@dataclass(frozen=True)
class EmpiricalP:
    count: int
    n: int
    tail: Tail

    @property
    def is_bound(self) -> bool:
        return self.count == 0

    @property
    def value(self) -> float:
        """count/S, or the bound 1/S when no sample is as extreme."""
        return (self.count if self.count else 1) / self.n

    def __str__(self):
        if self.is_bound:
            return f"< {1 / self.n:g}"
        return f"{self.value:g}"

    def to_json(self) -> dict:
        return {
            "tail": self.tail.value,
            "count": self.count,
            "samples": self.n,
            "value": self.value,
            "bound": "<" if self.is_bound else None,
            "display": str(self),
        }


def empirical_p(observed: float, samples: Sequence[float], tail: Tail | str = Tail.UPPER) -> EmpiricalP:
    """Fraction of samples at least as extreme as ``observed``; NaN samples are ignored."""
    tail = Tail(tail)
    arr = np.asarray(samples, dtype=float)
    arr = arr[~np.isnan(arr)]
    if not arr.size:
        raise ValueError("no samples")
    count = int(np.sum(arr >= observed) if tail is Tail.UPPER else np.sum(arr <= observed))
    return EmpiricalP(count, int(arr.size), tail)


# -- ensembles ---------------------------------------------------------------


class Generator(str, enum.Enum):
    GSN = "gsn"
    GDN = "gdn"


# direction in which the null model is expected to exceed the observed network
STAT_TAILS: dict[str, Tail] = {
    "sum_sizes": Tail.UPPER,
    "typical_nonzero": Tail.UPPER,
    "likelihood": Tail.LOWER,
    "avnet_edges": Tail.UPPER,
    "avnet_intra": Tail.LOWER,
    "forest_intra": Tail.LOWER,
}


def derive_sample_seed(master_seed: int, index: int) -> int:
    ss = np.random.SeedSequence(master_seed, spawn_key=(index,))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def network_stats(net: MacroNet, params: CascadeParams) -> tuple[dict[str, float], dict[str, int]]:
    """Statistics tracked per ensemble sample, plus the per-country sizes."""
    results = run_all(net, params)
    summ = summary_stats(results)
    avnet = avalanche_network(results)
    forest = max_spanning_forest(net)
    cont = net.continents
    stats = {
        "sum_sizes": float(summ.sum_sizes),
        "typical_nonzero": math.nan if summ.typical_nonzero is None else summ.typical_nonzero,
        "likelihood": summ.likelihood,
        "avnet_edges": float(len(avnet.edges)),
        "avnet_intra": float(intra_continental_fraction(avnet.edges, cont).intra),
        "forest_intra": float(intra_continental_fraction(forest.edges, cont).intra),
    }
    return stats, {s: r.size for s, r in results.items()}


@dataclass
class EnsembleSummary:
    generator: Generator
    master_seed: int
    params: CascadeParams
    requested: int
    sample_indices: list[int] = field(default_factory=list)
    values: dict[str, list[float]] = field(default_factory=dict)
    sizes: dict[str, list[int]] = field(default_factory=dict)
    observed: dict[str, float] = field(default_factory=dict)
    observed_sizes: dict[str, int] = field(default_factory=dict)
    failures: list[tuple[int, str]] = field(default_factory=list)
    warnings: list[tuple[int, str]] = field(default_factory=list)

    @property
    def n_samples(self) -> int:
        return len(self.sample_indices)

    def mean(self, stat: str) -> float:
        arr = np.asarray(self.values[stat], dtype=float)
        return float(np.nanmean(arr)) if np.any(~np.isnan(arr)) else math.nan

    def sd(self, stat: str) -> float:
        arr = np.asarray(self.values[stat], dtype=float)
        return float(np.nanstd(arr)) if np.any(~np.isnan(arr)) else math.nan

    def p_value(self, stat: str) -> Optional[EmpiricalP]:
        obs = self.observed.get(stat)
        if obs is None or math.isnan(obs):
            return None
        vals = [v for v in self.values[stat] if not math.isnan(v)]
        if not vals:
            return None
        return empirical_p(obs, vals, STAT_TAILS[stat])

    def mean_sizes(self) -> dict[str, float]:
        return {c: float(np.mean(v)) if v else math.nan for c, v in self.sizes.items()}

    def to_json(self) -> dict:
        def num(x):
            return None if x is None or (isinstance(x, float) and math.isnan(x)) else x

        stats = {}
        for name in STAT_TAILS:
            p = self.p_value(name)
            stats[name] = {
                "values": [num(v) for v in self.values[name]],
                "mean": num(self.mean(name)),
                "sd": num(self.sd(name)),
                "observed": num(self.observed.get(name)),
                "tail": STAT_TAILS[name].value,
                "p": p.to_json() if p else None,
            }
        ranked = sorted(self.mean_sizes().items(), key=lambda kv: (-(kv[1] if not math.isnan(kv[1]) else -1), kv[0]))
        return {
            "generator": self.generator.value,
            "master_seed": self.master_seed,
            "seed_derivation": "SeedSequence(master_seed, spawn_key=(index,)).generate_state(1, uint64)[0] -> PCG64",
            "f": self.params.f,
            "t": self.params.t,
            "samples_requested": self.requested,
            "samples_used": self.n_samples,
            "sample_indices": self.sample_indices,
            "statistics": stats,
            "mean_sizes": [{"country": c, "mean_size": num(m), "observed": self.observed_sizes.get(c)} for c, m in ranked],
            "failures": [{"sample": i, "error": e} for i, e in self.failures],
            "warnings": [{"sample": i, "warning": w} for i, w in self.warnings],
        }


def _one_sample(args):
    net, generator, index, master_seed, params, gsn_config = args
    seed = derive_sample_seed(master_seed, index)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        try:
            if generator is Generator.GSN:
                base = gsn_config or GsnConfig()
                cfg = GsnConfig(base.weight_tolerance, base.max_accepted_swaps, base.max_attempts, seed)
                sample = gsn_sample(net, cfg)
            else:
                sample = gdn_sample(net, seed)
        except (RandomizationError, ValueError) as exc:
            return index, None, None, str(exc), [str(w.message) for w in caught]
    stats, sizes = network_stats(sample, params)
    return index, stats, sizes, None, [str(w.message) for w in caught]


def ensemble(
    net: MacroNet,
    generator: Generator | str,
    samples: int,
    params: CascadeParams = CascadeParams(),
    master_seed: int = 0,
    *,
    gsn_config: Optional[GsnConfig] = None,
    workers: Optional[int] = None,
) -> EnsembleSummary:
    """Generate ``samples`` null networks and aggregate their cascade statistics.

    Failed samples are skipped and listed in ``failures``; the observed
    network's statistics are computed alongside for empirical p-values.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    generator = Generator(generator)
    summary = EnsembleSummary(generator, master_seed, params, samples)
    obs, obs_sizes = network_stats(net, params)
    summary.observed = obs
    summary.observed_sizes = obs_sizes
    summary.values = {k: [] for k in STAT_TAILS}
    summary.sizes = {c: [] for c in net.codes}
    jobs = [(net, generator, i, master_seed, params, gsn_config) for i in range(samples)]
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_one_sample, jobs))
    else:
        outcomes = [_one_sample(j) for j in jobs]
    for index, stats, sizes, error, warns in sorted(outcomes, key=lambda o: o[0]):
        summary.warnings.extend((index, w) for w in warns)
        if error is not None:
            log.warning("sample %d skipped: %s", index, error)
            summary.failures.append((index, error))
            continue
        summary.sample_indices.append(index)
        for k, v in stats.items():
            summary.values[k].append(v)
        for c, s in sizes.items():
            summary.sizes[c].append(s)
    return summary
