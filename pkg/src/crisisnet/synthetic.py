"""Synthetic scale-free trade networks for tests and benchmarks.

Topology comes from a Chung-Lu expected-degree model with power-law target
degrees; each undirected tie becomes a reciprocal pair or a single directed
link. Link volumes grow with the endpoint degrees and carry lognormal noise.
Capacities are proportional to total node strength with lognormal noise.
"""

from __future__ import annotations

import math
from typing import Optional

import numpy as np

from .data_model import CapacityMode, Country, MacroNet, TradeLink


def _target_degrees(n: int, gamma: float, mean_degree: float) -> np.ndarray:
    # rank-based power-law weights give degree distribution P(k) ~ k^-gamma
    ranks = np.arange(1, n + 1, dtype=float)
    w = ranks ** (-1.0 / (gamma - 1.0))
    return w * (mean_degree * n / w.sum())


def scale_free_trade_network(
    n: int = 200,
    *,
    gamma: float = 2.3,
    mean_degree: float = 8.0,
    reciprocity: float = 0.7,
    weight_exponent: float = 0.5,
    weight_sigma: float = 0.5,
    capacity_scale: float = 1.5,
    capacity_sigma: float = math.log(1.5),
    blocks: int = 0,
    intra_volume_share: float = 0.8,
    block_affinity: float = 4.0,
    seed: Optional[int] = 0,
) -> MacroNet:
    """Build a directed weighted scale-free network of ``n`` countries.

    With ``blocks > 0`` countries are dealt round-robin into that many
    continents (``B0``, ``B1``, ...); ties inside a block are ``block_affinity``
    times likelier, and volumes are rescaled so that ``intra_volume_share`` of
    the total volume stays inside blocks. Without blocks every country gets
    continent ``B0``.
    """
    rng = np.random.default_rng(seed)
    kappa = _target_degrees(n, gamma, mean_degree)
    block = np.arange(n) % blocks if blocks else np.zeros(n, dtype=np.int64)
    total = kappa.sum()
    p = np.minimum(1.0, np.outer(kappa, kappa) / total)
    if blocks:
        same = block[:, None] == block[None, :]
        bias = np.where(same, block_affinity, 1.0)
        # keep the expected total number of ties roughly unchanged
        bias *= p.sum() / (p * bias).sum()
        p = np.minimum(1.0, p * bias)
    iu, ju = np.triu_indices(n, k=1)
    keep = rng.random(iu.size) < p[iu, ju]
    iu, ju = iu[keep], ju[keep]

    src, dst = [], []
    both = rng.random(iu.size) < reciprocity
    flip = rng.random(iu.size) < 0.5
    for a, b, r, fl in zip(iu, ju, both, flip):
        if r:
            src += [a, b]
            dst += [b, a]
        elif fl:
            src.append(b)
            dst.append(a)
        else:
            src.append(a)
            dst.append(b)
    src = np.array(src, dtype=np.int64)
    dst = np.array(dst, dtype=np.int64)
    deg = np.bincount(np.concatenate([iu, ju]), minlength=n).astype(float)
    deg = np.maximum(deg, 1.0)
    vol = (deg[src] * deg[dst]) ** weight_exponent * rng.lognormal(0.0, weight_sigma, size=src.size)
    if blocks and src.size:
        intra = block[src] == block[dst]
        vi, vo = vol[intra].sum(), vol[~intra].sum()
        if vi > 0 and vo > 0:
            vol = np.where(intra, vol * intra_volume_share / vi, vol * (1 - intra_volume_share) / vo)
    # express in M$ with a median link around 100
    if vol.size:
        vol = vol * (100.0 / np.median(vol))

    strength = np.bincount(src, weights=vol, minlength=n) + np.bincount(dst, weights=vol, minlength=n)
    noise = rng.lognormal(0.0, capacity_sigma, size=n)
    gdp = capacity_scale * np.maximum(strength, 1.0) * noise

    width = len(str(n - 1))
    codes = [f"S{i:0{width}d}" for i in range(n)]
    countries = tuple(
        Country(codes[i], f"synthetic {i}", f"B{block[i]}", float(gdp[i])) for i in range(n)
    )
    links = tuple(TradeLink(codes[a], codes[b], float(v)) for a, b, v in zip(src, dst, vol))
    return MacroNet(countries, links, CapacityMode.GDP_ONLY)
