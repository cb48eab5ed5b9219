"""Threshold cascades of economic crises on directed trade networks."""

__version__ = "0.1.0"

from .data_model import (
    CapacityMode,
    Country,
    DataError,
    MacroNet,
    TradeLink,
    build_network,
    capacity,
    load_countries,
    load_network,
    load_trades,
)
from .cascade import (
    AvalancheResult,
    CascadeParams,
    CollapseEvent,
    Label,
    cumulative_size_counts,
    run_all,
    run_avalanche,
    sweep,
    tail_exponent,
)
from .analytics import (
    avalanche_network,
    coarse_grain_continental,
    intra_continental_fraction,
    max_spanning_forest,
    spearman_gdp_avalanche,
    summary_stats,
    tgp_profile,
)
from .randomize import GsnConfig, empirical_p, ensemble, gdn_sample, gsn_sample
