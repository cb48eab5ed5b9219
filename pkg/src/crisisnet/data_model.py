"""Country/trade tables and the directed, node- and link-weighted network built from them.

All monetary values are in million US dollars. Inputs are expected to be
pre-averaged single snapshots; no temporal aggregation happens here.
"""

from __future__ import annotations

import csv
import enum
import math
import warnings
from dataclasses import dataclass
from functools import cached_property
from typing import IO, Iterable, Optional, Sequence

import numpy as np

COUNTRY_COLUMNS = ("code", "name", "continent", "gdp_musd")
COUNTRY_OPTIONAL_COLUMNS = ("cab_musd",)
TRADE_COLUMNS = ("exporter", "importer", "volume_musd")


class DataError(ValueError):
    """Raised when input tables or network construction fail validation.

    ``issues`` holds every problem found as ``(row, message)`` pairs, with
    ``row`` being the 1-based line number in the source (header = 1) or
    ``None`` for problems not tied to a row.
    """

    def __init__(self, issues: Sequence[tuple[Optional[int], str]]):
        self.issues = list(issues)
        lines = [f"row {r}: {m}" if r is not None else m for r, m in self.issues]
        super().__init__("; ".join(lines))


class DataWarning(UserWarning):
    pass


class CapacityMode(enum.Enum):
    GDP_ONLY = "gdp"
    GDP_PLUS_CAB = "gdp-cab"


@dataclass(frozen=True)
class Country:
    code: str
    name: str
    continent: str
    gdp: float
    cab: Optional[float] = None

    def __post_init__(self):
        if not self.code:
            raise ValueError("country code must be non-empty")
        if not self.continent:
            raise ValueError(f"{self.code}: continent must be non-empty")
        if not (self.gdp > 0 and math.isfinite(self.gdp)):
            raise ValueError(f"{self.code}: gdp must be a positive finite number, got {self.gdp}")


@dataclass(frozen=True)
class TradeLink:
    exporter: str
    importer: str
    volume: float

    def __post_init__(self):
        if self.exporter == self.importer:
            raise ValueError(f"self-loop {self.exporter}->{self.importer}")
        if not (self.volume > 0 and math.isfinite(self.volume)):
            raise ValueError(f"{self.exporter}->{self.importer}: volume must be positive, got {self.volume}")


def _read_table(source: IO[str], required: Sequence[str], what: str):
    reader = csv.DictReader(source)
    header = reader.fieldnames
    if header is None:
        raise DataError([(1, f"{what}: missing header")])
    header = [h.strip() for h in header]
    reader.fieldnames = header
    missing = [c for c in required if c not in header]
    if missing:
        raise DataError([(1, f"{what}: missing required column(s) {', '.join(missing)}")])
    return reader, header


def _parse_float(text: Optional[str]) -> float:
    if text is None:
        raise ValueError("missing value")
    return float(text.strip())


def load_countries(source: IO[str]) -> list[Country]:
    """Parse a ``code,name,continent,gdp_musd[,cab_musd]`` CSV stream.

    Every row-level problem is collected and raised together as a
    :class:`DataError`, so a single pass reports all of them.
    """
    reader, header = _read_table(source, COUNTRY_COLUMNS, "countries")
    has_cab = "cab_musd" in header
    issues: list[tuple[Optional[int], str]] = []
    out: list[Country] = []
    seen: dict[str, int] = {}
    for row in reader:
        line = reader.line_num
        code = (row.get("code") or "").strip()
        continent = (row.get("continent") or "").strip()
        name = (row.get("name") or "").strip()
        if not code:
            issues.append((line, "empty country code"))
            continue
        if code in seen:
            issues.append((line, f"duplicate country code {code} (first seen on row {seen[code]})"))
            continue
        seen[code] = line
        if not continent:
            issues.append((line, f"{code}: empty continent"))
            continue
        try:
            gdp = _parse_float(row.get("gdp_musd"))
        except ValueError:
            issues.append((line, f"{code}: unparseable gdp_musd {row.get('gdp_musd')!r}"))
            continue
        if not (gdp > 0 and math.isfinite(gdp)):
            issues.append((line, f"{code}: non-positive gdp_musd {gdp:g}"))
            continue
        cab = None
        raw_cab = (row.get("cab_musd") or "").strip() if has_cab else ""
        if raw_cab:
            try:
                cab = float(raw_cab)
            except ValueError:
                issues.append((line, f"{code}: unparseable cab_musd {raw_cab!r}"))
                continue
        out.append(Country(code, name, continent, gdp, cab))
    if issues:
        raise DataError(issues)
    return out


def load_trades(source: IO[str]) -> list[TradeLink]:
    """Parse an ``exporter,importer,volume_musd`` CSV stream."""
    reader, _ = _read_table(source, TRADE_COLUMNS, "trades")
    issues: list[tuple[Optional[int], str]] = []
    out: list[TradeLink] = []
    seen: dict[tuple[str, str], int] = {}
    for row in reader:
        line = reader.line_num
        src = (row.get("exporter") or "").strip()
        dst = (row.get("importer") or "").strip()
        if not src or not dst:
            issues.append((line, "empty exporter or importer"))
            continue
        if src == dst:
            issues.append((line, f"self-loop {src}->{dst}"))
            continue
        if (src, dst) in seen:
            issues.append((line, f"duplicate pair {src}->{dst} (first seen on row {seen[src, dst]})"))
            continue
        seen[src, dst] = line
        try:
            vol = _parse_float(row.get("volume_musd"))
        except ValueError:
            issues.append((line, f"{src}->{dst}: unparseable volume_musd {row.get('volume_musd')!r}"))
            continue
        if not (vol > 0 and math.isfinite(vol)):
            issues.append((line, f"{src}->{dst}: non-positive volume_musd {vol:g}"))
            continue
        out.append(TradeLink(src, dst, vol))
    if issues:
        raise DataError(issues)
    return out


@dataclass(frozen=True, eq=False)
class MacroNet:
    """Immutable directed trade network over countries.

    Countries keep their input order; ``index`` maps codes to positions used
    by the dense arrays (``weights[i, j]`` is the volume exported by ``i`` to
    ``j``). Cached arrays make the object cheap to share across workers.
    """

    countries: tuple[Country, ...]
    links: tuple[TradeLink, ...]
    capacity_mode: CapacityMode = CapacityMode.GDP_ONLY

    def __post_init__(self):
        index = {}
        for c in self.countries:
            if c.code in index:
                raise DataError([(None, f"duplicate country code {c.code}")])
            index[c.code] = len(index)
        pairs = set()
        for link in self.links:
            if link.exporter not in index or link.importer not in index:
                raise DataError([(None, f"link {link.exporter}->{link.importer} has an unknown endpoint")])
            key = (link.exporter, link.importer)
            if key in pairs:
                raise DataError([(None, f"duplicate pair {key[0]}->{key[1]}")])
            pairs.add(key)
        if self.capacity_mode is CapacityMode.GDP_PLUS_CAB:
            lacking = [c.code for c in self.countries if c.cab is None]
            if lacking:
                raise DataError([(None, "capacity mode gdp-cab requires cab_musd; missing for " + ", ".join(lacking))])

    def __eq__(self, other):
        if not isinstance(other, MacroNet):
            return NotImplemented
        return (
            self.countries == other.countries
            and set(self.links) == set(other.links)
            and self.capacity_mode == other.capacity_mode
        )

    __hash__ = None

    @cached_property
    def index(self) -> dict[str, int]:
        return {c.code: i for i, c in enumerate(self.countries)}

    @property
    def codes(self) -> list[str]:
        return [c.code for c in self.countries]

    def __len__(self):
        return len(self.countries)

    def __contains__(self, code):
        return code in self.index

    def country(self, code: str) -> Country:
        try:
            return self.countries[self.index[code]]
        except KeyError:
            raise KeyError(f"unknown country {code!r}") from None

    @cached_property
    def continents(self) -> dict[str, str]:
        return {c.code: c.continent for c in self.countries}

    @cached_property
    def weights(self) -> np.ndarray:
        n = len(self.countries)
        w = np.zeros((n, n))
        for link in self.links:
            w[self.index[link.exporter], self.index[link.importer]] = link.volume
        w.setflags(write=False)
        return w

    @cached_property
    def capacities(self) -> np.ndarray:
        cap = np.array([capacity(self, c.code) for c in self.countries], dtype=float)
        cap.setflags(write=False)
        return cap

    def weight(self, exporter: str, importer: str) -> float:
        return float(self.weights[self.index[exporter], self.index[importer]])

    def out_strength(self, code: str) -> float:
        return math.fsum(l.volume for l in self.links if l.exporter == code)

    def in_strength(self, code: str) -> float:
        return math.fsum(l.volume for l in self.links if l.importer == code)

    def total_volume(self) -> float:
        return math.fsum(l.volume for l in self.links)

    def partners(self, code: str) -> set[str]:
        """Union of in- and out-neighbours of ``code``."""
        self.country(code)
        out = {l.importer for l in self.links if l.exporter == code}
        out |= {l.exporter for l in self.links if l.importer == code}
        return out

    def with_links(self, links: Iterable[TradeLink]) -> "MacroNet":
        """Same countries and capacity mode, different link set."""
        return MacroNet(self.countries, tuple(links), self.capacity_mode)

    def with_mode(self, mode: CapacityMode) -> "MacroNet":
        return MacroNet(self.countries, self.links, mode)


def build_network(
    countries: Sequence[Country],
    trades: Sequence[TradeLink],
    mode: CapacityMode = CapacityMode.GDP_ONLY,
    *,
    strict: bool = True,
) -> MacroNet:
    """Assemble a :class:`MacroNet`.

    In strict mode a trade whose exporter or importer is not among
    ``countries`` is an error; in lenient mode such trades are dropped with a
    :class:`DataWarning`. Countries without any trade stay as isolated nodes.
    """
    known = {c.code for c in countries}
    kept = []
    unknown = []
    for link in trades:
        missing = [c for c in (link.exporter, link.importer) if c not in known]
        if missing:
            unknown.append((link, missing))
        else:
            kept.append(link)
    if unknown:
        if strict:
            raise DataError(
                [(None, f"link {l.exporter}->{l.importer}: unknown country {', '.join(m)}") for l, m in unknown]
            )
        for link, missing in unknown:
            warnings.warn(
                f"dropping link {link.exporter}->{link.importer}: unknown country {', '.join(missing)}",
                DataWarning,
                stacklevel=2,
            )
    return MacroNet(tuple(countries), tuple(kept), mode)


def capacity(net: MacroNet, country: str) -> float:
    """Collapse-tolerance budget of ``country`` under the network's capacity mode."""
    c = net.country(country)
    if net.capacity_mode is CapacityMode.GDP_ONLY:
        return c.gdp
    if c.cab is None:
        raise DataError([(None, f"{c.code}: capacity mode gdp-cab requires cab_musd")])
    return c.gdp + c.cab


def write_countries(countries: Iterable[Country], sink: IO[str]) -> None:
    writer = csv.writer(sink, lineterminator="\n")
    writer.writerow(COUNTRY_COLUMNS + COUNTRY_OPTIONAL_COLUMNS)
    for c in countries:
        writer.writerow([c.code, c.name, c.continent, repr(c.gdp), "" if c.cab is None else repr(c.cab)])


def write_trades(links: Iterable[TradeLink], sink: IO[str]) -> None:
    # repr() round-trips floats exactly
    writer = csv.writer(sink, lineterminator="\n")
    writer.writerow(TRADE_COLUMNS)
    for l in links:
        writer.writerow([l.exporter, l.importer, repr(l.volume)])


def load_network(countries_path, trades_path, mode=CapacityMode.GDP_ONLY, *, strict=True) -> MacroNet:
    with open(countries_path, newline="", encoding="utf-8") as fh:
        countries = load_countries(fh)
    with open(trades_path, newline="", encoding="utf-8") as fh:
        trades = load_trades(fh)
    return build_network(countries, trades, mode, strict=strict)
