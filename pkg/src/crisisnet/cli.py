"""Command-line front end.

    crisisnet validate   --countries C.csv --trades T.csv
    crisisnet avalanche  --countries C.csv --trades T.csv --seed ALL --out results/
    crisisnet sweep      ... --grid 1:30:30
    crisisnet topology   ... --recompute
    crisisnet randomize  ... --model gsn --samples 1000
    crisisnet report     ... --out bundle/

Exit status is 1 on any error; warnings alone keep it at 0.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import logging
import sys
import warnings
from pathlib import Path
from typing import Optional

from . import __version__
from .analytics import (
    avalanche_network,
    coarse_grain_continental,
    intra_continental_fraction,
    max_spanning_forest,
    spearman_gdp_avalanche,
    summary_stats,
    tgp_profile,
)
from .cascade import CascadeParams, cumulative_size_counts, log_grid, run_all, run_avalanche, sweep
from .data_model import (
    CapacityMode,
    DataError,
    MacroNet,
    build_network,
    load_countries,
    load_trades,
)
from .export import (
    avalanche_network_dot,
    continental_json,
    dump_json,
    fraction_line,
    maybe,
    read_events_csv,
    spanning_forest_dot,
    summary_dict,
    write_distribution_csv,
    write_ensemble_samples_csv,
    write_events_csv,
    write_results_csv,
    write_sweep_csv,
    write_tgp_csv,
)
from .randomize import GsnConfig, ensemble

log = logging.getLogger("crisisnet")

DEFAULT_F = 0.7
DEFAULT_T = 0.1


class CliError(Exception):
    pass


def _mode(text: str) -> CapacityMode:
    return CapacityMode(text)


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--countries", required=True, type=Path, help="countries CSV (code,name,continent,gdp_musd[,cab_musd])")
    p.add_argument("--trades", required=True, type=Path, help="trades CSV (exporter,importer,volume_musd)")
    p.add_argument("--capacity-mode", type=_mode, default=CapacityMode.GDP_ONLY, choices=list(CapacityMode),
                   metavar="{gdp,gdp-cab}")
    p.add_argument("--lenient", action="store_true", help="drop trades with unknown countries instead of failing")
    p.add_argument("--f", type=float, help=f"link cut fraction (default {DEFAULT_F})")
    p.add_argument("--t", type=float, help=f"capacity threshold fraction (default {DEFAULT_T})")
    p.add_argument("--ft-ratio", type=float, help="shorthand for a fixed (f, t) realization of this ratio")
    p.add_argument("--rng-seed", type=int, default=0)
    p.add_argument("--out", type=Path, default=Path("."))
    p.add_argument("--jobs", type=int, default=1, help="worker processes")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="crisisnet", description="Crisis cascades on trade networks.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check input tables")
    _common(p)

    p = sub.add_parser("avalanche", help="run avalanches from one seed or ALL")
    _common(p)
    p.add_argument("--seed", default="ALL")
    p.add_argument("--events", action="store_true", help="also write events.csv")

    p = sub.add_parser("sweep", help="scan f/t ratios")
    _common(p)
    p.add_argument("--grid", default="1:30:30", help="START:STOP:NUM, log-spaced (default 1:30:30)")
    p.add_argument("--ratios", help="explicit comma-separated ratios; overrides --grid")

    p = sub.add_parser("topology", help="spanning forest, avalanche network, continental views")
    _common(p)
    src = p.add_mutually_exclusive_group()
    src.add_argument("--events-file", type=Path, help="events.csv from a previous 'avalanche --events' run")
    src.add_argument("--recompute", action="store_true", help="recompute avalanches from the dataset")

    p = sub.add_parser("randomize", help="GSN/GDN null-model ensemble")
    _common(p)
    p.add_argument("--model", choices=["gsn", "gdn"], required=True)
    p.add_argument("--samples", type=int, default=100)
    p.add_argument("--raw", action="store_true", help="also write per-sample CSV")
    _gsn_opts(p)

    p = sub.add_parser("report", help="full bundle with manifest")
    _common(p)
    p.add_argument("--samples", type=int, default=20, help="ensemble size per null model (0 disables)")
    p.add_argument("--tgp", default="", help="comma-separated countries to profile")
    p.add_argument("--grid", default="1:30:30")
    _gsn_opts(p)
    return parser


def _gsn_opts(p):
    p.add_argument("--gsn-tolerance", type=float, default=0.01)
    p.add_argument("--gsn-swaps", type=int, help="accepted-swap budget (default 20*|E|)")
    p.add_argument("--gsn-attempts", type=int, help="attempt budget (default 200*|E|)")


def resolve_params(args) -> CascadeParams:
    """Explicit --f/--t win over --ft-ratio; with neither, f=0.7 and t=0.1."""
    f, t, ratio = args.f, args.t, args.ft_ratio
    if ratio is None:
        return CascadeParams(DEFAULT_F if f is None else f, DEFAULT_T if t is None else t)
    if f is None and t is None:
        return CascadeParams.from_ratio(ratio)
    if f is not None and t is not None:
        return CascadeParams(f, t)
    return CascadeParams(f, f / ratio) if f is not None else CascadeParams(ratio * t, t)


def parse_grid(text: str) -> list[float]:
    try:
        start, stop, num = text.split(":")
        start, stop, num = float(start), float(stop), int(num)
    except ValueError:
        raise CliError(f"malformed grid {text!r}; expected START:STOP:NUM") from None
    if not (0 < start <= stop) or num < 1:
        raise CliError(f"malformed grid {text!r}")
    return [start] if num == 1 else log_grid(start, stop, num)


def parse_ratios(text: str) -> list[float]:
    try:
        vals = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise CliError(f"malformed ratio list {text!r}") from None
    if not vals or any(v <= 0 for v in vals):
        raise CliError(f"malformed ratio list {text!r}")
    return vals


def load(args, mode: Optional[CapacityMode] = None) -> MacroNet:
    mode = mode or args.capacity_mode
    with open(args.countries, newline="", encoding="utf-8") as fh:
        countries = load_countries(fh)
    with open(args.trades, newline="", encoding="utf-8") as fh:
        trades = load_trades(fh)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        net = build_network(countries, trades, mode, strict=not args.lenient)
    for w in caught:
        log.warning("%s", w.message)
    return net


def _write(path: Path, writer) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    buf = io.StringIO()
    writer(buf)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(buf.getvalue())
    return path


# -- commands ----------------------------------------------------------------


def cmd_validate(args) -> int:
    errors: list[str] = []
    warns: list[str] = []
    countries = trades = None
    try:
        with open(args.countries, newline="", encoding="utf-8") as fh:
            countries = load_countries(fh)
    except DataError as exc:
        errors += [f"{args.countries.name}: " + (f"row {r}: {m}" if r else m) for r, m in exc.issues]
    try:
        with open(args.trades, newline="", encoding="utf-8") as fh:
            trades = load_trades(fh)
    except DataError as exc:
        errors += [f"{args.trades.name}: " + (f"row {r}: {m}" if r else m) for r, m in exc.issues]
    net = None
    if countries is not None and trades is not None:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            try:
                net = build_network(countries, trades, args.capacity_mode, strict=not args.lenient)
            except DataError as exc:
                errors += [m for _, m in exc.issues]
        warns += [str(w.message) for w in caught]
    if net is not None:
        for c in net.countries:
            if net.capacities[net.index[c.code]] <= 0:
                warns.append(f"{c.code}: non-positive capacity {net.capacities[net.index[c.code]]:g}")
    for e in errors:
        print(f"error: {e}")
    for w in warns:
        print(f"warning: {w}")
    n_c = len(countries) if countries is not None else 0
    n_l = len(net.links) if net is not None else (len(trades) if trades is not None else 0)
    print(f"{n_c} countries, {n_l} links, {len(errors)} errors, {len(warns)} warnings")
    return 1 if errors else 0


def _avalanche_outputs(net: MacroNet, results, out: Path, events: bool, full: bool) -> list[Path]:
    files = [_write(out / "results.csv", lambda fh: write_results_csv(results, fh))]
    if events:
        files.append(_write(out / "events.csv", lambda fh: write_events_csv(results, fh)))
    if full:
        curve = cumulative_size_counts(results)
        files.append(_write(out / "distribution.csv", lambda fh: write_distribution_csv(curve, fh)))
        summ = summary_stats(results)
        doc = {"summary": summary_dict(summ)}
        gdps = [net.country(c).gdp for c in results]
        sizes = [r.size for r in results.values()]
        try:
            sp = spearman_gdp_avalanche(gdps, sizes)
            doc["spearman_gdp_size"] = {"rho": sp.rho, "p_value": sp.p_value, "n": sp.n}
        except ValueError as exc:
            doc["spearman_gdp_size"] = {"undefined": str(exc)}
        files.append(_write(out / "summary.json", lambda fh: dump_json(doc, fh)))
    return files


def cmd_avalanche(args) -> int:
    net = load(args)
    params = resolve_params(args)
    if args.seed == "ALL":
        results = run_all(net, params, workers=args.jobs)
        _avalanche_outputs(net, results, args.out, args.events, full=True)
        s = summary_stats(results)
        print(
            f"f={params.f:g} t={params.t:g}: {len(results)} seeds, sum of sizes {s.sum_sizes}, "
            f"typical {maybe(s.typical_nonzero)}, likelihood {s.likelihood:.4g}"
        )
    else:
        if args.seed not in net:
            raise CliError(f"unknown seed country {args.seed!r}")
        r = run_avalanche(net, args.seed, params)
        _avalanche_outputs(net, {args.seed: r}, args.out, args.events, full=False)
        print(f"{args.seed}: size {r.size}, duration {r.duration}")
    return 0


def _sweep(net, ratios, jobs):
    res = sweep(net, ratios, workers=jobs)
    lines = []
    if res.critical_ratio is None:
        lines.append("critical f/t estimate: none (no fittable power-law regime)")
    else:
        flag = " (low confidence)" if res.low_confidence else ""
        lines.append(f"critical f/t estimate: {res.critical_ratio:.4g}{flag}")
    lines.append(
        "regimes: "
        + ", ".join(f"{r.ratio:.4g}={r.regime.value}" for r in res.rows)
    )
    lines.append(
        f"rapid-decay up to f/t={maybe(res.subcritical_max_ratio)}; "
        f"spanning-peak from f/t={maybe(res.supercritical_min_ratio)}"
    )
    return res, lines


def cmd_sweep(args) -> int:
    ratios = parse_ratios(args.ratios) if args.ratios else parse_grid(args.grid)
    net = load(args)
    res, lines = _sweep(net, ratios, args.jobs)
    _write(args.out / "sweep.csv", lambda fh: write_sweep_csv(res, fh))
    for line in lines:
        print(line)
    return 0


def _topology(net: MacroNet, results, out: Path) -> tuple[list[Path], list[str], dict]:
    cont = net.continents
    forest = max_spanning_forest(net)
    avnet = avalanche_network(results)
    ff = intra_continental_fraction(forest.edges, cont)
    af = intra_continental_fraction(avnet.edges, cont)
    coarse = coarse_grain_continental(avnet, cont)
    doc = {
        "spanning_forest": {"edges": ff.total, "intra": ff.intra, "fraction": ff.fraction,
                            "components": forest.n_components},
        "avalanche_network": {"edges": af.total, "intra": af.intra, "fraction": af.fraction,
                              "isolated": avnet.isolated},
    }
    files = [
        _write(out / "spanning_forest.dot", lambda fh: fh.write(spanning_forest_dot(forest, cont))),
        _write(out / "avalanche_network.dot", lambda fh: fh.write(avalanche_network_dot(avnet, cont))),
        _write(out / "topology.json", lambda fh: dump_json(doc, fh)),
        _write(out / "continental.json", lambda fh: dump_json(continental_json(coarse), fh)),
    ]
    lines = [
        fraction_line("spanning forest", ff.intra, ff.total),
        fraction_line("avalanche network", af.intra, af.total),
        f"avalanche network isolated countries: {len(avnet.isolated)}",
    ]
    return files, lines, doc


def cmd_topology(args) -> int:
    net = load(args)
    if args.events_file:
        with open(args.events_file, newline="", encoding="utf-8") as fh:
            results = read_events_csv(fh, net.codes)
    elif args.recompute:
        results = run_all(net, resolve_params(args), workers=args.jobs)
    else:
        raise CliError("topology needs avalanche results: pass --events-file FILE or --recompute")
    _, lines, _ = _topology(net, results, args.out)
    for line in lines:
        print(line)
    return 0


def _gsn_config(args) -> GsnConfig:
    return GsnConfig(args.gsn_tolerance, args.gsn_swaps, args.gsn_attempts, args.rng_seed)


def _ensemble(net, model, samples, params, args, out: Path, raw: bool):
    summ = ensemble(net, model, samples, params, args.rng_seed, gsn_config=_gsn_config(args), workers=args.jobs)
    doc = summ.to_json()
    files = [_write(out / f"ensemble_{model}.json", lambda fh: dump_json(doc, fh))]
    if raw:
        files.append(_write(out / f"ensemble_{model}_samples.csv",
                            lambda fh: write_ensemble_samples_csv(summ.values, summ.sample_indices, fh)))
    lines = [f"{model}: {summ.n_samples}/{samples} samples used, {len(summ.failures)} failed"]
    for name, st in doc["statistics"].items():
        p = st["p"]["display"] if st["p"] else "n/a"
        lines.append(
            f"  {name}: {maybe(st['mean'])} ± {maybe(st['sd'])} (observed {maybe(st['observed'])}, "
            f"{st['tail']} p {p})"
        )
    return summ, files, lines


def cmd_randomize(args) -> int:
    net = load(args)
    summ, _, lines = _ensemble(net, args.model, args.samples, resolve_params(args), args, args.out, args.raw)
    for line in lines:
        print(line)
    for i, e in summ.failures:
        print(f"error: sample {i}: {e}")
    return 1 if summ.failures else 0


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def cmd_report(args) -> int:
    params = resolve_params(args)
    out: Path = args.out
    base = load(args, CapacityMode.GDP_ONLY)
    modes = [CapacityMode.GDP_ONLY]
    if all(c.cab is not None for c in base.countries):
        modes.append(CapacityMode.GDP_PLUS_CAB)
    tgp_codes = [c.strip() for c in args.tgp.split(",") if c.strip()]
    files: list[Path] = []
    errors: list[str] = []
    sections = {}
    for mode in modes:
        net = base.with_mode(mode)
        sub = out / mode.value
        section: dict = {"f": params.f, "t": params.t}
        try:
            results = run_all(net, params, workers=args.jobs)
            files += _avalanche_outputs(net, results, sub, events=True, full=True)
            files.append(_write(sub / "gdp_vs_size.csv", lambda fh: _write_gdp_size(net, results, fh)))
            tfiles, tlines, tdoc = _topology(net, results, sub)
            files += tfiles
            section["topology"] = tdoc
            section["summary"] = summary_dict(summary_stats(results))
            section["lines"] = tlines
            res, slines = _sweep(net, parse_grid(args.grid), args.jobs)
            files.append(_write(sub / "sweep.csv", lambda fh: write_sweep_csv(res, fh)))
            section["sweep"] = {"critical_ratio": res.critical_ratio, "lines": slines}
            for code in tgp_codes:
                if code not in net:
                    errors.append(f"{mode.value}: TGP requested for unknown country {code!r}")
                    continue
                pts = tgp_profile(net, results[code])
                files.append(_write(sub / f"tgp_{code}.csv", lambda fh, pts=pts: write_tgp_csv(pts, fh)))
            for model in ("gsn", "gdn") if args.samples > 0 else ():
                summ, efiles, elines = _ensemble(net, model, args.samples, params, args, sub, raw=True)
                files += efiles
                section[f"ensemble_{model}"] = elines
                errors += [f"{mode.value}: {model} sample {i}: {e}" for i, e in summ.failures]
        except Exception as exc:  # recorded in the manifest, surfaced through the exit status
            log.exception("report section %s failed", mode.value)
            errors.append(f"{mode.value}: {exc}")
        sections[mode.value] = section
    files.append(_write(out / "report.json", lambda fh: dump_json(sections, fh)))
    manifest = {
        "files": [
            {"path": p.relative_to(out).as_posix(), "sha256": _sha256(p), "bytes": p.stat().st_size}
            for p in sorted(files)
        ],
        "errors": errors,
        "status": "error" if errors else "ok",
        "version": __version__,
    }
    _write(out / "manifest.json", lambda fh: dump_json(manifest, fh))
    for mode in modes:
        for line in sections[mode.value].get("lines", []):
            print(f"[{mode.value}] {line}")
    for e in errors:
        print(f"error: {e}")
    print(f"wrote {len(files)} files + manifest.json to {out}")
    return 1 if errors else 0


def _write_gdp_size(net, results, fh):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["code", "continent", "gdp_musd", "size", "duration"])
    for c, r in results.items():
        country = net.country(c)
        w.writerow([c, country.continent, repr(country.gdp), r.size, r.duration])


COMMANDS = {
    "validate": cmd_validate,
    "avalanche": cmd_avalanche,
    "sweep": cmd_sweep,
    "topology": cmd_topology,
    "randomize": cmd_randomize,
    "report": cmd_report,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s"
    )
    try:
        return COMMANDS[args.command](args)
    except (CliError, DataError, KeyError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
