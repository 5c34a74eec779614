"""Command line: run seed batches of one scenario across protocols and write CSVs.

    eagpsim run --scenario steady_sym --protocols eagp,mcfa --seeds 5 --out out/
    eagpsim preset eol_asym > my.cfg

``--scenario`` takes a file path or one of the bundled preset names.
"""

from __future__ import annotations

import argparse
import io
import math
import os
import statistics
import sys
from concurrent.futures import ProcessPoolExecutor

from . import __version__
from .config import PRESET_NAMES, ConfigError, dump_config, load_config, load_preset, preset_text
from .metrics import (
    PERNODE_COLUMNS,
    SUMMARY_COLUMNS,
    TIMESERIES_COLUMNS,
    pernode_rows,
    summary_rows,
    timeseries_rows,
    write_csv,
)
from .runner import PROTOCOLS, run_one
from .scenario import DisconnectedTopology, build_topology

EXIT_OK, EXIT_CONFIG, EXIT_TOPOLOGY = 0, 2, 3
SEED_ENV = "EAGPSIM_SEED"


def parse_seeds(text: str, *, count_ok=True) -> tuple:
    """``"5"`` means seeds 1..5; ``"3,7"`` is an explicit list."""
    text = text.strip()
    try:
        if "," not in text and count_ok:
            n = int(text)
            if n < 1:
                raise ValueError
            return tuple(range(1, n + 1))
        seeds = tuple(int(s) for s in text.split(",") if s.strip())
    except ValueError:
        raise ConfigError(f"bad seed list {text!r}") from None
    if not seeds:
        raise ConfigError("empty seed list")
    return seeds


def parse_protocols(text: str) -> tuple:
    names = tuple(p.strip() for p in text.split(",") if p.strip())
    bad = [p for p in names if p not in PROTOCOLS]
    if bad or not names:
        raise ConfigError(f"unknown protocol(s) {bad}; choose from {', '.join(PROTOCOLS)}")
    return tuple(sorted(set(names)))


def load_scenario(spec: str) -> dict:
    if os.path.exists(spec) or spec not in PRESET_NAMES:
        return load_config(spec)
    return load_preset(spec)


def _job(args):
    cfg, protocol, seed, duration, trace = args
    buf = io.StringIO() if trace else None
    report = run_one(cfg, protocol, seed, duration, trace=buf)
    return protocol, seed, report, buf.getvalue() if buf else None


def execute(cfg, protocols, seeds, duration, workers=1, trace=False) -> list:
    """All runs, ordered by (protocol, seed) whatever the worker count."""
    jobs = [(cfg, p, s, duration, trace) for p in protocols for s in seeds]
    if workers <= 1:
        return [_job(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_job, jobs))


def _mean(values):
    return statistics.fmean(values) if values else 0.0


def emit_figures(out_dir, reports) -> list:
    """Tidy plot data, one file per figure, averaged over seeds."""
    by_proto: dict = {}
    for r in reports:
        by_proto.setdefault(r.protocol, []).append(r)
    written = []

    def put(name, columns, rows):
        write_csv(os.path.join(out_dir, name), columns, rows)
        written.append(name)

    rows = []
    for proto, rs in by_proto.items():
        times = [t for t, _, _ in rs[0].timeseries]
        for k, t in enumerate(times):
            rows.append((t, proto, _mean([r.timeseries[k][1] for r in rs])))
    put("fig_longevity.csv", ("time_s", "protocol", "cum_deliveries"), rows)

    rows = []
    for proto, rs in by_proto.items():
        for origin in sorted({o for r in rs for o in r.coverage}):
            rows.append((origin, proto, _mean([r.coverage[origin] for r in rs if origin in r.coverage])))
    put("fig_coverage.csv", ("origin", "protocol", "coverage"), rows)

    rows = []
    for proto, rs in by_proto.items():
        for node in range(rs[0].n_nodes):
            rows.append((node, proto, _mean([r.per_node_energy[node] for r in rs])))
    put("fig_energy_profile.csv", ("node", "protocol", "energy_j"), rows)

    rows = []
    for proto, rs in by_proto.items():
        eff = [r.efficiency_j_per_pkt for r in rs]
        rows.append((proto, _mean(eff) if all(map(math.isfinite, eff)) else math.inf, _mean([r.redundancy for r in rs])))
    put("fig_efficiency.csv", ("protocol", "efficiency_j_per_pkt", "redundancy"), rows)

    rows = []
    for proto, rs in by_proto.items():
        created = sum(r.created for r in rs)
        delivered = sum(r.delivered_unique_at_sink for r in rs)
        rows.append((proto, created, delivered, 100.0 * delivered / created if created else 0.0))
    put("fig_mobility_delivery.csv", ("protocol", "created", "delivered_unique", "delivery_rate_pct"), rows)
    return written


def write_outputs(out_dir, cfg, protocols, seeds, duration, results):
    reports = [r for _, _, r, _ in results]
    os.makedirs(os.path.join(out_dir, "timeseries"), exist_ok=True)
    os.makedirs(os.path.join(out_dir, "pernode"), exist_ok=True)
    write_csv(os.path.join(out_dir, "summary.csv"), SUMMARY_COLUMNS, summary_rows(reports))
    for proto, seed, report, trace in results:
        stem = f"{proto}_seed{seed}"
        write_csv(os.path.join(out_dir, "timeseries", stem + ".csv"), TIMESERIES_COLUMNS, timeseries_rows(report))
        write_csv(os.path.join(out_dir, "pernode", stem + ".csv"), PERNODE_COLUMNS, pernode_rows(report))
        if trace is not None:
            os.makedirs(os.path.join(out_dir, "trace"), exist_ok=True)
            with open(os.path.join(out_dir, "trace", stem + ".log"), "w", encoding="utf-8") as fh:
                fh.write(trace)
    emit_figures(out_dir, reports)
    # the manifest is itself a scenario file that reproduces this batch
    resolved = dict(cfg, **{"scenario.seeds": tuple(seeds), "scenario.duration": float(duration)})
    with open(os.path.join(out_dir, "manifest.cfg"), "w", encoding="utf-8") as fh:
        fh.write(f"# eagpsim {__version__}\n# protocols: {','.join(protocols)}\n")
        fh.write(dump_config(resolved))


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="eagpsim", description=__doc__.split("\n")[0])
    ap.add_argument("--version", action="version", version=f"eagpsim {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="simulate a scenario")
    run.add_argument("--scenario", required=True, help="scenario file or preset name")
    run.add_argument("--protocols", default=",".join(PROTOCOLS))
    run.add_argument("--seeds", help="a count N (seeds 1..N) or a comma list")
    run.add_argument("--duration", type=float, help="seconds of virtual time")
    run.add_argument("--out", default="out")
    run.add_argument("--workers", type=int, default=1)
    run.add_argument("--trace", action="store_true", help="write one event log per run")

    pre = sub.add_parser("preset", help="print a bundled scenario file")
    pre.add_argument("name", choices=PRESET_NAMES)
    return ap


def cmd_run(args) -> int:
    try:
        cfg = load_scenario(args.scenario)
        protocols = parse_protocols(args.protocols)
        if args.seeds:
            seeds = parse_seeds(args.seeds)
        elif os.environ.get(SEED_ENV):
            seeds = parse_seeds(os.environ[SEED_ENV], count_ok=False)
        else:
            seeds = cfg["scenario.seeds"]
        duration = cfg["scenario.duration"] if args.duration is None else args.duration
        if duration <= 0:
            raise ConfigError("duration must be positive")
        if args.workers < 1:
            raise ConfigError("workers must be >= 1")
    except ConfigError as e:
        print(f"eagpsim: {e}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        for seed in seeds:
            build_topology(cfg, seed)
        results = execute(cfg, protocols, seeds, duration, args.workers, args.trace)
    except DisconnectedTopology as e:
        print(f"eagpsim: {e}", file=sys.stderr)
        return EXIT_TOPOLOGY

    write_outputs(args.out, cfg, protocols, seeds, duration, results)
    print(f"{len(results)} runs -> {os.path.join(args.out, 'summary.csv')}")
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "preset":
        sys.stdout.write(preset_text(args.name))
        return EXIT_OK
    return cmd_run(args)


if __name__ == "__main__":
    sys.exit(main())
