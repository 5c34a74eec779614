"""Per-run metric collection, seed-batch aggregation and CSV output."""

from __future__ import annotations

import csv
import io
import math
import statistics
from dataclasses import dataclass, field

SUMMARY_COLUMNS = (
    "seed",
    "protocol",
    "topology",
    "scenario",
    "duration_s",
    "created",
    "delivered_unique",
    "delivery_rate_pct",
    "redundancy",
    "total_energy_j",
    "efficiency_j_per_pkt",
    "mean_coverage",
    "last_delivery_s",
    "first_death_s",
    "setup_energy_j",
)
TIMESERIES_COLUMNS = ("time_s", "cumulative_deliveries", "alive_nodes")
PERNODE_COLUMNS = ("node", "energy_j", "death_s", "tx_count", "rx_count")

AGGREGATED = (
    "created",
    "delivered_unique",
    "delivery_rate_pct",
    "redundancy",
    "total_energy_j",
    "efficiency_j_per_pkt",
    "mean_coverage",
    "last_delivery_s",
)


@dataclass
class MetricsReport:
    protocol: str
    topology: str
    scenario: str
    seed: int
    duration_s: float
    n_nodes: int
    sink: int
    created: int
    delivered_unique_at_sink: int
    repeats_at_sink: int
    total_energy_j: float
    setup_energy_j: float
    per_node_energy: dict
    deaths: dict
    tx_count: dict
    rx_count: dict
    data_tx: int
    coverage: dict
    longevity_series: list
    timeseries: list = field(default_factory=list)
    # battery audit: initial_j[n] - remaining_j[n] should equal per_node_energy[n]
    initial_j: dict = field(default_factory=dict)
    remaining_j: dict = field(default_factory=dict)

    @property
    def delivery_rate_pct(self) -> float:
        if self.created == 0:
            return 0.0
        return 100.0 * self.delivered_unique_at_sink / self.created

    @property
    def redundancy(self) -> float:
        if self.delivered_unique_at_sink == 0:
            return 0.0
        return self.repeats_at_sink / self.delivered_unique_at_sink

    @property
    def efficiency_j_per_pkt(self) -> float:
        if self.delivered_unique_at_sink == 0:
            return math.inf
        return self.total_energy_j / self.delivered_unique_at_sink

    @property
    def mean_coverage(self) -> float:
        if not self.coverage:
            return 0.0
        return math.fsum(self.coverage.values()) / len(self.coverage)

    @property
    def last_delivery_s(self) -> float:
        # the closing point of the series sits at the run end; skip it
        real = [t for t, _ in self.longevity_series[:-1]]
        return real[-1] if real else 0.0

    @property
    def first_death_s(self):
        return min(self.deaths.values()) if self.deaths else None

    def summary_row(self) -> dict:
        return {
            "seed": self.seed,
            "protocol": self.protocol,
            "topology": self.topology,
            "scenario": self.scenario,
            "duration_s": self.duration_s,
            "created": self.created,
            "delivered_unique": self.delivered_unique_at_sink,
            "delivery_rate_pct": self.delivery_rate_pct,
            "redundancy": self.redundancy,
            "total_energy_j": self.total_energy_j,
            "efficiency_j_per_pkt": self.efficiency_j_per_pkt,
            "mean_coverage": self.mean_coverage,
            "last_delivery_s": self.last_delivery_s,
            "first_death_s": self.first_death_s,
            "setup_energy_j": self.setup_energy_j,
        }


class MetricsCollector:
    """Watches one run. The kernel reports every data reception and every radio charge."""

    def __init__(self, n_nodes: int, sink: int):
        self.n_nodes = n_nodes
        self.sink = sink
        self.created = 0
        self.created_by_origin: dict = {}
        self.reached: dict = {}
        self.sink_unique: set = set()
        self.sink_repeats = 0
        self.longevity: list = []
        self.tx_count = [0] * n_nodes
        self.rx_count = [0] * n_nodes
        self.data_tx = 0
        self.setup_energy_j = 0.0
        self.timeseries: list = []

    def record_created(self, msg, now):
        origin = msg.id.origin
        self.created_by_origin[origin] = self.created_by_origin.get(origin, 0) + 1
        self.reached.setdefault(msg.id, set())
        if origin != self.sink:
            self.created += 1

    def record_delivery(self, node, msg, now):
        mid = msg.id
        if node != mid.origin:
            self.reached.setdefault(mid, set()).add(node)
        if node != self.sink or mid.origin == self.sink:
            return
        if mid in self.sink_unique:
            self.sink_repeats += 1
        else:
            self.sink_unique.add(mid)
            self.longevity.append((now, len(self.sink_unique)))

    def record_tx(self, node, is_data, setup_j=0.0):
        self.tx_count[node] += 1
        if is_data:
            self.data_tx += 1
        self.setup_energy_j += setup_j

    def record_rx(self, node, setup_j=0.0):
        self.rx_count[node] += 1
        self.setup_energy_j += setup_j

    def sample(self, now, alive_nodes):
        self.timeseries.append((now, len(self.sink_unique), alive_nodes))

    def coverage(self) -> dict:
        """Mean fraction of the other nodes reached, per origin."""
        if self.n_nodes < 2:
            return {}
        per_origin: dict = {}
        for mid, nodes in self.reached.items():
            per_origin.setdefault(mid.origin, []).append(len(nodes) / (self.n_nodes - 1))
        return {o: math.fsum(v) / len(v) for o, v in sorted(per_origin.items())}

    def finalize(self, *, batteries, duration, protocol, topology, scenario, seed) -> MetricsReport:
        per_node = {i: b.consumed_j for i, b in enumerate(batteries)}
        deaths = {i: b.death_time for i, b in enumerate(batteries) if b.death_time is not None}
        series = list(self.longevity) + [(duration, len(self.sink_unique))]
        return MetricsReport(
            protocol=protocol,
            topology=topology,
            scenario=scenario,
            seed=seed,
            duration_s=duration,
            n_nodes=self.n_nodes,
            sink=self.sink,
            created=self.created,
            delivered_unique_at_sink=len(self.sink_unique),
            repeats_at_sink=self.sink_repeats,
            total_energy_j=math.fsum(per_node.values()),
            setup_energy_j=self.setup_energy_j,
            per_node_energy=per_node,
            deaths=deaths,
            tx_count=dict(enumerate(self.tx_count)),
            rx_count=dict(enumerate(self.rx_count)),
            data_tx=self.data_tx,
            coverage=self.coverage(),
            longevity_series=series,
            timeseries=list(self.timeseries),
            initial_j={i: b.initial_j for i, b in enumerate(batteries)},
            remaining_j={i: b.remaining_j for i, b in enumerate(batteries)},
        )


@dataclass(frozen=True)
class Stat:
    mean: float
    stdev: float
    min: float
    max: float


def aggregate(reports) -> dict:
    """Mean, sample stdev, min and max of each headline metric over a seed batch."""
    reports = list(reports)
    if not reports:
        raise ValueError("nothing to aggregate")
    out = {}
    rows = [r.summary_row() if isinstance(r, MetricsReport) else r for r in reports]
    for name in AGGREGATED:
        values = [float(r[name] if isinstance(r, dict) else getattr(r, name)) for r in rows]
        finite = [v for v in values if math.isfinite(v)]
        if len(finite) != len(values):
            out[name] = Stat(math.inf, math.nan, min(values), max(values))
            continue
        sd = statistics.stdev(values) if len(values) > 1 else 0.0
        out[name] = Stat(statistics.fmean(values), sd, min(values), max(values))
    return out


def fmt(value) -> str:
    """Stable text form for CSV cells: repr for floats, blank for missing."""
    if value is None:
        return ""
    if isinstance(value, float):
        if math.isinf(value):
            return "inf"
        return repr(value)
    return str(value)


def write_csv(path, columns, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        if isinstance(row, dict):
            row = [row[c] for c in columns]
        w.writerow([fmt(v) for v in row])
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(buf.getvalue())


def summary_rows(reports):
    return [r.summary_row() for r in reports]


def timeseries_rows(report):
    return list(report.timeseries)


def pernode_rows(report):
    return [
        (n, report.per_node_energy[n], report.deaths.get(n), report.tx_count[n], report.rx_count[n])
        for n in range(report.n_nodes)
    ]
