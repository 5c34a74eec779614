"""Virtual-time discrete-event engine with a unit-disk broadcast radio."""

from __future__ import annotations

import heapq
import zlib
from dataclasses import replace

import numpy as np

from .core import (
    Broadcast,
    ControlKind,
    ControlMessage,
    DataMessage,
    DatumFactory,
    Deliver,
    NeighborView,
    ScheduleTimer,
    Unicast,
)
from .energy import Battery, EnergyModel, charge_rx, charge_sense, charge_tx, energy_percent, settle
from .metrics import MetricsCollector
from .scenario import adjacency, mobility_step, traffic_next

START, RECEIVE, TIMER, SENSE, MOBILITY, METRIC = range(6)
EVENT_NAMES = ("start", "receive", "timer", "sense", "mobility", "metric")


class SeededRng:
    """Independent numpy generators keyed by (purpose, node) under one run seed."""

    def __init__(self, seed: int):
        self.seed = int(seed)
        self._streams = {}

    def stream(self, purpose: str, node: int = -1) -> np.random.Generator:
        key = (purpose, node)
        gen = self._streams.get(key)
        if gen is None:
            entropy = [self.seed & 0xFFFFFFFFFFFFFFFF, zlib.crc32(purpose.encode()), node + 1]
            gen = np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))
            self._streams[key] = gen
        return gen


class EventQueue:
    """Min-heap ordered by (time, insertion seq)."""

    def __init__(self):
        self._heap = []
        self._seq = 0
        self.last_time = 0.0

    def __len__(self):
        return len(self._heap)

    def push(self, time, kind, node=-1, payload=None):
        if time < self.last_time:
            raise RuntimeError(f"event scheduled in the past ({time} < {self.last_time})")
        heapq.heappush(self._heap, (time, self._seq, kind, node, payload))
        self._seq += 1

    def peek_time(self):
        return self._heap[0][0] if self._heap else None

    def pop(self):
        ev = heapq.heappop(self._heap)
        if ev[0] < self.last_time:
            raise RuntimeError("event queue returned a non-monotone time")
        self.last_time = ev[0]
        return ev


class Simulator:
    """One run: a topology, one protocol instance per node, batteries and traffic.

    ``protocols`` is a list indexed by node id. Dead nodes never act: each of their
    events is dropped when it comes up for execution.
    """

    def __init__(
        self,
        topology,
        protocols,
        initial_battery_j,
        *,
        capacity_j,
        ttl,
        rng: SeededRng,
        model: EnergyModel = None,
        traffic=(15.0, 50.0),
        mobility=None,
        loss_rate=0.0,
        idle_state="awake",
        metric_interval=10.0,
        trace=None,
    ):
        self.topology = topology
        self.n = topology.n
        self.sink = topology.sink
        self.protocols = list(protocols)
        if len(self.protocols) != self.n:
            raise ValueError("need exactly one protocol instance per node")
        self.model = model or EnergyModel()
        self.batteries = [Battery(capacity_j, b, idle_state=idle_state) for b in initial_battery_j]
        self.rng = rng
        self.traffic = traffic
        self.mobility = mobility
        self.loss_rate = loss_rate
        self.metric_interval = metric_interval
        self.trace = trace
        self.positions = np.array(topology.positions, dtype=float)
        self.adj = [list(a) for a in topology.adj]
        self.factory = DatumFactory(ttl)
        self.queue = EventQueue()
        self.metrics = MetricsCollector(self.n, self.sink)
        self.heard = [dict() for _ in range(self.n)]
        self.delivered = set()
        self.now = 0.0
        for i, p in enumerate(self.protocols):
            p.energy = self._energy_reader(i)

    def _energy_reader(self, node):
        battery = self.batteries[node]
        return lambda: energy_percent(battery)

    def _alive(self, node, now) -> bool:
        b = self.batteries[node]
        settle(b, self.model, now)
        return b.alive

    def _log(self, node, event, detail=""):
        if self.trace is not None:
            self.trace.write(f"{self.now:.6f} {node} {event} {detail}\n")

    def view(self, node) -> NeighborView:
        heard = self.heard[node]
        entries = {}
        for nb in self.adj[node]:
            if self.batteries[nb].alive:
                entries[nb] = heard.get(nb, (None, None))
        return NeighborView(entries)

    def run(self, duration: float):
        if self.n == 0:
            return self.metrics
        q = self.queue
        for i in range(self.n):
            q.push(0.0, START, i)
        for i in range(self.n):
            q.push(traffic_next(0.0, self.rng.stream("traffic", i), *self.traffic), SENSE, i)
        if self.mobility is not None:
            q.push(self.mobility.start_after, MOBILITY)
        for k in range(int(duration // self.metric_interval) + 1):
            q.push(k * self.metric_interval, METRIC)
        while len(q) and q.peek_time() <= duration:
            time, _, kind, node, payload = q.pop()
            self.now = time
            if kind == METRIC:
                self._sample(time)
            elif kind == MOBILITY:
                self._move(time, duration)
            elif self._alive(node, time):
                self._dispatch(kind, node, payload, time)
        for b in self.batteries:
            settle(b, self.model, duration)
        self.now = duration
        return self.metrics

    def _sample(self, now):
        alive = sum(1 for i in range(self.n) if self._alive(i, now))
        self.metrics.sample(now, alive)

    def _move(self, now, duration):
        rng = self.rng.stream("mobility")
        self.positions = mobility_step(self.positions, self.mobility, rng, sink=self.sink, now=now)
        self.adj = adjacency(self.positions, self.topology.radio_range)
        self._log(-1, "mobility")
        nxt = now + self.mobility.update_interval
        if nxt <= duration:
            self.queue.push(nxt, MOBILITY)

    def _dispatch(self, kind, node, payload, now):
        proto = self.protocols[node]
        if kind == RECEIVE:
            msg, src = payload
            setup = isinstance(msg, ControlMessage) and msg.kind is ControlKind.COST_ADVERT
            drained = charge_rx(self.batteries[node], self.model, now)
            self.metrics.record_rx(node, drained if setup else 0.0)
            if not self.batteries[node].alive:
                return
            self.heard[node][src] = (msg.sender_energy, now)
            view = self.view(node)
            if isinstance(msg, DataMessage):
                self._log(node, "rx_data", f"{msg.id.origin}:{msg.id.seq} from {src}")
                self.metrics.record_delivery(node, msg, now)
                actions = proto.on_data(msg, now, view)
            else:
                self._log(node, "rx_" + msg.kind.value, f"from {src}")
                actions = proto.on_control(msg, now, view)
        elif kind == TIMER:
            actions = proto.on_timer(payload, now, self.view(node))
        elif kind == SENSE:
            actions = self._sense(node, now)
        elif kind == START:
            actions = proto.on_start(now, self.view(node))
        else:
            raise RuntimeError(f"unknown event kind {kind}")
        self._apply(node, actions, now)

    def _sense(self, node, now):
        battery = self.batteries[node]
        charge_sense(battery, self.model, now)
        nxt = traffic_next(now, self.rng.stream("traffic", node), *self.traffic)
        self.queue.push(nxt, SENSE, node)
        if not battery.alive:
            return []
        msg = self.factory.new_datum(node, now)
        self.metrics.record_created(msg, now)
        self._log(node, "create", f"{msg.id.origin}:{msg.id.seq}")
        return self.protocols[node].originate(msg, now, self.view(node))

    def _apply(self, node, actions, now):
        for a in actions:
            if isinstance(a, Deliver):
                key = (node, a.msg.id)
                if key in self.delivered:
                    raise RuntimeError(f"node {node} delivered {a.msg.id} twice")
                self.delivered.add(key)
            elif isinstance(a, ScheduleTimer):
                if a.delay < 0:
                    raise RuntimeError(f"negative timer delay from node {node}")
                self.queue.push(now + a.delay, TIMER, node, a.tag)
            elif isinstance(a, Broadcast):
                self.broadcast(node, a.msg, now)
            elif isinstance(a, Unicast):
                self.unicast(node, a.dest, a.msg, now)
            else:
                raise TypeError(f"not a protocol action: {a!r}")

    def _transmit(self, node, msg, now):
        """Charge the sender for one transmission; returns the stamped message or None."""
        battery = self.batteries[node]
        if not self._alive(node, now):
            return None
        pct = energy_percent(battery)
        if isinstance(msg, DataMessage):
            msg = replace(msg, sender_energy=pct)
        else:
            msg = replace(msg, energy=pct)
        setup = isinstance(msg, ControlMessage) and msg.kind is ControlKind.COST_ADVERT
        drained = charge_tx(battery, self.model, now)
        self.metrics.record_tx(node, isinstance(msg, DataMessage), drained if setup else 0.0)
        # the battery gave out mid-frame: energy is spent but nothing goes on air
        return msg if battery.alive else None

    def _lost(self):
        return self.loss_rate > 0 and self.rng.stream("loss").random() < self.loss_rate

    def broadcast(self, node, msg, now):
        msg = self._transmit(node, msg, now)
        if msg is None:
            return 0
        self._log(node, "tx_bcast", _describe(msg))
        arrive = now + self.model.hop_delay
        count = 0
        for v in self.adj[node]:
            if self._alive(v, now) and not self._lost():
                self.queue.push(arrive, RECEIVE, v, (msg, node))
                count += 1
        return count

    def unicast(self, node, dest, msg, now):
        if dest == node:
            raise RuntimeError(f"node {node} tried to unicast to itself")
        msg = self._transmit(node, msg, now)
        if msg is None:
            return 0
        self._log(node, "tx_ucast", f"{_describe(msg)} to {dest}")
        if dest in self.adj[node] and self._alive(dest, now) and not self._lost():
            self.queue.push(now + self.model.hop_delay, RECEIVE, dest, (msg, node))
            return 1
        return 0


def _describe(msg):
    if isinstance(msg, DataMessage):
        return f"data {msg.id.origin}:{msg.id.seq} ttl={msg.ttl}"
    return msg.kind.value
