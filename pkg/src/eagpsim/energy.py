"""ESP8266-style battery accounting.

Idle current is settled lazily: a battery remembers when it was last brought
up to date and drains ``voltage * I(state) * dt`` the next time it is touched.
Every drain is also booked into a per-category ledger so conservation can be
checked at any instant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields

IDLE_STATES = ("awake", "modem_sleep", "deep_sleep")


@dataclass(frozen=True)
class EnergyModel:
    deep_sleep_a: float = 1e-5
    modem_sleep_a: float = 1.5e-3
    awake_a: float = 8.1e-3
    tx_a: float = 1.7e-2
    rx_a: float = 5.6e-3
    voltage: float = 3.7
    tx_time: float = 30e-3
    rx_time: float = 40e-3
    sensor_j: float = 1.1e-9
    bandwidth: float = 54e6
    hop_delay: float = 5e-3
    jitter: float = 0.0
    error: float = 0.0

    def __post_init__(self):
        currents = (self.deep_sleep_a, self.modem_sleep_a, self.awake_a, self.tx_a, self.rx_a)
        if min(currents) <= 0:
            raise ValueError("all currents must be positive")
        if not (self.tx_a > self.awake_a > self.modem_sleep_a > self.deep_sleep_a):
            raise ValueError("expected tx > awake > modem_sleep > deep_sleep currents")

    @classmethod
    def with_overrides(cls, **overrides) -> "EnergyModel":
        known = {f.name for f in fields(cls)}
        bad = set(overrides) - known
        if bad:
            raise KeyError(f"unknown energy model keys: {sorted(bad)}")
        return cls(**{k: float(v) for k, v in overrides.items()})

    @property
    def tx_j(self) -> float:
        return self.voltage * self.tx_a * self.tx_time

    @property
    def rx_j(self) -> float:
        return self.voltage * self.rx_a * self.rx_time

    def idle_current(self, state: str) -> float:
        if state == "awake":
            return self.awake_a
        if state == "modem_sleep":
            return self.modem_sleep_a
        if state == "deep_sleep":
            return self.deep_sleep_a
        raise ValueError(f"unknown idle state {state!r}")


@dataclass
class Battery:
    capacity_j: float
    remaining_j: float = None
    idle_state: str = "awake"
    last_settle: float = 0.0
    death_time: float = None
    drains: dict = field(default_factory=lambda: {"tx": 0.0, "rx": 0.0, "idle": 0.0, "sense": 0.0})

    def __post_init__(self):
        if self.remaining_j is None:
            self.remaining_j = self.capacity_j
        if not (0 < self.remaining_j <= self.capacity_j):
            raise ValueError("initial charge must be in (0, capacity]")
        self.initial_j = self.remaining_j

    @property
    def alive(self) -> bool:
        return self.remaining_j > 0

    @property
    def consumed_j(self) -> float:
        return math.fsum(self.drains.values())

    def _take(self, amount: float, kind: str) -> float:
        if not self.alive or amount <= 0:
            return 0.0
        if amount >= self.remaining_j:
            taken, self.remaining_j = self.remaining_j, 0.0
        else:
            taken = amount
            self.remaining_j -= amount
        self.drains[kind] += taken
        return taken


def settle(battery: Battery, model: EnergyModel, now: float) -> float:
    """Accrue idle drain up to ``now``; records the exact death time if it runs out."""
    dt = now - battery.last_settle
    if dt < 0:
        raise ValueError(f"settle went back in time ({battery.last_settle} -> {now})")
    battery.last_settle = now
    if not battery.alive or dt == 0:
        return 0.0
    rate = model.voltage * model.idle_current(battery.idle_state)
    need = rate * dt
    if need >= battery.remaining_j:
        battery.death_time = now - dt + battery.remaining_j / rate
    taken = battery._take(need, "idle")
    if not battery.alive and battery.death_time is None:
        battery.death_time = now
    return taken


def charge_tx(battery: Battery, model: EnergyModel, now: float = None) -> float:
    return _charge(battery, model, model.tx_j, "tx", now)


def charge_rx(battery: Battery, model: EnergyModel, now: float = None) -> float:
    return _charge(battery, model, model.rx_j, "rx", now)


def charge_sense(battery: Battery, model: EnergyModel, now: float = None) -> float:
    return _charge(battery, model, model.sensor_j, "sense", now)


def charge_idle(battery: Battery, model: EnergyModel, dt: float, state: str = "awake") -> float:
    """Drain ``dt`` seconds spent in ``state`` right away (no settlement clock involved)."""
    if dt < 0:
        raise ValueError("negative idle interval")
    return battery._take(model.voltage * model.idle_current(state) * dt, "idle")


def _charge(battery, model, amount, kind, now):
    if now is not None:
        settle(battery, model, now)
    if not battery.alive:
        return 0.0
    taken = battery._take(amount, kind)
    if not battery.alive and battery.death_time is None:
        battery.death_time = battery.last_settle if now is None else now
    return taken


def energy_percent(battery: Battery) -> float:
    return 100.0 * battery.remaining_j / battery.capacity_j
