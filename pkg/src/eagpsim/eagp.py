"""Energy-aware gossip: per-message eager/lazy forwarding driven by residual battery."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional

from .core import (
    Broadcast,
    ControlKind,
    ControlMessage,
    DataMessage,
    Deliver,
    NeighborView,
    Protocol,
    ScheduleTimer,
    Unicast,
    UnknownTimer,
)

CYCLE_PHASE_PER_NODE = 1e-3


class Mode(enum.Enum):
    LAZY = "lazy"
    EAGER = "eager"


@dataclass(frozen=True)
class EagpConfig:
    dt_max: float = 10.0
    t_rec: Optional[float] = None
    lam: float = 10.0
    fanout: Optional[int] = None

    def __post_init__(self):
        if self.t_rec is None:
            object.__setattr__(self, "t_rec", 2 * self.dt_max)
        if self.dt_max <= 0:
            raise ValueError("dt_max must be positive")
        if self.t_rec < self.dt_max:
            raise ValueError("t_rec must be >= dt_max")
        if not (0 < self.lam <= 100):
            raise ValueError("lambda must lie in (0, 100]")
        if self.fanout is not None and self.fanout < 1:
            raise ValueError("fanout must be >= 1")


def decide_mode(eps_local: float, view: NeighborView) -> Mode:
    """Lazy when our battery is below the neighbourhood's advertised mean."""
    energies = view.energies()
    if not energies:
        return Mode.EAGER
    mean = math.fsum(energies) / len(energies)
    return Mode.LAZY if eps_local < mean else Mode.EAGER


def delta_t_next(eps_local: float, view: NeighborView, dt_max: float) -> float:
    """Eager hold time: 0 for the best-charged node in the neighbourhood, ``dt_max`` for the worst.

    The min/max range includes ``eps_local`` so the result never leaves ``[0, dt_max]``.
    """
    energies = view.energies()
    lo = min(energies, default=eps_local)
    hi = max(energies, default=eps_local)
    lo, hi = min(lo, eps_local), max(hi, eps_local)
    if hi == lo:
        return 0.0
    # normalise first so both endpoints come out exact
    wait = dt_max * (1.0 - (eps_local - lo) / (hi - lo))
    return min(max(wait, 0.0), dt_max)


@dataclass
class EagpState:
    seen: set = field(default_factory=set)
    # id -> (msg, enqueued_at)
    lazy_queue: dict = field(default_factory=dict)
    # id -> (msg, fire_at)
    eager_pending: dict = field(default_factory=dict)
    # id -> (msg, advertised_at)
    advertised: dict = field(default_factory=dict)
    # id -> time we asked a neighbour for it
    requested: dict = field(default_factory=dict)
    last_advertised_energy: float = 100.0

    def check(self):
        lazy, eager, adv = set(self.lazy_queue), set(self.eager_pending), set(self.advertised)
        assert not (lazy & eager or lazy & adv or eager & adv), "id held in two queues"
        assert (lazy | eager | adv) <= self.seen


class EagpNode(Protocol):
    name = "eagp"

    def __init__(self, node_id, *, is_sink=False, rng=None, config: EagpConfig = None):
        super().__init__(node_id, is_sink=is_sink, rng=rng)
        self.config = config or EagpConfig()
        self.state = EagpState()

    def on_start(self, now, view):
        st = self.state
        st.last_advertised_energy = self.energy()
        beacon = ControlMessage(ControlKind.ENERGY_BEACON, self.node_id, energy=st.last_advertised_energy)
        return [
            Broadcast(beacon),
            ScheduleTimer(self.node_id * CYCLE_PHASE_PER_NODE, "cycle"),
        ]

    def originate(self, msg, now, view):
        self.state.seen.add(msg.id)
        return self._finish([Broadcast(msg)])

    def on_data(self, msg: DataMessage, now, view):
        st = self.state
        mid = msg.id
        if mid not in st.seen:
            st.seen.add(mid)
            st.requested.pop(mid, None)
            actions = [Deliver(msg)]
            if msg.ttl > 0:
                eps = self.energy()
                if decide_mode(eps, view) is Mode.EAGER:
                    wait = delta_t_next(eps, view, self.config.dt_max)
                    if wait == 0.0:
                        # a zero hold means now, ahead of other arrivals in this same instant
                        actions += self._forward(msg, view)
                    else:
                        st.eager_pending[mid] = (msg, now + wait)
                        actions.append(ScheduleTimer(wait, ("eager", mid)))
                else:
                    st.lazy_queue[mid] = (msg, now)
            return self._finish(actions)

        if mid in st.eager_pending:
            held, _ = st.eager_pending[mid]
            if msg.sender != held.sender:
                del st.eager_pending[mid]
                st.lazy_queue[mid] = (held, now)
        elif mid in st.lazy_queue:
            held, _ = st.lazy_queue[mid]
            if msg.sender != held.sender:
                del st.lazy_queue[mid]
        return self._finish([])

    def on_timer(self, tag, now, view):
        if tag == "cycle":
            actions = self.on_dtmax_cycle(now)
            actions.append(ScheduleTimer(self.config.dt_max, "cycle"))
            return self._finish(actions)
        if isinstance(tag, tuple) and tag[0] == "eager":
            entry = self.state.eager_pending.pop(tag[1], None)
            if entry is None:
                return self._finish([])
            return self._finish(self._forward(entry[0], view))
        raise UnknownTimer(f"eagp node {self.node_id}: unknown timer {tag!r}")

    def on_control(self, msg: ControlMessage, now, view):
        if msg.kind is ControlKind.LAZY_ADVERT:
            return self._finish(self.on_lazy_advert(msg, now))
        if msg.kind is ControlKind.MESSAGE_REQUEST:
            return self._finish(self.on_message_request(msg, now))
        return self._finish([])

    def on_dtmax_cycle(self, now) -> list:
        st = self.state
        t_rec, dt_max = self.config.t_rec, self.config.dt_max
        for mid in [m for m, (_, t) in st.advertised.items() if now - t > t_rec]:
            del st.advertised[mid]
        expired = sorted(m for m, (_, t) in st.lazy_queue.items() if now - t > dt_max)
        if not expired:
            return []
        for mid in expired:
            msg, _ = st.lazy_queue.pop(mid)
            st.advertised[mid] = (msg, now)
        advert = ControlMessage(ControlKind.LAZY_ADVERT, self.node_id, ids=tuple(expired), energy=self.energy())
        return [Broadcast(advert)]

    def on_lazy_advert(self, advert: ControlMessage, now) -> list:
        st = self.state
        # one outstanding request per id; ask again only after a full cycle without an answer
        wanted = tuple(
            m for m in advert.ids
            if m not in st.seen and now - st.requested.get(m, -math.inf) >= self.config.dt_max
        )
        if not wanted:
            return []
        for m in wanted:
            st.requested[m] = now
        req = ControlMessage(ControlKind.MESSAGE_REQUEST, self.node_id, ids=wanted, energy=self.energy())
        return [Unicast(advert.sender, req)]

    def on_message_request(self, req: ControlMessage, now) -> list:
        st = self.state
        out = []
        for mid in req.ids:
            entry = st.lazy_queue.get(mid) or st.advertised.get(mid)
            if entry is None:
                continue
            msg = entry[0]
            if msg.ttl > 0:
                out.append(Unicast(req.sender, msg.forwarded_by(self.node_id)))
        return out

    def maybe_advertise_energy(self, now=None) -> list:
        eps = self.energy()
        if abs(eps - self.state.last_advertised_energy) >= self.config.lam:
            self.state.last_advertised_energy = eps
            return [Broadcast(ControlMessage(ControlKind.ENERGY_BEACON, self.node_id, energy=eps))]
        return []

    def _forward(self, msg: DataMessage, view: NeighborView) -> list:
        out = msg.forwarded_by(self.node_id)
        if self.config.fanout is None:
            return [Broadcast(out)]
        candidates = [n for n in view.neighbors if n != msg.sender]
        k = min(self.config.fanout, len(candidates))
        if k == 0:
            return []
        picks = self.rng.choice(len(candidates), size=k, replace=False)
        return [Unicast(candidates[i], out) for i in sorted(picks)]

    def _finish(self, actions: list) -> list:
        # every transmission piggybacks our energy, so it counts as an advertisement
        if any(isinstance(a, (Broadcast, Unicast)) for a in actions):
            self.state.last_advertised_energy = self.energy()
            return actions
        return actions + self.maybe_advertise_energy()
