"""Comparison protocols: flooding gossip, fanout gossip and minimum-cost forwarding."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

from .core import (
    Broadcast,
    ControlKind,
    ControlMessage,
    DataMessage,
    Deliver,
    Protocol,
    ScheduleTimer,
    Unicast,
    UnknownTimer,
)


@dataclass
class GossipState:
    seen: set = field(default_factory=set)
    fanout: Optional[int] = None

    def __post_init__(self):
        if self.fanout is not None and self.fanout < 1:
            raise ValueError("fanout must be >= 1")


class GossipNode(Protocol):
    """Forward every new message straight away, to everyone or to ``fanout`` random neighbours."""

    def __init__(self, node_id, *, is_sink=False, rng=None, fanout: Optional[int] = None):
        super().__init__(node_id, is_sink=is_sink, rng=rng)
        self.state = GossipState(fanout=fanout)

    @property
    def name(self):
        return "gossip" if self.state.fanout is None else "gossip_fo"

    def originate(self, msg, now, view):
        self.state.seen.add(msg.id)
        return self._forward(msg, msg.sender, view)

    def on_data(self, msg: DataMessage, now, view):
        if msg.id in self.state.seen:
            return []
        self.state.seen.add(msg.id)
        actions = [Deliver(msg)]
        if msg.ttl > 0:
            actions += self._forward(msg.forwarded_by(self.node_id), msg.sender, view)
        return actions

    def _forward(self, out: DataMessage, exclude: int, view) -> list:
        fanout = self.state.fanout
        if fanout is None:
            return [Broadcast(out)]
        candidates = [n for n in view.neighbors if n != exclude]
        k = min(fanout, len(candidates))
        if k == 0:
            return []
        picks = self.rng.choice(len(candidates), size=k, replace=False)
        return [Unicast(candidates[i], out) for i in sorted(picks)]


@dataclass
class McfaState:
    cost: float = math.inf
    seen: set = field(default_factory=set)
    setup_done: bool = False
    epoch: int = 0


class McfaNode(Protocol):
    """Minimum cost forwarding over a hop-count cost field rooted at the sink.

    Setup is a flood of cost adverts from the sink. A data message carries the
    cost of its last relay; only neighbours exactly one hop closer relay it.
    With ``resetup_interval`` the sink re-floods the field under a new epoch.
    """

    name = "mcfa"

    def __init__(self, node_id, *, is_sink=False, rng=None, resetup_interval: float = 0.0):
        super().__init__(node_id, is_sink=is_sink, rng=rng)
        self.state = McfaState(cost=0 if is_sink else math.inf)
        self.resetup_interval = resetup_interval

    def on_start(self, now, view):
        if not self.is_sink:
            return []
        return self.setup(now)

    def setup(self, now) -> list:
        st = self.state
        st.setup_done = True
        actions = [Broadcast(ControlMessage(ControlKind.COST_ADVERT, self.node_id, cost=0, epoch=st.epoch))]
        if self.resetup_interval > 0:
            actions.append(ScheduleTimer(self.resetup_interval, "resetup"))
        return actions

    def on_timer(self, tag, now, view):
        if tag == "resetup" and self.is_sink:
            self.state.epoch += 1
            return self.setup(now)
        raise UnknownTimer(f"mcfa node {self.node_id}: unknown timer {tag!r}")

    def on_control(self, msg: ControlMessage, now, view):
        if msg.kind is not ControlKind.COST_ADVERT or self.is_sink:
            return []
        st = self.state
        if msg.epoch > st.epoch:
            st.epoch = msg.epoch
            st.cost = math.inf
        elif msg.epoch < st.epoch:
            return []
        if msg.cost + 1 >= st.cost:
            return []
        st.cost = msg.cost + 1
        st.setup_done = True
        return [Broadcast(ControlMessage(ControlKind.COST_ADVERT, self.node_id, cost=st.cost, epoch=st.epoch))]

    def originate(self, msg, now, view):
        self.state.seen.add(msg.id)
        if math.isinf(self.state.cost):
            return []
        return [Broadcast(replace(msg, remaining_cost=int(self.state.cost)))]

    def on_data(self, msg: DataMessage, now, view):
        st = self.state
        if msg.id in st.seen:
            return []
        st.seen.add(msg.id)
        actions = [Deliver(msg)]
        if msg.ttl > 0 and msg.remaining_cost is not None and st.cost == msg.remaining_cost - 1:
            actions.append(Broadcast(replace(msg.forwarded_by(self.node_id), remaining_cost=int(st.cost))))
        return actions
