"""Shared message types, protocol actions and the node protocol interface."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import NamedTuple, Optional, Union

DATA_PAYLOAD_BYTES = 64
CONTROL_HEADER_BYTES = 32
CONTROL_ID_BYTES = 8


class MessageId(NamedTuple):
    origin: int
    seq: int


@dataclass(frozen=True)
class DataMessage:
    id: MessageId
    sender: int
    ttl: int
    created_at: float
    payload_size: int = DATA_PAYLOAD_BYTES
    sender_energy: float = 100.0
    # only used by MCFA: the cost the next relay must have plus one
    remaining_cost: Optional[int] = None

    def __post_init__(self):
        if self.ttl < 0:
            raise ValueError(f"negative ttl on {self.id}")

    def forwarded_by(self, node: int) -> "DataMessage":
        """Copy for the next hop: new sender, ttl decremented."""
        if self.ttl <= 0:
            raise ValueError(f"{self.id} has exhausted its ttl")
        return replace(self, sender=node, ttl=self.ttl - 1)


class ControlKind(Enum):
    LAZY_ADVERT = "lazy_advert"
    MESSAGE_REQUEST = "message_request"
    ENERGY_BEACON = "energy_beacon"
    COST_ADVERT = "cost_advert"


@dataclass(frozen=True)
class ControlMessage:
    kind: ControlKind
    sender: int
    ids: tuple = ()
    energy: float = 100.0
    cost: Optional[int] = None
    # cost-field generation, bumped by each MCFA re-setup flood
    epoch: int = 0

    def __post_init__(self):
        if self.kind is ControlKind.LAZY_ADVERT and not self.ids:
            raise ValueError("LazyAdvert must carry at least one id")
        if self.kind is ControlKind.COST_ADVERT and (self.cost is None or self.cost < 0):
            raise ValueError("CostAdvert needs a non-negative cost")

    @property
    def payload_size(self) -> int:
        return CONTROL_HEADER_BYTES + CONTROL_ID_BYTES * len(self.ids)

    # same name as DataMessage so the kernel can stamp either
    @property
    def sender_energy(self) -> float:
        return self.energy


Message = Union[DataMessage, ControlMessage]


@dataclass
class NeighborView:
    """What a node knows about its current radio neighbours.

    ``entries`` maps every in-range, alive neighbour to ``(energy, last_update)``;
    energy is ``None`` until that neighbour has been heard at least once.
    """

    entries: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.entries)

    def __contains__(self, node):
        return node in self.entries

    @property
    def neighbors(self) -> list:
        return sorted(self.entries)

    def energies(self) -> list:
        return [e for e, _ in self.entries.values() if e is not None]


@dataclass(frozen=True)
class Broadcast:
    msg: Message


@dataclass(frozen=True)
class Unicast:
    dest: int
    msg: Message


@dataclass(frozen=True)
class ScheduleTimer:
    delay: float
    tag: object


@dataclass(frozen=True)
class Deliver:
    msg: DataMessage


ProtocolAction = Union[Broadcast, Unicast, ScheduleTimer, Deliver]


class UnknownTimer(RuntimeError):
    """A node was handed a timer tag it never scheduled."""


class Protocol:
    """Per-node routing state machine.

    Handlers only return actions; the kernel performs every side effect.
    ``energy`` is a zero-argument callable giving the node's own battery
    percentage, bound by the kernel before the run starts.
    """

    name = "abstract"

    def __init__(self, node_id: int, *, is_sink: bool = False, rng=None):
        self.node_id = node_id
        self.is_sink = is_sink
        self.rng = rng
        self.energy = lambda: 100.0

    def on_start(self, now: float, view: NeighborView) -> list:
        return []

    def originate(self, msg: DataMessage, now: float, view: NeighborView) -> list:
        raise NotImplementedError

    def on_data(self, msg: DataMessage, now: float, view: NeighborView) -> list:
        raise NotImplementedError

    def on_control(self, msg: ControlMessage, now: float, view: NeighborView) -> list:
        return []

    def on_timer(self, tag, now: float, view: NeighborView) -> list:
        raise UnknownTimer(f"node {self.node_id}: unexpected timer {tag!r}")


class DatumFactory:
    """Hands out fresh message ids per origin."""

    def __init__(self, ttl: int):
        if ttl < 0:
            raise ValueError("ttl must be >= 0")
        self.ttl = ttl
        self._next_seq: dict = {}

    def new_datum(self, origin: int, now: float) -> DataMessage:
        seq = self._next_seq.get(origin, 0)
        self._next_seq[origin] = seq + 1
        return DataMessage(id=MessageId(origin, seq), sender=origin, ttl=self.ttl, created_at=now)


def ttl_for_diameter(diameter_hops: int) -> int:
    return 2 * diameter_hops
