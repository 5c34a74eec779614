"""Assemble and execute runs from a resolved scenario config."""

from __future__ import annotations

from .baselines import GossipNode, McfaNode
from .core import ttl_for_diameter
from .eagp import EagpConfig, EagpNode
from .energy import EnergyModel
from .kernel import SeededRng, Simulator
from .scenario import build_scenario, build_topology

PROTOCOLS = ("eagp", "gossip", "gossip_fo", "mcfa")


def energy_model(cfg: dict) -> EnergyModel:
    overrides = {k.split(".", 1)[1]: v for k, v in cfg.items() if k.startswith("energy.") and k != "energy.idle_state" and v is not None}
    return EnergyModel.with_overrides(**overrides)


def make_protocols(name: str, cfg: dict, topo, rng: SeededRng) -> list:
    nodes = []
    for i in range(topo.n):
        kw = dict(is_sink=(i == topo.sink), rng=rng.stream("fanout", i))
        if name == "eagp":
            conf = EagpConfig(
                dt_max=cfg["eagp.dt_max"],
                t_rec=cfg["eagp.t_rec"],
                lam=cfg["eagp.lambda"],
                fanout=cfg["eagp.fanout"],
            )
            nodes.append(EagpNode(i, config=conf, **kw))
        elif name == "gossip":
            nodes.append(GossipNode(i, **kw))
        elif name == "gossip_fo":
            nodes.append(GossipNode(i, fanout=cfg["gossip.fanout"], **kw))
        elif name == "mcfa":
            nodes.append(McfaNode(i, resetup_interval=cfg["mcfa.resetup_interval"], **kw))
        else:
            raise ValueError(f"unknown protocol {name!r}; expected one of {PROTOCOLS}")
    return nodes


def build_simulator(cfg: dict, protocol: str, seed: int, trace=None) -> Simulator:
    """Everything but the protocol is a function of (cfg, seed), so all protocols see the same world."""
    rng = SeededRng(seed)
    topo = build_topology(cfg, seed)
    spec = build_scenario(cfg, topo, rng.stream("battery"))
    ttl = cfg["message.ttl"] if cfg["message.ttl"] is not None else ttl_for_diameter(topo.diameter_hops)
    return Simulator(
        topo,
        make_protocols(protocol, cfg, topo, rng),
        spec.initial_battery_j,
        capacity_j=cfg["battery.capacity_j"],
        ttl=ttl,
        rng=rng,
        model=energy_model(cfg),
        traffic=(spec.traffic_min, spec.traffic_max),
        mobility=spec.mobility,
        loss_rate=cfg["radio.loss_rate"],
        idle_state=cfg["energy.idle_state"],
        metric_interval=cfg["metrics.interval"],
        trace=trace,
    )


def run_one(cfg: dict, protocol: str, seed: int, duration: float = None, trace=None):
    duration = cfg["scenario.duration"] if duration is None else duration
    sim = build_simulator(cfg, protocol, seed, trace=trace)
    collector = sim.run(duration)
    return collector.finalize(
        batteries=sim.batteries,
        duration=duration,
        protocol=protocol,
        topology=cfg["topology.kind"],
        scenario=cfg["scenario.kind"],
        seed=seed,
    )


def run(cfg: dict, protocols, seed: int, duration: float = None) -> dict:
    """One report per protocol for a single seed."""
    return {p: run_one(cfg, p, seed, duration) for p in protocols}
