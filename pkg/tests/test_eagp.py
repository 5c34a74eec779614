import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import data, make_view
from eagpsim.core import Broadcast, ControlKind, ControlMessage, Deliver, MessageId, NeighborView, ScheduleTimer, Unicast, UnknownTimer
from eagpsim.eagp import EagpConfig, EagpNode, Mode, decide_mode, delta_t_next


def node(eps=50.0, node_id=0, **cfg):
    n = EagpNode(node_id, config=EagpConfig(**cfg), rng=np.random.default_rng(0))
    n.energy = lambda: eps
    n.state.last_advertised_energy = eps
    return n


def transmissions(actions):
    return [a for a in actions if isinstance(a, (Broadcast, Unicast))]


# -- mode decision --------------------------------------------------------


@pytest.mark.parametrize(
    "eps, nbrs, mode",
    [(40, (50, 70), Mode.LAZY), (60, (50, 70), Mode.EAGER), (100, (10, 20), Mode.EAGER)],
)
def test_decide_mode_examples(eps, nbrs, mode):
    assert decide_mode(eps, make_view(*nbrs)) is mode


def test_decide_mode_empty_view_is_eager():
    assert decide_mode(3.0, NeighborView()) is Mode.EAGER


def test_decide_mode_ignores_unheard_neighbours():
    v = NeighborView({1: (None, None), 2: (80.0, 1.0)})
    assert decide_mode(70.0, v) is Mode.LAZY
    assert decide_mode(80.0, v) is Mode.EAGER


# -- eager hold time ------------------------------------------------------


def test_delta_t_next_hand_case():
    assert delta_t_next(80, make_view(60, 90), 10) == pytest.approx(10 - 10 * 20 / 30, abs=1e-12)


def test_delta_t_next_endpoints():
    assert delta_t_next(90, make_view(60, 90, 75), 10) == 0.0
    assert delta_t_next(60, make_view(60, 90, 75), 10) == 10.0


def test_delta_t_next_self_above_all_neighbours():
    # neighbours-only normalisation would go negative here
    assert delta_t_next(99, make_view(20, 40), 10) == 0.0


def test_top_energy_forwards_without_waiting():
    n = node(eps=90)
    msg = data(sender=1)
    acts = n.on_data(msg, 0.0, make_view(60, 90))
    assert acts[0] == Deliver(msg)
    assert [type(a) for a in acts[1:]] == [Broadcast]
    assert not n.state.eager_pending


def test_delta_t_next_all_equal_is_zero():
    assert delta_t_next(42, make_view(42, 42, 42), 10) == 0.0
    assert delta_t_next(42, NeighborView(), 10) == 0.0


@settings(max_examples=500, deadline=None)
@given(
    eps=st.floats(0, 100),
    nbrs=st.lists(st.floats(0, 100), min_size=0, max_size=12),
    dt_max=st.floats(0.01, 100),
)
def test_delta_t_next_bounded(eps, nbrs, dt_max):
    got = delta_t_next(eps, make_view(*nbrs), dt_max)
    assert 0.0 <= got <= dt_max
    energies = nbrs + [eps]
    if max(energies) > min(energies):
        lo, hi = min(energies), max(energies)
        assert got == pytest.approx(dt_max * (hi - eps) / (hi - lo), abs=1e-9 * dt_max)


# -- config ----------------------------------------------------------------


def test_config_defaults_and_validation():
    c = EagpConfig()
    assert (c.dt_max, c.t_rec, c.lam, c.fanout) == (10.0, 20.0, 10.0, None)
    assert EagpConfig(dt_max=4).t_rec == 8
    for bad in (dict(dt_max=0), dict(dt_max=10, t_rec=5), dict(lam=0), dict(lam=101), dict(fanout=0)):
        with pytest.raises(ValueError):
            EagpConfig(**bad)


# -- message handling ---------------------------------------------------------


def test_new_message_below_mean_goes_lazy():
    n = node(eps=40)
    msg = data(sender=3)
    acts = n.on_data(msg, 1.0, make_view(50, 70, start=3))
    assert acts[0] == Deliver(msg)
    assert not transmissions(acts)
    assert msg.id in n.state.lazy_queue


def test_new_message_eager_schedules_timer_then_forwards():
    n = node(eps=80)
    msg = data(sender=1)
    v = make_view(60, 90)
    acts = n.on_data(msg, 2.0, v)
    timer = [a for a in acts if isinstance(a, ScheduleTimer)][0]
    assert timer.delay == pytest.approx(10 / 3)
    assert n.state.eager_pending[msg.id][1] == pytest.approx(2.0 + 10 / 3)
    out = n.on_timer(timer.tag, 2.0 + timer.delay, v)
    bc = [a for a in out if isinstance(a, Broadcast)]
    assert len(bc) == 1
    fwd = bc[0].msg
    assert (fwd.id, fwd.sender, fwd.ttl) == (msg.id, 0, msg.ttl - 1)
    assert msg.id not in n.state.eager_pending


def test_duplicate_while_eager_demotes_to_lazy():
    n = node(eps=80)
    v = make_view(60, 90)
    acts = n.on_data(data(sender=1), 0.0, v)
    tag = [a for a in acts if isinstance(a, ScheduleTimer)][0].tag
    n.on_data(data(sender=2), 1.0, v)
    mid = MessageId(9, 0)
    assert mid in n.state.lazy_queue and mid not in n.state.eager_pending
    assert n.state.lazy_queue[mid][1] == 1.0
    assert not transmissions(n.on_timer(tag, 3.4, v))


def test_duplicate_while_lazy_discards():
    n = node(eps=10)
    v = make_view(60, 90)
    n.on_data(data(sender=1), 0.0, v)
    n.on_data(data(sender=2), 0.5, v)
    assert not n.state.lazy_queue and not n.state.advertised
    # nothing left to advertise later
    assert n.on_dtmax_cycle(50.0) == []


def test_duplicate_from_same_sender_is_ignored():
    n = node(eps=10)
    v = make_view(60, 90)
    n.on_data(data(sender=1), 0.0, v)
    n.on_data(data(sender=1), 0.5, v)
    assert MessageId(9, 0) in n.state.lazy_queue


def test_ttl_zero_delivered_never_forwarded():
    n = node(eps=99)
    msg = data(sender=1, ttl=0)
    acts = n.on_data(msg, 0.0, make_view(10))
    assert acts == [Deliver(msg)]


def test_every_transmission_piggybacks_energy_update():
    n = node(eps=77)
    n.state.last_advertised_energy = 100.0
    n.originate(data(origin=0, sender=0), 0.0, make_view(10))
    assert n.state.last_advertised_energy == 77


# -- lazy cycle, advert, recovery --------------------------------------------


def test_cycle_advertises_expired_ids_together():
    n = node(eps=10)
    v = make_view(60, 90)
    n.on_data(data(seq=0, sender=1), 0.0, v)
    n.on_data(data(seq=1, sender=1), 1.0, v)
    n.on_data(data(seq=2, sender=1), 9.0, v)
    acts = n.on_dtmax_cycle(11.5)
    assert len(acts) == 1
    advert = acts[0].msg
    assert advert.kind is ControlKind.LAZY_ADVERT
    assert advert.ids == (MessageId(9, 0), MessageId(9, 1))
    assert set(n.state.advertised) == {MessageId(9, 0), MessageId(9, 1)}
    assert set(n.state.lazy_queue) == {MessageId(9, 2)}


def test_cycle_with_nothing_expired_sends_nothing():
    n = node(eps=10)
    n.on_data(data(sender=1), 0.0, make_view(60, 90))
    assert n.on_dtmax_cycle(5.0) == []


def test_advertised_purged_after_t_rec():
    n = node(eps=10)
    v = make_view(60, 90)
    n.on_data(data(sender=1), 0.0, v)
    n.on_dtmax_cycle(10.5)
    n.on_dtmax_cycle(30.0)
    assert n.state.advertised
    n.on_dtmax_cycle(30.6)
    assert not n.state.advertised


def test_cycle_timer_reschedules():
    n = node()
    acts = n.on_timer("cycle", 0.0, NeighborView())
    assert ScheduleTimer(10.0, "cycle") in acts


def test_unknown_timer_aborts():
    with pytest.raises(UnknownTimer):
        node().on_timer("bogus", 0.0, NeighborView())


def advert(*ids, sender=5):
    return ControlMessage(ControlKind.LAZY_ADVERT, sender, ids=tuple(ids))


def test_advert_of_unseen_id_requests_it():
    n = node()
    acts = n.on_control(advert(MessageId(3, 1)), 0.0, make_view(50))
    reqs = [a for a in acts if isinstance(a, Unicast)]
    assert len(reqs) == 1
    assert reqs[0].dest == 5
    assert reqs[0].msg.kind is ControlKind.MESSAGE_REQUEST
    assert reqs[0].msg.ids == (MessageId(3, 1),)


def test_advert_of_seen_id_ignored():
    n = node()
    n.originate(data(origin=0, sender=0), 0.0, NeighborView())
    assert not transmissions(n.on_control(advert(MessageId(0, 0)), 1.0, make_view(50)))


def test_mixed_advert_requests_only_unseen():
    n = node()
    n.state.seen.update({MessageId(1, 0), MessageId(1, 2)})
    ids = [MessageId(1, k) for k in range(5)]
    acts = n.on_control(advert(*ids), 0.0, make_view(50))
    assert transmissions(acts)[0].msg.ids == tuple(i for i in ids if i not in n.state.seen)


def test_request_answered_from_lazy_and_advertised():
    holder = node(eps=10, node_id=4)
    v = make_view(60, 90)
    holder.on_data(data(seq=0, sender=1), 0.0, v)
    holder.on_data(data(seq=1, sender=1), 0.0, v)
    holder.on_dtmax_cycle(10.5)
    holder.on_data(data(seq=2, sender=1), 11.0, v)
    req = ControlMessage(
        ControlKind.MESSAGE_REQUEST, 7, ids=(MessageId(9, 0), MessageId(9, 2), MessageId(8, 8))
    )
    out = transmissions(holder.on_control(req, 12.0, v))
    assert [(u.dest, u.msg.id, u.msg.sender) for u in out] == [(7, MessageId(9, 0), 4), (7, MessageId(9, 2), 4)]


def test_request_for_purged_id_gets_nothing():
    holder = node(eps=10)
    v = make_view(60, 90)
    holder.on_data(data(sender=1), 0.0, v)
    holder.on_dtmax_cycle(10.5)
    holder.on_dtmax_cycle(40.0)
    req = ControlMessage(ControlKind.MESSAGE_REQUEST, 7, ids=(MessageId(9, 0),))
    assert not transmissions(holder.on_control(req, 41.0, v))


# -- energy beacons ---------------------------------------------------------


def test_beacon_when_energy_moves_by_lambda():
    n = node(eps=89)
    n.state.last_advertised_energy = 100.0
    acts = n.maybe_advertise_energy()
    assert len(acts) == 1 and acts[0].msg.kind is ControlKind.ENERGY_BEACON
    assert n.state.last_advertised_energy == 89


def test_no_beacon_below_lambda():
    n = node(eps=95)
    n.state.last_advertised_energy = 100.0
    assert n.maybe_advertise_energy() == []


def test_data_transmission_suppresses_beacon():
    n = node(eps=80)
    n.state.last_advertised_energy = 100.0
    acts = n.originate(data(origin=0, sender=0), 0.0, make_view(50))
    assert [type(a.msg).__name__ for a in transmissions(acts)] == ["DataMessage"]


def test_fanout_subset_mode():
    n = node(eps=99, fanout=2)
    v = make_view(10, 20, 30, 40)
    # highest energy around, so it forwards at once
    acts = n.on_data(data(sender=1), 0.0, v)
    assert not [a for a in acts if isinstance(a, ScheduleTimer)]
    dests = [a.dest for a in acts if isinstance(a, Unicast)]
    assert len(dests) == 2 and 1 not in dests


# -- state exclusivity under random interleavings -----------------------------

event = st.one_of(
    st.tuples(st.just("data"), st.integers(0, 3), st.integers(1, 4), st.floats(0, 100)),
    st.tuples(st.just("cycle"), st.just(0), st.just(0), st.just(0.0)),
    st.tuples(st.just("advert"), st.integers(0, 3), st.integers(1, 4), st.just(0.0)),
    st.tuples(st.just("request"), st.integers(0, 3), st.integers(1, 4), st.just(0.0)),
    st.tuples(st.just("timer"), st.integers(0, 3), st.just(0), st.just(0.0)),
)


@settings(max_examples=300, deadline=None)
@given(steps=st.lists(st.tuples(event, st.floats(0, 8)), max_size=40), eps=st.floats(0, 100))
def test_queues_stay_exclusive(steps, eps):
    n = node(eps=eps)
    v = make_view(20, 50, 80, 65)
    now = 0.0
    for (kind, seq, sender, _), dt in steps:
        now += dt
        mid = MessageId(9, seq)
        if kind == "data":
            acts = n.on_data(data(seq=seq, sender=sender), now, v)
        elif kind == "cycle":
            acts = n.on_timer("cycle", now, v)
        elif kind == "advert":
            acts = n.on_control(advert(mid, sender=sender), now, v)
        elif kind == "request":
            acts = n.on_control(ControlMessage(ControlKind.MESSAGE_REQUEST, sender, ids=(mid,)), now, v)
        else:
            acts = n.on_timer(("eager", mid), now, v)
        n.state.check()
        for a in transmissions(acts):
            if isinstance(a.msg, ControlMessage) and a.msg.kind is not ControlKind.MESSAGE_REQUEST:
                assert a.msg.energy == eps
        if kind == "timer" and transmissions(acts):
            assert mid not in n.state.eager_pending


# -- liveness on small static graphs ------------------------------------------


def eagp_nodes(n, sink=0):
    return [EagpNode(i, is_sink=(i == sink), rng=np.random.default_rng(i)) for i in range(n)]


def test_equal_energies_reach_everyone_on_small_graphs(monkeypatch):
    import networkx as nx

    from conftest import simulate
    from eagpsim.scenario import Topology

    # hold every battery reading at the same value so no node ever defers
    monkeypatch.setattr("eagpsim.kernel.energy_percent", lambda battery: 100.0)
    checked = 0
    for g in nx.graph_atlas_g():
        if not (2 <= g.number_of_nodes() <= 6 and nx.is_connected(g)):
            continue
        adj = [sorted(g.neighbors(i)) for i in range(g.number_of_nodes())]
        topo = Topology.from_adjacency(adj)
        sim = simulate(topo, eagp_nodes(topo.n), traffic=(10.0, 10.0), duration=150.0)
        # copies arriving in the same instant demote to lazy, and recovery then
        # needs up to two cycles per hop, so only judge the early messages
        for mid, nodes in sim.metrics.reached.items():
            if mid.seq <= 2:
                assert len(nodes) == topo.n - 1, (adj, mid)
        checked += 1
    assert checked == 142


def test_lazy_discard_can_strand_a_leaf():
    """A low node hears the same message from two eager neighbours and drops it;
    its only neighbour never gets a copy, not even through recovery."""
    from conftest import simulate
    from eagpsim.scenario import Topology

    #   0 - 1 - 3 - 4
    #    \- 2 -/
    adj = [[1, 2], [0, 3], [0, 3], [1, 2, 4], [3]]
    topo = Topology.from_adjacency(adj)
    sim = simulate(topo, eagp_nodes(5), batteries=[100, 100, 100, 10, 100], traffic=(10.0, 10.0), duration=60.0)
    reached = sim.metrics.reached[MessageId(0, 0)]
    assert reached == {1, 2, 3}
