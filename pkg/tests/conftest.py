import pytest

from eagpsim.core import DataMessage, MessageId, NeighborView


def make_view(*energies, start=1):
    """Neighbours numbered from ``start`` with the given advertised energies."""
    return NeighborView({start + i: (e, 0.0) for i, e in enumerate(energies)})


def data(origin=9, seq=0, sender=None, ttl=5, t=0.0):
    return DataMessage(MessageId(origin, seq), sender=origin if sender is None else sender, ttl=ttl, created_at=t)


@pytest.fixture
def view():
    return make_view


def simulate(topo, protocols, *, batteries=None, capacity=100.0, ttl=None, seed=1,
             traffic=(1e9, 1e9), duration=1.0, trace=None, **kw):
    """Run a hand-built network; by default nobody senses, so only protocol start-up acts."""
    from eagpsim.kernel import SeededRng, Simulator

    if batteries is None:
        batteries = [capacity] * topo.n
    sim = Simulator(
        topo,
        protocols,
        batteries,
        capacity_j=capacity,
        ttl=2 * topo.diameter_hops if ttl is None else ttl,
        rng=SeededRng(seed),
        traffic=traffic,
        trace=trace,
        **kw,
    )
    sim.run(duration)
    return sim


# one line per acceptance criterion, echoed at the end of the session
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
