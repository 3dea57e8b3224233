import pytest

from gripforce.glove_sim import GloveSimulator, SimulatorConfig, builtin_archetypes
from gripforce.ingest import SessionStore, log_from_recording
from gripforce.layout import HandRole


def simulated_store(seed: int, n_sessions: int = 10, hand: HandRole = HandRole.DOMINANT,
                    root=None) -> SessionStore:
    """Expert and novice sessions filed directly, skipping the wire round trip."""
    store = SessionStore(root)
    for arch in builtin_archetypes():
        sim = GloveSimulator(arch, hand, SimulatorConfig(rng_seed=seed))
        for _ in range(n_sessions):
            store.add(log_from_recording(sim.generate_session(), arch.name))
    return store


@pytest.fixture(scope="session")
def archetypes():
    return builtin_archetypes()


@pytest.fixture(scope="session")
def sim_store():
    return simulated_store(seed=7)
