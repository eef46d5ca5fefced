import pytest

from hint_engine.device_sim import SimulatedDevice, sim_app_from_dict
from hint_engine.example_store import load_embedding_table
from tests.builders import FAILING_FIRST_SCRIPT, FLIGHT_SPEC, write_embeddings, write_flight_corpus, write_form_corpus


@pytest.fixture(scope="session")
def embeddings_path(tmp_path_factory):
    """Seeded 1,000-token x 300-dim toy embedding file."""
    return write_embeddings(tmp_path_factory.mktemp("embeddings") / "toy.txt")


@pytest.fixture(scope="session")
def toy_table(embeddings_path):
    return load_embedding_table(embeddings_path)


@pytest.fixture
def flight_device():
    return SimulatedDevice(sim_app_from_dict(FLIGHT_SPEC))


@pytest.fixture
def form_corpus(tmp_path):
    return write_form_corpus(tmp_path)


@pytest.fixture
def failing_first_corpus(tmp_path):
    return write_flight_corpus(tmp_path, FAILING_FIRST_SCRIPT)
