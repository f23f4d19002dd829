import pytest

from seatrade.synthetic import make_fixture


@pytest.fixture(scope="session")
def synth_inputs(tmp_path_factory):
    """The bundled 3-port x 24-month synthetic dataset, built once per run."""
    root = tmp_path_factory.mktemp("synth")
    return make_fixture(root)
