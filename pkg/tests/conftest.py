import pytest

from xling.lexicon import Lexicon


@pytest.fixture(scope="session")
def lexicon():
    return Lexicon.load_default()


@pytest.fixture(scope="session")
def minicorpus(tmp_path_factory):
    """Synthetic mini-corpus mirroring the d1/d2/d3 layout, built once."""
    from xling.minicorpus import generate

    root = tmp_path_factory.mktemp("minicorpus")
    generate(root)
    return root
