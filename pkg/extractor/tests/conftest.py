import pytest

from hyperpersona_extractor.extractor import EmbedConfig, UnitEmbedder
from hyperpersona_extractor.testing import make_tiny_model


@pytest.fixture(scope="session")
def tiny_model_dir(tmp_path_factory):
    return make_tiny_model(tmp_path_factory.mktemp("model") / "tiny", seed=7)


@pytest.fixture(scope="session")
def embedder(tiny_model_dir):
    config = EmbedConfig(model_id=str(tiny_model_dir), layer_lo=2, layer_hi=4,
                         max_tokens=64)
    return UnitEmbedder(config)
