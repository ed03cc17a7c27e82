import pytest

from coauthor.config import Config
from coauthor.providers import (
    ChatService,
    EmbeddingCache,
    EmbeddingProfile,
    EmbeddingService,
    MockChatProvider,
    MockEmbeddingProvider,
)


@pytest.fixture
def config(tmp_path):
    cfg = Config()
    cfg.store.root = str(tmp_path / "workspace")
    cfg.providers.linking.dim = 32
    cfg.providers.heading_eval.dim = 16
    return cfg


@pytest.fixture
def linking_profile(config):
    p = config.providers.linking
    return EmbeddingProfile(purpose="linking", model_tag=p.model_tag, dim=p.dim)


@pytest.fixture
def heading_profile(config):
    p = config.providers.heading_eval
    return EmbeddingProfile(purpose="heading_eval", model_tag=p.model_tag, dim=p.dim)


@pytest.fixture
def embedding(tmp_path):
    cache = EmbeddingCache(tmp_path / "embcache")
    return EmbeddingService(MockEmbeddingProvider(), cache=cache, max_batch=64)


@pytest.fixture
def chat():
    return ChatService(MockChatProvider(mode="template"), max_retries=2)
