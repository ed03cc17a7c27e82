from .base import (
    HEADING_EVAL,
    LINKING,
    ChatProvider,
    ChatRequest,
    ChatResponse,
    EmbeddingProfile,
    EmbeddingProvider,
    EmbeddingVector,
    TransientProviderError,
    normalize_rows,
)
from .cache import EmbeddingCache, cache_key
from .clients import ChatService, EmbeddingService, build_services, profile_from_config
from .mock import MockChatProvider, MockEmbeddingProvider, hash_seed
from .ratelimit import RateLimiter

__all__ = [
    "HEADING_EVAL",
    "LINKING",
    "ChatProvider",
    "ChatRequest",
    "ChatResponse",
    "ChatService",
    "EmbeddingCache",
    "EmbeddingProfile",
    "EmbeddingProvider",
    "EmbeddingService",
    "EmbeddingVector",
    "MockChatProvider",
    "MockEmbeddingProvider",
    "RateLimiter",
    "TransientProviderError",
    "build_services",
    "cache_key",
    "hash_seed",
    "normalize_rows",
    "profile_from_config",
]
