"""Client services wrapping providers with caching, retries and pacing."""

from __future__ import annotations

import time
from typing import Callable

import numpy as np

from ..config import Config
from ..errors import IntegrityError, TransportError, ValidationError
from .base import (
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
from .ratelimit import RateLimiter


class EmbeddingService:
    """Validates, normalizes and caches embeddings from a provider.

    embed_batch is the contract operation and refuses oversized batches;
    embed_texts is the convenience wrapper that chunks long inputs.
    """

    def __init__(
        self,
        provider: EmbeddingProvider,
        cache: EmbeddingCache | None = None,
        max_batch: int = 64,
    ):
        self.provider = provider
        self.cache = cache
        self.max_batch = max_batch

    def embed_batch(self, texts: list[str], profile: EmbeddingProfile) -> list[EmbeddingVector]:
        if any(not t or not t.strip() for t in texts):
            raise ValidationError("cannot embed empty text")
        if len(texts) > self.max_batch:
            raise ValidationError(f"batch of {len(texts)} exceeds max_batch={self.max_batch}")
        if not texts:
            return []

        keys = [cache_key(profile.model_tag, t) for t in texts]
        vectors: list[np.ndarray | None] = [None] * len(texts)
        misses: list[int] = []
        for i, key in enumerate(keys):
            cached = self.cache.get(key) if self.cache else None
            if cached is not None:
                if cached.shape != (profile.dim,):
                    raise IntegrityError(
                        f"cached vector dim {cached.shape} does not match profile dim {profile.dim}"
                    )
                vectors[i] = cached
            else:
                misses.append(i)

        if misses:
            fresh = self.provider.embed(
                [texts[i] for i in misses], profile.model_tag, profile.dim
            )
            fresh = np.asarray(fresh, dtype=np.float64)
            if fresh.shape != (len(misses), profile.dim):
                raise IntegrityError(
                    f"provider returned shape {fresh.shape}, expected ({len(misses)}, {profile.dim})"
                )
            fresh = normalize_rows(fresh)
            for row, i in enumerate(misses):
                vectors[i] = fresh[row]
                if self.cache:
                    self.cache.put(keys[i], fresh[row])

        return [
            EmbeddingVector(values=v, dim=profile.dim, model_tag=profile.model_tag)
            for v in vectors
        ]

    def embed_texts(
        self,
        texts: list[str],
        profile: EmbeddingProfile,
        progress: Callable[[int, int], None] | None = None,
    ) -> np.ndarray:
        """Embed any number of texts, chunked to max_batch; returns (N, dim)."""
        out = np.empty((len(texts), profile.dim), dtype=np.float64)
        done = 0
        for start in range(0, len(texts), self.max_batch):
            chunk = texts[start : start + self.max_batch]
            for j, vec in enumerate(self.embed_batch(chunk, profile)):
                out[start + j] = vec.values
            done += len(chunk)
            if progress:
                progress(done, len(texts))
        return out


class ChatService:
    """Chat completion with exponential backoff retries and request pacing."""

    def __init__(
        self,
        provider: ChatProvider,
        max_retries: int = 2,
        rps: float = 0.0,
        backoff_base: float = 0.5,
        sleep: Callable[[float], None] = time.sleep,
        clock: Callable[[], float] = time.monotonic,
    ):
        self.provider = provider
        self.max_retries = max_retries
        self.backoff_base = backoff_base
        self._sleep = sleep
        self.limiter = RateLimiter(rps, clock, sleep) if rps > 0 else None

    def chat(self, request: ChatRequest) -> ChatResponse:
        request.validate()
        last_error: Exception | None = None
        for attempt in range(self.max_retries + 1):
            if self.limiter:
                self.limiter.acquire()
            try:
                response = self.provider.complete(request)
            except TransientProviderError as exc:
                last_error = exc
                if attempt < self.max_retries:
                    self._sleep(self.backoff_base * (2**attempt))
                continue
            if not response.text:
                raise IntegrityError("provider returned an empty completion")
            return response
        raise TransportError(
            f"provider failed after {self.max_retries + 1} attempts: {last_error}"
        )


def build_services(config: Config) -> tuple[EmbeddingService, ChatService]:
    """Construct the embedding and chat services named by the config."""
    import os

    from .http import HttpChatProvider, HttpEmbeddingProvider
    from .mock import MockChatProvider, MockEmbeddingProvider

    p = config.providers
    cache = EmbeddingCache(config.embedding_cache_dir())
    if p.kind == "mock":
        embed_provider: EmbeddingProvider = MockEmbeddingProvider()
        chat_provider: ChatProvider = MockChatProvider(mode=p.mock_chat_mode)
    elif p.kind == "http":
        api_key = os.environ.get(p.api_key_env, "")
        if not api_key:
            raise ValidationError(
                f"provider kind is http but ${p.api_key_env} is not set"
            )
        embed_provider = HttpEmbeddingProvider(p.base_url, api_key, p.timeout_seconds)
        chat_provider = HttpChatProvider(p.base_url, api_key, p.timeout_seconds)
    else:
        raise ValidationError(f"unknown provider kind '{p.kind}'")
    embedding = EmbeddingService(embed_provider, cache=cache, max_batch=p.max_batch)
    chat = ChatService(chat_provider, max_retries=p.max_retries, rps=p.rps)
    return embedding, chat


def profile_from_config(config: Config, purpose: str) -> EmbeddingProfile:
    if purpose == "linking":
        section = config.providers.linking
    elif purpose == "heading_eval":
        section = config.providers.heading_eval
    else:
        raise ValidationError(f"unknown embedding purpose '{purpose}'")
    return EmbeddingProfile(purpose=purpose, model_tag=section.model_tag, dim=section.dim)
