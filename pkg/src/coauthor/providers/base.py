"""Provider-agnostic types and protocols for embedding and chat backends."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol

import numpy as np

from ..errors import IntegrityError, ValidationError

LINKING = "linking"
HEADING_EVAL = "heading_eval"


@dataclass
class EmbeddingProfile:
    """Which embedding model serves which purpose.

    Linking (tracing citations to source blocks) and heading evaluation may
    use different models; both are configuration, not code.
    """

    purpose: str  # linking | heading_eval
    model_tag: str
    dim: int


@dataclass(eq=False)
class EmbeddingVector:
    values: np.ndarray  # float64, unit norm
    dim: int
    model_tag: str


@dataclass
class ChatRequest:
    system_prompt: str
    user_prompt: str
    model_tag: str
    max_tokens: int = 4096
    temperature: float = 0.3

    def validate(self) -> None:
        if not self.system_prompt or not self.user_prompt:
            raise ValidationError("chat prompts must not be empty")
        if not self.model_tag:
            raise ValidationError("chat model_tag must not be empty")
        if self.max_tokens < 1:
            raise ValidationError("max_tokens must be at least 1")


@dataclass
class ChatResponse:
    text: str
    prompt_tokens: int = 0
    completion_tokens: int = 0
    finish_reason: str = "stop"


class TransientProviderError(Exception):
    """Internal signal: the provider failed in a way worth retrying."""


class EmbeddingProvider(Protocol):
    def embed(self, texts: list[str], model_tag: str, dim: int) -> np.ndarray: ...


class ChatProvider(Protocol):
    def complete(self, request: ChatRequest) -> ChatResponse: ...


def normalize_rows(matrix: np.ndarray) -> np.ndarray:
    """Scale each row to unit Euclidean norm (cosine becomes a dot product)."""
    matrix = np.asarray(matrix, dtype=np.float64)
    norms = np.linalg.norm(matrix, axis=1)
    if np.any(norms == 0):
        raise IntegrityError("embedding provider returned a zero vector")
    return matrix / norms[:, None]
