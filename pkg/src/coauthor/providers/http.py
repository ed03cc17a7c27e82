"""JSON-over-HTTP providers following the de-facto completion/embedding API.

Request and response shapes are documented in docs/providers.md. Rate-limit
(429) and server-side (5xx) responses surface as transient errors so the
client layer can retry; other non-2xx responses are treated as permanent.
"""

from __future__ import annotations

import httpx
import numpy as np

from ..errors import ContentError, TransportError
from .base import ChatRequest, ChatResponse, TransientProviderError


class HttpChatProvider:
    def __init__(
        self,
        base_url: str,
        api_key: str,
        timeout: float = 120.0,
        client: httpx.Client | None = None,
    ):
        self._client = client or httpx.Client(
            base_url=base_url,
            headers={"Authorization": f"Bearer {api_key}"},
            timeout=timeout,
        )

    def complete(self, request: ChatRequest) -> ChatResponse:
        body = {
            "model": request.model_tag,
            "messages": [
                {"role": "system", "content": request.system_prompt},
                {"role": "user", "content": request.user_prompt},
            ],
            "max_tokens": request.max_tokens,
            "temperature": request.temperature,
        }
        data = _post_json(self._client, "/chat/completions", body)
        try:
            choice = data["choices"][0]
            text = choice["message"]["content"] or ""
            finish = choice.get("finish_reason", "stop")
            usage = data.get("usage", {})
        except (KeyError, IndexError, TypeError) as exc:
            raise TransportError(f"malformed chat completion response: {exc}") from exc
        if finish in ("content_filter", "refusal"):
            raise ContentError(f"provider refused the request (finish_reason={finish})")
        return ChatResponse(
            text=text,
            prompt_tokens=int(usage.get("prompt_tokens", 0)),
            completion_tokens=int(usage.get("completion_tokens", 0)),
            finish_reason=finish,
        )


class HttpEmbeddingProvider:
    def __init__(
        self,
        base_url: str,
        api_key: str,
        timeout: float = 120.0,
        client: httpx.Client | None = None,
    ):
        self._client = client or httpx.Client(
            base_url=base_url,
            headers={"Authorization": f"Bearer {api_key}"},
            timeout=timeout,
        )

    def embed(self, texts: list[str], model_tag: str, dim: int) -> np.ndarray:
        data = _post_json(self._client, "/embeddings", {"model": model_tag, "input": texts})
        try:
            rows = sorted(data["data"], key=lambda item: item["index"])
            vectors = np.asarray([row["embedding"] for row in rows], dtype=np.float64)
        except (KeyError, TypeError, ValueError) as exc:
            raise TransportError(f"malformed embedding response: {exc}") from exc
        return vectors


def _post_json(client: httpx.Client, path: str, body: dict) -> dict:
    try:
        response = client.post(path, json=body)
    except httpx.HTTPError as exc:
        raise TransientProviderError(f"transport failure: {exc}") from exc
    if response.status_code == 429 or response.status_code >= 500:
        raise TransientProviderError(
            f"provider returned {response.status_code}: {response.text[:200]}"
        )
    if response.status_code >= 400:
        raise ContentError(
            f"provider rejected the request ({response.status_code}): {response.text[:200]}"
        )
    return response.json()
