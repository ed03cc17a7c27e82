"""Deterministic offline providers for tests and headless runs.

The mock embedder maps text through a seeded hash to a pseudo-random unit
vector, so the whole pipeline and every metric run offline with stable
results. The mock chat provider answers in one of three ways: echo the user
prompt back, fill a canned section template, or delegate to a caller-supplied
handler.
"""

from __future__ import annotations

import hashlib
import re
import threading
from typing import Callable

import numpy as np

from ..errors import ContentError
from .base import ChatRequest, ChatResponse, TransientProviderError

_HEADING_LINE = re.compile(r"^Heading path:\s*(.+)$", re.MULTILINE)
_ENTRY_LINE = re.compile(r"^(\d+)\. ", re.MULTILINE)


def hash_seed(model_tag: str, text: str) -> int:
    digest = hashlib.sha256(f"{model_tag}\x00{text}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


class MockEmbeddingProvider:
    """text -> sha256 seed -> pseudo-random unit vector."""

    def embed(self, texts: list[str], model_tag: str, dim: int) -> np.ndarray:
        out = np.empty((len(texts), dim), dtype=np.float64)
        for i, text in enumerate(texts):
            rng = np.random.default_rng(hash_seed(model_tag, text))
            out[i] = rng.standard_normal(dim)
        return out


class MockChatProvider:
    """Scriptable chat provider.

    modes:
      echo      response text is the user prompt
      template  canned section body citing each numbered reference entry
      handler   a callable (ChatRequest) -> str or ChatResponse

    fail_times makes the first N calls raise a transient error (retry tests);
    refuse makes every call raise a content refusal.
    """

    def __init__(
        self,
        mode: str = "template",
        handler: Callable[[ChatRequest], str | ChatResponse] | None = None,
        fail_times: int = 0,
        refuse: bool = False,
    ):
        self.mode = mode
        self.handler = handler
        self.fail_times = fail_times
        self.refuse = refuse
        self.calls: list[ChatRequest] = []
        self._lock = threading.Lock()
        self._in_flight = 0
        self.peak_in_flight = 0

    def complete(self, request: ChatRequest) -> ChatResponse:
        with self._lock:
            self.calls.append(request)
            self._in_flight += 1
            self.peak_in_flight = max(self.peak_in_flight, self._in_flight)
            if self.fail_times > 0:
                self.fail_times -= 1
                self._in_flight -= 1
                raise TransientProviderError("simulated transient provider failure")
        try:
            if self.refuse:
                raise ContentError("provider refused the request")
            if self.handler is not None:
                result = self.handler(request)
                if isinstance(result, ChatResponse):
                    return result
                return self._respond(request, result)
            if self.mode == "echo":
                return self._respond(request, request.user_prompt)
            return self._respond(request, self._template_text(request))
        finally:
            with self._lock:
                self._in_flight -= 1

    @staticmethod
    def _respond(request: ChatRequest, text: str) -> ChatResponse:
        return ChatResponse(
            text=text,
            prompt_tokens=len(request.user_prompt) // 4,
            completion_tokens=len(text) // 4,
        )

    @staticmethod
    def _template_text(request: ChatRequest) -> str:
        heading_match = _HEADING_LINE.search(request.user_prompt)
        entries = sorted({int(m.group(1)) for m in _ENTRY_LINE.finditer(request.user_prompt)})
        if heading_match is None:
            # compression-style call: emit a small fixed-form research report
            return (
                "This report condenses the supplied document into its core "
                "contributions. The study motivates the problem, describes the "
                "method, and reports the principal quantitative findings. Key "
                "formulas and tables are restated where they carry the argument. "
                "Limitations and the scope of validity close the summary."
            )
        heading = heading_match.group(1).strip()
        parts = [f"This section develops {heading} from the supplied materials."]
        for i in entries:
            parts.append(f"Reference material {i} contributes supporting evidence [{i}].")
        parts.append(f"Together these sources frame the discussion of {heading}.")
        return " ".join(parts)
