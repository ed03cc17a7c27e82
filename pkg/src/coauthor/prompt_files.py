"""Prompt templates, kept in editable text files rather than code.

The author team tunes prompts iteratively, so prompts are data: plain UTF-8
files with verbatim-substituted placeholders ({document} for compression;
{book_title}, {outline}, {heading_path}, {references} for generation).
Substitution is literal string replacement, never str.format, so braces an
editor adds to the prose cannot break rendering.
"""

from __future__ import annotations

from importlib import resources
from pathlib import Path

from .errors import NotFoundError, ValidationError

COMPRESSION = "compression"
GENERATION = "generation"

_REQUIRED_PLACEHOLDERS = {
    COMPRESSION: ("{document}",),
    GENERATION: ("{book_title}", "{outline}", "{heading_path}", "{references}"),
}


class PromptLibrary:
    """Loads prompt files from a directory, falling back to the packaged copies."""

    def __init__(self, directory: str | Path | None = None):
        self.directory = Path(directory) if directory else None
        self._cache: dict[str, str] = {}

    def text(self, name: str) -> str:
        if name not in self._cache:
            self._cache[name] = self._load(name)
        return self._cache[name]

    def _load(self, name: str) -> str:
        filename = f"{name}.txt"
        if self.directory is not None:
            path = self.directory / filename
            if not path.is_file():
                raise NotFoundError(f"prompt file not found: {path}")
            content = path.read_text(encoding="utf-8")
        else:
            ref = resources.files("coauthor").joinpath("prompts", filename)
            if not ref.is_file():
                raise NotFoundError(f"packaged prompt missing: {filename}")
            content = ref.read_text(encoding="utf-8")
        for placeholder in _REQUIRED_PLACEHOLDERS.get(name, ()):
            if placeholder not in content:
                raise ValidationError(
                    f"prompt '{name}' is missing the {placeholder} placeholder"
                )
        return content

    def render(self, name: str, **values: str) -> str:
        rendered = self.text(name)
        for key, value in values.items():
            rendered = rendered.replace("{" + key + "}", value)
        return rendered
