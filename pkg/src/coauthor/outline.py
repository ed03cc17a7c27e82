"""Hierarchical outlines and the two text import formats.

An outline is the expert-authored skeleton of a chapter or book: a tree of
headings whose leaves are the generation targets. Two upload formats are
supported, indented plain text (two spaces per level) and markdown-style
heading lines.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .errors import ValidationError

_MD_HEADING = re.compile(r"^(#{1,6})\s+(.+?)\s*#*\s*$")


@dataclass
class OutlineNode:
    heading: str
    level: int
    children: list["OutlineNode"] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "heading": self.heading,
            "level": self.level,
            "children": [c.to_dict() for c in self.children],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "OutlineNode":
        return cls(
            heading=data["heading"],
            level=int(data["level"]),
            children=[cls.from_dict(c) for c in data.get("children", [])],
        )


@dataclass
class Outline:
    roots: list[OutlineNode] = field(default_factory=list)

    def validate(self) -> None:
        """Check levels are contiguous: roots at 1, children at parent + 1."""
        if not self.roots:
            raise ValidationError("outline is empty")

        def check(node: OutlineNode, expected: int) -> None:
            if not node.heading.strip():
                raise ValidationError("outline heading is empty")
            if node.level != expected:
                raise ValidationError(
                    f"outline level {node.level} for '{node.heading}', expected {expected}"
                )
            for child in node.children:
                check(child, expected + 1)

        for root in self.roots:
            check(root, 1)

    def leaf_paths(self) -> list[list[str]]:
        """Heading paths from root to each leaf, in document order."""
        paths: list[list[str]] = []

        def walk(node: OutlineNode, prefix: list[str]) -> None:
            path = prefix + [node.heading]
            if not node.children:
                paths.append(path)
            else:
                for child in node.children:
                    walk(child, path)

        for root in self.roots:
            walk(root, [])
        return paths

    def headings(self) -> list[str]:
        """All headings in document (depth-first) order."""
        out: list[str] = []

        def walk(node: OutlineNode) -> None:
            out.append(node.heading)
            for child in node.children:
                walk(child)

        for root in self.roots:
            walk(root)
        return out

    def render_indented(self) -> str:
        """Render back to the indented text format (two spaces per level)."""
        lines: list[str] = []

        def walk(node: OutlineNode) -> None:
            lines.append("  " * (node.level - 1) + node.heading)
            for child in node.children:
                walk(child)

        for root in self.roots:
            walk(root)
        return "\n".join(lines)

    def to_dict(self) -> dict:
        return {"roots": [r.to_dict() for r in self.roots]}

    @classmethod
    def from_dict(cls, data: dict) -> "Outline":
        return cls(roots=[OutlineNode.from_dict(r) for r in data.get("roots", [])])


def _build_tree(items: list[tuple[int, str]]) -> Outline:
    roots: list[OutlineNode] = []
    stack: list[OutlineNode] = []
    for lineno, (level, heading) in enumerate(items, start=1):
        node = OutlineNode(heading=heading, level=level)
        if level == 1:
            roots.append(node)
            stack = [node]
            continue
        if not stack:
            raise ValidationError(f"outline line {lineno}: level {level} before any root")
        while stack and stack[-1].level >= level:
            stack.pop()
        if not stack or stack[-1].level != level - 1:
            raise ValidationError(
                f"outline line {lineno}: level {level} does not follow level {level - 1}"
            )
        stack[-1].children.append(node)
        stack.append(node)
    outline = Outline(roots=roots)
    outline.validate()
    return outline


def parse_indented(text: str) -> Outline:
    """Parse one heading per line, level = leading indentation count / 2 + 1."""
    items: list[tuple[int, str]] = []
    for raw in text.splitlines():
        if not raw.strip():
            continue
        stripped = raw.lstrip(" ")
        indent = len(raw) - len(stripped)
        if indent % 2 != 0:
            raise ValidationError(f"odd indentation ({indent} spaces) in outline line: {raw!r}")
        items.append((indent // 2 + 1, stripped.rstrip()))
    return _build_tree(items)


def parse_markdown(text: str) -> Outline:
    """Parse markdown heading lines, level = number of leading '#'."""
    items: list[tuple[int, str]] = []
    for raw in text.splitlines():
        m = _MD_HEADING.match(raw.strip())
        if m:
            items.append((len(m.group(1)), m.group(2)))
    return _build_tree(items)


def parse_outline(text: str, fmt: str) -> Outline:
    if fmt == "indented":
        return parse_indented(text)
    if fmt == "markdown":
        return parse_markdown(text)
    raise ValidationError(f"unknown outline format '{fmt}' (use 'indented' or 'markdown')")
