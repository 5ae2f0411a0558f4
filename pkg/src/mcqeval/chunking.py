"""Section-based markdown chunking with short-section merging.

Chunks partition the raw document text exactly: every chunk is a contiguous
slice of the source lines (heading included), so concatenating chunk texts in
order reproduces the document. A section shorter than the minimum token bound
is merged into its successor (keeps a definition with the example that
follows it); a section longer than the maximum is split at paragraph
boundaries. Token counts are whitespace-token approximations.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass

from .errors import ChunkingError
from .models import Chunk

_HEADING_RE = re.compile(r"^(#{1,6})\s+(.*?)\s*#*\s*$")
_FENCE_RE = re.compile(r"^(```|~~~)")
_MARKUP_CHARS = re.compile(r"[#*`~\-_=>|\[\]()!\s]+")


@dataclass(frozen=True)
class ChunkConfig:
    min_tokens: int = 120
    max_tokens: int = 900

    def validate(self) -> None:
        if self.min_tokens < 1:
            raise ChunkingError("min_tokens must be >= 1")
        if self.min_tokens >= self.max_tokens:
            raise ChunkingError("min_tokens must be < max_tokens")


def normalize_whitespace(text: str) -> str:
    return " ".join(text.split())


def token_count(text: str) -> int:
    return len(text.split())


def chunk_id_for(book_id: str, section_path: tuple[str, ...], text: str) -> str:
    """Deterministic content-addressed chunk identifier."""
    payload = "\x1f".join([book_id, "\x1e".join(section_path), normalize_whitespace(text)])
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


@dataclass
class _Section:
    path: tuple[str, ...]
    text: str  # raw slice of the document, heading line included

    @property
    def tokens(self) -> int:
        return token_count(self.text)


def _split_sections(doc: str) -> list[_Section]:
    """Cut the document at heading lines; fenced code blocks are opaque."""
    lines = doc.splitlines(keepends=True)
    sections: list[_Section] = []
    stack: list[tuple[int, str]] = []  # (level, heading text)
    current: list[str] = []
    current_path: tuple[str, ...] = ()
    in_fence = False

    def flush() -> None:
        nonlocal current
        if current:
            sections.append(_Section(path=current_path, text="".join(current)))
            current = []

    for line in lines:
        if _FENCE_RE.match(line):
            in_fence = not in_fence
            current.append(line)
            continue
        m = None if in_fence else _HEADING_RE.match(line)
        if m:
            flush()
            level = len(m.group(1))
            title = m.group(2)
            while stack and stack[-1][0] >= level:
                stack.pop()
            stack.append((level, title))
            current_path = tuple(t for _, t in stack)
            current.append(line)
        else:
            current.append(line)
    flush()
    return sections


def _split_long_section(section: _Section, max_tokens: int) -> list[_Section]:
    """Split at blank-line paragraph boundaries, greedily packing up to max.

    A single paragraph longer than the bound stays whole (there is no finer
    boundary to cut at).
    """
    lines = section.text.splitlines(keepends=True)
    paragraphs: list[str] = []
    buf: list[str] = []
    for line in lines:
        buf.append(line)
        if not line.strip():
            paragraphs.append("".join(buf))
            buf = []
    if buf:
        paragraphs.append("".join(buf))

    pieces: list[_Section] = []
    acc: list[str] = []
    acc_tokens = 0
    for para in paragraphs:
        p_tokens = token_count(para)
        if acc and acc_tokens + p_tokens > max_tokens:
            pieces.append(_Section(path=section.path, text="".join(acc)))
            acc, acc_tokens = [], 0
        acc.append(para)
        acc_tokens += p_tokens
    if acc:
        pieces.append(_Section(path=section.path, text="".join(acc)))
    return pieces


def chunk_markdown(doc: str, book_id: str, cfg: ChunkConfig) -> tuple[Chunk, ...]:
    """Chunk one markdown document into ordered provenance units."""
    cfg.validate()
    if not doc.strip():
        raise ChunkingError("empty document")
    if not _MARKUP_CHARS.sub("", doc):
        raise ChunkingError("document has no textual content after stripping markup")

    sections = _split_sections(doc)
    sections = [s for s in sections if s.text]

    # Merge pass: a short section is folded into its successor, cascading
    # until the window reaches the bound or runs out of successors.
    merged: list[_Section] = []
    i = 0
    while i < len(sections):
        sec = sections[i]
        path = sec.path
        text = sec.text
        while token_count(text) < cfg.min_tokens and i + 1 < len(sections):
            i += 1
            text += sections[i].text
        merged.append(_Section(path=path, text=text))
        i += 1

    # Split pass: long windows are cut at paragraph boundaries.
    final: list[_Section] = []
    for sec in merged:
        if sec.tokens > cfg.max_tokens:
            final.extend(_split_long_section(sec, cfg.max_tokens))
        else:
            final.append(sec)

    # Whitespace-only slices (e.g. blank lines before the first heading) are
    # glued onto a neighbor so the partition property still holds.
    cleaned: list[_Section] = []
    pending = ""
    for sec in final:
        if not normalize_whitespace(sec.text):
            if cleaned:
                cleaned[-1] = _Section(path=cleaned[-1].path, text=cleaned[-1].text + sec.text)
            else:
                pending += sec.text
            continue
        if pending:
            sec = _Section(path=sec.path, text=pending + sec.text)
            pending = ""
        cleaned.append(sec)
    if pending and cleaned:
        cleaned[-1] = _Section(path=cleaned[-1].path, text=cleaned[-1].text + pending)

    chunks = []
    for sec in cleaned:
        chunk = Chunk(
            chunk_id=chunk_id_for(book_id, sec.path, sec.text),
            book_id=book_id,
            section_path=sec.path,
            text=sec.text,
            approx_token_count=sec.tokens,
        )
        chunk.validate()
        chunks.append(chunk)
    if not chunks:
        raise ChunkingError("document has no textual content after stripping markup")
    return tuple(chunks)
