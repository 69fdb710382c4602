"""Prompt rendering for chat-translation SFT data and few-shot inference.

Two line-oriented layouts over bilingual chat turns:

* streaming: the history lines carry source, machine translation and the
  human reference of each previous turn, then an instruction line, then
  the current turn truncated right after the final ``Natural {lang}: ``
  label so the reference is the completion.
* context-aware: a symmetric window of neighbouring turns with their
  machine translations (no references), the instruction line, and a query
  line asking directly for the natural translation.

All renders are byte-deterministic; every colon is followed by exactly
one space (the layouts are normalized to that rule).  Each format has a
parser that recovers the fields exactly as long as segments do not embed
the label strings themselves.
"""

from __future__ import annotations

import json
import random
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .errors import DataError

SPEAKERS = ("customer", "agent")

INSTRUCTION_TEMPLATE = (
    "Translate the following sentence into {tgt_lang} with a style bias towards Natural:"
)


@dataclass(frozen=True)
class ChatTurn:
    speaker: str
    src_lang: str
    tgt_lang: str
    source: str
    mt: str
    reference: str | None = None

    def __post_init__(self) -> None:
        if self.speaker not in SPEAKERS:
            raise DataError(f"unknown speaker: {self.speaker!r}")
        if self.src_lang == self.tgt_lang:
            raise DataError(f"src_lang and tgt_lang are both {self.src_lang!r}")
        if self.source == "":
            raise DataError("turn source must not be empty")


@dataclass(frozen=True)
class ChatDocument:
    doc_id: str
    turns: tuple[ChatTurn, ...]

    def __post_init__(self) -> None:
        if not self.turns:
            raise DataError(f"document {self.doc_id!r} has no turns")


@dataclass(frozen=True)
class RenderedPrompt:
    text: str
    completion: str


def _history_line(turn: ChatTurn) -> str:
    return (
        f"Natural {turn.src_lang}: {turn.source}, "
        f"Translated {turn.tgt_lang}: {turn.mt}, "
        f"Natural {turn.tgt_lang}: {turn.reference}"
    )


def _context_line(turn: ChatTurn) -> str:
    return f"Natural {turn.src_lang}: {turn.source}, Translated {turn.tgt_lang}: {turn.mt}"


def _check_index(doc: ChatDocument, index: int) -> ChatTurn:
    if not 0 <= index < len(doc.turns):
        raise DataError(
            f"turn index {index} out of range 0..{len(doc.turns) - 1} "
            f"in document {doc.doc_id!r}"
        )
    return doc.turns[index]


def render_stream(doc: ChatDocument, index: int, k_history: int) -> RenderedPrompt:
    """History-only layout; previous turns must carry references."""
    query = _check_index(doc, index)
    if k_history < 0:
        raise DataError(f"k_history must be >= 0, got {k_history}")
    history = doc.turns[max(0, index - k_history) : index]
    lines = []
    for offset, turn in enumerate(history):
        if turn.reference is None:
            raise DataError(
                f"stream render needs a reference on every history turn; "
                f"turn {index - len(history) + offset} of {doc.doc_id!r} has none"
            )
        lines.append(_history_line(turn))
    lines.append(INSTRUCTION_TEMPLATE.format(tgt_lang=query.tgt_lang))
    lines.append(
        f"Natural {query.src_lang}: {query.source}, "
        f"Translated {query.tgt_lang}: {query.mt}, "
        f"Natural {query.tgt_lang}: "
    )
    return RenderedPrompt("\n".join(lines), query.reference or "")


def render_context(
    doc: ChatDocument,
    index: int,
    before: int,
    after: int,
    include_query_context: bool = True,
) -> RenderedPrompt:
    """Window layout: neighbours with machine translations, then the query.

    The window is clipped at the document edges.  By default the query
    turn's own machine-translation line appears inside the window;
    ``include_query_context=False`` drops it.
    """
    query = _check_index(doc, index)
    if before < 0 or after < 0:
        raise DataError(f"window bounds must be >= 0, got before={before} after={after}")
    lo = max(0, index - before)
    hi = min(len(doc.turns), index + after + 1)
    lines = []
    for pos in range(lo, hi):
        if pos == index and not include_query_context:
            continue
        lines.append(_context_line(doc.turns[pos]))
    lines.append(INSTRUCTION_TEMPLATE.format(tgt_lang=query.tgt_lang))
    lines.append(f"Natural {query.src_lang}: {query.source}, Natural {query.tgt_lang}: ")
    return RenderedPrompt("\n".join(lines), query.reference or "")


def render_fewshot(
    demos: Sequence[tuple[str, str]],
    query_source: str,
    langs: tuple[str, str],
    k: int = 5,
    rng_seed: int | None = None,
) -> RenderedPrompt:
    """k worked (source, reference) demonstrations, then the query block.

    Demos are taken first-k in list order; permuting the input permutes
    the blocks identically.  With ``rng_seed`` set, k demos are drawn by a
    seeded sample instead (still deterministic for a given seed).
    """
    if k < 0:
        raise DataError(f"k must be >= 0, got {k}")
    if len(demos) < k:
        raise DataError(f"need at least k={k} demonstrations, got {len(demos)}")
    if rng_seed is None:
        picked = list(demos[:k])
    else:
        picked = random.Random(rng_seed).sample(list(demos), k)
    src_lang, tgt_lang = langs
    blocks = [f"{src_lang}: {src}\n{tgt_lang}: {ref}\n\n" for src, ref in picked]
    blocks.append(f"{src_lang}: {query_source}\n{tgt_lang}: ")
    return RenderedPrompt("".join(blocks), "")


_INSTRUCTION_RE = re.compile(
    r"^Translate the following sentence into (?P<tgt>.+) with a style bias towards Natural:$"
)
_HISTORY_RE = re.compile(
    r"^Natural (?P<sl>[^:]+): (?P<src>.*), Translated (?P<tl>[^:]+): (?P<mt>.*), "
    r"Natural (?P=tl): (?P<ref>.*)$"
)
_CONTEXT_RE = re.compile(
    r"^Natural (?P<sl>[^:]+): (?P<src>.*), Translated (?P<tl>[^:]+): (?P<mt>.*)$"
)
_STREAM_QUERY_RE = re.compile(
    r"^Natural (?P<sl>[^:]+): (?P<src>.*), Translated (?P<tl>[^:]+): (?P<mt>.*), "
    r"Natural (?P=tl): $"
)
_CONTEXT_QUERY_RE = re.compile(
    r"^Natural (?P<sl>[^:]+): (?P<src>.*), Natural (?P<tl>[^:]+): $"
)


@dataclass(frozen=True)
class ParsedPrompt:
    """Fields recovered from a rendered prompt."""

    history: tuple[tuple[str, str, str, str | None], ...]  # (src_lang, source, mt, ref)
    instruction_lang: str
    query_src_lang: str
    query_tgt_lang: str
    query_source: str
    query_mt: str | None


def _split_on_instruction(text: str) -> tuple[list[str], str, str]:
    lines = text.split("\n")
    for pos, line in enumerate(lines):
        match = _INSTRUCTION_RE.match(line)
        if match:
            if pos != len(lines) - 2:
                raise DataError("instruction line is not followed by exactly the query line")
            return lines[:pos], match.group("tgt"), lines[-1]
    raise DataError("no instruction line found in rendered prompt")


def parse_stream(text: str) -> ParsedPrompt:
    """Recover the fields of a streaming render."""
    head, instruction_lang, query_line = _split_on_instruction(text)
    history = []
    for line in head:
        match = _HISTORY_RE.match(line)
        if not match:
            raise DataError(f"unparsable stream history line: {line!r}")
        history.append(
            (match.group("sl"), match.group("src"), match.group("mt"), match.group("ref"))
        )
    match = _STREAM_QUERY_RE.match(query_line)
    if not match:
        raise DataError(f"unparsable stream query line: {query_line!r}")
    return ParsedPrompt(
        history=tuple(history),
        instruction_lang=instruction_lang,
        query_src_lang=match.group("sl"),
        query_tgt_lang=match.group("tl"),
        query_source=match.group("src"),
        query_mt=match.group("mt"),
    )


def parse_context(text: str) -> ParsedPrompt:
    """Recover the fields of a context-aware render."""
    head, instruction_lang, query_line = _split_on_instruction(text)
    window = []
    for line in head:
        match = _CONTEXT_RE.match(line)
        if not match:
            raise DataError(f"unparsable context line: {line!r}")
        window.append((match.group("sl"), match.group("src"), match.group("mt"), None))
    match = _CONTEXT_QUERY_RE.match(query_line)
    if not match:
        raise DataError(f"unparsable context query line: {query_line!r}")
    return ParsedPrompt(
        history=tuple(window),
        instruction_lang=instruction_lang,
        query_src_lang=match.group("sl"),
        query_tgt_lang=match.group("tl"),
        query_source=match.group("src"),
        query_mt=None,
    )


def read_chat_documents(path: str | Path) -> list[ChatDocument]:
    """Read JSONL turn records grouped into documents.

    One turn per line with fields doc_id, turn_index, speaker, src_lang,
    tgt_lang, source, mt and optional reference.  Turns are ordered by
    turn_index within a document; documents keep first-appearance order.
    """
    grouped: dict[str, dict[int, ChatTurn]] = {}
    raw = Path(path).read_text(encoding="utf-8")
    for lineno, line in enumerate(raw.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
        try:
            doc_id = str(record["doc_id"])
            turn_index = int(record["turn_index"])
            turn = ChatTurn(
                speaker=record["speaker"],
                src_lang=record["src_lang"],
                tgt_lang=record["tgt_lang"],
                source=record["source"],
                mt=record["mt"],
                reference=record.get("reference"),
            )
        except KeyError as exc:
            raise DataError(f"{path}:{lineno}: missing field {exc}") from exc
        except DataError as exc:
            raise DataError(f"{path}:{lineno}: {exc}") from exc
        turns = grouped.setdefault(doc_id, {})
        if turn_index in turns:
            raise DataError(f"{path}:{lineno}: duplicate turn {turn_index} in {doc_id!r}")
        turns[turn_index] = turn
    documents = []
    for doc_id, turns in grouped.items():
        ordered = tuple(turns[i] for i in sorted(turns))
        documents.append(ChatDocument(doc_id=doc_id, turns=ordered))
    return documents
