"""Text normalization and document -> sentence -> word decomposition."""

from __future__ import annotations

import json
import re
import string
import unicodedata
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .corpus import EssayRecord
from .errors import EmptyDocumentError

# Default abbreviation surface forms (without the trailing period) that do not
# end a sentence.  Configurable because any rule-based splitter is an
# approximation.
DEFAULT_ABBREVIATIONS = frozenset(
    {"mr", "mrs", "ms", "dr", "prof", "st", "jr", "sr", "vs", "e.g", "i.e", "cf"}
)

_WS_RUN = re.compile(r"\s+")
_BOUNDARY = re.compile(r"[.!?]+(?=\s)")
_STRIP_CHARS = string.punctuation + "“”‘’…‐‒–—―"


@dataclass(frozen=True)
class Sentence:
    index: int  # 1-based position
    text: str
    words: tuple[str, ...]


@dataclass(frozen=True)
class SegmentedDocument:
    doc_id: str
    sentences: tuple[Sentence, ...]

    def word_count(self) -> int:
        return sum(len(s.words) for s in self.sentences)


@dataclass(frozen=True)
class SegmenterConfig:
    abbreviations: frozenset[str] = DEFAULT_ABBREVIATIONS


@dataclass
class CorpusSegmentation:
    documents: list[SegmentedDocument] = field(default_factory=list)
    skipped: list[tuple[str, str]] = field(default_factory=list)  # (doc_id, reason)


def preprocess(text: str) -> str:
    """Lowercase, NFC-normalize and collapse whitespace runs; nothing else."""
    normalized = unicodedata.normalize("NFC", text).lower()
    return _WS_RUN.sub(" ", normalized).strip()


def _strip_token(token: str) -> str:
    return token.strip(_STRIP_CHARS)


def _is_abbreviation(text: str, punct_start: int, abbreviations: frozenset[str]) -> bool:
    # Token immediately preceding the punctuation run, e.g. "mr" in "mr. smith".
    start = text.rfind(" ", 0, punct_start) + 1
    token = text[start:punct_start].lstrip(_STRIP_CHARS)
    return token in abbreviations


def _split_sentences(text: str, config: SegmenterConfig) -> list[str]:
    pieces: list[str] = []
    start = 0
    for match in _BOUNDARY.finditer(text):
        if _is_abbreviation(text, match.start(), config.abbreviations):
            continue
        pieces.append(text[start : match.end()])
        start = match.end() + 1  # skip the single space after the run
    if start < len(text):
        pieces.append(text[start:])
    return pieces


def segment(doc_id: str, text: str, config: SegmenterConfig | None = None) -> SegmentedDocument:
    """Decompose one document into sentences and lowercase word tokens.

    Sentences split on terminal punctuation (., !, ?) followed by whitespace,
    skipping configured abbreviations; text without terminal punctuation is a
    single sentence.  Words come from whitespace splitting with leading and
    trailing punctuation stripped; empty sentences and words are dropped.
    """
    config = config or SegmenterConfig()
    normalized = preprocess(text)
    if not normalized:
        raise EmptyDocumentError(f"document {doc_id!r} is empty after normalization")

    sentences: list[Sentence] = []
    for piece in _split_sentences(normalized, config):
        piece = piece.strip()
        if not piece:
            continue
        words = tuple(w for w in (_strip_token(t) for t in piece.split(" ")) if w)
        if not words:
            continue
        sentences.append(Sentence(index=len(sentences) + 1, text=piece, words=words))

    if not sentences:
        raise EmptyDocumentError(f"document {doc_id!r} has no words after tokenization")
    return SegmentedDocument(doc_id=doc_id, sentences=tuple(sentences))


def segment_corpus(
    records: Iterable[EssayRecord], config: SegmenterConfig | None = None
) -> CorpusSegmentation:
    """Segment every record; failures are collected, not fatal."""
    result = CorpusSegmentation()
    for record in records:
        try:
            result.documents.append(segment(record.id, record.text, config))
        except EmptyDocumentError as exc:
            result.skipped.append((record.id, str(exc)))
    return result


def write_segments(documents: Sequence[SegmentedDocument], path: str | Path) -> None:
    """One JSON object per document with nested sentence/word arrays."""
    with open(path, "w", encoding="utf-8") as fh:
        for doc in documents:
            obj = {
                "doc_id": doc.doc_id,
                "sentences": [
                    {"index": s.index, "text": s.text, "words": list(s.words)}
                    for s in doc.sentences
                ],
            }
            fh.write(json.dumps(obj, ensure_ascii=False) + "\n")


def read_segments(path: str | Path) -> list[SegmentedDocument]:
    documents = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            obj = json.loads(line)
            sentences = tuple(
                Sentence(index=s["index"], text=s["text"], words=tuple(s["words"]))
                for s in obj["sentences"]
            )
            documents.append(SegmentedDocument(doc_id=obj["doc_id"], sentences=sentences))
    return documents
