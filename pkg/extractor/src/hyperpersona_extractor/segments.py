"""Reader for the segments JSONL wire format (one document per line)."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path


@dataclass(frozen=True)
class Sentence:
    index: int
    text: str
    words: tuple[str, ...]


@dataclass(frozen=True)
class SegmentedDocument:
    doc_id: str
    sentences: tuple[Sentence, ...]

    @property
    def text(self) -> str:
        return " ".join(s.text for s in self.sentences)

    def word_counts(self) -> tuple[int, ...]:
        return tuple(len(s.words) for s in self.sentences)


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
            if not sentences:
                raise ValueError(f"document {obj.get('doc_id')!r} has no sentences")
            documents.append(SegmentedDocument(doc_id=obj["doc_id"], sentences=sentences))
    return documents
