"""Writer for the bundle payload format consumed by the primary package.

Layout (all little-endian): magic "HPEB", u32 version=1, u32 dim,
u32 sentence_count, u32 word count per sentence, then float32 vectors: the
document vector, sentence vectors in order, word vectors in sentence-major
order.  A JSON manifest with per-document counts and a sha256 checksum sits
beside each payload, plus one aggregate manifest.json per directory.

This is an independent implementation of the format; conformance against the
primary reader is covered by the test suite.
"""

from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path
from typing import Sequence

import numpy as np

MAGIC = b"HPEB"
FORMAT_VERSION = 1


def payload_bytes(
    dim: int,
    doc_vec: np.ndarray,
    sent_vecs: Sequence[np.ndarray],
    word_vecs: Sequence[np.ndarray],
) -> bytes:
    word_counts = [block.shape[0] for block in word_vecs]
    parts = [
        MAGIC,
        struct.pack("<III", FORMAT_VERSION, dim, len(sent_vecs)),
        struct.pack(f"<{len(sent_vecs)}I", *word_counts),
        np.ascontiguousarray(doc_vec, dtype="<f4").tobytes(),
    ]
    for vec in sent_vecs:
        parts.append(np.ascontiguousarray(vec, dtype="<f4").tobytes())
    for block in word_vecs:
        parts.append(np.ascontiguousarray(block, dtype="<f4").tobytes())
    return b"".join(parts)


def checksum(payload: bytes) -> str:
    return "sha256:" + hashlib.sha256(payload).hexdigest()


def manifest_entry(doc_id: str, word_counts: Sequence[int], payload: bytes) -> dict:
    return {
        "doc_id": doc_id,
        "sentence_count": len(word_counts),
        "word_counts": list(word_counts),
        "checksum": checksum(payload),
    }


def write_bundle_files(
    out_dir: str | Path,
    doc_id: str,
    dim: int,
    doc_vec: np.ndarray,
    sent_vecs: Sequence[np.ndarray],
    word_vecs: Sequence[np.ndarray],
) -> dict:
    """Write ``<doc_id>.hpeb`` plus its sidecar manifest; returns the entry."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    payload = payload_bytes(dim, doc_vec, sent_vecs, word_vecs)
    (out_dir / f"{doc_id}.hpeb").write_bytes(payload)
    entry = manifest_entry(doc_id, [b.shape[0] for b in word_vecs], payload)
    sidecar = {"version": FORMAT_VERSION, "dim": dim, "doc_count": 1, "documents": [entry]}
    (out_dir / f"{doc_id}.manifest.json").write_text(
        json.dumps(sidecar, indent=2), encoding="utf-8"
    )
    return entry


def write_directory_manifest(out_dir: str | Path, dim: int, entries: Sequence[dict]) -> Path:
    manifest = {
        "version": FORMAT_VERSION,
        "dim": dim,
        "doc_count": len(entries),
        "documents": list(entries),
    }
    path = Path(out_dir) / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2), encoding="utf-8")
    return path


def existing_entry_is_valid(out_dir: Path, doc_id: str, expected_counts: Sequence[int]) -> dict | None:
    """Return the sidecar entry when the on-disk payload checks out, else None."""
    payload_path = out_dir / f"{doc_id}.hpeb"
    sidecar_path = out_dir / f"{doc_id}.manifest.json"
    if not payload_path.exists() or not sidecar_path.exists():
        return None
    try:
        sidecar = json.loads(sidecar_path.read_text(encoding="utf-8"))
        entry = sidecar["documents"][0]
    except (json.JSONDecodeError, KeyError, IndexError):
        return None
    payload = payload_path.read_bytes()
    if checksum(payload) != entry.get("checksum"):
        return None
    if tuple(entry.get("word_counts", ())) != tuple(expected_counts):
        return None
    return entry
