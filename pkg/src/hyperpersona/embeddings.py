"""Embedding bundles: binary storage format, validation, hash-embedder double.

A bundle carries one float vector per document, per sentence and per word of a
segmented document.  On disk the payload is little-endian and 32-bit:

    magic "HPEB" | u32 version=1 | u32 dim | u32 sentence_count
    | u32 word_count per sentence | doc vector | sentence vectors in order
    | word vectors in sentence-major order          (all float32)

A JSON manifest sits beside the payload (``x.hpeb`` -> ``x.manifest.json``)
with per-document counts and a sha256 checksum.  Vectors stay float32 in
memory so a write/read round trip is bit-exact; consumers widen as needed.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigurationError, CorruptionError, FormatError
from .rng import token_stream
from .segmenter import SegmentedDocument

MAGIC = b"HPEB"
FORMAT_VERSION = 1


@dataclass
class EmbeddingBundle:
    doc_id: str
    dim: int
    doc_vec: np.ndarray  # (dim,) float32
    sent_vecs: np.ndarray  # (sentence_count, dim) float32
    word_vecs: tuple[np.ndarray, ...]  # per sentence: (word_count, dim) float32

    @property
    def sentence_count(self) -> int:
        return int(self.sent_vecs.shape[0])

    @property
    def word_counts(self) -> tuple[int, ...]:
        return tuple(int(w.shape[0]) for w in self.word_vecs)


@dataclass
class Violation:
    kind: str  # "id" | "count" | "dimension" | "finiteness"
    location: str
    message: str

    def __str__(self) -> str:
        return f"[{self.kind}] {self.location}: {self.message}"


def hash_embed(segdoc: SegmentedDocument, dim: int, seed: int) -> EmbeddingBundle:
    """Deterministic stand-in embedder keyed on (seed, token string).

    Word vectors are uniform in (-1, 1) from a counter-based stream, so equal
    tokens get equal vectors on every platform.  Sentence vectors are the
    arithmetic mean of their word vectors; the document vector is the mean of
    the sentence vectors.
    """
    if dim < 2:
        raise ConfigurationError(f"embedding dim must be >= 2, got {dim}")
    sent_rows = []
    word_blocks = []
    for sentence in segdoc.sentences:
        rows = np.stack(
            [token_stream(seed, word).uniform_signed(dim) for word in sentence.words]
        ).astype(np.float32)
        word_blocks.append(rows)
        sent_rows.append(rows.astype(np.float64).mean(axis=0).astype(np.float32))
    sent_vecs = np.stack(sent_rows)
    doc_vec = sent_vecs.astype(np.float64).mean(axis=0).astype(np.float32)
    return EmbeddingBundle(
        doc_id=segdoc.doc_id,
        dim=dim,
        doc_vec=doc_vec,
        sent_vecs=sent_vecs,
        word_vecs=tuple(word_blocks),
    )


def validate_bundle(bundle: EmbeddingBundle, segdoc: SegmentedDocument) -> list[Violation]:
    """Every count/dimension/finiteness violation; empty iff the pair is clean."""
    violations: list[Violation] = []
    if bundle.doc_id != segdoc.doc_id:
        violations.append(
            Violation("id", "doc", f"bundle {bundle.doc_id!r} != segmentation {segdoc.doc_id!r}")
        )

    def check_vec(vec: np.ndarray, location: str):
        if vec.ndim != 1 or vec.shape[0] != bundle.dim:
            violations.append(
                Violation("dimension", location, f"length {vec.shape} != dim {bundle.dim}")
            )
            return
        bad = np.flatnonzero(~np.isfinite(vec))
        for i in bad:
            violations.append(Violation("finiteness", f"{location}[{int(i)}]", "non-finite value"))

    check_vec(np.asarray(bundle.doc_vec), "doc_vec")
    n_sent = len(segdoc.sentences)
    if bundle.sentence_count != n_sent:
        violations.append(
            Violation(
                "count", "sent_vecs", f"{bundle.sentence_count} sentences != {n_sent} in segmentation"
            )
        )
    for j in range(min(bundle.sentence_count, n_sent)):
        check_vec(np.asarray(bundle.sent_vecs[j]), f"sent_vecs[{j}]")
    if len(bundle.word_vecs) != n_sent:
        violations.append(
            Violation(
                "count", "word_vecs", f"{len(bundle.word_vecs)} word blocks != {n_sent} sentences"
            )
        )
    for j in range(min(len(bundle.word_vecs), n_sent)):
        block = np.asarray(bundle.word_vecs[j])
        expected = len(segdoc.sentences[j].words)
        if block.shape[0] != expected:
            violations.append(
                Violation(
                    "count",
                    f"word_vecs[{j}]",
                    f"{block.shape[0]} word vectors != {expected} words",
                )
            )
        for k in range(block.shape[0]):
            check_vec(block[k], f"word_vecs[{j}][{k}]")
    return violations


def _manifest_path(payload_path: Path) -> Path:
    stem = payload_path.name
    if stem.endswith(".hpeb"):
        stem = stem[: -len(".hpeb")]
    return payload_path.with_name(stem + ".manifest.json")


def _payload_bytes(bundle: EmbeddingBundle) -> bytes:
    parts = [MAGIC, struct.pack("<III", FORMAT_VERSION, bundle.dim, bundle.sentence_count)]
    parts.append(struct.pack(f"<{bundle.sentence_count}I", *bundle.word_counts))
    parts.append(np.asarray(bundle.doc_vec, dtype="<f4").tobytes())
    parts.append(np.ascontiguousarray(bundle.sent_vecs, dtype="<f4").tobytes())
    for block in bundle.word_vecs:
        parts.append(np.ascontiguousarray(block, dtype="<f4").tobytes())
    return b"".join(parts)


def _checksum(payload: bytes) -> str:
    return "sha256:" + hashlib.sha256(payload).hexdigest()


def manifest_entry(bundle: EmbeddingBundle, payload: bytes) -> dict:
    return {
        "doc_id": bundle.doc_id,
        "sentence_count": bundle.sentence_count,
        "word_counts": list(bundle.word_counts),
        "checksum": _checksum(payload),
    }


def write_bundle(bundle: EmbeddingBundle, path: str | Path) -> None:
    """Write payload plus its sidecar manifest."""
    path = Path(path)
    payload = _payload_bytes(bundle)
    path.write_bytes(payload)
    manifest = {
        "version": FORMAT_VERSION,
        "dim": bundle.dim,
        "doc_count": 1,
        "documents": [manifest_entry(bundle, payload)],
    }
    _manifest_path(path).write_text(json.dumps(manifest, indent=2), encoding="utf-8")


def read_bundle(path: str | Path) -> EmbeddingBundle:
    """Parse a payload, verifying the sidecar manifest when present."""
    path = Path(path)
    data = path.read_bytes()
    if len(data) < 16 or data[:4] != MAGIC:
        raise FormatError(f"{path}: bad magic")
    version, dim, sentence_count = struct.unpack_from("<III", data, 4)
    if version != FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    offset = 16
    try:
        word_counts = struct.unpack_from(f"<{sentence_count}I", data, offset)
    except struct.error as exc:
        raise CorruptionError(f"{path}: truncated header: {exc}") from None
    offset += 4 * sentence_count

    total_vecs = 1 + sentence_count + sum(word_counts)
    expected = offset + 4 * dim * total_vecs
    if len(data) != expected:
        raise CorruptionError(f"{path}: payload is {len(data)} bytes, expected {expected}")

    flat = np.frombuffer(data, dtype="<f4", offset=offset).reshape(total_vecs, dim).copy()
    doc_vec = flat[0]
    sent_vecs = flat[1 : 1 + sentence_count]
    word_vecs = []
    pos = 1 + sentence_count
    for count in word_counts:
        word_vecs.append(flat[pos : pos + count])
        pos += count

    doc_id = path.name[: -len(".hpeb")] if path.name.endswith(".hpeb") else path.stem
    manifest_path = _manifest_path(path)
    if manifest_path.exists():
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
        entry = next(
            (d for d in manifest.get("documents", []) if _checksum(data) == d.get("checksum")),
            None,
        )
        docs = manifest.get("documents", [])
        target = entry or (docs[0] if len(docs) == 1 else None)
        if target is None:
            raise CorruptionError(f"{path}: checksum not found in manifest")
        if target.get("checksum") != _checksum(data):
            raise CorruptionError(f"{path}: checksum mismatch against manifest")
        if (
            target.get("sentence_count") != sentence_count
            or tuple(target.get("word_counts", ())) != tuple(word_counts)
            or manifest.get("dim") != dim
        ):
            raise CorruptionError(f"{path}: counts disagree with manifest")
        doc_id = target.get("doc_id", doc_id)

    return EmbeddingBundle(
        doc_id=doc_id,
        dim=dim,
        doc_vec=doc_vec,
        sent_vecs=sent_vecs,
        word_vecs=tuple(word_vecs),
    )


def write_bundle_dir(bundles: Iterable[EmbeddingBundle], out_dir: str | Path) -> Path:
    """Write one payload per document plus an aggregate manifest.json."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    dim = None
    for bundle in bundles:
        if dim is None:
            dim = bundle.dim
        elif bundle.dim != dim:
            raise ConfigurationError("all bundles in a directory must share one dim")
        payload = _payload_bytes(bundle)
        (out_dir / f"{bundle.doc_id}.hpeb").write_bytes(payload)
        entries.append(manifest_entry(bundle, payload))
    manifest = {
        "version": FORMAT_VERSION,
        "dim": dim,
        "doc_count": len(entries),
        "documents": entries,
    }
    manifest_file = out_dir / "manifest.json"
    manifest_file.write_text(json.dumps(manifest, indent=2), encoding="utf-8")
    return manifest_file


def read_bundle_dir(bundle_dir: str | Path) -> list[EmbeddingBundle]:
    """Read every payload listed by the directory manifest, verifying checksums."""
    bundle_dir = Path(bundle_dir)
    manifest_file = bundle_dir / "manifest.json"
    if not manifest_file.exists():
        raise FormatError(f"{bundle_dir}: missing manifest.json")
    manifest = json.loads(manifest_file.read_text(encoding="utf-8"))
    if manifest.get("version") != FORMAT_VERSION:
        raise FormatError(f"{bundle_dir}: unsupported manifest version")
    bundles = []
    for entry in manifest["documents"]:
        path = bundle_dir / f"{entry['doc_id']}.hpeb"
        data = path.read_bytes()
        if _checksum(data) != entry["checksum"]:
            raise CorruptionError(f"{path}: checksum mismatch against directory manifest")
        bundle = read_bundle(path)
        bundle.doc_id = entry["doc_id"]
        bundles.append(bundle)
    return bundles
