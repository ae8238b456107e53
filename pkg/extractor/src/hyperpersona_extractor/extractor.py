"""Layer-averaged unit embeddings from a pretrained bidirectional transformer.

Every unit (document text, sentence text, single word) is embedded in
isolation: the model runs in inference mode, the token hidden states of each
layer in the configured range are mean-pooled over the unit's non-special
tokens, and the pooled per-layer vectors are averaged.  Units longer than the
token budget are split into overlapping chunks (stride = half window) whose
vectors are averaged; this is logged, never silent.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
import torch

from .bundle_io import existing_entry_is_valid, write_bundle_files, write_directory_manifest
from .segments import SegmentedDocument

logger = logging.getLogger(__name__)


@dataclass
class EmbedConfig:
    model_id: str
    layer_lo: int = 9  # 1-based, inclusive; defaults cover the top 4 of 12 layers
    layer_hi: int = 12
    max_tokens: int = 512  # per forward pass, including special tokens
    pooling: str = "mean"

    def __post_init__(self):
        if self.layer_lo < 1 or self.layer_hi < self.layer_lo:
            raise ValueError(f"bad layer range {self.layer_lo}:{self.layer_hi}")
        if self.pooling != "mean":
            raise ValueError(f"only mean pooling is implemented, got {self.pooling!r}")
        if self.max_tokens < 8:
            raise ValueError("max_tokens too small to fit any unit")

    @classmethod
    def parse_layers(cls, spec: str) -> tuple[int, int]:
        lo, _, hi = spec.partition(":")
        return int(lo), int(hi)


class UnitEmbedder:
    """Loads the model once and embeds text units deterministically."""

    def __init__(self, config: EmbedConfig):
        from transformers import AutoModel, AutoTokenizer

        self.config = config
        self.tokenizer = AutoTokenizer.from_pretrained(config.model_id)
        self.model = AutoModel.from_pretrained(config.model_id)
        self.model.eval()
        layer_count = self.model.config.num_hidden_layers
        if config.layer_hi > layer_count:
            raise ValueError(
                f"layer range {config.layer_lo}:{config.layer_hi} exceeds the "
                f"model's {layer_count} layers"
            )
        self.dim = int(self.model.config.hidden_size)
        self._cache: dict[str, np.ndarray] = {}

    # -- internals -----------------------------------------------------------

    def _with_specials(self, token_ids: list[int]) -> tuple[list[int], np.ndarray]:
        """Single-sequence special-token wrap plus the resulting special mask."""
        ids = list(token_ids)
        mask = [False] * len(ids)
        if self.tokenizer.cls_token_id is not None:
            ids = [self.tokenizer.cls_token_id] + ids
            mask = [True] + mask
        if self.tokenizer.sep_token_id is not None:
            ids = ids + [self.tokenizer.sep_token_id]
            mask = mask + [True]
        return ids, np.asarray(mask, dtype=bool)

    def _pooled_layers(self, token_ids: list[int]) -> np.ndarray:
        """Per-layer mean over the unit's tokens: (L, dim) for one chunk."""
        ids, special = self._with_specials(token_ids)
        with torch.no_grad():
            outputs = self.model(
                input_ids=torch.tensor([ids]),
                attention_mask=torch.ones(1, len(ids), dtype=torch.long),
                output_hidden_states=True,
            )
        keep = ~special
        layers = []
        for layer in range(self.config.layer_lo, self.config.layer_hi + 1):
            states = outputs.hidden_states[layer][0].numpy()
            layers.append(states[keep].mean(axis=0))
        return np.stack(layers)

    def _chunks(self, token_ids: list[int]) -> list[list[int]]:
        budget = self.max_unit_tokens()
        if len(token_ids) <= budget:
            return [token_ids]
        stride = max(budget // 2, 1)
        chunks = []
        start = 0
        while start < len(token_ids):
            chunks.append(token_ids[start : start + budget])
            if start + budget >= len(token_ids):
                break
            start += stride
        return chunks

    def max_unit_tokens(self) -> int:
        specials = self.tokenizer.num_special_tokens_to_add()
        model_limit = getattr(self.model.config, "max_position_embeddings", self.config.max_tokens)
        return min(self.config.max_tokens, model_limit) - specials

    # -- public --------------------------------------------------------------

    def embed_unit(self, text: str) -> np.ndarray:
        """Layer-averaged vector of length dim; deterministic per (model, config)."""
        if not text or not text.strip():
            raise ValueError("cannot embed an empty unit")
        cached = self._cache.get(text)
        if cached is not None:
            return cached

        token_ids = self.tokenizer.encode(text, add_special_tokens=False)
        if not token_ids:
            raise ValueError(f"unit {text!r} produced no tokens")
        chunks = self._chunks(token_ids)
        if len(chunks) > 1:
            logger.info(
                "unit of %d tokens exceeds the %d-token budget; averaging %d chunks",
                len(token_ids), self.max_unit_tokens(), len(chunks),
            )
        pooled = np.stack([self._pooled_layers(chunk).mean(axis=0) for chunk in chunks])
        vector = pooled.mean(axis=0).astype(np.float32)
        if not np.all(np.isfinite(vector)):
            raise ValueError(f"unit {text!r} produced non-finite values")
        self._cache[text] = vector
        return vector


def extract_document(doc: SegmentedDocument, embedder: UnitEmbedder) -> dict:
    """Vectors for one document: the full text, each sentence, each word."""
    try:
        doc_vec = embedder.embed_unit(doc.text)
        sent_vecs = [embedder.embed_unit(s.text) for s in doc.sentences]
        word_vecs = [
            np.stack([embedder.embed_unit(w) for w in s.words]) for s in doc.sentences
        ]
    except ValueError as exc:
        raise ValueError(f"document {doc.doc_id}: {exc}") from exc
    return {
        "doc_id": doc.doc_id,
        "dim": embedder.dim,
        "doc_vec": doc_vec,
        "sent_vecs": sent_vecs,
        "word_vecs": word_vecs,
    }


def extract_corpus(
    documents: Sequence[SegmentedDocument],
    embedder: UnitEmbedder,
    out_dir: str | Path,
) -> Path:
    """One bundle per document plus the aggregate manifest; resumable."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    for doc in documents:
        existing = existing_entry_is_valid(out_dir, doc.doc_id, doc.word_counts())
        if existing is not None:
            logger.info("skipping %s: valid bundle already present", doc.doc_id)
            entries.append(existing)
            continue
        data = extract_document(doc, embedder)
        entries.append(
            write_bundle_files(
                out_dir, data["doc_id"], data["dim"],
                data["doc_vec"], data["sent_vecs"], data["word_vecs"],
            )
        )
    return write_directory_manifest(out_dir, embedder.dim, entries)
