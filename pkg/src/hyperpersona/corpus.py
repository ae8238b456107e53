"""Essays corpus loading, train/test splitting and label statistics."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .errors import ConfigurationError, EmptyCorpusError, RowError, SchemaError
from .rng import RngStream

TRAITS = (
    "openness",
    "conscientiousness",
    "extraversion",
    "agreeableness",
    "neuroticism",
)

TRAIT_SHORT = {
    "openness": "O",
    "conscientiousness": "C",
    "extraversion": "E",
    "agreeableness": "A",
    "neuroticism": "N",
}

# Column names of the conventional Essays CSV release; fully overridable.
DEFAULT_COLUMN_MAP = {
    "id": "#AUTHID",
    "text": "TEXT",
    "openness": "cOPN",
    "conscientiousness": "cCON",
    "extraversion": "cEXT",
    "agreeableness": "cAGR",
    "neuroticism": "cNEU",
}

# Parse table for label cells, matched case-insensitively.  true = trait present.
TRUE_TOKENS = frozenset({"y", "1", "true"})
FALSE_TOKENS = frozenset({"n", "0", "false"})


@dataclass(frozen=True)
class TraitLabels:
    openness: bool
    conscientiousness: bool
    extraversion: bool
    agreeableness: bool
    neuroticism: bool

    def get(self, trait: str) -> bool:
        if trait not in TRAITS:
            raise KeyError(f"unknown trait {trait!r}")
        return getattr(self, trait)


@dataclass(frozen=True)
class EssayRecord:
    id: str
    text: str
    labels: TraitLabels


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float
    seed: int
    stratify_by: str | None = None  # optional per-trait stratified mode


def _parse_label(cell: str, row_index: int, column: str) -> bool:
    token = cell.strip().lower()
    if token in TRUE_TOKENS:
        return True
    if token in FALSE_TOKENS:
        return False
    raise RowError(f"unparseable label {cell!r} in column {column!r}", row_index)


def load_corpus(
    path: str | Path,
    column_map: Mapping[str, str] | None = None,
) -> list[EssayRecord]:
    """Load a UTF-8 CSV corpus with a header row into EssayRecords.

    `column_map` maps the logical fields ("id", "text", and the five trait
    names) to header names; defaults follow the conventional Essays release.
    """
    cmap = dict(DEFAULT_COLUMN_MAP)
    if column_map:
        cmap.update(column_map)
    for key in ("id", "text", *TRAITS):
        if key not in cmap:
            raise SchemaError(f"column map lacks an entry for {key!r}")

    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise EmptyCorpusError(f"{path}: no header row")
        header = set(reader.fieldnames)
        for key in ("id", "text", *TRAITS):
            if cmap[key] not in header:
                raise SchemaError(f"missing column {cmap[key]!r} (mapped from {key!r})")

        records: list[EssayRecord] = []
        seen_ids: set[str] = set()
        for row_index, row in enumerate(reader):
            text = (row[cmap["text"]] or "").strip()
            if not text:
                raise RowError("empty text", row_index)
            doc_id = (row[cmap["id"]] or "").strip()
            if not doc_id:
                raise RowError("empty id", row_index)
            if doc_id in seen_ids:
                raise RowError(f"duplicate id {doc_id!r}", row_index)
            seen_ids.add(doc_id)
            labels = TraitLabels(
                **{t: _parse_label(row[cmap[t]], row_index, cmap[t]) for t in TRAITS}
            )
            records.append(EssayRecord(id=doc_id, text=text, labels=labels))

    if not records:
        raise EmptyCorpusError(f"{path}: no data rows")
    return records


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def _split_indices(n: int, n_train: int, stream: RngStream) -> tuple[list[int], list[int]]:
    perm = stream.permutation(n)
    train = sorted(int(i) for i in perm[:n_train])
    test = sorted(int(i) for i in perm[n_train:])
    return train, test


def split_train_test(
    records: Sequence[EssayRecord], spec: SplitSpec
) -> tuple[list[EssayRecord], list[EssayRecord]]:
    """Deterministic train/test partition: |train| = round(fraction * N)."""
    if not records:
        raise EmptyCorpusError("cannot split an empty corpus")
    if not (0.0 < spec.train_fraction < 1.0):
        raise ConfigurationError(
            f"train_fraction must lie in (0,1), got {spec.train_fraction}"
        )
    n = len(records)
    n_train = _round_half_up(spec.train_fraction * n)
    if n_train <= 0 or n_train >= n:
        raise ConfigurationError(
            f"split of {n} records at fraction {spec.train_fraction} leaves one side empty"
        )

    stream = RngStream(spec.seed).split(0x5B17)
    if spec.stratify_by is None:
        train_idx, test_idx = _split_indices(n, n_train, stream)
    else:
        trait = spec.stratify_by
        if trait not in TRAITS:
            raise ConfigurationError(f"cannot stratify by unknown trait {trait!r}")
        pos = [i for i, r in enumerate(records) if r.labels.get(trait)]
        neg = [i for i, r in enumerate(records) if not r.labels.get(trait)]
        n_pos_train = min(_round_half_up(spec.train_fraction * len(pos)), len(pos))
        n_neg_train = n_train - n_pos_train
        if not (0 <= n_neg_train <= len(neg)):
            raise ConfigurationError(
                f"stratified split by {trait!r} cannot reach {n_train} training rows"
            )
        pos_train, pos_test = _split_indices(len(pos), n_pos_train, stream.split(1))
        neg_train, neg_test = _split_indices(len(neg), n_neg_train, stream.split(2))
        train_idx = sorted([pos[i] for i in pos_train] + [neg[i] for i in neg_train])
        test_idx = sorted([pos[i] for i in pos_test] + [neg[i] for i in neg_test])

    train = [records[i] for i in train_idx]
    test = [records[i] for i in test_idx]
    if not train or not test:
        raise ConfigurationError("split left one side empty")
    return train, test


@dataclass
class LabelDistribution:
    counts: dict[str, tuple[int, int]] = field(default_factory=dict)  # trait -> (false, true)

    def total(self, trait: str) -> int:
        false_count, true_count = self.counts[trait]
        return false_count + true_count


def label_distribution(records: Iterable[EssayRecord]) -> LabelDistribution:
    """Per-trait counts of false/true labels."""
    dist = LabelDistribution({t: (0, 0) for t in TRAITS})
    for record in records:
        for trait in TRAITS:
            f, t = dist.counts[trait]
            if record.labels.get(trait):
                dist.counts[trait] = (f, t + 1)
            else:
                dist.counts[trait] = (f + 1, t)
    return dist
