"""Synthetic corpus with planted lexical markers: labels are a known function
of inserted marker tokens, giving a desk-scale learnability oracle."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

from .corpus import DEFAULT_COLUMN_MAP, TRAITS, EssayRecord, TraitLabels
from .errors import ConfigurationError
from .rng import RngStream

_CONSONANTS = "bcdfghjklmnprstvz"
_VOWELS = "aeiou"

MARKER_THRESHOLD = 2

# Two planting rules:
#   count          positive iff the trait's markers occur >= 2 times anywhere
#                  (positives carry several occurrences, negatives at most one)
#   same-sentence  positive iff some single sentence holds >= 2 of the trait's
#                  markers; positives carry one burst of occurrences inside a
#                  single sentence while negatives carry two spread across
#                  different sentences, so the strong signal lives at the
#                  sentence level and plain occurrence counting is weak
MARKER_RULES = ("count", "same-sentence")


@dataclass(frozen=True)
class SyntheticSpec:
    """Defaults are the benchmark configuration: a count-rule corpus with one
    marker word per trait, one stray marker in every negative, and a 15%
    sub-population of positives planted as two-in-one-sentence bursts that
    word counting alone cannot separate from the negatives."""

    num_docs: int
    seed: int = 7
    sentences_per_doc: int = 6
    words_per_sentence: int = 10
    markers_per_trait: int = 1
    distractor_vocab: int = 60
    marker_rule: str = "count"
    # count rule: positives draw this many occurrences, negatives this many
    positive_occurrences: tuple[int, int] = (4, 6)
    negative_occurrences: tuple[int, int] = (1, 1)
    # count rule only: fraction of positives planted as a burst of
    # burst_occurrences inside a single sentence instead of spread occurrences.
    # Burst positives are hard to separate by word counting alone and easy at
    # the sentence level; spread positives are the reverse, so graphs seeing
    # both levels handle both sub-populations
    concentrate_positives: float = 0.15
    burst_occurrences: int = 2

    def __post_init__(self):
        if self.marker_rule not in MARKER_RULES:
            raise ConfigurationError(f"marker_rule must be one of {MARKER_RULES}")
        lo, hi = self.positive_occurrences
        if lo < MARKER_THRESHOLD or hi < lo:
            raise ConfigurationError(
                f"positive_occurrences must be an increasing range >= {MARKER_THRESHOLD}"
            )
        nlo, nhi = self.negative_occurrences
        if nlo < 0 or nhi < nlo or nhi >= MARKER_THRESHOLD:
            raise ConfigurationError(
                f"negative_occurrences must stay below {MARKER_THRESHOLD}"
            )


def _pseudo_word(stream: RngStream, syllables: int) -> str:
    draws = stream.raw(2 * syllables)
    parts = []
    for i in range(syllables):
        c = _CONSONANTS[int(draws[2 * i] % len(_CONSONANTS))]
        v = _VOWELS[int(draws[2 * i + 1] % len(_VOWELS))]
        parts.append(c + v)
    return "".join(parts)


def _build_vocab(stream: RngStream, count: int, syllables: int, taken: set[str]) -> list[str]:
    words = []
    while len(words) < count:
        word = _pseudo_word(stream, syllables)
        if word not in taken:
            taken.add(word)
            words.append(word)
    return words


def marker_label(sentences: Sequence[Sequence[str]], markers: Sequence[str], rule: str) -> bool:
    """The planted labeling function, applied to tokenized sentences."""
    marker_set = set(markers)
    if rule == "count":
        total = sum(1 for sent in sentences for w in sent if w in marker_set)
        return total >= MARKER_THRESHOLD
    if rule == "same-sentence":
        return any(
            sum(1 for w in sent if w in marker_set) >= MARKER_THRESHOLD for sent in sentences
        )
    raise ConfigurationError(f"unknown marker rule {rule!r}")


def _plant(
    doc_sentences: list[list[str]],
    trait_markers: Sequence[str],
    positive: bool,
    rule: str,
    pick: RngStream,
    free_slots: dict[int, list[int]],
    positive_occurrences: tuple[int, int] = (3, 5),
    negative_occurrences: tuple[int, int] = (0, 1),
    concentrate_positives: float = 0.0,
    burst_occurrences: int = 3,
) -> None:
    """Overwrite free slots with marker occurrences realizing the label."""

    def take_slot(sentence: int) -> int:
        return free_slots[sentence].pop()

    def any_sentence_with(count: int, exclude: set[int]) -> int:
        candidates = [s for s, slots in free_slots.items() if len(slots) >= count and s not in exclude]
        if not candidates:
            raise ConfigurationError("document too small for the requested marker plan")
        return candidates[int(pick.raw(1)[0] % len(candidates))]

    def put(sentence: int):
        word = trait_markers[int(pick.raw(1)[0] % len(trait_markers))]
        doc_sentences[sentence][take_slot(sentence)] = word

    if rule == "count":
        if positive:
            lo, hi = positive_occurrences
            if pick.uniforms(1)[0] < concentrate_positives:
                sentence = any_sentence_with(burst_occurrences, set())
                for _ in range(burst_occurrences):
                    put(sentence)
                return
            total = lo + int(pick.raw(1)[0] % (hi - lo + 1))
        else:
            nlo, nhi = negative_occurrences
            total = nlo + int(pick.raw(1)[0] % (nhi - nlo + 1))
        for _ in range(total):
            put(any_sentence_with(1, set()))
    else:  # same-sentence: positive = one in-sentence burst, negative = spread
        if positive:
            lo, hi = positive_occurrences
            burst = lo + int(pick.raw(1)[0] % (hi - lo + 1))
            sentence = any_sentence_with(burst, set())
            for _ in range(burst):
                put(sentence)
        else:
            used: set[int] = set()
            for _ in range(2):  # two distinct sentences, one marker each
                sentence = any_sentence_with(1, used)
                used.add(sentence)
                put(sentence)


def make_synthetic_corpus(
    spec: SyntheticSpec,
) -> tuple[list[EssayRecord], dict[str, tuple[str, ...]]]:
    """Generate documents whose trait labels match the marker rule exactly.

    Per trait, exactly half the documents are positive.  All documents share
    the same shape so length is not a confound.
    """
    if spec.num_docs < 20:
        raise ConfigurationError(f"synthetic corpus needs >= 20 docs, got {spec.num_docs}")
    if spec.sentences_per_doc < 4 or spec.words_per_sentence < 4:
        raise ConfigurationError("documents too small to plant markers cleanly")
    per_trait_max = spec.positive_occurrences[1]
    if len(TRAITS) * per_trait_max > spec.sentences_per_doc * spec.words_per_sentence // 2:
        raise ConfigurationError("documents too small for the marker plan; enlarge them")
    if spec.marker_rule == "same-sentence" and per_trait_max > spec.words_per_sentence // 2:
        raise ConfigurationError("burst cannot fit inside one sentence; widen sentences")
    root = RngStream(spec.seed)
    taken: set[str] = set()
    distractors = _build_vocab(root.split(1), spec.distractor_vocab, 3, taken)
    markers = {
        trait: tuple(_build_vocab(root.split(10 + i), spec.markers_per_trait, 2, taken))
        for i, trait in enumerate(TRAITS)
    }

    n = spec.num_docs
    positive_sets = []
    for i in range(len(TRAITS)):
        perm = root.split(100 + i).permutation(n)
        positive_sets.append(set(int(j) for j in perm[: n // 2]))

    records = []
    for doc in range(n):
        doc_stream = root.split(1000 + doc)
        fill = doc_stream.split(1)
        sentences = [
            [distractors[int(w % len(distractors))] for w in fill.raw(spec.words_per_sentence)]
            for _ in range(spec.sentences_per_doc)
        ]
        # Free slots per sentence, consumed from the end in shuffled order.
        slots_stream = doc_stream.split(2)
        free_slots = {
            s: [int(i) for i in slots_stream.permutation(spec.words_per_sentence)]
            for s in range(spec.sentences_per_doc)
        }
        label_values = {}
        for ti, trait in enumerate(TRAITS):
            positive = doc in positive_sets[ti]
            label_values[trait] = positive
            _plant(sentences, markers[trait], positive, spec.marker_rule,
                   doc_stream.split(3 + ti), free_slots, spec.positive_occurrences,
                   spec.negative_occurrences, spec.concentrate_positives,
                   spec.burst_occurrences)
        text = " ".join(" ".join(words) + "." for words in sentences)
        records.append(
            EssayRecord(
                id=f"synth-{doc:04d}",
                text=text,
                labels=TraitLabels(**label_values),
            )
        )
    return records, markers


def write_corpus_csv(
    records: Sequence[EssayRecord],
    path: str | Path,
    column_map: Mapping[str, str] | None = None,
) -> None:
    """CSV in the conventional corpus schema so the ingest stage reads it back."""
    cmap = dict(DEFAULT_COLUMN_MAP)
    if column_map:
        cmap.update(column_map)
    fieldnames = [cmap["id"], cmap["text"]] + [cmap[t] for t in TRAITS]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fieldnames)
        writer.writeheader()
        for record in records:
            row = {cmap["id"]: record.id, cmap["text"]: record.text}
            for trait in TRAITS:
                row[cmap[trait]] = "y" if record.labels.get(trait) else "n"
            writer.writerow(row)
