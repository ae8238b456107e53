"""End-to-end orchestration: ingest -> segment -> embed -> graphs -> train ->
evaluate -> ablate, with content-hash caching of every intermediate."""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

from .corpus import (
    DEFAULT_COLUMN_MAP,
    TRAITS,
    TRAIT_SHORT,
    EssayRecord,
    SplitSpec,
    label_distribution,
    load_corpus,
    split_train_test,
)
from .embeddings import hash_embed, read_bundle_dir, validate_bundle, write_bundle_dir
from .errors import ConfigurationError, HyperPersonaError, StageError
from .hiergraph import (
    HierGraph,
    LevelConfig,
    hiergraph_from_json,
    hiergraph_to_json,
    to_hiergraph,
)
from .hypergraph import build_hypergraph
from .metrics import confusion, evaluate_traits, render_markdown, score
from .model import ModelParams, load_checkpoint, save_checkpoint
from .segmenter import (
    SegmentedDocument,
    read_segments,
    segment_corpus,
    write_segments,
)
from .trainer import TrainConfig, predict, train_trait

ABLATION_ORDER = (
    LevelConfig.FULL,
    LevelConfig.DOC_SENT,
    LevelConfig.DOC_WORD,
    LevelConfig.SENT_ONLY,
    LevelConfig.WORD_ONLY,
)


@dataclass
class RunConfig:
    corpus: str
    workdir: str
    column_map: dict | None = None
    embedding_mode: str = "hash"  # hash | import
    bundles_dir: str | None = None
    dim: int = 32
    seed: int = 0
    train_fraction: float = 0.8
    stratify_by: str | None = None
    train: TrainConfig = field(default_factory=TrainConfig)

    def __post_init__(self):
        if self.embedding_mode not in ("hash", "import"):
            raise ConfigurationError(f"embedding_mode must be hash or import, got {self.embedding_mode!r}")
        if self.embedding_mode == "import" and not self.bundles_dir:
            raise ConfigurationError("import mode needs bundles_dir")
        if isinstance(self.train, dict):
            self.train = TrainConfig(**self.train)
        # One master seed propagates to every stochastic stage.
        self.train.seed = self.seed

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["train"]["level_config"] = self.train.level_config.value
        return out

    @classmethod
    def from_dict(cls, obj: Mapping) -> "RunConfig":
        obj = dict(obj)
        if "train" in obj and isinstance(obj["train"], Mapping):
            obj["train"] = dict(obj["train"])
            if "hidden_dims" in obj["train"]:
                obj["train"]["hidden_dims"] = tuple(obj["train"]["hidden_dims"])
        return cls(**obj)

    @classmethod
    def from_json_file(cls, path: str | Path) -> "RunConfig":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def apply_overrides(config_dict: dict, overrides: list[str]) -> dict:
    """Apply `--set a.b=value` assignments onto a nested config dict."""
    for item in overrides:
        if "=" not in item:
            raise ConfigurationError(f"override {item!r} is not key=value")
        key, raw = item.split("=", 1)
        target = config_dict
        parts = key.split(".")
        for part in parts[:-1]:
            target = target.setdefault(part, {})
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        target[parts[-1]] = value
    return config_dict


def _digest(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _key(*parts) -> str:
    return _digest(json.dumps(parts, sort_keys=True).encode("utf-8"))[:16]


def _canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2)


class Pipeline:
    """Stage runner; every artifact lives under workdir/cache keyed by the
    digest of its stage inputs, so edits invalidate exactly downstream work."""

    def __init__(self, config: RunConfig):
        self.config = config
        self.workdir = Path(config.workdir)
        self.cache = self.workdir / "cache"
        self.cache.mkdir(parents=True, exist_ok=True)
        self.stage_keys: dict[str, str] = {}

    # -- stages ------------------------------------------------------------

    def ingest(self) -> list[EssayRecord]:
        try:
            return load_corpus(self.config.corpus, self.config.column_map)
        except (HyperPersonaError, OSError) as exc:
            raise StageError("ingest", exc) from exc

    def corpus_digest(self) -> str:
        try:
            return _digest(Path(self.config.corpus).read_bytes())
        except OSError as exc:
            raise StageError("ingest", exc) from exc

    def segment(self, records: list[EssayRecord]) -> tuple[list[SegmentedDocument], list]:
        key = _key("segment", self.corpus_digest(), self.config.column_map)
        self.stage_keys["segment"] = key
        path = self.cache / f"segments-{key}.jsonl"
        skip_path = self.cache / f"segments-{key}.skipped.json"
        try:
            if path.exists() and skip_path.exists():
                return read_segments(path), json.loads(skip_path.read_text())
            result = segment_corpus(records)
            write_segments(result.documents, path)
            skip_path.write_text(_canonical_json(result.skipped))
            return result.documents, result.skipped
        except HyperPersonaError as exc:
            raise StageError("segment", exc) from exc

    def embed(self, segdocs: list[SegmentedDocument]) -> tuple[dict, str]:
        """Returns (doc_id -> bundle, embed stage key)."""
        try:
            if self.config.embedding_mode == "hash":
                key = _key("embed-hash", self.stage_keys["segment"], self.config.dim, self.config.seed)
                self.stage_keys["embed"] = key
                bundle_dir = self.cache / f"bundles-{key}"
                if not (bundle_dir / "manifest.json").exists():
                    bundles = [
                        hash_embed(doc, self.config.dim, self.config.seed) for doc in segdocs
                    ]
                    write_bundle_dir(bundles, bundle_dir)
                bundles = read_bundle_dir(bundle_dir)
            else:
                manifest = Path(self.config.bundles_dir) / "manifest.json"
                key = _key("embed-import", self.stage_keys["segment"], _digest(manifest.read_bytes()))
                self.stage_keys["embed"] = key
                bundles = read_bundle_dir(self.config.bundles_dir)
                by_doc = {d.doc_id: d for d in segdocs}
                for bundle in bundles:
                    seg = by_doc.get(bundle.doc_id)
                    if seg is None:
                        continue
                    violations = validate_bundle(bundle, seg)
                    if violations:
                        raise ConfigurationError(
                            f"imported bundle {bundle.doc_id}: {violations[0]}"
                        )
            return {b.doc_id: b for b in bundles}, key
        except (HyperPersonaError, OSError) as exc:
            raise StageError("embed", exc) from exc

    def build_graphs(
        self, segdocs: list[SegmentedDocument], bundles: dict, level: LevelConfig
    ) -> dict[str, HierGraph]:
        key = _key("graphs", self.stage_keys["embed"], level.value)
        self.stage_keys[f"graphs-{level.value}"] = key
        path = self.cache / f"graphs-{key}.jsonl"
        try:
            if path.exists():
                graphs = {}
                with open(path, "r", encoding="utf-8") as fh:
                    for line in fh:
                        graph = hiergraph_from_json(json.loads(line))
                        graphs[graph.doc_id] = graph
                return graphs
            graphs = {}
            with open(path, "w", encoding="utf-8") as fh:
                for doc in segdocs:
                    bundle = bundles.get(doc.doc_id)
                    if bundle is None:
                        continue
                    graph = to_hiergraph(build_hypergraph(doc, bundle), level)
                    graphs[doc.doc_id] = graph
                    fh.write(json.dumps(hiergraph_to_json(graph)) + "\n")
            return graphs
        except HyperPersonaError as exc:
            path.unlink(missing_ok=True)
            raise StageError("graphs", exc) from exc

    def split(self, records: list[EssayRecord]) -> tuple[list[EssayRecord], list[EssayRecord]]:
        try:
            return split_train_test(
                records,
                SplitSpec(
                    train_fraction=self.config.train_fraction,
                    seed=self.config.seed,
                    stratify_by=self.config.stratify_by,
                ),
            )
        except HyperPersonaError as exc:
            raise StageError("split", exc) from exc

    def train_one(
        self,
        trait: str,
        level: LevelConfig,
        graphs: dict[str, HierGraph],
        train_records: list[EssayRecord],
        test_records: list[EssayRecord],
    ) -> tuple[ModelParams, Path]:
        train_config = dataclasses.replace(self.config.train, level_config=level)
        config_echo = dataclasses.asdict(train_config)
        config_echo["level_config"] = level.value
        key = _key("train", self.stage_keys[f"graphs-{level.value}"], config_echo, trait)
        self.stage_keys[f"train-{level.value}-{trait}"] = key
        ckpt = self.cache / f"model-{key}-{TRAIT_SHORT[trait]}.ckpt"
        history_path = self.cache / f"history-{key}-{TRAIT_SHORT[trait]}.jsonl"
        try:
            if ckpt.exists():
                return load_checkpoint(ckpt), ckpt
            train_graphs = [graphs[r.id] for r in train_records if r.id in graphs]
            train_labels = [r.labels.get(trait) for r in train_records if r.id in graphs]
            eval_graphs = [graphs[r.id] for r in test_records if r.id in graphs]
            eval_labels = [r.labels.get(trait) for r in test_records if r.id in graphs]
            params, history = train_trait(
                train_graphs, train_labels, train_config, trait,
                eval_graphs=eval_graphs or None,
                eval_labels=eval_labels or None,
            )
            save_checkpoint(params, ckpt)
            with open(history_path, "w", encoding="utf-8") as fh:
                for i in range(len(history.train_loss)):
                    row = {"epoch": i + 1, "train_loss": history.train_loss[i],
                           "wall_clock": history.wall_clock[i]}
                    if history.eval_accuracy is not None:
                        row["eval_accuracy"] = history.eval_accuracy[i]
                    fh.write(json.dumps(row) + "\n")
            return params, ckpt
        except HyperPersonaError as exc:
            raise StageError("train", exc) from exc

    def evaluate_level(
        self,
        level: LevelConfig,
        graphs: dict[str, HierGraph],
        train_records: list[EssayRecord],
        test_records: list[EssayRecord],
    ) -> dict:
        per_trait = {}
        counts = {}
        for trait in TRAITS:
            params, _ = self.train_one(trait, level, graphs, train_records, test_records)
            usable = [r for r in test_records if r.id in graphs]
            preds = [predict(params, graphs[r.id])[1] for r in usable]
            labels = [r.labels.get(trait) for r in usable]
            per_trait[trait] = (preds, labels)
            c = confusion(preds, labels)
            counts[trait] = {"tp": c.tp, "fp": c.fp, "fn": c.fn, "tn": c.tn}
        report = evaluate_traits(per_trait)
        return {"table": report.as_dict(), "confusion": counts, "report": report}

    # -- public entry points -------------------------------------------------


def run_pipeline(config: RunConfig) -> dict:
    """Execute all stages and write report.json / report.md under the workdir."""
    pipeline = Pipeline(config)
    records = pipeline.ingest()
    segdocs, skipped = pipeline.segment(records)
    bundles, _ = pipeline.embed(segdocs)
    level = config.train.level_config
    graphs = pipeline.build_graphs(segdocs, bundles, level)
    train_records, test_records = pipeline.split(records)
    evaluation = pipeline.evaluate_level(level, graphs, train_records, test_records)

    dist = label_distribution(records)
    report = {
        "config": config.to_dict(),
        "stage_keys": dict(sorted(pipeline.stage_keys.items())),
        "corpus": {
            "records": len(records),
            "segmented": len(segdocs),
            "skipped": skipped,
            "label_distribution": {t: list(dist.counts[t]) for t in TRAITS},
        },
        "split": {"train": len(train_records), "test": len(test_records)},
        "level_config": level.value,
        "metrics": evaluation["table"],
        "confusion": evaluation["confusion"],
    }
    workdir = Path(config.workdir)
    (workdir / "report.json").write_text(_canonical_json(report), encoding="utf-8")
    (workdir / "report.md").write_text(
        render_markdown(evaluation["report"]) + "\n", encoding="utf-8"
    )
    return report


def render_ablation_markdown(rows: Mapping[str, Mapping[str, float]],
                             order: list[str]) -> str:
    """Five rows (one per level variant) by six accuracy columns."""
    lines = ["| Text Level(s) | O | C | E | A | N | Avg. |", "|---|---|---|---|---|---|---|"]
    for level in order:
        row = rows[level]
        cells = " | ".join(f"{row[s]:.2f}" for s in ("O", "C", "E", "A", "N", "Average"))
        lines.append(f"| {level} | {cells} |")
    return "\n".join(lines)


def run_ablation(config: RunConfig) -> dict:
    """Train and evaluate all five level variants with a shared split and seed."""
    pipeline = Pipeline(config)
    records = pipeline.ingest()
    segdocs, _ = pipeline.segment(records)
    bundles, _ = pipeline.embed(segdocs)
    train_records, test_records = pipeline.split(records)

    rows = {}
    for level in ABLATION_ORDER:
        graphs = pipeline.build_graphs(segdocs, bundles, level)
        evaluation = pipeline.evaluate_level(level, graphs, train_records, test_records)
        accuracy_row = {
            short: evaluation["table"][short]["accuracy"]
            for short in [TRAIT_SHORT[t] for t in TRAITS] + ["Average"]
        }
        rows[level.value] = accuracy_row

    order = [level.value for level in ABLATION_ORDER]
    report = {
        "config": config.to_dict(),
        "rows": rows,
        "order": order,
    }
    workdir = Path(config.workdir)
    (workdir / "ablation.json").write_text(_canonical_json(report), encoding="utf-8")
    (workdir / "ablation.md").write_text(
        render_ablation_markdown(rows, order) + "\n", encoding="utf-8"
    )
    return report


def evaluate_checkpoints(config: RunConfig, checkpoint_dir: str | Path) -> dict:
    """Score externally supplied per-trait checkpoints (O.ckpt .. N.ckpt) on
    the configured test split, without training."""
    from .metrics import evaluate_traits as _evaluate_traits
    from .model import load_checkpoint as _load

    pipeline = Pipeline(config)
    records = pipeline.ingest()
    segdocs, _ = pipeline.segment(records)
    bundles, _ = pipeline.embed(segdocs)
    level = config.train.level_config
    graphs = pipeline.build_graphs(segdocs, bundles, level)
    _, test_records = pipeline.split(records)

    checkpoint_dir = Path(checkpoint_dir)
    per_trait = {}
    for trait in TRAITS:
        path = checkpoint_dir / f"{TRAIT_SHORT[trait]}.ckpt"
        if not path.exists():
            raise StageError("evaluate", FileNotFoundError(path))
        params = _load(path)
        usable = [r for r in test_records if r.id in graphs]
        preds = [predict(params, graphs[r.id])[1] for r in usable]
        labels = [r.labels.get(trait) for r in usable]
        per_trait[trait] = (preds, labels)
    report = _evaluate_traits(per_trait)
    return {"metrics": report.as_dict(), "report": report}


def corpus_report(path: str | Path, column_map: dict | None = None) -> dict:
    """Dataset statistics over whatever corpus is supplied: label distribution
    plus sentence/word count summaries under the default splitter."""
    records = load_corpus(path, column_map)
    segmentation = segment_corpus(records)
    sentence_counts = np.array([len(d.sentences) for d in segmentation.documents])
    word_counts = np.array([d.word_count() for d in segmentation.documents])
    dist = label_distribution(records)

    def summary(values: np.ndarray) -> dict:
        return {
            "mean": float(values.mean()),
            "median": float(np.median(values)),
            "std": float(values.std()),
            "min": int(values.min()),
            "max": int(values.max()),
        }

    return {
        "records": len(records),
        "segmented": len(segmentation.documents),
        "skipped": len(segmentation.skipped),
        "label_distribution": {t: {"false": dist.counts[t][0], "true": dist.counts[t][1]} for t in TRAITS},
        "sentences_per_doc": summary(sentence_counts),
        "words_per_doc": summary(word_counts),
    }
