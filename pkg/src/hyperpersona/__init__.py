"""Multi-level text graphs with an attention-based graph encoder for binary
Big Five trait prediction."""

from .corpus import (
    DEFAULT_COLUMN_MAP,
    TRAITS,
    EssayRecord,
    SplitSpec,
    TraitLabels,
    label_distribution,
    load_corpus,
    split_train_test,
)
from .embeddings import (
    EmbeddingBundle,
    hash_embed,
    read_bundle,
    read_bundle_dir,
    validate_bundle,
    write_bundle,
    write_bundle_dir,
)
from .hiergraph import HierGraph, LevelConfig, edge_weight, to_hiergraph
from .hypergraph import TextHypergraph, build_hypergraph, incidence_matrix
from .metrics import ConfusionCounts, TraitReport, confusion, evaluate_traits, score
from .model import ModelConfig, ModelParams, forward, init_params
from .pipeline import RunConfig, corpus_report, run_ablation, run_pipeline
from .segmenter import SegmentedDocument, Sentence, preprocess, segment, segment_corpus
from .synth import SyntheticSpec, make_synthetic_corpus, write_corpus_csv
from .trainer import TrainConfig, TrainHistory, bce_loss, predict, train_trait

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_COLUMN_MAP",
    "TRAITS",
    "ConfusionCounts",
    "EmbeddingBundle",
    "EssayRecord",
    "HierGraph",
    "LevelConfig",
    "ModelConfig",
    "ModelParams",
    "RunConfig",
    "SegmentedDocument",
    "Sentence",
    "SplitSpec",
    "SyntheticSpec",
    "TextHypergraph",
    "TraitLabels",
    "TrainConfig",
    "TrainHistory",
    "TraitReport",
    "bce_loss",
    "build_hypergraph",
    "confusion",
    "corpus_report",
    "edge_weight",
    "evaluate_traits",
    "forward",
    "hash_embed",
    "incidence_matrix",
    "init_params",
    "label_distribution",
    "load_corpus",
    "make_synthetic_corpus",
    "predict",
    "preprocess",
    "read_bundle",
    "read_bundle_dir",
    "run_ablation",
    "run_pipeline",
    "score",
    "segment",
    "segment_corpus",
    "split_train_test",
    "to_hiergraph",
    "train_trait",
    "validate_bundle",
    "write_bundle",
    "write_bundle_dir",
    "write_corpus_csv",
]
