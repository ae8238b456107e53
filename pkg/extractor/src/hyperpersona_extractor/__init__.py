"""Layer-averaged transformer embeddings exported as bundle files."""

from .bundle_io import write_bundle_files
from .extractor import EmbedConfig, UnitEmbedder, extract_corpus, extract_document
from .segments import SegmentedDocument, read_segments

__all__ = [
    "EmbedConfig",
    "SegmentedDocument",
    "UnitEmbedder",
    "extract_corpus",
    "extract_document",
    "read_segments",
    "write_bundle_files",
]
