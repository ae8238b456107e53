"""Per-document hypergraph: word-occurrence nodes, sentence/document hyperedges."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .embeddings import EmbeddingBundle, validate_bundle
from .errors import BundleValidationError
from .segmenter import SegmentedDocument

# Node ids are (sentence index j, word index k), both 1-based, so nodes are
# word occurrences: repeated tokens yield distinct nodes with equal features
# and sentence hyperedges stay pairwise disjoint.
NodeId = tuple[int, int]


@dataclass(frozen=True)
class WordNode:
    node_id: NodeId
    token: str
    vec: np.ndarray


@dataclass(frozen=True)
class SentenceHyperedge:
    index: int  # sentence position j
    members: tuple[NodeId, ...]
    vec: np.ndarray


@dataclass(frozen=True)
class DocumentHyperedge:
    members: tuple[NodeId, ...]
    vec: np.ndarray


@dataclass(frozen=True)
class TextHypergraph:
    doc_id: str
    nodes: tuple[WordNode, ...]
    sentence_hyperedges: tuple[SentenceHyperedge, ...]
    document_hyperedge: DocumentHyperedge

    @property
    def node_count(self) -> int:
        return len(self.nodes)

    @property
    def hyperedge_count(self) -> int:
        return len(self.sentence_hyperedges) + 1


def build_hypergraph(segdoc: SegmentedDocument, bundle: EmbeddingBundle) -> TextHypergraph:
    """Assemble the hypergraph; features are copied from the bundle, never recomputed."""
    violations = validate_bundle(bundle, segdoc)
    if violations:
        raise BundleValidationError(violations)

    nodes: list[WordNode] = []
    sentence_edges: list[SentenceHyperedge] = []
    for j, sentence in enumerate(segdoc.sentences, start=1):
        members = []
        for k, word in enumerate(sentence.words, start=1):
            node_id = (j, k)
            nodes.append(WordNode(node_id=node_id, token=word, vec=bundle.word_vecs[j - 1][k - 1]))
            members.append(node_id)
        sentence_edges.append(
            SentenceHyperedge(index=j, members=tuple(members), vec=bundle.sent_vecs[j - 1])
        )

    document_edge = DocumentHyperedge(
        members=tuple(n.node_id for n in nodes), vec=bundle.doc_vec
    )
    return TextHypergraph(
        doc_id=segdoc.doc_id,
        nodes=tuple(nodes),
        sentence_hyperedges=tuple(sentence_edges),
        document_hyperedge=document_edge,
    )


def incidence_matrix(hg: TextHypergraph) -> np.ndarray:
    """Binary |V| x |E| membership matrix; sentence columns by j, document last.

    Every row sums to exactly 2: each node sits in its one sentence hyperedge
    and in the document hyperedge.
    """
    positions = {node.node_id: i for i, node in enumerate(hg.nodes)}
    matrix = np.zeros((hg.node_count, hg.hyperedge_count), dtype=np.int8)
    for col, edge in enumerate(hg.sentence_hyperedges):
        for node_id in edge.members:
            matrix[positions[node_id], col] = 1
    for node_id in hg.document_hyperedge.members:
        matrix[positions[node_id], -1] = 1
    return matrix


def hypergraph_to_json(hg: TextHypergraph) -> dict:
    """Inspection-friendly JSON view (features included as lists)."""
    return {
        "doc_id": hg.doc_id,
        "nodes": [
            {
                "id": list(n.node_id),
                "token": n.token,
                "vec": np.asarray(n.vec, dtype=np.float64).tolist(),
            }
            for n in hg.nodes
        ],
        "sentence_hyperedges": [
            {
                "index": e.index,
                "members": [list(m) for m in e.members],
                "vec": np.asarray(e.vec, dtype=np.float64).tolist(),
            }
            for e in hg.sentence_hyperedges
        ],
        "document_hyperedge": {
            "members": [list(m) for m in hg.document_hyperedge.members],
            "vec": np.asarray(hg.document_hyperedge.vec, dtype=np.float64).tolist(),
        },
    }
