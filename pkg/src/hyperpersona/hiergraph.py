"""Hypergraph -> weighted hierarchical graph, with ablation-level variants."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateGraphError, DimensionError
from .hypergraph import TextHypergraph


class LevelConfig(enum.Enum):
    """Which linguistic levels contribute nodes to the graph."""

    FULL = "full"  # document + sentence + word
    DOC_SENT = "doc-sent"
    DOC_WORD = "doc-word"
    SENT_ONLY = "sent"
    WORD_ONLY = "word"

    @classmethod
    def from_string(cls, value: str) -> "LevelConfig":
        for member in cls:
            if member.value == value:
                return member
        raise ValueError(f"unknown level config {value!r}; expected one of "
                         f"{[m.value for m in cls]}")


class NodeKind(enum.Enum):
    DOCUMENT = "document"
    SENTENCE = "sentence"
    WORD = "word"


@dataclass(frozen=True)
class HierNode:
    node_id: str
    kind: NodeKind
    vec: np.ndarray


@dataclass(frozen=True)
class HierEdge:
    u: int  # position of endpoint in the node sequence
    v: int
    weight: float


@dataclass(frozen=True)
class HierGraph:
    doc_id: str
    nodes: tuple[HierNode, ...]
    edges: tuple[HierEdge, ...]  # undirected, stored once
    level_config: LevelConfig

    def feature_matrix(self, dtype=np.float64) -> np.ndarray:
        return np.stack([np.asarray(n.vec, dtype=dtype) for n in self.nodes])

    def directed_edges(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Expand undirected edges to both directions: (src, dst, weight) arrays."""
        if not self.edges:
            empty = np.zeros(0, dtype=np.int64)
            return empty, empty.copy(), np.zeros(0, dtype=np.float64)
        u = np.array([e.u for e in self.edges], dtype=np.int64)
        v = np.array([e.v for e in self.edges], dtype=np.int64)
        w = np.array([e.weight for e in self.edges], dtype=np.float64)
        return (
            np.concatenate([u, v]),
            np.concatenate([v, u]),
            np.concatenate([w, w]),
        )


def edge_weight(u_vec: np.ndarray, v_vec: np.ndarray) -> float:
    """Cosine similarity clamped to [0, 1]; zero-norm vectors get weight 0."""
    u = np.asarray(u_vec, dtype=np.float64)
    v = np.asarray(v_vec, dtype=np.float64)
    if u.shape != v.shape or u.ndim != 1:
        raise DimensionError(f"edge_weight operands {u.shape} vs {v.shape}")
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        return 0.0
    cos = float(np.dot(u, v) / (nu * nv))
    return min(max(cos, 0.0), 1.0)


def to_hiergraph(hg: TextHypergraph, level_config: LevelConfig) -> HierGraph:
    """Build the level-restricted weighted graph in canonical node order.

    FULL keeps the star-of-stars tree (document core, sentences attached,
    words under their sentences).  DOC_SENT and DOC_WORD keep the star around
    the document.  SENT_ONLY and WORD_ONLY connect the remaining nodes in a
    path following text order so the graph stays connected.
    """
    doc_node = HierNode("doc", NodeKind.DOCUMENT, hg.document_hyperedge.vec)
    sent_nodes = [
        HierNode(f"s{e.index}", NodeKind.SENTENCE, e.vec) for e in hg.sentence_hyperedges
    ]
    word_nodes = [
        HierNode(f"s{n.node_id[0]}.w{n.node_id[1]}", NodeKind.WORD, n.vec)
        for n in hg.nodes
    ]

    nodes: list[HierNode] = []
    edges: list[tuple[int, int]] = []

    if level_config in (LevelConfig.FULL, LevelConfig.DOC_SENT, LevelConfig.DOC_WORD):
        nodes.append(doc_node)
    if level_config in (LevelConfig.FULL, LevelConfig.DOC_SENT, LevelConfig.SENT_ONLY):
        nodes.extend(sent_nodes)
    if level_config in (LevelConfig.FULL, LevelConfig.DOC_WORD, LevelConfig.WORD_ONLY):
        nodes.extend(word_nodes)
    if not nodes:
        raise DegenerateGraphError(f"{hg.doc_id}: no nodes at level {level_config.value}")

    index = {n.node_id: i for i, n in enumerate(nodes)}

    if level_config is LevelConfig.FULL:
        for e in hg.sentence_hyperedges:
            edges.append((index["doc"], index[f"s{e.index}"]))
            for (j, k) in e.members:
                edges.append((index[f"s{j}"], index[f"s{j}.w{k}"]))
    elif level_config is LevelConfig.DOC_SENT:
        for e in hg.sentence_hyperedges:
            edges.append((index["doc"], index[f"s{e.index}"]))
    elif level_config is LevelConfig.DOC_WORD:
        for node in hg.nodes:
            j, k = node.node_id
            edges.append((index["doc"], index[f"s{j}.w{k}"]))
    elif level_config is LevelConfig.SENT_ONLY:
        for a, b in zip(sent_nodes, sent_nodes[1:]):
            edges.append((index[a.node_id], index[b.node_id]))
    elif level_config is LevelConfig.WORD_ONLY:
        for a, b in zip(word_nodes, word_nodes[1:]):
            edges.append((index[a.node_id], index[b.node_id]))

    weighted = tuple(
        HierEdge(u, v, edge_weight(nodes[u].vec, nodes[v].vec)) for u, v in edges
    )
    return HierGraph(
        doc_id=hg.doc_id, nodes=tuple(nodes), edges=weighted, level_config=level_config
    )


def hiergraph_to_json(graph: HierGraph) -> dict:
    return {
        "doc_id": graph.doc_id,
        "level_config": graph.level_config.value,
        "nodes": [
            {
                "id": n.node_id,
                "kind": n.kind.value,
                "vec": np.asarray(n.vec, dtype=np.float64).tolist(),
            }
            for n in graph.nodes
        ],
        "edges": [{"u": e.u, "v": e.v, "weight": e.weight} for e in graph.edges],
    }


def hiergraph_from_json(obj: dict) -> HierGraph:
    nodes = tuple(
        HierNode(n["id"], NodeKind(n["kind"]), np.asarray(n["vec"], dtype=np.float32))
        for n in obj["nodes"]
    )
    edges = tuple(HierEdge(e["u"], e["v"], e["weight"]) for e in obj["edges"])
    return HierGraph(
        doc_id=obj["doc_id"],
        nodes=nodes,
        edges=edges,
        level_config=LevelConfig.from_string(obj["level_config"]),
    )
