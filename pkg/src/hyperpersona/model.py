"""The network: learnable feature mask, two attention message-passing blocks
with residual + layer norm + sigmoid gating, additive pooling, gated head."""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ConfigurationError, DimensionError, FormatError, IndexRangeError
from .hiergraph import HierGraph
from .rng import RngStream

EDGE_WEIGHT_MODES = ("scale-message", "structural-only")


@dataclass
class ModelConfig:
    feature_dim: int
    hidden_dims: tuple[int, int] = (128, 64)
    head_dim: int = 16
    tau: float = 1.0
    dropout: float = 0.2
    edge_weight_mode: str = "scale-message"

    def __post_init__(self):
        if self.feature_dim < 1:
            raise ConfigurationError("feature_dim must be positive")
        if self.tau <= 0:
            raise ConfigurationError(f"tau must be > 0, got {self.tau}")
        if self.edge_weight_mode not in EDGE_WEIGHT_MODES:
            raise ConfigurationError(
                f"edge_weight_mode must be one of {EDGE_WEIGHT_MODES}, got {self.edge_weight_mode!r}"
            )


@dataclass
class FeatureMaskParams:
    s: Tensor  # (1, d) learnable selection scores
    tau: float

    def __post_init__(self):
        if self.tau <= 0:
            raise ConfigurationError(f"tau must be > 0, got {self.tau}")


@dataclass
class EncoderLayerParams:
    W1: Tensor  # self transform (in, out)
    W2: Tensor  # neighbor value projection (in, out)
    W3: Tensor  # query projection (in, out)
    W4: Tensor  # key projection (in, out)
    W_res: Tensor  # residual projection (in, out)
    gamma: Tensor  # (1, out)
    beta: Tensor  # (1, out)

    @property
    def out_dim(self) -> int:
        return self.W1.shape[1]


@dataclass
class HeadParams:
    W1: Tensor  # (hidden, head_dim)
    b1: Tensor  # (1, head_dim)
    gamma: Tensor  # (1, head_dim)
    beta: Tensor  # (1, head_dim)
    W2: Tensor  # (head_dim, 1)
    b2: Tensor  # (1, 1)
    dropout: float = 0.2


@dataclass
class ModelParams:
    mask: FeatureMaskParams
    layers: tuple[EncoderLayerParams, EncoderLayerParams]
    head: HeadParams
    config: ModelConfig

    def named_parameters(self) -> list[tuple[str, Tensor]]:
        named = [("mask.s", self.mask.s)]
        for i, layer in enumerate(self.layers):
            for attr in ("W1", "W2", "W3", "W4", "W_res", "gamma", "beta"):
                named.append((f"layers.{i}.{attr}", getattr(layer, attr)))
        for attr in ("W1", "b1", "gamma", "beta", "W2", "b2"):
            named.append((f"head.{attr}", getattr(self.head, attr)))
        return named

    def parameters(self) -> list[Tensor]:
        return [t for _, t in self.named_parameters()]


def _glorot(stream: RngStream, fan_in: int, fan_out: int) -> np.ndarray:
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return stream.uniform_signed(fan_in * fan_out).reshape(fan_in, fan_out) * limit


def init_params(config: ModelConfig, stream: RngStream) -> ModelParams:
    """Symmetric uniform init for matrices, zeros/ones for affine terms,
    mask scores at 0.5 so initial masks are mildly on."""
    d = config.feature_dim
    h1, h2 = config.hidden_dims
    mask = FeatureMaskParams(s=ad.param(np.full((1, d), 0.5)), tau=config.tau)
    layers = []
    dims = [(d, h1), (h1, h2)]
    for i, (fin, fout) in enumerate(dims):
        s = stream.split(i + 1)
        layers.append(
            EncoderLayerParams(
                W1=ad.param(_glorot(s.split(1), fin, fout)),
                W2=ad.param(_glorot(s.split(2), fin, fout)),
                W3=ad.param(_glorot(s.split(3), fin, fout)),
                W4=ad.param(_glorot(s.split(4), fin, fout)),
                W_res=ad.param(_glorot(s.split(5), fin, fout)),
                gamma=ad.param(np.ones((1, fout))),
                beta=ad.param(np.zeros((1, fout))),
            )
        )
    hs = stream.split(99)
    head = HeadParams(
        W1=ad.param(_glorot(hs.split(1), h2, config.head_dim)),
        b1=ad.param(np.zeros((1, config.head_dim))),
        gamma=ad.param(np.ones((1, config.head_dim))),
        beta=ad.param(np.zeros((1, config.head_dim))),
        W2=ad.param(_glorot(hs.split(2), config.head_dim, 1)),
        b2=ad.param(np.zeros((1, 1))),
        dropout=config.dropout,
    )
    return ModelParams(mask=mask, layers=(layers[0], layers[1]), head=head, config=config)


# ---------------------------------------------------------------------------
# batching
# ---------------------------------------------------------------------------


@dataclass
class GraphBatch:
    """Disjoint union of graphs: offset node ids plus a graph-id segment vector."""

    features: np.ndarray  # (n, d) float64
    edge_src: np.ndarray  # directed, both directions per undirected edge
    edge_dst: np.ndarray
    edge_weight: np.ndarray
    graph_ids: np.ndarray  # (n,)
    num_graphs: int
    doc_ids: tuple[str, ...] = field(default_factory=tuple)

    @property
    def num_nodes(self) -> int:
        return self.features.shape[0]


def batch_graphs(graphs: list[HierGraph], dtype=np.float64) -> GraphBatch:
    if not graphs:
        raise ConfigurationError("cannot batch zero graphs")
    feats, srcs, dsts, weights, gids = [], [], [], [], []
    offset = 0
    for gi, graph in enumerate(graphs):
        feats.append(graph.feature_matrix(dtype=dtype))
        src, dst, w = graph.directed_edges()
        srcs.append(src + offset)
        dsts.append(dst + offset)
        weights.append(w)
        gids.append(np.full(len(graph.nodes), gi, dtype=np.int64))
        offset += len(graph.nodes)
    return GraphBatch(
        features=np.concatenate(feats, axis=0),
        edge_src=np.concatenate(srcs),
        edge_dst=np.concatenate(dsts),
        edge_weight=np.concatenate(weights),
        graph_ids=np.concatenate(gids),
        num_graphs=len(graphs),
        doc_ids=tuple(g.doc_id for g in graphs),
    )


# ---------------------------------------------------------------------------
# forward pieces
# ---------------------------------------------------------------------------


def gumbel_sigmoid_mask(mask_params: FeatureMaskParams, rng: RngStream, mode: str) -> Tensor:
    """Soft near-binary mask; noisy in train mode, noiseless sigmoid at eval."""
    if mask_params.tau <= 0:
        raise ConfigurationError(f"tau must be > 0, got {mask_params.tau}")
    s = mask_params.s
    if mode == "train":
        noise = rng.gumbels(s.data.size).reshape(s.shape)
        shifted = ad.add(s, ad.tensor(noise))  # noise is a constant of the pass
    elif mode == "eval":
        shifted = s
    else:
        raise ConfigurationError(f"mode must be train or eval, got {mode!r}")
    return ad.sigmoid(ad.scale(shifted, 1.0 / mask_params.tau))


def apply_mask(features: Tensor, mask: Tensor) -> Tensor:
    """Broadcast elementwise feature gating; gradient reaches both operands."""
    if mask.shape != (1, features.shape[1]):
        raise DimensionError(f"mask {mask.shape} does not fit features {features.shape}")
    return ad.scale_cols(features, mask)


def _segment_softmax(scores: Tensor, ids: np.ndarray, num_segments: int) -> Tensor:
    # Per-segment max subtraction keeps exp in range; the shift is constant so
    # gradients are untouched (softmax is shift-invariant).
    seg_max = np.full(num_segments, -np.inf)
    np.maximum.at(seg_max, ids, scores.data.reshape(-1))
    shifted = ad.sub(scores, ad.tensor(seg_max[ids].reshape(-1, 1)))
    e = ad.exp(shifted)
    sums = ad.segment_sum(e, ids, num_segments)
    return ad.div(e, ad.gather_rows(sums, ids))


def transformer_conv(
    layer: EncoderLayerParams,
    h: Tensor,
    edge_src: np.ndarray,
    edge_dst: np.ndarray,
    edge_weight: np.ndarray,
    edge_weight_mode: str = "scale-message",
) -> Tensor:
    """Attention-weighted message passing with a learnable self term.

    Every undirected edge must already be expanded to both directions.  In
    "scale-message" mode the value message is additionally multiplied by the
    precomputed edge weight; "structural-only" ignores weights.
    """
    if edge_weight_mode not in EDGE_WEIGHT_MODES:
        raise ConfigurationError(f"unknown edge_weight_mode {edge_weight_mode!r}")
    n = h.shape[0]
    if len(edge_src) != len(edge_dst) or len(edge_src) != len(edge_weight):
        raise DimensionError("edge arrays must have equal lengths")
    if len(edge_src) and (
        min(edge_src.min(), edge_dst.min()) < 0 or max(edge_src.max(), edge_dst.max()) >= n
    ):
        raise IndexRangeError(f"edge endpoint out of range [0, {n})")

    self_term = ad.matmul(h, layer.W1)
    if len(edge_src) == 0:
        return self_term

    q = ad.gather_rows(ad.matmul(h, layer.W3), edge_dst)
    k = ad.gather_rows(ad.matmul(h, layer.W4), edge_src)
    scores = ad.scale(ad.row_sum(ad.mul(q, k)), 1.0 / math.sqrt(layer.out_dim))
    alpha = _segment_softmax(scores, edge_dst, n)

    if edge_weight_mode == "scale-message":
        alpha = ad.mul(alpha, ad.tensor(edge_weight.reshape(-1, 1)))
    messages = ad.scale_rows(ad.gather_rows(ad.matmul(h, layer.W2), edge_src), alpha)
    return ad.add(self_term, ad.segment_sum(messages, edge_dst, n))


def encode_layer(
    layer: EncoderLayerParams,
    h_prev: Tensor,
    edge_src: np.ndarray,
    edge_dst: np.ndarray,
    edge_weight: np.ndarray,
    edge_weight_mode: str = "scale-message",
) -> Tensor:
    """Residual projection + message passing, row layer norm, sigmoid gate."""
    conv = transformer_conv(layer, h_prev, edge_src, edge_dst, edge_weight, edge_weight_mode)
    residual = ad.matmul(h_prev, layer.W_res)
    return ad.sigmoid(ad.layer_norm_rows(ad.add(residual, conv), layer.gamma, layer.beta))


def pool_graph(h: Tensor, graph_ids: np.ndarray, num_graphs: int) -> Tensor:
    """Permutation-invariant additive readout per graph."""
    return ad.segment_sum(h, graph_ids, num_graphs)


def classify(z_g: Tensor, head: HeadParams, rng: RngStream, mode: str) -> Tensor:
    """Bottleneck -> layer norm -> dropout -> sigmoid gate -> raw logit."""
    z1 = ad.add_rowvec(ad.matmul(z_g, head.W1), head.b1)
    z2 = ad.layer_norm_rows(z1, head.gamma, head.beta)
    z3 = ad.dropout(z2, head.dropout, rng, mode)
    z4 = ad.sigmoid(z3)
    return ad.add_rowvec(ad.matmul(z4, head.W2), head.b2)


def forward_batch(batch: GraphBatch, params: ModelParams, rng: RngStream, mode: str) -> Tensor:
    """Logits (num_graphs, 1) for a batched disjoint union."""
    d = params.mask.s.shape[1]
    if batch.features.shape[1] != d:
        raise ConfigurationError(
            f"graph feature dim {batch.features.shape[1]} != mask dim {d}"
        )
    x = ad.tensor(batch.features)
    mask = gumbel_sigmoid_mask(params.mask, rng, mode)
    h = apply_mask(x, mask)
    for layer in params.layers:
        h = encode_layer(
            layer, h, batch.edge_src, batch.edge_dst, batch.edge_weight,
            params.config.edge_weight_mode,
        )
    pooled = pool_graph(h, batch.graph_ids, batch.num_graphs)
    return classify(pooled, params.head, rng, mode)


def forward(graph: HierGraph, params: ModelParams, rng: RngStream, mode: str) -> Tensor:
    """Scalar logit for a single graph."""
    return forward_batch(batch_graphs([graph]), params, rng, mode)


# ---------------------------------------------------------------------------
# checkpoints
# ---------------------------------------------------------------------------

_CKPT_MAGIC = b"HPCK"
_CKPT_VERSION = 1


def save_checkpoint(params: ModelParams, path: str | Path) -> None:
    """Versioned binary with named float64 blocks in a deterministic order."""
    blocks = params.named_parameters()
    header = {
        "config": {
            "feature_dim": params.config.feature_dim,
            "hidden_dims": list(params.config.hidden_dims),
            "head_dim": params.config.head_dim,
            "tau": params.config.tau,
            "dropout": params.config.dropout,
            "edge_weight_mode": params.config.edge_weight_mode,
        },
        "mask_tau": params.mask.tau,
        "head_dropout": params.head.dropout,
        "blocks": [{"name": name, "shape": list(t.shape)} for name, t in blocks],
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_CKPT_MAGIC)
        fh.write(struct.pack("<II", _CKPT_VERSION, len(header_bytes)))
        fh.write(header_bytes)
        for _, t in blocks:
            fh.write(np.ascontiguousarray(t.data, dtype="<f8").tobytes())


def load_checkpoint(path: str | Path) -> ModelParams:
    data = Path(path).read_bytes()
    if data[:4] != _CKPT_MAGIC:
        raise FormatError(f"{path}: bad checkpoint magic")
    version, header_len = struct.unpack_from("<II", data, 4)
    if version != _CKPT_VERSION:
        raise FormatError(f"{path}: unsupported checkpoint version {version}")
    header = json.loads(data[12 : 12 + header_len].decode("utf-8"))
    config = ModelConfig(
        feature_dim=header["config"]["feature_dim"],
        hidden_dims=tuple(header["config"]["hidden_dims"]),
        head_dim=header["config"]["head_dim"],
        tau=header["config"]["tau"],
        dropout=header["config"]["dropout"],
        edge_weight_mode=header["config"]["edge_weight_mode"],
    )
    params = init_params(config, RngStream(0))
    params.mask.tau = header["mask_tau"]
    params.head.dropout = header["head_dropout"]
    offset = 12 + header_len
    by_name = dict(params.named_parameters())
    for block in header["blocks"]:
        shape = tuple(block["shape"])
        count = int(np.prod(shape))
        values = np.frombuffer(data, dtype="<f8", count=count, offset=offset).reshape(shape)
        offset += 8 * count
        target = by_name.get(block["name"])
        if target is None or target.shape != shape:
            raise FormatError(f"{path}: unexpected block {block['name']} {shape}")
        target.data = values.astype(np.float64)
    if offset != len(data):
        raise FormatError(f"{path}: trailing bytes in checkpoint")
    return params
