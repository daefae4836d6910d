"""One-layer GCN encoder with a PReLU activation and a shared affine head.

The encoder maps a graph to ``H = PReLU(A_norm X W) M + b``. Three views are
produced per target node: its row in the encoded subgraph, the mean of all
rows of the encoded subgraph, and its row in the encoded full graph. All
subgraphs of a batch are evaluated in one pass: since ``X_sub W`` is a row
gather of ``X W``, the stacked pre-activations of every subgraph equal
``P (X W)`` for a sparse block operator ``P`` built from the normalized
subgraph adjacencies.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import GraphFormatError
from .graph import Graph, normalize_adjacency

PARAM_BLOCKS = ("gcn_weight", "prelu_slope", "mlp_weight", "mlp_bias")


@dataclass
class EncoderParams:
    gcn_weight: np.ndarray  # (F, D)
    prelu_slope: float
    mlp_weight: np.ndarray  # (D, D)
    mlp_bias: np.ndarray  # (D,)

    @property
    def dims(self) -> tuple[int, int]:
        return self.gcn_weight.shape

    def blocks(self) -> dict[str, np.ndarray]:
        """Parameter blocks as float arrays; the slope becomes a 0-d array."""
        return {
            "gcn_weight": self.gcn_weight,
            "prelu_slope": np.asarray(self.prelu_slope, dtype=np.float64),
            "mlp_weight": self.mlp_weight,
            "mlp_bias": self.mlp_bias,
        }

    @classmethod
    def from_blocks(cls, blocks: dict) -> "EncoderParams":
        return cls(
            np.asarray(blocks["gcn_weight"], dtype=np.float64),
            float(blocks["prelu_slope"]),
            np.asarray(blocks["mlp_weight"], dtype=np.float64),
            np.asarray(blocks["mlp_bias"], dtype=np.float64),
        )

    def copy(self) -> "EncoderParams":
        return EncoderParams.from_blocks({k: np.array(v, copy=True) for k, v in self.blocks().items()})

    def equals(self, other: "EncoderParams") -> bool:
        a, b = self.blocks(), other.blocks()
        return all(np.array_equal(a[k], b[k]) for k in PARAM_BLOCKS)


def init_params(f: int, d: int, seed=None) -> EncoderParams:
    """Glorot-uniform weights, zero bias, PReLU slope 0.25."""
    if f < 1 or d < 1:
        raise ValueError("dimensions must be >= 1")
    rng = np.random.default_rng(seed)
    lim_w = np.sqrt(6.0 / (f + d))
    lim_m = np.sqrt(6.0 / (d + d))
    return EncoderParams(
        rng.uniform(-lim_w, lim_w, size=(f, d)),
        0.25,
        rng.uniform(-lim_m, lim_m, size=(d, d)),
        np.zeros(d),
    )


def prelu(z: np.ndarray, slope: float) -> np.ndarray:
    out = np.multiply(z, slope)
    if slope <= 1.0:
        return np.maximum(z, out, out=out)
    return np.minimum(z, out, out=out)


@dataclass
class Encoding:
    h: np.ndarray
    pre: np.ndarray
    act: np.ndarray


def _matmul_features(feats, w):
    if sp.issparse(feats):
        return np.asarray(feats @ w)
    return feats @ w


def encode(adj: sp.spmatrix, feats, params: EncoderParams) -> Encoding:
    """Encode one graph given its normalized adjacency."""
    f, _ = params.dims
    if feats.shape[1] != f:
        raise ValueError(f"feature width {feats.shape[1]} does not match encoder input {f}")
    if adj.shape != (feats.shape[0], feats.shape[0]):
        raise ValueError("adjacency and features disagree on the node count")
    pre = np.asarray(adj @ _matmul_features(feats, params.gcn_weight))
    act = prelu(pre, params.prelu_slope)
    return Encoding(act @ params.mlp_weight + params.mlp_bias, pre, act)


def _feature_operand(g: Graph):
    x = g.features
    if x.size and np.count_nonzero(x) < 0.25 * x.size:
        return g.sparse_features
    return x


@dataclass
class PlanChunk:
    subs: slice  # subgraphs covered by this chunk
    gather: sp.csr_matrix  # rows of the stacked operator for those subgraphs
    sizes: np.ndarray
    starts: np.ndarray  # first row of each subgraph, chunk-local
    target_rows: np.ndarray  # chunk-local


@dataclass
class BatchPlan:
    """Sparse operators that evaluate every subgraph of a batch in one pass.

    The stacked operator is split into row chunks along subgraph boundaries so
    that the elementwise work on each chunk stays cache-resident.
    """

    targets: np.ndarray
    chunks: list
    global_rows: sp.csr_matrix  # (B, N): target rows of the full normalized adjacency


def build_plan(g: Graph, batch, norm_adj: sp.csr_matrix | None = None, chunk_rows: int = 8192) -> BatchPlan:
    if len(batch) == 0:
        raise ValueError("batch must be non-empty")
    if norm_adj is None:
        norm_adj = normalize_adjacency(g)
    chunks = []
    lo = 0
    while lo < len(batch):
        rows, cols, vals, sizes, target_rows = [], [], [], [], []
        offset = 0
        hi = lo
        while hi < len(batch) and (hi == lo or offset + batch[hi].size <= chunk_rows):
            spec = batch[hi]
            a = spec.normalized_adjacency()
            rows.append(a.row + offset)
            cols.append(spec.members[a.col])
            vals.append(a.data)
            target_rows.append(offset + spec.target_pos)
            sizes.append(spec.size)
            offset += spec.size
            hi += 1
        gather = sp.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(offset, g.num_nodes)
        )
        sizes = np.asarray(sizes)
        starts = np.concatenate([[0], np.cumsum(sizes)[:-1]])
        chunks.append(PlanChunk(slice(lo, hi), gather, sizes, starts, np.asarray(target_rows)))
        lo = hi
    targets = np.asarray([s.target for s in batch], dtype=np.int64)
    return BatchPlan(targets, chunks, norm_adj[targets])


@dataclass
class EmbeddingViews:
    h_sub: np.ndarray  # target rows of the encoded subgraphs
    g_sub: np.ndarray  # mean-pooled encoded subgraphs
    h_glob: np.ndarray  # target rows of the encoded full graph
    plan: BatchPlan | None = None
    features: object = None
    pre_sub: list | None = None  # per-chunk pre-activations
    act_target: np.ndarray | None = None
    act_mean: np.ndarray | None = None
    pre_glob: np.ndarray | None = None
    act_glob: np.ndarray | None = None


def encode_views(g: Graph, batch, params: EncoderParams, plan: BatchPlan | None = None) -> EmbeddingViews:
    """Subgraph-level node, subgraph-level graph and global node embeddings for a batch."""
    if plan is None:
        plan = build_plan(g, batch)
    x = _feature_operand(g)
    if x.shape[1] != params.dims[0]:
        raise ValueError(f"feature width {x.shape[1]} does not match encoder input {params.dims[0]}")
    xw = _matmul_features(x, params.gcn_weight)
    a = params.prelu_slope
    m, b = params.mlp_weight, params.mlp_bias
    n_batch, d = len(plan.targets), xw.shape[1]

    pre_sub = []
    act_mean = np.empty((n_batch, d))
    act_target = np.empty((n_batch, d))
    for ch in plan.chunks:
        pre = np.asarray(ch.gather @ xw)
        act = prelu(pre, a)
        act_mean[ch.subs] = np.add.reduceat(act, ch.starts, axis=0) / ch.sizes[:, None]
        act_target[ch.subs] = act[ch.target_rows]
        pre_sub.append(pre)
    pre_glob = np.asarray(plan.global_rows @ xw)
    act_glob = prelu(pre_glob, a)
    return EmbeddingViews(
        h_sub=act_target @ m + b,
        g_sub=act_mean @ m + b,
        h_glob=act_glob @ m + b,
        plan=plan,
        features=x,
        pre_sub=pre_sub,
        act_target=act_target,
        act_mean=act_mean,
        pre_glob=pre_glob,
        act_glob=act_glob,
    )


def backward(views: EmbeddingViews, grad_views: EmbeddingViews, params: EncoderParams) -> EncoderParams:
    """Parameter gradients of a scalar loss given its gradients w.r.t. the three views.

    ``grad_views`` only needs ``h_sub``, ``g_sub`` and ``h_glob`` filled in.
    The result is an :class:`EncoderParams` holding gradients.
    """
    if views.plan is None or views.pre_sub is None:
        raise RuntimeError("views carry no forward cache; call encode_views first")
    plan = views.plan
    a = params.prelu_slope
    m = params.mlp_weight
    dh, dg, dhg = grad_views.h_sub, grad_views.g_sub, grad_views.h_glob

    d_m = views.act_target.T @ dh + views.act_mean.T @ dg + views.act_glob.T @ dhg
    d_b = dh.sum(axis=0) + dg.sum(axis=0) + dhg.sum(axis=0)

    d_act_target = dh @ m.T
    d_act_mean = dg @ m.T
    d_act_glob = dhg @ m.T

    d_slope = 0.0
    d_xw = None
    for ch, pre in zip(plan.chunks, views.pre_sub):
        # every row of a subgraph receives 1/K' of the pooled gradient
        d_act = np.repeat(d_act_mean[ch.subs] / ch.sizes[:, None], ch.sizes, axis=0)
        d_act[ch.target_rows] += d_act_target[ch.subs]
        d_slope += float(np.vdot(d_act, np.minimum(pre, 0.0)))
        d_act *= np.where(pre > 0, 1.0, a)
        part = np.asarray(ch.gather.T @ d_act)
        d_xw = part if d_xw is None else d_xw + part
    d_slope += float(np.vdot(d_act_glob, np.minimum(views.pre_glob, 0.0)))
    d_act_glob *= np.where(views.pre_glob > 0, 1.0, a)
    d_xw += np.asarray(plan.global_rows.T @ d_act_glob)
    d_w = np.asarray(views.features.T @ d_xw)
    return EncoderParams(d_w, d_slope, d_m, d_b)


def zero_views_like(views: EmbeddingViews) -> EmbeddingViews:
    return EmbeddingViews(np.zeros_like(views.h_sub), np.zeros_like(views.g_sub), np.zeros_like(views.h_glob))


def save_checkpoint(params: EncoderParams, path: str | os.PathLike) -> None:
    """Text checkpoint: header ``F D``, then each block under its name, row-major."""
    path = Path(path)
    f, d = params.dims
    lines = [f"{f} {d}"]
    for name, arr in params.blocks().items():
        lines.append(name)
        arr = np.atleast_2d(arr)
        lines.extend(" ".join(repr(float(x)) for x in row) for row in arr)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text("\n".join(lines) + "\n", encoding="utf-8")
    os.replace(tmp, path)


def load_checkpoint(path: str | os.PathLike) -> EncoderParams:
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    try:
        f, d = (int(x) for x in lines[0].split())
    except (ValueError, IndexError):
        raise GraphFormatError(f"{path}:1: expected header 'F D'") from None
    shapes = {"gcn_weight": (f, d), "prelu_slope": (1, 1), "mlp_weight": (d, d), "mlp_bias": (1, d)}
    blocks = {}
    i = 1
    for name in PARAM_BLOCKS:
        if i >= len(lines) or lines[i].strip() != name:
            raise GraphFormatError(f"{path}:{i + 1}: expected section {name!r}")
        rows, cols = shapes[name]
        vals = [[float(x) for x in lines[i + 1 + r].split()] for r in range(rows)]
        arr = np.asarray(vals, dtype=np.float64)
        if arr.shape != (rows, cols):
            raise GraphFormatError(f"{path}: section {name!r} has shape {arr.shape}, expected {(rows, cols)}")
        blocks[name] = arr
        i += 1 + rows
    blocks["prelu_slope"] = blocks["prelu_slope"][0, 0]
    blocks["mlp_bias"] = blocks["mlp_bias"][0]
    return EncoderParams.from_blocks(blocks)
