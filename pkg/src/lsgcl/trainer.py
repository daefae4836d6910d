"""Adam optimizer, the self-supervised training loop and embedding export."""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .contrastive import LossConfig, multi_level_loss, sample_negatives
from .encoder import EncoderParams, backward, build_plan, encode, encode_views, init_params
from .errors import NumericError
from .graph import Graph, normalize_adjacency
from .sampler import PprConfig, SubgraphSet

log = logging.getLogger(__name__)

VIEWS = ("GLOBAL", "SUBGRAPH", "CONCAT")


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 400
    batch_size: int | None = None  # None: full batch up to 5000 nodes, else 2000
    learning_rate: float = 0.001
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0
    embedding_dim: int = 1000
    patience: int = 50
    loss: LossConfig = field(default_factory=LossConfig)
    ppr: PprConfig = field(default_factory=PprConfig)
    sampler: str = "k-rank"
    hops: int = 1  # BFS depth for the k-hop sampler

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size is not None and self.batch_size < 2:
            raise ValueError("batch_size must be >= 2")
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be >= 0")

    def resolved_batch_size(self, num_nodes: int) -> int:
        if self.batch_size is not None:
            return min(self.batch_size, num_nodes)
        return num_nodes if num_nodes <= 5000 else 2000


@dataclass
class AdamState:
    first: dict
    second: dict
    t: int = 0

    @classmethod
    def zeros_like(cls, params: EncoderParams) -> "AdamState":
        blocks = params.blocks()
        return cls({k: np.zeros_like(v) for k, v in blocks.items()}, {k: np.zeros_like(v) for k, v in blocks.items()})


def adam_step(
    params: EncoderParams,
    grads: EncoderParams,
    state: AdamState,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> tuple[EncoderParams, AdamState]:
    """One bias-corrected Adam update; returns new params and state."""
    g_blocks = grads.blocks()
    for name, g in g_blocks.items():
        if not np.all(np.isfinite(g)):
            raise NumericError(f"non-finite gradient in {name}")
    t = state.t + 1
    new_params, first, second = {}, {}, {}
    for name, p in params.blocks().items():
        g = g_blocks[name]
        m = beta1 * state.first[name] + (1.0 - beta1) * g
        v = beta2 * state.second[name] + (1.0 - beta2) * g * g
        m_hat = m / (1.0 - beta1**t)
        v_hat = v / (1.0 - beta2**t)
        new_params[name] = p - lr * m_hat / (np.sqrt(v_hat) + eps)
        first[name], second[name] = m, v
    return EncoderParams.from_blocks(new_params), AdamState(first, second, t)


def train(
    g: Graph,
    subs: SubgraphSet,
    cfg: TrainConfig = TrainConfig(),
    params: EncoderParams | None = None,
    callback=None,
) -> tuple[EncoderParams, list[float]]:
    """Optimize the shared encoder; returns final parameters and per-epoch mean loss.

    Stops early when the epoch loss has not improved for ``cfg.patience``
    epochs. ``callback(epoch, params, loss)`` runs after every epoch.
    """
    n = g.num_nodes
    if n < 2:
        raise ValueError("training needs at least 2 nodes")
    if len(subs) != n:
        raise ValueError(f"subgraph set covers {len(subs)} nodes, graph has {n}")
    init_seq, loop_seq = np.random.SeedSequence(cfg.seed).spawn(2)
    if params is None:
        params = init_params(g.num_features, cfg.embedding_dim, init_seq)
    rng = np.random.default_rng(loop_seq)
    state = AdamState.zeros_like(params)
    norm_adj = normalize_adjacency(g)
    bs = cfg.resolved_batch_size(n)

    trace: list[float] = []
    best, stale = np.inf, 0
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        batches = [order[i:i + bs] for i in range(0, n, bs)]
        # a trailing singleton has no valid negative; fold it into the previous batch
        if len(batches) > 1 and len(batches[-1]) < 2:
            batches[-2] = np.concatenate(batches[-2:])
            batches.pop()
        losses = []
        for ids in batches:
            batch = [subs[int(i)] for i in ids]
            views = encode_views(g, batch, params, build_plan(g, batch, norm_adj))
            neg = sample_negatives(len(batch), rng)
            loss, grad_views = multi_level_loss(views, neg, cfg.loss)
            if not np.isfinite(loss):
                raise NumericError(f"non-finite loss at epoch {epoch}")
            grads = backward(views, grad_views, params)
            del views
            params, state = adam_step(
                params, grads, state, cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps
            )
            losses.append(loss * len(batch))
        epoch_loss = float(np.sum(losses) / n)
        trace.append(epoch_loss)
        log.info("epoch %d loss %.6f", epoch, epoch_loss)
        if callback is not None:
            callback(epoch, params, epoch_loss)
        if epoch_loss < best - 1e-12:
            best, stale = epoch_loss, 0
        else:
            stale += 1
            if stale >= cfg.patience:
                log.info("early stop after %d epochs", epoch + 1)
                break
    return params, trace


def export_embeddings(
    g: Graph,
    subs: SubgraphSet | None,
    params: EncoderParams,
    view: str = "GLOBAL",
    chunk: int = 1024,
) -> np.ndarray:
    """Node embeddings from a trained encoder: global rows, subgraph rows or both."""
    if view not in VIEWS:
        raise ValueError(f"unknown view {view!r}; expected one of {VIEWS}")
    parts = []
    if view in ("GLOBAL", "CONCAT"):
        feats = g.sparse_features if np.count_nonzero(g.features) < 0.25 * g.features.size else g.features
        parts.append(encode(normalize_adjacency(g), feats, params).h)
    if view in ("SUBGRAPH", "CONCAT"):
        if subs is None:
            raise ValueError("subgraph view needs a subgraph set")
        norm_adj = normalize_adjacency(g)
        rows = []
        for start in range(0, g.num_nodes, chunk):
            batch = [subs[i] for i in range(start, min(g.num_nodes, start + chunk))]
            rows.append(encode_views(g, batch, params, build_plan(g, batch, norm_adj)).h_sub)
        parts.append(np.vstack(rows))
    return np.hstack(parts) if len(parts) > 1 else parts[0]


def save_embeddings(emb: np.ndarray, path: str | os.PathLike) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with tmp.open("w", encoding="utf-8") as fh:
        fh.write(f"{emb.shape[0]} {emb.shape[1]}\n")
        for i, row in enumerate(emb):
            fh.write(f"{i} " + " ".join(repr(float(x)) for x in row) + "\n")
    os.replace(tmp, path)


def load_embeddings(path: str | os.PathLike) -> np.ndarray:
    with open(path, encoding="utf-8") as fh:
        n, d = (int(x) for x in fh.readline().split())
        emb = np.empty((n, d))
        for line in fh:
            parts = line.split()
            if parts:
                emb[int(parts[0])] = [float(x) for x in parts[1:]]
    return emb


def save_loss_trace(trace, path: str | os.PathLike) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with tmp.open("w", encoding="utf-8") as fh:
        fh.write("epoch,mean_loss\n")
        for i, v in enumerate(trace):
            fh.write(f"{i},{v!r}\n")
    os.replace(tmp, path)
