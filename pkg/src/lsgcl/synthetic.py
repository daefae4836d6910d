"""Random graph generators for sanity checks."""

from __future__ import annotations

import numpy as np

from .graph import Graph, build_graph


def erdos_renyi(n: int, p: float, seed=None, num_features: int | None = None) -> Graph:
    rng = np.random.default_rng(seed)
    iu, ju = np.triu_indices(n, k=1)
    keep = rng.random(len(iu)) < p
    feats = None if num_features is None else rng.normal(size=(n, num_features))
    return build_graph(n, np.column_stack([iu[keep], ju[keep]]), feats)


def sbm(
    block_sizes=(100, 100),
    p_in: float = 0.10,
    p_out: float = 0.01,
    noise: float = 0.5,
    seed=None,
) -> Graph:
    """Stochastic block model whose features are the block one-hot plus Gaussian noise.

    Block ids double as node labels.
    """
    rng = np.random.default_rng(seed)
    labels = np.repeat(np.arange(len(block_sizes)), block_sizes)
    n = len(labels)
    iu, ju = np.triu_indices(n, k=1)
    prob = np.where(labels[iu] == labels[ju], p_in, p_out)
    keep = rng.random(len(iu)) < prob
    feats = np.eye(len(block_sizes))[labels] + rng.normal(scale=noise, size=(n, len(block_sizes)))
    return build_graph(n, np.column_stack([iu[keep], ju[keep]]), feats, labels)
