"""Personalized-PageRank semantic subgraphs and the K-hop / random-walk alternatives."""

from __future__ import annotations

import logging
import os
from collections import deque
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import GraphFormatError
from .graph import Graph, column_normalized_adjacency, normalize_adjacency

log = logging.getLogger(__name__)

SAMPLERS = ("k-rank", "k-hop", "k-rw")


@dataclass(frozen=True)
class PprConfig:
    restart_prob: float = 0.15
    subgraph_size: int = 20
    max_iters: int = 100
    tol: float = 1e-9

    def __post_init__(self):
        if not 0.0 < self.restart_prob < 1.0:
            raise ValueError(f"restart_prob must lie in (0, 1), got {self.restart_prob}")
        if self.subgraph_size < 1:
            raise ValueError("subgraph_size must be >= 1")
        if self.max_iters < 1 or self.tol <= 0:
            raise ValueError("max_iters must be >= 1 and tol > 0")


def ppr_matrix(g: Graph, targets, cfg: PprConfig = PprConfig()) -> tuple[np.ndarray, np.ndarray]:
    """Power-iterate PPR vectors for several targets at once.

    Returns an ``(N, len(targets))`` score array (column ``c`` belongs to
    ``targets[c]``) and a boolean array flagging which columns converged.
    """
    targets = np.asarray(targets, dtype=np.int64).ravel()
    n = g.num_nodes
    a_hat = column_normalized_adjacency(g)
    p = cfg.restart_prob
    restart = np.zeros((n, len(targets)))
    restart[targets, np.arange(len(targets))] = p
    pi = restart.copy()
    converged = np.zeros(len(targets), dtype=bool)
    for _ in range(cfg.max_iters):
        nxt = restart + (1.0 - p) * (a_hat @ pi)
        delta = np.abs(nxt - pi).sum(axis=0)
        pi = nxt
        converged = delta <= cfg.tol
        if converged.all():
            break
    return pi, converged


def ppr_scores(g: Graph, target: int, cfg: PprConfig = PprConfig(), literal: bool = False):
    """PPR vector of ``target``: fixed point of ``pi = p e_t + (1 - p) A_hat pi``.

    Returns ``(scores, converged)``. With ``literal=True`` the column of
    ``p [I - (1 - p) A_hat]`` is returned instead (no inverse); it is kept only
    for comparison and is not a valid relatedness ranking.
    """
    if not 0 <= target < g.num_nodes:
        raise IndexError(f"target {target} out of range")
    if literal:
        return literal_importance_matrix(g, cfg.restart_prob)[:, target], True
    pi, conv = ppr_matrix(g, [target], cfg)
    return pi[:, 0], bool(conv[0])


def literal_importance_matrix(g: Graph, restart_prob: float) -> np.ndarray:
    n = g.num_nodes
    a_hat = column_normalized_adjacency(g).toarray()
    return restart_prob * (np.eye(n) - (1.0 - restart_prob) * a_hat)


def dense_ppr(g: Graph, target: int, restart_prob: float) -> np.ndarray:
    """Reference PPR by a dense linear solve; for small graphs and tests."""
    n = g.num_nodes
    a_hat = column_normalized_adjacency(g).toarray()
    e = np.zeros(n)
    e[target] = 1.0
    return restart_prob * np.linalg.solve(np.eye(n) - (1.0 - restart_prob) * a_hat, e)


def rank_top_k(scores: np.ndarray, target: int, k: int) -> list[int]:
    """Target first, then nonzero-score nodes by (score desc, id asc), ``k`` in total."""
    if k < 1:
        raise ValueError("k must be >= 1")
    scores = np.asarray(scores)
    cand = np.flatnonzero(scores > 0)
    cand = cand[cand != target]
    order = np.lexsort((cand, -scores[cand]))
    return [int(target)] + [int(c) for c in cand[order[: k - 1]]]


@dataclass(frozen=True, eq=False)
class SubgraphSpec:
    """Induced subgraph around one target node; ``members[0]`` is the target."""

    target: int
    members: np.ndarray
    adjacency: sp.csr_matrix
    source_features: np.ndarray
    target_pos: int = 0

    @property
    def size(self) -> int:
        return len(self.members)

    @property
    def features(self) -> np.ndarray:
        return self.source_features[self.members]

    @cached_property
    def _normalized(self) -> sp.coo_matrix:
        return normalize_adjacency(self.adjacency).tocoo()

    def normalized_adjacency(self) -> sp.coo_matrix:
        return self._normalized


def extract_subgraph(g: Graph, members) -> SubgraphSpec:
    members = np.asarray(members, dtype=np.int64).ravel()
    if len(members) == 0:
        raise ValueError("members must be non-empty")
    if members.min() < 0 or members.max() >= g.num_nodes:
        raise ValueError("member id out of range")
    if len(np.unique(members)) != len(members):
        raise ValueError("members contain duplicates")
    sub = g.adjacency[members][:, members].tocsr()
    sub.sort_indices()
    return SubgraphSpec(int(members[0]), members, sub, g.features)


def sample_khop(g: Graph, target: int, hops: int = 1, cap: int = 20) -> list[int]:
    """BFS order within ``hops`` of ``target``, truncated to ``cap`` nodes."""
    if hops < 1 or cap < 1:
        raise ValueError("hops and cap must be >= 1")
    seen = {int(target)}
    out = [int(target)]
    queue = deque([(int(target), 0)])
    while queue and len(out) < cap:
        node, depth = queue.popleft()
        if depth == hops:
            continue
        for nb in g.neighbors(node):
            nb = int(nb)
            if nb not in seen:
                seen.add(nb)
                out.append(nb)
                if len(out) == cap:
                    break
                queue.append((nb, depth + 1))
    return out


def sample_random_walk(g: Graph, target: int, walk_len: int = 20, seed=None) -> list[int]:
    """Visited nodes of one uniform walk, deduplicated in first-visit order."""
    if walk_len < 1:
        raise ValueError("walk_len must be >= 1")
    rng = np.random.default_rng(seed)
    node = int(target)
    out = [node]
    seen = {node}
    for _ in range(walk_len):
        nbrs = g.neighbors(node)
        if len(nbrs) == 0:
            break
        node = int(nbrs[rng.integers(len(nbrs))])
        if node not in seen:
            seen.add(node)
            out.append(node)
    return out


@dataclass(eq=False)
class SubgraphSet:
    """One :class:`SubgraphSpec` per node, plus the settings that produced them."""

    subgraphs: list
    subgraph_size: int
    restart_prob: float
    sampler: str

    def __len__(self):
        return len(self.subgraphs)

    def __getitem__(self, i):
        return self.subgraphs[i]

    def __iter__(self):
        return iter(self.subgraphs)

    def member_lists(self):
        return [s.members.tolist() for s in self.subgraphs]


def precompute_subgraphs(
    g: Graph,
    cfg: PprConfig = PprConfig(),
    sampler: str = "k-rank",
    *,
    hops: int = 1,
    seed: int = 0,
    chunk: int = 1024,
) -> SubgraphSet:
    """Build the subgraph of every node with the chosen sampler.

    ``k-rank`` is PPR scores, top-K ranking and induction; ``k-hop`` is a
    ``hops``-deep BFS capped at K; ``k-rw`` is a K-step random walk seeded per
    node from ``seed``.
    """
    if sampler not in SAMPLERS:
        raise ValueError(f"unknown sampler {sampler!r}; expected one of {SAMPLERS}")
    n = g.num_nodes
    k = cfg.subgraph_size
    members: list[list[int]] = []
    if sampler == "k-rank":
        unconverged = 0
        for start in range(0, n, chunk):
            targets = np.arange(start, min(n, start + chunk))
            pi, conv = ppr_matrix(g, targets, cfg)
            unconverged += int((~conv).sum())
            for c, t in enumerate(targets):
                members.append(rank_top_k(pi[:, c], int(t), k))
        if unconverged:
            log.debug("%d PPR vectors hit max_iters before tol", unconverged)
    elif sampler == "k-hop":
        members = [sample_khop(g, t, hops, k) for t in range(n)]
    else:
        seeds = np.random.SeedSequence(seed).spawn(n)
        members = [sample_random_walk(g, t, k, seeds[t])[:k] for t in range(n)]
    subs = [extract_subgraph(g, m) for m in members]
    return SubgraphSet(subs, k, cfg.restart_prob, sampler)


def save_subgraphs(subs: SubgraphSet, path: str | os.PathLike) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    try:
        with tmp.open("w", encoding="utf-8") as fh:
            fh.write(f"{len(subs)} {subs.subgraph_size} {subs.restart_prob!r} {subs.sampler}\n")
            for s in subs:
                fh.write(f"{s.target} {s.size} " + " ".join(map(str, s.members.tolist())) + "\n")
        os.replace(tmp, path)
    except OSError as exc:
        raise OSError(f"cannot write subgraph cache {path}: {exc}") from exc


def load_subgraphs(g: Graph, path: str | os.PathLike) -> SubgraphSet:
    """Read a subgraph cache; induced adjacency and features come from ``g``."""
    path = Path(path)
    try:
        fh = path.open(encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot read subgraph cache {path}: {exc}") from exc
    with fh:
        header = fh.readline().split()
        if len(header) != 4:
            raise GraphFormatError(f"{path}:1: expected header 'N K p sampler'")
        n, k, p, sampler = int(header[0]), int(header[1]), float(header[2]), header[3]
        if n != g.num_nodes:
            raise GraphFormatError(f"{path}: cache has {n} nodes, graph has {g.num_nodes}")
        subs = []
        for lineno, line in enumerate(fh, start=2):
            parts = line.split()
            if not parts:
                continue
            vals = [int(x) for x in parts]
            target, count, ids = vals[0], vals[1], vals[2:]
            if len(ids) != count or not ids or ids[0] != target:
                raise GraphFormatError(f"{path}:{lineno}: malformed subgraph line")
            subs.append(extract_subgraph(g, ids))
    if len(subs) != n:
        raise GraphFormatError(f"{path}: expected {n} subgraph lines, found {len(subs)}")
    return SubgraphSet(subs, k, p, sampler)
