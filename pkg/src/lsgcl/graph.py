"""Sparse undirected attributed graphs, text loaders and adjacency operators."""

from __future__ import annotations

import os
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import GraphFormatError


@dataclass(frozen=True, eq=False)
class Graph:
    """Undirected graph stored as a symmetric CSR adjacency plus a dense feature table.

    Both directions of every undirected edge are stored. Self-loops are never
    stored; they only appear inside :func:`normalize_adjacency`.
    """

    adjacency: sp.csr_matrix
    features: np.ndarray
    labels: np.ndarray | None = None

    @property
    def num_nodes(self) -> int:
        return self.adjacency.shape[0]

    @property
    def num_features(self) -> int:
        return self.features.shape[1]

    @property
    def num_edges(self) -> int:
        """Number of undirected edges."""
        return self.adjacency.nnz // 2

    @property
    def num_classes(self) -> int:
        if self.labels is None:
            return 0
        return int(self.labels.max()) + 1

    @cached_property
    def degrees(self) -> np.ndarray:
        return np.diff(self.adjacency.indptr).astype(np.float64)

    @cached_property
    def sparse_features(self) -> sp.csr_matrix:
        return sp.csr_matrix(self.features)

    def neighbors(self, node: int) -> np.ndarray:
        a = self.adjacency
        return a.indices[a.indptr[node]:a.indptr[node + 1]]

    def has_edge(self, u: int, v: int) -> bool:
        nbrs = self.neighbors(u)
        k = np.searchsorted(nbrs, v)
        return bool(k < len(nbrs) and nbrs[k] == v)

    def edge_list(self) -> np.ndarray:
        """Undirected edges as an (E, 2) array with ``u < v``, sorted."""
        coo = sp.triu(self.adjacency, k=1).tocoo()
        edges = np.column_stack([coo.row, coo.col]).astype(np.int64)
        order = np.lexsort((edges[:, 1], edges[:, 0]))
        return edges[order]

    def without_edges(self, edges: np.ndarray) -> "Graph":
        """Copy of the graph with the given undirected edges deleted."""
        edges = np.sort(np.asarray(edges, dtype=np.int64).reshape(-1, 2), axis=1)
        n = self.num_nodes
        current = self.edge_list()
        keep = ~np.isin(current[:, 0] * n + current[:, 1], edges[:, 0] * n + edges[:, 1])
        return build_graph(n, current[keep], self.features, self.labels)


def _canonical_csr(a: sp.spmatrix) -> sp.csr_matrix:
    a = sp.csr_matrix(a, dtype=np.float64)
    a.sum_duplicates()
    a.sort_indices()
    a.data[:] = 1.0
    return a


def build_graph(
    num_nodes: int,
    edges,
    features: np.ndarray | None = None,
    labels=None,
) -> Graph:
    """Build a :class:`Graph` from an iterable of ``(u, v)`` pairs.

    Duplicate edges, reversed duplicates and self-loops are dropped. When
    ``features`` is omitted an identity feature table is used.
    """
    e = np.asarray(list(edges) if not isinstance(edges, np.ndarray) else edges, dtype=np.int64).reshape(-1, 2)
    if len(e) and (e.min() < 0 or e.max() >= num_nodes):
        raise ValueError(f"edge endpoint out of range [0, {num_nodes})")
    e = e[e[:, 0] != e[:, 1]]
    rows = np.r_[e[:, 0], e[:, 1]]
    cols = np.r_[e[:, 1], e[:, 0]]
    adj = sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(num_nodes, num_nodes))
    adj = _canonical_csr(adj)
    if features is None:
        features = np.eye(num_nodes)
    features = np.ascontiguousarray(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[0] != num_nodes:
        raise ValueError(f"features must have {num_nodes} rows, got shape {features.shape}")
    if not np.all(np.isfinite(features)):
        raise ValueError("features contain non-finite values")
    if labels is not None:
        labels = np.asarray(labels, dtype=np.int64)
        if labels.shape != (num_nodes,):
            raise ValueError("labels must have one entry per node")
    return Graph(adj, features, labels)


def _parse_ints(parts, path, lineno, count):
    if len(parts) != count:
        raise GraphFormatError(f"{path}:{lineno}: expected {count} columns, got {len(parts)}")
    try:
        return [int(x) for x in parts]
    except ValueError:
        raise GraphFormatError(f"{path}:{lineno}: non-integer value in {' '.join(parts)!r}") from None


def load_features(path: str | os.PathLike) -> np.ndarray:
    path = Path(path)
    with path.open(encoding="utf-8") as fh:
        header = fh.readline().split()
        n, f = _parse_ints(header, path, 1, 2)
        feats = np.empty((n, f), dtype=np.float64)
        row = 0
        for lineno, line in enumerate(fh, start=2):
            parts = line.split()
            if not parts:
                continue
            if row >= n:
                raise GraphFormatError(f"{path}:{lineno}: more than {n} feature rows")
            if len(parts) != f:
                raise GraphFormatError(f"{path}:{lineno}: expected {f} columns, got {len(parts)}")
            try:
                feats[row] = [float(x) for x in parts]
            except ValueError:
                raise GraphFormatError(f"{path}:{lineno}: non-numeric feature value") from None
            if not np.all(np.isfinite(feats[row])):
                raise ValueError(f"{path}:{lineno}: non-finite feature value")
            row += 1
    if row != n:
        raise GraphFormatError(f"{path}: header declares {n} rows, found {row}")
    return feats


def load_edge_list(
    edge_path: str | os.PathLike,
    feature_path: str | os.PathLike,
    label_path: str | os.PathLike | None = None,
) -> Graph:
    """Load a graph from an edge file, a feature file and an optional label file.

    Raises
    ------
    GraphFormatError
        On a malformed line; the message carries ``path:line``.
    IndexError
        When an edge or label references a node id outside ``[0, N)``.
    ValueError
        On a non-finite feature value.
    """
    features = load_features(feature_path)
    n = features.shape[0]
    edge_path = Path(edge_path)
    edges = []
    with edge_path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            s = line.strip()
            if not s or s.startswith("#"):
                continue
            u, v = _parse_ints(s.split(), edge_path, lineno, 2)
            if not (0 <= u < n and 0 <= v < n):
                raise IndexError(f"{edge_path}:{lineno}: node id out of range [0, {n})")
            edges.append((u, v))
    labels = None
    if label_path is not None:
        labels = load_labels(label_path, n)
    return build_graph(n, np.asarray(edges, dtype=np.int64).reshape(-1, 2), features, labels)


def load_labels(path: str | os.PathLike, num_nodes: int) -> np.ndarray:
    path = Path(path)
    labels = np.full(num_nodes, -1, dtype=np.int64)
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            s = line.strip()
            if not s or s.startswith("#"):
                continue
            node, lab = _parse_ints(s.split(), path, lineno, 2)
            if not 0 <= node < num_nodes:
                raise IndexError(f"{path}:{lineno}: node id out of range [0, {num_nodes})")
            if lab < 0:
                raise GraphFormatError(f"{path}:{lineno}: negative label")
            labels[node] = lab
    if np.any(labels < 0):
        raise GraphFormatError(f"{path}: {int(np.sum(labels < 0))} nodes have no label")
    present = np.unique(labels)
    if not np.array_equal(present, np.arange(len(present))):
        raise GraphFormatError(f"{path}: label ids are not contiguous from 0")
    return labels


def save_edge_list(g: Graph, edge_path, feature_path, label_path=None) -> None:
    """Write ``g`` in the text formats read by :func:`load_edge_list`."""
    with open(edge_path, "w", encoding="utf-8") as fh:
        for u, v in g.edge_list():
            fh.write(f"{u} {v}\n")
    with open(feature_path, "w", encoding="utf-8") as fh:
        fh.write(f"{g.num_nodes} {g.num_features}\n")
        for row in g.features:
            fh.write(" ".join(format(float(x), ".17g") for x in row) + "\n")
    if label_path is not None and g.labels is not None:
        with open(label_path, "w", encoding="utf-8") as fh:
            for i, lab in enumerate(g.labels):
                fh.write(f"{i} {lab}\n")


def convert_linqs(content_path, cites_path, out_dir) -> Graph:
    """Convert the LINQS ``.content``/``.cites`` pair into the plain text formats.

    Paper ids are remapped to 0-based ids in ``.content`` order and class names
    to ids in sorted order. Citations to unknown papers are dropped.
    """
    ids, rows, names = [], [], []
    with open(content_path, encoding="utf-8") as fh:
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            ids.append(parts[0])
            rows.append([float(x) for x in parts[1:-1]])
            names.append(parts[-1])
    index = {pid: i for i, pid in enumerate(ids)}
    classes = {c: k for k, c in enumerate(sorted(set(names)))}
    edges = []
    with open(cites_path, encoding="utf-8") as fh:
        for line in fh:
            parts = line.split()
            if len(parts) == 2 and parts[0] in index and parts[1] in index:
                edges.append((index[parts[0]], index[parts[1]]))
    g = build_graph(len(ids), np.asarray(edges), np.asarray(rows), [classes[c] for c in names])
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_edge_list(g, out / "edges.txt", out / "features.txt", out / "labels.txt")
    return g


def normalize_adjacency(g: Graph | sp.spmatrix) -> sp.csr_matrix:
    """Symmetric GCN normalization ``D~^-1/2 (A + I) D~^-1/2``."""
    a = g.adjacency if isinstance(g, Graph) else sp.csr_matrix(g)
    n = a.shape[0]
    a_tilde = (a + sp.identity(n, format="csr")).tocsr()
    d = np.asarray(a_tilde.sum(axis=1)).ravel()
    inv_sqrt = 1.0 / np.sqrt(d)
    out = sp.diags(inv_sqrt) @ a_tilde @ sp.diags(inv_sqrt)
    out = sp.csr_matrix(out)
    out.sort_indices()
    return out


def column_normalized_adjacency(g: Graph) -> sp.csr_matrix:
    """``A D^-1``; columns of isolated nodes stay all-zero."""
    deg = g.degrees
    inv = np.zeros_like(deg)
    np.divide(1.0, deg, out=inv, where=deg > 0)
    return sp.csr_matrix(g.adjacency @ sp.diags(inv))
