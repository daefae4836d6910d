import numpy as np
import pytest
from hypothesis import strategies as st

from lsgcl.graph import build_graph


def path_graph(n, features=None):
    return build_graph(n, [(i, i + 1) for i in range(n - 1)], features)


def star_graph(leaves, features=None):
    return build_graph(leaves + 1, [(0, i) for i in range(1, leaves + 1)], features)


def random_graph(rng, n, p=0.3, f=None):
    iu, ju = np.triu_indices(n, k=1)
    keep = rng.random(len(iu)) < p
    feats = None if f is None else rng.normal(size=(n, f))
    return build_graph(n, np.column_stack([iu[keep], ju[keep]]), feats)


@st.composite
def graphs(draw, max_nodes=20, min_nodes=1):
    n = draw(st.integers(min_nodes, max_nodes))
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    mask = draw(st.lists(st.booleans(), min_size=len(pairs), max_size=len(pairs)))
    return build_graph(n, [e for e, keep in zip(pairs, mask) if keep])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def write_graph(tmp_path, edges_text, features_text, labels_text=None):
    e = tmp_path / "edges.txt"
    f = tmp_path / "features.txt"
    e.write_text(edges_text)
    f.write_text(features_text)
    lab = None
    if labels_text is not None:
        lab = tmp_path / "labels.txt"
        lab.write_text(labels_text)
    return e, f, lab


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
