import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from lsgcl.contrastive import LossConfig, multi_level_loss, sample_negatives, triplet_term
from lsgcl.encoder import EmbeddingViews


def sig(x):
    return 1.0 / (1.0 + math.exp(-x))


def hinge(anchor, pos, neg, margin):
    return max(sig(anchor * neg) - sig(anchor * pos) + margin, 0.0)


def hand_loss(h, s, g, neg, margin):
    """Scalar (D=1) expansion of the three pair losses, each averaged over the batch."""
    b = len(h)
    ns = sum(hinge(h[i], s[i], s[neg[i]], margin) for i in range(b)) / b
    ng = sum(hinge(h[i], g[i], g[neg[i]], margin) for i in range(b)) / b
    sg = sum(hinge(g[i], s[i], s[neg[i]], margin) for i in range(b)) / b
    return (ns + ng + sg) / 3, ns, ng, sg


def views(h, s, g):
    col = lambda v: np.asarray(v, dtype=np.float64).reshape(-1, 1) if np.ndim(v) == 1 else np.asarray(v, float)
    return EmbeddingViews(col(h), col(s), col(g))


def test_negatives_batch_of_two():
    for seed in range(20):
        assert sample_negatives(2, seed).tolist() == [1, 0]


def test_negatives_deterministic_shift():
    a = sample_negatives(5, 42)
    assert a.tolist() == sample_negatives(5, 42).tolist()
    shift = (a[0] - 0) % 5
    assert a.tolist() == [(i + shift) % 5 for i in range(5)]
    assert np.all(a != np.arange(5))


def test_negatives_never_self_and_cover_all_shifts():
    shifts = set()
    for seed in range(1000):
        neg = sample_negatives(6, seed)
        assert np.all(neg != np.arange(6))
        assert sorted(neg.tolist()) == list(range(6))
        shifts.add(int(neg[0]))
    assert shifts == {1, 2, 3, 4, 5}


def test_negatives_reject_tiny_batch():
    with pytest.raises(ValueError):
        sample_negatives(1, 0)


def test_triplet_hand_value():
    loss, *_ = triplet_term([1.0], [1.0], [0.0], 0.5)
    assert loss == pytest.approx(0.2689414213699951, abs=1e-15)


def test_triplet_equal_pos_neg_gives_margin(rng):
    a, p = rng.normal(size=4), rng.normal(size=4)
    loss, da, dp, dn = triplet_term(a, p, p, 0.5)
    assert loss == 0.5
    assert np.allclose(dp + dn, 0, atol=1e-15)


def test_triplet_saturated_is_zero():
    loss, da, dp, dn = triplet_term([1.0, 0.0], [45.0, 0.0], [-45.0, 0.0], 0.5)
    assert loss == 0.0
    assert not da.any() and not dp.any() and not dn.any()


def test_triplet_literal_sign_swaps_roles():
    plain, *_ = triplet_term([1.0], [1.0], [0.0], 0.5)
    literal, *_ = triplet_term([1.0], [1.0], [0.0], 0.5, literal_sign=True)
    swapped, *_ = triplet_term([1.0], [0.0], [1.0], 0.5)
    assert literal == swapped
    assert literal != plain


@settings(max_examples=200, deadline=None)
@given(st.floats(-5, 5), st.floats(-5, 5), st.floats(0, 3), st.floats(0, 2))
def test_triplet_monotone_in_positive_similarity(sp, sn, bump, margin):
    lo, *_ = triplet_term([1.0], [sp], [sn], margin)
    hi, *_ = triplet_term([1.0], [sp + bump], [sn], margin)
    assert hi <= lo + 1e-15
    assert 0.0 <= lo < 1.0 + margin


def test_multi_level_hand_expanded():
    h, s, g = [0.7, -1.3], [0.4, 2.1], [-0.6, 0.9]
    neg = np.array([1, 0])
    loss, _, terms = multi_level_loss(views(h, s, g), neg, LossConfig(0.5), return_terms=True)
    want, ns, ng, sg = hand_loss(h, s, g, neg, 0.5)
    assert abs(loss - want) <= 1e-12
    assert abs(terms["NS"] - ns) <= 1e-12
    assert abs(terms["NG"] - ng) <= 1e-12
    assert abs(terms["SG"] - sg) <= 1e-12


def test_multi_level_degenerate_equals_margin():
    x = np.ones((3, 2))
    loss, _ = multi_level_loss(EmbeddingViews(x, x.copy(), x.copy()), np.array([1, 2, 0]), LossConfig(0.5))
    assert loss == 0.5


def test_mode_weights():
    h, s, g = [0.7, -1.3], [0.4, 2.1], [-0.6, 0.9]
    neg = np.array([1, 0])
    _, ns, ng, _ = hand_loss(h, s, g, neg, 0.3)
    assert multi_level_loss(views(h, s, g), neg, LossConfig(0.3, "NS_ONLY"))[0] == pytest.approx(ns, abs=1e-15)
    assert multi_level_loss(views(h, s, g), neg, LossConfig(0.3, "NG_ONLY"))[0] == pytest.approx(ng, abs=1e-15)
    _, grads = multi_level_loss(views(h, s, g), neg, LossConfig(0.3, "NG_ONLY"))
    assert not grads.g_sub.any()


def test_shape_and_mode_errors():
    x = np.zeros((2, 1))
    with pytest.raises(ValueError):
        multi_level_loss(EmbeddingViews(x, np.zeros((3, 1)), x), [1, 0])
    with pytest.raises(ValueError):
        multi_level_loss(EmbeddingViews(x, x, x), [1, 0, 2])
    with pytest.raises(ValueError):
        LossConfig(mode="BOTH")
    with pytest.raises(ValueError):
        LossConfig(margin=-0.1)


def numeric_view_grads(v, neg, cfg, step=1e-6):
    out = []
    for name in ("h_sub", "g_sub", "h_glob"):
        base = getattr(v, name)
        grad = np.zeros_like(base)
        for idx in np.ndindex(base.shape):
            vals = []
            for sign in (1, -1):
                tables = {k: getattr(v, k).copy() for k in ("h_sub", "g_sub", "h_glob")}
                tables[name][idx] += sign * step
                vals.append(multi_level_loss(EmbeddingViews(**tables), neg, cfg)[0])
            grad[idx] = (vals[0] - vals[1]) / (2 * step)
        out.append(grad)
    return out


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 100_000), st.integers(2, 4), st.integers(1, 3), st.booleans())
def test_view_gradients_match_finite_differences(seed, b, d, literal):
    rng = np.random.default_rng(seed)
    v = EmbeddingViews(*(rng.normal(scale=1.5, size=(b, d)) for _ in range(3)))
    neg = sample_negatives(b, rng)
    cfg = LossConfig(float(rng.uniform(0.2, 1.0)), literal_sign=literal)
    sign = -1.0 if literal else 1.0
    for anchor, other in ((v.h_sub, v.g_sub), (v.h_sub, v.h_glob), (v.h_glob, v.g_sub)):
        s_pos = 1 / (1 + np.exp(-np.sum(anchor * other, axis=1)))
        s_neg = 1 / (1 + np.exp(-np.sum(anchor * other[neg], axis=1)))
        # the hinge is not differentiable at its kink
        assume(np.all(np.abs(sign * (s_neg - s_pos) + cfg.margin) > 1e-4))
    _, grads = multi_level_loss(v, neg, cfg)
    for got, want in zip((grads.h_sub, grads.g_sub, grads.h_glob), numeric_view_grads(v, neg, cfg)):
        diff = np.abs(got - want)
        scale = np.maximum(np.maximum(np.abs(got), np.abs(want)), 1e-8)
        assert np.all((diff <= 1e-8) | (diff / scale <= 1e-6))


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 100_000), st.integers(2, 6))
def test_loss_invariant_to_consistent_batch_permutation(seed, b):
    rng = np.random.default_rng(seed)
    tables = [rng.normal(size=(b, 3)) for _ in range(3)]
    neg = sample_negatives(b, rng)
    perm = rng.permutation(b)
    inv = np.argsort(perm)
    loss, _ = multi_level_loss(EmbeddingViews(*tables), neg)
    permuted = EmbeddingViews(*(t[perm] for t in tables))
    loss_p, _ = multi_level_loss(permuted, inv[neg[perm]])
    assert loss_p == pytest.approx(loss, abs=1e-14)
    assert 0.0 <= loss < 1.5
