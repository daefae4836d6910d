"""Margin triplet losses between the three embedding views."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .encoder import EmbeddingViews

LOSS_MODES = ("FULL", "NS_ONLY", "NG_ONLY")


@dataclass(frozen=True)
class LossConfig:
    margin: float = 0.5
    mode: str = "FULL"
    literal_sign: bool = False

    def __post_init__(self):
        if self.margin < 0:
            raise ValueError("margin must be non-negative")
        if self.mode not in LOSS_MODES:
            raise ValueError(f"unknown loss mode {self.mode!r}; expected one of {LOSS_MODES}")


def sample_negatives(batch_size: int, rng=None) -> np.ndarray:
    """In-batch negatives by a random cyclic shift, so position ``b`` never maps to itself."""
    if batch_size < 2:
        raise ValueError("need at least 2 rows to draw a negative")
    rng = np.random.default_rng(rng)
    shift = int(rng.integers(1, batch_size))
    return (np.arange(batch_size) + shift) % batch_size


def triplet_term(anchor, positive, negative, margin: float, literal_sign: bool = False):
    """``max(sigmoid(a.n) - sigmoid(a.p) + margin, 0)`` and its subgradients.

    Returns ``(loss, d_anchor, d_positive, d_negative)``. With
    ``literal_sign`` the two similarities swap roles.
    """
    anchor, positive, negative = (np.asarray(v, dtype=np.float64) for v in (anchor, positive, negative))
    s_pos = expit(anchor @ positive)
    s_neg = expit(anchor @ negative)
    sign = -1.0 if literal_sign else 1.0
    value = sign * (s_neg - s_pos) + margin
    if value <= 0:
        z = np.zeros_like(anchor)
        return 0.0, z, z.copy(), z.copy()
    gp = -sign * s_pos * (1.0 - s_pos)
    gn = sign * s_neg * (1.0 - s_neg)
    return float(value), gp * positive + gn * negative, gp * anchor, gn * anchor


def _pair_loss(anchor, positive, negatives, neg, margin, sign, weight, d_anchor, d_positive, d_negatives):
    """Batch-averaged triplet term; accumulates ``weight``-scaled gradients in place."""
    b = anchor.shape[0]
    neg_rows = negatives[neg]
    s_pos = expit(np.einsum("ij,ij->i", anchor, positive))
    s_neg = expit(np.einsum("ij,ij->i", anchor, neg_rows))
    value = sign * (s_neg - s_pos) + margin
    active = value > 0
    loss = float(np.sum(np.where(active, value, 0.0))) / b
    scale = weight * active / b
    gp = (-sign * s_pos * (1.0 - s_pos) * scale)[:, None]
    gn = (sign * s_neg * (1.0 - s_neg) * scale)[:, None]
    d_anchor += gp * positive + gn * neg_rows
    d_positive += gp * anchor
    np.add.at(d_negatives, neg, gn * anchor)
    return loss


def multi_level_loss(views: EmbeddingViews, neg, cfg: LossConfig = LossConfig(), return_terms: bool = False):
    """Combined loss over the node/subgraph, node/global and global/subgraph pairs.

    Returns ``(loss, grad_views)`` where ``grad_views`` is an
    :class:`EmbeddingViews` of gradients; with ``return_terms`` a dict of
    the three unweighted pair losses is appended.
    """
    h_sub, g_sub, h_glob = views.h_sub, views.g_sub, views.h_glob
    b = h_sub.shape[0]
    if g_sub.shape != h_sub.shape or h_glob.shape != h_sub.shape:
        raise ValueError("view tables must share one shape")
    neg = np.asarray(neg, dtype=np.int64)
    if neg.shape != (b,) or (b and (neg.min() < 0 or neg.max() >= b)):
        raise ValueError("negative index array does not match the batch")
    if cfg.mode not in LOSS_MODES:
        raise ValueError(f"unknown loss mode {cfg.mode!r}")

    d_h_sub = np.zeros_like(h_sub)
    d_g_sub = np.zeros_like(g_sub)
    d_h_glob = np.zeros_like(h_glob)
    sign = -1.0 if cfg.literal_sign else 1.0
    weights = {"FULL": (1 / 3, 1 / 3, 1 / 3), "NS_ONLY": (1.0, 0.0, 0.0), "NG_ONLY": (0.0, 1.0, 0.0)}[cfg.mode]
    a = cfg.margin

    terms = {
        "NS": _pair_loss(h_sub, g_sub, g_sub, neg, a, sign, weights[0], d_h_sub, d_g_sub, d_g_sub),
        "NG": _pair_loss(h_sub, h_glob, h_glob, neg, a, sign, weights[1], d_h_sub, d_h_glob, d_h_glob),
        "SG": _pair_loss(h_glob, g_sub, g_sub, neg, a, sign, weights[2], d_h_glob, d_g_sub, d_g_sub),
    }
    loss = weights[0] * terms["NS"] + weights[1] * terms["NG"] + weights[2] * terms["SG"]
    grads = EmbeddingViews(d_h_sub, d_g_sub, d_h_glob)
    if return_terms:
        return loss, grads, terms
    return loss, grads
