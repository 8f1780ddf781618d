"""Gradient-guided equalization loss for long-tailed classification.

Each category j keeps a running ratio g_j of accumulated positive to
negative gradient magnitude. A sigmoid gate f(g) = 1/(1+exp(-gamma*(g-mu)))
turns that ratio into a positive-gradient boost q = 1 + alpha*(1-f) and a
negative-gradient damper r = f: categories starved of positive gradient
(small g) get their negatives almost silenced and their positives
amplified, while well-fed categories converge to plain training (q -> 1,
r -> 1).

The loss itself is per-category sigmoid binary cross-entropy with each
category term scaled by the matching weight; the weights are constants
during differentiation (the reweighting acts on gradients post hoc, not
through the graph), so the analytic gradient of the returned scalar is
exactly the reweighted gradient. A simpler masked softmax-style variant
(drop selected category terms entirely) is provided as ``eql_v1_loss``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

BACKGROUND = -1


@dataclass(frozen=True)
class EqlV2Config:
    """Gate steepness ``gamma``, gate center ``mu``, positive boost ``alpha``."""

    gamma: float = 12.0
    mu: float = 0.8
    alpha: float = 4.0

    def __post_init__(self) -> None:
        if self.gamma <= 0.0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        if not 0.0 < self.mu < 1.0:
            raise ValueError(f"mu must be in (0, 1), got {self.mu}")
        if self.alpha < 0.0:
            raise ValueError(f"alpha must be nonnegative, got {self.alpha}")


class GradientAccumulator:
    """Per-category running sums of reweighted gradient magnitude.

    ``g`` is cum_pos/cum_neg with g = 0 wherever cum_neg = 0 (no negative
    evidence means maximal protection, matching the g(0) = 0 start).
    """

    def __init__(self, num_categories: int) -> None:
        if num_categories < 1:
            raise ValueError("need at least one category")
        self.num_categories = num_categories
        self.cum_pos = np.zeros(num_categories)
        self.cum_neg = np.zeros(num_categories)
        self.t = 0

    @property
    def g(self) -> np.ndarray:
        out = np.zeros(self.num_categories)
        nonzero = self.cum_neg > 0
        out[nonzero] = self.cum_pos[nonzero] / self.cum_neg[nonzero]
        return out


def weight_fn(g, cfg: EqlV2Config = EqlV2Config()):
    """Sigmoid gate 1/(1+exp(-gamma*(g-mu))); scalar in, scalar out."""
    g_arr = np.asarray(g, dtype=float)
    if np.any(g_arr < 0):
        raise ValueError("gradient ratio g must be nonnegative")
    out = 1.0 / (1.0 + np.exp(-cfg.gamma * (g_arr - cfg.mu)))
    return float(out) if np.isscalar(g) else out


def pos_neg_weights(g, cfg: EqlV2Config = EqlV2Config()):
    """Positive boost q = 1 + alpha*(1-f(g)) and negative damper r = f(g)."""
    f = weight_fn(g, cfg)
    return 1.0 + cfg.alpha * (1.0 - f), f


def reweight_gradients(
    pos_grad: np.ndarray,
    neg_grad: np.ndarray,
    acc: GradientAccumulator,
    cfg: EqlV2Config = EqlV2Config(),
) -> tuple[np.ndarray, np.ndarray]:
    """Scale per-category gradient magnitudes by the accumulator's current weights."""
    pos_grad = np.asarray(pos_grad, dtype=float)
    neg_grad = np.asarray(neg_grad, dtype=float)
    if np.any(pos_grad < 0) or np.any(neg_grad < 0):
        raise ValueError("gradient magnitudes must be nonnegative")
    q, r = pos_neg_weights(acc.g, cfg)
    return q * pos_grad, r * neg_grad


def update_ratio(
    acc: GradientAccumulator,
    pos_grad: np.ndarray,
    neg_grad: np.ndarray,
) -> GradientAccumulator:
    """Fold one iteration of reweighted gradient magnitudes into the ratio."""
    pos_grad = np.asarray(pos_grad, dtype=float)
    neg_grad = np.asarray(neg_grad, dtype=float)
    if pos_grad.shape != (acc.num_categories,) or neg_grad.shape != (acc.num_categories,):
        raise ValueError("per-category gradient vectors must match the accumulator size")
    acc.cum_pos += np.abs(pos_grad)
    acc.cum_neg += np.abs(neg_grad)
    acc.t += 1
    return acc


def eql_v1_loss(probs: np.ndarray, weights: np.ndarray) -> float:
    """Masked log loss -sum_j W_j*log(p_j) with binary category weights."""
    probs = np.asarray(probs, dtype=float)
    weights = np.asarray(weights, dtype=float)
    if probs.shape != weights.shape:
        raise ValueError("probs and weights must have the same shape")
    if not np.all((weights == 0) | (weights == 1)):
        raise ValueError("weights must be 0 or 1 per category")
    active = weights == 1
    if np.any(probs[active] <= 0):
        raise ValueError("probabilities of weighted categories must be positive")
    if np.any(probs > 1):
        raise ValueError("probabilities must not exceed 1")
    return float(-np.sum(np.log(probs[active]))) if active.any() else 0.0


def _log_sigmoid(z: np.ndarray) -> np.ndarray:
    return -np.logaddexp(0.0, -z)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _targets_one_hot(targets: np.ndarray, num_categories: int) -> np.ndarray:
    if np.any((targets < BACKGROUND) | (targets >= num_categories)):
        raise ValueError(f"targets must be {BACKGROUND} (background) or in [0, {num_categories})")
    y = np.zeros((targets.shape[0], num_categories))
    fg = targets >= 0
    y[np.nonzero(fg)[0], targets[fg]] = 1.0
    return y


def weighted_sigmoid_loss_and_grad(
    logits: np.ndarray,
    targets: np.ndarray,
    q: np.ndarray,
    r: np.ndarray,
) -> tuple[float, np.ndarray]:
    """Per-category sigmoid BCE with frozen per-category weights.

    ``q`` scales the target-category (positive) terms, ``r`` the rest;
    background rows (target = -1) are all-negative. Loss is the mean over
    rows of the weighted per-category sum, and the gradient w.r.t. the
    logits is w*(sigmoid(z)-y)/N.
    """
    z = np.atleast_2d(np.asarray(logits, dtype=float))
    t = np.atleast_1d(np.asarray(targets))
    n, c = z.shape
    if t.shape != (n,):
        raise ValueError(f"expected {n} targets, got shape {t.shape}")
    y = _targets_one_hot(t, c)
    w = np.where(y == 1.0, np.asarray(q, dtype=float), np.asarray(r, dtype=float))
    per_term = -(y * _log_sigmoid(z) + (1.0 - y) * _log_sigmoid(-z))
    loss = float(np.sum(w * per_term) / n)
    grad = w * (_sigmoid(z) - y) / n
    return loss, grad


def eqlv2_sigmoid_loss_and_grad(
    logits: np.ndarray,
    target,
    acc: GradientAccumulator,
    cfg: EqlV2Config = EqlV2Config(),
    update_stats: bool = True,
) -> tuple[float, np.ndarray]:
    """Equalized sigmoid BCE: loss value and gradient w.r.t. the logits.

    ``logits`` is (C,) for one sample or (N, C) for a batch; ``target`` is
    the matching category index / index array, with -1 marking background
    (all categories negative). Weights come from the accumulator's current
    ratio and are treated as constants; the reweighted per-category
    gradient magnitudes are folded back into the accumulator unless
    ``update_stats`` is false.
    """
    z = np.asarray(logits, dtype=float)
    single = z.ndim == 1
    t = np.atleast_1d(np.asarray(target))
    q, r = pos_neg_weights(acc.g, cfg)
    loss, grad = weighted_sigmoid_loss_and_grad(z, t, q, r)
    if update_stats:
        y = _targets_one_hot(t, acc.num_categories)
        mags = np.abs(grad)
        update_ratio(acc, (mags * y).sum(axis=0), (mags * (1.0 - y)).sum(axis=0))
    return loss, grad[0] if single else grad
