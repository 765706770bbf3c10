"""Segmentation training losses with analytic gradients.

Every loss takes probabilities (not logits) and returns ``(value, grad)``
where ``grad`` is the derivative with respect to the probability input.
Values and gradients are computed in double precision.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DICE_EPS = 1.0
CLAMP = 1e-7
FOCAL_ALPHA = 0.25
FOCAL_GAMMA = 2.0


def _pair(pred, gt):
    p = np.asarray(pred, dtype=np.float64)
    g = np.asarray(gt, dtype=np.float64)
    if p.shape != g.shape:
        raise ValueError(f"prediction dims {list(p.shape)} != target dims {list(g.shape)}")
    if not ((p >= 0) & (p <= 1)).all():
        raise ValueError("predictions must be probabilities in [0, 1]")
    return p, g


def dice_loss(pred, gt, eps: float = DICE_EPS):
    """``1 - (2 sum(p g) + eps) / (sum(p) + sum(g) + eps)``."""
    p, g = _pair(pred, gt)
    num = 2.0 * np.sum(p * g) + eps
    den = np.sum(p) + np.sum(g) + eps
    grad = -(2.0 * g * den - num) / (den * den)
    return float(1.0 - num / den), grad


def _bce_terms(p, g):
    pc = np.clip(p, CLAMP, 1.0 - CLAMP)
    loss = -(g * np.log(pc) + (1.0 - g) * np.log(1.0 - pc))
    grad = (pc - g) / (pc * (1.0 - pc))
    grad = np.where((p < CLAMP) | (p > 1.0 - CLAMP), 0.0, grad)
    return loss, grad


def pixel_bce(pred, gt):
    """Mean binary cross-entropy over pixels; predictions are clamped to
    ``[1e-7, 1 - 1e-7]`` (no gradient flows through the clamp)."""
    p, g = _pair(pred, gt)
    loss, grad = _bce_terms(p, g)
    n = p.size
    return float(loss.sum() / n), grad / n


def objectness_bce(pred_obj: float, target: int):
    if target not in (0, 1):
        raise ValueError(f"objectness target must be 0 or 1, got {target}")
    if not 0 <= pred_obj <= 1:
        raise ValueError(f"objectness must be a probability, got {pred_obj}")
    loss, grad = _bce_terms(np.float64(pred_obj), np.float64(target))
    return float(loss), float(grad)


def focal_loss(scores, gt_class: int, alpha: float = FOCAL_ALPHA, gamma: float = FOCAL_GAMMA):
    """Per-class binary focal loss averaged over classes.

    For class ``k`` with target ``y_k`` (1 only for ``gt_class``):
    ``p_t = p`` if ``y_k`` else ``1 - p``, ``a_t = alpha`` if ``y_k`` else
    ``1 - alpha``, loss ``-a_t (1 - p_t)^gamma log(p_t)``. Scores are clamped
    like :func:`pixel_bce`.
    """
    p = np.atleast_1d(np.asarray(scores, dtype=np.float64))
    if p.ndim != 1:
        raise ValueError("focal loss scores must be a vector")
    if not ((p >= 0) & (p <= 1)).all():
        raise ValueError("focal loss scores must be probabilities in [0, 1]")
    if not (0 <= gt_class < p.size) or int(gt_class) != gt_class:
        raise ValueError(f"class index {gt_class} out of range for {p.size} classes")
    y = np.zeros_like(p)
    y[int(gt_class)] = 1.0
    pc = np.clip(p, CLAMP, 1.0 - CLAMP)
    pt = np.where(y == 1, pc, 1.0 - pc)
    at = np.where(y == 1, alpha, 1.0 - alpha)
    sign = np.where(y == 1, 1.0, -1.0)  # d p_t / d p
    mod = (1.0 - pt) ** gamma
    loss = -at * mod * np.log(pt)
    # d/dp_t of -(1-p_t)^g log p_t = g (1-p_t)^(g-1) log p_t - (1-p_t)^g / p_t
    dpt = at * (gamma * (1.0 - pt) ** (gamma - 1.0) * np.log(pt) - mod / pt) if gamma != 0 else -at / pt
    grad = np.where((p < CLAMP) | (p > 1.0 - CLAMP), 0.0, dpt * sign)
    n = p.size
    return float(loss.sum() / n), grad / n


@dataclass(frozen=True)
class LossWeights:
    lambda_c: float = 2.0
    lambda_s: float = 3.0
    lambda_d: float = 2.0
    lambda_p: float = 5.0

    def __post_init__(self):
        for name, v in vars(self).items():
            if not v >= 0:
                raise ValueError(f"{name} must be non-negative, got {v}")

    @classmethod
    def parse(cls, text: str) -> "LossWeights":
        """``"c,s,d,p"`` in that order."""
        vals = [float(v) for v in text.split(",")]
        if len(vals) != 4:
            raise ValueError(f"expected 4 comma-separated weights (c,s,d,p), got {text!r}")
        return cls(*vals)


@dataclass(frozen=True)
class LossComponents:
    dice: float
    pixel: float
    cls: float
    objectness: float


def total_loss(components: LossComponents, weights: LossWeights = LossWeights()) -> float:
    """``lambda_d L_D + lambda_p L_P + lambda_c L_C + lambda_s L_S``."""
    vals = (components.dice, components.pixel, components.cls, components.objectness)
    if not all(np.isfinite(v) for v in vals):
        raise ValueError(f"non-finite loss component in {components}")
    return (weights.lambda_d * components.dice + weights.lambda_p * components.pixel
            + weights.lambda_c * components.cls + weights.lambda_s * components.objectness)
