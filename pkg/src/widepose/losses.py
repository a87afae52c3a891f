"""Bin classification + expectation regression losses with analytic gradients.

All loss functions accept logits of shape (N,) for a single sample or
(B, N) for a batch; losses are averaged over the batch and the returned
gradient has the logits' shape (already divided by B). With
``reduction="none"`` the per-sample losses are returned instead and the
gradient rows are per-sample (not divided by B).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .angles import wrap_angle

REG_KINDS = ("wrapped", "mse")
CLS_KINDS = ("bce_sigmoid", "ce_softmax")


@dataclass(frozen=True)
class BinConfig:
    """``count`` uniform bins of ``width`` degrees; bin i (1-based) is
    the half-open interval (lower_edge + (i-1)*width, lower_edge + i*width]."""

    count: int
    width: float = 3.0
    lower_edge: float = -180.0

    def __post_init__(self):
        if self.count <= 0 or not self.width > 0:
            raise ValueError(f"invalid bin layout: {self}")

    @property
    def upper_edge(self) -> float:
        return self.lower_edge + self.count * self.width

    @property
    def wraps(self) -> bool:
        """True when the bins tile the whole circle (yaw)."""
        return self.count * self.width == 360.0

    @property
    def centers(self) -> np.ndarray:
        i = np.arange(1, self.count + 1, dtype=float)
        return self.lower_edge + self.width * (i - 0.5)


YAW_BINS = BinConfig(120, 3.0, -180.0)
PITCH_BINS = BinConfig(66, 3.0, -99.0)
ROLL_BINS = PITCH_BINS


@dataclass(frozen=True)
class LossWeights:
    alpha: float = 1.0
    beta: float = 1.0

    def __post_init__(self):
        for v in (self.alpha, self.beta):
            if not (math.isfinite(v) and v >= 0):
                raise ValueError(f"loss weights must be finite and >= 0: {self}")


def angle_to_bin(theta, cfg: BinConfig):
    """1-based bin index of ``theta``. Full-circle layouts wrap first."""
    t = np.asarray(theta, dtype=float)
    if cfg.wraps:
        t = np.asarray(wrap_angle(t), dtype=float)
    elif not np.all((t > cfg.lower_edge) & (t <= cfg.upper_edge)):
        raise ValueError(
            f"angle outside ({cfg.lower_edge}, {cfg.upper_edge}]: {theta!r}"
        )
    idx = np.ceil((t - cfg.lower_edge) / cfg.width).astype(int)
    idx = np.clip(idx, 1, cfg.count)
    if idx.ndim == 0:
        return int(idx)
    return idx


def softmax(logits, axis: int = -1) -> np.ndarray:
    z = np.asarray(logits, dtype=float)
    z = z - np.max(z, axis=axis, keepdims=True)
    e = np.exp(z)
    return e / np.sum(e, axis=axis, keepdims=True)


def decode_expectation(probs, cfg: BinConfig):
    """Probability-weighted mean of bin centers."""
    p = np.asarray(probs, dtype=float)
    if p.shape[-1] != cfg.count:
        raise ValueError(f"expected {cfg.count} probabilities, got {p.shape[-1]}")
    if np.any(p < 0) or np.any(np.abs(p.sum(axis=-1) - 1.0) > 1e-6):
        raise ValueError("probabilities must be non-negative and sum to 1")
    theta = p @ cfg.centers
    if np.ndim(theta) == 0:
        return float(theta)
    return theta


def decode_logits(logits, cfg: BinConfig):
    return decode_expectation(softmax(logits), cfg)


def decode_with_grad(logits, cfg: BinConfig):
    """Decoded angle and its Jacobian w.r.t. the logits of each sample."""
    p = softmax(logits)
    c = cfg.centers
    theta = p @ c
    grad = p * (c - theta[..., None])
    return theta, grad


def _pair(pred, true):
    p = np.asarray(pred, dtype=float).ravel()
    t = np.asarray(true, dtype=float).ravel()
    if p.size == 0 or p.size != t.size:
        raise ValueError(f"need equal nonzero lengths, got {p.size} and {t.size}")
    return p, t


def wrapped_sq(pred, true) -> np.ndarray:
    """Elementwise min(|d|^2, (360 - |d|)^2)."""
    d = np.abs(np.asarray(pred, dtype=float) - np.asarray(true, dtype=float)) % 360.0
    return np.minimum(d * d, (360.0 - d) ** 2)


def wrapped_loss(pred, true) -> float:
    """Mean of min(|d|^2, (360 - |d|)^2) over pairs."""
    p, t = _pair(pred, true)
    return float(np.mean(wrapped_sq(p, t)))


def mse_loss(pred, true) -> float:
    p, t = _pair(pred, true)
    return float(np.mean((p - t) ** 2))


def _regression_terms(theta, true, kind):
    """Per-sample loss and d loss / d theta."""
    delta = theta - true
    if kind == "mse":
        return delta * delta, 2.0 * delta
    if kind != "wrapped":
        raise ValueError(f"unknown regression kind {kind!r}")
    m = np.abs(delta) % 360.0
    sign = np.sign(delta)
    lower = m <= 180.0  # the |d|^2 branch wins ties
    loss = np.where(lower, m * m, (360.0 - m) ** 2)
    dloss = np.where(lower, 2.0 * m * sign, -2.0 * (360.0 - m) * sign)
    return loss, dloss


def _as_batch(logits):
    z = np.asarray(logits, dtype=float)
    single = z.ndim == 1
    return (z[None, :] if single else z), single


def _reduce(loss, grad, single, reduction):
    if reduction == "none":
        b = loss.shape[0]
        grad = grad * b
        return (loss[0], grad[0]) if single else (loss, grad)
    if reduction != "mean":
        raise ValueError(f"unknown reduction {reduction!r}")
    return float(np.mean(loss)), (grad[0] if single else grad)


def regression_loss_grad(logits, true, cfg: BinConfig, kind: str = "wrapped", reduction: str = "mean"):
    """Regression loss on the softmax-expectation decode, with gradient."""
    z, single = _as_batch(logits)
    t = np.broadcast_to(np.asarray(true, dtype=float), z.shape[:1])
    theta, jac = decode_with_grad(z, cfg)
    loss, dloss = _regression_terms(theta, t, kind)
    b = z.shape[0]
    grad = (dloss / b)[:, None] * jac
    return _reduce(loss, grad, single, reduction)


def classification_loss_grad(logits, target_bin, kind: str = "bce_sigmoid", reduction: str = "mean"):
    """Classification loss against a 1-based target bin, with gradient.

    ``bce_sigmoid`` averages the per-bin binary cross-entropies over the
    N bins; ``ce_softmax`` is the usual softmax cross-entropy.
    """
    z, single = _as_batch(logits)
    b, n = z.shape
    target = np.broadcast_to(np.asarray(target_bin), (b,))
    if not np.issubdtype(target.dtype, np.integer) or np.any(target < 1) or np.any(target > n):
        raise ValueError(f"target bin must be an integer in [1, {n}]: {target_bin!r}")
    onehot = np.zeros_like(z)
    onehot[np.arange(b), target - 1] = 1.0

    if kind == "ce_softmax":
        shifted = z - np.max(z, axis=1, keepdims=True)
        log_norm = np.log(np.sum(np.exp(shifted), axis=1))
        loss = log_norm - shifted[np.arange(b), target - 1]
        grad = (softmax(z) - onehot) / b
    elif kind == "bce_sigmoid":
        # softplus(z) - y*z == y*softplus(-z) + (1-y)*softplus(z)
        e = np.exp(-np.abs(z))
        softplus = np.maximum(z, 0.0) + np.log1p(e)
        loss = (softplus - onehot * z).mean(axis=1)
        sig = np.where(z >= 0.0, 1.0, e) / (1.0 + e)
        grad = (sig - onehot) / (n * b)
    else:
        raise ValueError(f"unknown classification kind {kind!r}")
    return _reduce(loss, grad, single, reduction)


def combined_loss(
    logits,
    true,
    cfg: BinConfig,
    weights: LossWeights = LossWeights(),
    reg_kind: str = "wrapped",
    cls_kind: str = "bce_sigmoid",
    reduction: str = "mean",
):
    """alpha * regression + beta * classification for one angle."""
    target = angle_to_bin(true, cfg)
    reg, g_reg = regression_loss_grad(logits, true, cfg, reg_kind, reduction)
    cls, g_cls = classification_loss_grad(logits, target, cls_kind, reduction)
    loss = weights.alpha * reg + weights.beta * cls
    return loss, weights.alpha * g_reg + weights.beta * g_cls


def loss_curve(true: float, preds) -> tuple[np.ndarray, np.ndarray]:
    """Per-prediction wrapped and squared losses for a fixed true angle."""
    p = np.asarray(preds, dtype=float)
    return wrapped_sq(p, true), (p - true) ** 2
