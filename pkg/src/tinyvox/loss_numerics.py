"""Additive angular margin softmax: forward logits, loss, and analytic
gradients with respect to raw (un-normalized) embeddings and weights.

Target-class logit is scale * cos(theta + margin); when theta + margin
would pass pi (cos(theta) <= -cos(margin)) the standard monotone
surrogate scale * (cos(theta) - margin * sin(margin)) is used.  All
internal math is double precision.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_SIN_FLOOR = 1e-12


class LossError(ValueError):
    """Raised for invalid loss inputs."""


@dataclass(frozen=True)
class LossParams:
    margin: float = 0.2
    scale: float = 30.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.margin < np.pi / 2:
            raise LossError("margin must lie in [0, pi/2)")
        if self.scale <= 0:
            raise LossError("scale must be positive")

    def to_dict(self) -> dict:
        return {"margin": self.margin, "scale": self.scale}

    @staticmethod
    def from_dict(d: dict) -> "LossParams":
        return LossParams(margin=d.get("margin", 0.2), scale=d.get("scale", 30.0))


@dataclass(frozen=True)
class AamInput:
    embeddings: np.ndarray  # (N, D)
    class_weights: np.ndarray  # (K, D)
    labels: np.ndarray  # (N,)

    def __post_init__(self) -> None:
        emb = np.asarray(self.embeddings, dtype=np.float64)
        wts = np.asarray(self.class_weights, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.int64)
        if emb.ndim != 2 or wts.ndim != 2 or emb.shape[1] != wts.shape[1]:
            raise LossError("embeddings and class_weights must be (N,D) and (K,D)")
        if labels.shape != (emb.shape[0],):
            raise LossError("labels must have one entry per embedding row")
        if np.any((labels < 0) | (labels >= wts.shape[0])):
            raise LossError("label out of range")
        if np.any(np.linalg.norm(emb, axis=1) == 0):
            raise LossError("zero-norm embedding row")
        if np.any(np.linalg.norm(wts, axis=1) == 0):
            raise LossError("zero-norm class weight row")
        object.__setattr__(self, "embeddings", emb)
        object.__setattr__(self, "class_weights", wts)
        object.__setattr__(self, "labels", labels)


def _cosines(x: AamInput) -> tuple[np.ndarray, ...]:
    norm_e = np.linalg.norm(x.embeddings, axis=1, keepdims=True)
    norm_w = np.linalg.norm(x.class_weights, axis=1, keepdims=True)
    e_hat = x.embeddings / norm_e
    w_hat = x.class_weights / norm_w
    cos = np.clip(e_hat @ w_hat.T, -1.0, 1.0)
    return cos, e_hat, w_hat, norm_e[:, 0], norm_w[:, 0]


def _target_logit(cos_t: np.ndarray, p: LossParams) -> tuple[np.ndarray, np.ndarray]:
    """Margin-shifted target logits (pre-scale) and their d/dcos."""
    sin_t = np.sqrt(np.maximum(1.0 - cos_t**2, 0.0))
    cos_m, sin_m = np.cos(p.margin), np.sin(p.margin)
    easy = cos_t > -cos_m
    shifted = np.where(
        easy, cos_t * cos_m - sin_t * sin_m, cos_t - p.margin * sin_m
    )
    deriv = np.where(
        easy, cos_m + sin_m * cos_t / np.maximum(sin_t, _SIN_FLOOR), 1.0
    )
    return shifted, deriv


def aam_logits(x: AamInput, p: LossParams) -> np.ndarray:
    cos, _, _, _, _ = _cosines(x)
    n = np.arange(len(x.labels))
    shifted, _ = _target_logit(cos[n, x.labels], p)
    logits = cos.copy()
    logits[n, x.labels] = shifted
    return p.scale * logits


def aam_loss_and_grad(
    x: AamInput, p: LossParams
) -> tuple[float, np.ndarray, np.ndarray]:
    """Mean softmax cross-entropy over the margin-shifted logits, plus
    exact gradients through the angle transform and row normalization."""
    cos, e_hat, w_hat, norm_e, norm_w = _cosines(x)
    n_rows = len(x.labels)
    rows = np.arange(n_rows)
    shifted, deriv = _target_logit(cos[rows, x.labels], p)
    logits = cos.copy()
    logits[rows, x.labels] = shifted
    logits *= p.scale

    # stable log-softmax cross-entropy, mean over the batch
    peak = logits.max(axis=1, keepdims=True)
    log_z = peak[:, 0] + np.log(np.exp(logits - peak).sum(axis=1))
    loss = float(np.mean(log_z - logits[rows, x.labels]))

    softmax = np.exp(logits - log_z[:, None])
    g_logits = softmax
    g_logits[rows, x.labels] -= 1.0
    g_logits /= n_rows

    # chain rule into the cosine matrix: non-target columns pass straight
    # through, the target column picks up the angle-transform derivative
    g_cos = g_logits * p.scale
    g_cos[rows, x.labels] *= deriv

    # d cos_nj / d e_n = (w_hat_j - cos_nj * e_hat_n) / ||e_n||
    row_dot = (g_cos * cos).sum(axis=1, keepdims=True)
    grad_e = (g_cos @ w_hat - row_dot * e_hat) / norm_e[:, None]
    col_dot = (g_cos * cos).sum(axis=0)[:, None]
    grad_w = (g_cos.T @ e_hat - col_dot * w_hat) / norm_w[:, None]
    return loss, grad_e, grad_w
