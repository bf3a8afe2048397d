"""Linear embedding model with an additive angular margin classifier.

The model is deliberately tiny: one projection from the synthetic
feature space to a 32-dimensional embedding, plus one class weight
matrix.  Parameters are grouped as "projection" and "classifier" so the
freeze settings of a run config have something to act on.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

EMBEDDING_DIM = 32

PARAMETER_GROUPS = ("projection", "classifier")


@dataclass
class ToyModel:
    projection: np.ndarray  # (EMBEDDING_DIM, feature_dim)
    classifier: np.ndarray  # (n_classes, EMBEDDING_DIM)

    @staticmethod
    def initial(
        feature_dim: int, n_classes: int, rng: np.random.Generator
    ) -> "ToyModel":
        return ToyModel(
            projection=rng.normal(size=(EMBEDDING_DIM, feature_dim))
            / np.sqrt(feature_dim),
            classifier=rng.normal(size=(n_classes, EMBEDDING_DIM))
            / np.sqrt(EMBEDDING_DIM),
        )

    def embed(self, features: np.ndarray) -> np.ndarray:
        return features @ self.projection.T

    def copy(self) -> "ToyModel":
        return ToyModel(self.projection.copy(), self.classifier.copy())


def aam_loss_and_grads(
    embeddings: np.ndarray,
    classifier: np.ndarray,
    labels: np.ndarray,
    margin: float,
    scale: float,
) -> tuple[float, np.ndarray, np.ndarray]:
    """Mean additive-angular-margin cross-entropy and gradients with
    respect to the raw embeddings and classifier rows.

    The target-class logit is scale * cos(theta + margin); once the
    shifted angle would pass pi the monotone surrogate
    scale * (cos(theta) - margin * sin(margin)) takes over.
    """
    n, _ = embeddings.shape
    norm_e = np.linalg.norm(embeddings, axis=1, keepdims=True)
    norm_c = np.linalg.norm(classifier, axis=1, keepdims=True)
    e_hat = embeddings / norm_e
    c_hat = classifier / norm_c
    cos = np.clip(e_hat @ c_hat.T, -1.0, 1.0)

    rows = np.arange(n)
    cos_t = cos[rows, labels]
    sin_t = np.sqrt(np.maximum(1.0 - cos_t**2, 0.0))
    cos_m, sin_m = np.cos(margin), np.sin(margin)
    easy = cos_t > -cos_m
    shifted = np.where(easy, cos_t * cos_m - sin_t * sin_m, cos_t - margin * sin_m)
    dshifted = np.where(
        easy, cos_m + sin_m * cos_t / np.maximum(sin_t, 1e-12), 1.0
    )

    logits = scale * cos
    logits[rows, labels] = scale * shifted
    peak = logits.max(axis=1, keepdims=True)
    log_z = peak[:, 0] + np.log(np.exp(logits - peak).sum(axis=1))
    loss = float(np.mean(log_z - logits[rows, labels]))

    g = np.exp(logits - log_z[:, None])
    g[rows, labels] -= 1.0
    g *= scale / n
    g[rows, labels] *= dshifted

    g_dot_e = (g * cos).sum(axis=1, keepdims=True)
    grad_e = (g @ c_hat - g_dot_e * e_hat) / norm_e
    g_dot_c = (g * cos).sum(axis=0)[:, None]
    grad_c = (g.T @ e_hat - g_dot_c * c_hat) / norm_c
    return loss, grad_e, grad_c


@dataclass
class AdamState:
    """Standard Adam moments, one pair per parameter group."""

    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    def update(self, name: str, param: np.ndarray, grad: np.ndarray, lr: float) -> None:
        if name not in self.m:
            self.m[name] = np.zeros_like(param)
            self.v[name] = np.zeros_like(param)
        self.m[name] = self.beta1 * self.m[name] + (1 - self.beta1) * grad
        self.v[name] = self.beta2 * self.v[name] + (1 - self.beta2) * grad**2
        m_hat = self.m[name] / (1 - self.beta1**self.t)
        v_hat = self.v[name] / (1 - self.beta2**self.t)
        param -= lr * m_hat / (np.sqrt(v_hat) + self.eps)
