"""Synthetic feature generator standing in for real audio.

Every utterance maps to a fixed 48-dimensional vector: the first half
carries a per-speaker Gaussian cluster mean, the second half a
per-session offset, plus per-utterance noise on all dimensions.  All
three components are seeded from stable hashes of the respective ids,
so features are reproducible across processes and platforms.

Because the session offset lives in dedicated dimensions, a model
trained on utterances that share sessions can latch onto session
identity instead of speaker identity; evaluation on unseen sessions
then degrades.  That makes session variability in the training set
measurable at toy scale.
"""

from __future__ import annotations

import csv
import hashlib
from dataclasses import dataclass

import numpy as np

FEATURE_DIM = 48
_HALF = FEATURE_DIM // 2


@dataclass(frozen=True)
class FeatureParams:
    speaker_scale: float = 1.0
    session_scale: float = 1.0
    noise_scale: float = 0.4


def _hash_rng(*parts: str) -> np.random.Generator:
    digest = hashlib.sha256("\x1f".join(parts).encode("utf-8")).digest()
    seed = int.from_bytes(digest[:8], "little")
    return np.random.Generator(np.random.PCG64(seed))


def utterance_feature(
    utterance_id: str,
    speaker_id: str,
    session_id: str,
    p: FeatureParams = FeatureParams(),
) -> np.ndarray:
    vec = np.zeros(FEATURE_DIM)
    vec[:_HALF] = p.speaker_scale * _hash_rng("speaker", speaker_id).normal(size=_HALF)
    vec[_HALF:] = p.session_scale * _hash_rng("session", session_id).normal(size=_HALF)
    vec += p.noise_scale * _hash_rng("utterance", utterance_id).normal(size=FEATURE_DIM)
    return vec


def read_manifest_csv(path: str) -> list[dict]:
    """Rows of the documented manifest CSV: utterance_id, speaker_id,
    session_id, duration_seconds, gender[, audio_path]."""
    with open(path, "r", encoding="utf-8", newline="") as f:
        rows = list(csv.DictReader(f))
    required = {"utterance_id", "speaker_id", "session_id"}
    for row in rows:
        missing = required - set(k for k, v in row.items() if v)
        if missing:
            raise ValueError(f"manifest {path} is missing columns {sorted(missing)}")
    if not rows:
        raise ValueError(f"manifest {path} is empty")
    return rows
