"""Cosine scoring over trial lists and equal-error-rate computation.

EER is read off the ROC traced by sweeping an accept threshold
(accept when score >= threshold) over the distinct score values, with
linear interpolation between adjacent operating points; tied scores
collapse into a single operating point.  All arithmetic is double
precision regardless of storage precision.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import IO, Mapping, Sequence

import numpy as np

from .trials import TARGET, Trial, TrialList

EMB_BINARY_MAGIC = b"EMB1"


class ScoringError(ValueError):
    """Raised for malformed embeddings or unusable score sets."""


@dataclass(frozen=True)
class EmbeddingSet:
    dimension: int
    entries: Mapping[str, np.ndarray]

    def __post_init__(self) -> None:
        if self.dimension <= 0:
            raise ScoringError("embedding dimension must be positive")
        for utt_id, vec in self.entries.items():
            arr = np.asarray(vec, dtype=np.float64)
            if arr.shape != (self.dimension,):
                raise ScoringError(
                    f"embedding for {utt_id!r} has shape {arr.shape}, "
                    f"expected ({self.dimension},)"
                )
            if not np.all(np.isfinite(arr)):
                raise ScoringError(f"non-finite embedding for {utt_id!r}")
            if not np.any(arr):
                raise ScoringError(f"zero embedding for {utt_id!r}")


@dataclass(frozen=True)
class ScoredTrial:
    trial: Trial
    score: float

    def __post_init__(self) -> None:
        if not -1.0 - 1e-9 <= self.score <= 1.0 + 1e-9:
            raise ScoringError(f"cosine score {self.score} outside [-1, 1]")


def cosine_score(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ScoringError(f"dimension mismatch: {a.shape} vs {b.shape}")
    norm_a = np.linalg.norm(a)
    norm_b = np.linalg.norm(b)
    if norm_a == 0.0 or norm_b == 0.0:
        raise ScoringError("cosine score of a zero vector is undefined")
    return float(np.dot(a, b) / (norm_a * norm_b))


def score_trials(e: EmbeddingSet, t: TrialList) -> list[ScoredTrial]:
    missing = sorted(
        {u for trial in t.trials for u in trial.pair if u not in e.entries}
    )
    if missing:
        raise ScoringError(f"missing embeddings for utterance ids {missing}")
    return [
        ScoredTrial(
            trial,
            cosine_score(e.entries[trial.utterance_a], e.entries[trial.utterance_b]),
        )
        for trial in t.trials
    ]


def eer_from_scores(
    scores: Sequence[float], is_target: Sequence[bool]
) -> tuple[float, float]:
    """EER and interpolated threshold from raw scores and labels."""
    scores = np.asarray(scores, dtype=np.float64)
    is_target = np.asarray(is_target, dtype=bool)
    tar = np.sort(scores[is_target])
    non = np.sort(scores[~is_target])
    if len(tar) == 0 or len(non) == 0:
        raise ScoringError("need at least one target and one nontarget score")

    thresholds = np.unique(scores)
    # operating point at each threshold t: accept iff score >= t
    far = (len(non) - np.searchsorted(non, thresholds, side="left")) / len(non)
    frr = np.searchsorted(tar, thresholds, side="left") / len(tar)
    # past-the-end point: reject everything
    far = np.append(far, 0.0)
    frr = np.append(frr, 1.0)
    thresholds = np.append(thresholds, thresholds[-1])

    diff = far - frr  # non-increasing along the sweep
    k = int(np.argmax(diff <= 0.0))
    if diff[k] == 0.0:
        return float(far[k]), float(thresholds[k])
    frac = diff[k - 1] / (diff[k - 1] - diff[k])
    eer = far[k - 1] + frac * (far[k] - far[k - 1])
    threshold = thresholds[k - 1] + frac * (thresholds[k] - thresholds[k - 1])
    return float(eer), float(threshold)


def compute_eer(scored: Sequence[ScoredTrial]) -> tuple[float, float]:
    scores = [st.score for st in scored]
    labels = [st.trial.label == TARGET for st in scored]
    return eer_from_scores(scores, labels)


def write_embeddings_text(e: EmbeddingSet, dest: IO[str]) -> None:
    dest.write(f"dim {e.dimension}\n")
    for utt_id in sorted(e.entries):
        values = " ".join(repr(float(v)) for v in e.entries[utt_id])
        dest.write(f"{utt_id} {values}\n")


def read_embeddings_text(source: IO[str]) -> EmbeddingSet:
    header = source.readline().split()
    if len(header) != 2 or header[0] != "dim":
        raise ScoringError("embedding text file must start with 'dim <D>'")
    dim = int(header[1])
    entries: dict[str, np.ndarray] = {}
    for line_no, line in enumerate(source, start=2):
        parts = line.split()
        if not parts:
            continue
        if len(parts) != dim + 1:
            raise ScoringError(
                f"line {line_no}: expected {dim} values, got {len(parts) - 1}"
            )
        entries[parts[0]] = np.array([float(v) for v in parts[1:]], dtype=np.float64)
    return EmbeddingSet(dim, entries)


def write_embeddings_binary(e: EmbeddingSet, dest: IO[bytes]) -> None:
    """Compact variant: magic 'EMB1', u32 dim, then per entry a u32 id
    length, the UTF-8 id bytes, and dim little-endian f32 values."""
    dest.write(EMB_BINARY_MAGIC)
    dest.write(struct.pack("<I", e.dimension))
    for utt_id in sorted(e.entries):
        id_bytes = utt_id.encode("utf-8")
        dest.write(struct.pack("<I", len(id_bytes)))
        dest.write(id_bytes)
        dest.write(
            np.asarray(e.entries[utt_id], dtype="<f4").tobytes()
        )


def read_embeddings_binary(source: IO[bytes]) -> EmbeddingSet:
    magic = source.read(4)
    if magic != EMB_BINARY_MAGIC:
        raise ScoringError(f"bad magic bytes {magic!r}")
    (dim,) = struct.unpack("<I", source.read(4))
    entries: dict[str, np.ndarray] = {}
    while True:
        raw_len = source.read(4)
        if not raw_len:
            break
        (id_len,) = struct.unpack("<I", raw_len)
        utt_id = source.read(id_len).decode("utf-8")
        vec_bytes = source.read(4 * dim)
        if len(vec_bytes) != 4 * dim:
            raise ScoringError(f"truncated embedding for {utt_id!r}")
        entries[utt_id] = np.frombuffer(vec_bytes, dtype="<f4").astype(np.float64)
    return EmbeddingSet(dim, entries)


def read_embeddings_path(path: str) -> EmbeddingSet:
    with open(path, "rb") as probe:
        magic = probe.read(4)
    if magic == EMB_BINARY_MAGIC:
        with open(path, "rb") as f:
            return read_embeddings_binary(f)
    with open(path, "r", encoding="utf-8") as f:
        return read_embeddings_text(f)


def write_embeddings_path(e: EmbeddingSet, path: str, binary: bool = False) -> None:
    if binary:
        with open(path, "wb") as f:
            write_embeddings_binary(e, f)
    else:
        with open(path, "w", encoding="utf-8", newline="") as f:
            write_embeddings_text(e, f)
