"""Deterministic batch/chunk sampling plans and augmentation mask plans.

Plans are pure functions of (seed, step): any trainer that consumes them
sees identical randomness on every platform.  Plans serialize to JSON.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .manifest import Manifest
from .rng import make_rng


class SamplingError(ValueError):
    """Raised for invalid sampling/masking parameters."""


@dataclass(frozen=True)
class SamplingSpec:
    batch_size: int = 100
    chunk_seconds: float = 2.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.batch_size <= 0:
            raise SamplingError("batch_size must be positive")
        if self.chunk_seconds <= 0:
            raise SamplingError("chunk_seconds must be positive")

    def to_dict(self) -> dict:
        return {
            "batch_size": self.batch_size,
            "chunk_seconds": self.chunk_seconds,
            "seed": self.seed,
        }

    @staticmethod
    def from_dict(d: dict) -> "SamplingSpec":
        return SamplingSpec(
            batch_size=d.get("batch_size", 100),
            chunk_seconds=d.get("chunk_seconds", 2.0),
            seed=d.get("seed", 0),
        )


@dataclass(frozen=True)
class BatchItem:
    utterance_id: str
    offset_seconds: float
    repeat_pad: bool = False


@dataclass(frozen=True)
class BatchPlan:
    step: int
    items: tuple[BatchItem, ...]

    def to_dict(self) -> dict:
        return {
            "step": self.step,
            "items": [
                {
                    "utterance_id": it.utterance_id,
                    "offset_seconds": it.offset_seconds,
                    "repeat_pad": it.repeat_pad,
                }
                for it in self.items
            ],
        }


@dataclass(frozen=True)
class MaskSpec:
    mode: str = "specaugment"
    time_mask_count_range: tuple[int, int] = (5, 10)
    time_mask_length: int = 10
    channel_mask_count_range: tuple[int, int] = (1, 3)
    channel_mask_length: int = 4
    channel_fraction: float = 0.10
    time_fraction: float = 0.50

    def __post_init__(self) -> None:
        if self.mode not in ("specaugment", "fraction"):
            raise SamplingError(f"unknown mask mode {self.mode!r}")
        for lo, hi in (self.time_mask_count_range, self.channel_mask_count_range):
            if lo > hi or lo < 0:
                raise SamplingError("mask count range must be non-empty")
        if self.time_mask_length <= 0 or self.channel_mask_length <= 0:
            raise SamplingError("mask lengths must be positive")
        for frac in (self.channel_fraction, self.time_fraction):
            if not 0.0 <= frac <= 1.0:
                raise SamplingError("mask fractions must lie in [0, 1]")

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "time_mask_count_range": list(self.time_mask_count_range),
            "time_mask_length": self.time_mask_length,
            "channel_mask_count_range": list(self.channel_mask_count_range),
            "channel_mask_length": self.channel_mask_length,
            "channel_fraction": self.channel_fraction,
            "time_fraction": self.time_fraction,
        }

    @staticmethod
    def from_dict(d: dict) -> "MaskSpec":
        spec = MaskSpec()
        return MaskSpec(
            mode=d.get("mode", spec.mode),
            time_mask_count_range=tuple(
                d.get("time_mask_count_range", spec.time_mask_count_range)
            ),
            time_mask_length=d.get("time_mask_length", spec.time_mask_length),
            channel_mask_count_range=tuple(
                d.get("channel_mask_count_range", spec.channel_mask_count_range)
            ),
            channel_mask_length=d.get("channel_mask_length", spec.channel_mask_length),
            channel_fraction=d.get("channel_fraction", spec.channel_fraction),
            time_fraction=d.get("time_fraction", spec.time_fraction),
        )


@dataclass(frozen=True)
class MaskPlan:
    shape: tuple[int, int]
    time_masks: tuple[tuple[int, int], ...] = ()
    channel_masks: tuple[tuple[int, int], ...] = ()
    time_indices: tuple[int, ...] = ()
    channel_indices: tuple[int, ...] = ()

    def to_dict(self) -> dict:
        return {
            "shape": list(self.shape),
            "time_masks": [list(mask) for mask in self.time_masks],
            "channel_masks": [list(mask) for mask in self.channel_masks],
            "time_indices": list(self.time_indices),
            "channel_indices": list(self.channel_indices),
        }


def batch_plan(m: Manifest, s: SamplingSpec, step: int) -> BatchPlan:
    """Draw batch_size utterances with replacement, with a uniform chunk
    offset each; utterances shorter than the chunk get offset 0 and a
    repeat-pad annotation."""
    if len(m) == 0:
        raise SamplingError("cannot sample from an empty manifest")
    if step < 0:
        raise SamplingError("step must be non-negative")
    utt_ids = sorted(m.by_id)
    rng = make_rng(s.seed, step)
    picks = rng.integers(0, len(utt_ids), size=s.batch_size)
    items: list[BatchItem] = []
    for pick in picks:
        utt_id = utt_ids[int(pick)]
        duration = m.by_id[utt_id].duration_seconds
        slack = duration - s.chunk_seconds
        if slack < 0:
            items.append(BatchItem(utt_id, 0.0, repeat_pad=True))
        else:
            items.append(BatchItem(utt_id, float(rng.random() * slack)))
    return BatchPlan(step, tuple(items))


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def mask_plan(
    spec: MaskSpec, shape: tuple[int, int], seed: int, step: int
) -> MaskPlan:
    """Span masks with counts drawn from the configured ranges
    (specaugment mode, overlap permitted) or exact per-index fractions of
    each axis (fraction mode)."""
    T, C = shape
    if T <= 0 or C <= 0:
        raise SamplingError("mask plan shape must be positive")
    rng = make_rng(seed, step)
    if spec.mode == "specaugment":
        if spec.time_mask_length > T:
            raise SamplingError(
                f"time mask length {spec.time_mask_length} exceeds T={T}"
            )
        if spec.channel_mask_length > C:
            raise SamplingError(
                f"channel mask length {spec.channel_mask_length} exceeds C={C}"
            )
        n_time = int(rng.integers(spec.time_mask_count_range[0],
                                  spec.time_mask_count_range[1] + 1))
        n_channel = int(rng.integers(spec.channel_mask_count_range[0],
                                     spec.channel_mask_count_range[1] + 1))
        time_masks = tuple(
            (int(rng.integers(0, T - spec.time_mask_length + 1)), spec.time_mask_length)
            for _ in range(n_time)
        )
        channel_masks = tuple(
            (
                int(rng.integers(0, C - spec.channel_mask_length + 1)),
                spec.channel_mask_length,
            )
            for _ in range(n_channel)
        )
        return MaskPlan(shape=(T, C), time_masks=time_masks, channel_masks=channel_masks)
    n_time = _round_half_up(spec.time_fraction * T)
    n_channel = _round_half_up(spec.channel_fraction * C)
    time_idx = tuple(
        sorted(int(i) for i in rng.choice(T, size=n_time, replace=False))
    )
    channel_idx = tuple(
        sorted(int(i) for i in rng.choice(C, size=n_channel, replace=False))
    )
    return MaskPlan(shape=(T, C), time_indices=time_idx, channel_indices=channel_idx)
