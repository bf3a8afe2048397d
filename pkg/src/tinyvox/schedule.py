"""Learning-rate curves and parameter-freezing timelines.

Supported curves: a cyclical triangular policy whose per-cycle peak
halves every cycle (rising linearly from the floor to the peak at
mid-cycle, falling back to the floor at cycle end), a one-cycle variant,
a constant curve, and exponential decay that lands exactly on the floor
at the final step.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

SCHEDULE_KINDS = ("triangular2", "constant", "exp_decay", "one_cycle")


class ScheduleError(ValueError):
    """Raised for invalid schedule parameters or out-of-range queries."""


@dataclass(frozen=True)
class ScheduleSpec:
    kind: str
    max_lr: float
    n_steps: int
    min_lr: float = 1e-8
    n_cycles: int = 4

    def __post_init__(self) -> None:
        if self.kind not in SCHEDULE_KINDS:
            raise ScheduleError(f"unknown schedule kind {self.kind!r}")
        if self.max_lr <= 0 or self.min_lr <= 0:
            raise ScheduleError("learning rates must be positive")
        if self.min_lr > self.max_lr:
            raise ScheduleError("min_lr must not exceed max_lr")
        if self.n_steps <= 0:
            raise ScheduleError("n_steps must be positive")
        if self.n_cycles <= 0:
            raise ScheduleError("n_cycles must be positive")
        if self.kind == "one_cycle":
            object.__setattr__(self, "n_cycles", 1)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "max_lr": self.max_lr,
            "min_lr": self.min_lr,
            "n_steps": self.n_steps,
            "n_cycles": self.n_cycles,
        }

    @staticmethod
    def from_dict(d: dict) -> "ScheduleSpec":
        return ScheduleSpec(
            kind=d["kind"],
            max_lr=d["max_lr"],
            min_lr=d.get("min_lr", 1e-8),
            n_steps=d["n_steps"],
            n_cycles=d.get("n_cycles", 1 if d["kind"] == "one_cycle" else 4),
        )


@dataclass(frozen=True)
class FreezeSpec:
    freeze_all_until_step: int = 0
    always_trainable_groups: frozenset[str] = frozenset()
    groups_frozen_entire_run: frozenset[str] = frozenset()

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "always_trainable_groups", frozenset(self.always_trainable_groups)
        )
        object.__setattr__(
            self, "groups_frozen_entire_run", frozenset(self.groups_frozen_entire_run)
        )
        if self.freeze_all_until_step < 0:
            raise ScheduleError("freeze_all_until_step must be non-negative")
        if self.always_trainable_groups & self.groups_frozen_entire_run:
            raise ScheduleError(
                "a group cannot be both always trainable and frozen for the run"
            )

    def to_dict(self) -> dict:
        return {
            "freeze_all_until_step": self.freeze_all_until_step,
            "always_trainable_groups": sorted(self.always_trainable_groups),
            "groups_frozen_entire_run": sorted(self.groups_frozen_entire_run),
        }

    @staticmethod
    def from_dict(d: dict) -> "FreezeSpec":
        return FreezeSpec(
            freeze_all_until_step=d.get("freeze_all_until_step", 0),
            always_trainable_groups=frozenset(d.get("always_trainable_groups", [])),
            groups_frozen_entire_run=frozenset(d.get("groups_frozen_entire_run", [])),
        )


def _cycle_geometry(s: ScheduleSpec, step: int) -> tuple[int, int, int]:
    """(cycle index, position within cycle, cycle length); the final
    cycle absorbs any remainder when n_cycles does not divide n_steps."""
    base_len = s.n_steps // s.n_cycles
    cycle = min(step // base_len, s.n_cycles - 1)
    pos = step - cycle * base_len
    length = base_len if cycle < s.n_cycles - 1 else s.n_steps - (s.n_cycles - 1) * base_len
    return cycle, pos, length


def lr_at(s: ScheduleSpec, step: int) -> float:
    if not 0 <= step < s.n_steps:
        raise ScheduleError(f"step {step} outside [0, {s.n_steps})")
    if s.kind == "constant":
        return s.max_lr
    if s.kind == "exp_decay":
        if s.n_steps == 1:
            return s.max_lr
        return s.max_lr * (s.min_lr / s.max_lr) ** (step / (s.n_steps - 1))
    # triangular cyclic (4-cycle default or one-cycle)
    cycle, pos, length = _cycle_geometry(s, step)
    peak = max(s.max_lr / 2**cycle, s.min_lr)
    half = length // 2
    if half == 0:
        return peak
    if pos <= half:
        frac = pos / half
    else:
        frac = (length - pos) / (length - half)
    # convex form so frac == 1 lands exactly on the peak and frac == 0 on the floor
    return s.min_lr * (1.0 - frac) + peak * frac


def trainable_groups_at(
    f: FreezeSpec, step: int, all_groups: Iterable[str]
) -> frozenset[str]:
    groups = frozenset(all_groups)
    unknown = (f.always_trainable_groups | f.groups_frozen_entire_run) - groups
    if unknown:
        raise ScheduleError(f"unknown parameter groups {sorted(unknown)}")
    if step < f.freeze_all_until_step:
        return f.always_trainable_groups
    return groups - f.groups_frozen_entire_run


def export_curve(s: ScheduleSpec, stride: int) -> list[tuple[int, float]]:
    """Sample the curve at steps 0, stride, 2*stride, ... plus the final step."""
    if stride < 1:
        raise ScheduleError("stride must be >= 1")
    steps = list(range(0, s.n_steps, stride))
    if steps[-1] != s.n_steps - 1:
        steps.append(s.n_steps - 1)
    return [(step, lr_at(s, step)) for step in steps]
