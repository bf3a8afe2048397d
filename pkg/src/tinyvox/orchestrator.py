"""File-protocol driver for external trainers.

The contract: the orchestrator writes a run-config JSON file, invokes
``<trainer_command> <run_config.json> <output_dir>``, and parses the
``report.json`` the trainer leaves in the output directory.  On top of
single runs it provides the two-phase learning-rate search, the
steps x seeds experiment matrix, and the ablation configuration suite.
"""

from __future__ import annotations

import json
import math
import shlex
import subprocess
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Sequence

from .loss_numerics import LossParams
from .sampling import MaskSpec, SamplingSpec
from .schedule import FreezeSpec, ScheduleSpec

PHASE2_MANTISSAS = (1.78, 3.16, 5.62)


class OrchestratorError(ValueError):
    """Raised for invalid configurations or unusable search inputs."""


@dataclass(frozen=True)
class ValidationCadence:
    mode: str  # "every_k_steps" | "every_epoch"
    k: int | None = None

    def __post_init__(self) -> None:
        if self.mode not in ("every_k_steps", "every_epoch"):
            raise OrchestratorError(f"unknown validation cadence {self.mode!r}")
        if self.mode == "every_k_steps" and (self.k is None or self.k <= 0):
            raise OrchestratorError("every_k_steps cadence needs k > 0")

    def to_dict(self) -> dict:
        d: dict = {"mode": self.mode}
        if self.k is not None:
            d["k"] = self.k
        return d

    @staticmethod
    def from_dict(d: dict) -> "ValidationCadence":
        return ValidationCadence(mode=d["mode"], k=d.get("k"))


@dataclass(frozen=True)
class RegularizationFlags:
    layerdrop: float = 0.1
    dropout: float = 0.1
    masking_enabled: bool = True

    def to_dict(self) -> dict:
        return {
            "layerdrop": self.layerdrop,
            "dropout": self.dropout,
            "masking_enabled": self.masking_enabled,
        }

    @staticmethod
    def from_dict(d: dict) -> "RegularizationFlags":
        return RegularizationFlags(
            layerdrop=d.get("layerdrop", 0.1),
            dropout=d.get("dropout", 0.1),
            masking_enabled=d.get("masking_enabled", True),
        )


@dataclass(frozen=True)
class RunConfig:
    dataset_manifest_path: str
    validation_manifest_path: str
    validation_trials_path: str
    dev_manifest_path: str
    dev_trials_path: str
    schedule: ScheduleSpec
    freeze: FreezeSpec
    loss: LossParams
    sampling: SamplingSpec
    masking: MaskSpec
    n_steps: int
    seed: int
    validation_cadence: ValidationCadence
    regularization_flags: RegularizationFlags
    weights_init: str
    trainer_command: str

    def __post_init__(self) -> None:
        for name in (
            "dataset_manifest_path",
            "validation_manifest_path",
            "validation_trials_path",
            "dev_manifest_path",
            "dev_trials_path",
        ):
            if not getattr(self, name):
                raise OrchestratorError(f"{name} must be non-empty")
        if self.n_steps <= 0:
            raise OrchestratorError("n_steps must be positive")
        if self.schedule.n_steps != self.n_steps:
            raise OrchestratorError(
                "schedule.n_steps must equal the run's n_steps"
            )
        if self.weights_init not in ("pretrained", "random"):
            raise OrchestratorError(f"unknown weights_init {self.weights_init!r}")
        if not self.trainer_command:
            raise OrchestratorError("trainer_command must be non-empty")

    def to_dict(self) -> dict:
        return {
            "dataset_manifest_path": self.dataset_manifest_path,
            "validation_manifest_path": self.validation_manifest_path,
            "validation_trials_path": self.validation_trials_path,
            "dev_manifest_path": self.dev_manifest_path,
            "dev_trials_path": self.dev_trials_path,
            "schedule": self.schedule.to_dict(),
            "freeze": self.freeze.to_dict(),
            "loss": self.loss.to_dict(),
            "sampling": self.sampling.to_dict(),
            "masking": self.masking.to_dict(),
            "n_steps": self.n_steps,
            "seed": self.seed,
            "validation_cadence": self.validation_cadence.to_dict(),
            "regularization_flags": self.regularization_flags.to_dict(),
            "weights_init": self.weights_init,
            "trainer_command": self.trainer_command,
        }

    @staticmethod
    def from_dict(d: dict) -> "RunConfig":
        return RunConfig(
            dataset_manifest_path=d["dataset_manifest_path"],
            validation_manifest_path=d["validation_manifest_path"],
            validation_trials_path=d["validation_trials_path"],
            dev_manifest_path=d["dev_manifest_path"],
            dev_trials_path=d["dev_trials_path"],
            schedule=ScheduleSpec.from_dict(d["schedule"]),
            freeze=FreezeSpec.from_dict(d["freeze"]),
            loss=LossParams.from_dict(d["loss"]),
            sampling=SamplingSpec.from_dict(d["sampling"]),
            masking=MaskSpec.from_dict(d["masking"]),
            n_steps=d["n_steps"],
            seed=d["seed"],
            validation_cadence=ValidationCadence.from_dict(d["validation_cadence"]),
            regularization_flags=RegularizationFlags.from_dict(
                d["regularization_flags"]
            ),
            weights_init=d["weights_init"],
            trainer_command=d["trainer_command"],
        )

    def with_max_lr(self, max_lr: float) -> "RunConfig":
        return replace(self, schedule=replace(self.schedule, max_lr=max_lr))

    def with_steps(self, n_steps: int) -> "RunConfig":
        return replace(
            self, n_steps=n_steps, schedule=replace(self.schedule, n_steps=n_steps)
        )


@dataclass(frozen=True)
class RunReport:
    status: str
    best_validation_eer: float = math.inf
    best_checkpoint_step: int = -1
    dev_eer: float = math.inf
    history: tuple[tuple[int, float], ...] = ()
    embeddings_path: str | None = None
    error: str | None = None

    def to_dict(self) -> dict:
        d: dict = {
            "status": self.status,
            "best_validation_eer": self.best_validation_eer,
            "best_checkpoint_step": self.best_checkpoint_step,
            "dev_eer": self.dev_eer,
            "history": [[step, eer] for step, eer in self.history],
        }
        if self.embeddings_path is not None:
            d["embeddings_path"] = self.embeddings_path
        if self.error is not None:
            d["error"] = self.error
        return d

    @staticmethod
    def from_dict(d: dict) -> "RunReport":
        status = d.get("status")
        if status not in ("ok", "failed"):
            raise OrchestratorError(f"report status must be ok/failed, got {status!r}")
        history = tuple((int(s), float(e)) for s, e in d.get("history", []))
        if status == "ok":
            for key in ("best_validation_eer", "best_checkpoint_step", "dev_eer"):
                if key not in d:
                    raise OrchestratorError(f"ok report missing field {key!r}")
            if not history:
                raise OrchestratorError("ok report must have a non-empty history")
            best = min(eer for _, eer in history)
            if abs(best - float(d["best_validation_eer"])) > 1e-9:
                raise OrchestratorError(
                    "best_validation_eer does not match the history minimum"
                )
        return RunReport(
            status=status,
            best_validation_eer=float(d.get("best_validation_eer", math.inf)),
            best_checkpoint_step=int(d.get("best_checkpoint_step", -1)),
            dev_eer=float(d.get("dev_eer", math.inf)),
            history=history,
            embeddings_path=d.get("embeddings_path"),
            error=d.get("error"),
        )


@dataclass(frozen=True)
class SearchReport:
    phase1: tuple[tuple[float, float], ...]  # (lr, dev_eer)
    phase2: tuple[tuple[float, float], ...]
    selected_lr: float

    def to_dict(self) -> dict:
        return {
            "phase1": [[lr, eer] for lr, eer in self.phase1],
            "phase2": [[lr, eer] for lr, eer in self.phase2],
            "selected_lr": self.selected_lr,
        }


def phase1_candidates() -> list[float]:
    return [10.0**-i for i in range(2, 8)]


def phase2_candidates(best_exponent: int) -> list[float]:
    """The six refinement candidates around 10**best_exponent, ascending."""
    values = [
        mantissa * 10.0**exp
        for exp in (best_exponent - 1, best_exponent)
        for mantissa in PHASE2_MANTISSAS
    ]
    return sorted(values)


def run_trainer(
    cfg: RunConfig, output_dir: str | Path, timeout_seconds: float | None = None
) -> RunReport:
    """Write the config, invoke the trainer, parse its report.

    Any protocol failure (nonzero exit, timeout, missing or malformed
    report) becomes a failed RunReport with a diagnostic, never an
    exception.
    """
    output_dir = Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    config_path = output_dir / "run_config.json"
    config_path.write_text(
        json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    cmd = shlex.split(cfg.trainer_command) + [str(config_path), str(output_dir)]
    try:
        proc = subprocess.run(
            cmd, capture_output=True, text=True, timeout=timeout_seconds
        )
    except subprocess.TimeoutExpired:
        return RunReport(status="failed", error=f"trainer timed out: {cmd}")
    except OSError as exc:
        return RunReport(status="failed", error=f"trainer could not start: {exc}")
    if proc.returncode != 0:
        tail = proc.stderr.strip().splitlines()[-1] if proc.stderr.strip() else ""
        return RunReport(
            status="failed",
            error=f"trainer exited with code {proc.returncode}: {tail}",
        )
    report_path = output_dir / "report.json"
    if not report_path.exists():
        return RunReport(status="failed", error=f"missing report file {report_path}")
    try:
        return RunReport.from_dict(json.loads(report_path.read_text(encoding="utf-8")))
    except (json.JSONDecodeError, OrchestratorError, KeyError, TypeError, ValueError) as exc:
        return RunReport(status="failed", error=f"malformed report: {exc}")


def _run_eer(report: RunReport) -> float:
    return report.dev_eer if report.status == "ok" else math.inf


def _argmin_lr(results: Sequence[tuple[float, float]]) -> float:
    """Learning rate with the lowest dev EER; ties go to the smaller lr."""
    best_lr, best_eer = None, math.inf
    for lr, eer in sorted(results):
        if eer < best_eer:
            best_lr, best_eer = lr, eer
    if best_lr is None or math.isinf(best_eer):
        raise OrchestratorError("all grid-search runs failed")
    return best_lr


def lr_search(
    base_cfg: RunConfig,
    work_dir: str | Path,
    timeout_seconds: float | None = None,
    run_fn: Callable[[RunConfig, Path], RunReport] | None = None,
) -> SearchReport:
    """Two-phase max-LR search: a decade scan, then mantissa refinement
    around the decade winner.  All runs share the base config's seed and
    step count; a phase-2 candidate equal to a phase-1 one is re-used."""
    work_dir = Path(work_dir)
    if run_fn is None:
        run_fn = lambda cfg, out: run_trainer(cfg, out, timeout_seconds)

    def execute(lr: float, tag: str) -> float:
        cfg = base_cfg.with_max_lr(lr)
        report = run_fn(cfg, work_dir / f"{tag}_lr_{lr:.6e}")
        return _run_eer(report)

    phase1 = [(lr, execute(lr, "phase1")) for lr in phase1_candidates()]
    best_lr = _argmin_lr(phase1)
    best_exponent = round(math.log10(best_lr))
    seen = dict(phase1)
    phase2 = []
    for lr in phase2_candidates(best_exponent):
        eer = seen[lr] if lr in seen else execute(lr, "phase2")
        phase2.append((lr, eer))
    selected = _argmin_lr(phase1 + phase2)
    return SearchReport(tuple(phase1), tuple(phase2), selected)


@dataclass(frozen=True)
class MatrixCell:
    n_steps: int
    seed: int
    report: RunReport


@dataclass(frozen=True)
class MatrixReport:
    cells: tuple[MatrixCell, ...]
    rows: tuple[tuple[int, float, float], ...]  # (n_steps, mean, std)

    def to_dict(self) -> dict:
        return {
            "cells": [
                {
                    "n_steps": c.n_steps,
                    "seed": c.seed,
                    "report": c.report.to_dict(),
                }
                for c in self.cells
            ],
            "rows": [
                {"n_steps": s, "mean_dev_eer": m, "std_dev_eer": sd}
                for s, m, sd in self.rows
            ],
        }


def experiment_matrix(
    base_cfg: RunConfig,
    steps_list: Sequence[int],
    seeds_list: Sequence[int],
    work_dir: str | Path,
    timeout_seconds: float | None = None,
    run_fn: Callable[[RunConfig, Path], RunReport] | None = None,
) -> MatrixReport:
    """One run per (n_steps, seed) pair; per-steps aggregation reports the
    mean and sample (n-1) standard deviation of the dev EER."""
    if not steps_list or not seeds_list:
        raise OrchestratorError("steps_list and seeds_list must be non-empty")
    work_dir = Path(work_dir)
    if run_fn is None:
        run_fn = lambda cfg, out: run_trainer(cfg, out, timeout_seconds)
    cells: list[MatrixCell] = []
    for n_steps in steps_list:
        for seed in seeds_list:
            cfg = replace(base_cfg.with_steps(n_steps), seed=seed)
            report = run_fn(cfg, work_dir / f"steps_{n_steps}_seed_{seed}")
            cells.append(MatrixCell(n_steps, seed, report))
    rows = []
    for n_steps in steps_list:
        eers = [_run_eer(c.report) for c in cells if c.n_steps == n_steps]
        mean = sum(eers) / len(eers)
        if len(eers) > 1 and math.isfinite(mean):
            std = math.sqrt(sum((e - mean) ** 2 for e in eers) / (len(eers) - 1))
        else:
            std = 0.0
        rows.append((n_steps, mean, std))
    return MatrixReport(tuple(cells), tuple(rows))


def ablation_suite(base_cfg: RunConfig) -> dict[str, RunConfig]:
    """The 11 ablation configs: 3 schedule variants, 4 weights/freezing
    variants, 4 regularization variants, each a delta from the base."""
    schedule = base_cfg.schedule
    freeze = base_cfg.freeze
    variants: dict[str, RunConfig] = {
        "schedule_constant": replace(
            base_cfg, schedule=replace(schedule, kind="constant")
        ),
        "schedule_exp_decay": replace(
            base_cfg, schedule=replace(schedule, kind="exp_decay")
        ),
        "schedule_one_cycle": replace(
            base_cfg, schedule=replace(schedule, kind="one_cycle", n_cycles=1)
        ),
        "weights_random_init": replace(base_cfg, weights_init="random"),
        "weights_pretrained_no_freeze": replace(
            base_cfg,
            weights_init="pretrained",
            freeze=replace(
                freeze,
                freeze_all_until_step=0,
                groups_frozen_entire_run=frozenset(),
            ),
        ),
        "weights_pretrained_freeze_feature_extractor": replace(
            base_cfg,
            weights_init="pretrained",
            freeze=replace(freeze, freeze_all_until_step=0),
        ),
        "weights_pretrained_freeze_first_cycle": replace(
            base_cfg,
            weights_init="pretrained",
            freeze=replace(
                freeze,
                freeze_all_until_step=base_cfg.n_steps // 4,
                groups_frozen_entire_run=frozenset(),
            ),
        ),
        "regularization_none": replace(
            base_cfg,
            regularization_flags=RegularizationFlags(0.0, 0.0, False),
        ),
        "regularization_dropout_only": replace(
            base_cfg,
            regularization_flags=RegularizationFlags(
                0.0, base_cfg.regularization_flags.dropout, False
            ),
        ),
        "regularization_layerdrop_only": replace(
            base_cfg,
            regularization_flags=RegularizationFlags(
                base_cfg.regularization_flags.layerdrop, 0.0, False
            ),
        ),
        "regularization_masking_only": replace(
            base_cfg,
            regularization_flags=RegularizationFlags(0.0, 0.0, True),
        ),
    }
    return variants


def format_search_table(report: SearchReport) -> str:
    lines = ["phase  lr            dev_eer"]
    for phase, results in (("1", report.phase1), ("2", report.phase2)):
        for lr, eer in results:
            lines.append(f"{phase:<6} {lr:<13.4e} {eer:.4f}")
    lines.append(f"selected_lr {report.selected_lr:.4e}")
    return "\n".join(lines)


def format_matrix_table(report: MatrixReport) -> str:
    lines = ["steps      mean_dev_eer  std_dev_eer"]
    for n_steps, mean, std in report.rows:
        lines.append(f"{n_steps:<10d} {mean:<13.4f} {std:.4f}")
    return "\n".join(lines)
