"""End-to-end acceptance: the orchestrator drives the toy trainer as a
real subprocess, the two sides talking only through files.

One run covers the whole guarantee: the two-phase learning-rate search
and a steps-by-seeds matrix complete against the 20-speaker synthetic
fixture, the best run reaches a low dev EER on separable features, and
training sets with low session variability score measurably worse than
equal-size sets with high variability — all inside a 10-minute budget.
"""

from __future__ import annotations

import math
import time

from tinyvox.orchestrator import RunConfig, experiment_matrix, lr_search

from toy_fixture_corpus import base_config_dict


def test_search_matrix_and_session_variability_ordering(tmp_path, train_subsets):
    start = time.monotonic()

    base = RunConfig.from_dict(
        base_config_dict(tmp_path, train_subsets["many_sessions"], n_steps=300)
    )

    search = lr_search(base, tmp_path / "search")
    assert len(search.phase1) == 6 and len(search.phase2) == 6
    selected_eer = dict(search.phase1 + search.phase2)[search.selected_lr]
    assert math.isfinite(selected_eer)

    best = base.with_max_lr(search.selected_lr)
    matrix = experiment_matrix(best, [200, 300], [0, 1], tmp_path / "matrix")
    assert len(matrix.cells) == 4
    best_dev = min(cell.report.dev_eer for cell in matrix.cells)
    assert best_dev < 0.05

    # low session variability at equal size must cost accuracy
    mean_dev = {}
    for name, manifest in train_subsets.items():
        eers = []
        for seed in (0, 1):
            cfg = RunConfig.from_dict(
                {
                    **base.to_dict(),
                    "dataset_manifest_path": manifest,
                    "seed": seed,
                }
            ).with_max_lr(search.selected_lr)
            from tinyvox.orchestrator import run_trainer

            report = run_trainer(cfg, tmp_path / f"ordinal_{name}_{seed}")
            assert report.status == "ok"
            eers.append(report.dev_eer)
        mean_dev[name] = sum(eers) / len(eers)
    assert mean_dev["few_sessions"] > mean_dev["many_sessions"]

    assert time.monotonic() - start < 600.0
