"""Command-line surface of the toolkit.

Every subcommand is a thin facade over one module operation.  JSON goes
to stdout (tables behind --pretty); failures print a one-line error to
stderr and exit nonzero.  Randomness enters only through explicit
--seed flags.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import loss_numerics, orchestrator, sampling, schedule, scoring, subsetting, trials
from .manifest import load_manifest_path, manifest_stats, write_manifest_path
from .rng import make_rng


def _emit(obj: dict) -> None:
    json.dump(obj, sys.stdout, sort_keys=True)
    sys.stdout.write("\n")


def _write_provenance(path: str, record: dict) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(record, f, indent=2, sort_keys=True)
        f.write("\n")


def _cmd_stats(args) -> None:
    m = load_manifest_path(args.manifest, args.format)
    stats = manifest_stats(m)
    if args.pretty:
        d = stats.to_dict()
        print(f"duration_hours        {d['duration_hours']:.1f}")
        print(f"n_speakers            {d['n_speakers']}")
        print(f"n_sessions            {d['n_sessions']}")
        print(f"n_utterances          {d['n_utterances']}")
        mean, lo, hi = d["sessions_per_speaker"]
        print(f"sessions_per_speaker  mean {mean:.1f} min {lo} max {hi}")
        mean, lo, hi = d["utterances_per_session"]
        print(f"utterances_per_session mean {mean:.1f} min {lo} max {hi}")
    else:
        _emit(stats.to_dict())


def _cmd_carve_val(args) -> None:
    m = load_manifest_path(args.manifest, args.format)
    params = subsetting.CarveParams(
        retain_fraction_threshold=args.threshold, seed=args.seed
    )
    train, val = subsetting.carve_validation(m, params)
    write_manifest_path(train, args.train_out)
    write_manifest_path(val, args.val_out)
    provenance = subsetting.subset_provenance("carve_validation", params, m)
    _write_provenance(args.train_out + ".provenance.json", provenance)
    _emit(
        {
            "train_utterances": len(train),
            "validation_utterances": len(val),
            "train_out": args.train_out,
            "val_out": args.val_out,
        }
    )


_SUBSET_BUILDERS = {
    "few-speakers": subsetting.build_few_speakers,
    "few-sessions": subsetting.build_few_sessions,
    "many-sessions": subsetting.build_many_sessions,
}


def _cmd_subset(args) -> None:
    m = load_manifest_path(args.manifest, args.format)
    params = subsetting.SubsetParams(
        per_gender_speakers=args.per_gender,
        utterances_per_speaker=args.k,
        utterance_cap=args.cap,
    )
    built = _SUBSET_BUILDERS[args.variant](m, params)
    write_manifest_path(built, args.out)
    provenance = subsetting.subset_provenance(args.variant, params, m)
    _write_provenance(args.out + ".provenance.json", provenance)
    stats = manifest_stats(built)
    _emit({"out": args.out, "stats": stats.to_dict()})


def _cmd_trials_generate(args) -> None:
    m = load_manifest_path(args.manifest, args.format)
    trial_list = trials.generate_trials(
        m,
        n_target=args.n_target,
        n_nontarget=args.n_nontarget,
        seed=args.seed,
        cross_session_targets_only=args.cross_session_targets_only,
    )
    trials.write_trials_path(trial_list, args.out)
    _emit(
        {
            "out": args.out,
            "n_target": trial_list.n_target,
            "n_nontarget": trial_list.n_nontarget,
        }
    )


def _cmd_trials_validate(args) -> None:
    m = load_manifest_path(args.manifest, args.format)
    trial_list = trials.read_trials_path(args.trials)
    issues = trials.validate_trials(trial_list, m)
    _emit({"n_trials": len(trial_list.trials), "n_issues": len(issues), "issues": issues})
    if issues:
        sys.exit(1)


def _cmd_score(args) -> None:
    embeddings = scoring.read_embeddings_path(args.embeddings)
    trial_list = trials.read_trials_path(args.trials)
    scored = scoring.score_trials(embeddings, trial_list)
    with open(args.out, "w", encoding="utf-8", newline="") as f:
        for st in scored:
            label = "1" if st.trial.label == trials.TARGET else "0"
            f.write(
                f"{label} {st.trial.utterance_a} {st.trial.utterance_b} "
                f"{st.score!r}\n"
            )
    _emit({"out": args.out, "n_scored": len(scored)})


def _read_score_file(path: str) -> tuple[list[float], list[bool]]:
    scores: list[float] = []
    labels: list[bool] = []
    with open(path, "r", encoding="utf-8", newline="") as f:
        for line_no, line in enumerate(f, start=1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 4 or parts[0] not in ("0", "1"):
                raise scoring.ScoringError(
                    f"malformed score line {line_no} in {path}"
                )
            labels.append(parts[0] == "1")
            scores.append(float(parts[3]))
    return scores, labels


def _cmd_eer(args) -> None:
    scores, labels = _read_score_file(args.scores)
    eer, threshold = scoring.eer_from_scores(scores, labels)
    _emit(
        {
            "eer": eer,
            "threshold": threshold,
            "n_target": sum(labels),
            "n_nontarget": len(labels) - sum(labels),
        }
    )


def _cmd_lr_curve(args) -> None:
    spec = schedule.ScheduleSpec(
        kind=args.kind,
        max_lr=args.max_lr,
        min_lr=args.min_lr,
        n_steps=args.steps,
        n_cycles=args.cycles,
    )
    curve = schedule.export_curve(spec, args.stride)
    dest = open(args.out, "w", encoding="utf-8", newline="") if args.out else sys.stdout
    try:
        writer = csv.writer(dest, lineterminator="\n")
        writer.writerow(["step", "lr"])
        for step, lr in curve:
            writer.writerow([step, repr(lr)])
    finally:
        if args.out:
            dest.close()


def _cmd_freeze_timeline(args) -> None:
    groups = args.groups.split(",")
    spec = schedule.FreezeSpec(
        freeze_all_until_step=args.until,
        always_trainable_groups=frozenset(
            g for g in args.always.split(",") if g
        ),
        groups_frozen_entire_run=frozenset(
            g for g in args.frozen.split(",") if g
        ),
    )
    timeline = []
    previous = None
    for step in range(args.steps):
        trainable = sorted(schedule.trainable_groups_at(spec, step, groups))
        if trainable != previous:
            timeline.append({"from_step": step, "trainable_groups": trainable})
            previous = trainable
    _emit({"n_steps": args.steps, "timeline": timeline})


def _cmd_batch_plan(args) -> None:
    m = load_manifest_path(args.manifest, args.format)
    spec = sampling.SamplingSpec(
        batch_size=args.batch_size, chunk_seconds=args.chunk_seconds, seed=args.seed
    )
    dest = open(args.out, "w", encoding="utf-8", newline="") if args.out else sys.stdout
    try:
        for step in range(args.step, args.step + args.count):
            plan = sampling.batch_plan(m, spec, step)
            json.dump(plan.to_dict(), dest, sort_keys=True)
            dest.write("\n")
    finally:
        if args.out:
            dest.close()


def _cmd_mask_plan(args) -> None:
    spec = sampling.MaskSpec(
        mode=args.mode,
        channel_fraction=args.channel_fraction,
        time_fraction=args.time_fraction,
    )
    plan = sampling.mask_plan(spec, (args.time_frames, args.channels), args.seed, args.step)
    _emit(plan.to_dict())


def _cmd_loss_self_test(args) -> None:
    rng = make_rng(args.seed)
    params = loss_numerics.LossParams(margin=args.margin, scale=args.scale)
    worst = 0.0
    for _ in range(args.instances):
        n, d, k = (int(rng.integers(1, hi + 1)) for hi in (4, 8, 5))
        x = loss_numerics.AamInput(
            rng.normal(size=(n, d)),
            rng.normal(size=(k, d)),
            rng.integers(0, k, size=n),
        )
        _, grad_e, grad_w = loss_numerics.aam_loss_and_grad(x, params)
        for attr, grad in (("embeddings", grad_e), ("class_weights", grad_w)):
            base = getattr(x, attr)
            fd = np.zeros_like(base)
            h = 1e-6
            for idx in np.ndindex(base.shape):
                for sign in (1.0, -1.0):
                    bumped = base.copy()
                    bumped[idx] += sign * h
                    fields = {
                        "embeddings": x.embeddings,
                        "class_weights": x.class_weights,
                        "labels": x.labels,
                    }
                    fields[attr] = bumped
                    loss_v, _, _ = loss_numerics.aam_loss_and_grad(
                        loss_numerics.AamInput(**fields), params
                    )
                    fd[idx] += sign * loss_v
                fd[idx] /= 2 * h
            # float64 fd roundoff floor is ~eps*|loss|/h; only compare
            # coordinates comfortably above it
            mask = np.abs(grad) > 1e-4
            if mask.any():
                rel = np.abs(grad[mask] - fd[mask]) / np.abs(grad[mask])
                worst = max(worst, float(rel.max()))
    passed = worst <= 1e-5
    _emit({"instances": args.instances, "max_relative_error": worst, "passed": passed})
    if not passed:
        sys.exit(1)


def _base_config_from_args(args) -> orchestrator.RunConfig:
    with open(args.config, "r", encoding="utf-8") as f:
        cfg = orchestrator.RunConfig.from_dict(json.load(f))
    trainer = args.trainer_command or os.environ.get("TINYVOX_TRAINER")
    if trainer:
        from dataclasses import replace

        cfg = replace(cfg, trainer_command=trainer)
    return cfg


def _cmd_search(args) -> None:
    cfg = _base_config_from_args(args)
    report = orchestrator.lr_search(cfg, args.work_dir, timeout_seconds=args.timeout)
    if args.pretty:
        print(orchestrator.format_search_table(report))
    else:
        _emit(report.to_dict())


def _cmd_matrix(args) -> None:
    cfg = _base_config_from_args(args)
    steps = [int(s) for s in args.steps.split(",")]
    seeds = [int(s) for s in args.seeds.split(",")]
    report = orchestrator.experiment_matrix(
        cfg, steps, seeds, args.work_dir, timeout_seconds=args.timeout
    )
    if args.pretty:
        print(orchestrator.format_matrix_table(report))
    else:
        _emit(report.to_dict())


def _cmd_ablations(args) -> None:
    cfg = _base_config_from_args(args)
    variants = orchestrator.ablation_suite(cfg)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for name, variant in sorted(variants.items()):
        path = out_dir / f"{name}.json"
        path.write_text(
            json.dumps(variant.to_dict(), indent=2, sort_keys=True) + "\n",
            encoding="utf-8",
        )
        written.append(str(path))
    _emit({"n_variants": len(written), "configs": written})


def _add_manifest_arg(parser) -> None:
    parser.add_argument("--manifest", required=True, help="manifest CSV/JSONL path")
    parser.add_argument(
        "--manifest-format",
        dest="format",
        choices=["csv", "jsonl"],
        default=None,
        help="override format detection (default: by extension)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tinyvox",
        description="dataset subsetting, trials, scoring, schedules, and "
        "experiment orchestration for speaker verification",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("stats", help="manifest statistics as JSON")
    _add_manifest_arg(p)
    p.add_argument("--pretty", action="store_true")
    p.set_defaults(func=_cmd_stats)

    p = sub.add_parser("carve-val", help="carve a session-level validation split")
    _add_manifest_arg(p)
    p.add_argument("--threshold", type=float, default=0.99)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--train-out", required=True)
    p.add_argument("--val-out", required=True)
    p.set_defaults(func=_cmd_carve_val)

    p = sub.add_parser("subset", help="build a constrained training subset")
    p.add_argument("variant", choices=sorted(_SUBSET_BUILDERS))
    _add_manifest_arg(p)
    p.add_argument("--per-gender", type=int, default=50)
    p.add_argument("--k", type=int, default=8, help="utterances per speaker")
    p.add_argument("--cap", type=int, default=50000)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_subset)

    p_trials = sub.add_parser("trials", help="generate or validate trial lists")
    trials_sub = p_trials.add_subparsers(dest="trials_command", required=True)
    p = trials_sub.add_parser("generate")
    _add_manifest_arg(p)
    p.add_argument("--n-target", type=int, required=True)
    p.add_argument("--n-nontarget", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--cross-session-targets-only", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_trials_generate)
    p = trials_sub.add_parser("validate")
    _add_manifest_arg(p)
    p.add_argument("--trials", required=True)
    p.set_defaults(func=_cmd_trials_validate)

    p = sub.add_parser("score", help="cosine-score a trial list")
    p.add_argument("--embeddings", required=True)
    p.add_argument("--trials", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_score)

    p = sub.add_parser("eer", help="equal error rate from a score file")
    p.add_argument("--scores", required=True)
    p.set_defaults(func=_cmd_eer)

    p = sub.add_parser("lr-curve", help="export a learning-rate curve as CSV")
    p.add_argument("--kind", choices=schedule.SCHEDULE_KINDS, required=True)
    p.add_argument("--max-lr", type=float, required=True)
    p.add_argument("--min-lr", type=float, default=1e-8)
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--cycles", type=int, default=4)
    p.add_argument("--stride", type=int, default=1)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_lr_curve)

    p = sub.add_parser("freeze-timeline", help="trainable groups over the run")
    p.add_argument("--groups", required=True, help="comma-separated group labels")
    p.add_argument("--always", default="", help="always-trainable groups")
    p.add_argument("--frozen", default="", help="groups frozen for the whole run")
    p.add_argument("--until", type=int, default=0, help="freeze-all boundary step")
    p.add_argument("--steps", type=int, required=True)
    p.set_defaults(func=_cmd_freeze_timeline)

    p = sub.add_parser("batch-plan", help="deterministic batch sampling plan(s)")
    _add_manifest_arg(p)
    p.add_argument("--batch-size", type=int, default=100)
    p.add_argument("--chunk-seconds", type=float, default=2.0)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--step", type=int, required=True)
    p.add_argument("--count", type=int, default=1, help="emit plans for this many consecutive steps")
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_batch_plan)

    p = sub.add_parser("mask-plan", help="deterministic augmentation mask plan")
    p.add_argument("--mode", choices=["specaugment", "fraction"], required=True)
    p.add_argument("--time-frames", type=int, required=True)
    p.add_argument("--channels", type=int, required=True)
    p.add_argument("--channel-fraction", type=float, default=0.10)
    p.add_argument("--time-fraction", type=float, default=0.50)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--step", type=int, required=True)
    p.set_defaults(func=_cmd_mask_plan)

    p_loss = sub.add_parser("loss", help="loss numerics utilities")
    loss_sub = p_loss.add_subparsers(dest="loss_command", required=True)
    p = loss_sub.add_parser("self-test", help="finite-difference gradient check")
    p.add_argument("--instances", type=int, default=50)
    p.add_argument("--margin", type=float, default=0.2)
    p.add_argument("--scale", type=float, default=30.0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_loss_self_test)

    for name, func, extra in (
        ("search", _cmd_search, None),
        ("matrix", _cmd_matrix, "matrix"),
        ("ablations", _cmd_ablations, "ablations"),
    ):
        p = sub.add_parser(name, help=f"run the {name} over an external trainer")
        p.add_argument("--config", required=True, help="base run-config JSON")
        p.add_argument(
            "--trainer-command",
            default=None,
            help="override trainer command (default: config value or $TINYVOX_TRAINER)",
        )
        if extra == "ablations":
            p.add_argument("--out-dir", required=True)
        else:
            p.add_argument("--work-dir", required=True)
            p.add_argument("--timeout", type=float, default=None)
            p.add_argument("--pretty", action="store_true")
        if extra == "matrix":
            p.add_argument("--steps", required=True, help="comma-separated step counts")
            p.add_argument("--seeds", required=True, help="comma-separated seeds")
        p.set_defaults(func=func)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except SystemExit:
        raise
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
