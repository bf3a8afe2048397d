"""Entry point implementing the trainer file protocol.

Invocation: ``tinyvox-toy-trainer <run_config.json> <output_dir>``.
The trainer validates the config, runs the configured number of
gradient steps on synthetic features, evaluates at the configured
cadence, and writes ``report.json`` (plus an embeddings file for the
dev-trial utterances) into the output directory.  Exit code 0 on
success; any config or protocol violation produces a failed report and
a nonzero exit.

Learning rates and batch compositions are not re-derived locally: both
are exported by the ``tinyvox`` command line (``lr-curve`` and
``batch-plan``) and read back from files, so they match the toolkit's
definitions exactly.
"""

from __future__ import annotations

import json
import math
import subprocess
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from .features import FEATURE_DIM, FeatureParams, read_manifest_csv, utterance_feature
from .model import PARAMETER_GROUPS, AdamState, ToyModel, aam_loss_and_grads


class ConfigError(ValueError):
    pass


def _tinyvox(*args: str) -> str:
    proc = subprocess.run(
        [sys.executable, "-m", "tinyvox", *args],
        capture_output=True,
        text=True,
    )
    if proc.returncode != 0:
        raise RuntimeError(f"tinyvox {args[0]} failed: {proc.stderr.strip()}")
    return proc.stdout


def _require(d: dict, key: str):
    if key not in d:
        raise ConfigError(f"run config is missing {key!r}")
    return d[key]


def _load_config(path: str) -> dict:
    with open(path, "r", encoding="utf-8") as f:
        cfg = json.load(f)
    for key in (
        "dataset_manifest_path",
        "validation_manifest_path",
        "validation_trials_path",
        "dev_manifest_path",
        "dev_trials_path",
        "schedule",
        "freeze",
        "loss",
        "sampling",
        "n_steps",
        "seed",
        "validation_cadence",
        "regularization_flags",
        "weights_init",
    ):
        _require(cfg, key)
    if not isinstance(cfg["n_steps"], int) or cfg["n_steps"] <= 0:
        raise ConfigError(f"n_steps must be a positive integer, got {cfg['n_steps']!r}")
    if cfg["weights_init"] not in ("pretrained", "random"):
        raise ConfigError(f"unknown weights_init {cfg['weights_init']!r}")
    for group_key in ("always_trainable_groups", "groups_frozen_entire_run"):
        unknown = set(cfg["freeze"].get(group_key, [])) - set(PARAMETER_GROUPS)
        if unknown:
            raise ConfigError(f"unknown parameter groups {sorted(unknown)}")
    return cfg


def _read_lr_curve(cfg: dict, out_dir: Path) -> list[float]:
    sched = cfg["schedule"]
    curve_path = out_dir / "lr_curve.csv"
    _tinyvox(
        "lr-curve",
        "--kind", sched["kind"],
        "--max-lr", repr(sched["max_lr"]),
        "--min-lr", repr(sched.get("min_lr", 1e-8)),
        "--steps", str(sched["n_steps"]),
        "--cycles", str(sched.get("n_cycles", 4)),
        "--stride", "1",
        "--out", str(curve_path),
    )
    lines = curve_path.read_text().splitlines()[1:]
    curve = [float(line.split(",")[1]) for line in lines]
    if len(curve) != cfg["n_steps"]:
        raise ConfigError("schedule length does not match n_steps")
    return curve


def _read_batch_plans(cfg: dict, out_dir: Path) -> list[list[str]]:
    samp = cfg["sampling"]
    plans_path = out_dir / "batch_plans.jsonl"
    _tinyvox(
        "batch-plan",
        "--manifest", cfg["dataset_manifest_path"],
        "--batch-size", str(samp.get("batch_size", 100)),
        "--chunk-seconds", repr(samp.get("chunk_seconds", 2.0)),
        "--seed", str(samp.get("seed", 0)),
        "--step", "0",
        "--count", str(cfg["n_steps"]),
        "--out", str(plans_path),
    )
    plans = []
    with open(plans_path, "r", encoding="utf-8") as f:
        for line in f:
            plan = json.loads(line)
            plans.append([item["utterance_id"] for item in plan["items"]])
    return plans


def _trainable_groups(freeze: dict, step: int) -> set[str]:
    if step < freeze.get("freeze_all_until_step", 0):
        return set(freeze.get("always_trainable_groups", []))
    return set(PARAMETER_GROUPS) - set(freeze.get("groups_frozen_entire_run", []))


def _pretrained_projection() -> np.ndarray:
    with resources.files("toytrainer").joinpath("data/pretrained_init.npz").open(
        "rb"
    ) as f:
        return np.load(f)["projection"]


def _write_embeddings(path: Path, ids: list[str], vectors: np.ndarray) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(f"dim {vectors.shape[1]}\n")
        for utt_id, vec in zip(ids, vectors):
            f.write(utt_id + " " + " ".join(repr(float(v)) for v in vec) + "\n")


def _eer_against(
    model: ToyModel,
    manifest_rows: list[dict],
    features: dict[str, np.ndarray],
    trials_path: str,
    emb_path: Path,
    scores_path: Path,
) -> float:
    ids = [row["utterance_id"] for row in manifest_rows]
    vectors = model.embed(np.stack([features[i] for i in ids]))
    _write_embeddings(emb_path, ids, vectors)
    _tinyvox(
        "score",
        "--embeddings", str(emb_path),
        "--trials", trials_path,
        "--out", str(scores_path),
    )
    return json.loads(_tinyvox("eer", "--scores", str(scores_path)))["eer"]


def _mask_channels(batch: np.ndarray, masking: dict, rng: np.random.Generator) -> None:
    """Zero random feature dimensions in place, mirroring the configured
    channel-mask settings at this trainer's 1-frame granularity."""
    if masking.get("mode", "specaugment") == "fraction":
        n_masked = int(math.floor(masking.get("channel_fraction", 0.1) * FEATURE_DIM + 0.5))
        for row in batch:
            row[rng.choice(FEATURE_DIM, size=n_masked, replace=False)] = 0.0
    else:
        lo, hi = masking.get("channel_mask_count_range", [1, 3])
        length = min(masking.get("channel_mask_length", 4), FEATURE_DIM)
        for row in batch:
            for _ in range(int(rng.integers(lo, hi + 1))):
                start = int(rng.integers(0, FEATURE_DIM - length + 1))
                row[start : start + length] = 0.0


def run(config_path: str, output_dir: str) -> dict:
    out_dir = Path(output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    cfg = _load_config(config_path)

    flags = cfg["regularization_flags"]
    for name in ("layerdrop", "dropout"):
        if flags.get(name, 0.0) > 0.0:
            print(
                f"warning: {name} is accepted but not implemented; ignoring",
                file=sys.stderr,
            )

    train_rows = read_manifest_csv(cfg["dataset_manifest_path"])
    val_rows = read_manifest_csv(cfg["validation_manifest_path"])
    dev_rows = read_manifest_csv(cfg["dev_manifest_path"])

    feature_params = FeatureParams()
    features: dict[str, np.ndarray] = {}
    for row in train_rows + val_rows + dev_rows:
        features.setdefault(
            row["utterance_id"],
            utterance_feature(
                row["utterance_id"], row["speaker_id"], row["session_id"], feature_params
            ),
        )

    speakers = sorted({row["speaker_id"] for row in train_rows})
    label_of = {spk: i for i, spk in enumerate(speakers)}
    labels_by_utt = {row["utterance_id"]: label_of[row["speaker_id"]] for row in train_rows}

    curve = _read_lr_curve(cfg, out_dir)
    plans = _read_batch_plans(cfg, out_dir)

    rng = np.random.default_rng([cfg["seed"], 2718281828])
    model = ToyModel.initial(FEATURE_DIM, len(speakers), rng)
    if cfg["weights_init"] == "pretrained":
        model.projection = _pretrained_projection().copy()

    cadence = cfg["validation_cadence"]
    if cadence.get("mode") == "every_epoch":
        batch_size = cfg["sampling"].get("batch_size", 100)
        validate_every = max(1, math.ceil(len(train_rows) / batch_size))
    else:
        validate_every = int(cadence["k"])

    margin = cfg["loss"].get("margin", 0.2)
    scale = cfg["loss"].get("scale", 30.0)
    masking_on = flags.get("masking_enabled", True)
    adam = AdamState()

    history: list[list[float]] = []
    best_eer, best_step, best_model = math.inf, -1, model.copy()
    for step in range(cfg["n_steps"]):
        utt_ids = plans[step]
        batch = np.stack([features[u] for u in utt_ids])
        if masking_on:
            _mask_channels(batch, cfg.get("masking", {}), rng)
        batch_labels = np.array([labels_by_utt[u] for u in utt_ids])

        embeddings = model.embed(batch)
        _, grad_e, grad_c = aam_loss_and_grads(
            embeddings, model.classifier, batch_labels, margin, scale
        )
        grad_proj = grad_e.T @ batch

        trainable = _trainable_groups(cfg["freeze"], step)
        adam.t += 1
        if "projection" in trainable:
            adam.update("projection", model.projection, grad_proj, curve[step])
        if "classifier" in trainable:
            adam.update("classifier", model.classifier, grad_c, curve[step])

        if (step + 1) % validate_every == 0 or step == cfg["n_steps"] - 1:
            eer = _eer_against(
                model,
                val_rows,
                features,
                cfg["validation_trials_path"],
                out_dir / "val_embeddings.txt",
                out_dir / "val_scores.txt",
            )
            history.append([step, eer])
            if eer < best_eer:
                best_eer, best_step, best_model = eer, step, model.copy()

    embeddings_path = out_dir / "embeddings.txt"
    dev_eer = _eer_against(
        best_model,
        dev_rows,
        features,
        cfg["dev_trials_path"],
        embeddings_path,
        out_dir / "dev_scores.txt",
    )
    return {
        "status": "ok",
        "best_validation_eer": best_eer,
        "best_checkpoint_step": best_step,
        "dev_eer": dev_eer,
        "history": history,
        "embeddings_path": str(embeddings_path),
    }


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    if len(argv) != 2:
        print("usage: tinyvox-toy-trainer <run_config.json> <output_dir>", file=sys.stderr)
        return 2
    config_path, output_dir = argv
    try:
        report = run(config_path, output_dir)
    except (ConfigError, ValueError, OSError, RuntimeError, KeyError) as exc:
        out_dir = Path(output_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        report = {"status": "failed", "error": str(exc), "history": []}
        (out_dir / "report.json").write_text(
            json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
        print(f"error: {exc}", file=sys.stderr)
        return 1
    (Path(output_dir) / "report.json").write_text(
        json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return 0


if __name__ == "__main__":
    sys.exit(main())
