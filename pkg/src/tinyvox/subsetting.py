"""Validation-split carving and the three constrained tiny-subset builders.

All algorithms are deterministic: speakers are processed in ascending
speaker_id order, sessions and utterances are consumed in documented sort
orders, and any randomness comes from a per-speaker PCG64 stream keyed by
(seed, sha256(speaker_id)).
"""

from __future__ import annotations

from dataclasses import dataclass

from .manifest import Manifest
from .rng import make_rng, stable_hash64


class SubsetError(ValueError):
    """Raised when a subset cannot be built under the given constraints."""


@dataclass(frozen=True)
class CarveParams:
    retain_fraction_threshold: float = 0.99
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 < self.retain_fraction_threshold < 1.0:
            raise ValueError("retain_fraction_threshold must be in (0, 1)")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")


@dataclass(frozen=True)
class SubsetParams:
    per_gender_speakers: int = 50
    utterances_per_speaker: int = 8
    utterance_cap: int | None = 50000

    def __post_init__(self) -> None:
        if self.per_gender_speakers <= 0:
            raise ValueError("per_gender_speakers must be positive")
        if self.utterances_per_speaker <= 0:
            raise ValueError("utterances_per_speaker must be positive")
        if self.utterance_cap is not None and self.utterance_cap <= 0:
            raise ValueError("utterance_cap must be positive when set")


def _sessions_by_size(m: Manifest, speaker: str) -> list[str]:
    """Speaker's sessions, most utterances first; ties by ascending id."""
    return sorted(
        m.speaker_to_sessions[speaker],
        key=lambda s: (-len(m.session_to_utterances[s]), s),
    )


def _check_cap(n_selected: int, p: SubsetParams) -> None:
    if p.utterance_cap is not None and n_selected > p.utterance_cap:
        raise SubsetError(
            f"subset would contain {n_selected} utterances, "
            f"exceeding the cap of {p.utterance_cap}"
        )


def carve_validation(m: Manifest, p: CarveParams) -> tuple[Manifest, Manifest]:
    """Move whole sessions of every speaker into a validation split.

    Per speaker, sessions are drawn in a random order and moved one by one
    until strictly less than ``retain_fraction_threshold`` of the
    speaker's utterances remain in train.  The split is disjoint at the
    session level and exhaustive.
    """
    val_sessions: set[str] = set()
    for speaker in m.speakers:
        sessions = sorted(m.speaker_to_sessions[speaker])
        if len(sessions) < 2:
            raise SubsetError(
                f"speaker {speaker!r} has a single session; carving would "
                "remove it from train entirely"
            )
        total = sum(len(m.session_to_utterances[s]) for s in sessions)
        rng = make_rng(p.seed, stable_hash64(speaker))
        order = rng.permutation(len(sessions))
        retained = total
        for idx in order:
            sess = sessions[idx]
            n_sess = len(m.session_to_utterances[sess])
            if retained - n_sess == 0:
                raise SubsetError(
                    f"carving speaker {speaker!r} would leave no train "
                    "utterances (all sessions drawn into validation)"
                )
            val_sessions.add(sess)
            retained -= n_sess
            if retained / total < p.retain_fraction_threshold:
                break
    train_records = [r for r in m.records if r.session_id not in val_sessions]
    val_records = [r for r in m.records if r.session_id in val_sessions]
    return Manifest(train_records), Manifest(val_records)


def build_few_speakers(train: Manifest, p: SubsetParams) -> Manifest:
    """Keep the speakers with the most sessions: the top
    ``per_gender_speakers`` per gender, with all their utterances."""
    selected: list[str] = []
    for gender in ("female", "male"):
        candidates = [
            spk for spk in train.speakers if train.speaker_gender[spk] == gender
        ]
        if len(candidates) < p.per_gender_speakers:
            raise SubsetError(
                f"need {p.per_gender_speakers} {gender} speakers, "
                f"found {len(candidates)}"
            )
        candidates.sort(
            key=lambda spk: (
                -len(train.speaker_to_sessions[spk]),
                -len(train.speaker_utterances(spk)),
                spk,
            )
        )
        selected.extend(candidates[: p.per_gender_speakers])
    utt_ids: list[str] = []
    for spk in selected:
        utt_ids.extend(train.speaker_utterances(spk))
    _check_cap(len(utt_ids), p)
    return train.subset_by_utterance_ids(utt_ids)


def build_few_sessions(train: Manifest, p: SubsetParams) -> Manifest:
    """Per speaker, fill ``utterances_per_speaker`` utterances greedily
    from the largest session first, moving to the next session only when
    the previous one is exhausted."""
    k = p.utterances_per_speaker
    utt_ids: list[str] = []
    for speaker in train.speakers:
        available = sum(
            len(train.session_to_utterances[s])
            for s in train.speaker_to_sessions[speaker]
        )
        if available < k:
            raise SubsetError(
                f"speaker {speaker!r} has {available} utterances, need {k}"
            )
        remaining = k
        for sess in _sessions_by_size(train, speaker):
            take = min(remaining, len(train.session_to_utterances[sess]))
            utt_ids.extend(train.session_to_utterances[sess][:take])
            remaining -= take
            if remaining == 0:
                break
    _check_cap(len(utt_ids), p)
    return train.subset_by_utterance_ids(utt_ids)


def build_many_sessions(train: Manifest, p: SubsetParams) -> Manifest:
    """Per speaker, round-robin over sessions (largest first), taking one
    utterance per session per cycle until ``utterances_per_speaker``
    utterances are selected."""
    k = p.utterances_per_speaker
    utt_ids: list[str] = []
    for speaker in train.speakers:
        sessions = _sessions_by_size(train, speaker)
        available = sum(len(train.session_to_utterances[s]) for s in sessions)
        if available < k:
            raise SubsetError(
                f"speaker {speaker!r} has {available} utterances, need {k}"
            )
        taken = {s: 0 for s in sessions}
        selected = 0
        while selected < k:
            for sess in sessions:
                utts = train.session_to_utterances[sess]
                if taken[sess] < len(utts):
                    utt_ids.append(utts[taken[sess]])
                    taken[sess] += 1
                    selected += 1
                    if selected == k:
                        break
    _check_cap(len(utt_ids), p)
    return train.subset_by_utterance_ids(utt_ids)


def subset_provenance(
    kind: str, params: CarveParams | SubsetParams, source: Manifest
) -> dict:
    """Provenance record emitted next to every built subset."""
    fields: dict = {"kind": kind, "source_manifest_sha256": source.digest()}
    if isinstance(params, CarveParams):
        fields["params"] = {
            "retain_fraction_threshold": params.retain_fraction_threshold,
            "seed": params.seed,
        }
    else:
        fields["params"] = {
            "per_gender_speakers": params.per_gender_speakers,
            "utterances_per_speaker": params.utterances_per_speaker,
            "utterance_cap": params.utterance_cap,
        }
    return fields
