"""Verification trial lists: generation, validation, and the text format.

Trial files are lines ``<label> <utterance_a> <utterance_b>`` with label
1 (target) or 0 (nontarget), the smaller utterance id first.  Readers
accept LF and CRLF.  Nontarget trials always pair different speakers of
the same gender.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import IO, Iterable, Sequence

from .manifest import Manifest
from .rng import make_rng

TARGET = "target"
NONTARGET = "nontarget"

# above this many admissible pairs, sampling switches from full
# enumeration to rejection sampling
_ENUMERATION_LIMIT = 2_000_000


class TrialError(ValueError):
    """Raised for infeasible trial requests or malformed trial files."""


@dataclass(frozen=True)
class Trial:
    label: str
    utterance_a: str
    utterance_b: str

    def __post_init__(self) -> None:
        if self.label not in (TARGET, NONTARGET):
            raise TrialError(f"unknown trial label {self.label!r}")
        if self.utterance_a == self.utterance_b:
            raise TrialError(f"trial pairs {self.utterance_a!r} with itself")
        if self.utterance_a > self.utterance_b:
            a, b = self.utterance_a, self.utterance_b
            object.__setattr__(self, "utterance_a", b)
            object.__setattr__(self, "utterance_b", a)

    @property
    def pair(self) -> tuple[str, str]:
        return (self.utterance_a, self.utterance_b)


@dataclass(frozen=True)
class TrialList:
    trials: tuple[Trial, ...]

    def __post_init__(self) -> None:
        seen: set[tuple[str, str, str]] = set()
        for t in self.trials:
            key = (t.label, t.utterance_a, t.utterance_b)
            if key in seen:
                raise TrialError(f"duplicate trial {key}")
            seen.add(key)

    @property
    def n_target(self) -> int:
        return sum(1 for t in self.trials if t.label == TARGET)

    @property
    def n_nontarget(self) -> int:
        return sum(1 for t in self.trials if t.label == NONTARGET)


def _target_pairs_of_speaker(
    m: Manifest, speaker: str, cross_session_only: bool
) -> list[tuple[str, str]]:
    utts = m.speaker_utterances(speaker)
    pairs = []
    for i in range(len(utts)):
        for j in range(i + 1, len(utts)):
            if cross_session_only and (
                m.by_id[utts[i]].session_id == m.by_id[utts[j]].session_id
            ):
                continue
            pairs.append((utts[i], utts[j]))
    return pairs


def _count_target_pairs(m: Manifest, speaker: str, cross_session_only: bool) -> int:
    utts = m.speaker_utterances(speaker)
    n = len(utts)
    total = n * (n - 1) // 2
    if cross_session_only:
        for sess in m.speaker_to_sessions[speaker]:
            k = len(m.session_to_utterances[sess])
            total -= k * (k - 1) // 2
    return total


def _sample_without_replacement(
    rng, n_wanted: int, total: int, enumerate_pairs, draw_pair
) -> list[tuple[str, str]]:
    """Uniform sample of distinct pairs, by full enumeration for small
    universes and dedup'd rejection sampling otherwise."""
    if total <= _ENUMERATION_LIMIT or n_wanted * 2 >= total:
        pairs = enumerate_pairs()
        idx = rng.choice(len(pairs), size=n_wanted, replace=False)
        return [pairs[i] for i in idx]
    chosen: list[tuple[str, str]] = []
    seen: set[tuple[str, str]] = set()
    while len(chosen) < n_wanted:
        pair = draw_pair()
        if pair is None or pair in seen:
            continue
        seen.add(pair)
        chosen.append(pair)
    return chosen


def generate_trials(
    m: Manifest,
    n_target: int,
    n_nontarget: int,
    seed: int,
    cross_session_targets_only: bool = False,
) -> TrialList:
    """Sample target and same-gender nontarget trials uniformly without
    replacement over all admissible unordered pairs."""
    if n_target <= 0 or n_nontarget <= 0:
        raise TrialError("trial counts must be positive")
    speakers = m.speakers
    target_counts = {
        spk: _count_target_pairs(m, spk, cross_session_targets_only)
        for spk in speakers
    }
    total_targets = sum(target_counts.values())
    if n_target > total_targets:
        raise TrialError(
            f"infeasible target count: requested {n_target}, "
            f"only {total_targets} admissible pairs"
        )

    gender_totals: dict[str, int] = {}
    gender_utts: dict[str, list[str]] = {}
    for gender in ("female", "male"):
        spk_counts = [
            len(m.speaker_utterances(spk))
            for spk in speakers
            if m.speaker_gender[spk] == gender
        ]
        n_utts = sum(spk_counts)
        cross = n_utts * (n_utts - 1) // 2 - sum(c * (c - 1) // 2 for c in spk_counts)
        gender_totals[gender] = cross
        gender_utts[gender] = sorted(
            u
            for spk in speakers
            if m.speaker_gender[spk] == gender
            for u in m.speaker_utterances(spk)
        )
    total_nontargets = sum(gender_totals.values())
    if total_nontargets == 0:
        raise TrialError("manifest has no same-gender speaker pair")
    if n_nontarget > total_nontargets:
        raise TrialError(
            f"infeasible nontarget count: requested {n_nontarget}, "
            f"only {total_nontargets} admissible pairs"
        )

    rng = make_rng(seed)

    def enumerate_targets() -> list[tuple[str, str]]:
        pairs: list[tuple[str, str]] = []
        for spk in speakers:
            pairs.extend(
                _target_pairs_of_speaker(m, spk, cross_session_targets_only)
            )
        return pairs

    spk_list = [s for s in speakers if target_counts[s] > 0]
    spk_weights = [target_counts[s] for s in spk_list]

    def draw_target() -> tuple[str, str] | None:
        total = sum(spk_weights)
        probs = [w / total for w in spk_weights]
        spk = spk_list[rng.choice(len(spk_list), p=probs)]
        utts = m.speaker_utterances(spk)
        i, j = rng.choice(len(utts), size=2, replace=False)
        a, b = utts[i], utts[j]
        if cross_session_targets_only and m.by_id[a].session_id == m.by_id[b].session_id:
            return None
        return (a, b) if a < b else (b, a)

    target_pairs = _sample_without_replacement(
        rng, n_target, total_targets, enumerate_targets, draw_target
    )

    def enumerate_nontargets() -> list[tuple[str, str]]:
        pairs: list[tuple[str, str]] = []
        for gender in ("female", "male"):
            utts = gender_utts[gender]
            for i in range(len(utts)):
                for j in range(i + 1, len(utts)):
                    if m.by_id[utts[i]].speaker_id != m.by_id[utts[j]].speaker_id:
                        pairs.append((utts[i], utts[j]))
        return pairs

    genders = [g for g in ("female", "male") if gender_totals[g] > 0]
    gender_probs = [
        gender_totals[g] / total_nontargets for g in genders
    ]

    def draw_nontarget() -> tuple[str, str] | None:
        gender = genders[rng.choice(len(genders), p=gender_probs)]
        utts = gender_utts[gender]
        i, j = rng.choice(len(utts), size=2, replace=False)
        a, b = utts[i], utts[j]
        if m.by_id[a].speaker_id == m.by_id[b].speaker_id:
            return None
        return (a, b) if a < b else (b, a)

    nontarget_pairs = _sample_without_replacement(
        rng, n_nontarget, total_nontargets, enumerate_nontargets, draw_nontarget
    )

    trials = [Trial(TARGET, a, b) for a, b in target_pairs]
    trials.extend(Trial(NONTARGET, a, b) for a, b in nontarget_pairs)
    return TrialList(tuple(trials))


def validate_trials(t: TrialList, m: Manifest) -> list[str]:
    """Check every trial against the manifest; an empty report is valid."""
    issues: list[str] = []
    for idx, trial in enumerate(t.trials):
        missing = [u for u in trial.pair if u not in m.by_id]
        if missing:
            issues.append(f"trial {idx}: unknown utterance id(s) {missing}")
            continue
        rec_a = m.by_id[trial.utterance_a]
        rec_b = m.by_id[trial.utterance_b]
        same_speaker = rec_a.speaker_id == rec_b.speaker_id
        if trial.label == TARGET and not same_speaker:
            issues.append(
                f"trial {idx}: labeled target but speakers differ "
                f"({rec_a.speaker_id!r} vs {rec_b.speaker_id!r})"
            )
        if trial.label == NONTARGET:
            if same_speaker:
                issues.append(
                    f"trial {idx}: labeled nontarget but same speaker "
                    f"{rec_a.speaker_id!r}"
                )
            elif rec_a.gender != rec_b.gender:
                issues.append(
                    f"trial {idx}: nontarget pair crosses genders "
                    f"({rec_a.gender} vs {rec_b.gender})"
                )
    return issues


def write_trials(t: TrialList, dest: IO[str]) -> None:
    for trial in t.trials:
        label = "1" if trial.label == TARGET else "0"
        dest.write(f"{label} {trial.utterance_a} {trial.utterance_b}\n")


def read_trials(source: IO[str]) -> TrialList:
    trials: list[Trial] = []
    for line_no, line in enumerate(source, start=1):
        line = line.rstrip("\r\n")
        if not line:
            continue
        parts = line.split()
        if len(parts) != 3 or parts[0] not in ("0", "1"):
            raise TrialError(f"malformed trial line {line_no}: {line!r}")
        label = TARGET if parts[0] == "1" else NONTARGET
        trials.append(Trial(label, parts[1], parts[2]))
    return TrialList(tuple(trials))


def read_trials_path(path: str) -> TrialList:
    with open(path, "r", encoding="utf-8", newline="") as f:
        return read_trials(f)


def write_trials_path(t: TrialList, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        write_trials(t, f)
