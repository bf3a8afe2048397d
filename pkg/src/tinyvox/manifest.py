"""Corpus metadata: utterance records, the manifest index, and statistics.

The manifest is the speaker -> session -> utterance hierarchy every other
module consumes.  Text formats: CSV with header
``utterance_id,speaker_id,session_id,duration_seconds,gender,audio_path``
(audio_path may be empty) and a JSONL mirror with identical field names.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
from dataclasses import dataclass
from typing import IO, Iterable

GENDERS = ("male", "female")
CSV_FIELDS = (
    "utterance_id",
    "speaker_id",
    "session_id",
    "duration_seconds",
    "gender",
    "audio_path",
)


class ManifestError(ValueError):
    """Raised for malformed or inconsistent manifest data."""


@dataclass(frozen=True)
class UtteranceRecord:
    utterance_id: str
    speaker_id: str
    session_id: str
    duration_seconds: float
    gender: str
    audio_path: str | None = None

    def __post_init__(self) -> None:
        if not self.utterance_id:
            raise ManifestError("empty utterance_id")
        if not self.speaker_id:
            raise ManifestError(f"empty speaker_id for utterance {self.utterance_id!r}")
        if not self.session_id:
            raise ManifestError(f"empty session_id for utterance {self.utterance_id!r}")
        if not self.duration_seconds > 0:
            raise ManifestError(
                f"non-positive duration for utterance {self.utterance_id!r}"
            )
        if self.gender not in GENDERS:
            raise ManifestError(
                f"gender must be one of {GENDERS}, got {self.gender!r} "
                f"for utterance {self.utterance_id!r}"
            )


@dataclass(frozen=True)
class DatasetStats:
    duration_hours: float
    n_speakers: int
    n_sessions: int
    n_utterances: int
    sessions_per_speaker: tuple[float, int, int]
    utterances_per_session: tuple[float, int, int]

    def to_dict(self) -> dict:
        return {
            "duration_hours": self.duration_hours,
            "n_speakers": self.n_speakers,
            "n_sessions": self.n_sessions,
            "n_utterances": self.n_utterances,
            "sessions_per_speaker": list(self.sessions_per_speaker),
            "utterances_per_session": list(self.utterances_per_session),
        }


class Manifest:
    """Immutable, validated collection of utterance records with indices.

    Indices map speaker -> sorted session ids and session -> sorted
    utterance ids; they are derived from the records at construction and
    never mutated afterwards.
    """

    def __init__(self, records: Iterable[UtteranceRecord]):
        self.records: tuple[UtteranceRecord, ...] = tuple(records)
        by_id: dict[str, UtteranceRecord] = {}
        session_speaker: dict[str, str] = {}
        speaker_gender: dict[str, str] = {}
        speaker_sessions: dict[str, set[str]] = {}
        session_utts: dict[str, list[str]] = {}
        for rec in self.records:
            if rec.utterance_id in by_id:
                raise ManifestError(f"duplicate utterance_id {rec.utterance_id!r}")
            by_id[rec.utterance_id] = rec
            prev_spk = session_speaker.setdefault(rec.session_id, rec.speaker_id)
            if prev_spk != rec.speaker_id:
                raise ManifestError(
                    f"session {rec.session_id!r} shared by speakers "
                    f"{prev_spk!r} and {rec.speaker_id!r}"
                )
            prev_gender = speaker_gender.setdefault(rec.speaker_id, rec.gender)
            if prev_gender != rec.gender:
                raise ManifestError(
                    f"inconsistent gender for speaker {rec.speaker_id!r}"
                )
            speaker_sessions.setdefault(rec.speaker_id, set()).add(rec.session_id)
            session_utts.setdefault(rec.session_id, []).append(rec.utterance_id)
        self.by_id = by_id
        self.speaker_to_sessions: dict[str, tuple[str, ...]] = {
            spk: tuple(sorted(sessions)) for spk, sessions in speaker_sessions.items()
        }
        self.session_to_utterances: dict[str, tuple[str, ...]] = {
            sess: tuple(sorted(utts)) for sess, utts in session_utts.items()
        }
        self.session_to_speaker = session_speaker
        self.speaker_gender = speaker_gender

    @property
    def speakers(self) -> tuple[str, ...]:
        return tuple(sorted(self.speaker_to_sessions))

    def speaker_utterances(self, speaker_id: str) -> tuple[str, ...]:
        out: list[str] = []
        for sess in self.speaker_to_sessions[speaker_id]:
            out.extend(self.session_to_utterances[sess])
        return tuple(sorted(out))

    def subset_by_utterance_ids(self, utterance_ids: Iterable[str]) -> "Manifest":
        wanted = set(utterance_ids)
        return Manifest(rec for rec in self.records if rec.utterance_id in wanted)

    def __len__(self) -> int:
        return len(self.records)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Manifest):
            return NotImplemented
        return sorted(self.records, key=lambda r: r.utterance_id) == sorted(
            other.records, key=lambda r: r.utterance_id
        )

    def digest(self) -> str:
        """sha256 of the canonical CSV serialization (record order sorted)."""
        buf = io.StringIO()
        canonical = Manifest(
            sorted(self.records, key=lambda r: r.utterance_id)
        )
        write_manifest(canonical, buf, "csv")
        return hashlib.sha256(buf.getvalue().encode("utf-8")).hexdigest()


def _record_from_fields(fields: dict, line_no: int) -> UtteranceRecord:
    missing = [k for k in CSV_FIELDS[:-1] if fields.get(k) in (None, "")]
    if missing:
        raise ManifestError(f"missing fields {missing}, line {line_no}")
    try:
        duration = float(fields["duration_seconds"])
    except (TypeError, ValueError):
        raise ManifestError(
            f"malformed duration {fields['duration_seconds']!r}, line {line_no}"
        ) from None
    if not duration > 0:
        raise ManifestError(f"non-positive duration, line {line_no}")
    gender = fields["gender"]
    if gender not in GENDERS:
        raise ManifestError(f"unknown gender {gender!r}, line {line_no}")
    audio_path = fields.get("audio_path") or None
    return UtteranceRecord(
        utterance_id=fields["utterance_id"],
        speaker_id=fields["speaker_id"],
        session_id=fields["session_id"],
        duration_seconds=duration,
        gender=gender,
        audio_path=audio_path,
    )


def load_manifest(source: IO[str], format: str = "csv") -> Manifest:
    """Parse and validate a manifest from a text stream.

    Errors carry the 1-based line number of the offending row (the CSV
    header counts as line 1).
    """
    records: list[UtteranceRecord] = []
    if format == "csv":
        reader = csv.DictReader(source)
        if reader.fieldnames is None:
            raise ManifestError("empty manifest stream")
        unknown = set(reader.fieldnames) - set(CSV_FIELDS)
        if unknown:
            raise ManifestError(f"unknown columns {sorted(unknown)}")
        for line_no, row in enumerate(reader, start=2):
            if None in row.values() or None in row:
                raise ManifestError(f"malformed row, line {line_no}")
            records.append(_record_from_fields(row, line_no))
    elif format == "jsonl":
        for line_no, line in enumerate(source, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                fields = json.loads(line)
            except json.JSONDecodeError:
                raise ManifestError(f"malformed JSON, line {line_no}") from None
            if not isinstance(fields, dict):
                raise ManifestError(f"malformed row, line {line_no}")
            records.append(_record_from_fields(fields, line_no))
    else:
        raise ValueError(f"unknown manifest format {format!r}")
    return Manifest(records)


def write_manifest(m: Manifest, dest: IO[str], format: str = "csv") -> None:
    if format == "csv":
        writer = csv.writer(dest, lineterminator="\n")
        writer.writerow(CSV_FIELDS)
        for rec in m.records:
            writer.writerow(
                [
                    rec.utterance_id,
                    rec.speaker_id,
                    rec.session_id,
                    repr(rec.duration_seconds),
                    rec.gender,
                    rec.audio_path or "",
                ]
            )
    elif format == "jsonl":
        for rec in m.records:
            dest.write(
                json.dumps(
                    {
                        "utterance_id": rec.utterance_id,
                        "speaker_id": rec.speaker_id,
                        "session_id": rec.session_id,
                        "duration_seconds": rec.duration_seconds,
                        "gender": rec.gender,
                        "audio_path": rec.audio_path or "",
                    },
                    sort_keys=True,
                )
                + "\n"
            )
    else:
        raise ValueError(f"unknown manifest format {format!r}")


def load_manifest_path(path: str, format: str | None = None) -> Manifest:
    if format is None:
        format = "jsonl" if str(path).endswith(".jsonl") else "csv"
    with open(path, "r", encoding="utf-8", newline="") as f:
        return load_manifest(f, format)


def write_manifest_path(m: Manifest, path: str, format: str | None = None) -> None:
    if format is None:
        format = "jsonl" if str(path).endswith(".jsonl") else "csv"
    with open(path, "w", encoding="utf-8", newline="") as f:
        write_manifest(m, f, format)


def manifest_stats(m: Manifest) -> DatasetStats:
    """Exact counts plus mean/min/max of sessions-per-speaker and
    utterances-per-session; duration reported in hours."""
    if len(m) == 0:
        raise ManifestError("empty manifest")
    sess_per_spk = [len(s) for s in m.speaker_to_sessions.values()]
    utt_per_sess = [len(u) for u in m.session_to_utterances.values()]
    total_seconds = sum(rec.duration_seconds for rec in m.records)
    return DatasetStats(
        duration_hours=total_seconds / 3600.0,
        n_speakers=len(sess_per_spk),
        n_sessions=len(utt_per_sess),
        n_utterances=len(m),
        sessions_per_speaker=(
            sum(sess_per_spk) / len(sess_per_spk),
            min(sess_per_spk),
            max(sess_per_spk),
        ),
        utterances_per_session=(
            sum(utt_per_sess) / len(utt_per_sess),
            min(utt_per_sess),
            max(utt_per_sess),
        ),
    )
