from __future__ import annotations

import io

import pytest

from tinyvox.manifest import (
    Manifest,
    ManifestError,
    UtteranceRecord,
    load_manifest,
    manifest_stats,
    write_manifest,
)

from manifest_fixtures import make_manifest

ONE_ROW_CSV = (
    "utterance_id,speaker_id,session_id,duration_seconds,gender,audio_path\n"
    "u1,spkA,sessA,3.5,male,\n"
)


def test_load_single_row_csv():
    m = load_manifest(io.StringIO(ONE_ROW_CSV), "csv")
    assert len(m) == 1
    stats = manifest_stats(m)
    assert (stats.n_speakers, stats.n_sessions, stats.n_utterances) == (1, 1, 1)


def test_load_single_row_jsonl():
    line = (
        '{"utterance_id": "u1", "speaker_id": "spkA", "session_id": "sessA",'
        ' "duration_seconds": 3.5, "gender": "male", "audio_path": ""}\n'
    )
    m = load_manifest(io.StringIO(line), "jsonl")
    assert len(m) == 1


def test_negative_duration_reports_line_number():
    bad = ONE_ROW_CSV + "u2,spkA,sessA,-1.0,male,\n"
    with pytest.raises(ManifestError, match="non-positive duration, line 3"):
        load_manifest(io.StringIO(bad), "csv")


def test_duplicate_utterance_id_rejected():
    bad = ONE_ROW_CSV + "u1,spkA,sessA,2.0,male,\n"
    with pytest.raises(ManifestError, match="duplicate utterance_id"):
        load_manifest(io.StringIO(bad), "csv")


def test_session_shared_by_two_speakers_rejected():
    bad = ONE_ROW_CSV + "u2,spkB,sessA,2.0,male,\n"
    with pytest.raises(ManifestError, match="shared by speakers"):
        load_manifest(io.StringIO(bad), "csv")


def test_inconsistent_gender_rejected():
    bad = ONE_ROW_CSV + "u2,spkA,sessB,2.0,female,\n"
    with pytest.raises(ManifestError, match="inconsistent gender"):
        load_manifest(io.StringIO(bad), "csv")


def test_twelve_row_fixture_stats(twelve_row_manifest):
    stats = manifest_stats(twelve_row_manifest)
    assert stats.n_speakers == 3
    assert stats.n_sessions == 6
    assert stats.n_utterances == 12
    assert stats.sessions_per_speaker == (2.0, 2, 2)
    assert stats.utterances_per_session == (2.0, 2, 2)
    assert stats.duration_hours == pytest.approx(12 * 5.0 / 3600.0)


def test_single_utterance_stats():
    m = make_manifest({"spk": ("female", [1])})
    stats = manifest_stats(m)
    assert stats.sessions_per_speaker == (1.0, 1, 1)
    assert stats.utterances_per_session == (1.0, 1, 1)


def test_empty_manifest_stats_error():
    with pytest.raises(ManifestError, match="empty"):
        manifest_stats(Manifest([]))


@pytest.mark.parametrize("format", ["csv", "jsonl"])
def test_round_trip(twelve_row_manifest, format):
    buf = io.StringIO()
    write_manifest(twelve_row_manifest, buf, format)
    buf.seek(0)
    reloaded = load_manifest(buf, format)
    assert reloaded == twelve_row_manifest
    assert reloaded.speaker_to_sessions == twelve_row_manifest.speaker_to_sessions
    assert reloaded.session_to_utterances == twelve_row_manifest.session_to_utterances


def test_stats_permutation_invariant(twelve_row_manifest):
    reversed_m = Manifest(reversed(twelve_row_manifest.records))
    assert manifest_stats(reversed_m) == manifest_stats(twelve_row_manifest)


def test_utterance_count_consistency(twelve_row_manifest):
    total = sum(
        len(u) for u in twelve_row_manifest.session_to_utterances.values()
    )
    assert total == len(twelve_row_manifest)


def test_record_invariants():
    with pytest.raises(ManifestError):
        UtteranceRecord("u", "s", "sess", 0.0, "male")
    with pytest.raises(ManifestError):
        UtteranceRecord("u", "s", "sess", 1.0, "other")
