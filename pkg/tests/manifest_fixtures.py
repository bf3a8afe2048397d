from __future__ import annotations

from tinyvox.manifest import Manifest, UtteranceRecord


def make_manifest(layout: dict[str, tuple[str, list[int]]], base_duration: float = 5.0) -> Manifest:
    """Build a manifest from {speaker: (gender, [utts per session, ...])}.

    Ids are generated as spk/spk-sN/spk-sN-uM so lexicographic order is
    predictable in tests.
    """
    records = []
    for speaker, (gender, session_sizes) in layout.items():
        for s_idx, n_utts in enumerate(session_sizes):
            session_id = f"{speaker}-s{s_idx:03d}"
            for u_idx in range(n_utts):
                records.append(
                    UtteranceRecord(
                        utterance_id=f"{session_id}-u{u_idx:03d}",
                        speaker_id=speaker,
                        session_id=session_id,
                        duration_seconds=base_duration,
                        gender=gender,
                    )
                )
    return Manifest(records)
