from __future__ import annotations

import pytest

from tinyvox.manifest import Manifest

from manifest_fixtures import make_manifest


@pytest.fixture
def twelve_row_manifest() -> Manifest:
    # 3 speakers x 2 sessions x 2 utterances
    return make_manifest(
        {
            "spk0": ("male", [2, 2]),
            "spk1": ("female", [2, 2]),
            "spk2": ("male", [2, 2]),
        }
    )


@pytest.fixture
def four_speaker_manifest() -> Manifest:
    # 2 speakers per gender, 3 utterances each
    return make_manifest(
        {
            "f0": ("female", [2, 1]),
            "f1": ("female", [3]),
            "m0": ("male", [1, 2]),
            "m1": ("male", [3]),
        }
    )
