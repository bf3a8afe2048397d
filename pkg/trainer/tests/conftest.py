from __future__ import annotations

import pytest

from tinyvox import subsetting
from tinyvox.manifest import write_manifest_path

from toy_fixture_corpus import grid_manifest


@pytest.fixture
def train_subsets(tmp_path):
    """Equal-size training subsets with low vs high session variability."""
    pool = grid_manifest()
    params = subsetting.SubsetParams(utterances_per_speaker=8)
    paths = {}
    for name, build in (
        ("few_sessions", subsetting.build_few_sessions),
        ("many_sessions", subsetting.build_many_sessions),
    ):
        path = tmp_path / f"{name}.csv"
        write_manifest_path(build(pool, params), str(path))
        paths[name] = str(path)
    return paths
