from __future__ import annotations

import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tinyvox.scoring import (
    EmbeddingSet,
    ScoredTrial,
    ScoringError,
    compute_eer,
    cosine_score,
    eer_from_scores,
    read_embeddings_binary,
    read_embeddings_text,
    score_trials,
    write_embeddings_binary,
    write_embeddings_text,
)
from tinyvox.trials import NONTARGET, TARGET, Trial, TrialList


def oracle_eer(scores, labels):
    """Brute-force sweep: FAR/FRR at midpoints between consecutive
    distinct scores (plus both extremes), crossing found by linear
    interpolation of the FRR coordinate."""
    tar = sorted(s for s, l in zip(scores, labels) if l)
    non = sorted(s for s, l in zip(scores, labels) if not l)
    distinct = sorted(set(scores))
    thresholds = [distinct[0] - 1.0]
    for lo, hi in zip(distinct, distinct[1:]):
        thresholds.append((lo + hi) / 2.0)
    thresholds.append(distinct[-1] + 1.0)
    points = []
    for t in thresholds:
        far = sum(1 for s in non if s >= t) / len(non)
        frr = sum(1 for s in tar if s < t) / len(tar)
        points.append((far, frr))
    for (far0, frr0), (far1, frr1) in zip(points, points[1:]):
        d0, d1 = far0 - frr0, far1 - frr1
        if d1 <= 0.0:
            if d1 == 0.0:
                return frr1
            frac = d0 / (d0 - d1)
            return frr0 + frac * (frr1 - frr0)
    raise AssertionError("no crossing found")


# --- cosine_score ---

def test_cosine_identity():
    v = np.array([0.3, -1.2, 4.0])
    assert cosine_score(v, v) == pytest.approx(1.0)


def test_cosine_orthogonal():
    assert cosine_score([1.0, 0.0], [0.0, 2.0]) == 0.0


def test_cosine_known_value():
    assert cosine_score([1.0, 2.0, 3.0], [4.0, 5.0, 6.0]) == pytest.approx(
        0.9746318, abs=5e-8
    )


def test_cosine_errors():
    with pytest.raises(ScoringError, match="zero"):
        cosine_score([0.0, 0.0], [1.0, 0.0])
    with pytest.raises(ScoringError, match="mismatch"):
        cosine_score([1.0], [1.0, 2.0])


def test_cosine_scale_invariance():
    rng = np.random.default_rng(0)
    a = rng.normal(size=6)
    b = rng.normal(size=6)
    assert cosine_score(a, b) == pytest.approx(
        cosine_score(3.7 * a, 0.01 * b), abs=1e-12
    )


# --- score_trials ---

def _embedding_set():
    return EmbeddingSet(
        3,
        {
            "u1": np.array([1.0, 0.0, 0.0]),
            "u2": np.array([1.0, 0.0, 0.0]),
            "u3": np.array([0.0, 1.0, 0.0]),
        },
    )


def test_score_trials_empty():
    assert score_trials(_embedding_set(), TrialList(())) == []


def test_score_trials_identical_embeddings():
    t = TrialList((Trial(TARGET, "u1", "u2"),))
    [st_] = score_trials(_embedding_set(), t)
    assert st_.score == pytest.approx(1.0)


def test_score_trials_elementwise():
    e = _embedding_set()
    t = TrialList(
        (
            Trial(TARGET, "u1", "u2"),
            Trial(NONTARGET, "u1", "u3"),
            Trial(NONTARGET, "u2", "u3"),
        )
    )
    scored = score_trials(e, t)
    for st_ in scored:
        expected = cosine_score(
            e.entries[st_.trial.utterance_a], e.entries[st_.trial.utterance_b]
        )
        assert st_.score == expected


def test_score_trials_missing_ids():
    t = TrialList((Trial(TARGET, "u1", "zz"), Trial(TARGET, "u2", "yy")))
    with pytest.raises(ScoringError) as err:
        score_trials(_embedding_set(), t)
    assert "zz" in str(err.value) and "yy" in str(err.value)


# --- compute_eer ---

def test_eer_perfect_separation():
    scores = [0.9, 0.8, 0.7, 0.2, 0.1]
    labels = [True, True, True, False, False]
    eer, _ = eer_from_scores(scores, labels)
    assert eer == 0.0


def test_eer_all_equal_scores():
    eer, _ = eer_from_scores([0.5] * 6, [True, False, True, False, False, True])
    assert eer == 0.5


def test_eer_twelve_score_fixture():
    scores = [0.91, 0.85, 0.77, 0.72, 0.66, 0.60, 0.55, 0.50, 0.44, 0.39, 0.31, 0.20]
    labels = [True, True, False, True, True, False, True, False, False, True, False, False]
    eer, _ = eer_from_scores(scores, labels)
    assert eer == pytest.approx(oracle_eer(scores, labels), abs=1e-12)


def test_eer_single_class_error():
    with pytest.raises(ScoringError):
        eer_from_scores([0.1, 0.2], [True, True])


def test_eer_matches_oracle_randomized():
    rng = np.random.default_rng(123)
    for _ in range(200):
        n = int(rng.integers(2, 300))
        scores = np.round(rng.normal(size=n), 2)  # force ties
        labels = rng.random(size=n) < 0.5
        if labels.all() or not labels.any():
            continue
        eer, _ = eer_from_scores(scores, labels)
        assert eer == pytest.approx(oracle_eer(scores, labels), abs=1e-12)


@given(
    st.lists(st.floats(-5, 5), min_size=2, max_size=50),
    st.data(),
)
@settings(max_examples=60, deadline=None)
def test_eer_rank_invariance(scores, data):
    labels = data.draw(
        st.lists(st.booleans(), min_size=len(scores), max_size=len(scores))
    )
    if not (any(labels) and not all(labels)):
        return
    eer, _ = eer_from_scores(scores, labels)
    transformed = [4.0 * s for s in scores]  # strictly increasing, tie-preserving
    eer2, _ = eer_from_scores(transformed, labels)
    assert eer == pytest.approx(eer2, abs=1e-9)


def test_eer_label_swap_score_negation_symmetry():
    rng = np.random.default_rng(7)
    scores = rng.normal(size=80)
    labels = rng.random(size=80) < 0.4
    eer, _ = eer_from_scores(scores, labels)
    eer_swapped, _ = eer_from_scores(-scores, ~labels)
    assert eer == pytest.approx(eer_swapped, abs=1e-12)


def test_eer_random_labels_approach_half():
    rng = np.random.default_rng(99)
    scores = rng.normal(size=10000)
    labels = rng.random(size=10000) < 0.5
    eer, _ = eer_from_scores(scores, labels)
    assert abs(eer - 0.5) < 0.03


def test_compute_eer_on_scored_trials():
    trials = [
        ScoredTrial(Trial(TARGET, f"a{i}", f"b{i}"), s)
        for i, s in enumerate([0.9, 0.8])
    ] + [
        ScoredTrial(Trial(NONTARGET, f"c{i}", f"d{i}"), s)
        for i, s in enumerate([0.1, 0.2])
    ]
    eer, threshold = compute_eer(trials)
    assert eer == 0.0
    assert 0.2 <= threshold <= 0.9


# --- embedding file formats ---

def test_embeddings_text_round_trip():
    e = _embedding_set()
    buf = io.StringIO()
    write_embeddings_text(e, buf)
    buf.seek(0)
    back = read_embeddings_text(buf)
    assert back.dimension == 3
    for k in e.entries:
        np.testing.assert_array_equal(back.entries[k], e.entries[k])


def test_embeddings_binary_round_trip():
    e = _embedding_set()
    buf = io.BytesIO()
    write_embeddings_binary(e, buf)
    buf.seek(0)
    back = read_embeddings_binary(buf)
    assert back.dimension == 3
    for k in e.entries:
        np.testing.assert_allclose(back.entries[k], e.entries[k], atol=1e-6)


def test_embedding_set_invariants():
    with pytest.raises(ScoringError, match="zero"):
        EmbeddingSet(2, {"u": np.zeros(2)})
    with pytest.raises(ScoringError, match="shape"):
        EmbeddingSet(2, {"u": np.ones(3)})
    with pytest.raises(ScoringError, match="finite"):
        EmbeddingSet(2, {"u": np.array([1.0, np.nan])})
