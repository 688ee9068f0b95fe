"""Deterministic text embedding and cosine similarity."""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from etp.embedding import (
    DimensionMismatch,
    HashedBagOfWords,
    ZeroVector,
    cosine_similarity,
)


def test_cosine_pinned_value():
    got = cosine_similarity([1.0, 0.0], [1.0, 1.0])
    assert abs(got - 0.70710678) <= 1e-9 + 1e-8  # sqrt(2)/2 to the printed digits
    assert got == pytest.approx(math.sqrt(2) / 2, abs=1e-12)


def test_cosine_basic_geometry():
    assert cosine_similarity([1, 0], [0, 1]) == pytest.approx(0.0, abs=1e-15)
    assert cosine_similarity([2, 0], [5, 0]) == pytest.approx(1.0, abs=1e-15)
    assert cosine_similarity([1, 0], [-3, 0]) == pytest.approx(-1.0, abs=1e-15)
    # Scale invariance.
    assert cosine_similarity([1, 2, 3], [2, 4, 6]) == pytest.approx(1.0, abs=1e-12)


def test_cosine_errors():
    with pytest.raises(DimensionMismatch):
        cosine_similarity([1, 0], [1, 0, 0])
    with pytest.raises(DimensionMismatch):
        cosine_similarity([[1, 0]], [[1, 0]])
    with pytest.raises(ZeroVector):
        cosine_similarity([0, 0], [1, 0])
    with pytest.raises(ZeroVector):
        cosine_similarity([1, 0], [0, 0])


def test_embedding_shape_and_norm():
    emb = HashedBagOfWords()
    vec = emb.embed("grasp the red mug on the table")
    assert vec.shape == (64,)
    assert vec.dtype == np.float64
    assert np.linalg.norm(vec) == pytest.approx(1.0, abs=1e-12)


def test_embedding_deterministic_across_instances():
    a = HashedBagOfWords(seed=0).embed("navigate to the kitchen")
    b = HashedBagOfWords(seed=0).embed("navigate to the kitchen")
    assert np.array_equal(a, b)


def test_embedding_seed_changes_vectors():
    text = "segment the cup"
    a = HashedBagOfWords(seed=0).embed(text)
    b = HashedBagOfWords(seed=1).embed(text)
    assert not np.array_equal(a, b)


def test_embedding_tokenization_is_case_and_punct_insensitive():
    emb = HashedBagOfWords()
    assert np.array_equal(emb.embed("Pick-Up: MUG!"), emb.embed("pick up mug"))


def test_embedding_empty_text_is_zero_vector():
    emb = HashedBagOfWords()
    vec = emb.embed("???")
    assert np.count_nonzero(vec) == 0
    with pytest.raises(ZeroVector):
        cosine_similarity(vec, emb.embed("mug"))


def test_embedding_similarity_orders_related_text_first():
    emb = HashedBagOfWords()
    anchor = emb.embed("detect the red mug in the image")
    near = emb.embed("detect a red mug from an image crop")
    far = emb.embed("compute a collision free joint trajectory")
    assert cosine_similarity(anchor, near) > cosine_similarity(anchor, far)


def test_embedding_rejects_bad_dim():
    with pytest.raises(Exception):
        HashedBagOfWords(dim=0)


@settings(max_examples=60, deadline=None)
@given(st.text(alphabet="abcdef mug", min_size=1, max_size=40))
def test_embedding_norm_property(text):
    vec = HashedBagOfWords().embed(text)
    norm = float(np.linalg.norm(vec))
    assert norm == pytest.approx(1.0, abs=1e-9) or norm == 0.0


@settings(max_examples=60, deadline=None)
@given(
    st.lists(st.floats(-5, 5), min_size=2, max_size=8),
    st.lists(st.floats(-5, 5), min_size=2, max_size=8),
)
def test_cosine_bounds_property(xs, ys):
    n = min(len(xs), len(ys))
    xs, ys = xs[:n], ys[:n]
    # Squared norms can underflow to zero for denormal inputs; skip those too.
    if sum(v * v for v in xs) == 0.0 or sum(v * v for v in ys) == 0.0:
        return
    value = cosine_similarity(xs, ys)
    assert -1.0 - 1e-9 <= value <= 1.0 + 1e-9
    assert value == pytest.approx(cosine_similarity(ys, xs), abs=1e-12)
