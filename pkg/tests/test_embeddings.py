import struct

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from marmofeat.embeddings import (EmbeddingSequence, embedding_path, load_embeddings, load_pooled_layer,
                                  pool_stats, write_embeddings)
from marmofeat.errors import EmbeddingFormatError, MissingEmbeddingError, TruncatedPayloadError


def test_minimal_file(tmp_path):
    p = tmp_path / "s.layer0.emb"
    p.write_bytes(b"EMB1" + struct.pack("<II", 1, 4) + struct.pack("<4f", 1, 2, 3, 4))
    e = load_embeddings(p)
    assert (e.n_frames, e.dim) == (1, 4)
    assert_array_equal(e.frames, [[1, 2, 3, 4]])


def test_round_trip_bit_exact(tmp_path):
    frames = np.random.default_rng(0).normal(size=(1000, 12)).astype(np.float32)
    write_embeddings(tmp_path / "x.emb", frames)
    assert load_embeddings(tmp_path / "x.emb").frames.tobytes() == frames.tobytes()
    assert (tmp_path / "x.emb").stat().st_size == 12 + 4 * frames.size


def test_format_errors(tmp_path):
    p = tmp_path / "bad.emb"
    p.write_bytes(b"EMB2" + struct.pack("<II", 1, 1) + b"\0" * 4)
    with pytest.raises(EmbeddingFormatError, match="magic"):
        load_embeddings(p)
    p.write_bytes(b"EMB1" + struct.pack("<II", 2, 3) + b"\0" * 20)
    with pytest.raises(TruncatedPayloadError):
        load_embeddings(p)
    p.write_bytes(b"EMB1" + struct.pack("<II", 1, 1) + struct.pack("<f", np.nan))
    with pytest.raises(EmbeddingFormatError, match="non-finite"):
        load_embeddings(p)


def test_pool_examples():
    v = np.array([[1.5, -2.0, 3.0]])
    assert_array_equal(pool_stats(EmbeddingSequence(v)).vector, [1.5, -2.0, 3.0, 0, 0, 0])
    pooled = pool_stats(EmbeddingSequence(np.vstack([v, -v]))).vector
    assert_array_equal(pooled, [0, 0, 0, 1.5, 2.0, 3.0])


def test_pool_matches_columnwise_oracle():
    x = np.random.default_rng(1).normal(size=(7, 768))
    pooled = pool_stats(EmbeddingSequence(x)).vector
    mu = [sum(col) / 7 for col in x.T]
    sd = [np.sqrt(sum((c - m) ** 2 for c in col) / 7) for col, m in zip(x.T, mu)]
    assert pooled.shape == (1536,)
    assert_allclose(pooled, np.concatenate([mu, sd]), atol=1e-12)


def test_pool_invariances():
    rng = np.random.default_rng(2)
    x = rng.normal(size=(9, 5))
    base = pool_stats(EmbeddingSequence(x)).vector
    assert_allclose(pool_stats(EmbeddingSequence(x[rng.permutation(9)])).vector, base, atol=1e-14)
    assert_allclose(pool_stats(EmbeddingSequence(np.vstack([x, x]))).vector, base, atol=1e-14)


def test_missing_layer_names_segment(tmp_path):
    write_embeddings(embedding_path(tmp_path, "a", 3), np.ones((2, 4)))
    assert load_pooled_layer(tmp_path, ["a"], 3).shape == (1, 8)
    with pytest.raises(MissingEmbeddingError) as err:
        load_pooled_layer(tmp_path, ["a", "b"], 3)
    assert err.value.segment_id == "b" and err.value.layer == 3
    assert "'b'" in str(err.value) and "layer 3" in str(err.value)
