import numpy as np
import pytest

from deplima import embeddings as E
from deplima.errors import BadSubquantizerCount


def make_table(rng, n_words=40, dim=16, n_buckets=64):
    words = [f"word{i}" for i in range(n_words)]
    vectors = rng.normal(size=(n_words, dim))
    buckets = rng.normal(size=(n_buckets, dim))
    return E.SubwordTable(dim, words, vectors, buckets)


def test_lookup_known_word_returns_stored_vector():
    rng = np.random.default_rng(0)
    table = make_table(rng)
    assert np.array_equal(table.lookup("word3"), table.vectors[3])


def test_oov_zero_buckets_give_zero_vector():
    table = E.SubwordTable(4, ["a"], np.ones((1, 4)), np.zeros((8, 4)))
    assert np.array_equal(table.lookup("zz"), np.zeros(4))


def test_oov_mean_matches_hand_computation():
    dim, n_buckets = 4, 16
    buckets = np.zeros((n_buckets, dim))
    rng = np.random.default_rng(1)
    filled = rng.normal(size=(n_buckets, dim))
    buckets[:] = filled
    table = E.SubwordTable(dim, [], np.zeros((0, dim)), buckets)
    # n-grams of "<ab>": 3-grams <ab, ab>, 4-gram <ab>
    grams = E.word_ngrams("ab")
    assert grams == ["<ab", "ab>", "<ab>"]
    expected = np.mean(
        [filled[E.fnv1a_64(g) % n_buckets] for g in grams], axis=0
    )
    assert np.allclose(table.lookup("ab"), expected)


def test_fnv1a_reference_values():
    # published FNV-1a 64-bit test vectors
    assert E.fnv1a_64("") == 0xCBF29CE484222325
    assert E.fnv1a_64("a") == 0xAF63DC4C8601EC8C
    assert E.fnv1a_64("foobar") == 0x85944171F73967E8


def test_quantize_identical_rows_reconstruct_exactly():
    dim = 8
    vec = np.tile(np.arange(dim, dtype=float), (10, 1))
    table = E.SubwordTable(dim, [f"w{i}" for i in range(10)], vec, np.tile(np.arange(dim, dtype=float), (4, 1)))
    q = E.quantize(table, m=4, seed=0)
    for i in range(10):
        assert np.allclose(q.reconstruct(i), vec[0])


def test_quantize_two_distinct_rows_exact():
    dim = 8
    rows = np.vstack([np.zeros(dim), np.ones(dim)])
    table = E.SubwordTable(dim, ["a", "b"], rows, np.zeros((2, dim)))
    q = E.quantize(table, m=2, seed=0)
    assert np.allclose(q.lookup("a"), np.zeros(dim))
    assert np.allclose(q.lookup("b"), np.ones(dim))


def test_code_storage_ratio_is_eight():
    # dim=128 floats -> 512 bytes/row at f32; m=64 one-byte codes -> 64 bytes
    rng = np.random.default_rng(3)
    dim = 128
    table = E.SubwordTable(
        dim, [f"w{i}" for i in range(300)], rng.normal(size=(300, dim)),
        rng.normal(size=(32, dim)),
    )
    q = E.quantize(table, m=dim // 2, seed=1)
    assert q.source_storage_bytes() / q.code_storage_bytes() == 8.0


def test_quantized_lookup_agrees_when_exact():
    dim = 8
    rng = np.random.default_rng(5)
    base = rng.normal(size=(3, dim))
    rows = base[np.array([0, 1, 2, 0, 1])]
    table = E.SubwordTable(dim, [f"w{i}" for i in range(5)], rows, base.copy())
    q = E.quantize(table, m=4, seed=2)
    for w in table.words:
        assert np.allclose(q.lookup(w), table.lookup(w))
    # OOV path shares the formula: mean over reconstructed bucket rows
    assert np.allclose(q.lookup("xyz"), table.lookup("xyz"))


def test_kmeans_objective_decreases():
    rng = np.random.default_rng(11)
    data = rng.normal(size=(1000, 2))
    centers, assign, trace = E._kmeans(data, 16, rng)
    assert trace[-1] <= trace[0]
    assert centers.shape == (16, 2)
    # error after training is below the k-means++ initial objective
    assert trace[-1] < trace[0]


def test_bad_subquantizer_count():
    table = make_table(np.random.default_rng(0), dim=16)
    with pytest.raises(BadSubquantizerCount):
        E.quantize(table, m=5)


def test_text_format_roundtrip(tmp_path):
    rng = np.random.default_rng(9)
    table = make_table(rng, n_words=12, dim=6, n_buckets=32)
    path = tmp_path / "vectors.vec"
    E.write_text_table(path, table)
    loaded = E.read_text_table(path, n_buckets=32)
    assert loaded.dim == 6
    assert loaded.words == table.words
    assert np.allclose(loaded.vectors, table.vectors)
    # buckets are synthesized, so OOV lookup is defined
    assert loaded.lookup("unseenword").shape == (6,)


def test_binary_store_roundtrip(tmp_path):
    rng = np.random.default_rng(13)
    table = make_table(rng, n_words=20, dim=8, n_buckets=16)
    q = E.quantize(table, m=4, seed=7)
    path = tmp_path / "table.dlq8"
    E.save_quantized(path, q)
    loaded = E.load_quantized(path)
    assert loaded.words == q.words
    assert np.array_equal(loaded.codes, q.codes)
    for w in ["word0", "word7", "missing"]:
        got, want = loaded.lookup(w), q.lookup(w)
        assert np.allclose(got, want, atol=1e-6)  # f32 codebook storage
    assert E.load_table(path).words == q.words


def test_quantization_reduces_reconstruction_error_vs_init():
    rng = np.random.default_rng(21)
    data = rng.normal(size=(1000, 32))
    table = E.SubwordTable(32, [f"w{i}" for i in range(1000)], data, np.zeros((4, 32)))
    q = E.quantize(table, m=16, seed=3)
    recon = np.stack([q.reconstruct(i) for i in range(1000)])
    mse = ((recon - data) ** 2).mean()
    # k-means converges well below the variance of the data per coordinate
    assert mse < data.var()
