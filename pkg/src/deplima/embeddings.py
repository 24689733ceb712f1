"""Subword-composed word vectors with product-quantized storage.

A SubwordTable is a full-precision table: known words map to stored rows,
out-of-vocabulary words to the mean of the hashed bucket rows of their
character 3..6-grams (the word is wrapped in '<' and '>'). Quantization
splits every row into m subvectors and replaces each with the index of its
nearest per-subspace centroid (k = 256 centroids, one byte per code), so
with m = dim/2 the code storage is exactly one eighth of float32 rows.
"""

from __future__ import annotations

import struct

import numpy as np

from .errors import BadSubquantizerCount, DimMismatch, EmptyCorpus

DEFAULT_BUCKETS = 2_000_000
CODEBOOK_SIZE = 256
KMEANS_ITERATIONS = 25

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_U64 = 0xFFFFFFFFFFFFFFFF


def fnv1a_64(text):
    """64-bit FNV-1a over the UTF-8 bytes of ``text``."""
    h = _FNV_OFFSET
    for byte in text.encode("utf-8"):
        h = ((h ^ byte) * _FNV_PRIME) & _U64
    return h


def word_ngrams(word, n_min=3, n_max=6):
    wrapped = f"<{word}>"
    out = []
    for n in range(n_min, n_max + 1):
        for i in range(len(wrapped) - n + 1):
            out.append(wrapped[i:i + n])
    return out


class SubwordTable:
    """Full-precision word vectors plus hashed n-gram buckets for OOV."""

    def __init__(self, dim, words, vectors, buckets):
        self.dim = dim
        self.words = list(words)
        self.word_index = {w: i for i, w in enumerate(self.words)}
        self.vectors = np.asarray(vectors, dtype=np.float64).reshape(len(self.words), dim)
        self.buckets = np.asarray(buckets, dtype=np.float64)
        if self.buckets.ndim != 2 or self.buckets.shape[1] != dim:
            raise DimMismatch("bucket table must be [B, dim]")

    @property
    def bucket_count(self):
        return self.buckets.shape[0]

    def bucket_of(self, ngram):
        return fnv1a_64(ngram) % self.bucket_count

    def lookup(self, word):
        """Stored vector for known words, mean of n-gram buckets otherwise."""
        idx = self.word_index.get(word)
        if idx is not None:
            return self.vectors[idx].copy()
        grams = word_ngrams(word)
        acc = np.zeros(self.dim)
        for g in grams:
            acc += self.buckets[self.bucket_of(g)]
        return acc / len(grams)


def read_text_table(path, n_buckets=DEFAULT_BUCKETS):
    """Load the plain word-vector text format: "rows dim" header then one
    "word v1 ... v_dim" line per word.

    The text format carries no bucket rows; buckets are synthesized as the
    mean of the vectors of the words containing each n-gram, which gives
    plausible OOV composition for tables converted from text.
    """
    with open(path, "r", encoding="utf-8") as handle:
        header = handle.readline().split()
        if len(header) != 2:
            raise EmptyCorpus(f"{path}: missing 'rows dim' header")
        rows, dim = int(header[0]), int(header[1])
        words, vectors = [], []
        for line in handle:
            parts = line.rstrip("\n").split(" ")
            if len(parts) != dim + 1:
                raise DimMismatch(
                    f"{path}: row for {parts[0]!r} has {len(parts) - 1} values, expected {dim}"
                )
            words.append(parts[0])
            vectors.append([float(v) for v in parts[1:]])
    if len(words) != rows:
        raise EmptyCorpus(f"{path}: header claims {rows} rows, found {len(words)}")
    vectors = np.asarray(vectors)
    bucket_sum = np.zeros((n_buckets, dim))
    bucket_hits = np.zeros(n_buckets)
    for word, vec in zip(words, vectors):
        for g in word_ngrams(word):
            b = fnv1a_64(g) % n_buckets
            bucket_sum[b] += vec
            bucket_hits[b] += 1
    nonzero = bucket_hits > 0
    bucket_sum[nonzero] /= bucket_hits[nonzero, None]
    return SubwordTable(dim, words, vectors, bucket_sum)


def write_text_table(path, table):
    with open(path, "w", encoding="utf-8") as out:
        out.write(f"{len(table.words)} {table.dim}\n")
        for word, vec in zip(table.words, table.vectors):
            out.write(word + " " + " ".join(repr(float(v)) for v in vec) + "\n")


# ---- k-means -------------------------------------------------------------


def _kmeans_plus_plus(data, k, rng):
    n = data.shape[0]
    centers = np.empty((k, data.shape[1]))
    first = int(rng.integers(n))
    centers[0] = data[first]
    closest = ((data - centers[0]) ** 2).sum(axis=1)
    for j in range(1, k):
        total = closest.sum()
        if total <= 0:
            centers[j] = data[int(rng.integers(n))]
            continue
        probs = closest / total
        pick = int(rng.choice(n, p=probs))
        centers[j] = data[pick]
        dist = ((data - centers[j]) ** 2).sum(axis=1)
        closest = np.minimum(closest, dist)
    return centers


def _assign(data, centers):
    # squared distances via the expansion trick; argmin keeps lowest index on ties
    d2 = (
        (data ** 2).sum(axis=1, keepdims=True)
        - 2.0 * data @ centers.T
        + (centers ** 2).sum(axis=1)
    )
    return np.argmin(d2, axis=1)


def _kmeans(data, k, rng, iterations=KMEANS_ITERATIONS):
    """Lloyd iterations with k-means++ init; objective never increases."""
    centers = _kmeans_plus_plus(data, k, rng)
    objective_trace = []
    assign = _assign(data, centers)
    for _ in range(iterations):
        objective_trace.append(((data - centers[assign]) ** 2).sum())
        for j in range(k):
            members = assign == j
            if members.any():
                centers[j] = data[members].mean(axis=0)
        new_assign = _assign(data, centers)
        if (new_assign == assign).all():
            assign = new_assign
            break
        assign = new_assign
    objective_trace.append(((data - centers[assign]) ** 2).sum())
    for prev, cur in zip(objective_trace, objective_trace[1:]):
        # slack scales with the objective: fp accumulation noise only
        assert cur <= prev + max(1e-9, 1e-12 * abs(prev)), "k-means objective increased"
    return centers, assign, objective_trace


class QuantizedTable:
    """Product-quantized table; rows reconstruct from per-subspace codes."""

    def __init__(self, dim, m, k, codebooks, words, codes, n_buckets):
        self.dim = dim
        self.m = m
        self.k = k
        self.sub_dim = dim // m
        self.codebooks = np.asarray(codebooks, dtype=np.float64).reshape(m, k, self.sub_dim)
        self.words = list(words)
        self.word_index = {w: i for i, w in enumerate(self.words)}
        self.codes = np.asarray(codes, dtype=np.uint8).reshape(-1, m)
        self.n_buckets = n_buckets

    @property
    def bucket_count(self):
        return self.n_buckets

    def bucket_of(self, ngram):
        return fnv1a_64(ngram) % self.n_buckets

    def reconstruct(self, row_index):
        code = self.codes[row_index]
        return np.concatenate([self.codebooks[j, code[j]] for j in range(self.m)])

    def lookup(self, word):
        """Same contract as SubwordTable.lookup over reconstructed rows."""
        idx = self.word_index.get(word)
        if idx is not None:
            return self.reconstruct(idx)
        grams = word_ngrams(word)
        acc = np.zeros(self.dim)
        for g in grams:
            acc += self.reconstruct(len(self.words) + self.bucket_of(g))
        return acc / len(grams)

    def code_storage_bytes(self):
        return self.codes.shape[0] * self.m

    def source_storage_bytes(self):
        """float32 accounting of the full-precision rows being replaced."""
        return self.codes.shape[0] * self.dim * 4


def quantize(table, m, seed=0):
    """Product-quantize words and buckets of a SubwordTable.

    Each of the m subspaces gets its own 256-entry codebook learned with
    25 seeded k-means iterations; rows with fewer than 256 distinct slices
    still quantize exactly because surplus centroids collapse.
    """
    if m <= 0 or table.dim % m != 0:
        raise BadSubquantizerCount(f"m={m} does not divide dim={table.dim}")
    rows = np.vstack([table.vectors, table.buckets])
    sub_dim = table.dim // m
    rng = np.random.default_rng(seed)
    if rows.shape[0] < CODEBOOK_SIZE:
        # pad by repetition so k-means has >= k samples
        reps = int(np.ceil(CODEBOOK_SIZE / rows.shape[0]))
        train_rows = np.tile(rows, (reps, 1))
    else:
        train_rows = rows
    codebooks = np.empty((m, CODEBOOK_SIZE, sub_dim))
    codes = np.empty((rows.shape[0], m), dtype=np.uint8)
    for j in range(m):
        sl = slice(j * sub_dim, (j + 1) * sub_dim)
        centers, _, _ = _kmeans(train_rows[:, sl], CODEBOOK_SIZE, rng)
        codebooks[j] = centers
        codes[:, j] = _assign(rows[:, sl], centers).astype(np.uint8)
    return QuantizedTable(
        table.dim, m, CODEBOOK_SIZE, codebooks, table.words, codes, table.bucket_count
    )


def lookup(table, word):
    """Vector for ``word``: stored row if known, mean of its 3..6-gram
    bucket rows otherwise."""
    return table.lookup(word)


def quantized_lookup(qtable, word):
    """Same contract as lookup, over rows reconstructed from codes."""
    return qtable.lookup(word)


# ---- binary store ----------------------------------------------------------

MAGIC = b"DLQ8"
VERSION = 1


def save_quantized(path, qtable):
    with open(path, "wb") as out:
        out.write(MAGIC)
        out.write(struct.pack("<IIIIII", VERSION, qtable.dim, qtable.m, qtable.k,
                              qtable.n_buckets, len(qtable.words)))
        out.write(np.ascontiguousarray(qtable.codebooks, dtype="<f4").tobytes())
        for word in qtable.words:
            encoded = word.encode("utf-8")
            out.write(struct.pack("<I", len(encoded)))
            out.write(encoded)
        out.write(qtable.codes.tobytes())


def load_quantized(path):
    with open(path, "rb") as handle:
        buf = handle.read()
    if buf[:4] != MAGIC:
        raise DimMismatch(f"{path}: not a quantized table (magic {buf[:4]!r})")
    version, dim, m, k, n_buckets, n_words = struct.unpack_from("<IIIIII", buf, 4)
    if version != VERSION:
        raise DimMismatch(f"{path}: unsupported version {version}")
    offset = 4 + 24
    sub_dim = dim // m
    cb_len = m * k * sub_dim * 4
    codebooks = np.frombuffer(buf[offset:offset + cb_len], dtype="<f4").astype(np.float64)
    offset += cb_len
    words = []
    for _ in range(n_words):
        (length,) = struct.unpack_from("<I", buf, offset)
        offset += 4
        words.append(buf[offset:offset + length].decode("utf-8"))
        offset += length
    n_rows = n_words + n_buckets
    codes = np.frombuffer(buf[offset:offset + n_rows * m], dtype=np.uint8)
    return QuantizedTable(dim, m, k, codebooks, words, codes, n_buckets)


def load_table(path):
    """Open either store by magic: DLQ8 binary or the text format."""
    with open(path, "rb") as handle:
        magic = handle.read(4)
    if magic == MAGIC:
        return load_quantized(path)
    return read_text_table(path, n_buckets=4096)
