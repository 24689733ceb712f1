import numpy as np
import pytest

from deplima import numerics as N
from deplima import segmenter as S
from deplima.conllu import ConlluDocument, ConlluToken, Sentence
from deplima.errors import EmptyCorpus, EmptyTrainingSet, MissingRawText


def test_dim_rule_values():
    assert S.dim_rule(2) == 8            # ceil(4*log2(3)) = 7 -> floor 8
    assert S.dim_rule(1_000_000) == 64   # ceil(4*19.93) = 80 -> cap 64
    assert S.dim_rule(200) == 31


def test_vocab_counts_with_sentinel():
    vocab = S.build_char_vocab(["ab"])
    assert vocab.sizes[0] == 2
    # bigrams of the padded text: <s>a, ab, b<s>
    assert vocab.sizes[1] == 3
    # trigrams: <s>ab, ab<s>
    assert vocab.sizes[2] == 2
    assert vocab.dims[0] == 8


def test_vocab_unknown_index():
    vocab = S.build_char_vocab(["ab"])
    idx = vocab.indices("ax")
    assert idx[0, 0] == vocab.maps[0]["a"]
    assert idx[1, 0] == vocab.sizes[0]  # unknown unigram row


def test_empty_corpus_rejected():
    with pytest.raises(EmptyCorpus):
        S.build_char_vocab([])
    with pytest.raises(EmptyCorpus):
        S.build_char_vocab([""])


def test_emission_input_dimension():
    vocab = S.build_char_vocab(["abc def"])
    model = S.SegmenterModel(vocab, hidden_dim=4)
    assert model.birnn.input_dim == sum(vocab.dims)
    with N.no_grad():
        e = model.emissions("abc")
    assert e.shape == (3, len(S.LABELS))


def test_forced_single_char_tokens():
    vocab = S.build_char_vocab(["ab"])
    model = S.SegmenterModel(vocab, hidden_dim=4)  # all-zero parameters
    model.proj_b.data[S.LABEL_INDEX["S"]] = 5.0
    tokens, breaks = S.segment(model, "ab")
    assert tokens == [("a", 0, 1), ("b", 1, 2)]
    assert breaks == []


def test_forced_begin_end_token():
    vocab = S.build_char_vocab(["ab"])
    model = S.SegmenterModel(vocab, hidden_dim=8)
    d1 = vocab.dims[0]
    # position-local forward states: update gate saturated open, candidate
    # reads the one-hot unigram embedding only
    model.vocab.tables[0].data[vocab.maps[0]["a"], 0] = 1.0
    model.vocab.tables[0].data[vocab.maps[0]["b"], 1] = 1.0
    fw = model.birnn.forward
    fw.bz.data[:] = 50.0
    fw.wc.data[:2, :2] = 20.0 * np.eye(2)
    model.proj_w.data[S.LABEL_INDEX["B"], 0] = 10.0
    model.proj_w.data[S.LABEL_INDEX["E"], 1] = 10.0
    tokens, breaks = S.segment(model, "ab")
    assert tokens == [("ab", 0, 2)]


def test_repair_orphan_inside_tags():
    tokens, breaks = S.decode_tags("ab", [S.LABEL_INDEX["I"], S.LABEL_INDEX["I"]])
    assert tokens == [("a", 0, 1), ("b", 1, 2)]


def test_decode_covers_non_o_chars_exactly():
    text = "abcd e"
    cases = [
        ["B", "I", "E", "S", "O", "S+"],
        ["B", "B", "E", "E", "O", "I"],
        ["E", "I", "S", "B", "O", "B"],
    ]
    for labels in cases:
        ids = [S.LABEL_INDEX[l] for l in labels]
        tokens, _ = S.decode_tags(text, ids)
        covered = sorted((s, e) for _, s, e in tokens)
        # spans are disjoint, in order, and rebuild their surface
        last_end = 0
        for surface, start, end in tokens:
            assert start >= last_end
            assert text[start:end] == surface
            last_end = end
        non_o = {t for t, l in enumerate(labels) if l != "O"}
        in_tokens = {c for _, s, e in tokens for c in range(s, e)}
        assert in_tokens == non_o


def test_gold_tags_roundtrip_through_decode():
    text = "Hi there ."
    spans = [(0, 2), (3, 8), (9, 10)]
    tags = S.tags_for(text, spans, {2})
    tokens, breaks = S.decode_tags(text, tags)
    assert [(s, e) for _, s, e in tokens] == spans
    assert breaks == [2]


def make_doc(texts_and_tokens):
    sentences = []
    for text, forms in texts_and_tokens:
        tokens = [
            ConlluToken(id=str(i + 1), form=form, head="0" if i == 0 else "1",
                        deprel="root" if i == 0 else "dep")
            for i, form in enumerate(forms)
        ]
        sentences.append(Sentence([f"# text = {text}"], tokens))
    return ConlluDocument(sentences)


def test_align_tokens_and_missing_text():
    doc = make_doc([("Hi there .", ["Hi", "there", "."])])
    chunks = S.training_sequences(doc, chunk_sentences=1)
    assert chunks[0][1] == [(0, 2), (3, 8), (9, 10)]
    bad = ConlluDocument([Sentence([], [ConlluToken(id="1", form="x")])])
    with pytest.raises(MissingRawText):
        S.training_sequences(bad)
    with pytest.raises(MissingRawText):
        S.align_tokens("abc", ["zz"])


def test_train_segmenter_overfits_toy_corpus():
    doc = make_doc([("Hi there .", ["Hi", "there", "."])] * 50)
    model = S.train_segmenter(doc, hyper={"hidden": 16, "epochs": 6}, seed=1)
    losses = [row[1] for row in model.training_log]
    assert losses[1] < losses[0] and losses[2] < losses[1]
    assert all(np.isfinite(l) for l in losses)
    tokens, breaks = S.segment(model, "Hi there .")
    assert [t[0] for t in tokens] == ["Hi", "there", "."]
    assert [(s, e) for _, s, e in tokens] == [(0, 2), (3, 8), (9, 10)]
    assert breaks == [2]


def test_train_segmenter_single_char_corpus():
    doc = make_doc([("a", ["a"])] * 10)
    model = S.train_segmenter(doc, hyper={"hidden": 8, "epochs": 4}, seed=0)
    tokens, _ = S.segment(model, "a")
    assert tokens == [("a", 0, 1)]


def test_train_segmenter_empty():
    with pytest.raises(EmptyTrainingSet):
        S.train_segmenter(ConlluDocument([]))


def test_segment_empty_text():
    doc = make_doc([("a b", ["a", "b"])] * 5)
    model = S.train_segmenter(doc, hyper={"hidden": 8, "epochs": 2}, seed=0)
    assert S.segment(model, "") == ([], [])


def test_offsets_match_input_substrings():
    doc = make_doc([("x yy zzz .", ["x", "yy", "zzz", "."])] * 30)
    model = S.train_segmenter(doc, hyper={"hidden": 16, "epochs": 5}, seed=3)
    text = "zzz yy x ."
    tokens, _ = S.segment(model, text)
    for surface, start, end in tokens:
        assert text[start:end] == surface


def test_save_load_roundtrip(tmp_path):
    doc = make_doc([("Hi there .", ["Hi", "there", "."])] * 20)
    model = S.train_segmenter(doc, hyper={"hidden": 8, "epochs": 3}, seed=2)
    path = tmp_path / "segmenter.dlma"
    S.save_segmenter(path, model)
    loaded = S.load_segmenter(path)
    text = "Hi there . Hi there ."
    assert S.segment(loaded, text) == S.segment(model, text)
