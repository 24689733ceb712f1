import numpy as np
import pytest

import toygrammar
from deplima import numerics as N
from deplima import parser as P
from deplima.conllu import ConlluDocument, ConlluToken, Sentence
from deplima.embeddings import SubwordTable
from deplima.errors import EmptySentence, EmptyTrainingSet, MissingGoldAnnotations
from deplima.mst import is_tree


def tiny_table(rng, words, dim=8):
    vectors = rng.normal(size=(len(words), dim))
    buckets = rng.normal(size=(32, dim)) * 0.1
    return SubwordTable(dim, list(words), vectors, buckets)


def tiny_model(rng=None, words=("aa", "bb", "cc"), frequent=("aa",)):
    inventories = {
        "categories": ["upos", "Number"],
        "labels": {"upos": ["NOUN", "VERB"], "Number": ["_", "Plur", "Sing"]},
        "deprels": ["det", "nsubj", "obj", "root"],
        "frequent": list(frequent),
        "chars": sorted({c for w in words for c in w}),
    }
    dims = {
        "pretrained_dim": 8, "hidden1": 6, "hidden2": 6, "arc_dim": 5,
        "label_dim": 4, "char_emb": 3, "char_hidden": 4,
    }
    model = P.TaggerParserModel(inventories, dims, rng)
    model.embeddings = tiny_table(np.random.default_rng(0), words)
    return model


def test_encode_sentence_shapes():
    model = tiny_model(np.random.default_rng(1))
    states = P.encode_sentence(model, ["aa"])
    assert len(states) == 1 and states[0].shape == (12,)
    states = P.encode_sentence(model, ["aa", "bb", "cc"])
    assert len(states) == 3


def test_encode_all_zero_params_zero_states():
    model = tiny_model(rng=None)  # all parameters zero
    model.embeddings = SubwordTable(8, ["aa"], np.zeros((1, 8)), np.zeros((4, 8)))
    states = P.encode_sentence(model, ["aa", "aa"])
    for s in states:
        assert np.allclose(s.data, 0.0)


def test_empty_sentence_rejected():
    model = tiny_model(np.random.default_rng(1))
    with pytest.raises(EmptySentence):
        P.encode_sentence(model, [])
    with pytest.raises(EmptySentence):
        P.parse_dependencies(model, [], {})


def test_frequent_word_differs_by_trainable_term_only():
    rng = np.random.default_rng(3)
    model_freq = tiny_model(rng, frequent=("aa",))
    model_plain = tiny_model(np.random.default_rng(3), frequent=())
    # same seed, but the frequent model has an extra table; align shared params
    for p, q in zip(
        [model_plain.char_table] + model_plain.char_cell.parameters(),
        [model_freq.char_table] + model_freq.char_cell.parameters(),
    ):
        p.data = q.data.copy()
    v_freq = P.word_input_vector(model_freq, "aa")
    v_plain = P.word_input_vector(model_plain, "aa")
    pd = model_freq.dims["pretrained_dim"]
    delta = v_freq.data[:pd] - v_plain.data[:pd]
    assert np.allclose(delta, model_freq.word_table.data[0])
    # the char-RNN half is identical
    assert np.allclose(v_freq.data[pd:], v_plain.data[pd:])


def test_tag_morphology_hand_forced():
    model = tiny_model(rng=None)
    model.embeddings = SubwordTable(8, [], np.zeros((0, 8)), np.zeros((4, 8)))
    # zero states everywhere; biases choose the labels
    model.head_b["upos"].data[:] = [0.0, 2.0]   # favor label 1 = VERB
    states = P.encode_sentence(model, ["aa", "bb"])
    decoded, posteriors = P.tag_morphology(model, states)
    assert decoded["upos"] == ["VERB", "VERB"]
    assert decoded["Number"] == ["_", "_"]  # all-zero scores: tie-break label 0
    for c in ("upos", "Number"):
        assert np.allclose(posteriors[c].data.sum(axis=1), 1.0, atol=1e-9)


def test_parse_single_token_forced_root():
    model = tiny_model(np.random.default_rng(5))
    states = P.encode_sentence(model, ["aa"])
    _, posteriors = P.tag_morphology(model, states)
    heads, deprels = P.parse_dependencies(model, states, posteriors)
    assert heads == [0]
    assert deprels == ["root"]


def test_parse_outputs_valid_tree_and_single_root_label():
    rng = np.random.default_rng(11)
    model = tiny_model(rng)
    for n in (2, 3, 5, 7):
        tokens = [["aa", "bb", "cc"][i % 3] for i in range(n)]
        pred = P.predict_sentence(model, tokens)
        assert is_tree(pred["heads"])
        assert sum(1 for d in pred["deprels"] if d == "root") == 1
        assert all(d in model.deprels for d in pred["deprels"])
        # the root deprel sits exactly on the head-0 token
        for h, d in zip(pred["heads"], pred["deprels"]):
            assert (h == 0) == (d == "root")


def test_joint_loss_grad_check():
    rng = np.random.default_rng(7)
    model = tiny_model(rng)

    def objective():
        return P.sentence_loss(
            model, ["aa", "bb"], ["NOUN", "VERB"], [{"Number": "Plur"}, {}],
            [2, 0], ["nsubj", "root"],
        )

    err = N.grad_check(objective, model.parameters(), step=1e-4, max_coords_per_param=6)
    assert err < 1e-4


def test_build_inventories_thresholds():
    doc = ConlluDocument()
    # 10 sentences x 3 tokens; one rare feature occurrence
    for i in range(10):
        feats = "Rare=Yes" if i == 0 else "Number=Sing"
        doc.sentences.append(Sentence([], [
            ConlluToken(id="1", form="the", upos="DET", head="2", deprel="det"),
            ConlluToken(id="2", form="dog", upos="NOUN", feats=feats, head="0", deprel="root"),
            ConlluToken(id="3", form=".", upos="PUNCT", head="2", deprel="punct"),
        ]))
    rows = P._gold_rows(doc)
    inv = P.build_inventories(rows, freq_threshold=3, rare_threshold=0.05)
    assert "Number" in inv["categories"]
    assert "Rare" not in inv["categories"]  # 1/30 tokens < 0.05
    assert "the" in inv["frequent"] and "dog" in inv["frequent"]
    assert "root" in inv["deprels"]
    inv_all = P.build_inventories(rows, freq_threshold=3, rare_threshold=1e-3)
    assert "Rare" in inv_all["categories"]


def test_missing_gold_annotations():
    doc = ConlluDocument([Sentence([], [ConlluToken(id="1", form="x")])])
    with pytest.raises(MissingGoldAnnotations):
        P._gold_rows(doc)
    with pytest.raises(EmptyTrainingSet):
        P._gold_rows(ConlluDocument([Sentence([], [])]))


def toy_embeddings(doc, dim=16, seed=0):
    rng = np.random.default_rng(seed)
    vocab = sorted({t.form for s in doc.sentences for t in s.words()})
    vectors = rng.normal(size=(len(vocab), dim))
    buckets = rng.normal(size=(64, dim)) * 0.1
    return SubwordTable(dim, vocab, vectors, buckets)


def test_train_joint_overfits_toy_treebank():
    doc = toygrammar.generate(30, seed=42)
    table = toy_embeddings(doc)
    hyper = {"hidden1": 24, "hidden2": 24, "arc_dim": 16, "label_dim": 8,
             "char_emb": 8, "char_hidden": 12, "epochs": 50, "lr": 3e-3}
    model = P.train_joint(doc, table, hyper=hyper, seed=5)
    rows = P._gold_rows(doc)
    upos_hits = upos_total = uas_hits = 0
    for forms, upos, _, heads, _ in rows:
        pred = P.predict_sentence(model, forms)
        for i in range(len(forms)):
            upos_total += 1
            upos_hits += pred["upos"][i] == upos[i]
            uas_hits += pred["heads"][i] == heads[i]
    assert upos_hits / upos_total >= 0.95
    assert uas_hits / upos_total >= 0.90


def test_train_joint_deterministic():
    doc = toygrammar.generate(6, seed=1)
    table = toy_embeddings(doc)
    hyper = {"hidden1": 8, "hidden2": 8, "arc_dim": 6, "label_dim": 4,
             "char_emb": 4, "char_hidden": 6, "epochs": 2}
    m1 = P.train_joint(doc, table, hyper=hyper, seed=9)
    m2 = P.train_joint(doc, table, hyper=hyper, seed=9)
    for p, q in zip(m1.parameters(), m2.parameters()):
        assert np.array_equal(p.data, q.data)
    log1 = [(e, l) for e, l, _ in m1.training_log]
    log2 = [(e, l) for e, l, _ in m2.training_log]
    assert log1 == log2


def test_save_load_roundtrip(tmp_path):
    doc = toygrammar.generate(8, seed=3)
    table = toy_embeddings(doc)
    hyper = {"hidden1": 8, "hidden2": 8, "arc_dim": 6, "label_dim": 4,
             "char_emb": 4, "char_hidden": 6, "epochs": 2}
    model = P.train_joint(doc, table, hyper=hyper, seed=2)
    path = tmp_path / "parser.dlma"
    P.save_parser(path, model)
    loaded = P.load_parser(path, table)
    forms = [t.form for t in doc.sentences[0].words()]
    assert P.predict_sentence(loaded, forms) == P.predict_sentence(model, forms)
