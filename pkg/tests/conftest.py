"""Session fixtures: one desk-scale training of every model, shared by the
end-to-end, CLI, and acceptance tests."""

import shutil
from pathlib import Path

import numpy as np
import pytest

import toygrammar
from deplima import embeddings as E
from deplima import lemmatizer as L
from deplima import ner as R
from deplima import parser as P
from deplima import segmenter as S
from deplima.conllu import write_conllu

TRAIN_SEED = 7
HELD_SEED = 8
EMB_DIM = 24

PARSER_HYPER = {
    "hidden1": 48, "hidden2": 48, "arc_dim": 32, "label_dim": 16,
    "char_emb": 12, "char_hidden": 16, "epochs": 6, "lr": 3e-3,
}
SEG_HYPER = {"hidden": 32, "epochs": 8, "lr": 1e-2}
LEMMA_HYPER = {"char_emb": 16, "hidden": 32, "tag_emb": 6, "epochs": 40, "lr": 5e-3}
NER_HYPER = {"epochs": 12, "hidden": 24}

DATA_DIR = Path(__file__).resolve().parents[0] / ".." / "src" / "deplima" / "data"


def ner_toy_corpus():
    """Forty BIO sentences over a tiny world of people, places, and firms."""
    people = ["Alice", "Bob", "Carol", "David"]
    places = ["Paris", "London", "Berlin", "Tokyo"]
    orgs = ["Globex", "Initech"]
    sentences = []
    for i in range(40):
        person = people[i % len(people)]
        place = places[i % len(places)]
        org = orgs[i % len(orgs)]
        variant = i % 4
        if variant == 0:
            tokens = [person, "visited", place, "."]
            tags = ["B-Person", "O", "B-Location", "O"]
        elif variant == 1:
            tokens = [person, "works", "for", org, "."]
            tags = ["B-Person", "O", "O", "B-Organization", "O"]
        elif variant == 2:
            tokens = ["the", "office", "in", place, "hired", person, "."]
            tags = ["O", "O", "O", "B-Location", "O", "B-Person", "O"]
        else:
            tokens = [org, "opened", "in", place, "."]
            tags = ["B-Organization", "O", "O", "B-Location", "O"]
        sentences.append((tokens, tags))
    return sentences


@pytest.fixture(scope="session")
def toy_train_doc():
    return toygrammar.generate_with_lemmas(400, seed=TRAIN_SEED)


@pytest.fixture(scope="session")
def toy_held_doc():
    return toygrammar.generate_with_lemmas(100, seed=HELD_SEED)


@pytest.fixture(scope="session")
def toy_table(toy_train_doc, toy_held_doc):
    vocab = sorted(
        {t.form for doc in (toy_train_doc, toy_held_doc)
         for s in doc.sentences for t in s.words()}
        | {w for tokens, _ in ner_toy_corpus() for w in tokens}
    )
    rng = np.random.default_rng(123)
    vectors = rng.normal(size=(len(vocab), EMB_DIM))
    buckets = rng.normal(size=(512, EMB_DIM)) * 0.1
    return E.SubwordTable(EMB_DIM, vocab, vectors, buckets)


@pytest.fixture(scope="session")
def toy_qtable(toy_table):
    return E.quantize(toy_table, m=EMB_DIM // 2, seed=3)


def _timed(trainer):
    import time

    started = time.perf_counter()
    model = trainer()
    model.training_seconds = time.perf_counter() - started
    return model


@pytest.fixture(scope="session")
def trained_parser(toy_train_doc, toy_table):
    return _timed(lambda: P.train_joint(toy_train_doc, toy_table, hyper=PARSER_HYPER, seed=11))


@pytest.fixture(scope="session")
def trained_parser_quantized(toy_train_doc, toy_qtable):
    return _timed(lambda: P.train_joint(toy_train_doc, toy_qtable, hyper=PARSER_HYPER, seed=11))


@pytest.fixture(scope="session")
def trained_segmenter(toy_train_doc, toy_held_doc):
    return _timed(lambda: S.train_segmenter(toy_train_doc, hyper=SEG_HYPER, seed=21, dev=toy_held_doc))


@pytest.fixture(scope="session")
def trained_lemmatizer(toy_train_doc):
    triples = []
    seen = set()
    for sentence in toy_train_doc.sentences:
        for token in sentence.words():
            item = (token.form, token.upos, token.feats, token.lemma)
            if item not in seen:
                seen.add(item)
                triples.append(item)
    return L.train_lemmatizer(triples, hyper=LEMMA_HYPER, seed=31)


@pytest.fixture(scope="session")
def trained_ner(toy_table):
    return R.train_ner(ner_toy_corpus(), toy_table, hyper=NER_HYPER, seed=41)


@pytest.fixture(scope="session")
def model_dir(tmp_path_factory, trained_parser, trained_segmenter,
              trained_lemmatizer, trained_ner, toy_qtable):
    """A complete per-language model directory for the 'toy' language."""
    root = tmp_path_factory.mktemp("models")
    lang = root / "toy"
    lang.mkdir()
    S.save_segmenter(lang / "segmenter.dlma", trained_segmenter)
    P.save_parser(lang / "parser.dlma", trained_parser)
    L.save_lemmatizer(lang / "lemmatizer.dlma", trained_lemmatizer)
    R.save_ner(lang / "ner.dlma", trained_ner)
    E.save_quantized(lang / "embeddings.dlq8", toy_qtable)
    demo = (DATA_DIR / "ner" / "en").resolve()
    shutil.copy(demo / "rules.txt", lang / "ner-rules.txt")
    for gaz in demo.glob("*.txt"):
        if gaz.name != "rules.txt":
            shutil.copy(gaz, lang / gaz.name)
    return root


@pytest.fixture(scope="session")
def corpus_files(tmp_path_factory, toy_train_doc, toy_held_doc, toy_table):
    """Train/held CoNLL-U files, raw text, embeddings text table, BIO corpus."""
    root = tmp_path_factory.mktemp("corpus")
    (root / "train.conllu").write_text(write_conllu(toy_train_doc), encoding="utf-8")
    (root / "held.conllu").write_text(write_conllu(toy_held_doc), encoding="utf-8")
    held_text = " ".join(
        s.text_comment() for s in toy_held_doc.sentences
    )
    (root / "held.txt").write_text(held_text, encoding="utf-8")
    E.write_text_table(root / "embeddings.vec", toy_table)
    (root / "ner.bio").write_text(R.write_bio(ner_toy_corpus()), encoding="utf-8")
    return root
