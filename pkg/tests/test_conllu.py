import random

import pytest

from deplima.conllu import (
    ConlluDocument,
    ConlluToken,
    Sentence,
    canonical_feats,
    feats_set,
    parse_conllu,
    with_predictions,
    write_conllu,
)
from deplima.errors import (
    BadColumnCount,
    BadHead,
    EmptyDocument,
    EmptyNodeId,
    NonContiguousIds,
)

ONE_TOKEN = "# text = Hi\n1\tHi\thi\tINTJ\t_\t_\t0\troot\t_\t_\n\n"


def test_parse_single_token():
    doc = parse_conllu(ONE_TOKEN)
    assert len(doc.sentences) == 1
    sent = doc.sentences[0]
    assert sent.comments == ["# text = Hi"]
    (tok,) = sent.tokens
    assert tok.form == "Hi" and tok.lemma == "hi" and tok.upos == "INTJ"
    assert tok.head_index == 0 and tok.deprel == "root"


def test_roundtrip_byte_identity():
    assert write_conllu(parse_conllu(ONE_TOKEN)) == ONE_TOKEN


def test_bad_column_count():
    bad = "1\tHi\thi\tINTJ\t_\t_\t0\troot\t_\n\n"  # 9 fields
    with pytest.raises(BadColumnCount):
        parse_conllu(bad)


def test_non_contiguous_ids():
    bad = "1\ta\t_\t_\t_\t_\t0\troot\t_\t_\n3\tb\t_\t_\t_\t_\t1\tdep\t_\t_\n\n"
    with pytest.raises(NonContiguousIds):
        parse_conllu(bad)


def test_bad_head():
    bad = "# c\n1\ta\t_\t_\t_\t_\t5\troot\t_\t_\n\n"
    with pytest.raises(BadHead) as err:
        parse_conllu(bad)
    assert err.value.line_no == 2
    self_head = "1\ta\t_\t_\t_\t_\t1\tdep\t_\t_\n\n"
    with pytest.raises(BadHead):
        parse_conllu(self_head)


def test_empty_document():
    with pytest.raises(EmptyDocument):
        parse_conllu("")
    with pytest.raises(EmptyDocument):
        parse_conllu("\n\n")


def test_empty_nodes_rejected():
    bad = "1\ta\t_\t_\t_\t_\t0\troot\t_\t_\n1.1\tb\t_\t_\t_\t_\t_\t_\t_\t_\n\n"
    with pytest.raises(EmptyNodeId):
        parse_conllu(bad)


def test_range_row_must_cover_simple_ids():
    bad = (
        "5-6\tdel\t_\t_\t_\t_\t_\t_\t_\t_\n"
        "1\tde\t_\tADP\t_\t_\t2\tcase\t_\t_\n"
        "2\tel\t_\tDET\t_\t_\t0\troot\t_\t_\n\n"
    )
    with pytest.raises(NonContiguousIds):
        parse_conllu(bad)
    inverted = "2-1\tx\t_\t_\t_\t_\t_\t_\t_\t_\n1\ta\t_\t_\t_\t_\t0\troot\t_\t_\n\n"
    with pytest.raises(NonContiguousIds):
        parse_conllu(inverted)


def test_multiword_range_preserved():
    text = (
        "1-2\tdel\t_\t_\t_\t_\t_\t_\t_\t_\n"
        "1\tde\t_\tADP\t_\t_\t2\tcase\t_\t_\n"
        "2\tel\t_\tDET\t_\t_\t0\troot\t_\t_\n\n"
    )
    doc = parse_conllu(text)
    assert doc.sentences[0].tokens[0].is_range
    assert len(doc.sentences[0].words()) == 2
    assert write_conllu(doc) == text


def test_empty_feats_written_as_underscore():
    doc = ConlluDocument([
        Sentence([], [ConlluToken(id="1", form="x", feats="")]),
    ])
    out = write_conllu(doc)
    assert "\t_\t" in out
    reparsed = parse_conllu(out)
    assert reparsed.sentences[0].tokens[0].feats == "_"


def test_two_sentences_blank_line_layout():
    doc = parse_conllu(ONE_TOKEN + ONE_TOKEN)
    out = write_conllu(doc)
    assert "\n\n\n" not in out  # never two consecutive blank lines
    assert out.count("\n\n") == 2  # one separator, one file terminator
    assert out.endswith("\n\n")
    assert len(parse_conllu(out).sentences) == 2
    assert out == ONE_TOKEN + ONE_TOKEN


def test_feats_canonical_order():
    row = "1\tx\t_\tNOUN\t_\tNumber=Plur|Case=Nom\t0\troot\t_\t_\n\n"
    doc = parse_conllu(row)
    assert doc.sentences[0].tokens[0].feats == "Case=Nom|Number=Plur"
    assert canonical_feats("_") == "_"
    assert feats_set("A=1|B=2") == {"A=1", "B=2"}


def random_document(rng):
    upos_pool = ["NOUN", "VERB", "DET", "ADJ", "PUNCT"]
    feats_pool = ["Number=Sing", "Number=Plur", "Case=Nom", "Tense=Past", "Gender=Fem"]
    deprel_pool = ["nsubj", "obj", "det", "amod", "punct"]
    sentences = []
    for _ in range(rng.randint(1, 4)):
        n = rng.randint(1, 6)
        comments = []
        if rng.random() < 0.5:
            comments.append(f"# sent_id = s{rng.randint(1, 999)}")
        tokens = []
        root = rng.randint(1, n)
        for i in range(1, n + 1):
            feats = "_"
            if rng.random() < 0.6:
                chosen = rng.sample(feats_pool, rng.randint(1, 2))
                feats = canonical_feats("|".join(chosen))
            if i == root:
                head, deprel = "0", "root"
            else:
                head = str(rng.choice([h for h in range(0, n + 1) if h != i and h != 0] or [0]))
                deprel = rng.choice(deprel_pool)
            tokens.append(
                ConlluToken(
                    id=str(i),
                    form=f"w{rng.randint(1, 99)}",
                    lemma=f"l{rng.randint(1, 99)}",
                    upos=rng.choice(upos_pool),
                    feats=feats,
                    head=head,
                    deprel=deprel,
                )
            )
        sentences.append(Sentence(comments, tokens))
    return ConlluDocument(sentences)


def test_roundtrip_property_random_documents():
    rng = random.Random(20240817)
    for _ in range(300):
        doc = random_document(rng)
        assert parse_conllu(write_conllu(doc)) == doc


def test_write_parse_byte_identity_on_canonical_files():
    rng = random.Random(4)
    for _ in range(100):
        text = write_conllu(random_document(rng))
        assert write_conllu(parse_conllu(text)) == text


def test_with_predictions_preserves_structure():
    text = (
        "# text = de el\n"
        "1-2\tdel\t_\t_\t_\t_\t_\t_\t_\t_\n"
        "1\tde\t_\t_\t_\t_\t_\t_\t_\t_\n"
        "2\tel\t_\t_\t_\t_\t_\t_\t_\t_\n\n"
    )
    doc = parse_conllu(text)
    out = with_predictions(
        doc,
        [[{"upos": "ADP", "head": "2", "deprel": "case"},
          {"upos": "DET", "head": "0", "deprel": "root"}]],
    )
    rendered = write_conllu(out)
    assert "1-2\tdel" in rendered
    assert "# text = de el" in rendered
    assert "\tADP\t" in rendered and "\tDET\t" in rendered
