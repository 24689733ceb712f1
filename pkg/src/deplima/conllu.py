"""Bit-exact CoNLL-U reading and writing.

One token per line with 10 tab-separated fields, '#' comment lines kept
verbatim, sentences separated by exactly one blank line, file terminated by
a blank line. Multiword range rows ("a-b") travel through parse/write
untouched but are skipped by analysis; empty nodes ("1.1") are rejected.
FEATS bundles are canonicalized to lexicographic key order on parse, so a
document object always holds the canonical encoding.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .errors import (
    BadColumnCount,
    BadHead,
    EmptyDocument,
    EmptyNodeId,
    InvariantViolation,
    NonContiguousIds,
)

FIELD_NAMES = ("id", "form", "lemma", "upos", "xpos", "feats", "head", "deprel", "deps", "misc")


@dataclass(frozen=True)
class ConlluToken:
    id: str                      # "3" or a range "3-4"
    form: str = "_"
    lemma: str = "_"
    upos: str = "_"
    xpos: str = "_"
    feats: str = "_"
    head: str = "_"              # decimal string or "_"
    deprel: str = "_"
    deps: str = "_"
    misc: str = "_"

    @property
    def is_range(self):
        return "-" in self.id

    @property
    def index(self):
        """1-based position for simple rows."""
        return int(self.id)

    @property
    def head_index(self):
        return None if self.head == "_" else int(self.head)


@dataclass
class Sentence:
    comments: list = field(default_factory=list)
    tokens: list = field(default_factory=list)

    def words(self):
        """Simple (non-range) token rows."""
        return [t for t in self.tokens if not t.is_range]

    def text_comment(self):
        for comment in self.comments:
            if comment.startswith("# text ="):
                return comment[len("# text ="):].strip()
            if comment.startswith("# text="):
                return comment[len("# text="):].strip()
        return None


@dataclass
class ConlluDocument:
    sentences: list = field(default_factory=list)


def canonical_feats(feats):
    """Sort Key=Val pairs lexicographically by key; '_' stays '_'."""
    if feats == "_" or feats == "":
        return "_"
    pairs = feats.split("|")
    pairs.sort(key=lambda pair: pair.split("=", 1)[0])
    return "|".join(pairs)


def feats_set(feats):
    if feats == "_":
        return frozenset()
    return frozenset(feats.split("|"))


def parse_feats(feats):
    """FEATS string -> {category: value}; multi-valued stays one string."""
    out = {}
    if feats == "_":
        return out
    for pair in feats.split("|"):
        key, _, value = pair.partition("=")
        out[key] = value
    return out


def format_feats(mapping):
    if not mapping:
        return "_"
    return "|".join(f"{k}={v}" for k, v in sorted(mapping.items()))


def parse_conllu(text):
    """Parse CoNLL-U text into a ConlluDocument.

    Raises BadColumnCount, EmptyNodeId, NonContiguousIds, BadHead, or
    EmptyDocument with the offending location.
    """
    sentences = []
    comments = []
    tokens = []  # (token, source line number)
    sentence_no = 1

    def close_sentence():
        nonlocal comments, tokens, sentence_no
        if not comments and not tokens:
            return
        words = [(t, ln) for t, ln in tokens if not t.is_range]
        expected = list(range(1, len(words) + 1))
        if [w.index for w, _ in words] != expected:
            raise NonContiguousIds(sentence_no)
        n = len(words)
        for t, ln in words:
            h = t.head_index
            if h is not None and not (0 <= h <= n and h != t.index):
                raise BadHead(ln, f"head {t.head} out of range for token {t.id}")
        for t, ln in tokens:
            if t.is_range:
                first, _, last = t.id.partition("-")
                if not (1 <= int(first) <= int(last) <= n):
                    raise NonContiguousIds(sentence_no)
        sentences.append(Sentence(comments, [t for t, _ in tokens]))
        comments, tokens = [], []
        sentence_no += 1

    for line_no, line in enumerate(text.split("\n"), start=1):
        if line == "":
            close_sentence()
            continue
        if line.startswith("#"):
            comments.append(line)
            continue
        fields = line.split("\t")
        if len(fields) != 10:
            raise BadColumnCount(line_no, len(fields))
        token_id = fields[0]
        if "." in token_id:
            raise EmptyNodeId(line_no, token_id)
        if "-" in token_id:
            first, _, last = token_id.partition("-")
            try:
                a, b = int(first), int(last)
            except ValueError:
                raise EmptyNodeId(line_no, token_id) from None
            if a > b:
                raise NonContiguousIds(sentence_no)
        else:
            try:
                int(token_id)
            except ValueError:
                raise EmptyNodeId(line_no, token_id) from None
        head = fields[6]
        if head != "_":
            try:
                int(head)
            except ValueError:
                raise BadHead(line_no, f"non-integer head {head!r}") from None
        fields[5] = canonical_feats(fields[5])
        tokens.append((ConlluToken(*fields), line_no))
    close_sentence()
    if not sentences:
        raise EmptyDocument("no sentences found")
    return ConlluDocument(sentences)


def write_conllu(doc):
    """Serialize a document; parse(write(doc)) == doc for valid documents."""
    if not doc.sentences:
        raise InvariantViolation("document has no sentences")
    chunks = []
    for sentence in doc.sentences:
        if not sentence.tokens and not sentence.comments:
            raise InvariantViolation("empty sentence")
        lines = list(sentence.comments)
        for t in sentence.tokens:
            fields = [t.id, t.form, t.lemma, t.upos, t.xpos,
                      canonical_feats(t.feats), t.head, t.deprel, t.deps, t.misc]
            fields = [f if f != "" else "_" for f in fields]
            lines.append("\t".join(fields))
        chunks.append("\n".join(lines))
    # one blank line between sentences, one terminating the file
    return "\n\n".join(chunks) + "\n\n"


def document_from_tokens(sentences):
    """Build a document from per-sentence lists of field dicts."""
    out = ConlluDocument()
    for comments, rows in sentences:
        tokens = [ConlluToken(**row) for row in rows]
        out.sentences.append(Sentence(list(comments), tokens))
    return out


def with_predictions(doc, predictions):
    """Copy ``doc`` replacing analysis columns of simple rows.

    predictions: per sentence a list of dicts with any of lemma/upos/feats/
    head/deprel keyed fields; range rows and comments are preserved.
    """
    new_sentences = []
    for sentence, preds in zip(doc.sentences, predictions):
        new_tokens = []
        word_i = 0
        for t in sentence.tokens:
            if t.is_range:
                new_tokens.append(t)
                continue
            upd = preds[word_i]
            word_i += 1
            new_tokens.append(replace(t, **upd))
        new_sentences.append(Sentence(list(sentence.comments), new_tokens))
    return ConlluDocument(new_sentences)
