"""Dual named-entity recognition: a rule engine and a neural tagger.

Both emit typed, token-indexed spans. The rule engine matches literal,
case-insensitive literal, regex, or gazetteer trigger patterns with
optional left/right context windows, resolving overlaps by longest match,
then priority, then leftmost position. The neural recognizer mirrors the
word-level encoder of the parser (pretrained vector plus character state,
bidirectional encoder) with a CRF over BIO tags.

Rule file, one rule per line:

    rule <id> <type> prio=<n> trigger=<pat> [left=<pat>] [right=<pat>]

Patterns: @name (gazetteer file name.txt next to the rule file, one term
per line, multi-word terms allowed, matched case-insensitively), /regex/
(full match on one token), i"literal" (case-insensitive), "literal" or a
bare word (case-sensitive). Blank lines and '#' comments are skipped.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import numerics as N
from .errors import (
    BadRuleReference,
    EmptySentence,
    EmptyTrainingSet,
    OutOfRange,
    OverlappingSpans,
    RuleSyntaxError,
)

RULE_TYPES = (
    "Number", "DateTime", "Organization", "Location", "Person",
    "Event", "Product", "Miscellaneous",
)
NEURAL_TYPES = ("Location", "Miscellaneous", "Organization", "Person")
CONTEXT_WINDOW = 3


@dataclass(frozen=True, order=True)
class EntitySpan:
    type: str
    start: int
    end: int

    def __post_init__(self):
        if self.type not in RULE_TYPES:
            raise OutOfRange(f"unknown entity type {self.type!r}")
        if not 0 <= self.start < self.end:
            raise OutOfRange(f"bad span ({self.start}, {self.end})")


# ---- BIO encoding ------------------------------------------------------------


def bio_encode(spans, n):
    """Spans to per-token tags; spans must be disjoint and inside [0, n)."""
    tags = ["O"] * n
    for span in sorted(spans, key=lambda s: s.start):
        if span.end > n:
            raise OutOfRange(f"span {span} exceeds sentence length {n}")
        for t in range(span.start, span.end):
            if tags[t] != "O":
                raise OverlappingSpans(f"token {t} covered twice")
            tags[t] = ("B-" if t == span.start else "I-") + span.type
    return tags


def bio_decode(tags):
    """Tags to spans; orphan I-x opens a new span (repair rule)."""
    spans = []
    current_type = None
    current_start = None

    def close(end):
        nonlocal current_type, current_start
        if current_type is not None:
            spans.append(EntitySpan(current_type, current_start, end))
            current_type = None

    for t, tag in enumerate(tags):
        if tag == "O":
            close(t)
            continue
        prefix, _, etype = tag.partition("-")
        if prefix == "B" or current_type != etype:
            close(t)
            current_type = etype
            current_start = t
    close(len(tags))
    return spans


# ---- rule engine ---------------------------------------------------------------


class Pattern:
    """One token-level predicate; gazetteers may span several tokens."""

    def __init__(self, kind, value, terms=None):
        self.kind = kind        # "literal", "ci-literal", "regex", "gazetteer"
        self.value = value
        self.terms = terms      # gazetteer: {lowercased term tuple}
        self._regex = re.compile(value) if kind == "regex" else None

    def match_single(self, token):
        if self.kind == "literal":
            return token == self.value
        if self.kind == "ci-literal":
            return token.lower() == self.value.lower()
        if self.kind == "regex":
            return self._regex.fullmatch(token) is not None
        return any(len(term) == 1 and term[0] == token.lower() for term in self.terms)

    def match_lengths(self, tokens, start):
        """Match lengths starting at ``start``, longest first."""
        if self.kind != "gazetteer":
            return [1] if start < len(tokens) and self.match_single(tokens[start]) else []
        lengths = []
        for term in self.terms:
            k = len(term)
            if start + k <= len(tokens):
                window = tuple(t.lower() for t in tokens[start:start + k])
                if window == term:
                    lengths.append(k)
        return sorted(set(lengths), reverse=True)


@dataclass
class NerRule:
    id: str
    type: str
    priority: int
    trigger: Pattern
    left: Pattern = None
    right: Pattern = None


def parse_pattern(text, gazetteers, rule_id):
    if text.startswith("@"):
        name = text[1:]
        if name not in gazetteers:
            raise BadRuleReference(f"rule {rule_id!r}: unknown gazetteer @{name}")
        return Pattern("gazetteer", name, gazetteers[name])
    if text.startswith("/") and text.endswith("/") and len(text) > 1:
        return Pattern("regex", text[1:-1])
    if text.startswith('i"') and text.endswith('"'):
        return Pattern("ci-literal", text[2:-1])
    if text.startswith('"') and text.endswith('"'):
        return Pattern("literal", text[1:-1])
    return Pattern("literal", text)


def load_gazetteer(path):
    terms = set()
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            terms.add(tuple(line.lower().split()))
    return terms


def load_rules(path):
    """Parse a rule file; @name gazetteers resolve next to the rule file."""
    path = Path(path)
    gazetteers = {}
    for gaz in sorted(path.parent.glob("*.txt")):
        if gaz != path:
            gazetteers[gaz.stem] = load_gazetteer(gaz)
    rules = []
    for line_no, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split()
        if len(fields) < 4 or fields[0] != "rule":
            raise RuleSyntaxError(f"{path}:{line_no}: expected 'rule <id> <type> ...'")
        rule_id, rule_type = fields[1], fields[2]
        if rule_type not in RULE_TYPES:
            raise RuleSyntaxError(f"{path}:{line_no}: unknown type {rule_type!r}")
        params = {}
        for field in fields[3:]:
            key, sep, value = field.partition("=")
            if not sep:
                raise RuleSyntaxError(f"{path}:{line_no}: bad field {field!r}")
            params[key] = value
        if "trigger" not in params:
            raise RuleSyntaxError(f"{path}:{line_no}: rule without trigger")
        rules.append(
            NerRule(
                id=rule_id,
                type=rule_type,
                priority=int(params.get("prio", 0)),
                trigger=parse_pattern(params["trigger"], gazetteers, rule_id),
                left=(parse_pattern(params["left"], gazetteers, rule_id)
                      if "left" in params else None),
                right=(parse_pattern(params["right"], gazetteers, rule_id)
                       if "right" in params else None),
            )
        )
    return rules


def _context_ok(pattern, tokens, lo, hi, direction):
    if pattern is None:
        return True
    if direction < 0:
        window = range(max(0, lo - CONTEXT_WINDOW), lo)
    else:
        window = range(hi, min(len(tokens), hi + CONTEXT_WINDOW))
    return any(pattern.match_single(tokens[t]) for t in window)


def apply_rules(rules, tokens):
    """Non-overlapping spans: longest match, then priority, then leftmost."""
    surfaces = [t if isinstance(t, str) else t[0] for t in tokens]
    candidates = []
    for rule_no, rule in enumerate(rules):
        for start in range(len(surfaces)):
            for length in rule.trigger.match_lengths(surfaces, start):
                end = start + length
                if not _context_ok(rule.left, surfaces, start, end, -1):
                    continue
                if not _context_ok(rule.right, surfaces, start, end, +1):
                    continue
                candidates.append((length, rule.priority, start, rule_no, rule.type, end))
    candidates.sort(key=lambda c: (-c[0], -c[1], c[2], c[3]))
    taken = [False] * len(surfaces)
    spans = []
    for length, _, start, _, etype, end in candidates:
        if any(taken[start:end]):
            continue
        for t in range(start, end):
            taken[t] = True
        spans.append(EntitySpan(etype, start, end))
    return sorted(spans, key=lambda s: (s.start, s.end))


# ---- neural recognizer -----------------------------------------------------------


def bio_labels():
    labels = ["O"]
    for etype in NEURAL_TYPES:
        labels.extend([f"B-{etype}", f"I-{etype}"])
    return labels


class NerModel:
    """Word-level BiRNN-CRF over BIO tags, word vectors as in the parser."""

    def __init__(self, chars, dims, rng=None):
        self.chars = list(chars)
        self.char_index = {c: i for i, c in enumerate(self.chars)}
        self.labels = bio_labels()
        self.dims = dict(dims)
        self.embeddings = None
        self.training_log = []
        d = self.dims

        def table(rows_, width, name):
            if rng is None:
                return N.Tensor(np.zeros((rows_, width)), requires_grad=True, name=name)
            return N.init_table(rng, rows_, width, name=name)

        self.char_table = table(len(self.chars) + 1, d["char_emb"], "ner.chars")
        self.char_cell = N.GruCell(d["char_emb"], d["char_hidden"], rng, prefix="ner.char")
        word_dim = d["pretrained_dim"] + d["char_hidden"]
        self.birnn = N.BiRnnParams(word_dim, d["hidden"], rng, prefix="ner.enc")
        n_labels = len(self.labels)
        if rng is None:
            self.proj_w = N.Tensor(np.zeros((n_labels, 2 * d["hidden"])), requires_grad=True, name="ner.proj_w")
        else:
            self.proj_w = N.init_matrix(rng, n_labels, 2 * d["hidden"], name="ner.proj_w")
        self.proj_b = N.init_vector(n_labels, "ner.proj_b")
        self.crf = N.CrfParams(n_labels, rng, name="ner.crf")

    def parameters(self):
        return ([self.char_table] + self.char_cell.parameters()
                + self.birnn.parameters()
                + [self.proj_w, self.proj_b] + self.crf.parameters())

    def emissions(self, tokens):
        inputs = []
        unknown = len(self.chars)
        for word in tokens:
            vec = N.Tensor(self.embeddings.lookup(word))
            state = self.char_cell.initial_state()
            for ch in word:
                ci = self.char_index.get(ch, unknown)
                state = self.char_cell.step(N.row(self.char_table, ci), state)
            inputs.append(N.concat([vec, state]))
        states = N.birnn_forward(self.birnn, inputs)
        return N.add(N.matmul(N.stack(states), N.transpose(self.proj_w)), self.proj_b)


def neural_ner(model, tokens):
    """Viterbi BIO decode over the sentence, returned as entity spans."""
    if not tokens:
        raise EmptySentence("cannot tag an empty sentence")
    with N.no_grad():
        emissions = model.emissions(tokens)
    path = N.viterbi_decode(emissions, model.crf.transitions)
    return bio_decode([model.labels[i] for i in path])


DEFAULT_HYPER = {
    "char_emb": 12,
    "char_hidden": 16,
    "hidden": 32,
    "epochs": 20,
    "lr": 3e-3,
}


def train_ner(corpus, embeddings_table, hyper=None, seed=0):
    """Fit the BIO CRF on (tokens, tags) sentences."""
    hyper = {**DEFAULT_HYPER, **(hyper or {})}
    corpus = [(tokens, tags) for tokens, tags in corpus if tokens]
    if not corpus:
        raise EmptyTrainingSet("no NER training sentences")
    labels = bio_labels()
    label_index = {l: i for i, l in enumerate(labels)}
    for tokens, tags in corpus:
        for tag in tags:
            if tag not in label_index:
                raise EmptyTrainingSet(f"tag {tag!r} outside the BIO inventory")
    chars = sorted({c for tokens, _ in corpus for w in tokens for c in w})
    dims = {
        "pretrained_dim": embeddings_table.dim,
        "char_emb": int(hyper["char_emb"]),
        "char_hidden": int(hyper["char_hidden"]),
        "hidden": int(hyper["hidden"]),
    }
    rng = np.random.default_rng(seed)
    model = NerModel(chars, dims, rng)
    model.embeddings = embeddings_table
    optimizer = N.OptimizerState(model.parameters(), learning_rate=float(hyper["lr"]))
    order = np.arange(len(corpus))
    for epoch in range(1, int(hyper["epochs"]) + 1):
        rng.shuffle(order)
        total = 0.0
        for i in order:
            tokens, tags = corpus[i]
            gold = [label_index[t] for t in tags]
            loss = N.crf_negative_log_likelihood(
                model.emissions(tokens), model.crf.transitions, gold
            )
            total += loss.item()
            loss.backward()
            N.ensure_grads(optimizer.params)
            N.optimizer_step(optimizer)
        model.training_log.append((epoch, total / len(corpus), float("nan")))
    return model


# ---- BIO corpus format -------------------------------------------------------------


def parse_bio(text):
    """token TAB tag lines, blank line between sentences."""
    sentences = []
    tokens, tags = [], []
    for line in text.split("\n"):
        if not line.strip():
            if tokens:
                sentences.append((tokens, tags))
                tokens, tags = [], []
            continue
        word, _, tag = line.rpartition("\t")
        tokens.append(word)
        tags.append(tag if tag else "O")
    if tokens:
        sentences.append((tokens, tags))
    return sentences


def write_bio(sentences):
    chunks = []
    for tokens, tags in sentences:
        chunks.append("\n".join(f"{w}\t{t}" for w, t in zip(tokens, tags)))
    return "\n\n".join(chunks) + "\n"


# ---- persistence ----------------------------------------------------------------


def _cell_tensors(prefix, cell):
    names = ("wz", "uz", "bz", "wr", "ur", "br", "wc", "uc", "bc")
    return {f"{prefix}.{n}": t for n, t in zip(names, cell.parameters())}


def save_ner(path, model):
    tensors = {
        "char_table": model.char_table,
        "proj_w": model.proj_w, "proj_b": model.proj_b,
        "crf": model.crf.transitions,
    }
    tensors.update(_cell_tensors("char_cell", model.char_cell))
    tensors.update(_cell_tensors("enc.fw", model.birnn.forward))
    tensors.update(_cell_tensors("enc.bw", model.birnn.backward))
    sections = {
        "meta": "".join(f"{k}\t{v}\n" for k, v in sorted(model.dims.items())),
        "chars": N.vocab_section((c, i) for i, c in enumerate(model.chars)),
    }
    N.save_container(path, tensors, sections)


def load_ner(path, embeddings_table=None):
    tensors, sections = N.load_container(path)
    dims = {k: int(v) for k, v in
            (line.split("\t") for line in sections["meta"].splitlines() if line)}
    chars = [pair[0] for pair in N.parse_vocab_section(sections["chars"])]
    model = NerModel(chars, dims)
    model.char_table.data = tensors["char_table"].data
    model.proj_w.data = tensors["proj_w"].data
    model.proj_b.data = tensors["proj_b"].data
    model.crf.transitions.data = tensors["crf"].data
    for prefix, cell in (("char_cell", model.char_cell),
                         ("enc.fw", model.birnn.forward),
                         ("enc.bw", model.birnn.backward)):
        names = ("wz", "uz", "bz", "wr", "ur", "br", "wc", "uc", "bc")
        for n, t in zip(names, cell.parameters()):
            t.data = tensors[f"{prefix}.{n}"].data
    model.embeddings = embeddings_table
    return model
