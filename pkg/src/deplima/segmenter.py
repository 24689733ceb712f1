"""Character-level token and sentence segmentation.

Each character receives three concatenated embeddings (the character
itself, the bigram ending at it, and the trigram centered on it, with a
sentinel beyond the text edges), feeds a bidirectional recurrent encoder,
and is tagged by a 9-label CRF:

    O                      outside any token (whitespace)
    B I E S                multi-char token begin/inside/end, single char
    B+ I+ E+ S+            same, on the last character of a sentence

The sentence-end variants only occur on token-final characters in gold
data, but decoding tolerates any sequence: orphan I/E become S, and open
tokens close at whitespace or at the next begin tag.
"""

from __future__ import annotations

import math

import numpy as np

from . import numerics as N
from .conllu import ConlluDocument
from .errors import EmptyCorpus, EmptyTrainingSet, MissingRawText

SENTINEL = ""
LABELS = ("O", "B", "I", "E", "S", "B+", "I+", "E+", "S+")
LABEL_INDEX = {label: i for i, label in enumerate(LABELS)}


def dim_rule(vocab_size):
    """Embedding width from n-gram inventory size: min(64, max(8, ceil(4*log2(1+V))))."""
    return min(64, max(8, math.ceil(4.0 * math.log2(1 + vocab_size))))


class CharNgramVocab:
    """Uni/bi/trigram inventories with per-order embedding tables.

    Index V_n is the shared unknown row of order n.
    """

    def __init__(self, maps, rng=None):
        self.maps = maps  # tuple of three dicts: ngram -> index
        self.sizes = tuple(len(m) for m in maps)
        self.dims = tuple(dim_rule(v) for v in self.sizes)
        self.tables = []
        for n, (v, d) in enumerate(zip(self.sizes, self.dims), start=1):
            if rng is None:
                table = N.Tensor(np.zeros((v + 1, d)), requires_grad=True, name=f"chars{n}")
            else:
                table = N.init_table(rng, v + 1, d, name=f"chars{n}")
            self.tables.append(table)

    @property
    def input_dim(self):
        return sum(self.dims)

    def indices(self, text):
        """Per-character (uni, bi, tri) index triples, unknowns mapped last."""
        padded = SENTINEL + text + SENTINEL
        out = np.empty((len(text), 3), dtype=np.intp)
        for t in range(len(text)):
            grams = (text[t], padded[t:t + 2], padded[t:t + 3])
            for order, gram in enumerate(grams):
                out[t, order] = self.maps[order].get(gram, self.sizes[order])
        return out


def build_char_vocab(corpus, rng=None):
    """Collect every windowed n-gram (n = 1..3) of the sentinel-padded texts."""
    if not corpus or all(not text for text in corpus):
        raise EmptyCorpus("cannot build a character vocabulary from nothing")
    maps = ({}, {}, {})
    for text in corpus:
        if not text:
            continue
        padded = SENTINEL + text + SENTINEL
        for order, n in enumerate((1, 2, 3)):
            source = text if n == 1 else padded
            for i in range(len(source) - n + 1):
                gram = source[i:i + n]
                if gram not in maps[order]:
                    maps[order][gram] = len(maps[order])
    return CharNgramVocab(maps, rng)


class SegmenterModel:
    def __init__(self, vocab, hidden_dim, rng=None):
        self.vocab = vocab
        self.hidden_dim = hidden_dim
        self.birnn = N.BiRnnParams(vocab.input_dim, hidden_dim, rng, prefix="seg")
        self.proj_w = (N.init_matrix(rng, len(LABELS), 2 * hidden_dim, "seg.proj_w")
                       if rng is not None else
                       N.Tensor(np.zeros((len(LABELS), 2 * hidden_dim)), requires_grad=True, name="seg.proj_w"))
        self.proj_b = N.init_vector(len(LABELS), "seg.proj_b")
        self.crf = N.CrfParams(len(LABELS), rng, name="seg.crf")

    def parameters(self):
        return (self.vocab.tables + self.birnn.parameters()
                + [self.proj_w, self.proj_b] + self.crf.parameters())

    def emissions(self, text):
        """[len(text), 9] emission scores (differentiable)."""
        idx = self.vocab.indices(text)
        feats = N.concat(
            [N.rows(self.vocab.tables[order], idx[:, order]) for order in range(3)],
            axis=1,
        )
        inputs = [N.row(feats, t) for t in range(len(text))]
        states = N.birnn_forward(self.birnn, inputs)
        return N.add(N.matmul(N.stack(states), N.transpose(self.proj_w)), self.proj_b)


# ---- tagging <-> spans -----------------------------------------------------


def tags_for(text, spans, eos_token_indices):
    """Gold label indices for ``text`` given token spans and sentence ends."""
    eos = set(eos_token_indices)
    labels = ["O"] * len(text)
    for i, (start, end) in enumerate(spans):
        final = "+" if i in eos else ""
        if end - start == 1:
            labels[start] = "S" + final
        else:
            labels[start] = "B"
            for c in range(start + 1, end - 1):
                labels[c] = "I"
            labels[end - 1] = "E" + final
    return [LABEL_INDEX[label] for label in labels]


def decode_tags(text, label_ids):
    """Rebuild (tokens, sentence_breaks) from per-character labels.

    tokens: (surface, char_start, char_end) triples partitioning the non-O
    characters; sentence_breaks: indices of sentence-final tokens.
    """
    tokens = []
    breaks = []
    open_start = None

    def close(end, sentence_end=False):
        nonlocal open_start
        if open_start is not None:
            tokens.append((text[open_start:end], open_start, end))
            if sentence_end:
                breaks.append(len(tokens) - 1)
            open_start = None

    for t, label_id in enumerate(label_ids):
        label = LABELS[label_id]
        base = label.rstrip("+")
        eos = label.endswith("+")
        if base == "O":
            close(t)
        elif base == "S":
            close(t)
            tokens.append((text[t], t, t + 1))
            if eos:
                breaks.append(len(tokens) - 1)
        elif base == "B":
            close(t)
            open_start = t
        elif base == "I":
            if open_start is None:  # orphan: becomes a single-char token
                tokens.append((text[t], t, t + 1))
                if eos:
                    breaks.append(len(tokens) - 1)
        elif base == "E":
            if open_start is None:
                tokens.append((text[t], t, t + 1))
                if eos:
                    breaks.append(len(tokens) - 1)
            else:
                close(t + 1, sentence_end=eos)
    close(len(label_ids))
    return tokens, breaks


def segment(model, text):
    """Decode tokens and sentence breaks for a text."""
    if not text:
        return [], []
    with N.no_grad():
        emissions = model.emissions(text)
    path = N.viterbi_decode(emissions, model.crf.transitions)
    return decode_tags(text, path)


# ---- training ----------------------------------------------------------------


def align_tokens(text, forms):
    """Left-to-right character spans of token forms inside ``text``."""
    spans = []
    cursor = 0
    for form in forms:
        pos = text.find(form, cursor)
        if pos < 0:
            raise MissingRawText(
                f"token {form!r} not found in raw text {text!r} after offset {cursor}"
            )
        spans.append((pos, pos + len(form)))
        cursor = pos + len(form)
    return spans


def training_sequences(gold, chunk_sentences=3):
    """(text, spans, eos_token_indices) chunks of consecutive sentences.

    Joining a few sentences with a space lets the tagger see context after
    a sentence boundary, which per-sentence sequences never show.
    """
    per_sentence = []
    for sentence in gold.sentences:
        text = sentence.text_comment()
        if text is None:
            raise MissingRawText("sentence lacks a '# text =' comment")
        forms = [t.form for t in sentence.words()]
        per_sentence.append((text, align_tokens(text, forms)))
    chunks = []
    for i in range(0, len(per_sentence), chunk_sentences):
        group = per_sentence[i:i + chunk_sentences]
        text_parts = []
        spans = []
        eos = []
        offset = 0
        token_base = 0
        for text, sent_spans in group:
            text_parts.append(text)
            spans.extend((s + offset, e + offset) for s, e in sent_spans)
            token_base += len(sent_spans)
            eos.append(token_base - 1)
            offset += len(text) + 1  # single joining space
        chunks.append((" ".join(text_parts), spans, eos))
    return chunks


def tokenization_f1(gold_spans, pred_spans):
    gold_set, pred_set = set(gold_spans), set(pred_spans)
    if not gold_set and not pred_set:
        return 1.0
    hits = len(gold_set & pred_set)
    precision = hits / len(pred_set) if pred_set else 0.0
    recall = hits / len(gold_set) if gold_set else 0.0
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def train_segmenter(gold, hyper=None, seed=0, dev=None):
    """Fit the CRF segmenter on a treebank with raw-text comments.

    Minimizes the negative log-likelihood of gold tag sequences; when a dev
    document is given the epoch with the best dev character-tag accuracy
    wins, otherwise the final epoch is returned.
    """
    hyper = dict(hyper or {})
    if isinstance(gold, ConlluDocument) and not gold.sentences:
        raise EmptyTrainingSet("no sentences to train on")
    chunks = training_sequences(gold, int(hyper.get("chunk_sentences", 3)))
    chunks = [c for c in chunks if c[0]]
    if not chunks:
        raise EmptyTrainingSet("no usable training text")
    rng = np.random.default_rng(seed)
    vocab = build_char_vocab([c[0] for c in chunks], rng)
    model = SegmenterModel(vocab, int(hyper.get("hidden", 32)), rng)
    optimizer = N.OptimizerState(model.parameters(), learning_rate=float(hyper.get("lr", 1e-2)))
    epochs = int(hyper.get("epochs", 12))

    dev_chunks = None
    if dev is not None:
        dev_chunks = training_sequences(dev, int(hyper.get("chunk_sentences", 3)))
        dev_chunks = [c for c in dev_chunks if c[0]]

    gold_tags = [tags_for(text, spans, eos) for text, spans, eos in chunks]
    order = np.arange(len(chunks))
    best_state = None
    best_accuracy = -1.0
    model.training_log = []
    for epoch in range(1, epochs + 1):
        rng.shuffle(order)
        total = 0.0
        for i in order:
            text = chunks[i][0]
            loss = N.crf_negative_log_likelihood(
                model.emissions(text), model.crf.transitions, gold_tags[i]
            )
            total += loss.item()
            loss.backward()
            N.ensure_grads(optimizer.params)
            N.optimizer_step(optimizer)
        dev_accuracy = float("nan")
        if dev_chunks is not None:
            correct = counted = 0
            for text, spans, eos in dev_chunks:
                want = tags_for(text, spans, eos)
                with N.no_grad():
                    got = N.viterbi_decode(model.emissions(text), model.crf.transitions)
                correct += sum(1 for a, b in zip(want, got) if a == b)
                counted += len(want)
            dev_accuracy = correct / max(counted, 1)
            if dev_accuracy > best_accuracy:
                best_accuracy = dev_accuracy
                best_state = [p.data.copy() for p in model.parameters()]
        model.training_log.append((epoch, total / len(chunks), dev_accuracy))
    if best_state is not None:
        for p, data in zip(model.parameters(), best_state):
            p.data = data
    return model


# ---- persistence --------------------------------------------------------------


def _birnn_tensors(prefix, birnn):
    names = ("wz", "uz", "bz", "wr", "ur", "br", "wc", "uc", "bc")
    out = {}
    for side, cell in (("fw", birnn.forward), ("bw", birnn.backward)):
        for name, tensor in zip(names, cell.parameters()):
            out[f"{prefix}.{side}.{name}"] = tensor
    return out


def _load_birnn(prefix, birnn, tensors):
    names = ("wz", "uz", "bz", "wr", "ur", "br", "wc", "uc", "bc")
    for side, cell in (("fw", birnn.forward), ("bw", birnn.backward)):
        for name, tensor in zip(names, cell.parameters()):
            tensor.data = tensors[f"{prefix}.{side}.{name}"].data


def save_segmenter(path, model):
    tensors = {f"vocab.table{n}": t for n, t in enumerate(model.vocab.tables, start=1)}
    tensors.update(_birnn_tensors("birnn", model.birnn))
    tensors["proj_w"] = model.proj_w
    tensors["proj_b"] = model.proj_b
    tensors["crf"] = model.crf.transitions
    sections = {
        "meta": f"hidden\t{model.hidden_dim}\n",
    }
    for n, mapping in enumerate(model.vocab.maps, start=1):
        sections[f"vocab{n}"] = N.vocab_section(sorted(mapping.items(), key=lambda kv: kv[1]))
    N.save_container(path, tensors, sections)


def load_segmenter(path):
    tensors, sections = N.load_container(path)
    maps = tuple(
        dict(N.parse_vocab_section(sections[f"vocab{n}"])) for n in (1, 2, 3)
    )
    meta = dict(line.split("\t") for line in sections["meta"].splitlines() if line)
    vocab = CharNgramVocab(maps)
    for n in (1, 2, 3):
        vocab.tables[n - 1].data = tensors[f"vocab.table{n}"].data
    model = SegmenterModel(vocab, int(meta["hidden"]))
    _load_birnn("birnn", model.birnn, tensors)
    model.proj_w.data = tensors["proj_w"].data
    model.proj_b.data = tensors["proj_b"].data
    model.crf.transitions.data = tensors["crf"].data
    return model
