"""Character-level sequence-to-sequence lemmatization.

The surface form is encoded character by character; the morphological
analysis (UPOS and feature values) enters once, as tag embeddings projected
into the encoder's initial state. A decoder conditioned on the encoder's
final state emits the lemma greedily until it produces the end symbol or
hits the output length cap 2*len(form)+8.

Lemmatization is context independent: identical (form, UPOS, FEATS) keys
give identical lemmas regardless of the surrounding sentence, and results
are memoized per model under that key.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import numerics as N
from .conllu import canonical_feats, parse_feats
from .errors import EmptyTrainingSet

DEFAULT_HYPER = {
    "char_emb": 24,
    "hidden": 48,
    "tag_emb": 8,
    "epochs": 60,
    "lr": 5e-3,
}


@dataclass(frozen=True)
class LemmaKey:
    form: str
    upos: str
    feats: str

    @classmethod
    def make(cls, form, upos, feats):
        return cls(form, upos, canonical_feats(feats or "_"))


def max_output_length(form):
    return 2 * len(form) + 8


class LemmatizerModel:
    def __init__(self, chars, categories, tag_values, dims, rng=None):
        self.chars = list(chars)
        self.char_index = {c: i for i, c in enumerate(self.chars)}
        self.bos = len(self.chars)
        self.eos = len(self.chars) + 1
        self.unk = len(self.chars) + 2
        self.categories = list(categories)
        self.tag_values = {c: list(tag_values[c]) for c in self.categories}
        self.tag_index = {
            c: {v: i for i, v in enumerate(self.tag_values[c])} for c in self.categories
        }
        self.dims = dict(dims)
        self.cache = {}
        self.training_log = []

        d = self.dims
        n_rows = len(self.chars) + 3

        def table(rows_, width, name):
            if rng is None:
                return N.Tensor(np.zeros((rows_, width)), requires_grad=True, name=name)
            return N.init_table(rng, rows_, width, name=name)

        self.char_table = table(n_rows, d["char_emb"], "lem.chars")
        self.tag_tables = {
            c: table(len(self.tag_values[c]) + 1, d["tag_emb"], f"lem.tags.{c}")
            for c in self.categories
        }
        tag_total = d["tag_emb"] * len(self.categories)
        if rng is None:
            self.init_w = N.Tensor(np.zeros((d["hidden"], tag_total)), requires_grad=True, name="lem.init_w")
        else:
            self.init_w = N.init_matrix(rng, d["hidden"], tag_total, name="lem.init_w")
        self.init_b = N.init_vector(d["hidden"], "lem.init_b")
        self.encoder = N.GruCell(d["char_emb"], d["hidden"], rng, prefix="lem.enc")
        self.decoder = N.GruCell(d["char_emb"] + d["hidden"], d["hidden"], rng, prefix="lem.dec")
        # output classes: every character plus the end symbol
        self.eos_out = len(self.chars)
        if rng is None:
            self.out_w = N.Tensor(np.zeros((len(self.chars) + 1, d["hidden"])), requires_grad=True, name="lem.out_w")
        else:
            self.out_w = N.init_matrix(rng, len(self.chars) + 1, d["hidden"], name="lem.out_w")
        self.out_b = N.init_vector(len(self.chars) + 1, "lem.out_b")

    def parameters(self):
        out = [self.char_table, self.init_w, self.init_b, self.out_w, self.out_b]
        for c in self.categories:
            out.append(self.tag_tables[c])
        out += self.encoder.parameters() + self.decoder.parameters()
        return out

    def char_id(self, ch):
        return self.char_index.get(ch, self.unk)

    def tag_vector(self, key):
        bundle = parse_feats(key.feats)
        parts = []
        for c in self.categories:
            value = key.upos if c == "upos" else bundle.get(c, "_")
            idx = self.tag_index[c].get(value, len(self.tag_values[c]))
            parts.append(N.row(self.tag_tables[c], idx))
        return N.concat(parts)

    def encode(self, key):
        """Final encoder state; tags shape the initial state only."""
        h = N.tanh(N.add(N.matmul(self.init_w, self.tag_vector(key)), self.init_b))
        for ch in key.form:
            h = self.encoder.step(N.row(self.char_table, self.char_id(ch)), h)
        return h

    def output_ids_to_text(self, ids):
        return "".join(self.chars[i] for i in ids if i < len(self.chars))


def lemmatize(model, key, use_cache=True):
    """Greedy lemma decode; a pure function of the key, memoized per model."""
    if not isinstance(key, LemmaKey):
        key = LemmaKey.make(*key)
    else:
        key = LemmaKey.make(key.form, key.upos, key.feats)
    if use_cache:
        hit = model.cache.get(key)
        if hit is not None:
            return hit
    with N.no_grad():
        context = model.encode(key)
        h = context
        prev = model.bos
        out_ids = []
        for _ in range(max_output_length(key.form)):
            x = N.concat([N.row(model.char_table, prev), context])
            h = model.decoder.step(x, h)
            scores = N.add(N.matmul(model.out_w, h), model.out_b)
            nxt = int(np.argmax(scores.data))
            if nxt == model.eos_out:
                break
            out_ids.append(nxt)
            prev = nxt
    lemma = model.output_ids_to_text(out_ids)
    if use_cache:
        model.cache[key] = lemma
    return lemma


def _teacher_forced_loss(model, key, lemma):
    context = model.encode(key)
    h = context
    prev = model.bos
    terms = []
    target = [model.char_id(c) for c in lemma] + [model.eos_out]
    for gold in target:
        x = N.concat([N.row(model.char_table, prev), context])
        h = model.decoder.step(x, h)
        scores = N.add(N.matmul(model.out_w, h), model.out_b)
        terms.append(N.sub(N.logsumexp(scores), N.pick(scores, gold)))
        # feed the gold character (UNK chars keep their UNK embedding)
        prev = gold if gold < len(model.chars) else model.unk
    total = terms[0]
    for t in terms[1:]:
        total = N.add(total, t)
    return total


def train_lemmatizer(triples, hyper=None, seed=0):
    """Fit on (form, upos, feats, gold_lemma) tuples with teacher forcing."""
    hyper = {**DEFAULT_HYPER, **(hyper or {})}
    if not triples:
        raise EmptyTrainingSet("no lemmatization examples")
    examples = [
        (LemmaKey.make(form, upos, feats), lemma)
        for form, upos, feats, lemma in triples
    ]
    chars = sorted({c for key, lemma in examples for c in key.form + lemma})
    categories = ["upos"] + sorted(
        {cat for key, _ in examples for cat in parse_feats(key.feats)}
    )
    tag_values = {"upos": sorted({key.upos for key, _ in examples})}
    for c in categories[1:]:
        tag_values[c] = ["_"] + sorted(
            {parse_feats(key.feats).get(c, "_") for key, _ in examples} - {"_"}
        )
    dims = {k: int(hyper[k]) for k in ("char_emb", "hidden", "tag_emb")}
    rng = np.random.default_rng(seed)
    model = LemmatizerModel(chars, categories, tag_values, dims, rng)
    optimizer = N.OptimizerState(model.parameters(), learning_rate=float(hyper["lr"]))
    order = np.arange(len(examples))
    for epoch in range(1, int(hyper["epochs"]) + 1):
        rng.shuffle(order)
        total = 0.0
        for i in order:
            key, lemma = examples[i]
            loss = _teacher_forced_loss(model, key, lemma)
            total += loss.item()
            loss.backward()
            N.ensure_grads(optimizer.params)
            N.optimizer_step(optimizer)
        model.training_log.append((epoch, total / len(examples), float("nan")))
    model.cache = {}
    return model


# ---- persistence --------------------------------------------------------------


def _cell_tensors(prefix, cell):
    names = ("wz", "uz", "bz", "wr", "ur", "br", "wc", "uc", "bc")
    return {f"{prefix}.{n}": t for n, t in zip(names, cell.parameters())}


def save_lemmatizer(path, model):
    from .numerics.container import escape_field

    tensors = {
        "char_table": model.char_table,
        "init_w": model.init_w, "init_b": model.init_b,
        "out_w": model.out_w, "out_b": model.out_b,
    }
    for c in model.categories:
        tensors[f"tags.{c}"] = model.tag_tables[c]
    tensors.update(_cell_tensors("encoder", model.encoder))
    tensors.update(_cell_tensors("decoder", model.decoder))
    sections = {
        "meta": "".join(f"{k}\t{v}\n" for k, v in sorted(model.dims.items())),
        "chars": N.vocab_section((c, i) for i, c in enumerate(model.chars)),
        "categories": "".join(
            "\t".join(escape_field(f) for f in [c] + model.tag_values[c]) + "\n"
            for c in model.categories
        ),
    }
    N.save_container(path, tensors, sections)


def load_lemmatizer(path):
    from .numerics.container import unescape_field

    tensors, sections = N.load_container(path)
    dims = {k: int(v) for k, v in
            (line.split("\t") for line in sections["meta"].splitlines() if line)}
    chars = [pair[0] for pair in N.parse_vocab_section(sections["chars"])]
    categories = []
    tag_values = {}
    for line in sections["categories"].splitlines():
        if not line:
            continue
        fields = [unescape_field(f) for f in line.split("\t")]
        categories.append(fields[0])
        tag_values[fields[0]] = fields[1:]
    model = LemmatizerModel(chars, categories, tag_values, dims)
    names = {
        "char_table": model.char_table,
        "init_w": model.init_w, "init_b": model.init_b,
        "out_w": model.out_w, "out_b": model.out_b,
    }
    for c in model.categories:
        names[f"tags.{c}"] = model.tag_tables[c]
    names.update(_cell_tensors("encoder", model.encoder))
    names.update(_cell_tensors("decoder", model.decoder))
    for name, tensor in names.items():
        tensor.data = tensors[name].data
    return model
