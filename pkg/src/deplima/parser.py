"""Joint morphological tagging and graph-based dependency parsing.

One model owns both tasks. Word vectors are the sum of a frozen pretrained
vector and a trainable vector (frequent words only), concatenated with the
final state of a character-level recurrent encoder. A first bidirectional
encoder feeds one CRF head per tag category (UPOS plus each morphological
feature); the per-position label marginals of every head are concatenated
with the first encoder's states and fed to a second bidirectional encoder
reserved for parsing. Arcs are scored biaffinely,

    arc[h, d] = headProj(x_h)^T W depProj(x_d) + b^T depProj(x_d)

and heads are decoded as the best single-root arborescence. Both losses
(CRF negative log-likelihood per category, cross-entropy for arcs and arc
labels) are summed and trained simultaneously with one optimizer.
"""

from __future__ import annotations

import numpy as np

from . import numerics as N
from .conllu import parse_feats
from .errors import (
    EmptySentence,
    EmptyTrainingSet,
    MissingGoldAnnotations,
)
from .mst import decode_heads

DEFAULT_HYPER = {
    "hidden1": 64,
    "hidden2": 64,
    "arc_dim": 64,
    "label_dim": 32,
    "char_emb": 16,
    "char_hidden": 24,
    "epochs": 30,
    "lr": 2e-3,
    "freq_threshold": 3,
    "rare_threshold": 1e-3,
}

UNKNOWN_CHAR = ""


class TaggerParserModel:
    """Parameters plus inventories; the embedding table attaches separately."""

    def __init__(self, inventories, dims, rng=None):
        self.categories = list(inventories["categories"])  # "upos" first
        self.labels = {c: list(inventories["labels"][c]) for c in self.categories}
        self.label_index = {
            c: {l: i for i, l in enumerate(self.labels[c])} for c in self.categories
        }
        self.deprels = list(inventories["deprels"])
        self.deprel_index = {d: i for i, d in enumerate(self.deprels)}
        self.frequent = list(inventories["frequent"])
        self.frequent_index = {w: i for i, w in enumerate(self.frequent)}
        self.chars = list(inventories["chars"])
        self.char_index = {c: i for i, c in enumerate(self.chars)}
        self.dims = dict(dims)
        self.embeddings = None
        self.training_log = []

        d = self.dims
        pd = d["pretrained_dim"]
        word_dim = pd + d["char_hidden"]
        post_dim = sum(len(self.labels[c]) for c in self.categories)

        def table(n_rows, width, name):
            if rng is None:
                return N.Tensor(np.zeros((n_rows, width)), requires_grad=True, name=name)
            return N.init_table(rng, n_rows, width, name=name)

        def matrix(n_out, n_in, name):
            if rng is None:
                return N.Tensor(np.zeros((n_out, n_in)), requires_grad=True, name=name)
            return N.init_matrix(rng, n_out, n_in, name=name)

        self.char_table = table(len(self.chars) + 1, d["char_emb"], "char_table")
        self.char_cell = N.GruCell(d["char_emb"], d["char_hidden"], rng, prefix="char")
        self.word_table = table(max(len(self.frequent), 1), pd, "word_table")
        self.birnn1 = N.BiRnnParams(word_dim, d["hidden1"], rng, prefix="enc1")
        self.head_w = {}
        self.head_b = {}
        self.head_crf = {}
        for c in self.categories:
            n_labels = len(self.labels[c])
            self.head_w[c] = matrix(n_labels, 2 * d["hidden1"], f"head.{c}.w")
            self.head_b[c] = N.init_vector(n_labels, f"head.{c}.b")
            self.head_crf[c] = N.CrfParams(n_labels, rng, name=f"head.{c}.crf")
        self.birnn2 = N.BiRnnParams(2 * d["hidden1"] + post_dim, d["hidden2"], rng, prefix="enc2")
        self.root_vec = table(1, 2 * d["hidden2"], "root_vec")
        self.arc_head_w = matrix(d["arc_dim"], 2 * d["hidden2"], "arc_head_w")
        self.arc_head_b = N.init_vector(d["arc_dim"], "arc_head_b")
        self.arc_dep_w = matrix(d["arc_dim"], 2 * d["hidden2"], "arc_dep_w")
        self.arc_dep_b = N.init_vector(d["arc_dim"], "arc_dep_b")
        self.arc_biaffine = matrix(d["arc_dim"], d["arc_dim"], "arc_biaffine")
        self.arc_bias = N.init_vector(d["arc_dim"], "arc_bias")
        self.label_w1 = matrix(d["label_dim"], 4 * d["hidden2"], "label_w1")
        self.label_b1 = N.init_vector(d["label_dim"], "label_b1")
        self.label_w2 = matrix(len(self.deprels), d["label_dim"], "label_w2")
        self.label_b2 = N.init_vector(len(self.deprels), "label_b2")

    def parameters(self):
        out = [self.char_table, self.word_table]
        out += self.char_cell.parameters()
        out += self.birnn1.parameters()
        for c in self.categories:
            out += [self.head_w[c], self.head_b[c]] + self.head_crf[c].parameters()
        out += self.birnn2.parameters()
        out += [self.root_vec, self.arc_head_w, self.arc_head_b, self.arc_dep_w,
                self.arc_dep_b, self.arc_biaffine, self.arc_bias,
                self.label_w1, self.label_b1, self.label_w2, self.label_b2]
        return out


def word_input_vector(model, word):
    """(pretrained + trainable) word vector concatenated with the char state."""
    pre = N.Tensor(model.embeddings.lookup(word))
    vec = pre
    fi = model.frequent_index.get(word)
    if fi is not None:
        vec = N.add(vec, N.row(model.word_table, fi))
    state = model.char_cell.initial_state()
    unknown_row = len(model.chars)
    for ch in word:
        ci = model.char_index.get(ch, unknown_row)
        state = model.char_cell.step(N.row(model.char_table, ci), state)
    return N.concat([vec, state])


def encode_sentence(model, tokens):
    """Shared first-encoder states for a sentence of surface forms."""
    if not tokens:
        raise EmptySentence("cannot encode an empty sentence")
    inputs = [word_input_vector(model, w) for w in tokens]
    return N.birnn_forward(model.birnn1, inputs)


def _tag_scores(model, stacked_states):
    emissions = {}
    for c in model.categories:
        emissions[c] = N.add(
            N.matmul(stacked_states, N.transpose(model.head_w[c])), model.head_b[c]
        )
    return emissions


def tag_morphology(model, states):
    """Per-category Viterbi label sequences and forward-backward marginals."""
    stacked = N.stack(states)
    emissions = _tag_scores(model, stacked)
    decoded = {}
    posteriors = {}
    for c in model.categories:
        transitions = model.head_crf[c].transitions
        marginals, _ = N.crf_forward_backward(emissions[c], transitions)
        posteriors[c] = marginals
        path = N.viterbi_decode(emissions[c], transitions)
        decoded[c] = [model.labels[c][i] for i in path]
    return decoded, posteriors


def _second_encoder(model, states, posteriors):
    n = len(states)
    inputs = [
        N.concat([states[t]] + [N.row(posteriors[c], t) for c in model.categories])
        for t in range(n)
    ]
    return N.birnn_forward(model.birnn2, inputs)


def _arc_scores(model, states2):
    n = len(states2)
    heads_matrix = N.stack([N.row(model.root_vec, 0)] + states2)     # [n+1, 2h2]
    deps_matrix = N.stack(states2)                                    # [n, 2h2]
    head_proj = N.tanh(N.add(N.matmul(heads_matrix, N.transpose(model.arc_head_w)),
                             model.arc_head_b))
    dep_proj = N.tanh(N.add(N.matmul(deps_matrix, N.transpose(model.arc_dep_w)),
                            model.arc_dep_b))
    bilinear = N.matmul(N.matmul(head_proj, model.arc_biaffine), N.transpose(dep_proj))
    dep_bias = N.matmul(dep_proj, model.arc_bias)                     # [n]
    return N.add(bilinear, N.reshape(dep_bias, (1, n)))               # [n+1, n]


def _label_scores(model, states2, head, dep):
    head_repr = N.row(model.root_vec, 0) if head == 0 else states2[head - 1]
    feat = N.concat([head_repr, states2[dep]])
    hidden = N.tanh(N.add(N.matmul(model.label_w1, feat), model.label_b1))
    return N.add(N.matmul(model.label_w2, hidden), model.label_b2)


def parse_dependencies(model, states, posteriors):
    """Best single-root tree plus one relation label per token.

    Tokens attached to the artificial root are always labeled "root"; other
    tokens take the argmax label excluding "root".
    """
    if not states:
        raise EmptySentence("cannot parse an empty sentence")
    states2 = _second_encoder(model, states, posteriors)
    arc = _arc_scores(model, states2)
    heads = decode_heads(arc.data)
    root_idx = model.deprel_index.get("root")
    deprels = []
    for d, h in enumerate(heads):
        if h == 0:
            deprels.append("root")
            continue
        scores = _label_scores(model, states2, h, d).data.copy()
        if root_idx is not None:
            scores[root_idx] = -np.inf
        deprels.append(model.deprels[int(np.argmax(scores))])
    return heads, deprels


def predict_sentence(model, tokens):
    """Full analysis of one sentence: tags, features, heads, relations."""
    with N.no_grad():
        states = encode_sentence(model, tokens)
        decoded, posteriors = tag_morphology(model, states)
        heads, deprels = parse_dependencies(model, states, posteriors)
    upos = decoded["upos"]
    feats = []
    for t in range(len(tokens)):
        bundle = {}
        for c in model.categories:
            if c == "upos":
                continue
            value = decoded[c][t]
            if value != "_":
                bundle[c] = value
        feats.append(bundle)
    return {"upos": upos, "feats": feats, "heads": heads, "deprels": deprels}


# ---- training ---------------------------------------------------------------


def _gold_rows(treebank):
    """Extract (forms, upos, feats-mapping, heads, deprels) per sentence."""
    rows = []
    for s_no, sentence in enumerate(treebank.sentences, start=1):
        words = sentence.words()
        if not words:
            continue
        forms = [w.form for w in words]
        upos = [w.upos for w in words]
        heads = []
        deprels = []
        feats = []
        for w in words:
            if w.upos == "_" or w.head == "_" or w.deprel == "_":
                raise MissingGoldAnnotations(
                    f"sentence {s_no}: token {w.id} lacks UPOS/HEAD/DEPREL"
                )
            heads.append(w.head_index)
            deprels.append(w.deprel)
            feats.append(parse_feats(w.feats))
        rows.append((forms, upos, feats, heads, deprels))
    if not rows:
        raise EmptyTrainingSet("treebank contains no sentences with tokens")
    return rows


def build_inventories(rows, freq_threshold, rare_threshold):
    total_tokens = sum(len(r[0]) for r in rows)
    upos_values = sorted({u for r in rows for u in r[1]})
    cat_counts = {}
    cat_values = {}
    for r in rows:
        for bundle in r[2]:
            for key, value in bundle.items():
                cat_counts[key] = cat_counts.get(key, 0) + 1
                cat_values.setdefault(key, set()).add(value)
    kept = sorted(
        c for c, count in cat_counts.items() if count / total_tokens >= rare_threshold
    )
    categories = ["upos"] + kept
    labels = {"upos": upos_values}
    for c in kept:
        labels[c] = ["_"] + sorted(cat_values[c])
    word_counts = {}
    for r in rows:
        for form in r[0]:
            word_counts[form] = word_counts.get(form, 0) + 1
    frequent = sorted(w for w, count in word_counts.items() if count >= freq_threshold)
    deprels = sorted({d for r in rows for d in r[4]} | {"root"})
    chars = sorted({ch for r in rows for form in r[0] for ch in form})
    return {
        "categories": categories,
        "labels": labels,
        "deprels": deprels,
        "frequent": frequent,
        "chars": chars,
    }


def sentence_loss(model, forms, upos, feats, heads, deprels):
    """Summed tag NLL + arc cross-entropy + label cross-entropy (differentiable)."""
    n = len(forms)
    states = encode_sentence(model, forms)
    stacked = N.stack(states)
    emissions = _tag_scores(model, stacked)
    loss_terms = []
    posteriors = {}
    for c in model.categories:
        transitions = model.head_crf[c].transitions
        marginals, log_z = N.crf_forward_backward(emissions[c], transitions)
        posteriors[c] = marginals
        if c == "upos":
            gold = [model.label_index[c][u] for u in upos]
        else:
            gold = [model.label_index[c].get(bundle.get(c, "_"), 0) for bundle in feats]
        loss_terms.append(N.sub(log_z, N.crf_gold_score(emissions[c], transitions, gold)))
    states2 = _second_encoder(model, states, posteriors)
    arc = _arc_scores(model, states2)
    arc_lse = N.logsumexp(arc, axis=0)
    gold_pick = N.pick_sum(arc, np.asarray(heads), np.arange(n))
    loss_terms.append(N.sub(N.tsum(arc_lse), gold_pick))
    for d in range(n):
        scores = _label_scores(model, states2, heads[d], d)
        gold_rel = model.deprel_index[deprels[d]]
        loss_terms.append(N.sub(N.logsumexp(scores), N.pick(scores, gold_rel)))
    total = loss_terms[0]
    for term in loss_terms[1:]:
        total = N.add(total, term)
    return total


def train_joint(treebank, embeddings_table, hyper=None, seed=0, dev=None):
    """Train tagger and parser simultaneously on a gold treebank.

    Feature categories present on fewer than ``rare_threshold`` of training
    tokens are dropped from the inventory. Deterministic for a fixed seed.
    """
    hyper = {**DEFAULT_HYPER, **(hyper or {})}
    rows = _gold_rows(treebank)
    inventories = build_inventories(
        rows, int(hyper["freq_threshold"]), float(hyper["rare_threshold"])
    )
    dims = {
        "pretrained_dim": embeddings_table.dim,
        "hidden1": int(hyper["hidden1"]),
        "hidden2": int(hyper["hidden2"]),
        "arc_dim": int(hyper["arc_dim"]),
        "label_dim": int(hyper["label_dim"]),
        "char_emb": int(hyper["char_emb"]),
        "char_hidden": int(hyper["char_hidden"]),
    }
    rng = np.random.default_rng(seed)
    model = TaggerParserModel(inventories, dims, rng)
    model.embeddings = embeddings_table
    optimizer = N.OptimizerState(model.parameters(), learning_rate=float(hyper["lr"]))
    order = np.arange(len(rows))
    dev_rows = _gold_rows(dev) if dev is not None else None
    for epoch in range(1, int(hyper["epochs"]) + 1):
        rng.shuffle(order)
        total = 0.0
        for i in order:
            loss = sentence_loss(model, *rows[i])
            total += loss.item()
            loss.backward()
            N.ensure_grads(optimizer.params)
            N.optimizer_step(optimizer)
        dev_metric = float("nan")
        if dev_rows is not None:
            dev_metric = _las(model, dev_rows)
        model.training_log.append((epoch, total / len(rows), dev_metric))
    return model


def _las(model, rows):
    correct = total = 0
    for forms, _, _, heads, deprels in rows:
        pred = predict_sentence(model, forms)
        for d in range(len(forms)):
            total += 1
            if pred["heads"][d] == heads[d] and pred["deprels"][d] == deprels[d]:
                correct += 1
    return correct / max(total, 1)


# ---- persistence --------------------------------------------------------------


def _cell_tensors(prefix, cell):
    names = ("wz", "uz", "bz", "wr", "ur", "br", "wc", "uc", "bc")
    return {f"{prefix}.{n}": t for n, t in zip(names, cell.parameters())}


def _assign_cell(prefix, cell, tensors):
    names = ("wz", "uz", "bz", "wr", "ur", "br", "wc", "uc", "bc")
    for n, t in zip(names, cell.parameters()):
        t.data = tensors[f"{prefix}.{n}"].data


def _model_tensors(model):
    out = {"char_table": model.char_table, "word_table": model.word_table,
           "root_vec": model.root_vec,
           "arc_head_w": model.arc_head_w, "arc_head_b": model.arc_head_b,
           "arc_dep_w": model.arc_dep_w, "arc_dep_b": model.arc_dep_b,
           "arc_biaffine": model.arc_biaffine, "arc_bias": model.arc_bias,
           "label_w1": model.label_w1, "label_b1": model.label_b1,
           "label_w2": model.label_w2, "label_b2": model.label_b2}
    out.update(_cell_tensors("char_cell", model.char_cell))
    for prefix, birnn in (("enc1", model.birnn1), ("enc2", model.birnn2)):
        out.update(_cell_tensors(f"{prefix}.fw", birnn.forward))
        out.update(_cell_tensors(f"{prefix}.bw", birnn.backward))
    for c in model.categories:
        out[f"head.{c}.w"] = model.head_w[c]
        out[f"head.{c}.b"] = model.head_b[c]
        out[f"head.{c}.crf"] = model.head_crf[c].transitions
    return out


def save_parser(path, model):
    from .numerics.container import escape_field

    sections = {
        "meta": "".join(f"{k}\t{v}\n" for k, v in sorted(model.dims.items())),
        "categories": "".join(
            "\t".join(escape_field(f) for f in [c] + model.labels[c]) + "\n"
            for c in model.categories
        ),
        "deprels": "".join(escape_field(d) + "\n" for d in model.deprels),
        "frequent": "".join(escape_field(w) + "\n" for w in model.frequent),
        "chars": N.vocab_section((ch, i) for i, ch in enumerate(model.chars)),
    }
    N.save_container(path, _model_tensors(model), sections)


def load_parser(path, embeddings_table=None):
    from .numerics.container import unescape_field

    tensors, sections = N.load_container(path)
    dims = {k: int(v) for k, v in
            (line.split("\t") for line in sections["meta"].splitlines() if line)}
    categories = []
    labels = {}
    for line in sections["categories"].splitlines():
        if not line:
            continue
        fields = [unescape_field(f) for f in line.split("\t")]
        categories.append(fields[0])
        labels[fields[0]] = fields[1:]
    inventories = {
        "categories": categories,
        "labels": labels,
        "deprels": [unescape_field(l) for l in sections["deprels"].splitlines() if l],
        "frequent": [unescape_field(l) for l in sections["frequent"].splitlines() if l],
        "chars": [pair[0] for pair in N.parse_vocab_section(sections["chars"])],
    }
    model = TaggerParserModel(inventories, dims)
    for name, tensor in _model_tensors(model).items():
        tensor.data = tensors[name].data
    model.embeddings = embeddings_table
    return model
