"""Scorers and throughput measurement.

Attachment and tagging scores compare a prediction document against gold
token by token (pretokenized evaluation: sentence and token counts must
line up; raw-text alignment of mismatched tokenizations is out of scope).
Entity scores use exact span+type matching, micro-averaged overall.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

from .conllu import feats_set
from .errors import EmptyCorpus, SentenceCountMismatch, TokenCountMismatch

UD_METRIC_ORDER = ("upos", "ufeats", "lemma", "uas", "las")


@dataclass(frozen=True)
class UdScores:
    upos: float
    ufeats: float
    lemma: float
    uas: float
    las: float
    token_count: int

    def as_dict(self):
        return {
            "upos": self.upos, "ufeats": self.ufeats, "lemma": self.lemma,
            "uas": self.uas, "las": self.las,
        }


def ud_scores(gold, pred):
    """Token-level accuracy of UPOS, FEATS (set equality), lemma, head, and
    labeled head. las <= uas holds by construction."""
    if len(gold.sentences) != len(pred.sentences):
        raise SentenceCountMismatch(
            f"gold has {len(gold.sentences)} sentences, prediction {len(pred.sentences)}"
        )
    counts = {"upos": 0, "ufeats": 0, "lemma": 0, "uas": 0, "las": 0}
    total = 0
    for s_no, (gs, ps) in enumerate(zip(gold.sentences, pred.sentences), start=1):
        gw, pw = gs.words(), ps.words()
        if len(gw) != len(pw):
            raise TokenCountMismatch(s_no, len(gw), len(pw))
        for g, p in zip(gw, pw):
            total += 1
            counts["upos"] += g.upos == p.upos
            counts["ufeats"] += feats_set(g.feats) == feats_set(p.feats)
            counts["lemma"] += g.lemma == p.lemma
            head_ok = g.head == p.head
            counts["uas"] += head_ok
            counts["las"] += head_ok and g.deprel == p.deprel
    if total == 0:
        raise EmptyCorpus("no tokens to score")
    return UdScores(
        upos=counts["upos"] / total,
        ufeats=counts["ufeats"] / total,
        lemma=counts["lemma"] / total,
        uas=counts["uas"] / total,
        las=counts["las"] / total,
        token_count=total,
    )


@dataclass(frozen=True)
class NerScores:
    precision: float
    recall: float
    f1: float
    per_type: dict

    def as_dict(self):
        out = {"precision": self.precision, "recall": self.recall, "f1": self.f1}
        for etype in sorted(self.per_type):
            p, r, f = self.per_type[etype]
            out[f"{etype}.precision"] = p
            out[f"{etype}.recall"] = r
            out[f"{etype}.f1"] = f
        return out


def _prf(matches, n_pred, n_gold):
    precision = matches / n_pred if n_pred else 0.0
    recall = matches / n_gold if n_gold else 0.0
    f1 = 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)
    return precision, recall, f1


def ner_f1(gold, pred):
    """Exact span+type match; ``gold`` and ``pred`` are per-sentence span lists."""
    if len(gold) != len(pred):
        raise SentenceCountMismatch(
            f"gold has {len(gold)} sentences, prediction {len(pred)}"
        )
    gold_set = {(i, s) for i, spans in enumerate(gold) for s in spans}
    pred_set = {(i, s) for i, spans in enumerate(pred) for s in spans}
    matches = len(gold_set & pred_set)
    precision, recall, f1 = _prf(matches, len(pred_set), len(gold_set))
    per_type = {}
    types = {s.type for _, s in gold_set | pred_set}
    for etype in sorted(types):
        g = {x for x in gold_set if x[1].type == etype}
        p = {x for x in pred_set if x[1].type == etype}
        per_type[etype] = _prf(len(g & p), len(p), len(g))
    return NerScores(precision, recall, f1, per_type)


def count_output_tokens(result):
    """Tokens in a pipeline result's token graph."""
    graph = result.get("token-graph")
    return len(graph.token_ids())


def measure_speed(pipeline, corpus, token_counter=count_output_tokens):
    """Tokens per second over the corpus, after one untimed warm-up document."""
    if not corpus:
        raise EmptyCorpus("nothing to measure")
    pipeline.run(corpus[0])
    tokens = 0
    started = time.perf_counter()
    for document in corpus:
        result = pipeline.run(document)
        tokens += token_counter(result)
    elapsed = time.perf_counter() - started
    return tokens / max(elapsed, 1e-9)
