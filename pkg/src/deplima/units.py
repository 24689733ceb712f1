"""Built-in processing units and the default unit/resource registries.

Layers used by the shipped pipelines:

    raw-text      bytes     primordial: one document as UTF-8 text
    conllu-input  bytes     primordial: pretokenized document, CoNLL-U text
    token-graph   graph     token chain with annotations and dependencies
    conllu-doc    document  parsed input document (pretokenized path)
    entities      table     per-sentence lists of entity spans
    conllu-output bytes     serialized analysis
    bio-output    bytes     token TAB tag lines, blank line per sentence

Token nodes carry "sent" (sentence index), "upos", "lemma", and
"feat:<Category>" annotations; the dependency edge set carries heads and
relation labels, with the virtual start node standing in for the root.
"""

from __future__ import annotations

from . import embeddings as emb
from . import lemmatizer as lem
from . import ner as ner_mod
from . import parser as par
from . import segmenter as seg
from .conllu import (
    ConlluDocument,
    ConlluToken,
    Sentence,
    format_feats,
    parse_conllu,
    write_conllu,
)
from .graph import build_linear_graph
from .pipeline import LayerSpec, ProcessingUnit, ResourceRegistry, UnitRegistry

GRAPH = "graph"
DOC = "document"
TABLE = "table"
BYTES = "bytes"


def indexed_sentence_groups(graph):
    """sentence-index -> token nodes (chain order); empty sentences absent."""
    groups = {}
    for node_id in graph.token_ids():
        node = graph.nodes[node_id]
        index = int(node.annotations.get("sent", "0"))
        groups.setdefault(index, []).append(node)
    return dict(sorted(groups.items()))


def sentence_groups(graph):
    """Token nodes grouped by their "sent" annotation, in chain order."""
    return list(indexed_sentence_groups(graph).values())


class SegmenterUnit(ProcessingUnit):
    name = "ud-segmenter"
    inputs = (LayerSpec("raw-text", BYTES),)
    outputs = (LayerSpec("token-graph", GRAPH),)
    required_resources = ("segmenter",)

    def run(self, layers):
        text = layers["raw-text"]
        model = self.resource("segmenter")
        tokens, breaks = seg.segment(model, text)
        graph = build_linear_graph(tokens)
        sent = 0
        break_set = set(breaks)
        for position, node_id in enumerate(graph.token_ids()):
            graph.nodes[node_id].annotations["sent"] = str(sent)
            if position in break_set:
                sent += 1
        return {"token-graph": graph}


class ConlluReaderUnit(ProcessingUnit):
    name = "ud-reader"
    inputs = (LayerSpec("conllu-input", BYTES),)
    outputs = (LayerSpec("token-graph", GRAPH), LayerSpec("conllu-doc", DOC))

    def run(self, layers):
        doc = parse_conllu(layers["conllu-input"])
        triples = []
        cursor = 0
        sent_of = []
        for s_index, sentence in enumerate(doc.sentences):
            for token in sentence.words():
                start = cursor
                end = start + len(token.form)
                triples.append((token.form, start, end))
                sent_of.append(s_index)
                cursor = end + 1
        graph = build_linear_graph(triples)
        for node_id, s_index in zip(graph.token_ids(), sent_of):
            graph.nodes[node_id].annotations["sent"] = str(s_index)
        return {"token-graph": graph, "conllu-doc": doc}


class TaggerParserUnit(ProcessingUnit):
    name = "ud-tagger-parser"
    inputs = (LayerSpec("token-graph", GRAPH),)
    outputs = (LayerSpec("token-graph", GRAPH),)
    required_resources = ("parser", "embeddings")

    def run(self, layers):
        graph = layers["token-graph"]
        model = self.resource("parser")
        for nodes in sentence_groups(graph):
            pred = par.predict_sentence(model, [n.surface for n in nodes])
            for i, node in enumerate(nodes):
                node.annotations["upos"] = pred["upos"][i]
                for category, value in pred["feats"][i].items():
                    node.annotations[f"feat:{category}"] = value
                head = pred["heads"][i]
                head_id = graph.start if head == 0 else nodes[head - 1].id
                graph.add_dependency(head_id, node.id, pred["deprels"][i])
        return {"token-graph": graph}


def node_feats(node):
    bundle = {
        key[len("feat:"):]: value
        for key, value in node.annotations.items()
        if key.startswith("feat:")
    }
    return format_feats(bundle)


class LemmatizerUnit(ProcessingUnit):
    name = "ud-lemmatizer"
    inputs = (LayerSpec("token-graph", GRAPH),)
    outputs = (LayerSpec("token-graph", GRAPH),)
    required_resources = ("lemmatizer",)

    def run(self, layers):
        graph = layers["token-graph"]
        model = self.resource("lemmatizer")
        for node_id in graph.token_ids():
            node = graph.nodes[node_id]
            key = lem.LemmaKey.make(
                node.surface, node.annotations.get("upos", "_"), node_feats(node)
            )
            node.annotations["lemma"] = lem.lemmatize(model, key)
        return {"token-graph": graph}


def _graph_predictions(graph):
    """sentence-index -> CoNLL-U column updates from node annotations."""
    head_of = {}
    rel_of = {}
    for head_id, dep_id, rel in graph.dependency_edges:
        head_of[dep_id] = head_id
        rel_of[dep_id] = rel
    predictions = {}
    for index, nodes in indexed_sentence_groups(graph).items():
        position = {node.id: i + 1 for i, node in enumerate(nodes)}
        rows = []
        for node in nodes:
            head_id = head_of.get(node.id)
            if head_id is None:
                head, deprel = "_", "_"
            else:
                head = str(position.get(head_id, 0))
                deprel = rel_of[node.id]
            rows.append({
                "lemma": node.annotations.get("lemma", "_"),
                "upos": node.annotations.get("upos", "_"),
                "feats": node_feats(node),
                "head": head,
                "deprel": deprel,
            })
        predictions[index] = rows
    return predictions


class ConlluWriterUnit(ProcessingUnit):
    """Build a fresh document from the graph (raw-text pipelines)."""

    name = "conllu-writer"
    inputs = (LayerSpec("token-graph", GRAPH), LayerSpec("raw-text", BYTES))
    outputs = (LayerSpec("conllu-output", BYTES),)

    def run(self, layers):
        graph = layers["token-graph"]
        text = layers["raw-text"]
        groups = sentence_groups(graph)
        if not groups:
            return {"conllu-output": ""}
        predictions = list(_graph_predictions(graph).values())
        ordered_ids = graph.token_ids()
        next_start = {
            ordered_ids[i]: graph.nodes[ordered_ids[i + 1]].char_start
            for i in range(len(ordered_ids) - 1)
        }
        doc = ConlluDocument()
        for nodes, rows in zip(groups, predictions):
            sentence_text = text[nodes[0].char_start:nodes[-1].char_end]
            tokens = []
            for i, (node, row) in enumerate(zip(nodes, rows)):
                misc = "_"
                if next_start.get(node.id) == node.char_end:
                    misc = "SpaceAfter=No"
                tokens.append(ConlluToken(
                    id=str(i + 1), form=node.surface, lemma=row["lemma"],
                    upos=row["upos"], feats=row["feats"], head=row["head"],
                    deprel=row["deprel"], misc=misc,
                ))
            doc.sentences.append(Sentence([f"# text = {sentence_text}"], tokens))
        return {"conllu-output": write_conllu(doc)}


class ConlluMergeWriterUnit(ProcessingUnit):
    """Write analysis back into the pretokenized input document."""

    name = "conllu-merge-writer"
    inputs = (LayerSpec("token-graph", GRAPH), LayerSpec("conllu-doc", DOC))
    outputs = (LayerSpec("conllu-output", BYTES),)

    def run(self, layers):
        from .conllu import with_predictions

        doc = layers["conllu-doc"]
        by_index = _graph_predictions(layers["token-graph"])
        # align to the document so comment-only sentences stay untouched
        per_sentence = [by_index.get(i, []) for i in range(len(doc.sentences))]
        merged = with_predictions(doc, per_sentence)
        return {"conllu-output": write_conllu(merged)}


class RuleNerUnit(ProcessingUnit):
    name = "ner-rules"
    inputs = (LayerSpec("token-graph", GRAPH),)
    outputs = (LayerSpec("entities", TABLE),)
    required_resources = ("rules",)

    def run(self, layers):
        rules = self.resource("rules")
        return {"entities": [
            ner_mod.apply_rules(rules, [n.surface for n in nodes])
            for nodes in sentence_groups(layers["token-graph"])
        ]}


class NeuralNerUnit(ProcessingUnit):
    name = "ner-deep"
    inputs = (LayerSpec("token-graph", GRAPH),)
    outputs = (LayerSpec("entities", TABLE),)
    required_resources = ("ner", "embeddings")

    def run(self, layers):
        model = self.resource("ner")
        return {"entities": [
            ner_mod.neural_ner(model, [n.surface for n in nodes])
            for nodes in sentence_groups(layers["token-graph"])
        ]}


class BioWriterUnit(ProcessingUnit):
    name = "bio-writer"
    inputs = (LayerSpec("token-graph", GRAPH), LayerSpec("entities", TABLE))
    outputs = (LayerSpec("bio-output", BYTES),)

    def run(self, layers):
        groups = sentence_groups(layers["token-graph"])
        spans_per_sentence = layers["entities"]
        if not groups:
            return {"bio-output": ""}
        sentences = []
        for nodes, spans in zip(groups, spans_per_sentence):
            tags = ner_mod.bio_encode(spans, len(nodes))
            sentences.append(([n.surface for n in nodes], tags))
        return {"bio-output": ner_mod.write_bio(sentences)}


BUILTIN_UNITS = (
    SegmenterUnit,
    ConlluReaderUnit,
    TaggerParserUnit,
    LemmatizerUnit,
    ConlluWriterUnit,
    ConlluMergeWriterUnit,
    RuleNerUnit,
    NeuralNerUnit,
    BioWriterUnit,
)


def default_registry():
    registry = UnitRegistry()
    for unit_class in BUILTIN_UNITS:
        registry.register(unit_class.name, unit_class)
    return registry


def _load_parser_resource(path, language, registry):
    return par.load_parser(path, registry.get(language, "embeddings"))


def _load_ner_resource(path, language, registry):
    return ner_mod.load_ner(path, registry.get(language, "embeddings"))


RESOURCE_LOADERS = {
    "segmenter": lambda path, language, registry: seg.load_segmenter(path),
    "parser": _load_parser_resource,
    "lemmatizer": lambda path, language, registry: lem.load_lemmatizer(path),
    "ner": _load_ner_resource,
    "embeddings": lambda path, language, registry: emb.load_table(path),
    "rules": lambda path, language, registry: ner_mod.load_rules(path),
}


def default_resources():
    return ResourceRegistry(RESOURCE_LOADERS)
