"""Command-line entry point.

Exit codes: 0 on success, 1 on usage errors, 2 on data or model errors.
Logs go to standard error; analysis data goes to files or standard output.
The model directory layout is one subdirectory per language code holding
segmenter.dlma, parser.dlma, lemmatizer.dlma, ner.dlma, embeddings.dlq8,
and ner-rules.txt (with its gazetteer files alongside).
"""

from __future__ import annotations

import argparse
import os
import sys
from importlib import resources as importlib_resources
from pathlib import Path

from .errors import DeplimaError

BUILTIN_PIPELINES = (
    "deepud", "deepud-pretok",
    "ner-rules", "ner-rules-pretok",
    "ner-deep", "ner-deep-pretok",
)


class UsageError(Exception):
    pass


class Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _log(*parts):
    print(*parts, file=sys.stderr)


def build_arg_parser():
    parser = Parser(prog="deplima", description=__doc__,
                    formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", metavar="<command>")

    def model_dir_arg(p):
        p.add_argument("--model-dir", default=os.environ.get("DEPLIMA_MODEL_DIR", "models"),
                       help="model root (default: $DEPLIMA_MODEL_DIR or ./models)")

    p = sub.add_parser("analyze", help="run a pipeline over a document or directory")
    p.add_argument("--pipeline", required=True,
                   help=f"one of {', '.join(BUILTIN_PIPELINES)}, or any name with --config")
    p.add_argument("--lang", required=True, help="language code (model subdirectory)")
    p.add_argument("--input", required=True, help="input file or directory, '-' for stdin")
    p.add_argument("--output", required=True, help="output file or directory, '-' for stdout")
    p.add_argument("--config", help="pipeline configuration file overriding the built-ins")
    p.add_argument("--jobs", type=int, default=1, help="parallel documents (directory input)")
    model_dir_arg(p)

    p = sub.add_parser("train-seg", help="train the token/sentence segmenter")
    p.add_argument("--train", required=True, help="CoNLL-U file with '# text =' comments")
    p.add_argument("--dev", help="held-out CoNLL-U file for model selection")
    p.add_argument("--model-out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epochs", type=int, default=12)
    p.add_argument("--hidden", type=int, default=32)
    p.add_argument("--lr", type=float, default=1e-2)

    p = sub.add_parser("train-parser", help="train the joint tagger and parser")
    p.add_argument("--train", required=True, help="gold CoNLL-U treebank")
    p.add_argument("--dev", help="held-out CoNLL-U file (dev LAS per epoch)")
    p.add_argument("--embeddings", required=True, help="word-vector file (.vec text or .dlq8)")
    p.add_argument("--model-out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--lr", type=float, default=2e-3)
    p.add_argument("--hidden1", type=int, default=64)
    p.add_argument("--hidden2", type=int, default=64)
    p.add_argument("--arc-dim", type=int, default=64)
    p.add_argument("--label-dim", type=int, default=32)

    p = sub.add_parser("train-lemma", help="train the lemmatizer")
    p.add_argument("--train", required=True, help="gold CoNLL-U treebank with lemmas")
    p.add_argument("--model-out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epochs", type=int, default=60)
    p.add_argument("--lr", type=float, default=5e-3)

    p = sub.add_parser("train-ner", help="train the neural entity recognizer")
    p.add_argument("--train", required=True, help="BIO corpus (token TAB tag)")
    p.add_argument("--embeddings", required=True)
    p.add_argument("--model-out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epochs", type=int, default=20)
    p.add_argument("--lr", type=float, default=3e-3)

    p = sub.add_parser("eval-ud", help="score a prediction against gold CoNLL-U")
    p.add_argument("--gold", required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--report-dir", help="also write scores.tsv and scores.png here")

    p = sub.add_parser("eval-ner", help="score BIO predictions against gold BIO")
    p.add_argument("--gold", required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--report-dir", help="also write scores.tsv and scores.png here")

    p = sub.add_parser("quantize", help="product-quantize a word-vector table")
    p.add_argument("--input", required=True, help="text table: 'rows dim' header")
    p.add_argument("--output", required=True, help="output .dlq8 store")
    p.add_argument("--m", type=int, help="subquantizer count (default dim/2)")
    p.add_argument("--buckets", type=int, default=4096, help="n-gram bucket count")
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("bootstrap", help="apply rules to raw text, write a BIO file to correct")
    p.add_argument("--rules", required=True, help="rule file (gazetteers alongside)")
    p.add_argument("--input", required=True, help="raw UTF-8 text file")
    p.add_argument("--output", required=True, help="BIO file for manual correction")
    p.add_argument("--lang", required=True)
    model_dir_arg(p)

    return parser


def builtin_config_text(name):
    ref = importlib_resources.files("deplima").joinpath(f"data/pipelines/{name}.conf")
    if not ref.is_file():
        return None
    return ref.read_text(encoding="utf-8")


def load_pipeline(name, lang, model_dir, config_path=None):
    from .pipeline import build_pipeline, parse_pipeline_config
    from .units import default_registry, default_resources

    if config_path:
        text = Path(config_path).read_text(encoding="utf-8")
    else:
        text = builtin_config_text(name)
        if text is None:
            raise UsageError(
                f"unknown pipeline {name!r}; built-ins: {', '.join(BUILTIN_PIPELINES)}"
            )
    config = parse_pipeline_config(text, {"lang": lang, "model_dir": model_dir})
    return build_pipeline(config, default_registry(), default_resources())


def _required_primordials(pipeline):
    from .pipeline import PRIMORDIAL_LAYERS

    produced = set()
    needed = set()
    for unit in pipeline.units:
        for spec in unit.inputs:
            if spec.name in PRIMORDIAL_LAYERS and spec.name not in produced:
                needed.add(spec.name)
        produced.update(spec.name for spec in unit.outputs)
    return sorted(needed) or ["raw-text"]


def _read_input(path):
    if path == "-":
        return sys.stdin.read()
    return Path(path).read_text(encoding="utf-8")


def _write_output(path, text):
    if path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def _analysis_output(result):
    for layer in ("conllu-output", "bio-output"):
        if result.has(layer):
            return result.get(layer)
    raise DeplimaError("pipeline produced no output layer")


def cmd_analyze(args):
    from .pipeline import AnalysisData, run_many

    pipeline = load_pipeline(args.pipeline, args.lang, args.model_dir, args.config)
    primordials = _required_primordials(pipeline)
    in_path = Path(args.input) if args.input != "-" else None
    if in_path is not None and in_path.is_dir():
        out_dir = Path(args.output)
        out_dir.mkdir(parents=True, exist_ok=True)
        files = sorted(p for p in in_path.iterdir() if p.is_file())
        datas = [
            AnalysisData({name: f.read_text(encoding="utf-8") for name in primordials})
            for f in files
        ]
        results = run_many(pipeline, datas, jobs=max(1, args.jobs))
        for f, result in zip(files, results):
            (out_dir / f.name).write_text(_analysis_output(result), encoding="utf-8")
        _log(f"analyzed {len(files)} documents -> {out_dir}")
        return 0
    text = _read_input(args.input)
    result = pipeline.run(AnalysisData({name: text for name in primordials}))
    _write_output(args.output, _analysis_output(result))
    return 0


def _write_training_outputs(model_out, log_rows, what):
    from . import report

    log_path = str(model_out) + ".log"
    fig_path = str(model_out) + ".png"
    report.write_training_log(log_path, log_rows)
    report.save_training_figure(fig_path, log_rows, what)
    _log(f"wrote {model_out}, {log_path}, {fig_path}")


def cmd_train_seg(args):
    from .conllu import parse_conllu
    from .segmenter import save_segmenter, train_segmenter

    gold = parse_conllu(Path(args.train).read_text(encoding="utf-8"))
    dev = parse_conllu(Path(args.dev).read_text(encoding="utf-8")) if args.dev else None
    hyper = {"epochs": args.epochs, "hidden": args.hidden, "lr": args.lr}
    model = train_segmenter(gold, hyper=hyper, seed=args.seed, dev=dev)
    save_segmenter(args.model_out, model)
    _write_training_outputs(args.model_out, model.training_log, "segmenter training")
    return 0


def cmd_train_parser(args):
    from .conllu import parse_conllu
    from .embeddings import load_table
    from .parser import save_parser, train_joint

    gold = parse_conllu(Path(args.train).read_text(encoding="utf-8"))
    dev = parse_conllu(Path(args.dev).read_text(encoding="utf-8")) if args.dev else None
    table = load_table(args.embeddings)
    hyper = {
        "epochs": args.epochs, "lr": args.lr,
        "hidden1": args.hidden1, "hidden2": args.hidden2,
        "arc_dim": args.arc_dim, "label_dim": args.label_dim,
    }
    model = train_joint(gold, table, hyper=hyper, seed=args.seed, dev=dev)
    save_parser(args.model_out, model)
    _write_training_outputs(args.model_out, model.training_log, "tagger-parser training")
    return 0


def cmd_train_lemma(args):
    from .conllu import parse_conllu
    from .lemmatizer import save_lemmatizer, train_lemmatizer

    gold = parse_conllu(Path(args.train).read_text(encoding="utf-8"))
    triples = []
    seen = set()
    for sentence in gold.sentences:
        for token in sentence.words():
            item = (token.form, token.upos, token.feats, token.lemma)
            if item not in seen and token.lemma != "_":
                seen.add(item)
                triples.append(item)
    model = train_lemmatizer(triples, hyper={"epochs": args.epochs, "lr": args.lr},
                             seed=args.seed)
    save_lemmatizer(args.model_out, model)
    _write_training_outputs(args.model_out, model.training_log, "lemmatizer training")
    return 0


def cmd_train_ner(args):
    from .embeddings import load_table
    from .ner import parse_bio, save_ner, train_ner

    corpus = parse_bio(Path(args.train).read_text(encoding="utf-8"))
    table = load_table(args.embeddings)
    model = train_ner(corpus, table, hyper={"epochs": args.epochs, "lr": args.lr},
                      seed=args.seed)
    save_ner(args.model_out, model)
    _write_training_outputs(args.model_out, model.training_log, "entity recognizer training")
    return 0


def _emit_scores(scores, order, title, report_dir):
    from . import report

    sys.stdout.write(report.format_score_table(scores, order))
    sys.stdout.write(report.format_score_line(scores, order))
    if report_dir:
        out = Path(report_dir)
        out.mkdir(parents=True, exist_ok=True)
        report.write_scores_tsv(out / "scores.tsv", scores, order)
        report.save_score_figure(out / "scores.png", scores, title, order)
        _log(f"wrote {out / 'scores.tsv'} and {out / 'scores.png'}")


def cmd_eval_ud(args):
    from .conllu import parse_conllu
    from .evaluate import UD_METRIC_ORDER, ud_scores

    gold = parse_conllu(Path(args.gold).read_text(encoding="utf-8"))
    pred = parse_conllu(Path(args.pred).read_text(encoding="utf-8"))
    scores = ud_scores(gold, pred)
    _emit_scores(scores.as_dict(), UD_METRIC_ORDER, "attachment and tagging scores",
                 args.report_dir)
    return 0


def cmd_eval_ner(args):
    from .evaluate import ner_f1
    from .ner import bio_decode, parse_bio

    gold = [bio_decode(tags) for _, tags in parse_bio(Path(args.gold).read_text(encoding="utf-8"))]
    pred = [bio_decode(tags) for _, tags in parse_bio(Path(args.pred).read_text(encoding="utf-8"))]
    scores = ner_f1(gold, pred)
    ordered = scores.as_dict()
    _emit_scores(ordered, list(ordered), "entity recognition scores", args.report_dir)
    return 0


def cmd_quantize(args):
    from .embeddings import quantize, read_text_table, save_quantized

    table = read_text_table(args.input, n_buckets=args.buckets)
    m = args.m if args.m else table.dim // 2
    qtable = quantize(table, m, seed=args.seed)
    save_quantized(args.output, qtable)
    ratio = qtable.source_storage_bytes() / qtable.code_storage_bytes()
    _log(f"quantized {len(table.words)} words + {table.bucket_count} buckets, "
         f"dim {table.dim}, m={m}: code storage ratio {ratio:.1f}x")
    return 0


def cmd_bootstrap(args):
    from .ner import apply_rules, bio_encode, load_rules, write_bio
    from .segmenter import load_segmenter, segment

    rules = load_rules(args.rules)
    seg_model = load_segmenter(Path(args.model_dir) / args.lang / "segmenter.dlma")
    text = _read_input(args.input)
    tokens, breaks = segment(seg_model, text)
    sentences = []
    start = 0
    for boundary in sorted(set(breaks) | {len(tokens) - 1} if tokens else set()):
        surfaces = [t[0] for t in tokens[start:boundary + 1]]
        if surfaces:
            spans = apply_rules(rules, surfaces)
            sentences.append((surfaces, bio_encode(spans, len(surfaces))))
        start = boundary + 1
    _write_output(args.output, write_bio(sentences) if sentences else "")
    _log(f"bootstrap: {len(sentences)} sentences written for manual correction")
    return 0


COMMANDS = {
    "analyze": cmd_analyze,
    "train-seg": cmd_train_seg,
    "train-parser": cmd_train_parser,
    "train-lemma": cmd_train_lemma,
    "train-ner": cmd_train_ner,
    "eval-ud": cmd_eval_ud,
    "eval-ner": cmd_eval_ner,
    "quantize": cmd_quantize,
    "bootstrap": cmd_bootstrap,
}


def dispatch(argv):
    """Parse arguments and run one subcommand; returns the exit code."""
    parser = build_arg_parser()
    try:
        args = parser.parse_args(argv)
        if not args.command:
            raise UsageError("a subcommand is required")
        return COMMANDS[args.command](args)
    except UsageError as exc:
        _log(f"usage error: {exc}")
        parser.print_usage(sys.stderr)
        return 1
    except DeplimaError as exc:
        _log(f"error: {exc}")
        return 2
    except OSError as exc:
        _log(f"error: {exc}")
        return 2


def main():
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
