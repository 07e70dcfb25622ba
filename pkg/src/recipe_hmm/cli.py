"""Command-line interface: ``recipe-hmm <command> ...``.

Exit codes: 0 success, 2 bad options, 3 corpus/model parse error,
4 I/O error, 5 decoding failure.  Every command writes ``run_config.txt``
beside its outputs.
"""

from __future__ import annotations

import argparse
import csv
import io
import sys
from pathlib import Path

from . import evaluation as ev
from .corpus import CorpusParseError, corpus_stats, read_corpus
from .decoder import DecodeError, DecodeRequest, OOVError, decode
from .model_io import ModelFormatError, read_model, write_model
from .pipeline import PipelineConfig, PipelineModel, extract_ingredients, train_pipeline
from .synthetic import SHIPPED_CORPUS, shipped_corpus_path, synthetic_corpus_text
from .tables import (FeatureConditionedModel, estimate_feature_conditioned, estimate_first_order,
                     estimate_second_order)

EXIT_OK, EXIT_CONFIG, EXIT_PARSE, EXIT_IO, EXIT_DECODE = 0, 2, 3, 4, 5


class ConfigError(Exception):
    pass


def _corpus(path, args):
    if path == SHIPPED_CORPUS:
        path = shipped_corpus_path()
    return read_corpus(path, strict=not args.lenient)


def _config(args):
    return PipelineConfig(
        lambda_=args.lambda_, space=args.space, oov_policy=args.oov_policy,
        lambda_on_oov=args.lambda_on_oov, layer1_order=args.layer1_order,
        smoothing=args.smoothing, fallback=not args.no_fallback,
        tag_source=getattr(args, "tag_source", None) or "predicted")


def _write_run_config(directory, args):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    items = sorted((k, v) for k, v in vars(args).items() if k != "func")
    text = "".join(f"{k}={v}\n" for k, v in items)
    (directory / "run_config.txt").write_text(text, encoding="utf-8")


def _out_dir(args):
    d = Path(args.out_dir)
    d.mkdir(parents=True, exist_ok=True)
    return d


def read_token_file(path):
    """Sentences of ``(line number, columns)`` rows from a token-per-line file."""
    sentences, rows = [], []
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if raw.startswith("#"):
            continue
        if not raw.strip():
            if rows:
                sentences.append(rows)
                rows = []
            continue
        rows.append((lineno, raw.split("\t")))
    if rows:
        sentences.append(rows)
    if not sentences:
        raise CorpusParseError("no sentences")
    return sentences


def _oracle_tags(choice, sentences):
    """Tags for ``--tags oracle`` (second input column) or ``oracle:<path>``."""
    if choice == "oracle":
        if any(len(cols) < 2 for s in sentences for _, cols in s):
            raise ConfigError("--tags oracle needs a POS column in the input file")
        return [tuple(cols[1] for _, cols in s) for s in sentences]
    path = choice.split(":", 1)[1]
    tag_sents = read_token_file(path)
    tags = [tuple(cols[1] if len(cols) > 1 else cols[0] for _, cols in s) for s in tag_sents]
    if [len(t) for t in tags] != [len(s) for s in sentences]:
        raise ConfigError(f"oracle tag file {path} does not align with the input sentences")
    return tags


def _parse_tag_choice(choice):
    if choice != "predict" and choice != "oracle" and not choice.startswith("oracle:"):
        raise ConfigError(f"--tags must be 'predict', 'oracle' or 'oracle:<path>', got {choice!r}")
    return choice


def _raise_oov(err, rows):
    lineno = rows[err.position][0]
    raise DecodeError(f"out-of-vocabulary token {err.token!r} at line {lineno}") from err


# -- commands ---------------------------------------------------------------


def cmd_train(args):
    corpus = _corpus(args.corpus, args)
    cfg = _config(args)
    if args.family == "pipeline":
        model = train_pipeline(corpus, cfg)
    elif args.family == "feature":
        model = estimate_feature_conditioned(corpus, smoothing=args.smoothing)
    else:
        estimate = estimate_first_order if args.family == "first" else estimate_second_order
        model = estimate(corpus, args.obs_field, args.state_field, smoothing=args.smoothing)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_model(model, out)
    _write_run_config(out.parent, args)
    layers = [("layer1", model.layer1), ("layer2", model.layer2)] \
        if isinstance(model, PipelineModel) else [("model", model)]
    for name, m in layers:
        k = f" K={m.n_tags}" if isinstance(m, FeatureConditionedModel) else ""
        print(f"{name}: family={m.family} N={m.n_states}{k} M={m.n_words} "
              f"P={len(m.lexicon.prefixes)} zero_rows={m.zero_rows()}")
    print(f"wrote {out}")


def cmd_tag(args):
    model = read_model(args.model)
    sentences = read_token_file(args.input)
    tag_choice = _parse_tag_choice(args.tags)
    cfg = _config(args)
    if isinstance(model, PipelineModel):
        model = model.layer1
    need_tags = isinstance(model, FeatureConditionedModel)
    if need_tags and tag_choice == "predict":
        raise ConfigError("a feature-conditioned model needs --tags oracle or oracle:<path>")
    tags = _oracle_tags(tag_choice, sentences) if need_tags else [None] * len(sentences)
    col = 1 if getattr(model, "obs_field", "token") == "pos_label" else 0
    lines = []
    for rows, t in zip(sentences, tags):
        obs = tuple(cols[col] if len(cols) > col else "" for _, cols in rows)
        req = DecodeRequest(obs, t, lambda_=args.lambda_, space=args.space,
                            oov_policy=args.oov_policy, lambda_on_oov=args.lambda_on_oov,
                            fallback=not args.no_fallback)
        try:
            res = decode(model, req)
        except OOVError as err:
            _raise_oov(err, rows)
        lines += ["\t".join(cols + [state]) for (_, cols), state in zip(rows, res.states)]
        lines.append("")
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text("\n".join(lines), encoding="utf-8")
    _write_run_config(out.parent, args)
    print(f"tagged {len(sentences)} sentences -> {out}")


def cmd_extract(args):
    pipeline = read_model(args.model)
    if not isinstance(pipeline, PipelineModel):
        raise ConfigError("extract needs a model trained with --family pipeline")
    sentences = read_token_file(args.input)
    tag_choice = _parse_tag_choice(args.tags)
    cfg = _config(args)
    tags = _oracle_tags(tag_choice, sentences) if tag_choice != "predict" else None
    tagged, span_rows = [], []
    n_oov = 0
    for i, rows in enumerate(sentences):
        tokens = tuple(cols[0] for _, cols in rows)
        try:
            ex = extract_ingredients(pipeline, tokens, tags=tags[i] if tags else None,
                                     tag_source="oracle" if tags else "predicted", config=cfg)
        except OOVError as err:
            _raise_oov(err, rows)
        n_oov += sum(ex.diagnostics["oov_mask"])
        for (_, cols), tag, state in zip(rows, ex.tags, ex.states):
            gold = (cols + ["_", "_"])[1:3]
            tagged.append("\t".join([cols[0], *gold, tag, state]))
        tagged.append("")
        for span in ex.spans:
            span_rows.append([i, span.start, span.end, span.text, "|".join(span.flags)])
    out = _out_dir(args)
    (out / "tagged.tsv").write_text("\n".join(tagged), encoding="utf-8")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["sentence", "start", "end", "text", "flags"])
    w.writerows(span_rows)
    (out / "spans.csv").write_text(buf.getvalue(), encoding="utf-8")
    _write_run_config(out, args)
    print(f"{len(sentences)} sentences, {len(span_rows)} ingredient spans, {n_oov} unknown tokens")


def _fmt(x):
    return "n/a" if x is None else f"{100 * x:.2f}%"


def cmd_eval(args):
    corpus = _corpus(args.corpus, args)
    cfg = _config(args)
    systems = args.systems.split(",")
    results = []
    for system in systems:
        if system not in ev.SYSTEMS:
            raise ConfigError(f"unknown system {system!r}; choose from {', '.join(ev.SYSTEMS)}")
        results.append((system, ev.closed_test(corpus, system, cfg)))
    out = _out_dir(args)
    (out / "closed_test.csv").write_text(ev.closed_test_csv(results), encoding="utf-8")
    _write_run_config(out, args)
    for system, r in results:
        print(f"{system:<14} accuracy {_fmt(r.token_accuracy)}  F1 {_fmt(r.macro_f1)}")


def cmd_crossval(args):
    corpus = _corpus(args.corpus, args)
    if args.system not in ev.SYSTEMS:
        raise ConfigError(f"unknown system {args.system!r}; choose from {', '.join(ev.SYSTEMS)}")
    report = ev.cross_validate(corpus, args.folds, args.seed, args.system, _config(args))
    out = _out_dir(args)
    (out / "crossval.csv").write_text(ev.crossval_csv(report), encoding="utf-8")
    _write_run_config(out, args)
    a = report.average
    print(f"{args.system}, {args.folds} folds: accuracy {_fmt(a['token_accuracy'])}, "
          f"F1 {_fmt(a['macro_f1'])}, unknown {_fmt(a['unknown_accuracy'])}, "
          f"known {_fmt(a['known_accuracy'])}, OOV rate {_fmt(a['oov_rate'])}")


def parse_lambdas(choice):
    """``1..9`` (inclusive integer range) or a comma-separated list."""
    if ".." in choice:
        lo, hi = choice.split("..", 1)
        return tuple(float(x) for x in range(int(lo), int(hi) + 1))
    return tuple(float(x) for x in choice.split(","))


def cmd_sweep(args):
    corpus = _corpus(args.corpus, args)
    try:
        lambdas = parse_lambdas(args.lambdas)
        conditions = [ev.parse_condition(c) for c in args.conditions.split(",")]
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    curve = ev.lambda_sweep(corpus, lambdas, conditions, args.seed, _config(args))
    out = _out_dir(args)
    (out / "sweep.csv").write_text(ev.sweep_csv(curve), encoding="utf-8")
    _write_run_config(out, args)
    for cond in curve.conditions():
        accs = curve.accuracy(cond)
        best = max(range(len(accs)), key=lambda i: accs[i])
        print(f"{cond:<16} layer-1 accuracy {_fmt(curve.first_layer_accuracy[cond])}, "
              f"best lambda {curve.lambdas[best]:g} ({_fmt(accs[best])})")


def cmd_stats(args):
    corpus = _corpus(args.corpus, args)
    reference = _corpus(args.against, args) if args.against else None
    stats = corpus_stats(corpus, reference)
    rows = []
    for key, value in stats.items():
        if isinstance(value, dict):
            rows += [(f"{key}.{k}", v) for k, v in value.items()]
        else:
            rows.append((key, f"{value:.4f}" if isinstance(value, float) else value))
    for key, value in rows:
        print(f"{key}: {value}")
    if args.out_dir:
        out = _out_dir(args)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["statistic", "value"])
        w.writerows(rows)
        (out / "stats.csv").write_text(buf.getvalue(), encoding="utf-8")
        _write_run_config(out, args)


def cmd_synth(args):
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(synthetic_corpus_text(args.sentences, args.seed), encoding="utf-8")
    _write_run_config(out.parent, args)
    print(f"wrote {args.sentences} sentences to {out}")


# -- argument parsing -------------------------------------------------------


def _decode_options(p):
    p.add_argument("--lambda", dest="lambda_", type=float, default=4.0,
                   help="emission weight for in-vocabulary tokens in log space (default 4)")
    p.add_argument("--space", choices=("log", "probability"), default="log",
                   help="decode in log space (default) or probability space")
    p.add_argument("--lambda-on-oov", action="store_true",
                   help="also weight prefix-table emissions of unknown tokens by lambda")
    p.add_argument("--oov-policy", choices=("prefix_table", "error"), default="prefix_table",
                   help="score unknown tokens with the prefix table, or fail")
    p.add_argument("--no-fallback", action="store_true",
                   help="fail instead of substituting a uniform emission on dead positions")
    p.add_argument("--smoothing", type=float, default=0.0,
                   help="additive smoothing for all tables (default 0: none)")
    p.add_argument("--layer1-order", type=int, choices=(1, 2), default=1,
                   help="order of the POS-tagging HMM of the pipeline (default 1)")
    p.add_argument("--lenient", action="store_true",
                   help="accept continuation states 2 that do not follow an ingredient start")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="recipe-hmm", description="HMM ingredient extraction for annotated recipe corpora.")
    sub = parser.add_subparsers(dest="command", required=True)
    corpus_help = f"corpus file (token<TAB>pos<TAB>state), or {SHIPPED_CORPUS} for the shipped one"

    p = sub.add_parser("train", help="estimate a model and write it to a file")
    p.add_argument("corpus", help=corpus_help)
    p.add_argument("--family", choices=("first", "second", "feature", "pipeline"),
                   default="pipeline", help="model family (default pipeline)")
    p.add_argument("--obs-field", choices=("token", "pos_label"), default="token",
                   help="observation column for first/second families")
    p.add_argument("--state-field", choices=("pos_label", "ing_state"), default="ing_state",
                   help="hidden-state column for first/second families")
    p.add_argument("--out", required=True, help="model file to write")
    _decode_options(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("tag", help="decode a token file with a single model")
    p.add_argument("model")
    p.add_argument("input", help="token-per-line file; extra tab columns are echoed")
    p.add_argument("--tags", default="predict",
                   help="'oracle' (second input column) or 'oracle:<path>' "
                        "for tag-conditioned models")
    p.add_argument("--out", required=True)
    _decode_options(p)
    p.set_defaults(func=cmd_tag)

    p = sub.add_parser("extract", help="run the two-layer extractor on a token file")
    p.add_argument("model", help="pipeline model file")
    p.add_argument("input", help="token-per-line file; extra tab columns are echoed as gold")
    p.add_argument("--tags", default="predict",
                   help="'predict' (layer 1), 'oracle' (second input column) or 'oracle:<path>'")
    p.add_argument("--out-dir", required=True, help="directory for tagged.tsv and spans.csv")
    _decode_options(p)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("eval", help="closed test: train and decode the same corpus")
    p.add_argument("corpus", help=corpus_help)
    p.add_argument("--systems", default=",".join(ev.SYSTEMS),
                   help=f"comma-separated subset of {', '.join(ev.SYSTEMS)}")
    p.add_argument("--out-dir", required=True)
    _decode_options(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("crossval", help="k-fold cross-validation of one system")
    p.add_argument("corpus", help=corpus_help)
    p.add_argument("--system", default="first", help=f"one of {', '.join(ev.SYSTEMS)}")
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--out-dir", required=True)
    _decode_options(p)
    p.set_defaults(func=cmd_crossval)

    p = sub.add_parser("sweep", help="closed-test accuracy of the extractor across lambda")
    p.add_argument("corpus", help=corpus_help)
    p.add_argument("--lambdas", default="1..9", help="'1..9' or comma-separated values")
    p.add_argument("--conditions", default="oracle,predicted",
                   help="comma-separated: oracle, predicted, degraded:<layer-1 accuracy>")
    p.add_argument("--seed", type=int, default=1, help="seed for degraded tags")
    p.add_argument("--out-dir", required=True)
    _decode_options(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("stats", help="corpus summary, optionally OOV rate against another corpus")
    p.add_argument("corpus", help=corpus_help)
    p.add_argument("--against", help="reference corpus whose lexicon defines known words")
    p.add_argument("--out-dir", help="also write stats.csv here")
    p.add_argument("--lenient", action="store_true")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("synth", help="write a synthetic annotated corpus")
    p.add_argument("--sentences", type=int, default=300)
    p.add_argument("--seed", type=int, default=2021)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except (ConfigError, ValueError) as exc:
        code = EXIT_PARSE if isinstance(exc, (CorpusParseError, ModelFormatError)) else EXIT_CONFIG
        print(f"error: {exc}", file=sys.stderr)
        return code
    except DecodeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DECODE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
