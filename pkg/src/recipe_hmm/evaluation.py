"""Token-level metrics, closed tests, k-fold cross-validation and lambda sweeps.

Systems compared (names used by every entry point and the CLI):

``first`` / ``second``
    first- and second-order HMM over tokens predicting ingredient states;
``first-tags`` / ``second-tags``
    the same models observing POS labels instead of tokens;
``ie-oracle`` / ``ie-predicted``
    the two-layer extractor fed gold or layer-1 POS tags.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field, replace

import numpy as np

from .corpus import build_lexicon, split_folds
from .decoder import DecodeRequest, decode
from .pipeline import PipelineConfig, PipelineModel, extract_ingredients, train_pipeline
from .tables import (FeatureConditionedModel, estimate_first_order, estimate_second_order)

SYSTEMS = ("first", "second", "first-tags", "second-tags", "ie-oracle", "ie-predicted")
POSITIVE_STATES = ("1", "2", "3")


@dataclass
class EvalReport:
    token_accuracy: float
    per_class_f1: dict
    macro_f1: float
    macro_f1_positive: float | None
    known_accuracy: float | None
    unknown_accuracy: float | None
    oov_count: int
    oov_rate: float
    total: int
    known_correct: int
    unknown_correct: int
    fallback_sentences: int = 0

    @property
    def f1(self):
        return self.macro_f1


def _flatten(seqs):
    return [str(x) for s in seqs for x in s]


def score(gold, predicted, oov_mask=None):
    """Compare per-sentence state sequences token by token.

    F1 is one-vs-rest per class; ``macro_f1`` averages over the classes present
    in ``gold`` and ``macro_f1_positive`` over the present classes among
    ``1``/``2``/``3``.  Accuracies over an empty known/unknown split are None.
    """
    if len(gold) != len(predicted):
        raise ValueError("gold and predicted sentence counts differ")
    for i, (g, p) in enumerate(zip(gold, predicted)):
        if len(g) != len(p):
            raise ValueError(f"sentence {i}: gold and predicted lengths differ")
    if oov_mask is None:
        oov_mask = [[False] * len(g) for g in gold]
    g, p = np.array(_flatten(gold)), np.array(_flatten(predicted))
    m = np.array([bool(x) for s in oov_mask for x in s], dtype=bool)
    if m.shape != g.shape:
        raise ValueError("oov_mask does not align with the sequences")
    total = len(g)
    correct = g == p
    known_correct = int(correct[~m].sum())
    unknown_correct = int(correct[m].sum())
    n_unknown = int(m.sum())

    per_class = {}
    for c in sorted(set(g) | set(p)):
        tp = int(((g == c) & (p == c)).sum())
        fp = int(((g != c) & (p == c)).sum())
        fn = int(((g == c) & (p != c)).sum())
        per_class[c] = 2 * tp / (2 * tp + fp + fn)
    present = sorted(set(g))
    positive = [c for c in present if c in POSITIVE_STATES]
    return EvalReport(
        token_accuracy=(known_correct + unknown_correct) / total if total else 0.0,
        per_class_f1=per_class,
        macro_f1=float(np.mean([per_class[c] for c in present])) if present else 0.0,
        macro_f1_positive=float(np.mean([per_class[c] for c in positive])) if positive else None,
        known_accuracy=known_correct / (total - n_unknown) if total > n_unknown else None,
        unknown_accuracy=unknown_correct / n_unknown if n_unknown else None,
        oov_count=n_unknown,
        oov_rate=n_unknown / total if total else 0.0,
        total=total,
        known_correct=known_correct,
        unknown_correct=unknown_correct,
    )


def _baseline_request(obs, config):
    return DecodeRequest(obs, lambda_=1.0, space=config.space, oov_policy=config.oov_policy,
                         fallback=config.fallback)


def fit_system(system, corpus, config=None):
    """Train ``system`` on ``corpus``.

    Returns ``predict(sentence, tags=None) -> (states, fallback)``.
    """
    config = config or PipelineConfig()
    if system in ("first", "second", "first-tags", "second-tags"):
        estimate = estimate_first_order if system.startswith("first") else estimate_second_order
        obs_field = "pos_label" if system.endswith("-tags") else "token"
        model = estimate(corpus, obs_field, "ing_state", smoothing=config.smoothing)

        def predict(sentence, tags=None):
            obs = sentence.tokens if obs_field == "token" else (tags or sentence.pos_labels)
            res = decode(model, _baseline_request(obs, config))
            return res.states, res.used_fallback
        return predict
    if system in ("ie-oracle", "ie-predicted"):
        pipeline = train_pipeline(corpus, config)
        return _pipeline_predictor(pipeline, "oracle" if system == "ie-oracle" else "predicted")
    raise ValueError(f"unknown system {system!r}; expected one of {SYSTEMS}")


def _pipeline_predictor(pipeline, tag_source):
    def predict(sentence, tags=None):
        if tag_source == "oracle" or tags is not None:
            ex = extract_ingredients(pipeline, sentence.tokens,
                                     tags=tags or sentence.pos_labels, tag_source="oracle")
        else:
            ex = extract_ingredients(pipeline, sentence.tokens, tag_source="predicted")
        fb = ex.diagnostics["layer2_fallback"] or ex.diagnostics["layer1_fallback"]
        return ex.states, fb
    return predict


def _model_predictor(model, config):
    if isinstance(model, PipelineModel):
        return _pipeline_predictor(model, model.config.tag_source)
    if isinstance(model, FeatureConditionedModel):
        def predict(sentence, tags=None):
            res = decode(model, config.request(sentence.tokens, tags or sentence.pos_labels))
            return res.states, res.used_fallback
        return predict

    def predict(sentence, tags=None):
        obs = sentence.column(model.obs_field)
        res = decode(model, _baseline_request(obs, config))
        return res.states, res.used_fallback
    return predict


def evaluate(predict, corpus, lexicon=None, tags=None):
    """Score ``predict`` on every sentence; OOV is judged against ``lexicon``."""
    gold, pred, mask = [], [], []
    fallbacks = 0
    for i, s in enumerate(corpus.sentences):
        states, fb = predict(s, tags[i] if tags is not None else None)
        gold.append(s.ing_states)
        pred.append(states)
        mask.append([lexicon is not None and w not in lexicon for w in s.tokens])
        fallbacks += bool(fb)
    report = score(gold, pred, mask)
    report.fallback_sentences = fallbacks
    return report


def closed_test(corpus, system="ie-oracle", config=None):
    """Train on ``corpus`` and decode it back (no unknown words are possible).

    ``system`` is a system name or an already trained model/pipeline.
    """
    config = config or PipelineConfig()
    if isinstance(system, str):
        predict = fit_system(system, corpus, config)
    else:
        predict = _model_predictor(system, config)
    return evaluate(predict, corpus, build_lexicon(corpus))


@dataclass
class CrossValReport:
    system: str
    k: int
    seed: int
    folds: list
    average: dict = field(default_factory=dict)


_AVERAGED = ("token_accuracy", "macro_f1", "macro_f1_positive", "unknown_accuracy",
             "known_accuracy", "oov_count", "oov_rate")


def _average(reports):
    out = {}
    for name in _AVERAGED:
        vals = [getattr(r, name) for r in reports if getattr(r, name) is not None]
        out[name] = float(np.mean(vals)) if vals else None
    return out


def cross_validate(corpus, k=10, seed=0, system="first", config=None):
    """k-fold cross-validation; each fold is scored against its training lexicon."""
    plan = split_folds(corpus, k, seed)
    reports = []
    for f in range(plan.k):
        train_idx, test_idx = plan.train_test(f)
        if not test_idx:
            raise ValueError(f"fold {f} has no sentences")
        train, test = corpus.subset(train_idx), corpus.subset(test_idx)
        predict = fit_system(system, train, config)
        reports.append(evaluate(predict, test, build_lexicon(train)))
    return CrossValReport(system, plan.k, seed, reports, _average(reports))


def degrade_tags(tag_seqs, tagset, target_accuracy, seed):
    """Corrupt a seeded random subset of tags so that exactly
    ``round((1 - target) * n)`` of ``n`` tags differ from the originals."""
    if not 0.0 <= target_accuracy <= 1.0:
        raise ValueError(f"target accuracy {target_accuracy} outside [0, 1]")
    flat = [t for s in tag_seqs for t in s]
    n_bad = int(round((1.0 - target_accuracy) * len(flat)))
    tagset = list(tagset)
    if n_bad and len(tagset) < 2:
        raise ValueError("target accuracy unreachable with fewer than two tags")
    rng = np.random.default_rng(seed)
    for pos in sorted(rng.choice(len(flat), size=n_bad, replace=False).tolist()):
        others = [t for t in tagset if t != flat[pos]]
        flat[pos] = others[int(rng.integers(len(others)))]
    out, i = [], 0
    for s in tag_seqs:
        out.append(tuple(flat[i:i + len(s)]))
        i += len(s)
    return out


@dataclass
class SweepCurve:
    lambdas: tuple
    rows: list                                  # (lambda, condition, accuracy, f1)
    first_layer_accuracy: dict = field(default_factory=dict)

    def accuracy(self, condition):
        return [acc for lam, c, acc, _ in self.rows if c == condition]

    def conditions(self):
        return list(dict.fromkeys(c for _, c, _, _ in self.rows))


def parse_condition(text):
    """``oracle``, ``predicted`` or ``degraded:<target accuracy>``."""
    if text in ("oracle", "predicted"):
        return text, None
    if isinstance(text, tuple):
        return text
    name, _, target = str(text).partition(":")
    if name != "degraded" or not target:
        raise ValueError(f"unknown sweep condition {text!r}")
    return "degraded", float(target)


def lambda_sweep(corpus, lambdas=range(1, 10), conditions=("oracle", "predicted"), seed=0,
                 config=None):
    """Closed-test accuracy and F1 of the extractor for each lambda and tag condition."""
    config = config or PipelineConfig()
    lambdas = tuple(lambdas)
    if any(lam <= 0 for lam in lambdas):
        raise ValueError("lambda values must be positive")
    if list(lambdas) != sorted(set(lambdas)):
        raise ValueError("lambda values must be strictly increasing")
    pipeline = train_pipeline(corpus, config)
    lexicon = pipeline.lexicon
    gold_tags = [s.pos_labels for s in corpus.sentences]

    tag_sets = {}
    for text in conditions:
        name, target = parse_condition(text)
        label = name if target is None else f"degraded:{target:g}"
        if name == "oracle":
            tags = gold_tags
        elif name == "predicted":
            tags = [decode(pipeline.layer1, config.request(s.tokens, layer1=True)).states
                    for s in corpus.sentences]
        else:
            tags = degrade_tags(gold_tags, corpus.pos_tagset, target, seed)
        tag_sets[label] = tags

    curve = SweepCurve(lambdas, [])
    for label, tags in tag_sets.items():
        curve.first_layer_accuracy[label] = score(gold_tags, tags).token_accuracy
    for lam in lambdas:
        cfg = replace(config, lambda_=float(lam))
        for label, tags in tag_sets.items():
            def predict(sentence, t, cfg=cfg):
                res = decode(pipeline.layer2, cfg.request(sentence.tokens, t))
                return res.states, res.used_fallback
            report = evaluate(predict, corpus, lexicon, tags)
            curve.rows.append((lam, label, report.token_accuracy, report.macro_f1))
    return curve


# -- CSV output -------------------------------------------------------------


def _f(x):
    return "" if x is None else f"{x:.4f}"


def _csv(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def closed_test_csv(results):
    """``results``: iterable of (system name, EvalReport)."""
    header = ["system", "accuracy", "f1_score", "f1_positive", "accuracy_known",
              "accuracy_unknown", "unknown_count", "unknown_percentage", "tokens"]
    rows = [[name, _f(r.token_accuracy), _f(r.macro_f1), _f(r.macro_f1_positive),
             _f(r.known_accuracy), _f(r.unknown_accuracy), r.oov_count, _f(r.oov_rate), r.total]
            for name, r in results]
    return _csv(header, rows)


def crossval_csv(report):
    header = ["fold", "accuracy", "f1_score", "accuracy_unknown", "accuracy_known",
              "unknown_count", "unknown_percentage", "f1_positive"]
    rows = [[i, _f(r.token_accuracy), _f(r.macro_f1), _f(r.unknown_accuracy),
             _f(r.known_accuracy), r.oov_count, _f(r.oov_rate), _f(r.macro_f1_positive)]
            for i, r in enumerate(report.folds)]
    a = report.average
    rows.append(["Avg", _f(a["token_accuracy"]), _f(a["macro_f1"]), _f(a["unknown_accuracy"]),
                 _f(a["known_accuracy"]), _f(a["oov_count"]), _f(a["oov_rate"]),
                 _f(a["macro_f1_positive"])])
    return _csv(header, rows)


def sweep_csv(curve):
    return _csv(["lambda", "condition", "accuracy", "f1"],
                [[_f(lam), c, _f(acc), _f(f1)] for lam, c, acc, f1 in curve.rows])
