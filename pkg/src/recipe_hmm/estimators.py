"""scikit-learn style estimators over the table/decoder core.

Sequence data follows the usual sequence-labelling convention: ``X`` is a
list of sentences, ``y`` a list of label sequences of matching lengths.
For the tag-conditioned estimators each sentence in ``X`` is a sequence of
``(token, pos_tag)`` pairs.
"""

from __future__ import annotations

from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .corpus import AnnotatedSentence, Corpus
from .decoder import DecodeRequest, decode
from .evaluation import score as score_sequences
from .pipeline import PipelineConfig, extract_ingredients, train_pipeline
from .tables import (feature_conditioned_from_sequences, first_order_from_sequences,
                     second_order_from_sequences)


def check_sequences(X, y=None, pairs=False):
    """Validate sequence input; returns lists of tuples.

    With ``pairs`` every item must be a ``(token, tag)`` pair and the result
    is ``(tokens, tags)`` lists (plus ``y`` when given).
    """
    if isinstance(X, (str, bytes)) or not hasattr(X, "__len__"):
        raise TypeError("X must be a list of sequences")
    X = [tuple(x) for x in X]
    if not X:
        raise ValueError("X contains no sequences")
    for i, x in enumerate(X):
        if not x:
            raise ValueError(f"sequence {i} is empty")
        if isinstance(x, str):
            raise TypeError(f"sequence {i} is a string, expected a sequence of tokens")
    if y is not None:
        y = [tuple(str(v) for v in s) for s in y]
        if len(y) != len(X):
            raise ValueError(f"X has {len(X)} sequences but y has {len(y)}")
        for i, (x, s) in enumerate(zip(X, y)):
            if len(x) != len(s):
                raise ValueError(f"sequence {i}: {len(x)} observations but {len(s)} labels")
    if pairs:
        tokens, tags = [], []
        for i, x in enumerate(X):
            if not all(isinstance(p, (tuple, list)) and len(p) == 2 for p in x):
                raise ValueError(f"sequence {i}: expected (token, tag) pairs")
            tokens.append(tuple(p[0] for p in x))
            tags.append(tuple(p[1] for p in x))
        return (tokens, tags) if y is None else (tokens, tags, y)
    return X if y is None else (X, y)


def _is_paired(x):
    return all(isinstance(p, (tuple, list)) and len(p) == 2 for p in x)


class HMMTagger(BaseEstimator):
    """First- or second-order HMM tagger trained by relative frequencies.

    Unknown observations are scored with the prefix-aggregated emission table.
    """

    def __init__(self, order=1, smoothing=0.0, lambda_=1.0, space="log",
                 oov_policy="prefix_table", lambda_on_oov=False):
        self.order = order
        self.smoothing = smoothing
        self.lambda_ = lambda_
        self.space = space
        self.oov_policy = oov_policy
        self.lambda_on_oov = lambda_on_oov

    def fit(self, X, y):
        X, y = check_sequences(X, y)
        if self.order not in (1, 2):
            raise ValueError("order must be 1 or 2")
        build = first_order_from_sequences if self.order == 1 else second_order_from_sequences
        self.model_ = build(X, y, smoothing=self.smoothing)
        self.classes_ = self.model_.states
        return self

    def _request(self, x):
        return DecodeRequest(x, lambda_=self.lambda_, space=self.space,
                             oov_policy=self.oov_policy, lambda_on_oov=self.lambda_on_oov)

    def decode(self, X):
        check_is_fitted(self, "model_")
        return [decode(self.model_, self._request(x)) for x in check_sequences(X)]

    def predict(self, X):
        return [r.states for r in self.decode(X)]

    def score(self, X, y):
        """Token-level accuracy."""
        return score_sequences(y, self.predict(X)).token_accuracy


class FeatureConditionedTagger(HMMTagger):
    """Tag-conditioned state tagger; ``X`` holds ``(token, pos_tag)`` pairs."""

    def __init__(self, smoothing=0.0, lambda_=4.0, space="log", oov_policy="prefix_table",
                 lambda_on_oov=False):
        self.smoothing = smoothing
        self.lambda_ = lambda_
        self.space = space
        self.oov_policy = oov_policy
        self.lambda_on_oov = lambda_on_oov

    def fit(self, X, y):
        tokens, tags, y = check_sequences(X, y, pairs=True)
        self.model_ = feature_conditioned_from_sequences(tokens, tags, y,
                                                         smoothing=self.smoothing)
        self.classes_ = self.model_.states
        return self

    def decode(self, X):
        check_is_fitted(self, "model_")
        tokens, tags = check_sequences(X, pairs=True)
        return [decode(self.model_, DecodeRequest(
            t, g, lambda_=self.lambda_, space=self.space, oov_policy=self.oov_policy,
            lambda_on_oov=self.lambda_on_oov)) for t, g in zip(tokens, tags)]


class IngredientExtractor(BaseEstimator):
    """Two-layer extractor: POS HMM feeding the tag-conditioned state decoder.

    ``fit`` needs ``(token, pos_tag)`` pairs.  ``predict`` accepts pairs or
    plain token sequences; with ``tag_source="oracle"`` the paired tags are
    used, otherwise layer 1 predicts them.
    """

    def __init__(self, lambda_=4.0, layer1_order=1, smoothing=0.0, space="log",
                 oov_policy="prefix_table", lambda_on_oov=False, tag_source="predicted"):
        self.lambda_ = lambda_
        self.layer1_order = layer1_order
        self.smoothing = smoothing
        self.space = space
        self.oov_policy = oov_policy
        self.lambda_on_oov = lambda_on_oov
        self.tag_source = tag_source

    def _config(self):
        return PipelineConfig(lambda_=float(self.lambda_), space=self.space,
                              oov_policy=self.oov_policy, lambda_on_oov=self.lambda_on_oov,
                              tag_source=self.tag_source, layer1_order=self.layer1_order,
                              smoothing=self.smoothing)

    def fit(self, X, y):
        tokens, tags, y = check_sequences(X, y, pairs=True)
        corpus = Corpus([AnnotatedSentence(t, g, s) for t, g, s in zip(tokens, tags, y)])
        self.pipeline_ = train_pipeline(corpus, self._config())
        self.classes_ = self.pipeline_.layer2.states
        self.tagset_ = self.pipeline_.layer2.tags
        return self

    def extract(self, X):
        check_is_fitted(self, "pipeline_")
        out = []
        for x in check_sequences(X):
            if _is_paired(x):
                tokens = tuple(p[0] for p in x)
                tags = tuple(p[1] for p in x) if self.tag_source == "oracle" else None
            elif self.tag_source == "oracle":
                raise ValueError("tag_source='oracle' needs (token, pos_tag) pairs")
            else:
                tokens, tags = x, None
            out.append(extract_ingredients(
                self.pipeline_, tokens, tags=tags,
                tag_source="oracle" if tags is not None else "predicted"))
        return out

    def predict(self, X):
        return [e.states for e in self.extract(X)]

    def transform(self, X):
        """Ingredient spans per sentence."""
        return [e.spans for e in self.extract(X)]

    def score(self, X, y):
        return score_sequences(y, self.predict(X)).token_accuracy
