"""Two-layer ingredient extractor.

Layer 1 tags POS with a first-order (optionally second-order) HMM over
tokens.  Layer 2 decodes ingredient states with the tag-pinned
feature-conditioned model, reading layer-1 tags (or gold tags) as features.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields

from .corpus import build_lexicon
from .decoder import DecodeRequest, decode
from .tables import (estimate_feature_conditioned, estimate_first_order,
                     estimate_second_order)

TAG_SOURCES = ("predicted", "oracle")


@dataclass(frozen=True)
class PipelineConfig:
    lambda_: float = 4.0
    space: str = "log"
    oov_policy: str = "prefix_table"
    lambda_on_oov: bool = False
    tag_source: str = "predicted"
    layer1_order: int = 1
    layer1_lambda: float = 1.0
    smoothing: float = 0.0
    fallback: bool = True

    def __post_init__(self):
        if self.tag_source not in TAG_SOURCES:
            raise ValueError(f"tag_source must be one of {TAG_SOURCES}")
        if self.layer1_order not in (1, 2):
            raise ValueError("layer1_order must be 1 or 2")
        # validates lambda, space and oov_policy
        self.request(("x",), ("x",))

    def request(self, tokens, tags=None, layer1=False):
        return DecodeRequest(
            tokens, tags,
            lambda_=self.layer1_lambda if layer1 else self.lambda_,
            space=self.space, oov_policy=self.oov_policy,
            lambda_on_oov=self.lambda_on_oov, fallback=self.fallback,
            unknown_tags="error" if layer1 else "unseen")

    def as_items(self):
        return [(k, repr(v) if isinstance(v, float) else str(v)) for k, v in asdict(self).items()]

    @classmethod
    def from_items(cls, items):
        types = {f.name: f.type for f in fields(cls)}
        kwargs = {}
        for key, raw in items:
            if key not in types:
                raise ValueError(f"unknown pipeline config key {key!r}")
            kind = types[key]
            if kind == "bool":
                kwargs[key] = raw == "True"
            elif kind == "int":
                kwargs[key] = int(raw)
            elif kind == "float":
                kwargs[key] = float(raw)
            else:
                kwargs[key] = raw
        return cls(**kwargs)


@dataclass(frozen=True, eq=False)
class PipelineModel:
    layer1: object
    layer2: object
    config: PipelineConfig = field(default_factory=PipelineConfig)

    def __post_init__(self):
        if tuple(self.layer2.tags) != tuple(self.layer1.states):
            raise ValueError("layer-2 feature tagset must equal the layer-1 state set")
        if self.layer1.lexicon != self.layer2.lexicon:
            raise ValueError("both layers must share one lexicon")

    @property
    def lexicon(self):
        return self.layer2.lexicon

    def __eq__(self, other):
        return (isinstance(other, PipelineModel) and self.layer1 == other.layer1
                and self.layer2 == other.layer2 and self.config == other.config)

    __hash__ = None


@dataclass(frozen=True)
class IngredientSpan:
    start: int
    end: int
    text: str
    flags: tuple = ()

    @property
    def malformed(self):
        return "malformed" in self.flags


@dataclass(frozen=True)
class Extraction:
    tokens: tuple
    tags: tuple
    states: tuple
    spans: list
    diagnostics: dict


def train_pipeline(corpus, config=None):
    """Train both layers from one annotated corpus and its shared lexicon."""
    config = config or PipelineConfig()
    if len(corpus) == 0:
        raise ValueError("cannot train a pipeline on an empty corpus")
    if set(corpus.pos_tagset) <= {"_"}:
        raise ValueError("corpus has no POS annotation layer")
    lexicon = build_lexicon(corpus)
    estimate = estimate_first_order if config.layer1_order == 1 else estimate_second_order
    layer1 = estimate(corpus, "token", "pos_label", smoothing=config.smoothing, lexicon=lexicon)
    layer2 = estimate_feature_conditioned(corpus, smoothing=config.smoothing, lexicon=lexicon)
    return PipelineModel(layer1, layer2, config)


def predict_tags(pipeline, tokens):
    return decode(pipeline.layer1, pipeline.config.request(tokens, layer1=True))


def extract_ingredients(pipeline, tokens, tags=None, tag_source=None, config=None):
    """Run both layers on one sentence.

    ``tag_source="oracle"`` requires ``tags``; with ``"predicted"`` the
    layer-1 decoder supplies them.
    """
    config = config or pipeline.config
    tokens = tuple(tokens)
    if not tokens:
        raise ValueError("tokens must be nonempty")
    tag_source = tag_source or ("oracle" if tags is not None else config.tag_source)
    diagnostics = {}
    if tag_source == "oracle":
        if tags is None or len(tags) != len(tokens):
            raise ValueError("oracle tag source needs one tag per token")
        tags = tuple(tags)
        diagnostics["layer1_fallback"] = False
    else:
        first = decode(pipeline.layer1, config.request(tokens, layer1=True))
        tags = first.states
        diagnostics["layer1_oov_mask"] = first.oov_mask
        diagnostics["layer1_fallback"] = first.used_fallback
    second = decode(pipeline.layer2, config.request(tokens, tags))
    spans = states_to_spans(tokens, second.states)
    diagnostics.update(
        oov_mask=second.oov_mask,
        layer2_fallback=second.used_fallback,
        score=second.score,
        malformed_spans=sum(s.malformed for s in spans),
    )
    return Extraction(tokens, tags, second.states, spans, diagnostics)


def states_to_spans(tokens, states):
    """Group ingredient states into spans.

    A ``1`` opens a span that absorbs the following ``2``/``3`` tokens.  A
    continuation with no open span starts a span flagged ``malformed``; any
    span holding a ``3`` is flagged ``state3``.
    """
    if len(tokens) != len(states):
        raise ValueError("tokens and states must have equal length")
    spans = []
    open_span = None

    def close():
        nonlocal open_span
        if open_span is not None:
            start, end, flags = open_span
            spans.append(IngredientSpan(start, end, " ".join(tokens[start:end + 1]),
                                        tuple(dict.fromkeys(flags))))
            open_span = None

    for i, s in enumerate(str(x) for x in states):
        if s == "1":
            close()
            open_span = (i, i, [])
        elif s in ("2", "3"):
            flags = ["state3"] if s == "3" else []
            if open_span is None:
                open_span = (i, i, ["malformed"] + flags)
            else:
                start, _, old = open_span
                open_span = (start, i, old + flags)
        else:
            close()
    close()
    return spans


def spans_to_states(length, spans):
    """Inverse of :func:`states_to_spans` for well-formed spans."""
    states = ["0"] * length
    for span in spans:
        states[span.start] = "1"
        for i in range(span.start + 1, span.end + 1):
            states[i] = "2"
    return tuple(states)
