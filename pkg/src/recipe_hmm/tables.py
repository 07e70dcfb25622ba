"""Relative-frequency estimation of HMM probability tables.

Three model families are estimated from fully annotated sequences:

* :class:`FirstOrderModel` -- bigram transitions ``trans[i, j]`` and
  emissions ``emit[j, w]``;
* :class:`SecondOrderModel` -- trigram transitions ``trans3[i, j, k]`` and
  pair-conditioned emissions ``emit2[i, j, w]``;
* :class:`FeatureConditionedModel` -- transitions conditioned on the previous
  POS tag and state, ``trans_f[tag, j, k]``, and emissions conditioned on the
  current tag and state, ``emit_f[tag, j, w]``.

Every family carries a :class:`PrefixTable` per emission table that replaces
the word axis by a prefix axis; decoders read it for out-of-vocabulary tokens.
Contexts never seen in training give all-zero rows unless ``smoothing`` > 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields

import numpy as np

from .corpus import Lexicon, _ordered_unique, extract_prefix


@dataclass(frozen=True, eq=False)
class PrefixTable:
    """Emission mass aggregated over words sharing a prefix.

    ``table`` has the context axes of the emission table it mirrors and a last
    axis indexed by ``prefixes``.
    """

    prefixes: tuple
    table: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "prefixes", tuple(self.prefixes))
        object.__setattr__(self, "_index", {p: i for i, p in enumerate(self.prefixes)})
        if self.table.shape[-1] != len(self.prefixes):
            raise ValueError("prefix table width does not match its prefix inventory")

    def index(self, prefix):
        return self._index.get(prefix)

    def column_for(self, token):
        """Context-shaped slice for ``token``'s prefix, or None if the prefix is unseen."""
        p = self._index.get(extract_prefix(token))
        return None if p is None else self.table[..., p]

    def __eq__(self, other):
        return (isinstance(other, PrefixTable) and self.prefixes == other.prefixes
                and np.array_equal(self.table, other.table))


def build_prefix_table(emission, lexicon):
    """Sum emission columns of words with the same prefix; context axes are untouched."""
    emission = np.asarray(emission, dtype=float)
    if emission.shape[-1] != len(lexicon):
        raise ValueError(
            f"emission has {emission.shape[-1]} word columns, lexicon has {len(lexicon)} words")
    prefixes = lexicon.prefixes
    pidx = {p: i for i, p in enumerate(prefixes)}
    table = np.zeros(emission.shape[:-1] + (len(prefixes),))
    for w, word in enumerate(lexicon.words):
        table[..., pidx[lexicon.prefix_of[word]]] += emission[..., w]
    return PrefixTable(prefixes, table)


def normalize(counts, smoothing=0.0):
    """Row-normalize ``counts`` along the last axis.

    Rows with zero total stay all-zero when ``smoothing`` is 0; with additive
    smoothing every row becomes a proper distribution.
    """
    counts = np.asarray(counts, dtype=float)
    if smoothing < 0:
        raise ValueError("smoothing must be non-negative")
    if smoothing > 0:
        counts = counts + smoothing
    totals = counts.sum(axis=-1, keepdims=True)
    out = np.zeros_like(counts)
    np.divide(counts, totals, out=out, where=totals > 0)
    return out


class _TableModel:
    """Structural equality and a few shared helpers for the model dataclasses."""

    family = None

    def __eq__(self, other):
        if type(self) is not type(other):
            return False
        for f in fields(self):
            a, b = getattr(self, f.name), getattr(other, f.name)
            if isinstance(a, np.ndarray):
                if not (a.shape == b.shape and np.array_equal(a, b)):
                    return False
            elif isinstance(a, dict):
                if a.keys() != b.keys() or any(not np.array_equal(a[k], b[k]) for k in a):
                    return False
            elif a != b:
                return False
        return True

    __hash__ = None

    @property
    def n_states(self):
        return len(self.states)

    @property
    def n_words(self):
        return len(self.lexicon)

    def is_known(self, token):
        return token in self.lexicon

    def zero_rows(self):
        """Number of all-zero conditional rows per table (unseen contexts)."""
        return {name: int((~getattr(self, name).any(axis=-1)).sum())
                for name in self._prob_tables if getattr(self, name).ndim > 1}


@dataclass(frozen=True, eq=False)
class FirstOrderModel(_TableModel):
    states: tuple
    lexicon: Lexicon
    pi: np.ndarray
    trans: np.ndarray
    emit: np.ndarray
    prefix_emit: PrefixTable
    counts: dict = field(default_factory=dict)
    obs_field: str = "token"
    state_field: str = "pos_label"
    smoothing: float = 0.0

    family = "first"
    _prob_tables = ("pi", "trans", "emit")


@dataclass(frozen=True, eq=False)
class SecondOrderModel(_TableModel):
    """Full second-order HMM.

    ``trans`` and ``emit`` are the bigram transition and unigram emission
    tables from the same counts; the decoder needs them for the first two
    positions where no trigram context exists.
    """

    states: tuple
    lexicon: Lexicon
    pi: np.ndarray
    trans: np.ndarray
    trans3: np.ndarray
    emit: np.ndarray
    emit2: np.ndarray
    prefix_emit: PrefixTable
    prefix_emit2: PrefixTable
    counts: dict = field(default_factory=dict)
    obs_field: str = "token"
    state_field: str = "ing_state"
    smoothing: float = 0.0

    family = "second"
    _prob_tables = ("pi", "trans", "trans3", "emit", "emit2")


@dataclass(frozen=True, eq=False)
class FeatureConditionedModel(_TableModel):
    """Ingredient-state HMM whose tables are conditioned on POS tags.

    ``trans_f[t, j, k]`` = P(state_r = k | state_{r-1} = j, tag_{r-1} = t) and
    ``emit_f[t, j, w]`` = P(word_r = w | state_r = j, tag_r = t).
    """

    states: tuple
    tags: tuple
    lexicon: Lexicon
    pi: np.ndarray
    trans_f: np.ndarray
    emit_f: np.ndarray
    prefix_emit_f: PrefixTable
    counts: dict = field(default_factory=dict)
    smoothing: float = 0.0

    family = "feature"
    _prob_tables = ("pi", "trans_f", "emit_f")

    @property
    def n_tags(self):
        return len(self.tags)

    def tag_index(self, tag):
        try:
            return self.tags.index(tag)
        except ValueError:
            raise ValueError(f"tag {tag!r} not in the model tagset") from None


def _check_sequences(obs_seqs, state_seqs, tag_seqs=None):
    if len(obs_seqs) == 0:
        raise ValueError("cannot estimate a model from an empty corpus")
    if len(obs_seqs) != len(state_seqs):
        raise ValueError("observation and state sequence counts differ")
    for i, (o, s) in enumerate(zip(obs_seqs, state_seqs)):
        if len(o) == 0 or len(o) != len(s):
            raise ValueError(f"sequence {i}: empty or mismatched lengths")
        if tag_seqs is not None and len(tag_seqs[i]) != len(o):
            raise ValueError(f"sequence {i}: tag sequence length mismatch")


def _inventory(seqs, given=None):
    return tuple(given) if given is not None else _ordered_unique(x for s in seqs for x in s)


def count_first_order(obs_seqs, state_seqs, states=None, lexicon=None):
    _check_sequences(obs_seqs, state_seqs)
    states = _inventory(state_seqs, states)
    lexicon = lexicon if lexicon is not None else Lexicon(_inventory(obs_seqs))
    sidx = {s: i for i, s in enumerate(states)}
    n, m = len(states), len(lexicon)
    start = np.zeros(n, dtype=np.int64)
    trans = np.zeros((n, n), dtype=np.int64)
    emit = np.zeros((n, m), dtype=np.int64)
    for obs, seq in zip(obs_seqs, state_seqs):
        ids = [sidx[s] for s in seq]
        start[ids[0]] += 1
        for a, b in zip(ids, ids[1:]):
            trans[a, b] += 1
        for w, s in zip(obs, ids):
            emit[s, lexicon.word_index[w]] += 1
    return states, lexicon, {"start": start, "trans": trans, "emit": emit}


def first_order_from_sequences(obs_seqs, state_seqs, states=None, lexicon=None,
                               smoothing=0.0, obs_field="token", state_field="pos_label"):
    states, lexicon, c = count_first_order(obs_seqs, state_seqs, states, lexicon)
    emit = normalize(c["emit"], smoothing)
    return FirstOrderModel(
        states=states, lexicon=lexicon,
        pi=normalize(c["start"], smoothing), trans=normalize(c["trans"], smoothing), emit=emit,
        prefix_emit=build_prefix_table(emit, lexicon), counts=c,
        obs_field=obs_field, state_field=state_field, smoothing=smoothing)


def _field_sequences(corpus, obs_field, state_field):
    if obs_field == state_field:
        raise ValueError("observation and state fields must differ")
    if len(corpus) == 0:
        raise ValueError("cannot estimate a model from an empty corpus")
    return corpus.sequences(obs_field), corpus.sequences(state_field)


def _corpus_inventory(corpus, name):
    return {"pos_label": corpus.pos_tagset, "ing_state": corpus.state_set}.get(name)


def estimate_first_order(corpus, obs_field="token", state_field="pos_label", smoothing=0.0,
                         lexicon=None):
    """First-order HMM over ``state_field`` emitting ``obs_field`` values.

    ``token``/``pos_label`` is the POS tagger, ``token``/``ing_state`` the
    token baseline, and ``pos_label``/``ing_state`` the baseline applied to tags.
    """
    obs, st = _field_sequences(corpus, obs_field, state_field)
    return first_order_from_sequences(obs, st, _corpus_inventory(corpus, state_field), lexicon,
                                      smoothing, obs_field, state_field)


def count_second_order(obs_seqs, state_seqs, states=None, lexicon=None):
    states, lexicon, c = count_first_order(obs_seqs, state_seqs, states, lexicon)
    sidx = {s: i for i, s in enumerate(states)}
    n, m = len(states), len(lexicon)
    trans3 = np.zeros((n, n, n), dtype=np.int64)
    emit2 = np.zeros((n, n, m), dtype=np.int64)
    for obs, seq in zip(obs_seqs, state_seqs):
        ids = [sidx[s] for s in seq]
        for a, b, d in zip(ids, ids[1:], ids[2:]):
            trans3[a, b, d] += 1
        for r in range(1, len(ids)):
            emit2[ids[r - 1], ids[r], lexicon.word_index[obs[r]]] += 1
    c.update(trans3=trans3, emit2=emit2)
    return states, lexicon, c


def second_order_from_sequences(obs_seqs, state_seqs, states=None, lexicon=None,
                                smoothing=0.0, obs_field="token", state_field="ing_state"):
    states, lexicon, c = count_second_order(obs_seqs, state_seqs, states, lexicon)
    emit = normalize(c["emit"], smoothing)
    emit2 = normalize(c["emit2"], smoothing)
    return SecondOrderModel(
        states=states, lexicon=lexicon, pi=normalize(c["start"], smoothing),
        trans=normalize(c["trans"], smoothing), trans3=normalize(c["trans3"], smoothing),
        emit=emit, emit2=emit2,
        prefix_emit=build_prefix_table(emit, lexicon),
        prefix_emit2=build_prefix_table(emit2, lexicon),
        counts=c, obs_field=obs_field, state_field=state_field, smoothing=smoothing)


def estimate_second_order(corpus, obs_field="token", state_field="ing_state", smoothing=0.0,
                          lexicon=None):
    """Full second-order HMM; sentences shorter than 3 add only to the lower-order counts."""
    obs, st = _field_sequences(corpus, obs_field, state_field)
    return second_order_from_sequences(obs, st, _corpus_inventory(corpus, state_field), lexicon,
                                       smoothing, obs_field, state_field)


def count_feature_conditioned(obs_seqs, tag_seqs, state_seqs, states=None, tags=None,
                              lexicon=None):
    _check_sequences(obs_seqs, state_seqs, tag_seqs)
    states = _inventory(state_seqs, states)
    tags = _inventory(tag_seqs, tags)
    lexicon = lexicon if lexicon is not None else Lexicon(_inventory(obs_seqs))
    sidx = {s: i for i, s in enumerate(states)}
    tidx = {t: i for i, t in enumerate(tags)}
    n, k, m = len(states), len(tags), len(lexicon)
    start = np.zeros(n, dtype=np.int64)
    trans_f = np.zeros((k, n, n), dtype=np.int64)
    emit_f = np.zeros((k, n, m), dtype=np.int64)
    for obs, tg, seq in zip(obs_seqs, tag_seqs, state_seqs):
        ids = [sidx[s] for s in seq]
        tids = [tidx[t] for t in tg]
        start[ids[0]] += 1
        for r in range(1, len(ids)):
            trans_f[tids[r - 1], ids[r - 1], ids[r]] += 1
        for w, t, s in zip(obs, tids, ids):
            emit_f[t, s, lexicon.word_index[w]] += 1
    return states, tags, lexicon, {"start": start, "trans_f": trans_f, "emit_f": emit_f}


def feature_conditioned_from_sequences(obs_seqs, tag_seqs, state_seqs, states=None, tags=None,
                                       lexicon=None, smoothing=0.0):
    states, tags, lexicon, c = count_feature_conditioned(
        obs_seqs, tag_seqs, state_seqs, states, tags, lexicon)
    emit_f = normalize(c["emit_f"], smoothing)
    return FeatureConditionedModel(
        states=states, tags=tags, lexicon=lexicon, pi=normalize(c["start"], smoothing),
        trans_f=normalize(c["trans_f"], smoothing), emit_f=emit_f,
        prefix_emit_f=build_prefix_table(emit_f, lexicon), counts=c, smoothing=smoothing)


def estimate_feature_conditioned(corpus, smoothing=0.0, lexicon=None):
    """Ingredient-state model conditioned on the corpus POS labels."""
    if len(corpus) == 0:
        raise ValueError("cannot estimate a model from an empty corpus")
    return feature_conditioned_from_sequences(
        corpus.sequences("token"), corpus.sequences("pos_label"), corpus.sequences("ing_state"),
        corpus.state_set, corpus.pos_tagset, lexicon, smoothing)
