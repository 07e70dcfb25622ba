"""Seeded random models and queries shared by the decoder and acceptance tests."""

from dataclasses import replace
from fractions import Fraction

import numpy as np

from recipe_hmm.tables import (build_prefix_table, feature_conditioned_from_sequences,
                               first_order_from_sequences, second_order_from_sequences)

STATES = ("0", "1", "2", "3")
FAMILIES = ("first", "second", "feature")


def _word(rng, alphabet, lo, hi):
    return "".join(rng.choice(list(alphabet), size=int(rng.integers(lo, hi + 1))))


def random_training(rng, n_tags=None, max_words=12, max_len=6):
    """Random (tokens, tags, states) sequences over a small vocabulary.

    The vocabulary uses a three-letter alphabet so prefixes are shared and
    many estimated probabilities coincide, which exercises tie-breaking.
    """
    k = int(n_tags or rng.integers(2, 6))
    tags = tuple(f"T{i}" for i in range(k))
    vocab = sorted({_word(rng, "abc", 1, 3) for _ in range(int(rng.integers(3, max_words + 1)))})
    tokens, tag_seqs, states = [], [], []
    for _ in range(int(rng.integers(2, 10))):
        n = int(rng.integers(1, max_len + 1))
        tokens.append(tuple(vocab[i] for i in rng.integers(len(vocab), size=n)))
        tag_seqs.append(tuple(tags[i] for i in rng.integers(k, size=n)))
        states.append(tuple(STATES[i] for i in rng.integers(len(STATES), size=n)))
    return tokens, tag_seqs, states, tags


def random_model(rng, family, smoothing=0.0):
    tokens, tag_seqs, states, tags = random_training(rng)
    if family == "first":
        return first_order_from_sequences(tokens, states, states=STATES, smoothing=smoothing)
    if family == "second":
        return second_order_from_sequences(tokens, states, states=STATES, smoothing=smoothing)
    return feature_conditioned_from_sequences(tokens, tag_seqs, states, states=STATES, tags=tags,
                                              smoothing=smoothing)


def random_query(rng, model, max_len=6, oov_rate=0.2):
    """Observations mixing known words, unknown words with a seen prefix and unseen prefixes."""
    words = model.lexicon.words
    n = int(rng.integers(1, max_len + 1))
    obs = []
    for _ in range(n):
        r = rng.random()
        if r < oov_rate / 2:
            obs.append(words[int(rng.integers(len(words)))][:2] + "xy")
        elif r < oov_rate:
            obs.append(_word(rng, "abcd", 2, 4) + "x")
        else:
            obs.append(words[int(rng.integers(len(words)))])
    tags = None
    if hasattr(model, "tags"):
        tags = tuple(model.tags[i] for i in rng.integers(len(model.tags), size=n))
    return tuple(obs), tags


def with_random_tables(rng, model):
    """Same inventories, every probability table redrawn from a Dirichlet.

    Continuous tables leave only structural ties: paths whose factors are a
    permutation of each other.
    """
    def draw(shape):
        return rng.dirichlet(np.ones(shape[-1]), size=shape[:-1])

    names = {"first": ("pi", "trans", "emit"), "second": ("pi", "trans", "trans3", "emit", "emit2"),
             "feature": ("pi", "trans_f", "emit_f")}[model.family]
    new = {name: draw(getattr(model, name).shape) for name in names}
    for emit, pref in (("emit", "prefix_emit"), ("emit2", "prefix_emit2"),
                       ("emit_f", "prefix_emit_f")):
        if emit in new:
            new[pref] = build_prefix_table(new[emit], model.lexicon)
    return replace(model, **new)


def path_factors(model, obs, tags, path):
    """Unweighted probability factors of ``path`` (state indices), in sequence order."""
    def emission(table, pref, token):
        if token in model.lexicon:
            return table[..., model.lexicon.word_index[token]]
        col = pref.column_for(token)
        return np.zeros(table.shape[:-1]) if col is None else col

    out = [model.pi[path[0]]]
    if model.family == "feature":
        tids = [model.tag_index(t) for t in tags]
        out.append(emission(model.emit_f, model.prefix_emit_f, obs[0])[tids[0], path[0]])
        for l in range(1, len(obs)):
            out.append(model.trans_f[tids[l - 1], path[l - 1], path[l]])
            out.append(emission(model.emit_f, model.prefix_emit_f, obs[l])[tids[l], path[l]])
        return out
    out.append(emission(model.emit, model.prefix_emit, obs[0])[path[0]])
    for l in range(1, len(obs)):
        if model.family == "first":
            out.append(model.trans[path[l - 1], path[l]])
            out.append(emission(model.emit, model.prefix_emit, obs[l])[path[l]])
        else:
            out.append(model.trans[path[0], path[1]] if l == 1 else
                       model.trans3[path[l - 2], path[l - 1], path[l]])
            out.append(emission(model.emit2, model.prefix_emit2, obs[l])[path[l - 1], path[l]])
    return out


def path_probability(model, obs, tags, path):
    """Probability-space score of ``path``, emissions unweighted."""
    p = 1.0
    for f in path_factors(model, obs, tags, path):
        p *= f
    return p


def exact_path_probability(model, obs, tags, path):
    """Same as :func:`path_probability` in exact rational arithmetic over the stored floats."""
    p = Fraction(1)
    for f in path_factors(model, obs, tags, path):
        p *= Fraction(float(f))
    return p
