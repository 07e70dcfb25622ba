"""Annotated recipe corpora: parsing, lexicon, prefixes and fold plans.

A corpus file is UTF-8 text with one token per line::

    token<TAB>pos_label<TAB>ing_state

Blank lines end sentences and lines starting with ``#`` are comments.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

STATE_SYMBOLS = ("0", "1", "2", "3")
FIELDS = ("token", "pos_label", "ing_state")


class CorpusParseError(ValueError):
    """Raised for malformed corpus documents; carries the 1-based line number."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


def continuation_violation(states):
    """Index of the first ``2`` that starts a sentence or follows a ``0``, else None."""
    for i, s in enumerate(states):
        if s == "2" and (i == 0 or states[i - 1] == "0"):
            return i
    return None


@dataclass(frozen=True)
class AnnotatedSentence:
    tokens: tuple
    pos_labels: tuple
    ing_states: tuple

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))
        object.__setattr__(self, "pos_labels", tuple(self.pos_labels))
        object.__setattr__(self, "ing_states", tuple(str(s) for s in self.ing_states))
        n = len(self.tokens)
        if n == 0:
            raise ValueError("sentence must contain at least one token")
        if len(self.pos_labels) != n or len(self.ing_states) != n:
            raise ValueError("tokens, pos_labels and ing_states must have equal length")
        bad = [s for s in self.ing_states if s not in STATE_SYMBOLS]
        if bad:
            raise ValueError(f"ingredient state {bad[0]!r} not in {{0,1,2,3}}")

    def __len__(self):
        return len(self.tokens)

    def column(self, name):
        if name == "token":
            return self.tokens
        if name == "pos_label":
            return self.pos_labels
        if name == "ing_state":
            return self.ing_states
        raise ValueError(f"unknown field {name!r}; expected one of {FIELDS}")


def _ordered_unique(items):
    return tuple(dict.fromkeys(items))


@dataclass(frozen=True)
class Corpus:
    sentences: tuple
    pos_tagset: tuple = None
    state_set: tuple = None
    provenance: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        sentences = tuple(self.sentences)
        object.__setattr__(self, "sentences", sentences)
        if self.pos_tagset is None:
            object.__setattr__(self, "pos_tagset", _ordered_unique(
                t for s in sentences for t in s.pos_labels))
        if self.state_set is None:
            object.__setattr__(self, "state_set", _ordered_unique(
                t for s in sentences for t in s.ing_states))

    def __len__(self):
        return len(self.sentences)

    @property
    def n_tokens(self):
        return sum(len(s) for s in self.sentences)

    def subset(self, indices):
        """Sub-corpus of the given sentence indices; inventories are recomputed."""
        return Corpus([self.sentences[i] for i in indices],
                      provenance={"source": self.provenance.get("source"), "subset": len(indices)})

    def sequences(self, name):
        return [s.column(name) for s in self.sentences]


def parse_corpus(text, source=None, strict=True):
    """Parse a corpus document.

    With ``strict`` a continuation state ``2`` at sentence start or right
    after a ``0`` is a parse error; otherwise it is counted in
    ``provenance["continuation_violations"]``.
    """
    sentences = []
    rows = []
    first_line = None
    comments = 0
    violations = 0

    def flush():
        nonlocal rows, violations
        if not rows:
            return
        toks, tags, states = zip(*(r[1] for r in rows))
        bad = continuation_violation(states)
        if bad is not None:
            if strict:
                raise CorpusParseError(
                    "continuation state 2 without a preceding ingredient start", rows[bad][0])
            violations += 1
        sentences.append(AnnotatedSentence(toks, tags, states))
        rows = []

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.rstrip("\r")
        if line.startswith("#"):
            comments += 1
            continue
        if not line.strip():
            flush()
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise CorpusParseError(f"expected 3 tab-separated fields, got {len(parts)}", lineno)
        token, tag, state = parts
        if not token or not tag:
            raise CorpusParseError("empty token or POS label", lineno)
        if state not in STATE_SYMBOLS:
            raise CorpusParseError(f"ingredient state {state!r} not in {{0,1,2,3}}", lineno)
        if first_line is None:
            first_line = lineno
        rows.append((lineno, (token, tag, state)))
    flush()

    if not sentences:
        raise CorpusParseError("no sentences")
    return Corpus(sentences, provenance={
        "source": str(source) if source is not None else None,
        "sentences": len(sentences),
        "tokens": sum(len(s) for s in sentences),
        "comment_lines": comments,
        "continuation_violations": violations,
    })


def read_corpus(path, strict=True):
    path = Path(path)
    return parse_corpus(path.read_text(encoding="utf-8"), source=path, strict=strict)


def format_corpus(corpus):
    """Serialize a corpus back to the file format (inverse of :func:`parse_corpus`)."""
    blocks = []
    for s in corpus.sentences:
        blocks.append("".join(f"{w}\t{t}\t{g}\n" for w, t, g in
                              zip(s.tokens, s.pos_labels, s.ing_states)))
    return "\n".join(blocks)


def extract_prefix(token):
    """First two characters (Unicode scalar values) of a token, or the token itself if shorter."""
    if not token:
        raise ValueError("cannot take the prefix of an empty token")
    return token[:2]


@dataclass(frozen=True)
class Lexicon:
    words: tuple
    word_index: dict = field(compare=False, repr=False, default=None)
    prefix_of: dict = field(compare=False, repr=False, default=None)

    def __post_init__(self):
        words = tuple(self.words)
        if len(set(words)) != len(words):
            raise ValueError("lexicon words must be distinct")
        object.__setattr__(self, "words", words)
        object.__setattr__(self, "word_index", {w: i for i, w in enumerate(words)})
        object.__setattr__(self, "prefix_of", {w: extract_prefix(w) for w in words})

    def __len__(self):
        return len(self.words)

    def __contains__(self, word):
        return word in self.word_index

    @property
    def prefixes(self):
        """Distinct prefix keys in first-appearance order of the words."""
        return _ordered_unique(self.prefix_of[w] for w in self.words)


def build_lexicon(corpus, field="token"):
    """Distinct values of ``field`` in first-appearance order."""
    if len(corpus) == 0:
        raise ValueError("cannot build a lexicon from an empty corpus")
    return Lexicon(_ordered_unique(w for seq in corpus.sequences(field) for w in seq))


@dataclass(frozen=True)
class FoldPlan:
    k: int
    seed: int
    assignment: tuple

    def fold(self, f):
        """Sentence indices of fold ``f`` in ascending order."""
        return [i for i, a in enumerate(self.assignment) if a == f]

    def folds(self):
        return [self.fold(f) for f in range(self.k)]

    def train_test(self, f):
        test = self.fold(f)
        held = set(test)
        return [i for i in range(len(self.assignment)) if i not in held], test


def split_folds(corpus, k, seed):
    """Seeded shuffle of sentence indices followed by round-robin fold assignment."""
    n = len(corpus) if not isinstance(corpus, int) else corpus
    if not isinstance(k, (int, np.integer)) or k < 2 or k > n:
        raise ValueError(f"fold count must satisfy 2 <= k <= {n}, got {k}")
    order = np.random.default_rng(seed).permutation(n)
    assignment = np.empty(n, dtype=int)
    assignment[order] = np.arange(n) % k
    return FoldPlan(int(k), seed, tuple(int(a) for a in assignment))


def oov_rate(corpus, lexicon):
    total = corpus.n_tokens
    unknown = sum(1 for s in corpus.sentences for w in s.tokens if w not in lexicon)
    return unknown / total if total else 0.0


def corpus_stats(corpus, reference=None):
    """Summary counts of a corpus, optionally with its OOV rate against ``reference``."""
    lexicon = build_lexicon(corpus)
    histogram = Counter(g for s in corpus.sentences for g in s.ing_states)
    stats = {
        "sentences": len(corpus),
        "tokens": corpus.n_tokens,
        "lexicon_size": len(lexicon),
        "prefixes": len(lexicon.prefixes),
        "pos_tags": len(corpus.pos_tagset),
        "states": len(corpus.state_set),
        "state_histogram": {g: histogram[g] for g in STATE_SYMBOLS},
        "continuation_violations": sum(
            continuation_violation(s.ing_states) is not None for s in corpus.sentences),
    }
    if reference is not None:
        ref_lex = reference if isinstance(reference, Lexicon) else build_lexicon(reference)
        stats["oov_rate"] = oov_rate(corpus, ref_lex)
    return stats
