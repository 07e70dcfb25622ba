"""Viterbi decoding for the three model families, plus an exhaustive oracle.

Scoring rule shared by every decoder (and by :func:`brute_force_decode`):

* probability space: ``pi[s1] * e1[s1] * prod_l A_l[s_{l-1}, s_l] * e_l[s_l]``;
* log space: ``log pi[s1] + log e1[s1] + sum_l (log A_l + w_l * log e_l)``
  where ``w_l`` is ``lambda_`` for in-vocabulary tokens and 1 for
  out-of-vocabulary tokens (unless ``lambda_on_oov``).  The first position is
  never weighted.

Out-of-vocabulary tokens read the prefix table of the emission they replace;
a prefix never seen in training contributes zero mass.  Among equally
scored paths the lexicographically smallest state-index sequence wins.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .corpus import extract_prefix
from .tables import FeatureConditionedModel, FirstOrderModel, SecondOrderModel

SPACES = ("probability", "log")
OOV_POLICIES = ("prefix_table", "error")
UNKNOWN_TAG_POLICIES = ("error", "unseen")
BRUTE_FORCE_LIMIT = 10**7


class DecodeError(RuntimeError):
    pass


class UndecodableError(DecodeError):
    """Every path has zero probability at ``position`` (0-based)."""

    def __init__(self, position):
        self.position = position
        super().__init__(f"undecodable: every path has zero probability at position {position}")


class OOVError(DecodeError):
    def __init__(self, token, position):
        self.token = token
        self.position = position
        super().__init__(f"out-of-vocabulary token {token!r} at position {position}")


@dataclass(frozen=True)
class DecodeRequest:
    observations: tuple
    tags: tuple = None
    lambda_: float = 4.0
    space: str = "log"
    oov_policy: str = "prefix_table"
    lambda_on_oov: bool = False
    fallback: bool = True
    unknown_tags: str = "error"

    def __post_init__(self):
        object.__setattr__(self, "observations", tuple(self.observations))
        if not self.observations:
            raise ValueError("observations must be nonempty")
        if self.tags is not None:
            object.__setattr__(self, "tags", tuple(self.tags))
            if len(self.tags) != len(self.observations):
                raise ValueError("tags and observations must have equal length")
        if not self.lambda_ >= 1:
            raise ValueError(f"lambda must be >= 1, got {self.lambda_}")
        if self.space not in SPACES:
            raise ValueError(f"space must be one of {SPACES}")
        if self.oov_policy not in OOV_POLICIES:
            raise ValueError(f"oov_policy must be one of {OOV_POLICIES}")
        if self.unknown_tags not in UNKNOWN_TAG_POLICIES:
            raise ValueError(f"unknown_tags must be one of {UNKNOWN_TAG_POLICIES}")


@dataclass(frozen=True)
class DecodeResult:
    states: tuple
    score: float
    oov_mask: tuple
    used_fallback: bool = False
    path: tuple = field(default=(), repr=False)
    fallback_positions: tuple = ()


def _emissions(model, table, prefix_table, req, tags_idx=None):
    """Per-position emission slices and the OOV mask.

    ``table`` has the word on its last axis; with ``tags_idx`` the slice is
    taken at the pinned tag first.
    """
    cols, mask = [], []
    for pos, token in enumerate(req.observations):
        w = model.lexicon.word_index.get(token)
        if w is not None:
            col = table[..., w]
            mask.append(False)
        else:
            if req.oov_policy == "error":
                raise OOVError(token, pos)
            col = prefix_table.column_for(token)
            if col is None:
                col = np.zeros(table.shape[:-1])
            mask.append(True)
        if tags_idx is not None:
            t = tags_idx[pos]
            col = col[t] if t is not None else np.zeros(col.shape[1:])
        cols.append(col)
    return cols, tuple(mask)


def _weights(req, oov_mask):
    """Per-position log-emission weights; position 0 is never weighted."""
    w = [req.lambda_ if (not oov or req.lambda_on_oov) else 1.0 for oov in oov_mask]
    w[0] = 1.0
    return w


def _log(x):
    with np.errstate(divide="ignore"):
        return np.log(x)


def _dead(delta, log_space):
    return not np.any(delta > -np.inf) if log_space else not np.any(delta > 0)


_NO_RANK = np.iinfo(np.int64).max
_NEAR = 1e-9


def _select(cand, rank):
    """Best predecessor along axis 0 of ``cand``.

    Exact ties go to the predecessor whose kept prefix has the smallest
    lexicographic ``rank``.  Also reports whether a strictly smaller
    candidate came within rounding distance of the best one.
    """
    best = cand.max(axis=0)
    tied = cand == best
    ptr = np.where(tied, rank[:, None], _NO_RANK).argmin(axis=0)
    with np.errstate(invalid="ignore"):
        gap = np.where(tied | ~np.isfinite(best), np.inf, best - cand)
    near = bool(np.any(gap <= _NEAR * np.maximum(np.abs(best), 1e-300)))
    return ptr, best, near


def _rerank(prev_rank, labels):
    """Ranks of the extended prefixes, ordered by (kept prefix rank, new label)."""
    order = np.lexsort((labels, prev_rank))
    rank = np.empty(order.size, dtype=np.int64)
    rank[order] = np.arange(order.size)
    return rank


class _Lattice:
    """Chain lattice with position-dependent contexts.

    ``trans[l]`` (C_{l-1} x C_l) scores the move into position ``l``
    (``trans[0]`` is unused), ``emis[l]`` is the C_l-vector of emissions,
    ``labels[l]`` maps each context to the state it emits and
    ``open_trans[l]`` is the uniform replacement used when every path dies.
    """

    def __init__(self, init, trans, emis, weights, log_space, labels, open_trans):
        self.init, self.trans, self.emis = init, list(trans), list(emis)
        self.weights, self.log_space = weights, log_space
        self.labels, self.open_trans = labels, open_trans
        if log_space:
            self.comb = lambda d, a: d[:, None] + _log(a)
            self.emit = lambda d, e, w: d + w * _log(e)
        else:
            self.comb = lambda d, a: d[:, None] * a
            self.emit = lambda d, e, w: d * e

    def start(self):
        return self.emit(_log(self.init) if self.log_space else self.init, self.emis[0], 1.0)

    def step(self, l, delta):
        return self.comb(delta, self.trans[l])

    def complete(self, l, delta):
        """Best final score reachable from ``delta`` at position ``l``."""
        for m in range(l + 1, len(self.emis)):
            delta = self.emit(self.step(m, delta).max(axis=0), self.emis[m], self.weights[m])
        return delta.max()


def _lattice_viterbi(lat, uniform, fallback):
    """Viterbi over a :class:`_Lattice` with the uniform fallback.

    Returns the lexicographically smallest optimal label path, its score and
    the positions where the fallback fired.  Tables replaced by the fallback
    are written back into ``lat`` so the exact reconstruction sees them.
    """
    n_pos = len(lat.emis)
    fallback_at = []
    delta = lat.start()
    if _dead(delta, lat.log_space):
        if not fallback:
            raise UndecodableError(0)
        fallback_at.append(0)
        lat.emis[0] = np.full(len(delta), uniform)
        delta = lat.start()
    ptrs = []
    rank = _rerank(np.zeros(len(delta), dtype=np.int64), lat.labels[0])
    near_tie = False
    for l in range(1, n_pos):
        ptr, best, near = _select(lat.step(l, delta), rank)
        new = lat.emit(best, lat.emis[l], lat.weights[l])
        if _dead(new, lat.log_space):
            if not fallback:
                raise UndecodableError(l)
            fallback_at.append(l)
            lat.emis[l] = np.full(len(new), uniform)
            new = lat.emit(best, lat.emis[l], lat.weights[l])
            if _dead(new, lat.log_space):
                lat.trans[l] = lat.open_trans(l)
                ptr, best, near = _select(lat.step(l, delta), rank)
                new = lat.emit(best, lat.emis[l], lat.weights[l])
        near_tie |= near
        ptrs.append(ptr)
        rank = _rerank(rank[ptr], lat.labels[l])
        delta = new
    score = delta.max()
    last = int(np.where(delta == score, rank, _NO_RANK).argmin())
    if near_tie:
        contexts = _exact_path(lat, score)
    else:
        contexts = [last]
        for ptr in reversed(ptrs):
            contexts.append(int(ptr[contexts[-1]]))
        contexts.reverse()
    path = tuple(int(lat.labels[l][c]) for l, c in enumerate(contexts))
    return path, float(score), tuple(fallback_at)


def _exact_path(lat, target):
    """Smallest label path scoring exactly ``target``, chosen one position at a time.

    Used when a discarded prefix was within rounding distance of a kept one:
    the two may still round to the same final score.
    """
    dead = -np.inf if lat.log_space else 0.0
    contexts = []
    scores = lat.start()
    for l in range(len(lat.emis)):
        if l:
            prev = contexts[-1]
            moved = lat.comb(scores[prev:prev + 1], lat.trans[l][prev:prev + 1])[0]
            scores = lat.emit(moved, lat.emis[l], lat.weights[l])
        for c in np.lexsort((np.arange(len(scores)), lat.labels[l])):
            if scores[c] == dead:
                continue
            single = np.full(len(scores), dead)
            single[c] = scores[c]
            if lat.complete(l, single) == target:
                contexts.append(int(c))
                break
    return contexts


def _chain(init, trans, emis, weights, log_space, uniform, fallback):
    n = len(init)
    labels = [np.arange(n)] * len(emis)
    lat = _Lattice(init, trans, emis, weights, log_space, labels,
                   lambda l: np.full((n, n), 1.0 / n))
    return _lattice_viterbi(lat, uniform, fallback)


def _result(model, path, score, mask, fallback_at):
    return DecodeResult(states=tuple(model.states[i] for i in path), score=score, oov_mask=mask,
                        used_fallback=bool(fallback_at), path=path,
                        fallback_positions=fallback_at)


def viterbi_first_order(model, req):
    """Most probable state sequence under a :class:`FirstOrderModel`."""
    emis, mask = _emissions(model, model.emit, model.prefix_emit, req)
    path, score, fb = _chain(model.pi, [model.trans] * len(emis), emis, _weights(req, mask),
                             req.space == "log", 1.0 / max(model.n_words, 1), req.fallback)
    return _result(model, path, score, mask, fb)


def _pinned_tags(model, req):
    """Tag indices; with ``unknown_tags="unseen"`` a tag outside the tagset maps to
    None and behaves like an unseen context (all-zero rows)."""
    if req.tags is None:
        raise ValueError("feature-conditioned decoding needs one POS tag per token")
    if req.unknown_tags == "unseen":
        return [model.tag_index(t) if t in model.tags else None for t in req.tags]
    return [model.tag_index(t) for t in req.tags]


def _tag_trans(model, t):
    return model.trans_f[t] if t is not None else np.zeros((model.n_states, model.n_states))


def _feature_decode(model, req, log_space):
    tids = _pinned_tags(model, req)
    emis, mask = _emissions(model, model.emit_f, model.prefix_emit_f, req, tags_idx=tids)
    # transition into position l is conditioned on the tag at l - 1
    trans = [None] + [_tag_trans(model, tids[l - 1]) for l in range(1, len(tids))]
    path, score, fb = _chain(model.pi, trans, emis, _weights(req, mask), log_space,
                             1.0 / max(model.n_words, 1), req.fallback)
    return _result(model, path, score, mask, fb)


def viterbi_feature_conditioned(model, req):
    """Tag-pinned modified second-order Viterbi in probability space.

    Only the slice of the lattice at the supplied tag is evaluated at each
    position, which is all that termination and backtracking ever read.
    """
    return _feature_decode(model, req, log_space=False)


def viterbi_feature_conditioned_log(model, req):
    """Log-space variant with emission weight ``req.lambda_``."""
    return _feature_decode(model, req, log_space=True)


def _pair_tables(model):
    """Trigram and bigram transitions laid out over (previous, current) pair contexts."""
    n = model.n_states
    first = np.zeros((n, n * n))
    first_mask = np.zeros((n, n * n))
    later = np.zeros((n * n, n * n))
    later_mask = np.zeros((n * n, n * n))
    for i in range(n):
        first[i, i * n:(i + 1) * n] = model.trans[i]
        first_mask[i, i * n:(i + 1) * n] = 1.0
        for j in range(n):
            later[i * n + j, j * n:(j + 1) * n] = model.trans3[i, j]
            later_mask[i * n + j, j * n:(j + 1) * n] = 1.0
    return first, later, first_mask / n, later_mask / n


def viterbi_second_order(model, req):
    """Viterbi over (previous, current) state pairs with trigram transitions.

    Position 1 uses ``pi`` and the unigram emission, position 2 the bigram
    transition and pair emission, later positions the trigram tables.
    """
    n = model.n_states
    emis0, mask = _emissions(model, model.emit, model.prefix_emit, req)
    emis2, _ = _emissions(model, model.emit2, model.prefix_emit2, req)
    first, later, open_first, open_later = _pair_tables(model)
    n_pos = len(emis0)
    trans = [None, first] + [later] * (n_pos - 2)
    emis = [emis0[0]] + [e.ravel() for e in emis2[1:]]
    labels = [np.arange(n)] + [np.tile(np.arange(n), n)] * (n_pos - 1)
    lat = _Lattice(model.pi, trans[:n_pos], emis, _weights(req, mask), req.space == "log",
                   labels, lambda l: open_first if l == 1 else open_later)
    path, score, fb = _lattice_viterbi(lat, 1.0 / max(model.n_words, 1), req.fallback)
    return _result(model, path, score, mask, fb)


def decode(model, req):
    """Dispatch on the model family and ``req.space``."""
    if isinstance(model, FeatureConditionedModel):
        if req.space == "log":
            return viterbi_feature_conditioned_log(model, req)
        return viterbi_feature_conditioned(model, req)
    if isinstance(model, SecondOrderModel):
        return viterbi_second_order(model, req)
    if isinstance(model, FirstOrderModel):
        return viterbi_first_order(model, req)
    raise TypeError(f"cannot decode with {type(model).__name__}")


# -- exhaustive oracle ------------------------------------------------------


def _oracle_column(model, table, prefix_table, token):
    if token in model.lexicon.word_index:
        return table[..., model.lexicon.word_index[token]], False
    p = prefix_table.index(extract_prefix(token))
    if p is None:
        return np.zeros(prefix_table.table.shape[:-1]), True
    return prefix_table.table[..., p], True


def _enumerate(n, length, chunk=1 << 18):
    total = n ** length
    place = n ** np.arange(length - 1, -1, -1)
    for lo in range(0, total, chunk):
        idx = np.arange(lo, min(lo + chunk, total))
        yield lo, (idx[:, None] // place) % n


def brute_force_decode(model, req):
    """Score every state sequence and return the best one.

    Uses the same scoring rule as the Viterbi variant selected by the model
    family and ``req.space`` (feature-conditioned models need ``req.tags``).
    Ties resolve to the lexicographically smallest state-index sequence.
    No fallback: an all-zero instance raises :class:`UndecodableError`.
    """
    n = model.n_states
    obs = req.observations
    length = len(obs)
    if n ** length > BRUTE_FORCE_LIMIT:
        raise ValueError(f"{n}^{length} sequences exceed the brute-force limit")
    log_space = req.space == "log"
    lam = req.lambda_

    if isinstance(model, FeatureConditionedModel):
        tids = _pinned_tags(model, req)
        cols = [_oracle_column(model, model.emit_f, model.prefix_emit_f, w) for w in obs]
        e1 = [c[t] if t is not None else np.zeros(n) for (c, _), t in zip(cols, tids)]
        oov = tuple(o for _, o in cols)
    else:
        cols = [_oracle_column(model, model.emit, model.prefix_emit, w) for w in obs]
        e1 = [c for c, _ in cols]
        oov = tuple(o for _, o in cols)
        if isinstance(model, SecondOrderModel):
            e2 = [_oracle_column(model, model.emit2, model.prefix_emit2, w)[0] for w in obs]
    if req.oov_policy == "error" and any(oov):
        pos = oov.index(True)
        raise OOVError(obs[pos], pos)

    def weight(l):
        if l == 0:
            return 1.0
        return lam if (not oov[l] or req.lambda_on_oov) else 1.0

    def factors(seqs):
        """Yield the per-step factors of every sequence in scoring order."""
        s0 = seqs[:, 0]
        yield model.pi[s0]
        yield e1[0][s0], 0
        for l in range(1, length):
            prev, cur = seqs[:, l - 1], seqs[:, l]
            if isinstance(model, FeatureConditionedModel):
                yield _tag_trans(model, tids[l - 1])[prev, cur]
                yield e1[l][cur], l
            elif isinstance(model, SecondOrderModel):
                if l == 1:
                    yield model.trans[prev, cur]
                else:
                    yield model.trans3[seqs[:, l - 2], prev, cur]
                yield e2[l][prev, cur], l
            else:
                yield model.trans[prev, cur]
                yield e1[l][cur], l

    best_score, best_idx = None, None
    # best prefix score after each position's emission, for locating dead ends
    prefix_alive = np.zeros(length, dtype=bool)
    for lo, seqs in _enumerate(n, length):
        score = None
        for f in factors(seqs):
            emission = isinstance(f, tuple)
            if emission:
                vals, l = f
                term = weight(l) * _log(vals) if log_space else vals
            else:
                term = _log(f) if log_space else f
            if score is None:
                score = term
            else:
                score = score + term if log_space else score * term
            if emission:
                m = score.max()
                prefix_alive[l] |= bool(m > -np.inf) if log_space else bool(m > 0)
        i = int(score.argmax())
        if best_score is None or score[i] > best_score:
            best_score, best_idx = score[i], lo + i

    if not prefix_alive[-1]:
        raise UndecodableError(int(np.argmin(prefix_alive)))
    seq = tuple(int(best_idx // n ** (length - 1 - l)) % n for l in range(length))
    return DecodeResult(states=tuple(model.states[i] for i in seq), score=float(best_score),
                        oov_mask=oov, used_fallback=False, path=seq)
