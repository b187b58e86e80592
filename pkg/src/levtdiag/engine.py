"""Iterative refinement decoder: delete, insert placeholders, fill tokens.

Each round runs the three stages in order and records a snapshot after
each one (tags ``del_k``, ``pld_k``, ``tok_k``). Decoding stops when a round
leaves the sentence unchanged or ``max_rounds`` rounds have run.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .corpus import BOS, EOS, PLD, RESERVED, Vocab
from .edit_oracle import LMAX, sample_categorical

N_RESERVED = len(RESERVED)


@dataclass(frozen=True)
class DecodeOptions:
    """Knobs for one decoding run.

    ``external_length`` replaces the first placeholder prediction when
    decoding starts from an empty sentence. ``sample_seed`` switches the
    second-round placeholder stage to sampling from softmax(score).
    ``deletion_threshold`` replaces the deletion argmax by the softmax
    threshold rule in every round. ``max_len`` caps the content length
    after placeholder insertion; surplus placeholders are dropped from the
    rightmost gaps.
    """

    max_rounds: int = 10
    init: Optional[tuple] = None
    external_length: Optional[int] = None
    sample_seed: Optional[object] = None
    deletion_threshold: Optional[float] = None
    max_len: int = 1024

    def __post_init__(self):
        if self.max_rounds < 0:
            raise ValueError("max_rounds must be nonnegative")
        if self.deletion_threshold is not None and not 0.0 <= self.deletion_threshold <= 1.0:
            raise ValueError(f"deletion threshold {self.deletion_threshold} outside [0, 1]")
        if self.external_length is not None and self.external_length < 0:
            raise ValueError("external length must be nonnegative")


@dataclass(frozen=True)
class Stage:
    tag: str
    tokens: tuple  # with sentinels


@dataclass
class DecodeTrace:
    stages: list = field(default_factory=list)
    rounds: int = 0
    iterations: int = 0
    termination: str = "max_rounds"
    init: tuple = ()
    final: tuple = ()
    sid: object = None

    def stage(self, tag) -> Optional[tuple]:
        """Content tokens (sentinels stripped) of the stage ``tag``; ``final``/``init`` allowed."""
        if tag == "final":
            return self.final
        if tag == "init":
            return self.init
        for st in self.stages:
            if st.tag == tag:
                return st.tokens[1:-1]
        return None

    def tags(self):
        return [st.tag for st in self.stages]

    def pld_counts(self, round_no=1) -> Optional[list]:
        """Per-gap placeholder counts chosen in a round, over the post-deletion sentence."""
        snap = self.stage(f"pld_{round_no}")
        if snap is None:
            return None
        counts = [0]
        for t in snap:
            if t == PLD:
                counts[-1] += 1
            else:
                counts.append(0)
        return counts

    def to_json(self, vocab: Vocab) -> str:
        return json.dumps({
            "id": self.sid,
            "stages": [{"tag": s.tag, "tokens": list(vocab.decode(s.tokens))} for s in self.stages],
            "rounds": self.rounds,
            "iterations": self.iterations,
            "termination": self.termination,
            "final": list(vocab.decode(self.final)),
        }, ensure_ascii=False)


def threshold_delete(del_scores, tau: float) -> np.ndarray:
    """Delete token i iff softmax(del_scores[i])[1] > tau.

    Evaluated as ``delete - keep > logit(tau)``, which is the same rule
    without rounding in the softmax; tau = 0.5 is argmax with ties kept.
    """
    if not 0.0 <= tau <= 1.0:
        raise ValueError(f"threshold {tau} outside [0, 1]")
    s = np.asarray(del_scores, dtype=np.float64).reshape(-1, 2)
    if tau == 0.0:
        cut = -math.inf
    elif tau == 1.0:
        cut = math.inf
    else:
        cut = math.log(tau) - math.log1p(-tau)
    return (s[:, 1] - s[:, 0]) > cut


def argmax_delete(del_scores) -> np.ndarray:
    s = np.asarray(del_scores, dtype=np.float64).reshape(-1, 2)
    return s[:, 1] > s[:, 0]


def sample_gap_lengths(pld_scores, rng: np.random.Generator) -> list:
    """Per gap, a length drawn from softmax of its scores."""
    return [sample_categorical(row, rng) for row in np.atleast_2d(pld_scores)]


def _cap_counts(counts, budget):
    out = []
    for c in counts:
        c = max(0, min(int(c), budget))
        budget -= c
        out.append(c)
    return out


def _insert_placeholders(state, counts):
    out = [state[0]]
    for g, c in enumerate(counts):
        out.extend([PLD] * int(c))
        out.append(state[g + 1])
    return tuple(out)


def _fill(state, tok_scores):
    best = iter(np.argmax(np.asarray(tok_scores)[:, N_RESERVED:], axis=1) + N_RESERVED)
    return tuple(int(next(best)) if t == PLD else t for t in state)


def _deletion_stage(state, source, policy, options, sid):
    if len(state) <= 2:
        return state
    scores = policy.score(state, source, "del", sid=sid)
    if options.deletion_threshold is None:
        mask = argmax_delete(scores)
    else:
        mask = threshold_delete(scores, options.deletion_threshold)
    content = [t for t, d in zip(state[1:-1], mask) if not d]
    return (BOS,) + tuple(content) + (EOS,)


def _run(source, policy, options: DecodeOptions, sid, round1_counts=None) -> DecodeTrace:
    source = tuple(source)
    init = tuple(options.init or ())
    state = (BOS,) + init + (EOS,)
    trace = DecodeTrace(init=init, sid=sid)
    sample_rng = None
    if options.sample_seed is not None:
        sample_rng = np.random.default_rng(options.sample_seed)

    for k in range(1, options.max_rounds + 1):
        before = state
        state = _deletion_stage(state, source, policy, options, sid)
        trace.stages.append(Stage(f"del_{k}", state))

        if k == 1 and round1_counts is not None:
            counts = list(round1_counts)
        elif k == 1 and options.external_length is not None and not init:
            counts = [min(options.external_length, LMAX)]
        else:
            scores = policy.score(state, source, "pld", sid=sid)
            if k == 2 and sample_rng is not None:
                counts = sample_gap_lengths(scores, sample_rng)
            else:
                counts = [int(c) for c in np.argmax(scores, axis=1)]
        counts = _cap_counts(counts, max(options.max_len - (len(state) - 2), 0))
        state = _insert_placeholders(state, counts)
        trace.stages.append(Stage(f"pld_{k}", state))

        if PLD in state:
            state = _fill(state, policy.score(state, source, "tok", sid=sid))
        trace.stages.append(Stage(f"tok_{k}", state))

        trace.rounds = k
        if state == before:
            trace.termination = "fixpoint"
            break
        trace.iterations += 1

    trace.final = state[1:-1]
    return trace


def decode(source: Sequence[int], policy, options: DecodeOptions = DecodeOptions(),
           sid=None) -> DecodeTrace:
    """Refine from ``options.init`` (empty by default) until fixpoint or ``max_rounds``.

    ``trace.rounds`` counts executed rounds, including the final unchanged
    one; ``trace.iterations`` counts rounds that changed the sentence.
    """
    return _run(source, policy, options, sid)


def rank_length_candidates(pld_scores, k: int) -> list:
    """The ``k`` best placeholder-count assignments for one state.

    Rank 1 is the per-gap argmax. Later ranks change a single gap to a
    lower-scoring class, ordered by the score lost (then gap, then class).
    With one gap this is the score vector sorted in descending order.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    s = np.atleast_2d(np.asarray(pld_scores, dtype=np.float64))
    best = np.argmax(s, axis=1)
    base = [int(c) for c in best]
    perturbations = []
    for g in range(s.shape[0]):
        top = s[g, best[g]]
        for c in range(s.shape[1]):
            if c != best[g]:
                perturbations.append((float(top - s[g, c]), g, c))
    perturbations.sort()
    out = [base]
    for _, g, c in perturbations[:k - 1]:
        cand = list(base)
        cand[g] = c
        out.append(cand)
    return out


def decode_topk_lengths(source: Sequence[int], policy, k: int,
                        options: DecodeOptions = DecodeOptions(), sid=None) -> list:
    """One trace per first-round length candidate, best-scored first."""
    if k < 1:
        raise ValueError("k must be at least 1")
    if options.external_length is not None:
        raise ValueError("top-k lengths and an external length are mutually exclusive")
    if options.max_rounds == 0:
        return [_run(source, policy, options, sid)]
    source = tuple(source)
    state = (BOS,) + tuple(options.init or ()) + (EOS,)
    state = _deletion_stage(state, source, policy, options, sid)
    scores = policy.score(state, source, "pld", sid=sid)
    return [_run(source, policy, options, sid, round1_counts=c)
            for c in rank_length_candidates(scores, k)]
