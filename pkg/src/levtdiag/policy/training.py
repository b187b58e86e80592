"""Imitation-learning training loop for the linear policy.

For every sentence and epoch:

* placeholder head: input is the reference with a random subset of tokens
  dropped (per-sentence rate ``r ~ U[0, 1]``), labels are the minimal
  insertion counts back to the reference;
* token head: the same dropped tokens replaced by ``<pld>``, labels are the
  dropped tokens;
* deletion head: the placeholders are filled by *sampling* the current token
  head, labels are the minimal deletions back to the reference.

The reported loss of a head is its summed cross-entropy per sentence,
averaged over the epoch; the total is the sum of the three heads.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ..corpus import BOS, EOS, PLD, RESERVED, ParallelCorpus, Vocab
from ..edit_oracle import (LMAX, optimal_edit_labels, rollin_drop, rollin_mask,
                           rollin_model_sample)
from .linear import LinearPolicy

log = logging.getLogger(__name__)

_N_RESERVED = len(RESERVED)


@dataclass
class TrainingBatch:
    deletion: list = field(default_factory=list)
    placeholder: list = field(default_factory=list)
    token: list = field(default_factory=list)

    def by_head(self):
        return {"del": self.deletion, "pld": self.placeholder, "tok": self.token}


def build_batch(model: LinearPolicy, source, reference, rng: np.random.Generator) -> TrainingBatch:
    source, reference = tuple(source), tuple(reference)
    dropped, mask = rollin_drop(reference, rng)
    counts = optimal_edit_labels(dropped, reference, lmax=10**9).ins_counts
    pld_state = (BOS,) + dropped + (EOS,)
    batch = TrainingBatch()
    batch.placeholder.append((pld_state, source, [min(c, LMAX) for c in counts]))

    masked = rollin_mask(reference, mask, PLD)
    if any(mask):
        tok_state = (BOS,) + masked + (EOS,)
        batch.token.append((tok_state, source, [t for t, m in zip(reference, mask) if m]))
        scores = model.score(tok_state, source, "tok")[:, _N_RESERVED:]
        sampled = iter(k + _N_RESERVED for k in rollin_model_sample(scores, rng))
        filled = tuple(next(sampled) if t == PLD else t for t in masked)
    else:
        filled = reference
    if filled:
        del_labels = optimal_edit_labels(filled, reference).del_labels
        batch.deletion.append(((BOS,) + filled + (EOS,), source, list(del_labels)))
    return batch


def train(model: LinearPolicy, corpus: ParallelCorpus, vocab: Vocab, seed: int = 0,
          epochs: int = 5, use_alt: bool = False, lr=None):
    """Train ``model`` in place; returns ``(model, curve)``.

    ``curve`` holds one dict per epoch with keys ``del``, ``pld``, ``tok`` and
    ``total``. With ``use_alt`` the alternate (e.g. distilled) targets are the
    references.
    """
    if len(corpus) == 0:
        raise ValueError("cannot train on an empty corpus")
    sources = [tuple(vocab.encode(s)) for s in corpus.source]
    refs = [tuple(vocab.encode(t)) for t in corpus.references(use_alt)]
    curve = []
    for epoch in range(epochs):
        order = np.random.default_rng([seed, epoch]).permutation(len(sources))
        sums = {"del": 0.0, "pld": 0.0, "tok": 0.0}
        for idx in order:
            rng = np.random.default_rng([seed, epoch, int(idx)])
            batch = build_batch(model, sources[idx], refs[idx], rng)
            for head, examples in batch.by_head().items():
                for state, src, labels in examples:
                    sums[head] += model.sgd_step(state, src, head, labels, lr)
        row = {h: v / len(sources) for h, v in sums.items()}
        row["total"] = row["del"] + row["pld"] + row["tok"]
        curve.append(row)
        log.info("epoch %d: del %.4f pld %.4f tok %.4f total %.4f",
                 epoch + 1, row["del"], row["pld"], row["tok"], row["total"])
    return model, curve
