"""Minimal delete/insert edit scripts and the roll-in generators used in training.

The action space has no substitution: replacing a token costs one deletion
plus one insertion. Gaps are indexed over the roll-in sentence, including
the gap before the first token and the gap after the last one, so an empty
roll-in has exactly one gap.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Hashable, Optional, Sequence

import numpy as np

from .corpus import PLD

LMAX = 255


class ScriptOverflowError(ValueError):
    def __init__(self, gap, count, lmax=LMAX):
        super().__init__(f"gap {gap} needs {count} insertions, above the limit of {lmax}")
        self.gap = gap
        self.count = count


@dataclass(frozen=True)
class EditLabels:
    """Supervision for one roll-in sentence.

    ``fills`` lists inserted tokens gap by gap. ``slot_fills`` holds, for each
    placeholder of the roll-in that is kept, the reference token it becomes;
    it is empty when the roll-in has no placeholders.
    """

    del_labels: tuple
    ins_counts: tuple
    fills: tuple
    slot_fills: tuple = ()

    @property
    def cost(self) -> int:
        return sum(self.del_labels) + sum(self.ins_counts)

    def gap_fills(self) -> list:
        out, k = [], 0
        for c in self.ins_counts:
            out.append(tuple(self.fills[k:k + c]))
            k += c
        return out

    def to_json(self, rollin) -> str:
        return json.dumps({
            "rollin": list(rollin),
            "del_labels": list(self.del_labels),
            "ins_counts": list(self.ins_counts),
            "fills": list(self.fills),
        }, ensure_ascii=False)


def levenshtein_distance(a: Sequence[Hashable], b: Sequence[Hashable]) -> int:
    """Edit distance with unit insert/delete costs (substitution costs 2)."""
    prev = list(range(len(b) + 1))
    for i in range(1, len(a) + 1):
        cur = [i] + [0] * len(b)
        ai = a[i - 1]
        for j in range(1, len(b) + 1):
            if ai == b[j - 1]:
                cur[j] = prev[j - 1]
            else:
                cur[j] = min(prev[j], cur[j - 1]) + 1
        prev = cur
    return prev[-1]


def _suffix_table(a, b, pld):
    n, m = len(a), len(b)
    S = [[0] * (m + 1) for _ in range(n + 1)]
    for j in range(m + 1):
        S[n][j] = m - j
    for i in range(n - 1, -1, -1):
        row, below = S[i], S[i + 1]
        row[m] = n - i
        ai = a[i]
        wild = pld is not None and ai == pld
        for j in range(m - 1, -1, -1):
            best = min(below[j], row[j + 1]) + 1
            if (wild or ai == b[j]) and below[j + 1] < best:
                best = below[j + 1]
            row[j] = best
    return S


def optimal_edit_labels(rollin: Sequence[Hashable], reference: Sequence[Hashable],
                        pld: Optional[Hashable] = None, lmax: int = LMAX) -> EditLabels:
    """Minimal-cost delete-then-insert script turning ``rollin`` into ``reference``.

    With ``pld`` set, placeholder tokens in the roll-in may be filled with any
    reference token at no cost (or deleted). The backtrace walks left to
    right and prefers keeping a token, then deleting, then inserting, so the
    leftmost match wins among equal-cost alignments.
    """
    a, b = list(rollin), list(reference)
    n, m = len(a), len(b)
    S = _suffix_table(a, b, pld)

    del_labels = [0] * n
    ins_counts = [0] * (n + 1)
    fills, slot_fills = [], []
    i = j = 0
    while i < n or j < m:
        cur = S[i][j]
        if i < n and j < m and (a[i] == b[j] or (pld is not None and a[i] == pld)) \
                and S[i + 1][j + 1] == cur:
            if pld is not None and a[i] == pld:
                slot_fills.append(b[j])
            i += 1
            j += 1
        elif i < n and S[i + 1][j] + 1 == cur:
            del_labels[i] = 1
            i += 1
        else:
            ins_counts[i] += 1
            fills.append(b[j])
            j += 1

    for gap, count in enumerate(ins_counts):
        if count > lmax:
            raise ScriptOverflowError(gap, count, lmax)
    return EditLabels(tuple(del_labels), tuple(ins_counts), tuple(fills), tuple(slot_fills))


def apply_edit(rollin: Sequence[Hashable], labels: EditLabels,
               pld: Optional[Hashable] = None) -> tuple:
    """Apply deletions, placeholder fills and gap insertions to ``rollin``."""
    n = len(rollin)
    if len(labels.del_labels) != n or len(labels.ins_counts) != n + 1:
        raise ValueError(
            f"labels shaped for length {len(labels.del_labels)} "
            f"({len(labels.ins_counts)} gaps), roll-in has length {n}"
        )
    if sum(labels.ins_counts) != len(labels.fills):
        raise ValueError("insertion counts do not match the number of fill tokens")
    if pld is not None:
        kept_slots = sum(1 for t, d in zip(rollin, labels.del_labels) if t == pld and not d)
        if labels.slot_fills and kept_slots != len(labels.slot_fills):
            raise ValueError(f"{kept_slots} kept placeholders but {len(labels.slot_fills)} slot fills")

    slots = iter(labels.slot_fills)
    gaps = labels.gap_fills()
    out = list(gaps[0])
    for k, tok in enumerate(rollin):
        if not labels.del_labels[k]:
            if pld is not None and tok == pld and labels.slot_fills:
                tok = next(slots)
            out.append(tok)
        out.extend(gaps[k + 1])
    return tuple(out)


def rollin_drop(reference: Sequence[Hashable], rng: np.random.Generator,
                ratio: Optional[float] = None):
    """Drop each token with probability ``r``, ``r`` drawn once from U[0, 1].

    Pass ``ratio`` to fix ``r`` instead of drawing it.
    """
    r = rng.random() if ratio is None else ratio
    mask = tuple(bool(x) for x in rng.random(len(reference)) < r)
    kept = tuple(t for t, dropped in zip(reference, mask) if not dropped)
    return kept, mask


def rollin_mask(reference: Sequence[Hashable], mask: Sequence[bool], pld: Hashable = PLD) -> tuple:
    if len(mask) != len(reference):
        raise ValueError(f"mask length {len(mask)} != reference length {len(reference)}")
    return tuple(pld if dropped else t for t, dropped in zip(reference, mask))


def softmax(scores, axis=-1):
    scores = np.asarray(scores, dtype=np.float64)
    z = scores - scores.max(axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


def sample_categorical(scores, rng: np.random.Generator) -> int:
    """Draw one class index from softmax(scores)."""
    scores = np.asarray(scores, dtype=np.float64)
    if scores.size == 0:
        raise ValueError("cannot sample from an empty score vector")
    if not np.all(np.isfinite(scores)):
        raise ValueError("scores must be finite")
    cdf = np.cumsum(softmax(scores))
    k = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
    return min(k, scores.size - 1)


def rollin_model_sample(token_scores, rng: np.random.Generator) -> tuple:
    """Per slot, the candidate index drawn from softmax of its scores."""
    return tuple(sample_categorical(s, rng) for s in token_scores)
