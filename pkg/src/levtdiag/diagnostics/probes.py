"""Incomplete-sentence probes for the placeholder and token heads.

A probe deletes some tokens of a reference and keeps the exact gap counts and
fill tokens needed to restore it. Decoding from the probe's initialization
then measures how well a policy predicts the missing lengths and tokens.
"""
from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import asdict, dataclass
from typing import Optional, Sequence

import numpy as np

from ..corpus import is_subword_token
from ..edit_oracle import EditLabels, apply_edit, optimal_edit_labels

KINDS = ("subword", "fullword", "random")
_KIND_CODE = {k: i for i, k in enumerate(KINDS)}
SUBWORD_RATIOS = (0.05, 0.10, 0.15, 0.20, 0.25)
RANDOM_RATIOS = tuple(round(0.1 * k, 1) for k in range(1, 11))


class AnchorError(ValueError):
    pass


@dataclass(frozen=True)
class ProbeItem:
    sid: int
    reference: tuple
    init: tuple
    gold_counts: tuple
    gold_fills: tuple  # per gap, tuple of tokens
    gold_subword: tuple  # per gap, tuple of bools (class of each fill in the reference)
    kind: str
    ratio: float
    skipped: bool = False

    def labels(self) -> EditLabels:
        fills = tuple(t for g in self.gold_fills for t in g)
        return EditLabels((0,) * len(self.init), self.gold_counts, fills)

    def restored(self) -> tuple:
        return apply_edit(self.init, self.labels())


@dataclass(frozen=True)
class ProbeSet:
    kind: str
    ratio: float
    items: tuple

    @property
    def skipped(self):
        return [it.sid for it in self.items if it.skipped]

    def dump(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            for it in self.items:
                fh.write(json.dumps(asdict(it), ensure_ascii=False) + "\n")


def load_probe_set(path) -> ProbeSet:
    items = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            d = json.loads(line)
            items.append(ProbeItem(
                sid=d["sid"], reference=tuple(d["reference"]), init=tuple(d["init"]),
                gold_counts=tuple(d["gold_counts"]),
                gold_fills=tuple(tuple(g) for g in d["gold_fills"]),
                gold_subword=tuple(tuple(g) for g in d["gold_subword"]),
                kind=d["kind"], ratio=d["ratio"], skipped=d["skipped"],
            ))
    if not items:
        raise ValueError(f"{path}: empty probe set")
    return ProbeSet(items[0].kind, items[0].ratio, tuple(items))


def eligible_positions(sentence, kind):
    if kind == "random":
        return list(range(len(sentence)))
    want = kind == "subword"
    return [i for i in range(len(sentence)) if is_subword_token(sentence, i) == want]


def make_probe_item(sid, reference, kind, ratio, rng: np.random.Generator) -> ProbeItem:
    """Build one probe; gold labels follow the leftmost alignment of init in reference.

    With repeated tokens, the positions actually deleted and the leftmost
    alignment can put a fill in different gaps; both are minimal scripts. The
    leftmost one is kept as gold because the edit oracle and the anchor
    alignment of predictions both produce it.
    """
    reference = tuple(reference)
    eligible = eligible_positions(reference, kind)
    n_del = math.ceil(round(ratio * len(eligible), 9))
    chosen = set(int(i) for i in rng.choice(eligible, size=n_del, replace=False)) if n_del else set()
    init = tuple(t for i, t in enumerate(reference) if i not in chosen)

    segs = gap_segments(init, reference)
    item = ProbeItem(
        sid, reference, init,
        gold_counts=tuple(len(seg) for seg in segs),
        gold_fills=tuple(tuple(reference[p] for p in seg) for seg in segs),
        gold_subword=tuple(tuple(is_subword_token(reference, p) for p in seg) for seg in segs),
        kind=kind, ratio=ratio, skipped=not eligible,
    )

    # cross-check: position tracking, edit oracle and round trip must agree
    labels = optimal_edit_labels(init, reference)
    tracked = Counter(reference[i] for i in chosen)
    if (labels.cost != n_del or labels.ins_counts != item.gold_counts
            or Counter(labels.fills) != tracked or item.restored() != reference):
        raise RuntimeError(f"probe {sid}: gold labels disagree with the edit oracle")
    return item


def make_probe_set(references, kind: str, ratio: float, seed: int = 0) -> ProbeSet:
    """Delete ``ceil(ratio * eligible)`` eligible tokens per sentence.

    ``subword`` probes only delete subword tokens, ``fullword`` only
    single-token words, ``random`` any token. Sentences with no eligible
    token keep their full reference and are marked skipped.
    """
    if kind not in KINDS:
        raise ValueError(f"unknown probe kind {kind!r}")
    if not 0.0 < ratio <= 1.0:
        raise ValueError(f"probe ratio {ratio} outside (0, 1]")
    items = tuple(
        make_probe_item(i, ref, kind, ratio,
                        np.random.default_rng([seed, _KIND_CODE[kind], round(ratio * 1000), i]))
        for i, ref in enumerate(references)
    )
    return ProbeSet(kind, ratio, items)


def pld_accuracy(pred_counts: Sequence[int], gold_counts: Sequence[int],
                 mode: str = "elementwise") -> float:
    """Fraction of gaps whose predicted count equals the gold count.

    ``mode="nonzero"`` only credits exact matches at gaps with a nonzero
    gold count (still divided by all gaps).
    """
    if len(pred_counts) != len(gold_counts):
        raise ValueError(f"{len(pred_counts)} predicted gaps vs {len(gold_counts)} gold gaps")
    if not gold_counts:
        raise ValueError("no gaps")
    if mode == "elementwise":
        hits = sum(p == g for p, g in zip(pred_counts, gold_counts))
    elif mode == "nonzero":
        hits = sum(p == g for p, g in zip(pred_counts, gold_counts) if g != 0)
    else:
        raise ValueError(f"unknown accuracy mode {mode!r}")
    return hits / len(gold_counts)


def gap_segments(init: Sequence, sentence: Sequence) -> list:
    """Split ``sentence`` into the tokens inserted in each gap of ``init``.

    ``init`` is embedded leftmost-first; returns ``len(init) + 1`` lists of
    positions into ``sentence``.
    """
    segs, cur, k = [], [], 0
    for pos, tok in enumerate(sentence):
        if k < len(init) and tok == init[k]:
            segs.append(cur)
            cur = []
            k += 1
        else:
            cur.append(pos)
    if k < len(init):
        raise AnchorError(f"initialization token {init[k]!r} not found in order")
    segs.append(cur)
    return segs


def gap_fills(init: Sequence, sentence: Sequence) -> list:
    """Per gap, ``(token, is_subword)`` pairs of the tokens ``sentence`` adds to ``init``."""
    return [[(sentence[p], is_subword_token(sentence, p)) for p in seg]
            for seg in gap_segments(init, sentence)]


def matched_tokens(init: Sequence, predicted: Sequence, reference: Sequence,
                   denominator: str = "gold") -> Optional[float]:
    """Order-insensitive matches between predicted and gold fills, per gap.

    The sum over gaps is divided by the number of gaps with a nonzero gold
    fill (``denominator="gold"``) or by all gaps (``"all"``). Returns None when
    the denominator is zero.
    """
    try:
        pred = gap_segments(init, predicted)
        gold = gap_segments(init, reference)
    except AnchorError as exc:
        raise AnchorError(f"cannot align sentence {list(predicted)!r}: {exc}") from None
    total = 0
    for ps, gs in zip(pred, gold):
        inter = Counter(predicted[p] for p in ps) & Counter(reference[p] for p in gs)
        total += sum(inter.values())
    if denominator == "gold":
        denom = sum(1 for gs in gold if gs)
    elif denominator == "all":
        denom = len(gold)
    else:
        raise ValueError(f"unknown denominator {denominator!r}")
    return total / denom if denom else None


def _in_class(is_sub, cls):
    return cls == "all" or (cls == "subword") == is_sub


def fill_counts(pred_gaps, gold_gaps, cls: str = "all") -> tuple:
    """``(matched, predicted, gold)`` fill counts for one token class."""
    if cls not in ("subword", "fullword", "all"):
        raise ValueError(f"unknown token class {cls!r}")
    if len(pred_gaps) != len(gold_gaps):
        raise ValueError("predicted and gold gap lists differ in length")
    matched = n_pred = n_gold = 0
    for pg, gg in zip(pred_gaps, gold_gaps):
        p = Counter(t for t, s in pg if _in_class(s, cls))
        g = Counter(t for t, s in gg if _in_class(s, cls))
        matched += sum((p & g).values())
        n_pred += sum(p.values())
        n_gold += sum(g.values())
    return matched, n_pred, n_gold


def fill_precision_recall(pred_gaps, gold_gaps, cls: str = "all") -> tuple:
    """Multiset precision and recall of fills; None where a denominator is zero.

    Both arguments are per-gap lists of ``(token, is_subword)`` pairs.
    """
    matched, n_pred, n_gold = fill_counts(pred_gaps, gold_gaps, cls)
    return (matched / n_pred if n_pred else None, matched / n_gold if n_gold else None)
