from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass

from ..corpus import merge_to_words

MAX_ORDER = 4


@dataclass(frozen=True)
class BleuReport:
    precisions: tuple  # p1..p4 in percent
    brevity_penalty: float
    score: float
    hyp_len: int
    ref_len: int

    def format(self) -> str:
        ps = "/".join(f"{p:.1f}" for p in self.precisions)
        return f"{self.score:.4f} {ps} BP = {self.brevity_penalty:.3f}"


def _ngrams(tokens, n):
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def bleu(hypotheses, references, level: str = "bpe") -> BleuReport:
    """Corpus BLEU with clipped n-gram precisions up to 4 and no smoothing.

    ``level="word"`` merges BPE pieces into words before counting.
    """
    if len(hypotheses) != len(references):
        raise ValueError(f"{len(hypotheses)} hypotheses vs {len(references)} references")
    if not hypotheses:
        raise ValueError("empty hypothesis corpus")
    if level not in ("bpe", "word"):
        raise ValueError(f"unknown BLEU level {level!r}")

    matches = [0] * MAX_ORDER
    totals = [0] * MAX_ORDER
    c = r = 0
    for hyp, ref in zip(hypotheses, references):
        if level == "word":
            hyp, ref = merge_to_words(hyp).words, merge_to_words(ref).words
        hyp, ref = list(hyp), list(ref)
        c += len(hyp)
        r += len(ref)
        for n in range(1, MAX_ORDER + 1):
            h, g = _ngrams(hyp, n), _ngrams(ref, n)
            matches[n - 1] += sum(min(cnt, g[ng]) for ng, cnt in h.items())
            totals[n - 1] += max(len(hyp) - n + 1, 0)

    precisions = tuple(100.0 * m / t if t else 0.0 for m, t in zip(matches, totals))
    if c == 0:
        bp = 0.0
    else:
        bp = 1.0 if c >= r else math.exp(1.0 - r / c)
    if min(matches) == 0:
        score = 0.0
    else:
        log_p = math.fsum(math.log(m / t) for m, t in zip(matches, totals)) / MAX_ORDER
        score = 100.0 * bp * math.exp(log_p)
    return BleuReport(precisions, bp, score, c, r)
