"""Per-iteration length, duplication, invalid-word and subword statistics."""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

from ..corpus import StopList, is_subword_token, merge_to_words, strip_stopwords

_STAGE_ORDER = {"del": 0, "pld": 1, "tok": 2}
_TAG = re.compile(r"^(del|pld|tok)_(\d+)$")


@dataclass(frozen=True)
class LengthRow:
    tag: str
    mean_len: float
    mean_len_nostop: float
    n: int


def tag_sort_key(tag):
    if tag == "init":
        return (-1, 0)
    if tag == "final":
        return (10**9, 0)
    m = _TAG.match(tag)
    if m is None:
        return (10**9 - 1, tag)
    return (int(m.group(2)), _STAGE_ORDER[m.group(1)])


def _surface_stages(trace, vocab, tags):
    for tag in tags:
        snap = trace.stage(tag)
        if snap is not None:
            yield tag, vocab.decode(snap)


def _collect_tags(traces, tags):
    if tags is not None:
        return list(tags)
    seen = {t for tr in traces for t in tr.tags()}
    return sorted(seen, key=tag_sort_key) + ["final"]


def iteration_length_stats(traces, vocab, stoplist: Optional[StopList] = None,
                           tags: Optional[Iterable[str]] = None) -> dict:
    """Mean BPE length per stage tag, with and without stop words.

    Placeholders count toward length at ``pld_k`` stages. Tags absent from
    every trace are left out.
    """
    if not traces:
        raise ValueError("no traces")
    stoplist = stoplist or StopList()
    tags = _collect_tags(traces, tags)
    sums = {}
    for tr in traces:
        for tag, toks in _surface_stages(tr, vocab, tags):
            s = sums.setdefault(tag, [0, 0, 0])
            s[0] += len(toks)
            s[1] += len(strip_stopwords(toks, stoplist))
            s[2] += 1
    return {tag: LengthRow(tag, a / n, b / n, n) for tag, (a, b, n) in sums.items()}


def count_duplicates(sentence: Sequence[str], stoplist: Optional[StopList] = None) -> int:
    """Positions whose token equals the one just before it."""
    if stoplist is not None:
        sentence = strip_stopwords(sentence, stoplist)
    return sum(1 for i in range(1, len(sentence)) if sentence[i] == sentence[i - 1])


def duplication_stats(traces, vocab, stoplist: Optional[StopList] = None,
                      tags: Optional[Iterable[str]] = None) -> dict:
    """Mean duplicate count per tag: ``tag -> (mean, mean_nostop, n)``."""
    if tags is None:
        tags = [t for t in _collect_tags(traces, None) if not t.startswith("pld_")]
    stoplist = stoplist or StopList()
    sums = {}
    for tr in traces:
        for tag, toks in _surface_stages(tr, vocab, tags):
            s = sums.setdefault(tag, [0, 0, 0])
            s[0] += count_duplicates(toks)
            s[1] += count_duplicates(toks, stoplist)
            s[2] += 1
    return {tag: (a / n, b / n, n) for tag, (a, b, n) in sums.items()}


def count_invalid_words(hypotheses, lexicon) -> tuple:
    """``(invalid words, sentences with at least one)`` against a word lexicon."""
    total = sentences = 0
    for hyp in hypotheses:
        bad = sum(1 for w in merge_to_words(hyp).words if w not in lexicon)
        total += bad
        sentences += bad > 0
    return total, sentences


def subword_stats(hypotheses) -> tuple:
    """``(subword ratio, mean subword tokens, mean tokens)`` per sentence."""
    hypotheses = list(hypotheses)
    if not hypotheses:
        raise ValueError("empty corpus")
    sub = tok = 0
    for hyp in hypotheses:
        tok += len(hyp)
        sub += sum(1 for i in range(len(hyp)) if is_subword_token(hyp, i))
    ratio = sub / tok if tok else 0.0
    return ratio, sub / len(hypotheses), tok / len(hypotheses)
