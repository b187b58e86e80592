"""Parallel corpus ingestion, the shared vocabulary and BPE word conventions.

Sentences are stored as tuples of surface tokens. A token whose surface ends
with ``@@`` continues into the next token, so ``"a@@ b@@ c"`` is a single
word made of three subword tokens.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, NamedTuple, Optional, Sequence

BPE_MARK = "@@"

BOS, EOS, PLD, UNK = 0, 1, 2, 3
RESERVED = ("<s>", "</s>", "<pld>", "<unk>")

Sentence = tuple  # tuple[str, ...] of surface tokens


class CorpusError(ValueError):
    pass


class AlignmentError(CorpusError):
    def __init__(self, path_a, count_a, path_b, count_b):
        super().__init__(
            f"line count mismatch: {path_a} has {count_a} lines, {path_b} has {count_b}"
        )
        self.counts = (count_a, count_b)


class CorpusFormatError(CorpusError):
    def __init__(self, path, lineno, reason):
        super().__init__(f"{path}:{lineno}: {reason}")
        self.lineno = lineno


@dataclass(frozen=True)
class ParallelCorpus:
    source: tuple
    target: tuple
    alt_target: Optional[tuple] = None

    def __post_init__(self):
        if len(self.source) != len(self.target):
            raise AlignmentError("source", len(self.source), "target", len(self.target))
        if self.alt_target is not None and len(self.alt_target) != len(self.source):
            raise AlignmentError("source", len(self.source), "alt_target", len(self.alt_target))

    def __len__(self):
        return len(self.source)

    def references(self, use_alt=False):
        """Targets used as training references; the alternate list when ``use_alt``."""
        if use_alt:
            if self.alt_target is None:
                raise CorpusError("no alternate target list attached to this corpus")
            return self.alt_target
        return self.target


def split_tokens(line: str) -> Sentence:
    return tuple(tok for tok in line.strip().split(" ") if tok)


def _read_lines(path) -> list:
    raw = Path(path).read_bytes()
    lines = raw.split(b"\n")
    if lines and lines[-1] == b"":
        lines.pop()
    out = []
    for lineno, line in enumerate(lines, start=1):
        try:
            out.append(line.decode("utf-8").rstrip("\r"))
        except UnicodeDecodeError as exc:
            raise CorpusFormatError(path, lineno, f"invalid UTF-8 ({exc.reason})") from None
    return out


def read_sentences(path) -> list:
    """One sentence per line; blank lines are kept as empty sentences."""
    return [split_tokens(line) for line in _read_lines(path)]


def load_parallel_corpus(src_path, tgt_path, alt_tgt_path=None) -> ParallelCorpus:
    """Load aligned source/target files, plus an optional alternate target file.

    The alternate file holds distilled references or translation-memory
    sentences, depending on the caller. Pairs whose source or target line is
    blank are dropped together so indices stay aligned.
    """
    files = [src_path, tgt_path] + ([alt_tgt_path] if alt_tgt_path is not None else [])
    columns = [_read_lines(p) for p in files]
    for path, col in zip(files[1:], columns[1:]):
        if len(col) != len(columns[0]):
            raise AlignmentError(src_path, len(columns[0]), path, len(col))

    src, tgt, alt = [], [], []
    for i in range(len(columns[0])):
        row = [split_tokens(col[i]) for col in columns]
        if not row[0] or not row[1]:
            continue
        src.append(row[0])
        tgt.append(row[1])
        if alt_tgt_path is not None:
            alt.append(row[2])
    return ParallelCorpus(tuple(src), tuple(tgt), tuple(alt) if alt_tgt_path is not None else None)


class Vocab:
    """Bijection between surface forms and dense integer ids.

    Ids 0-3 are reserved for ``<s>``, ``</s>``, ``<pld>`` and ``<unk>``.
    """

    def __init__(self, surfaces: Iterable[str]):
        self._surfaces = list(RESERVED)
        for s in surfaces:
            if s in RESERVED:
                continue
            self._surfaces.append(s)
        self._ids = {s: i for i, s in enumerate(self._surfaces)}
        if len(self._ids) != len(self._surfaces):
            raise ValueError("duplicate surface in vocabulary")

    def __len__(self):
        return len(self._surfaces)

    def __contains__(self, surface):
        return surface in self._ids

    def __eq__(self, other):
        return isinstance(other, Vocab) and self._surfaces == other._surfaces

    @property
    def surfaces(self) -> list:
        return list(self._surfaces)

    def id_of(self, surface: str) -> int:
        return self._ids.get(surface, UNK)

    def surface_of(self, i: int) -> str:
        return self._surfaces[i]

    def encode(self, tokens: Sequence[str]) -> list:
        return [self._ids.get(t, UNK) for t in tokens]

    def decode(self, ids: Sequence[int]) -> Sentence:
        return tuple(self._surfaces[i] for i in ids)


def build_vocab(corpus: ParallelCorpus, cap: int) -> Vocab:
    """Keep the ``cap - 4`` most frequent surfaces over all sides of the corpus.

    Frequency ties go to the surface seen first.
    """
    if cap <= len(RESERVED):
        raise ValueError(f"vocabulary cap must exceed {len(RESERVED)}, got {cap}")
    if len(corpus) == 0:
        raise CorpusError("cannot build a vocabulary from an empty corpus")

    counts = Counter()
    first_seen = {}
    sides = [corpus.source, corpus.target]
    if corpus.alt_target is not None:
        sides.append(corpus.alt_target)
    for side in sides:
        for sent in side:
            for tok in sent:
                if tok in RESERVED:
                    continue
                counts[tok] += 1
                first_seen.setdefault(tok, len(first_seen))
    ranked = sorted(counts, key=lambda s: (-counts[s], first_seen[s]))
    return Vocab(ranked[: cap - len(RESERVED)])


def has_continuation(token: str) -> bool:
    return token.endswith(BPE_MARK)


def is_subword_token(sentence: Sequence[str], index: int) -> bool:
    """True if the token is part of a multi-piece word.

    The final piece counts too: it follows a token carrying the marker.
    """
    if not 0 <= index < len(sentence):
        raise IndexError(f"token index {index} out of range for length {len(sentence)}")
    if has_continuation(sentence[index]):
        return True
    return index > 0 and has_continuation(sentence[index - 1])


def word_groups(sentence: Sequence[str]) -> list:
    """Index ranges ``(start, stop)`` of each BPE word, left to right."""
    groups = []
    start = 0
    for i, tok in enumerate(sentence):
        if not has_continuation(tok):
            groups.append((start, i + 1))
            start = i + 1
    if start < len(sentence):
        groups.append((start, len(sentence)))
    return groups


class MergedWords(NamedTuple):
    words: list
    dangling: bool


def merge_to_words(sentence: Sequence[str]) -> MergedWords:
    """Join BPE pieces into words.

    A trailing piece that still carries the marker becomes a word on its own
    (marker stripped) and the result is flagged ``dangling``.
    """
    words = []
    for start, stop in word_groups(sentence):
        words.append("".join(t[: -len(BPE_MARK)] if has_continuation(t) else t
                             for t in sentence[start:stop]))
    dangling = bool(sentence) and has_continuation(sentence[-1])
    return MergedWords(words, dangling)


@dataclass(frozen=True)
class StopList:
    words: frozenset = frozenset()

    def __contains__(self, word):
        return word in self.words

    def __len__(self):
        return len(self.words)


def load_stoplist(path) -> StopList:
    return StopList(frozenset(w.strip() for w in _read_lines(path) if w.strip()))


def strip_stopwords(sentence: Sequence[str], stoplist: StopList) -> Sentence:
    """Remove every BPE word whose merged surface is a stop word."""
    if not stoplist.words:
        return tuple(sentence)
    kept = []
    for start, stop in word_groups(sentence):
        piece = sentence[start:stop]
        if merge_to_words(piece).words[0] not in stoplist:
            kept.extend(piece)
    return tuple(kept)


def build_lexicon(sentences: Iterable[Sequence[str]]) -> frozenset:
    """Word-level lexicon (BPE merged) of a list of sentences."""
    lex = set()
    for sent in sentences:
        lex.update(merge_to_words(sent).words)
    return frozenset(lex)
