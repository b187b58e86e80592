import numpy as np
import pytest

from levtdiag.corpus import ParallelCorpus, Vocab

# word -> BPE pieces; a few multi-piece words so subword metrics are exercised
LEXICON = [
    "the", "a", "of", "to", "is", "cat", "dog", "sat", "mat", "house", "green",
    "run@@ s", "walk@@ ed", "ab@@ out", "in@@ ter@@ est", "qu@@ iet@@ ly", "tree",
    "river", "stone", "light",
]
STOPWORDS = ["the", "a", "of", "to", "is"]


def desk_sentences(n, seed, min_words=2, max_words=9):
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        k = int(rng.integers(min_words, max_words + 1))
        words = [LEXICON[i] for i in rng.integers(0, len(LEXICON), size=k)]
        out.append(tuple(" ".join(words).split(" ")))
    return out


def desk_corpus(n, seed=0):
    """Toy translation corpus: the source is the target with a marker on every token."""
    tgt = desk_sentences(n, seed)
    src = [tuple("S_" + t for t in s) for s in tgt]
    return ParallelCorpus(tuple(src), tuple(tgt))


def write_corpus(path, corpus, alt=None):
    path.mkdir(parents=True, exist_ok=True)
    (path / "src.txt").write_text("".join(" ".join(s) + "\n" for s in corpus.source), encoding="utf-8")
    (path / "tgt.txt").write_text("".join(" ".join(s) + "\n" for s in corpus.target), encoding="utf-8")
    if alt is not None:
        (path / "alt.txt").write_text("".join(" ".join(s) + "\n" for s in alt), encoding="utf-8")
    (path / "stop.txt").write_text("\n".join(STOPWORDS) + "\n", encoding="utf-8")
    return path


def copy_task(n_train=200, n_test=100, vocab_size=20, seed=0):
    toks = [f"w{i}" for i in range(vocab_size)]

    def make(n, rng):
        return tuple(tuple(toks[k] for k in rng.integers(0, vocab_size, size=int(rng.integers(3, 11))))
                     for _ in range(n))

    train = make(n_train, np.random.default_rng(seed))
    test = make(n_test, np.random.default_rng(seed + 1))
    return ParallelCorpus(train, train), test, Vocab(toks)


@pytest.fixture(scope="session")
def small_corpus():
    return desk_corpus(40, seed=3)


@pytest.fixture
def corpus_dir(tmp_path, small_corpus):
    alt = desk_sentences(len(small_corpus), seed=99)
    return write_corpus(tmp_path / "data", small_corpus, alt)
