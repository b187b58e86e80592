"""Acceptance criteria, one check per criterion.

Each check prints a single ``PASS``/``FAIL`` line. Run with
``pytest tests/test_acceptance.py -s`` to see them, or directly with
``python tests/test_acceptance.py`` for just the summary lines.
"""
import contextlib
import io
import sys
import tempfile
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from conftest import copy_task, desk_corpus, desk_sentences, write_corpus  # noqa: E402
from oracles import brute_bleu, brute_edit_cost, finite_difference_errors  # noqa: E402

from levtdiag.cli import main  # noqa: E402
from levtdiag.corpus import ParallelCorpus, build_vocab  # noqa: E402
from levtdiag.diagnostics import bleu, count_duplicates, subword_stats  # noqa: E402
from levtdiag.diagnostics.probes import (RANDOM_RATIOS, SUBWORD_RATIOS, make_probe_set,  # noqa: E402
                                         matched_tokens, pld_accuracy)
from levtdiag.edit_oracle import apply_edit, optimal_edit_labels  # noqa: E402
from levtdiag.engine import argmax_delete, decode, threshold_delete  # noqa: E402
from levtdiag.lengthpred import DegenerateDesignError, fit_linreg  # noqa: E402
from levtdiag.policy import LinearPolicy, build_batch, make_oracle_policy, train  # noqa: E402


def report(number, ok, detail):
    print(f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}")
    return ok


def criterion_1():
    rng = np.random.default_rng(2024)
    start = time.perf_counter()
    cost_ok = trip_ok = 0
    n = 10000
    for _ in range(n):
        a = tuple(rng.integers(0, 8, size=int(rng.integers(0, 13))).tolist())
        b = tuple(rng.integers(0, 8, size=int(rng.integers(0, 13))).tolist())
        lab = optimal_edit_labels(a, b)
        cost_ok += lab.cost == brute_edit_cost(a, b)
        trip_ok += apply_edit(a, lab) == b
    secs = time.perf_counter() - start
    ok = cost_ok == n and trip_ok == n and secs < 60
    return report(1, ok, f"edit oracle cost {cost_ok}/{n}, round trip {trip_ok}/{n}, {secs:.1f}s (< 60s)")


def criterion_2():
    corpus = desk_corpus(1000, seed=11)
    vocab = build_vocab(corpus, 32000)
    refs = {i: tuple(vocab.encode(t)) for i, t in enumerate(corpus.target)}
    policy = make_oracle_policy(refs, len(vocab))
    exact = fixpoint = 0
    hyps = []
    for i, s in enumerate(corpus.source):
        tr = decode(vocab.encode(s), policy, sid=i)
        exact += tr.final == refs[i]
        fixpoint += tr.termination == "fixpoint" and tr.rounds <= 2
        hyps.append(vocab.decode(tr.final))
    rep = bleu(hyps, list(corpus.target))
    word = bleu(hyps, list(corpus.target), "word")
    ok = (exact == 1000 and fixpoint == 1000 and rep.score == 100.0 and rep.brevity_penalty == 1.0
          and word.score == 100.0)
    return report(2, ok, f"oracle decode exact {exact}/1000, fixpoint<=2 rounds {fixpoint}/1000, "
                         f"BLEU {rep.score:.4f}, BP {rep.brevity_penalty}")


def criterion_3():
    rng = np.random.default_rng(9)
    model = LinearPolicy(16, hash_bits=9)
    for h in ("del", "pld", "tok"):
        model.weights[h][:] = 0.1 * rng.normal(size=model.D)
        model.bias[h][:] = 0.1 * rng.normal(size=model.n_classes(h))
    examples = {"del": [], "pld": [], "tok": []}
    for k in range(4):
        batch = build_batch(model, (4, 5, 6 + k, 7), (8, 9, 10 + k, 11, 12), np.random.default_rng(k))
        for h, ex in batch.by_head().items():
            examples[h] += ex
    worst = {}
    for h, ex in examples.items():
        errs = finite_difference_errors(model, ex, h, rng, n_coords=10)
        worst[h] = (max(errs), len(errs))
    ok = all(e < 1e-4 and n >= 10 for e, n in worst.values())
    detail = ", ".join(f"{h} max rel err {e:.1e} over {n} coords" for h, (e, n) in worst.items())
    return report(3, ok, detail)


def criterion_4():
    start = time.perf_counter()
    corpus, held_out, vocab = copy_task(n_train=200, n_test=100, vocab_size=20, seed=0)
    model = LinearPolicy(len(vocab))
    _, curve = train(model, corpus, vocab, seed=0, epochs=5)
    exact = 0
    for s in held_out:
        ids = tuple(vocab.encode(s))
        exact += decode(ids, model).final == ids
    secs = time.perf_counter() - start
    first, last = curve[0]["total"], curve[-1]["total"]
    ok = last < first and exact >= 90 and secs < 120
    return report(4, ok, f"copy task loss {first:.3f} -> {last:.3f}, held-out exact {exact}/100, "
                         f"{secs:.1f}s (< 120s)")


def criterion_5():
    rng = np.random.default_rng(5)
    subset_ok = tie_ok = 0
    for _ in range(1000):
        scores = rng.normal(scale=3.0, size=(int(rng.integers(1, 20)), 2))
        ties = rng.random(len(scores)) < 0.2
        scores[ties, 1] = scores[ties, 0]
        t1, t2 = sorted(rng.random(2))
        m1, m2 = threshold_delete(scores, t1), threshold_delete(scores, t2)
        subset_ok += bool(np.all(m1[m2])) if t1 < t2 else True
        tie_ok += bool(np.array_equal(threshold_delete(scores, 0.5), argmax_delete(scores)))
    ok = subset_ok == 1000 and tie_ok == 1000
    return report(5, ok, f"threshold subset {subset_ok}/1000, tau=0.5 equals argmax {tie_ok}/1000")


def criterion_6():
    dup = count_duplicates("a b b b c".split())
    sub = subword_stats([("a@@", "b@@", "c")])[1]
    matched = matched_tokens("a d".split(), "a c b d".split(), "a b c d".split())
    acc = pld_accuracy([0, 0, 2, 0], [0, 1, 2, 0])
    alt = pld_accuracy([0, 0, 2, 0], [0, 1, 2, 0], mode="nonzero")
    ok = dup == 2 and sub == 3 and matched == 2 and acc == 0.75 and alt == 0.25
    return report(6, ok, f"duplication {dup}, subwords {sub:g}, matched {matched:g}, "
                         f"pld acc {acc} (nonzero reading {alt})")


def criterion_7():
    rng = np.random.default_rng(77)
    agree = 0
    for _ in range(50):
        refs = [tuple(rng.choice(list("abcdef"), size=int(rng.integers(1, 15)))) for _ in range(8)]
        hyps = [tuple(t for t in r if rng.random() > 0.2) + tuple(rng.choice(list("abc"), size=int(rng.integers(0, 3))))
                for r in refs]
        rep = bleu(hyps, refs)
        p, bp, score = brute_bleu(hyps, refs)
        agree += (all(abs(x - y) <= 1e-9 for x, y in zip(rep.precisions, p))
                  and abs(rep.brevity_penalty - bp) <= 1e-9 and abs(rep.score - score) <= 1e-9)
    same = bleu(refs, refs)
    ok = agree == 50 and same.score == 100.0 and same.brevity_penalty == 1.0
    return report(7, ok, f"BLEU agrees with brute force on {agree}/50 corpora; identity BLEU {same.score}, "
                         f"BP {same.brevity_penalty}")


def criterion_8():
    rng = np.random.default_rng(8)
    worst_coef = worst_r2 = 0.0
    for _ in range(20):
        a, b = float(rng.integers(1, 5)), float(rng.integers(-3, 12))
        xs = rng.integers(4, 80, size=300)  # keeps a*x+b >= 1
        corpus = ParallelCorpus(tuple(("s",) * int(x) for x in xs),
                                tuple(("t",) * int(a * x + b) for x in xs))
        m = fit_linreg(corpus)
        worst_coef = max(worst_coef, abs(m.coef - a), abs(m.intercept - b))
        worst_r2 = max(worst_r2, abs(m.r_squared - 1.0))
    try:
        fit_linreg(ParallelCorpus((("s",) * 4, ("s",) * 4), (("t",), ("t",) * 3)))
        rejected = False
    except DegenerateDesignError:
        rejected = True
    ok = worst_coef < 1e-6 and worst_r2 < 1e-9 and rejected
    return report(8, ok, f"linreg max param err {worst_coef:.1e}, max |R2-1| {worst_r2:.1e}, "
                         f"degenerate rejected {rejected}")


def criterion_9():
    refs = desk_sentences(300, seed=21)
    total = good = 0
    for kind, grid in (("subword", SUBWORD_RATIOS), ("fullword", SUBWORD_RATIOS), ("random", RANDOM_RATIOS)):
        for ratio in grid:
            ps = make_probe_set(refs, kind, ratio, seed=0)
            total += 1
            good += all(it.restored() == ref for it, ref in zip(ps.items, refs))
    return report(9, good == total, f"probe sets round-tripping {good}/{total}")


def _snapshot(directory):
    return {p.relative_to(directory).as_posix(): p.read_bytes()
            for p in sorted(directory.rglob("*")) if p.is_file()}


def criterion_10(tmp_dir):
    tmp_dir = Path(tmp_dir)
    data = write_corpus(tmp_dir / "data", desk_corpus(30, seed=4), desk_sentences(30, seed=5))
    args = ["--src", data / "src.txt", "--tgt", data / "tgt.txt", "--alt-tgt", data / "alt.txt", "--seed", 3]
    commands = {
        "train": ["--epochs", 1, "--hash-bits", 10],
        "decode": ["--stopwords", data / "stop.txt"],
        "probe-length": [],
        "probe-subword": [],
        "probe-deletion": [],
        "corrupt": ["--kind", "no-accuracy"],
    }
    same = 0
    for name, extra in commands.items():
        snaps = []
        for k in range(2):
            out = tmp_dir / f"{name}_{k}"
            with contextlib.redirect_stdout(io.StringIO()):
                rc = main([str(a) for a in [name, *args, *extra, "--out-dir", out]])
                if name == "decode":
                    rc |= main(["report", "--out-dir", str(out)])
            snaps.append(_snapshot(out) if rc == 0 else None)
        same += snaps[0] is not None and snaps[0] == snaps[1]
    return report(10, same == len(commands), f"byte-identical reruns {same}/{len(commands)} commands "
                                             "(report included with decode)")


@pytest.mark.parametrize("number", range(1, 10))
def test_criterion(number):
    assert globals()[f"criterion_{number}"]()


def test_criterion_10(tmp_path):
    assert criterion_10(tmp_path)


if __name__ == "__main__":
    results = [globals()[f"criterion_{k}"]() for k in range(1, 10)]
    with tempfile.TemporaryDirectory() as tmp:
        results.append(criterion_10(tmp))
    sys.exit(0 if all(results) else 1)
