"""Command-line experiments: train, decode, probes, corruptions and reports.

Every command writes tab-separated reports (header row first) and, where
relevant, JSON-lines traces into ``--out-dir``. A single ``--seed`` drives
all randomness; per-sentence generators are derived from ``(seed, purpose,
sentence index)`` so results do not depend on processing order.

Options may also come from a flat ``key=value`` file given with
``--config``; command-line flags take precedence.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .corpus import (PLD, CorpusError, StopList, Vocab, build_lexicon, build_vocab,
                     load_parallel_corpus, load_stoplist, merge_to_words, strip_stopwords)
from .diagnostics import (bleu, corrupt_no_accuracy, corrupt_no_fluency, count_duplicates,
                          count_invalid_words,
                          duplication_stats, fill_precision_recall, gap_fills, gap_segments,
                          iteration_length_stats, make_probe_set, matched_tokens,
                          pld_accuracy, subword_stats)
from .diagnostics.probes import KINDS, RANDOM_RATIOS, SUBWORD_RATIOS, AnchorError
from .diagnostics.stats import tag_sort_key
from .engine import DecodeOptions, decode, decode_topk_lengths
from .lengthpred import PREDICTORS, fit_linreg, fit_ratio, predict_length
from .policy import (LinearPolicy, PolicyContractError, load_model, make_oracle_policy,
                     save_model, train)

log = logging.getLogger("levtdiag")

# purpose codes for split seeds
_SEED_SAMPLE, _SEED_NOACC, _SEED_NOFLU = 3, 11, 12


# ---------------------------------------------------------------- output helpers

def _fmt(v):
    if v is None:
        return "NA"
    if isinstance(v, float):
        return f"{v:.6f}"
    return str(v)


def write_tsv(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\t".join(header) + "\n")
        for row in rows:
            fh.write("\t".join(_fmt(v) for v in row) + "\n")
    log.info("wrote %s", path)


def write_lines(path, sentences):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for s in sentences:
            fh.write(" ".join(s) + "\n")


def _mean(xs):
    xs = [x for x in xs if x is not None]
    return sum(xs) / len(xs) if xs else None


# ---------------------------------------------------------------- experiment setup

class Experiment:
    """Corpus, vocabulary and policy shared by the decoding commands."""

    def __init__(self, args):
        self.args = args
        self.out = Path(args.out_dir)
        self.out.mkdir(parents=True, exist_ok=True)
        self.corpus = load_parallel_corpus(args.src, args.tgt, args.alt_tgt)
        if len(self.corpus) == 0:
            raise CorpusError("corpus is empty")
        if args.train_src or args.train_tgt:
            if not (args.train_src and args.train_tgt):
                raise CorpusError("--train-src and --train-tgt go together")
            self.train_corpus = load_parallel_corpus(args.train_src, args.train_tgt)
        else:
            self.train_corpus = self.corpus
        self.stoplist = load_stoplist(args.stopwords) if args.stopwords else StopList()

        if args.policy == "linear":
            if not args.model:
                raise PolicyContractError("--policy linear needs --model")
            if not Path(args.model).exists():
                raise FileNotFoundError(f"model file not found: {args.model}")
            self.policy = load_model(args.model)
            if self.policy.vocab is None:
                raise PolicyContractError(f"{args.model} carries no vocabulary")
            self.vocab = Vocab(self.policy.vocab)
        else:
            self.vocab = build_vocab(self.corpus, args.vocab_cap)
            refs = {i: self.vocab.encode(t) for i, t in enumerate(self.corpus.target)}
            self.policy = make_oracle_policy(refs, len(self.vocab))

        self.sources = [self.vocab.encode(s) for s in self.corpus.source]
        self.references = list(self.corpus.target)

    def init_for(self, i):
        if self.args.init == "tm":
            if self.corpus.alt_target is None:
                raise CorpusError("--init tm needs --alt-tgt with the translation-memory sentences")
            return tuple(self.vocab.encode(self.corpus.alt_target[i]))
        return ()

    def options(self, i, **over):
        a = self.args
        kw = dict(
            max_rounds=a.max_rounds,
            init=self.init_for(i),
            deletion_threshold=a.del_threshold,
            sample_seed=[a.seed, _SEED_SAMPLE, i] if a.length_sample else None,
        )
        kw.update(over)
        return DecodeOptions(**kw)

    def words(self, ids):
        return self.vocab.decode(ids)

    def stage_hyps(self, traces, tag):
        return [self.words(tr.stage(tag) if tr.stage(tag) is not None else tr.final)
                for tr in traces]

    def bleu_of(self, traces, tag, level=None):
        level = level or self.args.bleu_level
        return bleu(self.stage_hyps(traces, tag), self.references, level)


def _stage_len(traces, tag, fallback="final"):
    lens = []
    for tr in traces:
        snap = tr.stage(tag)
        if snap is None and fallback:
            snap = tr.stage(fallback)
        if snap is not None:
            lens.append(len(snap))
    return _mean(lens)


# ---------------------------------------------------------------- commands

def cmd_train(args):
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    corpus = load_parallel_corpus(args.src, args.tgt, args.alt_tgt)
    vocab = build_vocab(corpus, args.vocab_cap)
    model = LinearPolicy(len(vocab), args.hash_bits, args.lr, vocab.surfaces)
    use_alt = args.alt_tgt is not None and not args.no_alt_refs
    _, curve = train(model, corpus, vocab, seed=args.seed, epochs=args.epochs, use_alt=use_alt)
    model_path = out / "model.bin"
    try:
        save_model(model, model_path)
    except OSError as exc:
        raise OSError(f"cannot write model to {model_path}: {exc.strerror}") from None
    write_tsv(out / "loss_curve.tsv", ["epoch", "del_loss", "pld_loss", "tok_loss", "total_loss"],
              [[k + 1, r["del"], r["pld"], r["tok"], r["total"]] for k, r in enumerate(curve)])


def _decode_all(exp, **over):
    traces = []
    for i, src in enumerate(exp.sources):
        traces.append(decode(src, exp.policy, exp.options(i, **over), sid=i))
    return traces


def _external_lengths(exp, kind):
    model = None
    if kind == "ratio":
        model = fit_ratio(exp.train_corpus)
    elif kind == "linreg":
        model = fit_linreg(exp.train_corpus)
    return [predict_length(kind, exp.corpus.source[i], model, exp.references[i])
            for i in range(len(exp.sources))]


def cmd_decode(args):
    exp = Experiment(args)
    if args.length_pred:
        kinds = args.length_pred.split(",")
        if len(kinds) != 1:
            raise ValueError("decode takes a single --length-pred")
        lengths = _external_lengths(exp, kinds[0])
        traces = [decode(src, exp.policy, exp.options(i, external_length=lengths[i]), sid=i)
                  for i, src in enumerate(exp.sources)]
    else:
        traces = _decode_all(exp)
    _write_decode_reports(exp, traces)


def _write_decode_reports(exp, traces):
    out = exp.out
    with open(out / "traces.jsonl", "w", encoding="utf-8", newline="\n") as fh:
        for tr in traces:
            fh.write(tr.to_json(exp.vocab) + "\n")

    rows = []
    for tag in ("tok_1", "final"):
        for level in ("bpe", "word"):
            r = exp.bleu_of(traces, tag, level)
            rows.append([tag, level, r.score, *r.precisions, r.brevity_penalty, r.hyp_len, r.ref_len])
    write_tsv(out / "bleu.tsv", ["stage", "level", "bleu", "p1", "p2", "p3", "p4", "bp",
                                 "hyp_len", "ref_len"], rows)

    stats = iteration_length_stats(traces, exp.vocab, exp.stoplist)
    ref_len = _mean([len(r) for r in exp.references])
    ref_nostop = _mean([len(strip_stopwords(r, exp.stoplist)) for r in exp.references])
    rows = [["ref", ref_len, ref_nostop, len(exp.references)]]
    for tag in sorted(stats, key=tag_sort_key):
        s = stats[tag]
        rows.append([tag, s.mean_len, s.mean_len_nostop, s.n])
    write_tsv(out / "lengths.tsv", ["tag", "mean_len", "mean_len_nostop", "n"], rows)

    dups = duplication_stats(traces, exp.vocab, exp.stoplist)
    rows = [["ref", _mean([count_duplicates(r) for r in exp.references]),
             _mean([count_duplicates(r, exp.stoplist) for r in exp.references]),
             len(exp.references)]]
    for tag in sorted(dups, key=tag_sort_key):
        m, mn, n = dups[tag]
        rows.append([tag, m, mn, n])
    write_tsv(out / "duplicates.tsv", ["tag", "mean_dup", "mean_dup_nostop", "n"], rows)

    finals = [exp.words(tr.final) for tr in traces]
    lexicon = build_lexicon(exp.train_corpus.target)
    n_bad, n_sent = count_invalid_words(finals, lexicon)
    n_words = sum(len(merge_to_words(h).words) for h in finals)
    write_tsv(out / "invalid_words.tsv",
              ["invalid_words", "total_words", "sentences_with_invalid", "sentence_ratio"],
              [[n_bad, n_words, n_sent, n_sent / len(finals)]])

    rows = []
    for name, sents in (("ref", exp.references), ("final", finals)):
        ratio, sub, tok = subword_stats(sents)
        rows.append([name, ratio, sub, tok])
    write_tsv(out / "subwords.tsv", ["set", "sub_ratio", "sub_num", "tok_num"], rows)

    fix = sum(tr.termination == "fixpoint" for tr in traces)
    write_tsv(out / "summary.tsv", ["sentences", "iter_num", "rounds", "fixpoint_ratio"],
              [[len(traces), _mean([t.iterations for t in traces]),
                _mean([t.rounds for t in traces]), fix / len(traces)]])


_LENGTH_HEADER = ["setting", "iter_num", "pld_1_len", "pld_2_len", "final_len",
                  "tok_1_bleu", "tok_1_bp", "final_bleu", "final_bp"]


def _length_row(exp, name, traces):
    tok1 = exp.bleu_of(traces, "tok_1")
    fin = exp.bleu_of(traces, "final")
    return [name, _mean([t.iterations for t in traces]), _stage_len(traces, "pld_1"),
            _stage_len(traces, "pld_2"), _stage_len(traces, "final"),
            tok1.score, tok1.brevity_penalty, fin.score, fin.brevity_penalty]


def cmd_probe_length(args):
    exp = Experiment(args)
    k = args.topk
    per_rank = [[] for _ in range(k)]
    for i, src in enumerate(exp.sources):
        traces = decode_topk_lengths(src, exp.policy, k, exp.options(i), sid=i)
        for r in range(k):
            # fewer candidates than k: repeat the last available one
            per_rank[r].append(traces[min(r, len(traces) - 1)])
    rows = [_length_row(exp, f"rank{r + 1}", per_rank[r]) for r in range(k)]

    kinds = args.length_pred.split(",") if args.length_pred else list(PREDICTORS)
    for kind in kinds:
        lengths = _external_lengths(exp, kind)
        traces = [decode(src, exp.policy, exp.options(i, external_length=lengths[i]), sid=i)
                  for i, src in enumerate(exp.sources)]
        rows.append(_length_row(exp, kind, traces))
    write_tsv(exp.out / "probe_length.tsv", _LENGTH_HEADER, rows)

    ratio = fit_ratio(exp.train_corpus)
    try:
        lr = fit_linreg(exp.train_corpus)
        lr_row = [lr.coef, lr.intercept, lr.r_squared]
    except ValueError:
        lr_row = [None, None, None]
    write_tsv(exp.out / "length_models.tsv", ["ratio", "coef", "intercept", "r2"],
              [[ratio.ratio, *lr_row]])


def _pld_counts_over_init(init, snapshot):
    segs = gap_segments(init, snapshot)
    return [sum(1 for p in seg if snapshot[p] == PLD) for seg in segs]


def _probe_row(exp, probes, args):
    traces = []
    for it in probes.items:
        src = exp.sources[it.sid]
        init = tuple(exp.vocab.encode(it.init))
        traces.append(decode(src, exp.policy, exp.options(it.sid, init=init), sid=it.sid))

    acc, fails = [], 0
    stage_gaps = {"tok_1": ([], [], [], 0), "final": ([], [], [], 0)}
    for it, tr in zip(probes.items, traces):
        if it.skipped:
            continue
        init = tuple(exp.vocab.encode(it.init))
        pld1 = tr.stage("pld_1")
        try:
            pred = _pld_counts_over_init(init, pld1)
        except AnchorError:
            fails += 1
            pred = [-1] * len(it.gold_counts)
        acc.append(pld_accuracy(pred, it.gold_counts, args.pld_acc_mode))

        gold = [list(zip(f, c)) for f, c in zip(it.gold_fills, it.gold_subword)]
        for tag, (pg, gg, matched, nfail) in list(stage_gaps.items()):
            hyp = exp.words(tr.stage(tag) if tr.stage(tag) is not None else tr.final)
            try:
                pred_gaps = gap_fills(it.init, hyp)
                m = matched_tokens(it.init, hyp, it.reference, args.match_denominator)
            except AnchorError:
                stage_gaps[tag] = (pg, gg, matched, nfail + 1)
                continue
            pg.extend(pred_gaps)
            gg.extend(gold)
            matched.append(m)

    used = [it for it in probes.items if not it.skipped]
    row = [probes.kind, probes.ratio, len(probes.items), len(probes.items) - len(used), fails,
           _mean(acc)]
    for tag in ("tok_1", "final"):
        pg, gg, matched, nfail = stage_gaps[tag]
        row.extend([nfail, _mean(matched)])
        for cls in ("subword", "fullword", "all"):
            row.extend(fill_precision_recall(pg, gg, cls))
        hyps = [exp.stage_hyps([tr], tag)[0] for it, tr in zip(probes.items, traces) if not it.skipped]
        refs = [it.reference for it in used]
        row.append(bleu(hyps, refs, "word").score if hyps else None)
    return row


def _probe_header():
    head = ["kind", "ratio", "sentences", "skipped", "pld_anchor_fail", "pld_acc"]
    for tag in ("tok_1", "final"):
        head += [f"{tag}_anchor_fail", f"{tag}_matched"]
        for cls in ("sub", "word", "all"):
            head += [f"{tag}_prec_{cls}", f"{tag}_rec_{cls}"]
        head.append(f"{tag}_word_bleu")
    return head


def _ratio_list(text, default):
    if not text:
        return list(default)
    return [float(x) for x in text.split(",")]


def cmd_probe_subword(args):
    exp = Experiment(args)
    kinds = args.kinds.split(",") if args.kinds else list(KINDS)
    probe_dir = exp.out / "probes"
    probe_dir.mkdir(exist_ok=True)
    rows = []
    for kind in kinds:
        if kind not in KINDS:
            raise ValueError(f"unknown probe kind {kind!r}")
        grid = _ratio_list(args.random_ratios, RANDOM_RATIOS) if kind == "random" else \
            _ratio_list(args.sub_ratios, SUBWORD_RATIOS)
        for ratio in grid:
            probes = make_probe_set(exp.references, kind, ratio, args.seed)
            probes.dump(probe_dir / f"{kind}_{ratio:.2f}.jsonl")
            rows.append(_probe_row(exp, probes, args))
    write_tsv(exp.out / "probe_subword.tsv", _probe_header(), rows)


def _tau_grid(text):
    if text:
        return [float(x) for x in text.split(",")]
    return [round(0.05 * k, 2) for k in range(1, 20)]


def cmd_probe_deletion(args):
    exp = Experiment(args)
    n = len(exp.references)
    inits = {
        "no_accuracy": corrupt_no_accuracy(exp.references,
                                           np.random.default_rng([args.seed, _SEED_NOACC])),
        "no_fluency": [corrupt_no_fluency(r, np.random.default_rng([args.seed, _SEED_NOFLU, i]))
                       for i, r in enumerate(exp.references)],
    }
    rows = []
    for regime, sents in inits.items():
        write_lines(exp.out / f"init_{regime}.txt", sents)
        traces = [decode(exp.sources[i], exp.policy,
                         exp.options(i, init=tuple(exp.vocab.encode(sents[i]))), sid=i)
                  for i in range(n)]
        fin = exp.bleu_of(traces, "final")
        rows.append([regime, _mean([t.iterations for t in traces]), _stage_len(traces, "init"),
                     _stage_len(traces, "del_1"), _stage_len(traces, "pld_1"),
                     _stage_len(traces, "final"), fin.score, *fin.precisions, fin.brevity_penalty])
    write_tsv(exp.out / "probe_init_corruption.tsv",
              ["regime", "iter_num", "init_len", "del_1_len", "pld_1_len", "final_len",
               "final_bleu", "p1", "p2", "p3", "p4", "bp"], rows)

    rows = []
    for tau in _tau_grid(args.tau_grid):
        traces = _decode_all(exp, deletion_threshold=tau)
        fin = exp.bleu_of(traces, "final")
        rows.append([tau, _stage_len(traces, "del_2"), _stage_len(traces, "final"),
                     _mean([t.iterations for t in traces]), fin.score, fin.brevity_penalty])
    write_tsv(exp.out / "probe_threshold.tsv",
              ["tau", "del_2_len", "final_len", "iter_num", "final_bleu", "final_bp"], rows)


def cmd_corrupt(args):
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    corpus = load_parallel_corpus(args.src, args.tgt, args.alt_tgt)
    refs = list(corpus.target)
    kind = args.kind
    if kind == "no-accuracy":
        sents = corrupt_no_accuracy(refs, np.random.default_rng([args.seed, _SEED_NOACC]))
    elif kind == "no-fluency":
        sents = [corrupt_no_fluency(r, np.random.default_rng([args.seed, _SEED_NOFLU, i]))
                 for i, r in enumerate(refs)]
    else:
        probes = make_probe_set(refs, kind, args.ratio, args.seed)
        probes.dump(out / f"probe_{kind}_{args.ratio:.2f}.jsonl")
        sents = [it.init for it in probes.items]
    write_lines(out / f"init_{kind.replace('-', '_')}.txt", sents)


def cmd_report(args):
    out = Path(args.out_dir)
    tables = sorted(out.glob("*.tsv"))
    if not tables:
        raise FileNotFoundError(f"no TSV reports in {out}")
    chunks = []
    for path in tables:
        rows = [line.split("\t") for line in path.read_text(encoding="utf-8").splitlines()]
        widths = [max(len(r[c]) for r in rows if c < len(r)) for c in range(len(rows[0]))]
        chunks.append(f"== {path.name} ==")
        chunks.extend("  ".join(cell.ljust(w) for cell, w in zip(r, widths)).rstrip() for r in rows)
        chunks.append("")
    text = "\n".join(chunks)
    (out / "report.txt").write_text(text, encoding="utf-8")
    print(text, end="")


# ---------------------------------------------------------------- argument parsing

COMMANDS = {
    "train": cmd_train,
    "decode": cmd_decode,
    "probe-length": cmd_probe_length,
    "probe-subword": cmd_probe_subword,
    "probe-deletion": cmd_probe_deletion,
    "corrupt": cmd_corrupt,
    "report": cmd_report,
}


def _common(p, corpus=True):
    p.add_argument("--config", help="flat key=value file; flags override it")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    if not corpus:
        return
    p.add_argument("--src", required=True, help="source sentences, one per line")
    p.add_argument("--tgt", required=True, help="reference targets, aligned with --src")
    p.add_argument("--alt-tgt", help="distilled references (train) or TM sentences (--init tm)")
    p.add_argument("--vocab-cap", type=int, default=32000)
    p.add_argument("-v", "--verbose", action="store_true")


def _decoding(p):
    p.add_argument("--train-src", help="training sources for length models and the lexicon")
    p.add_argument("--train-tgt", help="training targets for length models and the lexicon")
    p.add_argument("--stopwords", help="stop-word file, one word per line")
    p.add_argument("--policy", choices=["oracle", "linear"], default="oracle")
    p.add_argument("--model", help="linear policy model file")
    p.add_argument("--init", choices=["empty", "tm"], default="empty")
    p.add_argument("--max-rounds", type=int, default=10)
    p.add_argument("--topk", type=int, default=5)
    p.add_argument("--length-pred",
                   help=f"external first-round length predictor(s), comma separated: {','.join(PREDICTORS)}")
    p.add_argument("--length-sample", action="store_true",
                   help="sample second-round placeholder lengths from softmax(score)")
    p.add_argument("--del-threshold", type=float)
    p.add_argument("--bleu-level", choices=["bpe", "word"], default="word")


def build_parser():
    parser = argparse.ArgumentParser(prog="levtdiag", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train the linear policy")
    _common(p)
    p.add_argument("--epochs", type=int, default=5)
    p.add_argument("--lr", type=float, default=0.1)
    p.add_argument("--hash-bits", type=int, default=18)
    p.add_argument("--no-alt-refs", action="store_true",
                   help="ignore --alt-tgt when building training labels")

    p = sub.add_parser("decode", help="decode and write length/duplication/BLEU reports")
    _common(p)
    _decoding(p)

    p = sub.add_parser("probe-length", help="top-k first lengths and external length predictors")
    _common(p)
    _decoding(p)

    p = sub.add_parser("probe-subword", help="subword/full-word/random deletion probes")
    _common(p)
    _decoding(p)
    p.add_argument("--kinds", help=f"comma separated subset of {','.join(KINDS)}")
    p.add_argument("--sub-ratios", help="ratios for subword/fullword probes (default 0.05..0.25)")
    p.add_argument("--random-ratios", help="ratios for random probes (default 0.1..1.0)")
    p.add_argument("--pld-acc-mode", choices=["elementwise", "nonzero"], default="elementwise")
    p.add_argument("--match-denominator", choices=["gold", "all"], default="gold")

    p = sub.add_parser("probe-deletion", help="corrupted initializations and threshold sweep")
    _common(p)
    _decoding(p)
    p.add_argument("--tau-grid", help="comma separated thresholds (default 0.05..0.95)")

    p = sub.add_parser("corrupt", help="write corrupted or probe initializations")
    _common(p)
    p.add_argument("--kind", required=True,
                   choices=["no-accuracy", "no-fluency", "subword", "fullword", "random"])
    p.add_argument("--ratio", type=float, default=0.1)

    p = sub.add_parser("report", help="collate the TSV reports of an output directory")
    _common(p, corpus=False)
    return parser


def read_config(path) -> dict:
    cfg = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key=value")
        key, value = line.split("=", 1)
        cfg[key.strip().replace("-", "_")] = value.strip()
    return cfg


def parse_args(argv=None):
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("command", nargs="?")
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if known.config and known.command in COMMANDS:
        cfg = read_config(known.config)
        subparser = parser._subparsers._group_actions[0].choices[known.command]
        actions = {a.dest: a for a in subparser._actions}
        defaults = {}
        for key, value in cfg.items():
            if key not in actions:
                raise ValueError(f"{known.config}: unknown key {key!r}")
            act = actions[key]
            if act.nargs == 0:
                defaults[key] = value.lower() in ("1", "true", "yes")
            else:
                defaults[key] = act.type(value) if act.type else value
            act.required = False
        subparser.set_defaults(**defaults)
    return parser.parse_args(argv)


def main(argv=None) -> int:
    try:
        args = parse_args(argv)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        COMMANDS[args.command](args)
    except (CorpusError, PolicyContractError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
