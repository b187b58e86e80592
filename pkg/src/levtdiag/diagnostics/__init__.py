from .bleu import BleuReport, bleu
from .corrupt import corrupt_no_accuracy, corrupt_no_fluency
from .probes import (AnchorError, ProbeItem, ProbeSet, fill_precision_recall, gap_fills,
                     gap_segments, load_probe_set, make_probe_set, matched_tokens,
                     pld_accuracy)
from .stats import (count_duplicates, count_invalid_words, duplication_stats,
                    iteration_length_stats, subword_stats)

__all__ = [
    "BleuReport", "bleu", "corrupt_no_accuracy", "corrupt_no_fluency", "AnchorError",
    "ProbeItem", "ProbeSet", "fill_precision_recall", "gap_fills", "gap_segments",
    "load_probe_set", "make_probe_set", "matched_tokens", "pld_accuracy",
    "count_duplicates", "count_invalid_words", "duplication_stats",
    "iteration_length_stats", "subword_stats",
]
