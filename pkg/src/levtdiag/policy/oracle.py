from __future__ import annotations

from typing import Mapping, Sequence

import numpy as np

from ..corpus import PLD
from ..edit_oracle import LMAX, optimal_edit_labels
from . import N_LENGTHS, PolicyContractError, check_head


class OraclePolicy:
    """Scores +1 on the class an optimal edit script picks and -1 elsewhere.

    ``references`` maps a sentence id to the reference as vocabulary ids.
    """

    def __init__(self, references: Mapping, vocab_size: int):
        self.references = references
        self.vocab_size = vocab_size

    def _reference(self, sid):
        try:
            return self.references[sid]
        except (KeyError, IndexError, TypeError):
            raise PolicyContractError(f"no reference for sentence id {sid!r}") from None

    def score(self, state: Sequence[int], source, head: str, sid=None) -> np.ndarray:
        check_head(head)
        ref = self._reference(sid)
        content = list(state[1:-1])
        labels = optimal_edit_labels(content, ref, pld=PLD, lmax=10**9)

        if head == "del":
            out = -np.ones((len(content), 2))
            out[np.arange(len(content)), np.asarray(labels.del_labels, dtype=int)] = 1.0
            return out

        if head == "pld":
            out = -np.ones((len(content) + 1, N_LENGTHS))
            counts = np.minimum(np.asarray(labels.ins_counts, dtype=int), LMAX)
            out[np.arange(len(content) + 1), counts] = 1.0
            return out

        slots = [k for k, t in enumerate(content) if t == PLD]
        if not slots:
            raise PolicyContractError("token head queried on a state without placeholders")
        out = -np.ones((len(slots), self.vocab_size))
        # surplus placeholders are deleted by the script and get no positive class
        fills = iter(labels.slot_fills)
        for row, k in enumerate(slots):
            if not labels.del_labels[k]:
                out[row, next(fills)] = 1.0
        return out


def make_oracle_policy(reference_lookup: Mapping, vocab_size: int) -> OraclePolicy:
    return OraclePolicy(reference_lookup, vocab_size)
