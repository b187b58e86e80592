"""Scoring policies consumed by the refinement engine.

A policy exposes ``score(state, source, head, sid=None)`` and returns a
float64 array whose shape depends on the head:

* ``"del"``: ``(n, 2)`` for the ``n`` content tokens, classes keep/delete
* ``"pld"``: ``(n + 1, LMAX + 1)`` for every gap of the content
* ``"tok"``: ``(k, |V|)`` for the ``k`` placeholder slots

``state`` always carries the ``<s>``/``</s>`` sentinels.
"""
from typing import Protocol

import numpy as np

from ..edit_oracle import LMAX

HEADS = ("del", "pld", "tok")
N_LENGTHS = LMAX + 1


class PolicyContractError(ValueError):
    pass


class Policy(Protocol):
    vocab_size: int

    def score(self, state, source, head: str, sid=None) -> np.ndarray: ...


def check_head(head):
    if head not in HEADS:
        raise PolicyContractError(f"unknown head {head!r}; expected one of {HEADS}")


from .oracle import OraclePolicy, make_oracle_policy  # noqa: E402
from .linear import LinearPolicy, featurize, load_model, save_model  # noqa: E402
from .training import TrainingBatch, build_batch, train  # noqa: E402

__all__ = [
    "HEADS", "N_LENGTHS", "Policy", "PolicyContractError", "OraclePolicy",
    "make_oracle_policy", "LinearPolicy", "featurize", "load_model", "save_model",
    "TrainingBatch", "build_batch", "train",
]
