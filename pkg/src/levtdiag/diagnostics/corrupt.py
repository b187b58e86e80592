"""Initializations that break either adequacy or fluency of the reference."""
from __future__ import annotations

import numpy as np

from ..corpus import word_groups


def corrupt_no_accuracy(targets, rng: np.random.Generator) -> list:
    """Assign each sentence another sentence's target as initialization.

    A uniform permutation is drawn; its fixed points are then re-rolled into
    a cycle among themselves (or swapped with a random partner when only one
    is left), so no sentence keeps its own target.
    """
    n = len(targets)
    if n < 2:
        raise ValueError("need at least two sentences to break the alignment")
    perm = rng.permutation(n)
    fixed = [i for i in range(n) if perm[i] == i]
    if len(fixed) == 1:
        i = fixed[0]
        j = int(rng.integers(n - 1))
        j += j >= i
        perm[i], perm[j] = perm[j], perm[i]
    elif len(fixed) > 1:
        order = [fixed[k] for k in rng.permutation(len(fixed))]
        for a, b in zip(order, order[1:] + order[:1]):
            perm[a] = b
    return [tuple(targets[int(p)]) for p in perm]


def corrupt_no_fluency(reference, rng: np.random.Generator) -> tuple:
    """Shuffle whole words; the BPE pieces of a word stay together and in order."""
    groups = word_groups(reference)
    out = []
    for k in rng.permutation(len(groups)):
        start, stop = groups[k]
        out.extend(reference[start:stop])
    return tuple(out)
