"""External predictors for the first placeholder length."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

from .edit_oracle import LMAX

PREDICTORS = ("srclen", "ratio", "linreg", "tgtlen")


class DegenerateDesignError(ValueError):
    pass


@dataclass(frozen=True)
class RatioModel:
    ratio: float


@dataclass(frozen=True)
class LinRegModel:
    coef: float
    intercept: float
    r_squared: float


def _lengths(corpus):
    if len(corpus) == 0:
        raise ValueError("cannot fit a length model on an empty corpus")
    return [len(s) for s in corpus.source], [len(t) for t in corpus.target]


def fit_ratio(corpus) -> RatioModel:
    """Mean of per-pair target/source length ratios (BPE tokens)."""
    xs, ys = _lengths(corpus)
    if min(xs) == 0:
        raise ValueError("source sentences must be nonempty")
    return RatioModel(math.fsum(y / x for x, y in zip(xs, ys)) / len(xs))


def fit_linreg(corpus) -> LinRegModel:
    """Ordinary least squares of target length on source length."""
    xs, ys = _lengths(corpus)
    n = len(xs)
    mx, my = math.fsum(xs) / n, math.fsum(ys) / n
    sxx = math.fsum((x - mx) ** 2 for x in xs)
    if sxx == 0:
        raise DegenerateDesignError("all source lengths are equal; slope is undetermined")
    sxy = math.fsum((x - mx) * (y - my) for x, y in zip(xs, ys))
    coef = sxy / sxx
    intercept = my - coef * mx
    ss_tot = math.fsum((y - my) ** 2 for y in ys)
    ss_res = math.fsum((y - (coef * x + intercept)) ** 2 for x, y in zip(xs, ys))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else (1.0 if ss_res == 0 else -math.inf)
    return LinRegModel(coef, intercept, r2)


def round_half_away(x: float) -> int:
    return int(math.copysign(math.floor(abs(x) + 0.5), x))


def predict_length(kind: str, source: Sequence, model=None,
                   reference: Optional[Sequence] = None) -> int:
    """Predicted first-round length, rounded and clamped to ``[1, LMAX]``.

    ``kind`` is one of ``srclen``, ``ratio`` (needs a RatioModel),
    ``linreg`` (needs a LinRegModel) or ``tgtlen`` (needs the reference).
    """
    n = len(source)
    if kind == "srclen":
        value = float(n)
    elif kind == "ratio":
        if not isinstance(model, RatioModel):
            raise ValueError("ratio prediction needs a fitted RatioModel")
        value = n * model.ratio
    elif kind == "linreg":
        if not isinstance(model, LinRegModel):
            raise ValueError("linreg prediction needs a fitted LinRegModel")
        value = model.coef * n + model.intercept
    elif kind in ("tgtlen", "oracle"):
        if reference is None:
            raise ValueError("reference-length prediction needs the reference")
        value = float(len(reference))
    else:
        raise ValueError(f"unknown length predictor {kind!r}")
    return max(1, min(LMAX, round_half_away(value)))
