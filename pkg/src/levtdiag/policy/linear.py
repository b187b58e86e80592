"""Feature-hashed linear policy.

Each head is a multinomial logistic regression. A (feature, class) pair is
hashed jointly into a weight vector of size ``D = 2**hash_bits``, so the
weight tables stay small even for the 256-way placeholder head.
"""
from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from ..corpus import BOS, EOS, PLD
from ..edit_oracle import LMAX, softmax
from . import HEADS, N_LENGTHS, PolicyContractError, check_head

MAGIC = b"LEVTLIN1"
FORMAT_VERSION = 1

_BOUNDARY = -1
_WINDOW = (-2, -1, 0, 1, 2)
_BAG_SIZE = 8
_HEAD_CODE = {"del": 0, "pld": 1, "tok": 2}

_U = np.uint64
_GOLDEN = _U(0x9E3779B97F4A7C15)
_M1 = _U(0xFF51AFD7ED558CCD)
_M2 = _U(0xC4CEB9FE1A85EC53)
_S33 = _U(33)


def _mix(x: np.ndarray) -> np.ndarray:
    # 64-bit finalizer; arrays wrap silently on overflow
    x = x ^ (x >> _S33)
    x = x * _M1
    x = x ^ (x >> _S33)
    x = x * _M2
    return x ^ (x >> _S33)


def _hash_rows(rows) -> np.ndarray:
    width = max(len(r) for r in rows)
    arr = np.full((len(rows), width), -7, dtype=np.int64)
    for i, r in enumerate(rows):
        arr[i, :len(r)] = r
    cols = arr.astype(np.uint64)
    h = np.full(len(rows), _GOLDEN, dtype=np.uint64)
    for k in range(width):
        h = _mix(h * _GOLDEN + cols[:, k])
    return h


def _source_context(source):
    first = {}
    for k, t in enumerate(source):
        first.setdefault(t, k)
    bag = list(first)[:_BAG_SIZE]
    return first, bag


def _shared_rows(hid, S, L, bag):
    rows = [(3, hid, min(S, 100)), (4, hid, int(np.clip(S - L, -20, 40)))]
    rows.extend((5, hid, t) for t in bag)
    return rows


def _position_rows(state, source, p, head, ctx):
    hid = _HEAD_CODE[head]
    first, bag = ctx
    S, L = len(source), len(state) - 2
    j = p - 1
    rows = [(1, hid, off, state[p + off] if 0 <= p + off < len(state) else _BOUNDARY)
            for off in _WINDOW]
    rows.append((2, hid, 10 * j // max(L, 1)))
    rows.extend(_shared_rows(hid, S, L, bag))
    aligned = _BOUNDARY
    if S > 0 and L > 0:
        a = (2 * j + 1) * S // (2 * L)
        for d in (-1, 0, 1):
            rows.append((6, hid, d, source[a + d] if 0 <= a + d < S else _BOUNDARY))
        aligned = source[a] if a < S else _BOUNDARY
    if head == "del":
        tok = state[p]
        rows.append((7, hid, tok, aligned))
        rows.append((8, hid, int(tok in first)))
    return rows


def _gap_rows(state, source, g, ctx):
    hid = _HEAD_CODE["pld"]
    first, bag = ctx
    S, L = len(source), len(state) - 2
    left, right = state[g], state[g + 1]
    rows = [
        (1, hid, -2, state[g - 1] if g >= 1 else _BOUNDARY),
        (1, hid, -1, left),
        (1, hid, 1, right),
        (1, hid, 2, state[g + 2] if g + 2 < len(state) else _BOUNDARY),
        (2, hid, 10 * g // max(L + 1, 1)),
        (11, hid, left, right),
    ]
    rows.extend(_shared_rows(hid, S, L, bag))

    def spos(t):
        if t == BOS:
            return -1
        if t == EOS:
            return S
        return first.get(t)

    lp, rp = spos(left), spos(right)
    if lp is None or rp is None:
        rows.append((10, hid, int(lp is None), int(rp is None)))
    else:
        rows.append((9, hid, int(np.clip(rp - lp, -4, 40))))
    return rows


def query_positions(state, head):
    """State indices (del/tok) or gap indices (pld) a head scores."""
    if head == "del":
        return list(range(1, len(state) - 1))
    if head == "pld":
        return list(range(len(state) - 1))
    return [k for k, t in enumerate(state) if t == PLD]


def feature_hashes(state, source, head) -> list:
    """Unmasked 64-bit feature hashes, one array per queried position."""
    ctx = _source_context(source)
    out = []
    for p in query_positions(state, head):
        rows = _gap_rows(state, source, p, ctx) if head == "pld" else \
            _position_rows(state, source, p, head, ctx)
        out.append(_hash_rows(rows))
    return out


def featurize(state: Sequence[int], source: Sequence[int], position: int, head: str,
              hash_bits: int = 18) -> np.ndarray:
    """Sorted hashed feature indices in ``[0, 2**hash_bits)`` for one position or gap."""
    check_head(head)
    ctx = _source_context(source)
    if head == "pld":
        if not 0 <= position < len(state) - 1:
            raise IndexError(f"gap {position} out of range")
        rows = _gap_rows(state, source, position, ctx)
    else:
        if not 0 < position < len(state) - 1:
            raise IndexError(f"position {position} is not a content token")
        rows = _position_rows(state, source, position, head, ctx)
    mask = _U((1 << hash_bits) - 1)
    return np.unique((_hash_rows(rows) & mask).astype(np.int64))


class LinearPolicy:
    """Three independent linear heads over shared hashed features."""

    def __init__(self, vocab_size: int, hash_bits: int = 18, lr: float = 0.1,
                 vocab: Optional[Sequence[str]] = None):
        if vocab is not None and len(vocab) != vocab_size:
            raise ValueError("vocab surfaces do not match vocab_size")
        self.vocab_size = vocab_size
        self.hash_bits = hash_bits
        self.D = 1 << hash_bits
        self.lr = lr
        self.vocab = list(vocab) if vocab is not None else None
        self.weights = {h: np.zeros(self.D) for h in HEADS}
        self.bias = {h: np.zeros(self.n_classes(h)) for h in HEADS}
        self._class_keys = {
            h: (np.arange(self.n_classes(h), dtype=np.uint64) + _U(1)) * _GOLDEN for h in HEADS
        }

    def n_classes(self, head):
        return {"del": 2, "pld": N_LENGTHS, "tok": self.vocab_size}[head]

    def class_indices(self, feats: np.ndarray, head) -> np.ndarray:
        idx = _mix(feats[:, None] ^ self._class_keys[head][None, :])
        return (idx & _U(self.D - 1)).astype(np.int64)

    def _scores(self, feats_per_pos, head):
        out = np.empty((len(feats_per_pos), self.n_classes(head)))
        w, b = self.weights[head], self.bias[head]
        for r, feats in enumerate(feats_per_pos):
            out[r] = w[self.class_indices(feats, head)].sum(axis=0) + b
        return out

    def score(self, state, source, head, sid=None) -> np.ndarray:
        check_head(head)
        if head == "tok" and PLD not in state:
            raise PolicyContractError("token head queried on a state without placeholders")
        return self._scores(feature_hashes(state, source, head), head)

    def loss(self, examples, head) -> float:
        """Summed cross-entropy of ``(state, source, labels)`` examples."""
        total = 0.0
        for state, source, labels in examples:
            s = self.score(state, source, head)
            logz = np.logaddexp.reduce(s, axis=1)
            total += float(np.sum(logz - s[np.arange(len(labels)), labels]))
        return total

    def gradient(self, examples, head):
        """Dense gradients of :meth:`loss` w.r.t. the head's weights and bias."""
        gw = np.zeros(self.D)
        gb = np.zeros(self.n_classes(head))
        for state, source, labels in examples:
            feats = feature_hashes(state, source, head)
            s = self._scores(feats, head)
            g = softmax(s, axis=1)
            g[np.arange(len(labels)), labels] -= 1.0
            for f, grow in zip(feats, g):
                idx = self.class_indices(f, head)
                np.add.at(gw, idx.ravel(), np.broadcast_to(grow, idx.shape).ravel())
            gb += g.sum(axis=0)
        return gw, gb

    def sgd_step(self, state, source, head, labels, lr=None) -> float:
        """One plain SGD step on a single state; returns the loss before the update."""
        lr = self.lr if lr is None else lr
        labels = np.asarray(labels, dtype=int)
        if len(labels) == 0:
            return 0.0
        feats = feature_hashes(state, source, head)
        s = self._scores(feats, head)
        logz = np.logaddexp.reduce(s, axis=1)
        loss = float(np.sum(logz - s[np.arange(len(labels)), labels]))
        g = softmax(s, axis=1)
        g[np.arange(len(labels)), labels] -= 1.0
        w = self.weights[head]
        for f, grow in zip(feats, g):
            idx = self.class_indices(f, head)
            np.add.at(w, idx.ravel(), np.broadcast_to(-lr * grow, idx.shape).ravel())
        self.bias[head] -= lr * g.sum(axis=0)
        return loss

    def copy(self) -> "LinearPolicy":
        other = LinearPolicy(self.vocab_size, self.hash_bits, self.lr, self.vocab)
        for h in HEADS:
            other.weights[h] = self.weights[h].copy()
            other.bias[h] = self.bias[h].copy()
        return other


def save_model(model: LinearPolicy, path) -> None:
    header = json.dumps({
        "version": FORMAT_VERSION,
        "hash_bits": model.hash_bits,
        "vocab_size": model.vocab_size,
        "lmax": LMAX,
        "lr": model.lr,
        "vocab": model.vocab,
    }, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        for h in HEADS:
            fh.write(model.weights[h].astype("<f8").tobytes())
        for h in HEADS:
            fh.write(model.bias[h].astype("<f8").tobytes())


def load_model(path) -> LinearPolicy:
    data = Path(path).read_bytes()
    if data[:len(MAGIC)] != MAGIC:
        raise ValueError(f"{path}: not a linear policy model file")
    (hlen,) = struct.unpack_from("<I", data, len(MAGIC))
    off = len(MAGIC) + 4
    header = json.loads(data[off:off + hlen].decode("utf-8"))
    off += hlen
    if header["version"] != FORMAT_VERSION or header["lmax"] != LMAX:
        raise ValueError(f"{path}: unsupported model format {header['version']}/{header['lmax']}")
    model = LinearPolicy(header["vocab_size"], header["hash_bits"], header["lr"], header["vocab"])

    def take(n):
        nonlocal off
        arr = np.frombuffer(data, dtype="<f8", count=n, offset=off).astype(np.float64)
        off += 8 * n
        return arr

    for h in HEADS:
        model.weights[h] = take(model.D)
    for h in HEADS:
        model.bias[h] = take(model.n_classes(h))
    if off != len(data):
        raise ValueError(f"{path}: {len(data) - off} trailing bytes")
    return model
