"""Weight sequences, set measures and the triviality index s_w.

A weight is a positive sequence ``w = (w_1, w_2, ...)`` and the measure of a
finite index set is ``w(A) = sum_{i in A} w_i``.  Indices are 1-based
throughout the package.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable

import numpy as np

KINDS = ("constant", "power", "geometric", "explicit")


@dataclass(frozen=True)
class Weight:
    """A positive weight sequence.

    ``kind`` selects the descriptor:

    * ``constant``: ``w_n = c``
    * ``power``: ``w_n = n**(-theta)``
    * ``geometric``: ``w_n = r**n`` with ``0 < r < 1``
    * ``explicit``: listed ``values`` for ``n <= len(values)``, then ``tail``
    """

    kind: str = "constant"
    c: float = 1.0
    theta: float = 0.0
    r: float = 0.5
    values: tuple[float, ...] = ()
    tail: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown weight kind {self.kind!r}")
        if self.kind == "constant" and not self.c > 0:
            raise ValueError("constant weight must be positive")
        if self.kind == "power" and not self.theta >= 0:
            raise ValueError("power exponent theta must be >= 0")
        if self.kind == "geometric" and not 0 < self.r < 1:
            raise ValueError("geometric ratio must lie in (0, 1)")
        if self.kind == "explicit":
            object.__setattr__(self, "values", tuple(float(v) for v in self.values))
            if any(not v > 0 for v in self.values) or not self.tail > 0:
                raise ValueError("explicit weights and tail must be positive")

    # constructors -----------------------------------------------------

    @classmethod
    def constant(cls, c: float = 1.0) -> "Weight":
        return cls("constant", c=float(c))

    @classmethod
    def power(cls, theta: float) -> "Weight":
        return cls("power", theta=float(theta))

    @classmethod
    def geometric(cls, r: float) -> "Weight":
        return cls("geometric", r=float(r))

    @classmethod
    def explicit(cls, values: Iterable[float], tail: float) -> "Weight":
        return cls("explicit", values=tuple(values), tail=float(tail))

    @classmethod
    def from_json(cls, obj: dict) -> "Weight":
        kind = obj.get("kind")
        if kind == "constant":
            return cls.constant(obj.get("c", 1.0))
        if kind == "power":
            return cls.power(obj["theta"])
        if kind == "geometric":
            return cls.geometric(obj["r"])
        if kind == "explicit":
            if "tail" not in obj:
                raise ValueError("explicit weight requires a 'tail' value")
            return cls.explicit(obj["values"], obj["tail"])
        raise ValueError(f"unknown weight kind {kind!r}")

    def to_json(self) -> dict:
        if self.kind == "constant":
            return {"kind": "constant", "c": self.c}
        if self.kind == "power":
            return {"kind": "power", "theta": self.theta}
        if self.kind == "geometric":
            return {"kind": "geometric", "r": self.r}
        return {"kind": "explicit", "values": list(self.values), "tail": self.tail}

    # evaluation -------------------------------------------------------

    def __call__(self, n: int) -> float:
        if n < 1:
            raise ValueError(f"weight index must be >= 1, got {n}")
        if self.kind == "constant":
            return self.c
        if self.kind == "power":
            # theta = 0 must give exactly 1.0
            return 1.0 if self.theta == 0 else float(n) ** (-self.theta)
        if self.kind == "geometric":
            return self.r**n
        return self.values[n - 1] if n <= len(self.values) else self.tail

    def values_upto(self, window: int, offset: int = 0) -> np.ndarray:
        """Return ``(w_{offset+1}, ..., w_{offset+window})`` as a read-only array."""
        return _values_upto(self, int(window), int(offset))

    @property
    def is_constant(self) -> bool:
        if self.kind == "constant":
            return True
        if self.kind == "power":
            return self.theta == 0
        if self.kind == "explicit":
            return all(v == self.tail for v in self.values)
        return False

    @property
    def is_nonincreasing(self) -> bool:
        if self.kind in ("constant", "power", "geometric"):
            return True
        seq = list(self.values) + [self.tail]
        return all(a >= b for a, b in zip(seq, seq[1:]))


@lru_cache(maxsize=256)
def _values_upto(w: Weight, window: int, offset: int) -> np.ndarray:
    out = np.array([w(offset + i) for i in range(1, window + 1)], dtype=float)
    out.flags.writeable = False
    return out


def measure(w: Weight, A: Iterable[int]) -> float:
    """w-measure of a finite index set, summed in increasing index order."""
    total = 0.0
    for i in sorted(A):
        total += w(i)
    return total


def equivalence_constants(v: Weight, w: Weight, window: int) -> tuple[float, float]:
    """Tightest ``(a, b)`` with ``a*v_n <= w_n <= b*v_n`` for ``n <= window``."""
    if window < 1:
        raise ValueError("window must be >= 1")
    ratios = [w(n) / v(n) for n in range(1, window + 1)]
    return min(ratios), max(ratios)


def window_limsup(w: Weight, window: int) -> float:
    """Finite-window stand-in for ``limsup w_n``: the max over the upper half."""
    start = window // 2 + 1
    return max(w(n) for n in range(start, window + 1))


def s_w_window(w: Weight, window: int) -> tuple[int, bool]:
    """Largest ``|A|`` with ``A < B``, ``w(A) <= w(B)`` and ``A, B`` in ``[1, window]``.

    For a split point ``t`` the best ``B`` is ``(t, window]`` and the best
    ``A`` of a given size consists of the smallest weights in ``[1, t]``.
    The flag reports whether the maximiser reaches ``|A| = window - 1``.
    """
    if window < 2:
        raise ValueError("window must be >= 2")
    wv = w.values_upto(window)
    best = 0
    for t in range(1, window):
        budget = float(np.sum(wv[t:]))
        acc = 0.0
        size = 0
        for val in np.sort(wv[:t]):
            acc += val
            if acc > budget:
                break
            size += 1
        best = max(best, size)
    return best, best >= window - 1


def as_index_set(A: Iterable[int]) -> tuple[int, ...]:
    """Normalise to a strictly increasing tuple of positive integers."""
    out = tuple(sorted(set(int(a) for a in A)))
    if out and out[0] < 1:
        raise ValueError("index sets contain positive integers only")
    return out

