"""Thresholding greedy machinery on dense coefficient vectors.

Vectors are 1-D numpy arrays whose entry ``i`` is the coefficient of
``e_{i+1}``; index sets are increasing tuples of 1-based indices.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np


class BudgetExceeded(RuntimeError):
    """An enumeration hit its cap; ``partial`` carries whatever was computed."""

    def __init__(self, message: str, partial=None):
        super().__init__(message)
        self.partial = partial


@dataclass(frozen=True)
class GreedyOrdering:
    order: tuple[int, ...]
    tie_classes: tuple[tuple[int, ...], ...]


def support(x: np.ndarray) -> tuple[int, ...]:
    return tuple(int(i) + 1 for i in np.flatnonzero(x))


def greedy_ordering(x: np.ndarray) -> GreedyOrdering:
    """Decreasing moduli, ties broken by smallest index first."""
    x = np.asarray(x, dtype=float)
    supp = support(x)
    if not supp:
        raise ValueError("the zero vector has no greedy ordering")
    order = tuple(sorted(supp, key=lambda n: (-abs(x[n - 1]), n)))
    classes = []
    for _, grp in itertools.groupby(order, key=lambda n: abs(x[n - 1])):
        grp = tuple(grp)
        if len(grp) > 1:
            classes.append(grp)
    return GreedyOrdering(order, tuple(classes))


def _check_m(x: np.ndarray, m: int) -> int:
    n_supp = int(np.count_nonzero(x))
    if not 0 <= m <= n_supp:
        raise ValueError(f"m={m} outside [0, {n_supp}]")
    return n_supp


def greedy_set(x: np.ndarray, m: int) -> tuple[int, ...]:
    """The canonical greedy set A_m(x)."""
    x = np.asarray(x, dtype=float)
    _check_m(x, m)
    if m == 0:
        return ()
    return tuple(sorted(greedy_ordering(x).order[:m]))


def all_greedy_sets(x: np.ndarray, m: int, cap: int = 64) -> list[tuple[int, ...]]:
    """Every m-set whose moduli dominate those off the set, up to ``cap`` sets."""
    x = np.asarray(x, dtype=float)
    _check_m(x, m)
    if m == 0:
        return [()]
    absx = np.abs(x)
    thresh = np.sort(absx[absx > 0])[::-1][m - 1]
    above = [int(i) + 1 for i in np.flatnonzero(absx > thresh)]
    tied = [int(i) + 1 for i in np.flatnonzero(absx == thresh)]
    need = m - len(above)
    count = math.comb(len(tied), need)
    if count > cap:
        raise BudgetExceeded(f"{count} greedy sets exceed cap {cap}", partial=[greedy_set(x, m)])
    return [tuple(sorted(above + list(c))) for c in itertools.combinations(tied, need)]


def greedy_sets_or_canonical(x, m, cap=64) -> tuple[list[tuple[int, ...]], bool]:
    """``all_greedy_sets`` falling back to the canonical set; second item flags overflow."""
    try:
        return all_greedy_sets(x, m, cap), False
    except BudgetExceeded:
        return [greedy_set(x, m)], True


def project(x: np.ndarray, A: Iterable[int]) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    idx = [a - 1 for a in A]
    out[idx] = x[idx]
    return out


def project_complement(x: np.ndarray, A: Iterable[int]) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return x - project(x, A)


def tga(x: np.ndarray, m: int) -> np.ndarray:
    """Greedy approximand G_m(x) on the canonical greedy set."""
    return project(x, greedy_set(x, m))


def partial_sum(x: np.ndarray, m: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    out[:m] = x[:m]
    return out


def indicator(A: Iterable[int], signs: Optional[Iterable[int]] = None, window: Optional[int] = None) -> np.ndarray:
    """``1_{eps A}``; all-plus when ``signs`` is None."""
    A = tuple(A)
    if window is None:
        window = max(A, default=0)
    out = np.zeros(window)
    if signs is None:
        signs = (1,) * len(A)
    signs = tuple(signs)
    if len(signs) != len(A):
        raise ValueError("one sign per index is required")
    for a, s in zip(A, signs):
        if s not in (1, -1):
            raise ValueError(f"signs must be +1 or -1, got {s}")
        out[a - 1] = s
    return out


def truncate(x: np.ndarray, lam: float) -> np.ndarray:
    """Coordinatewise lambda-truncation T_lambda."""
    if not lam > 0:
        raise ValueError("truncation level must be positive")
    x = np.asarray(x, dtype=float)
    return np.where(np.abs(x) >= lam, lam * np.sign(x), x)
