"""Chebyshev coefficient minimisation and brute-force weighted m-term errors."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterator, Optional, Sequence

import numpy as np

from .greedy import BudgetExceeded, greedy_set, support
from .spaces import NormModel
from .weights import Weight, measure

DEFAULT_TOL = 1e-6
DEFAULT_BUDGET = 2_000_000
_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass
class MinimizeResult:
    coeffs: tuple[float, ...]
    value: float
    iterations: int
    converged: bool
    method: str
    box: float = 0.0
    box_hit: bool = False


@dataclass
class SigmaResult:
    value: float
    witness_set: tuple[int, ...]
    witness_coeffs: tuple[float, ...]
    sets_examined: int
    upper_bound: bool = False
    notes: list[str] = field(default_factory=list)


def _line_min(f: Callable[[float], float], lo: float, hi: float, rel: float = 1e-10) -> float:
    """Midpoint of the near-optimal set of a convex function on ``[lo, hi]``.

    Golden-section search locates the minimum value; bisection then finds the
    ends of the sublevel interval, and its midpoint is returned.  On flat
    stretches (sup-type norms) this picks the centre rather than an edge,
    which keeps cyclic coordinate descent from parking on a kink.
    """
    width = hi - lo
    eps = max(width * rel, 1e-15)
    a, b = lo, hi
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > eps:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = f(d)
    t, v = (c, fc) if fc <= fd else (d, fd)
    for edge in (lo, hi):
        fe = f(edge)
        if fe < v:
            t, v = edge, fe
    level = v + 1e-12 * max(1.0, abs(v))

    def edge_of(inside: float, outside: float) -> float:
        if f(outside) <= level:
            return outside
        while abs(outside - inside) > eps:
            mid = 0.5 * (inside + outside)
            if f(mid) <= level:
                inside = mid
            else:
                outside = mid
        return inside

    return 0.5 * (edge_of(t, lo) + edge_of(t, hi))


def _coordinate_descent(obj, b0, box, tol, max_sweeps):
    b = b0.copy()
    cur = obj(b)
    sweeps = 0
    converged = False
    while sweeps < max_sweeps:
        sweeps += 1
        start = cur
        for i in range(len(b)):
            def along(t, i=i):
                old = b[i]
                b[i] = t
                val = obj(b)
                b[i] = old
                return val

            t = _line_min(along, -box, box)
            old = b[i]
            b[i] = t
            val = obj(b)
            if val <= cur:
                cur = val
            else:
                b[i] = old
        if start - cur < tol / 10:
            converged = True
            break
    return b, cur, sweeps, converged


def min_norm_over_coeffs(
    model: NormModel,
    x,
    A: Sequence[int],
    tol: float = DEFAULT_TOL,
    *,
    force_numeric: bool = False,
    restarts: int = 5,
    seed: int = 0,
    max_sweeps: int = 10_000,
) -> MinimizeResult:
    """Minimise ``||x - sum_{n in A} b_n e_n||`` over real ``b``.

    Lattice (absolute) norms take the projection shortcut ``b = x|_A``.
    Everything else, or ``force_numeric=True``, runs seeded multi-start cyclic
    coordinate descent with a golden-section line search per coordinate over
    ``[-2 c2 ||x||, 2 c2 ||x||]``.
    """
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite input vector")
    if not tol > 0:
        raise ValueError("tol must be positive")
    A = tuple(A)
    if any(not 1 <= a <= model.window for a in A):
        raise ValueError("index set leaves the model window")
    base = model.norm(x)
    if not A:
        return MinimizeResult((), base, 0, True, "empty")
    idx = np.array(A) - 1
    if model.is_lattice and not force_numeric:
        r = x.copy()
        r[idx] = 0.0
        return MinimizeResult(tuple(float(v) for v in x[idx]), model.norm(r), 0, True, "lattice-shortcut")

    if base == 0:
        return MinimizeResult((0.0,) * len(A), 0.0, 0, True, "numeric")
    c2 = max(model.frame_bounds()[1], 1.0)
    box = 2.0 * c2 * base
    work = x.copy()

    def obj(b):
        work[idx] = x[idx] - b
        return model.spec.norm1(work)

    rng = np.random.default_rng(seed)
    best_b, best_v, total, conv = np.zeros(len(A)), base, 0, True
    for k in range(max(restarts, 1)):
        b0 = np.zeros(len(A)) if k == 0 else rng.uniform(-box, box, size=len(A))
        b, v, sweeps, ok = _coordinate_descent(obj, b0, box, tol, max_sweeps)
        total += sweeps
        conv = conv and ok
        if v < best_v:
            best_b, best_v = b, v
    value = obj(best_b)
    hit = bool(np.any(np.abs(best_b) >= box * (1 - 1e-6)))
    return MinimizeResult(tuple(float(v) for v in best_b), value, total, conv, "numeric", box, hit)


def cga(model: NormModel, x, m: int, tol: float = DEFAULT_TOL, **kw) -> tuple[np.ndarray, float]:
    """Chebyshev greedy approximand on the canonical greedy set and its residual norm."""
    x = np.asarray(x, dtype=float)
    A = greedy_set(x, m)
    res = min_norm_over_coeffs(model, x, A, tol, **kw)
    approx = np.zeros_like(x)
    if A:
        approx[np.array(A) - 1] = res.coeffs
    return approx, res.value


def feasible_sets(w: Weight, pool: Sequence[int], delta: float) -> Iterator[tuple[int, ...]]:
    """Subsets of ``pool`` with ``w(A) <= delta``, depth first, pruning on weight.

    Weights are positive, so a prefix that already exceeds ``delta`` cannot be
    extended; partial sums accumulate in increasing index order exactly as
    :func:`measure` does.
    """
    pool = sorted(pool)
    wv = [w(n) for n in pool]

    def rec(start, chosen, acc):
        yield tuple(chosen)
        for j in range(start, len(pool)):
            nxt = acc + wv[j]
            if nxt <= delta:
                chosen.append(pool[j])
                yield from rec(j + 1, chosen, nxt)
                chosen.pop()

    yield from rec(0, [], 0.0)


def _maximal(w, pool, A, delta):
    rest = [j for j in pool if j not in A]
    return not any(measure(w, A + (j,)) <= delta for j in rest)


_BITS: dict[int, np.ndarray] = {}
_VECTOR_POOL = 14  # pools up to this size are enumerated as bit masks


def _bits(k: int) -> np.ndarray:
    if k not in _BITS:
        _BITS[k] = ((np.arange(1 << k)[:, None] >> np.arange(k)) & 1).astype(bool)
    return _BITS[k]


def _mask_measures(wv: np.ndarray) -> np.ndarray:
    """Measures of all ``2^k`` bit-mask subsets, in :func:`_bits` row order.

    Mask ``r`` with top bit ``j`` is mask ``r - 2^j`` plus ``w_j`` added last,
    which is exactly increasing-index summation, so the values match
    :func:`measure` bit for bit.
    """
    total = np.zeros(1)
    for v in wv:
        total = np.concatenate([total, total + v])
    return total


def _sigma_masks(model, w, x, delta, pool, only_maximal):
    """Projection errors over every feasible subset of a small pool, evaluated in one batch.

    Returns ``(best, count)`` with the same witness the depth-first search
    would report: among equal minima the lexicographically first set wins.
    """
    k = len(pool)
    bits = _bits(k)
    wv = np.array([w(n) for n in pool])
    sums = _mask_measures(wv)
    rows_idx = np.flatnonzero(sums <= delta)
    count = len(rows_idx)
    if only_maximal:
        # A + {j} fits; the plain sum differs from the index-order sum only by
        # rounding, so entries near delta are settled by the exact measure
        fb = bits[rows_idx]
        grown = sums[rows_idx, None] + wv[None, :]
        near = ~fb & (np.abs(grown - delta) <= 1e-12 * max(delta, 1.0))
        fits = ~fb & (grown <= delta) & ~near
        for r, j in zip(*np.nonzero(near)):
            A = [pool[i] for i in np.flatnonzero(fb[r])] + [pool[j]]
            fits[r, j] = measure(w, A) <= delta
        rows_idx = rows_idx[~fits.any(axis=1)]
    base = SigmaResult(model.norm(x), (), (), count)
    if len(rows_idx) == 0:
        return base
    cols = np.array(pool, dtype=int) - 1
    R = np.repeat(x[None, :], len(rows_idx), axis=0)
    sub = R[:, cols]
    sub[bits[rows_idx]] = 0.0
    R[:, cols] = sub
    vals = model.norms(R)
    v = float(vals.min())
    if not v < base.value:
        return base
    tied = [tuple(int(pool[j]) for j in np.flatnonzero(bits[r])) for r in rows_idx[vals == v]]
    S = min(tied)
    return SigmaResult(v, S, tuple(float(x[a - 1]) for a in S), count)


def _sigma(model, w, x, delta, window, budget, tol, projection, force_numeric, seed):
    if delta < 0:
        raise ValueError("delta must be >= 0")
    x = np.asarray(x, dtype=float)
    window = model.window if window is None else window
    supp = support(x)
    shortcut = model.is_lattice and not force_numeric
    pool = list(supp) if (projection or shortcut) else list(range(1, window + 1))
    # free coefficients: enlarging A never hurts, so only maximal sets matter;
    # projections are monotone only on lattice norms
    only_maximal = (not projection) or model.is_lattice
    if (projection or shortcut) and len(pool) <= _VECTOR_POOL:
        best = _sigma_masks(model, w, x, delta, pool, only_maximal)
        if best.sets_examined <= budget:
            return best
    best = SigmaResult(model.norm(x), (), (), 0)
    count = 0
    batch_sets, batch_rows = [], []

    def flush():
        nonlocal best
        if not batch_rows:
            return
        vals = model.norms(np.array(batch_rows))
        k = int(np.argmin(vals))
        if vals[k] < best.value:
            S = batch_sets[k]
            best = SigmaResult(float(vals[k]), S, tuple(float(x[a - 1]) for a in S), count)
        batch_sets.clear()
        batch_rows.clear()

    for A in feasible_sets(w, pool, delta):
        count += 1
        if count > budget:
            flush()
            best.sets_examined = count - 1
            best.upper_bound = True
            raise BudgetExceeded(f"sigma enumeration exceeded budget {budget}", partial=best)
        if only_maximal and not _maximal(w, pool, A, delta):
            continue
        if projection or shortcut:
            r = x.copy()
            if A:
                r[np.array(A) - 1] = 0.0
            batch_sets.append(A)
            batch_rows.append(r)
            if len(batch_rows) >= 4096:
                flush()
        else:
            res = min_norm_over_coeffs(model, x, A, tol, force_numeric=True, seed=seed)
            if res.value < best.value:
                best = SigmaResult(res.value, A, res.coeffs, count)
    flush()
    best.sets_examined = count
    return best


def sigma_w(model: NormModel, w: Weight, x, delta: float, window: Optional[int] = None,
            budget: int = DEFAULT_BUDGET, tol: float = DEFAULT_TOL, *,
            force_numeric: bool = False, seed: int = 0) -> SigmaResult:
    """Best error over expansions on sets of w-measure at most ``delta`` (free coefficients)."""
    return _sigma(model, w, x, delta, window, budget, tol, False, force_numeric, seed)


def sigma_w_tilde(model: NormModel, w: Weight, x, delta: float, window: Optional[int] = None,
                  budget: int = DEFAULT_BUDGET) -> SigmaResult:
    """Best ``||x - P_A x||`` over sets of w-measure at most ``delta``."""
    return _sigma(model, w, x, delta, window, budget, DEFAULT_TOL, True, False, 0)
