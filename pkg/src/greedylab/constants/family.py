"""Finite quantifier domains for constant searches.

A :class:`SearchFamily` fixes which test vectors, index sets and sign
patterns stand in for the suprema over the whole space.  Enumeration order
depends only on the parameters (and the seed), and every parameter enlarges
the family monotonically: a larger ``max_support`` or ``n_random`` yields a
superset of vectors, so estimates can only grow.
"""

from __future__ import annotations

import itertools
from dataclasses import asdict, dataclass
from functools import cached_property

import numpy as np

DEFAULT_GRID = (0.0, 0.25, -0.25, 0.5, -0.5, 1.0, -1.0)
SIGMA_SUPPORT = 6  # longest signed block in the sigma stream
SIGMA_RANDOM = 64  # random vectors in the sigma stream


@dataclass(frozen=True)
class SearchFamily:
    """Test vectors and set pairs used by every estimator.

    Vectors are canonicalised (largest modulus 1, first nonzero entry
    positive) and deduplicated; ratios estimated here are invariant under
    scaling and a global sign, so nothing is lost.
    """

    window: int
    grid: tuple[float, ...] = DEFAULT_GRID
    max_support: int = 6  # signed indicators on blocks up to this length
    dense_support: int = 3  # all grid vectors on blocks up to this length
    n_random: int = 200
    random_support: int = 6
    seed: int = 0
    set_cap: int = 4  # |A|, |B| bound for pair searches with signs
    sign_cap: int = 6  # full sign enumeration up to this set size
    greedy_cap: int = 64
    set_exhaustive_window: int = 12  # unsigned set searches use every subset below this
    ca_support: int = 4  # support bound of the vectors used in Property (A) searches
    sigma_vectors: int = 24  # vectors that get the brute-force sigma treatment
    sigma_support: int | None = None  # optional support bound on those vectors

    def __post_init__(self):
        if self.window < 1:
            raise ValueError("family window must be >= 1")
        object.__setattr__(self, "grid", tuple(float(g) for g in self.grid))
        if not any(g != 0 for g in self.grid):
            raise ValueError("coefficient grid needs a nonzero value")

    def to_json(self) -> dict:
        out = asdict(self)
        out["grid"] = list(self.grid)
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "SearchFamily":
        obj = dict(obj)
        if "grid" in obj:
            obj["grid"] = tuple(obj["grid"])
        return cls(**obj)

    # vectors ----------------------------------------------------------

    @cached_property
    def _vectors(self) -> tuple[np.ndarray, tuple[str, ...]]:
        W = self.window
        rows, kinds, seen = [], [], set()

        def add(x, kind):
            x = np.asarray(x, dtype=float)
            nz = np.flatnonzero(x)
            if nz.size == 0:
                return
            x = x / np.abs(x).max()
            if x[nz[0]] < 0:
                x = -x
            x = x + 0.0  # normalise -0.0
            key = x.tobytes()
            if key in seen:
                return
            seen.add(key)
            rows.append(x)
            kinds.append(kind)

        # structured witnesses: E-basis vector z, Schreier blocks
        for N in range(1, W // 2 + 1):
            z = np.zeros(W)
            z[0:2 * N:2] = -1.0
            z[1:2 * N:2] = 2.0
            add(z, "witness")
        N = 1
        while N * N + N <= W:
            add(_block(W, N * N, N), "witness")
            add(_block(W, 0, N), "witness")
            N += 1
        # signed indicators of contiguous blocks
        for k in range(1, min(self.max_support, W) + 1):
            for start in range(W - k + 1):
                for tail in itertools.product((1.0, -1.0), repeat=k - 1):
                    x = np.zeros(W)
                    x[start:start + k] = (1.0,) + tail
                    add(x, "indicator")
        # dense grid vectors on short blocks
        nonzero = [g for g in self.grid if g != 0]
        for k in range(1, min(self.dense_support, W) + 1):
            for start in range(W - k + 1):
                for vals in itertools.product(self.grid, repeat=k):
                    if vals[0] == 0 or vals[-1] == 0:
                        continue
                    x = np.zeros(W)
                    x[start:start + k] = vals
                    add(x, "grid")
        # seeded random sparse vectors
        rng = np.random.default_rng(self.seed)
        for _ in range(self.n_random):
            k = int(rng.integers(1, min(self.random_support, W) + 1))
            pos = rng.choice(W, size=k, replace=False)
            vals = rng.uniform(-1.0, 1.0, size=k)
            if rng.random() < 0.3:
                vals = rng.choice(nonzero, size=k)
            x = np.zeros(W)
            x[pos] = vals
            add(x, "random")
        X = np.array(rows) if rows else np.zeros((0, W))
        return X, tuple(kinds)

    def vectors(self, max_support: int | None = None) -> np.ndarray:
        """All family vectors, optionally only those with small support."""
        X, _ = self._vectors
        if max_support is None:
            return X
        return X[np.count_nonzero(X, axis=1) <= max_support]

    @property
    def kinds(self) -> tuple[str, ...]:
        return self._vectors[1]

    def size(self) -> int:
        return len(self._vectors[0])

    def sigma_subset(self) -> np.ndarray:
        """Vectors that get the expensive sigma ratios: the first ``sigma_vectors`` of a canonical stream.

        The stream depends only on the window, the grid and the seed, so a
        larger ``sigma_vectors`` extends the selection and no other parameter
        changes it; sigma-based estimates therefore grow with the family too.
        ``sigma_support`` drops longer vectors from the stream before the cut,
        which keeps numeric sigma affordable on non-lattice norms.
        """
        X = self._sigma_stream
        if self.sigma_support is not None:
            X = X[np.count_nonzero(X, axis=1) <= self.sigma_support]
        return X[: self.sigma_vectors]

    @cached_property
    def _sigma_stream(self) -> np.ndarray:
        W = self.window
        rng = np.random.default_rng([self.seed, 1])
        witnesses = [x for x, k in zip(self.vectors(), self.kinds) if k == "witness"]
        indicators, dense = [], []
        for k in range(2, min(SIGMA_SUPPORT, W) + 1):
            for start in range(W - k + 1):
                for tail in itertools.product((1.0, -1.0), repeat=k - 1):
                    indicators.append(_block_values(W, start, (1.0,) + tail))
        for k in (2, 3):
            for start in range(W - k + 1):
                for vals in itertools.product(self.grid, repeat=k):
                    if vals[0] != 0 and vals[-1] != 0:
                        dense.append(_block_values(W, start, vals))
        streams = [witnesses,
                   [indicators[i] for i in rng.permutation(len(indicators))],
                   [dense[i] for i in rng.permutation(len(dense))],
                   [_random_vector(W, rng) for _ in range(SIGMA_RANDOM)]]
        out, seen = [], set()
        for group in itertools.zip_longest(*streams):
            for x in group:
                if x is None or np.count_nonzero(x) < 2:
                    continue
                x = x / np.abs(x).max()
                x = -x if x[np.flatnonzero(x)[0]] < 0 else x
                x = x + 0.0
                if x.tobytes() not in seen:
                    seen.add(x.tobytes())
                    out.append(x)
        return np.array(out) if out else np.zeros((0, W))

    # index sets -------------------------------------------------------

    def sets(self, cap: int | None = None, exhaustive: bool = False) -> list[tuple[int, ...]]:
        """Nonempty subsets of the window, by size then lexicographically."""
        W = self.window
        top = W if (exhaustive and W <= self.set_exhaustive_window) else min(cap or self.set_cap, W)
        out = []
        for k in range(1, top + 1):
            out.extend(itertools.combinations(range(1, W + 1), k))
        return out

    def sign_patterns(self, k: int) -> list[tuple[int, ...]]:
        """All signs up to ``sign_cap``, beyond it only all-plus and alternating."""
        if k <= self.sign_cap:
            return list(itertools.product((1, -1), repeat=k))
        return [(1,) * k, tuple(1 if i % 2 == 0 else -1 for i in range(k))]


def _block_values(W, start, vals):
    x = np.zeros(W)
    x[start:start + len(vals)] = vals
    return x


def _random_vector(W, rng):
    k = int(rng.integers(2, min(6, W) + 1)) if W >= 2 else 1
    x = np.zeros(W)
    x[rng.choice(W, size=k, replace=False)] = rng.uniform(-1.0, 1.0, size=k)
    return x


def _block(W, start, length):
    x = np.zeros(W)
    x[start:start + length] = 1.0
    return x


def set_matrix(sets, window: int, signs=None) -> np.ndarray:
    """Rows ``1_{eps A}`` for a list of sets (and optional per-set signs)."""
    M = np.zeros((len(sets), window))
    for i, A in enumerate(sets):
        idx = np.array(A, dtype=int) - 1
        M[i, idx] = 1.0 if signs is None else np.asarray(signs[i], dtype=float)
    return M
