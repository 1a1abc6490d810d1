"""Norm models on finitely supported coefficient vectors.

A model is a tree of norm constructors evaluated on basis coordinates.  Every
node works on a 2-D array whose rows are vectors, so families of test vectors
are evaluated in one call; ``offset`` is the absolute (0-based) position of
the node's first coordinate, used by weighted and Schreier nodes.

Coordinates of the dyadic ``f1q`` node are the dyadic intervals of the
selected levels, flattened level by level and left to right: level ``k``
contributes ``2**k`` consecutive coordinates, the ``j``-th one being the
interval ``[j 2^-k, (j+1) 2^-k)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Sequence

import numpy as np

from .weights import Weight


class UnsupportedDual(Exception):
    """Raised by dual-norm evaluation on models without a closed form."""


def _conj(p: float) -> float:
    if p == 1:
        return math.inf
    if math.isinf(p):
        return 1.0
    return p / (p - 1.0)


def _lp_rows(A: np.ndarray, p: float) -> np.ndarray:
    absA = np.abs(A)
    if A.shape[1] == 0:
        return np.zeros(A.shape[0])
    if math.isinf(p):
        return absA.max(axis=1)
    if p == 1:
        return absA.sum(axis=1)
    if p == 2:
        return np.sqrt((absA * absA).sum(axis=1))
    return (absA**p).sum(axis=1) ** (1.0 / p)


def _parse_p(p) -> float:
    if isinstance(p, str):
        if p.lower() in ("inf", "infinity", "oo"):
            return math.inf
        p = float(p)
    p = float(p)
    if not p >= 1:
        raise ValueError(f"exponent must be >= 1, got {p}")
    return p


def _dump_p(p: float):
    return "inf" if math.isinf(p) else p


class Node:
    """Base class of norm constructors."""

    lattice = True

    def size(self) -> Optional[int]:
        return None

    def norms(self, X: np.ndarray, offset: int = 0) -> np.ndarray:
        raise NotImplementedError

    def norm1(self, x: np.ndarray, offset: int = 0) -> float:
        """Norm of a single vector; overridden where a scalar loop beats numpy."""
        return float(self.norms(x[None, :], offset)[0])

    def has_dual(self) -> bool:
        return False

    def dual_norms(self, F: np.ndarray, offset: int = 0) -> np.ndarray:
        raise UnsupportedDual(f"{type(self).__name__} has no closed-form dual norm")

    def is_lattice(self) -> bool:
        return self.lattice

    def to_json(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class Lp(Node):
    p: float = 2.0

    def norms(self, X, offset=0):
        return _lp_rows(X, self.p)

    def has_dual(self):
        return True

    def dual_norms(self, F, offset=0):
        return _lp_rows(F, _conj(self.p))

    def to_json(self):
        return {"kind": "lp", "p": _dump_p(self.p)}


@dataclass(frozen=True)
class WeightedLp(Node):
    """``(sum |a_n|^p w_n)^(1/p)`` for finite ``p``."""

    p: float = 1.0
    weight: Weight = field(default_factory=Weight)

    def __post_init__(self):
        if math.isinf(self.p):
            raise ValueError("weighted_lp needs a finite exponent")

    def norms(self, X, offset=0):
        w = self.weight.values_upto(X.shape[1], offset)
        return _lp_rows(X * w ** (1.0 / self.p), self.p)

    def has_dual(self):
        return True

    def dual_norms(self, F, offset=0):
        w = self.weight.values_upto(F.shape[1], offset)
        return _lp_rows(F * w ** (-1.0 / self.p), _conj(self.p))

    def to_json(self):
        return {"kind": "weighted_lp", "p": _dump_p(self.p), "weight": self.weight.to_json()}


@dataclass(frozen=True)
class _Composite(Node):
    parts: tuple = ()
    sizes: Optional[tuple] = None

    def is_lattice(self):
        return all(p.is_lattice() for p in self.parts)

    def size(self):
        if self.sizes is not None:
            return int(sum(self.sizes))
        sz = [p.size() for p in self.parts]
        return None if any(s is None for s in sz) else int(sum(sz))

    def layout(self, width: int) -> list[tuple[int, int]]:
        """Split ``width`` coordinates into (start, stop) ranges, one per part."""
        if self.sizes is not None:
            sizes = list(self.sizes)
        else:
            sizes = [p.size() for p in self.parts]
            free = [i for i, s in enumerate(sizes) if s is None]
            if len(free) > 1:
                raise ValueError("at most one direct-sum part may have a free size")
            if free:
                sizes[free[0]] = width - sum(s for s in sizes if s is not None)
        if sum(sizes) != width or any(s < 0 for s in sizes):
            raise ValueError(f"direct-sum parts of sizes {sizes} do not cover {width} coordinates")
        out, start = [], 0
        for s in sizes:
            out.append((start, start + s))
            start += s
        return out

    def _part_values(self, X, offset, dual=False):
        cols = []
        for part, (a, b) in zip(self.parts, self.layout(X.shape[1])):
            fn = part.dual_norms if dual else part.norms
            cols.append(fn(X[:, a:b], offset + a))
        return np.stack(cols, axis=1) if cols else np.zeros((X.shape[0], 0))

    def has_dual(self):
        return all(p.has_dual() for p in self.parts)

    def _part_norm1(self, x, offset):
        return [part.norm1(x[a:b], offset + a) for part, (a, b) in zip(self.parts, self.layout(len(x)))]

    def _json(self, kind):
        out = {"kind": kind, "parts": [p.to_json() for p in self.parts]}
        if self.sizes is not None:
            out["sizes"] = list(self.sizes)
        return out


@dataclass(frozen=True)
class DirectSumInf(_Composite):
    """``(+)_inf`` of parts on consecutive coordinate ranges."""

    def norms(self, X, offset=0):
        V = self._part_values(X, offset)
        return V.max(axis=1) if V.shape[1] else np.zeros(X.shape[0])

    def norm1(self, x, offset=0):
        return max(self._part_norm1(x, offset), default=0.0)

    def dual_norms(self, F, offset=0):
        if not self.has_dual():
            return super().dual_norms(F, offset)
        return self._part_values(F, offset, dual=True).sum(axis=1)

    def to_json(self):
        return self._json("dsum_inf")


@dataclass(frozen=True)
class DirectSumL1(_Composite):
    """``(+)_{l1}`` of parts on consecutive coordinate ranges."""

    def norms(self, X, offset=0):
        return self._part_values(X, offset).sum(axis=1)

    def norm1(self, x, offset=0):
        total = 0.0
        for v in self._part_norm1(x, offset):
            total += v
        return total

    def dual_norms(self, F, offset=0):
        if not self.has_dual():
            return super().dual_norms(F, offset)
        V = self._part_values(F, offset, dual=True)
        return V.max(axis=1) if V.shape[1] else np.zeros(F.shape[0])

    def to_json(self):
        return self._json("dsum_l1")


@dataclass(frozen=True)
class MaxOf(_Composite):
    """Pointwise maximum of several norms on the same coordinates."""

    def size(self):
        sz = {p.size() for p in self.parts} - {None}
        if len(sz) > 1:
            raise ValueError("max_of parts disagree on their dimension")
        return sz.pop() if sz else None

    def norms(self, X, offset=0):
        return np.max(np.stack([p.norms(X, offset) for p in self.parts], axis=1), axis=1)

    def norm1(self, x, offset=0):
        return max(p.norm1(x, offset) for p in self.parts)

    def has_dual(self):
        return False

    def to_json(self):
        return {"kind": "max_of", "parts": [p.to_json() for p in self.parts]}


@dataclass(frozen=True)
class Schreier(Node):
    """Sup of ``sum_{n in A} |a_n|`` over sets with ``|A| <= sqrt(min A)``."""

    def norms(self, X, offset=0):
        n = X.shape[1]
        absX = np.abs(X)
        best = np.zeros(X.shape[0])
        for m in range(n):
            extra = min(math.isqrt(offset + m + 1) - 1, n - m - 1)
            val = absX[:, m].copy()
            if extra > 0:
                tail = np.sort(absX[:, m + 1:], axis=1)[:, ::-1]
                val += tail[:, :extra].sum(axis=1)
            best = np.maximum(best, val)
        return best

    def to_json(self):
        return {"kind": "schreier"}


@dataclass(frozen=True)
class James(Node):
    """James norm: sup over consecutive-block partitions of ``(sum |block sum|^q)^(1/q)``."""

    q: float = 2.0
    lattice = False

    def __post_init__(self):
        if not (1 <= self.q < math.inf):
            raise ValueError("james needs 1 <= q < inf")

    def norms(self, X, offset=0):
        n = X.shape[1]
        P = np.concatenate([np.zeros((X.shape[0], 1)), np.cumsum(X, axis=1)], axis=1)
        f = np.zeros((X.shape[0], n + 1))
        for i in range(1, n + 1):
            cand = f[:, :i] + np.abs(P[:, i:i + 1] - P[:, :i]) ** self.q
            f[:, i] = cand.max(axis=1)
        return f[:, n] ** (1.0 / self.q)

    def norm1(self, x, offset=0):
        q = self.q
        pref = [0.0]
        for a in x.tolist():
            pref.append(pref[-1] + a)
        f = [0.0]
        for i in range(1, len(pref)):
            pi = pref[i]
            if q == 2.0:
                f.append(max([fj + (pi - pj) * (pi - pj) for fj, pj in zip(f, pref)]))
            else:
                f.append(max([fj + abs(pi - pj) ** q for fj, pj in zip(f, pref)]))
        return f[-1] ** (1.0 / q)

    def to_json(self):
        return {"kind": "james", "q": self.q}


@dataclass(frozen=True)
class F1q(Node):
    """Dyadic Triebel-Lizorkin type norm restricted to the listed levels."""

    q: float = 2.0
    levels: tuple = (0,)

    def __post_init__(self):
        lv = tuple(int(k) for k in self.levels)
        if not lv or any(k < 0 for k in lv) or list(lv) != sorted(set(lv)):
            raise ValueError("f1q levels must be distinct, increasing and >= 0")
        object.__setattr__(self, "levels", lv)
        if not self.q >= 1:
            raise ValueError("f1q needs q >= 1")

    def size(self):
        return sum(2**k for k in self.levels)

    def norms(self, X, offset=0):
        if X.shape[1] != self.size():
            raise ValueError(
                f"f1q on levels {self.levels} has {self.size()} coordinates, got {X.shape[1]}"
            )
        K = self.levels[-1]
        cells = 2**K
        G = np.zeros((X.shape[0], cells))
        start = 0
        for k in self.levels:
            block = np.abs(X[:, start:start + 2**k]) * float(2**k)
            # each level-k interval covers 2**(K-k) consecutive cells
            spread = np.repeat(block, 2 ** (K - k), axis=1)
            if math.isinf(self.q):
                G = np.maximum(G, spread)
            else:
                G += spread**self.q
            start += 2**k
        if not math.isinf(self.q):
            G = G ** (1.0 / self.q)
        return G.sum(axis=1) / cells

    def to_json(self):
        return {"kind": "f1q", "q": _dump_p(self.q), "levels": list(self.levels)}


@dataclass(frozen=True)
class RosenthalWoo(Node):
    """``(sum |a_n|^q)^(1/q)  v  (sum |a_n|^p w_n)^(1/p)``; the canonical basis of X_{q,p,w^(1/p)}."""

    q: float = math.inf
    p: float = 1.0
    weight: Weight = field(default_factory=Weight)

    def __post_init__(self):
        if not (1 < self.q <= math.inf) or not (1 <= self.p < math.inf):
            raise ValueError("rosenthal_woo needs q in (1, inf] and p in [1, inf)")

    def norms(self, X, offset=0):
        w = self.weight.values_upto(X.shape[1], offset)
        absX = np.abs(X)
        first = _lp_rows(absX, self.q)
        if self.p == 1:
            second = absX @ w
        else:
            second = (absX**self.p @ w) ** (1.0 / self.p)
        return np.maximum(first, second)

    def to_json(self):
        return {"kind": "rosenthal_woo", "q": _dump_p(self.q), "p": self.p,
                "weight": self.weight.to_json()}


@dataclass(frozen=True)
class RWSumming(Node):
    """``(sum |a_n|^q)^(1/q)  v  sup_j |sum_{n>=j} a_n w_n|`` (summing-basis variant)."""

    q: float = 2.0
    weight: Weight = field(default_factory=Weight)
    lattice = False

    def norms(self, X, offset=0):
        w = self.weight.values_upto(X.shape[1], offset)
        tails = np.cumsum((X * w)[:, ::-1], axis=1)
        second = np.abs(tails).max(axis=1) if X.shape[1] else np.zeros(X.shape[0])
        return np.maximum(_lp_rows(X, self.q), second)

    def to_json(self):
        return {"kind": "rw_summing", "q": _dump_p(self.q), "weight": self.weight.to_json()}


@dataclass(frozen=True)
class EBasis(Node):
    """Basis of l1 (+) c0 with ``E_{2n-1} = (e_n/2, -f_n/2)``, ``E_{2n} = (e_n/4, 3f_n/4)``.

    The ambient norm is ``||x||_1 + ||y||_inf``.
    """

    lattice = False

    def ambient(self, X):
        n = X.shape[1]
        if n % 2:
            X = np.concatenate([X, np.zeros((X.shape[0], 1))], axis=1)
        odd, even = X[:, 0::2], X[:, 1::2]
        return 0.25 * even + 0.5 * odd, 0.75 * even - 0.5 * odd

    def norms(self, X, offset=0):
        if X.shape[1] == 0:
            return np.zeros(X.shape[0])
        u, v = self.ambient(X)
        return np.abs(u).sum(axis=1) + np.abs(v).max(axis=1)

    def norm1(self, x, offset=0):
        vals = x.tolist()
        if len(vals) % 2:
            vals.append(0.0)
        l1, sup = 0.0, 0.0
        for k in range(0, len(vals), 2):
            odd, even = vals[k], vals[k + 1]
            l1 += abs(0.25 * even + 0.5 * odd)
            sup = max(sup, abs(0.75 * even - 0.5 * odd))
        return l1 + sup

    def to_json(self):
        return {"kind": "ebasis"}


def parse_spec(obj: dict) -> Node:
    """Build a node tree from the JSON grammar."""
    if not isinstance(obj, dict) or "kind" not in obj:
        raise ValueError(f"space spec node must be an object with a 'kind': {obj!r}")
    kind = obj["kind"]
    sizes = tuple(int(s) for s in obj["sizes"]) if "sizes" in obj else None
    if kind == "lp":
        return Lp(_parse_p(obj.get("p", 2)))
    if kind == "weighted_lp":
        return WeightedLp(_parse_p(obj.get("p", 1)), Weight.from_json(obj["weight"]))
    if kind in ("dsum_inf", "dsum_l1", "max_of"):
        parts = tuple(parse_spec(p) for p in obj["parts"])
        if not parts:
            raise ValueError(f"{kind} needs at least one part")
        if kind == "max_of":
            return MaxOf(parts)
        cls = DirectSumInf if kind == "dsum_inf" else DirectSumL1
        if sizes is not None and len(sizes) != len(parts):
            raise ValueError("'sizes' must list one size per part")
        return cls(parts, sizes)
    if kind == "schreier":
        return Schreier()
    if kind == "james":
        return James(float(obj.get("q", 2)))
    if kind == "f1q":
        return F1q(_parse_p(obj.get("q", 2)), tuple(obj.get("levels", (0,))))
    if kind == "rosenthal_woo":
        return RosenthalWoo(_parse_p(obj.get("q", "inf")), _parse_p(obj.get("p", 1)),
                            Weight.from_json(obj.get("weight", {"kind": "constant"})))
    if kind == "rw_summing":
        return RWSumming(_parse_p(obj.get("q", 2)),
                         Weight.from_json(obj.get("weight", {"kind": "constant"})))
    if kind == "ebasis":
        return EBasis()
    raise ValueError(f"unknown space kind {kind!r}")


def pathological_spec(q: float = 2.0, blocks: int = 3) -> Node:
    """``(+)_{l1}`` of ``max(f1q, J_q)`` blocks, the N-th block using levels 0..N-1."""
    parts = []
    for N in range(1, blocks + 1):
        levels = tuple(range(N))
        parts.append(MaxOf((F1q(q, levels), James(q))))
    return DirectSumL1(tuple(parts))


def _validate_layout(node: Node, width: int) -> None:
    """Check that every direct sum in the tree tiles its coordinates."""
    if isinstance(node, MaxOf):
        for part in node.parts:
            _validate_layout(part, width)
    elif isinstance(node, _Composite):
        for part, (a, b) in zip(node.parts, node.layout(width)):
            _validate_layout(part, b - a)
    elif node.size() is not None and node.size() != width:
        raise ValueError(f"{node.to_json()['kind']} part has {node.size()} coordinates, got {width}")


@dataclass(frozen=True)
class NormModel:
    """A norm tree bound to an index window ``[1, window]``."""

    spec: Node
    window: int

    def __post_init__(self):
        fixed = self.spec.size()
        if fixed is not None and fixed != self.window:
            raise ValueError(f"spec has {fixed} coordinates but window is {self.window}")
        if self.window < 1:
            raise ValueError("window must be >= 1")
        _validate_layout(self.spec, self.window)

    @classmethod
    def build(cls, spec, window: Optional[int] = None) -> "NormModel":
        if isinstance(spec, dict):
            node = parse_spec(spec)
        elif isinstance(spec, Node):
            node = spec
        else:
            raise ValueError(f"space spec must be a JSON object, got {spec!r}")
        if window is None:
            window = node.size()
            if window is None:
                raise ValueError("window is required for specs without a fixed size")
        return cls(node, int(window))

    # evaluation -------------------------------------------------------

    def _check(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != self.window:
            raise ValueError(f"vector has {X.shape[1]} coordinates, model window is {self.window}")
        if not np.all(np.isfinite(X)):
            raise ValueError("non-finite coefficients")
        return X

    def norm(self, x) -> float:
        return self.spec.norm1(self._check(x)[0])

    def norms(self, X) -> np.ndarray:
        X = self._check(X)
        if X.shape[0] == 0:
            return np.zeros(0)
        return self.spec.norms(X)

    @property
    def has_dual_closed_form(self) -> bool:
        return self.spec.has_dual()

    @property
    def is_lattice(self) -> bool:
        return self.spec.is_lattice()

    def dual_norm(self, f) -> float:
        return float(self.spec.dual_norms(self._check(f))[0])

    def dual_norms(self, F) -> np.ndarray:
        return self.spec.dual_norms(self._check(F))

    def vector(self, coeffs: dict | Sequence[float]) -> np.ndarray:
        """Dense coefficient vector from a list or a ``{index: value}`` mapping."""
        x = np.zeros(self.window)
        if isinstance(coeffs, dict):
            for n, a in coeffs.items():
                n = int(n)
                if not 1 <= n <= self.window:
                    raise ValueError(f"index {n} outside window [1, {self.window}]")
                x[n - 1] = a
            return x
        vals = np.asarray(coeffs, dtype=float)
        if len(vals) > self.window:
            if np.any(vals[self.window:] != 0):
                raise ValueError(f"nonzero coefficient outside window [1, {self.window}]")
            vals = vals[: self.window]
        x[: len(vals)] = vals
        return x

    # metadata ---------------------------------------------------------

    @cached_property
    def basis_norms(self) -> np.ndarray:
        return self.norms(np.eye(self.window))

    def frame_bounds(self) -> tuple[float, float, bool]:
        """``(c1, c2, exact)`` for ``||e_n||`` and ``||e_n^*||`` over the window."""
        return self._frame

    @cached_property
    def _frame(self) -> tuple[float, float, bool]:
        en = self.basis_norms
        if self.is_lattice:
            # absolute norms: ||e_n^*|| = 1 / ||e_n|| exactly
            both = np.concatenate([en, 1.0 / en])
            return float(both.min()), float(both.max()), True
        dual_lb = self.dual_lower_bounds()
        both = np.concatenate([en, dual_lb])
        return float(both.min()), float(both.max()), False

    def dual_lower_bounds(self, seed: int = 0, samples: int = 64) -> np.ndarray:
        """Lower bounds of ``||e_n^*||`` via ``max |x_n| / ||x||`` over a probe family."""
        grid = np.array([0.0, 0.25, -0.25, 0.5, -0.5, 1.0, -1.0])
        rng = np.random.default_rng(seed)
        out = np.zeros(self.window)
        for n in range(self.window):
            nbrs = [j for j in (n - 1, n + 1) if 0 <= j < self.window]
            rows = []
            for vals in np.array(np.meshgrid(*([grid] * len(nbrs)), indexing="ij")).reshape(len(nbrs), -1).T:
                x = np.zeros(self.window)
                x[n] = 1.0
                x[nbrs] = vals
                rows.append(x)
            for _ in range(samples):
                x = rng.choice(grid, size=self.window) * (rng.random(self.window) < 0.3)
                x[n] = 1.0
                rows.append(x)
            X = np.array(rows)
            out[n] = float(np.max(1.0 / self.norms(X)))
        return out

    def known_constants(self, w: Weight) -> dict[str, float]:
        """Analytically known constants for this model under the measure weight ``w``."""
        out: dict[str, float] = {}
        node = self.spec
        if self.is_lattice:
            # absolute norms are 1-unconditional, which pins these
            out.update(Kb=1.0, Ku=1.0, Cq=1.0, Cu=1.0, propD=1.0)
        if isinstance(node, Lp) and w.is_constant:
            out.update(Ca=1.0, Cd=1.0, Cs=1.0, Cc=1.0, Cg=1.0, Cal=1.0)
        if isinstance(node, Schreier) and w.is_constant:
            out.update(Cc=1.0)
        if isinstance(node, RosenthalWoo) and node.weight == w:
            if math.isinf(node.q):
                out.update(Ca=1.0, Cg=1.0, Cal=1.0)
            elif w.is_nonincreasing:
                out.update(Cc=1.0)
        return out

    def to_json(self) -> dict:
        return self.spec.to_json()
