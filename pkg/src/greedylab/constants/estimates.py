"""Lower-bound estimators for greediness and democracy constants.

Every estimator maximises (or, for ``d(m)``, minimises) a ratio over a
:class:`SearchFamily` and returns the extremal value together with a witness
from which :func:`evaluate_witness` recomputes it from scratch.  Ratios are
evaluated in batches through :meth:`NormModel.norms`.
"""

from __future__ import annotations

import itertools
import math
import re
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..greedy import BudgetExceeded, greedy_sets_or_canonical
from ..optim import DEFAULT_BUDGET, DEFAULT_TOL, min_norm_over_coeffs, sigma_w, sigma_w_tilde
from ..spaces import EBasis, NormModel
from ..weights import Weight, measure
from .family import SearchFamily, set_matrix

NAMES = ("Kb", "Ku", "Cq", "Cd", "Cs", "Ca", "Cc", "Cu", "propD", "bidem",
         "Cg", "Cal", "Csg", "Cp", "D(m)", "d(m)")
_CHUNK = 1 << 15


@dataclass
class ConstantEstimate:
    name: str
    value: float
    witness: dict
    family: SearchFamily
    examined: int = 0
    status: str = "ok"  # ok | partial | skipped-unsupported
    known: Optional[float] = None
    budget_flags: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "value": self.value,
            "witness": self.witness,
            "examined": self.examined,
            "status": self.status,
            "known": self.known,
            "budget_flags": list(self.budget_flags),
            "family": self.family.to_json(),
        }


def _vec(x) -> list[float]:
    return [float(v) for v in np.asarray(x, dtype=float)]


def _idx(A) -> list[int]:
    return [int(a) for a in A]


def _batched_norms(model: NormModel, rows: np.ndarray) -> np.ndarray:
    if len(rows) <= _CHUNK:
        return model.norms(rows)
    return np.concatenate([model.norms(rows[i:i + _CHUNK]) for i in range(0, len(rows), _CHUNK)])


class _Best:
    """Running extremum of a ratio with a lazily built witness."""

    def __init__(self, sign: float = 1.0):
        self.sign = sign
        self.value = -math.inf * sign
        self.witness: dict = {}
        self.count = 0

    def offer(self, vals: np.ndarray, make_witness) -> None:
        if len(vals) == 0:
            return
        self.count += len(vals)
        k = int(np.argmax(vals)) if self.sign > 0 else int(np.argmin(vals))
        v = float(vals[k])
        if (v > self.value) if self.sign > 0 else (v < self.value):
            self.value = v
            self.witness = make_witness(k)


def _check_family(model: NormModel, family: SearchFamily) -> None:
    if family.window != model.window:
        raise ValueError(f"family window {family.window} differs from model window {model.window}")
    if family.size() == 0:
        raise ValueError("empty search family")


def _positive(den: np.ndarray) -> None:
    # nonzero vectors have positive norm; a zero here means a malformed instance
    if np.any(den < 1e-12):
        raise ArithmeticError("denominator below 1e-12 for a nonzero vector")


# basis and projection constants -------------------------------------------


def _est_Kb(model, w, family, **_):
    X = family.vectors()
    nx = _batched_norms(model, X)
    best = _Best()
    for m in range(1, model.window + 1):
        S = X.copy()
        S[:, m:] = 0.0
        best.offer(_batched_norms(model, S) / nx, lambda k, m=m: {"x": _vec(X[k]), "m": m})
    return best, []


def _subset_rows(x: np.ndarray):
    supp = np.flatnonzero(x)
    subsets, rows = [], []
    for r in range(len(supp) + 1):
        for c in itertools.combinations(supp, r):
            y = x.copy()
            y[list(c)] = 0.0
            subsets.append(tuple(int(i) + 1 for i in c))
            rows.append(y)
    return subsets, np.array(rows)


def _est_Ku(model, w, family, **_):
    X = family.vectors()
    nx = _batched_norms(model, X)
    best = _Best()
    for i, x in enumerate(X):
        subsets, rows = _subset_rows(x)
        best.offer(_batched_norms(model, rows) / nx[i],
                   lambda k, i=i, subsets=subsets: {"x": _vec(X[i]), "A": _idx(subsets[k])})
    return best, []


def _greedy_instances(x, family, flags, m_range=None):
    """(m, Lambda) for every greedy set of every admissible size."""
    k = int(np.count_nonzero(x))
    out = []
    for m in (m_range if m_range is not None else range(1, k + 1)):
        sets, overflow = greedy_sets_or_canonical(x, m, family.greedy_cap)
        if overflow and "greedy-cap" not in flags:
            flags.append("greedy-cap")
        out.extend((m, L) for L in sets)
    return out


def _est_Cq(model, w, family, **_):
    X = family.vectors()
    nx = _batched_norms(model, X)
    best, flags = _Best(), []
    for i, x in enumerate(X):
        # m = 0 (nothing removed) keeps the estimate >= 1
        inst = _greedy_instances(x, family, flags, range(0, int(np.count_nonzero(x)) + 1))
        rows = np.repeat(x[None, :], len(inst), axis=0)
        for j, (_, L) in enumerate(inst):
            rows[j, np.array(L, dtype=int) - 1] = 0.0
        best.offer(_batched_norms(model, rows) / nx[i],
                   lambda k, i=i, inst=inst: {"x": _vec(X[i]), "m": inst[k][0], "A": _idx(inst[k][1])})
    return best, flags


# democracy-type constants ---------------------------------------------------


def _signed_extremes(model, sets, family):
    """Per set: (max, min) of ``||1_{eps A}||`` over sign patterns, with the maximising/minimising signs."""
    W = model.window
    if model.is_lattice:
        vals = _batched_norms(model, set_matrix(sets, W))
        plus = [(1,) * len(A) for A in sets]
        return vals, vals, plus, plus, []
    flags = []
    owner, signs = [], []
    for i, A in enumerate(sets):
        pats = family.sign_patterns(len(A))
        if len(A) > family.sign_cap and "sign-cap" not in flags:
            flags.append("sign-cap")
        owner.extend([i] * len(pats))
        signs.extend(pats)
    M = set_matrix([sets[i] for i in owner], W, signs)
    vals = _batched_norms(model, M)
    owner = np.array(owner)
    n = len(sets)
    hi = np.full(n, -np.inf)
    lo = np.full(n, np.inf)
    hi_s, lo_s = [None] * n, [None] * n
    order = np.argsort(owner, kind="stable")
    bounds = np.searchsorted(owner[order], np.arange(n + 1))
    for i in range(n):
        seg = order[bounds[i]:bounds[i + 1]]
        a, b = seg[np.argmax(vals[seg])], seg[np.argmin(vals[seg])]
        hi[i], hi_s[i] = vals[a], signs[a]
        lo[i], lo_s[i] = vals[b], signs[b]
    return hi, lo, hi_s, lo_s, flags


def _pair_search(sets, num, den, weights):
    """max over (A, B) with w(A) <= w(B) of num[A] / den[B]; returns (value, iA, iB, count)."""
    order = np.argsort(weights, kind="stable")
    sw = weights[order]
    sden = den[order]
    # suffix minimum of den and where it is attained
    suf = np.minimum.accumulate(sden[::-1])[::-1]
    arg = np.empty(len(sden), dtype=int)
    best_j = len(sden) - 1
    for j in range(len(sden) - 1, -1, -1):
        if sden[j] <= sden[best_j]:
            best_j = j
        arg[j] = best_j
    pos = np.searchsorted(sw, weights, side="left")
    ratios = num / suf[pos]
    iA = int(np.argmax(ratios))
    return float(ratios[iA]), iA, int(order[arg[pos[iA]]]), len(sets) ** 2


def _weights_of(w, sets):
    return np.array([measure(w, A) for A in sets])


def _est_Cd(model, w, family, **_):
    sets = family.sets(exhaustive=True)
    vals = _batched_norms(model, set_matrix(sets, model.window))
    _positive(vals)
    value, a, b, count = _pair_search(sets, vals, vals, _weights_of(w, sets))
    best = _Best()
    best.value, best.count = value, count
    best.witness = {"A": _idx(sets[a]), "B": _idx(sets[b])}
    return best, []


def _est_Cs(model, w, family, **_):
    sets = family.sets(exhaustive=True)
    hi, lo, hi_s, lo_s, flags = _signed_extremes(model, sets, family)
    _positive(lo)
    value, a, b, count = _pair_search(sets, hi, lo, _weights_of(w, sets))
    best = _Best()
    best.value, best.count = value, count
    best.witness = {"A": _idx(sets[a]), "B": _idx(sets[b]), "eps": list(hi_s[a]), "eta": list(lo_s[b])}
    return best, flags


def _est_Cc(model, w, family, **_):
    sets = family.sets(exhaustive=True)
    vals = _batched_norms(model, set_matrix(sets, model.window))
    _positive(vals)
    weights = _weights_of(w, sets)
    mins = np.array([A[0] for A in sets])
    maxs = np.array([A[-1] for A in sets])
    best = _Best()
    for s in range(1, model.window):
        Aidx = np.flatnonzero(maxs == s)
        Bidx = np.flatnonzero(mins > s)
        if len(Aidx) == 0 or len(Bidx) == 0:
            continue
        sub = [sets[j] for j in Bidx]
        bw = weights[Bidx]
        order = np.argsort(bw, kind="stable")
        sw, sden = bw[order], vals[Bidx][order]
        suf = np.minimum.accumulate(sden[::-1])[::-1]
        pos = np.searchsorted(sw, weights[Aidx], side="left")
        ok = pos < len(sw)
        if not np.any(ok):
            continue
        Aok, pos = Aidx[ok], pos[ok]
        ratios = vals[Aok] / suf[pos]

        def wit(k, Aok=Aok, pos=pos, order=order, sden=sden, sub=sub):
            tail = np.arange(pos[k], len(sden))
            j = tail[np.argmin(sden[tail])]
            return {"A": _idx(sets[Aok[k]]), "B": _idx(sub[order[j]])}

        best.offer(ratios, wit)
    if best.count == 0:
        best.value, best.witness = 1.0, {"A": [], "B": []}
    return best, []


def _ca_vectors(family: SearchFamily) -> np.ndarray:
    X = list(family.vectors(family.ca_support))
    seen = {x.tobytes() for x in X}
    for A in family.sets():
        x = set_matrix([A], family.window)[0]
        if x.tobytes() not in seen:
            seen.add(x.tobytes())
            X.append(x)
    return np.array(X)


def _propA_projection_scan(model, w, family, X=None, t: float = 1.0):
    """Per vector: max over (A in supp, B off supp, eta) of ||x|| / ||x - P_A x + t 1_{eta B}||."""
    W = model.window
    X = _ca_vectors(family) if X is None else X
    sets = family.sets()
    masks = np.array([sum(1 << (a - 1) for a in B) for B in sets], dtype=np.int64)
    bw = _weights_of(w, sets)
    flags: list[str] = []
    if model.is_lattice:
        b_sets, b_signs = sets, [(1,) * len(B) for B in sets]
        b_owner = np.arange(len(sets))
    else:
        b_sets, b_signs, own = [], [], []
        for i, B in enumerate(sets):
            for s in family.sign_patterns(len(B)):
                b_sets.append(B)
                b_signs.append(s)
                own.append(i)
        b_owner = np.array(own)
    BM = set_matrix(b_sets, W, b_signs)
    # on lattice norms ||y + 1_B|| grows with B, so a B whose proper subsets
    # are all infeasible (w(B minus b) < w(A) for every b) is the only kind that matters
    sub_w = np.array([max((measure(w, B[:j] + B[j + 1:]) for j in range(len(B))), default=0.0)
                      if len(B) > 1 else -math.inf for B in sets])
    nx = _batched_norms(model, X)
    # everything except the coefficient values depends on supp(x) alone, so the
    # vectors are handled one support at a time (results keep the input order)
    groups: dict[int, list[int]] = {}
    for i, x in enumerate(X):
        groups.setdefault(sum(1 << int(j) for j in np.flatnonzero(x)), []).append(i)
    per_x: list = [None] * len(X)
    for smask, members in groups.items():
        supp = np.flatnonzero(X[members[0]])
        subsets = [tuple(int(i) + 1 for i in c)
                   for r in range(len(supp) + 1) for c in itertools.combinations(supp, r)]
        aw = np.array([measure(w, A) for A in subsets])
        cand = np.flatnonzero((masks[b_owner] & smask) == 0)
        feas = aw[:, None] <= bw[b_owner[cand]][None, :]
        if model.is_lattice:
            feas &= aw[:, None] > sub_w[b_owner[cand]][None, :]
        ai, bj = np.nonzero(feas)
        if len(ai) == 0:
            for i in members:
                per_x[i] = (-math.inf, None)
            continue
        keep = np.ones((len(subsets), W))
        for k, A in enumerate(subsets):
            keep[k, np.array(A, dtype=int) - 1] = 0.0
        keep = keep[ai]
        bsel = cand[bj]
        Bt = t * BM[bsel]
        n_rows = len(ai)
        step = max(1, _CHUNK // n_rows)
        for c0 in range(0, len(members), step):
            chunk = members[c0:c0 + step]
            rows = (keep[None, :, :] * X[chunk][:, None, :] + Bt[None, :, :]).reshape(-1, W)
            den = _batched_norms(model, rows).reshape(len(chunk), n_rows)
            _positive(den)
            for r, i in enumerate(chunk):
                ratios = nx[i] / den[r]
                k = int(np.argmax(ratios))
                j = bsel[k]
                per_x[i] = (float(ratios[k]), {
                    "x": _vec(X[i]), "A": _idx(subsets[ai[k]]), "B": _idx(b_sets[j]),
                    "eta": list(b_signs[j]), "examined": n_rows,
                })
    return per_x, flags


def _est_Ca(model, w, family, **_):
    per_x, flags = _propA_projection_scan(model, w, family)
    best = _Best()
    for v, wit in per_x:
        if wit is not None:
            n = wit.pop("examined")
            best.offer(np.array([v]), lambda k, wit=wit: wit)
            best.count += n - 1
    if best.count == 0:
        best.value, best.witness = 1.0, {}
    return best, flags


def _est_Cu(model, w, family, **_):
    X = family.vectors()
    nx = _batched_norms(model, X)
    best, flags = _Best(), []
    W = model.window
    for i, x in enumerate(X):
        inst = _greedy_instances(x, family, flags)
        rows, meta = [], []
        for m, L in inst:
            alpha = float(np.abs(x[np.array(L, dtype=int) - 1]).min())
            pats = [(1,) * len(L)] if model.is_lattice else family.sign_patterns(len(L))
            if not model.is_lattice and len(L) > family.sign_cap and "sign-cap" not in flags:
                flags.append("sign-cap")
            for s in pats:
                rows.append(set_matrix([L], W, [s])[0])
                meta.append((m, L, s, alpha))
        vals = _batched_norms(model, np.array(rows))
        alphas = np.array([t[3] for t in meta])
        best.offer(alphas * vals / nx[i],
                   lambda k, i=i, meta=meta: {"x": _vec(X[i]), "m": meta[k][0], "A": _idx(meta[k][1]),
                                              "eps": list(meta[k][2])})
    return best, flags


def _est_propD(model, w, family, **_):
    X = family.vectors()
    nx = _batched_norms(model, X)
    ind = (X != 0).astype(float)
    alpha = np.array([np.abs(x[x != 0]).min() for x in X])
    best = _Best()
    best.offer(alpha * _batched_norms(model, ind) / nx, lambda k: {"x": _vec(X[k])})
    return best, []


def _est_bidem(model, w, family, **_):
    sets = family.sets()
    hi, _, hi_s, _, flags = _signed_extremes(model, sets, family)
    W = model.window
    owner, signs = [], []
    for i, A in enumerate(sets):
        pats = family.sign_patterns(len(A))
        owner.extend([i] * len(pats))
        signs.extend(pats)
    dual = model.dual_norms(set_matrix([sets[i] for i in owner], W, signs))
    owner = np.array(owner)
    dmax = np.full(len(sets), -np.inf)
    dsign = [None] * len(sets)
    for r, i in enumerate(owner):
        if dual[r] > dmax[i]:
            dmax[i], dsign[i] = dual[r], signs[r]
    sizes = np.array([len(A) for A in sets], dtype=float)
    best = _Best()
    best.offer(hi * dmax / sizes,
               lambda k: {"A": _idx(sets[k]), "eps": list(hi_s[k]), "eta": list(dsign[k])})
    best.count = len(signs)
    return best, flags


# sigma-based ratios ---------------------------------------------------------


def _sigma_ratio_scan(name, model, w, family, budget, tol):
    X = family.sigma_subset()
    best, flags = _Best(), []
    cache: dict = {}
    try:
        for i, x in enumerate(X):
            k = int(np.count_nonzero(x))
            key_x = x.tobytes()
            for m, L in _greedy_instances(x, family, flags, range(1, k)):
                delta = measure(w, L)
                if name == "Cal":
                    ck = ("tilde", key_x, delta)
                    if ck not in cache:
                        cache[ck] = sigma_w_tilde(model, w, x, delta, budget=budget)
                else:
                    ck = ("free", key_x, delta)
                    if ck not in cache:
                        cache[ck] = sigma_w(model, w, x, delta, budget=budget, tol=tol)
                sig = cache[ck]
                if sig.value < 1e-12:
                    raise ArithmeticError("sigma vanished on a proper greedy instance")
                wit = {"x": _vec(x), "m": m, "A": _idx(L), "delta": delta,
                       "sigma_set": _idx(sig.witness_set), "sigma_coeffs": list(sig.witness_coeffs)}
                if name == "Csg":
                    res = min_norm_over_coeffs(model, x, L, tol)
                    num = res.value
                    wit["cheb_coeffs"] = list(res.coeffs)
                else:
                    r = x.copy()
                    r[np.array(L, dtype=int) - 1] = 0.0
                    num = model.norm(r)
                best.offer(np.array([num / sig.value]), lambda _k, wit=wit: wit)
    except BudgetExceeded as exc:
        flags.append("sigma-budget")
        partial = ConstantEstimate(name, best.value, best.witness, family, best.count, "partial",
                                   budget_flags=flags)
        raise BudgetExceeded(str(exc), partial=partial) from exc
    if best.count == 0:
        best.value, best.witness = 1.0, {}
    return best, flags


def _est_Cp(model, w, family, **_):
    X = family.vectors()
    W = model.window
    prefix = np.cumsum(w.values_upto(W))
    best, flags = _Best(), []
    for i, x in enumerate(X):
        inst = _greedy_instances(x, family, flags)
        nums, dens, meta = [], [], []
        for r, L in inst:
            wl = measure(w, L)
            num = x.copy()
            num[np.array(L, dtype=int) - 1] = 0.0
            for m in range(1, W + 1):
                if prefix[m - 1] > wl:
                    break
                den = x.copy()
                den[:m] = 0.0
                nums.append(num)
                dens.append(den)
                meta.append((r, L, m))
        if not meta:
            continue
        nv = _batched_norms(model, np.array(nums))
        dv = _batched_norms(model, np.array(dens))
        zero = dv < 1e-12
        if np.any(nv[zero] > 1e-12):
            raise ArithmeticError("partial-sum residual vanished while the greedy residual did not")
        keep = np.flatnonzero(~zero)
        best.offer(nv[keep] / dv[keep],
                   lambda k, i=i, meta=meta, keep=keep: {"x": _vec(X[i]), "r": meta[keep[k]][0],
                                                         "A": _idx(meta[keep[k]][1]), "m": meta[keep[k]][2]})
    if best.count == 0:
        best.value, best.witness = 0.0, {}
    return best, flags


# D(m), d(m) -----------------------------------------------------------------


def dm_table(model: NormModel, m_max: int, budget: int = 50_000_000, method: str = "auto") -> dict:
    """Exhaustive ``D(m)`` (sup over ``|A| <= m``) and ``d(m)`` (inf over ``|A| >= m``).

    Every nonempty set of the window with every sign pattern is visited, up
    to a global sign.  Returns per-size extrema and the derived tables.
    ``method="auto"`` replaces the enumeration by an equivalent exact dynamic
    program on the E-basis; ``"enumerate"`` always enumerates.
    """
    if method not in ("auto", "enumerate"):
        raise ValueError("method must be 'auto' or 'enumerate'")
    W = model.window
    total = 3**W
    if method == "auto" and isinstance(model.spec, EBasis):
        return _dm_pairs(model, m_max)
    if total > budget:
        raise BudgetExceeded(f"3^{W} sign/set patterns exceed budget {budget}")
    low = min(W, 10)
    high = W - low
    digits = np.array(list(itertools.product((0.0, 1.0, -1.0), repeat=low)))[:, ::-1]
    low_count = np.count_nonzero(digits, axis=1)
    groups = [np.flatnonzero(low_count == c) for c in range(low + 1)]
    gmin = np.full(W + 1, np.inf)
    gmax = np.full(W + 1, -np.inf)
    amin: list = [None] * (W + 1)
    amax: list = [None] * (W + 1)
    rows = np.zeros((len(digits), W))
    rows[:, :low] = digits
    for hp in itertools.product((0.0, 1.0, -1.0), repeat=high):
        nz = [v for v in hp if v != 0]
        if nz and nz[-1] < 0:
            continue  # -x has the same norm
        rows[:, low:] = hp
        vals = model.norms(rows)
        hc = len(nz)
        for c, g in enumerate(groups):
            size = c + hc
            if size == 0 or len(g) == 0:
                continue
            gv = vals[g]
            a, b = int(np.argmin(gv)), int(np.argmax(gv))
            if gv[a] < gmin[size]:
                gmin[size], amin[size] = gv[a], rows[g[a]].copy()
            if gv[b] > gmax[size]:
                gmax[size], amax[size] = gv[b], rows[g[b]].copy()
    D, d, Dw, dw = {}, {}, {}, {}
    for m in range(1, min(m_max, W) + 1):
        k = int(np.argmax(gmax[1:m + 1])) + 1
        D[m], Dw[m] = float(gmax[k]), amax[k]
        k = int(np.argmin(gmin[m:])) + m
        d[m], dw[m] = float(gmin[k]), amin[k]
    return {"D": D, "d": d, "D_witness": Dw, "d_witness": dw, "size_min": gmin, "size_max": gmax,
            "examined": total}


def _dm_pairs(model: NormModel, m_max: int) -> dict:
    """Exact ``D(m)``/``d(m)`` for norms ``sum_k f(pair_k) + max_k g(pair_k)`` over coordinate pairs.

    Equivalent to visiting all ``3^W`` signed sets: for every threshold ``V``
    among the attainable ``g`` values a knapsack over pairs (indexed by the
    number of nonzero coordinates) finds the best sum with every ``g <= V``
    (minimum) or some ``g >= V`` (maximum); adding ``V`` and optimising over
    ``V`` recovers the exact extremum of the whole norm.
    """
    W = model.window
    n_pairs = (W + 1) // 2
    states = []
    for k in range(n_pairs):
        second = (0.0, 1.0, -1.0) if 2 * k + 1 < W else (0.0,)
        st = []
        for a in (0.0, 1.0, -1.0):
            for b in second:
                u, v = model.spec.ambient(np.array([[a, b]]))
                st.append((a, b, int(a != 0) + int(b != 0), abs(float(u[0, 0])), abs(float(v[0, 0]))))
        states.append(st)
    levels = sorted({s[4] for st in states for s in st})
    gmin = np.full(W + 1, np.inf)
    gmax = np.full(W + 1, -np.inf)
    amin: list = [None] * (W + 1)
    amax: list = [None] * (W + 1)

    def rebuild(choice, c, flag=None):
        x = np.zeros(W)
        for k in range(n_pairs - 1, -1, -1):
            key = c if flag is None else (c, flag)
            i, prev = choice[k][key]
            a, b, size = states[k][i][:3]
            x[2 * k] = a
            if 2 * k + 1 < W:
                x[2 * k + 1] = b
            c = c - size
            if flag is not None:
                flag = prev
        return x

    for V in levels:
        # minimum with every g <= V
        dp = {0: 0.0}
        choice = []
        for st in states:
            nxt, ch = {}, {}
            for c, val in dp.items():
                for i, (_, _, size, f, g) in enumerate(st):
                    if g > V:
                        continue
                    key = c + size
                    if key not in nxt or val + f < nxt[key]:
                        nxt[key], ch[key] = val + f, (i, None)
            dp = nxt
            choice.append(ch)
        for c, val in dp.items():
            if c and val + V < gmin[c]:
                gmin[c], amin[c] = val + V, rebuild(choice, c)
        # maximum with some g >= V (flag records whether it has been reached)
        dp = {(0, False): 0.0}
        choice = []
        for st in states:
            nxt, ch = {}, {}
            for (c, hit), val in dp.items():
                for i, (_, _, size, f, g) in enumerate(st):
                    key = (c + size, hit or g >= V)
                    if key not in nxt or val + f > nxt[key]:
                        nxt[key], ch[key] = val + f, (i, hit)
            dp = nxt
            choice.append(ch)
        for (c, hit), val in dp.items():
            if c and hit and val + V > gmax[c]:
                gmax[c], amax[c] = val + V, rebuild(choice, c, True)
    # report the model's own evaluation of each witness
    for c in range(1, W + 1):
        gmin[c], gmax[c] = model.norm(amin[c]), model.norm(amax[c])
    D, d, Dw, dw = {}, {}, {}, {}
    for m in range(1, min(m_max, W) + 1):
        k = int(np.argmax(gmax[1:m + 1])) + 1
        D[m], Dw[m] = float(gmax[k]), amax[k]
        k = int(np.argmin(gmin[m:])) + m
        d[m], dw[m] = float(gmin[k]), amin[k]
    return {"D": D, "d": d, "D_witness": Dw, "d_witness": dw, "size_min": gmin, "size_max": gmax,
            "examined": 3**W}


def _vector_to_signed_set(v):
    A = [int(i) + 1 for i in np.flatnonzero(v)]
    return A, [int(np.sign(v[a - 1])) for a in A]


def _est_dm(kind, model, w, family, m=None, budget=None, **_):
    if m is None:
        raise ValueError(f"{kind} needs m")
    tab = dm_table(model, m, budget=budget or 50_000_000)
    key = "D" if kind == "D(m)" else "d"
    if m not in tab[key]:
        raise ValueError(f"m={m} exceeds the window")
    A, eps = _vector_to_signed_set(tab[f"{key}_witness"][m])
    best = _Best(1.0 if key == "D" else -1.0)
    best.value, best.count = tab[key][m], tab["examined"]
    best.witness = {"m": m, "A": A, "eps": eps}
    return best, []


# public entry points -------------------------------------------------------

_ESTIMATORS = {
    "Kb": _est_Kb, "Ku": _est_Ku, "Cq": _est_Cq, "Cd": _est_Cd, "Cs": _est_Cs, "Ca": _est_Ca,
    "Cc": _est_Cc, "Cu": _est_Cu, "propD": _est_propD, "bidem": _est_bidem, "Cp": _est_Cp,
}


def parse_name(name: str) -> tuple[str, Optional[int]]:
    """``"D(4)"`` -> ``("D(m)", 4)``; other names pass through."""
    mt = re.fullmatch(r"([Dd])\((\d+|m)\)", name.strip())
    if mt:
        m = None if mt.group(2) == "m" else int(mt.group(2))
        return f"{mt.group(1)}(m)", m
    if name not in NAMES:
        raise ValueError(f"unknown constant {name!r}; expected one of {', '.join(NAMES)}")
    return name, None


def estimate(name: str, model: NormModel, w: Weight, family: SearchFamily, *,
             m: Optional[int] = None, budget: int = DEFAULT_BUDGET, tol: float = DEFAULT_TOL) -> ConstantEstimate:
    """Search ``family`` for the largest (for ``d(m)``: smallest) value of a constant's defining ratio."""
    base, m_in_name = parse_name(name)
    m = m if m is not None else m_in_name
    _check_family(model, family)
    known = model.known_constants(w).get(base)
    label = base if m is None else base.replace("m", str(m))
    if base == "bidem" and not model.has_dual_closed_form:
        return ConstantEstimate(label, math.nan, {}, family, 0, "skipped-unsupported", known)
    if base in ("Cg", "Cal", "Csg"):
        best, flags = _sigma_ratio_scan(base, model, w, family, budget, tol)
    elif base in ("D(m)", "d(m)"):
        best, flags = _est_dm(base, model, w, family, m=m, budget=max(budget, 50_000_000))
    else:
        best, flags = _ESTIMATORS[base](model, w, family)
    return ConstantEstimate(label, float(best.value), best.witness, family, best.count, "ok", known, flags)


def evaluate_witness(name: str, model: NormModel, w: Weight, wit: dict) -> float:
    """Recompute an estimate's value from its witness alone."""
    base, _ = parse_name(re.sub(r"\(\d+\)", "(m)", name))
    W = model.window
    N = model.norm

    def vec():
        return np.asarray(wit["x"], dtype=float)

    def ind(A, s=None):
        x = np.zeros(W)
        for i, a in enumerate(A):
            x[a - 1] = 1.0 if s is None else s[i]
        return x

    def drop(x, A):
        y = x.copy()
        if len(A):
            y[np.array(A) - 1] = 0.0
        return y

    if base == "Kb":
        x = vec()
        s = x.copy()
        s[wit["m"]:] = 0.0
        return N(s) / N(x)
    if base in ("Ku", "Cq"):
        x = vec()
        return N(drop(x, wit["A"])) / N(x)
    if base in ("Cd", "Cc"):
        return N(ind(wit["A"])) / N(ind(wit["B"]))
    if base == "Cs":
        return N(ind(wit["A"], wit["eps"])) / N(ind(wit["B"], wit["eta"]))
    if base == "Ca":
        x = vec()
        return N(x) / N(drop(x, wit["A"]) + ind(wit["B"], wit["eta"]))
    if base == "Cu":
        x = vec()
        alpha = float(np.abs(x[np.array(wit["A"]) - 1]).min())
        return alpha * N(ind(wit["A"], wit["eps"])) / N(x)
    if base == "propD":
        x = vec()
        return float(np.abs(x[x != 0]).min()) * N((x != 0).astype(float)) / N(x)
    if base == "bidem":
        A = wit["A"]
        return N(ind(A, wit["eps"])) * model.dual_norm(ind(A, wit["eta"])) / len(A)
    if base in ("Cg", "Cal", "Csg"):
        x = vec()
        approx = x.copy()
        if wit["sigma_set"]:
            approx[np.array(wit["sigma_set"]) - 1] -= np.asarray(wit["sigma_coeffs"])
        if base == "Csg":
            num_v = x.copy()
            num_v[np.array(wit["A"]) - 1] -= np.asarray(wit["cheb_coeffs"])
            return N(num_v) / N(approx)
        return N(drop(x, wit["A"])) / N(approx)
    if base == "Cp":
        x = vec()
        tail = x.copy()
        tail[:wit["m"]] = 0.0
        return N(drop(x, wit["A"])) / N(tail)
    if base in ("D(m)", "d(m)"):
        return N(ind(wit["A"], wit["eps"]))
    raise ValueError(f"unknown constant {name!r}")
