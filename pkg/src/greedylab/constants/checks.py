"""Named inequality checks, each executed instance by instance.

A check pulls the constants it needs either from the model's analytically
known values (``exact`` mode, where pass/fail is binding) or from family
estimates (``estimate`` mode, where only the ratios are informative because
a lower bound on the right-hand side proves nothing).  ``comparison`` checks
relate estimates to each other through instance-level chains that hold by
construction, and ``qualitative`` checks report growth behaviour.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from ..greedy import BudgetExceeded
from ..optim import DEFAULT_BUDGET, DEFAULT_TOL, sigma_w, sigma_w_tilde
from ..spaces import NormModel
from ..weights import Weight, equivalence_constants, measure, window_limsup
from .estimates import (
    ConstantEstimate,
    _batched_norms,
    _ca_vectors,
    _greedy_instances,
    _propA_projection_scan,
    _signed_extremes,
    _subset_rows,
    _vec,
    _weights_of,
    estimate,
)
from .family import SearchFamily, set_matrix

REL_TOL = 1e-9
ABS_TOL = 1e-12


def passes(lhs: float, rhs: float) -> bool:
    return lhs <= rhs * (1 + REL_TOL) + ABS_TOL


@dataclass
class CheckReport:
    check_id: str
    mode: str  # exact | estimate | comparison | qualitative
    instances: list[dict] = field(default_factory=list)
    constants: dict = field(default_factory=dict)
    budget_flags: list[str] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)

    def add(self, lhs: float, rhs: float, witness: dict, label: str = "") -> None:
        lhs, rhs = float(lhs), float(rhs)
        if rhs < ABS_TOL:
            raise ArithmeticError(f"{self.check_id}: right-hand side {rhs} below 1e-12")
        self.instances.append({"label": label, "lhs": lhs, "rhs": rhs, "ratio": lhs / rhs,
                               "pass": passes(lhs, rhs), "witness": witness})

    @property
    def max_ratio(self) -> float:
        return max((i["ratio"] for i in self.instances), default=0.0)

    @property
    def all_pass(self) -> bool:
        return all(i["pass"] for i in self.instances)

    @property
    def binding(self) -> bool:
        """Whether ``all_pass`` certifies anything (exact constants or chained comparisons)."""
        return self.mode in ("exact", "comparison")

    def to_json(self) -> dict:
        return {
            "check_id": self.check_id,
            "mode": self.mode,
            "binding": self.binding,
            "all_pass": self.all_pass,
            "max_ratio": self.max_ratio,
            "n_instances": len(self.instances),
            "constants": self.constants,
            "budget_flags": list(self.budget_flags),
            "notes": list(self.notes),
            "instances": self.instances,
        }


class _Ctx:
    """Constant lookup shared by the checks of one run (known values first, then estimates)."""

    def __init__(self, model, w, family, budget, tol):
        self.model, self.w, self.family = model, w, family
        self.budget, self.tol = budget, tol
        self.known = model.known_constants(w)
        self.cache: dict[str, ConstantEstimate] = {}
        self.used: dict = {}
        self.flags: list[str] = []

    def est(self, name: str, **kw) -> ConstantEstimate:
        if name not in self.cache:
            e = estimate(name, self.model, self.w, kw.get("family", self.family),
                         budget=self.budget, tol=self.tol)
            self.cache[name] = e
            for f in e.budget_flags:
                if f not in self.flags:
                    self.flags.append(f)
        return self.cache[name]

    def const(self, name: str, prefer_known: bool = True) -> float:
        if prefer_known and name in self.known:
            self.used[name] = {"value": self.known[name], "source": "known"}
            return self.known[name]
        e = self.est(name)
        self.used[name] = {"value": e.value, "source": "estimate"}
        return e.value

    def c2(self) -> float:
        c1, c2, exact = self.model.frame_bounds()
        self.used["c2"] = {"value": c2, "source": "known" if exact else "estimate"}
        return c2

    def mode(self) -> str:
        return "exact" if all(u["source"] == "known" for u in self.used.values()) else "estimate"


def _drop(x, A):
    y = x.copy()
    if len(A):
        y[np.array(A) - 1] = 0.0
    return y


def _sigma_instances(ctx, tilde: bool):
    """Yield ``(x, m, Lambda, lhs, sigma_result)`` over the family's sigma subset."""
    model, w, family = ctx.model, ctx.w, ctx.family
    cache = {}
    for x in family.sigma_subset():
        k = int(np.count_nonzero(x))
        for m, L in _greedy_instances(x, family, ctx.flags, range(1, k)):
            delta = measure(w, L)
            key = (x.tobytes(), delta)
            if key not in cache:
                fn = sigma_w_tilde if tilde else sigma_w
                kw = {} if tilde else {"tol": ctx.tol}
                cache[key] = fn(model, w, x, delta, budget=ctx.budget, **kw)
            yield x, m, L, model.norm(_drop(x, L)), cache[key]


# individual checks ----------------------------------------------------------


def _greedy_char_upper(ctx, rep, tilde=False):
    K1 = ctx.const("Cq" if tilde else "Ku")
    Ca = ctx.const("Ca")
    rep.mode = ctx.mode()
    for x, m, L, lhs, sig in _sigma_instances(ctx, tilde):
        rep.add(lhs, K1 * Ca * sig.value,
                {"x": _vec(x), "m": m, "A": list(L), "delta": measure(ctx.w, L),
                 "sigma": sig.value, "sigma_set": list(sig.witness_set)})


def _partial_greedy_instances(ctx):
    """Per vector: all (r, Lambda, m) with ``w([1, m]) <= w(Lambda)``, as batched rows."""
    model, w, family = ctx.model, ctx.w, ctx.family
    W = model.window
    prefix = np.cumsum(w.values_upto(W))
    for x in family.vectors():
        meta = []
        for r, L in _greedy_instances(x, family, ctx.flags):
            wl = measure(w, L)
            for m in range(1, W + 1):
                if prefix[m - 1] > wl:
                    break
                meta.append((r, L, m))
        if meta:
            yield x, meta


def _partially_greedy_forward(ctx, rep):
    Cq, Cc = ctx.const("Cq"), ctx.const("Cc")
    # x - G_r x = tail - P_B x + P_A x with ||P_B x|| <= 2 Cq ||tail|| and
    # ||P_A x|| <= 8 Cq^3 Cc ||tail||
    K = 1 + 2 * Cq + 8 * Cq**3 * Cc
    rep.constants["K"] = K
    rep.mode = ctx.mode()
    model = ctx.model
    for x, meta in _partial_greedy_instances(ctx):
        nums = np.array([_drop(x, L) for _, L, _ in meta])
        dens = np.array([np.where(np.arange(len(x)) < m, 0.0, x) for _, _, m in meta])
        nv, dv = _batched_norms(model, nums), _batched_norms(model, dens)
        keep = np.flatnonzero(dv >= ABS_TOL)
        if len(keep) == 0:
            continue
        k = keep[int(np.argmax(nv[keep] / dv[keep]))]
        r, L, m = meta[k]
        rep.add(nv[k], K * dv[k], {"x": _vec(x), "r": r, "A": list(L), "m": m})


def _partially_greedy_reverse(ctx, rep):
    Cp, Kb, c2 = ctx.const("Cp"), ctx.const("Kb"), ctx.c2()
    K = (Cp + 1) * (Kb + 1) + c2**2
    rep.constants["K"] = K
    rep.mode = ctx.mode()
    model = ctx.model
    for x in ctx.family.vectors():
        inst = _greedy_instances(x, ctx.family, ctx.flags)
        rows = np.array([x - _drop(x, L) for _, L in inst])
        vals = _batched_norms(model, rows)
        k = int(np.argmax(vals))
        rep.add(vals[k], K * model.norm(x), {"x": _vec(x), "r": inst[k][0], "A": list(inst[k][1])})


def _propA_implies_superdem(ctx, rep):
    Cs = ctx.est("Cs")
    Ca = ctx.est("Ca")
    ctx.used.update(Cs={"value": Cs.value, "source": "estimate"}, Ca={"value": Ca.value, "source": "estimate"})
    model = ctx.model
    # the projection-form instance x = 1_A, A \ B against B \ A realises ||1_A|| / ||1_B||
    A, B = Cs.witness["A"], Cs.witness["B"]
    x = set_matrix([A], model.window)[0]
    Aset, Bset = [a for a in A if a not in B], [b for b in B if b not in A]
    y = _drop(x, Aset) + set_matrix([Bset], model.window)[0] if Bset else _drop(x, Aset)
    derived = model.norm(x) / model.norm(y) if np.any(y) else 0.0
    Ca_eff = max(Ca.value, derived)
    rep.add(Cs.value, 2 * Ca_eff, {"Cs": Cs.witness, "Ca": Ca.witness, "derived_Ca_ratio": derived},
            "Cs <= 2 Ca")
    rep.mode = "comparison"


def _original_form_scan(ctx, t_values=(1.0,)):
    """Per vector: worst ``||x + t 1_{eps A}|| / ||x + t 1_{eta B}||`` over admissible (A, B)."""
    model, w, family = ctx.model, ctx.w, ctx.family
    W = model.window
    X = _ca_vectors(family)
    sets = family.sets()
    n = len(sets)
    masks = np.array([sum(1 << (a - 1) for a in S) for S in sets], dtype=np.int64)
    disjoint = (masks[:, None] & masks[None, :]) == 0
    weights = _weights_of(w, sets)
    wok = weights[:, None] <= weights[None, :]
    if model.is_lattice:
        pats = [[(1,) * len(S)] for S in sets]
    else:
        pats = [family.sign_patterns(len(S)) for S in sets]
    owner = np.array([i for i in range(n) for _ in pats[i]])
    signs = [s for i in range(n) for s in pats[i]]
    SM = set_matrix([sets[i] for i in owner], W, signs)
    out = []
    for x in X:
        smask = sum(1 << int(j) for j in np.flatnonzero(x))
        off = (masks & smask) == 0
        for t in t_values:
            rows_ok = off[owner]
            vals = np.full(len(owner), np.nan)
            vals[rows_ok] = _batched_norms(model, x + t * SM[rows_ok])
            hi = np.full(n, -np.inf)
            lo = np.full(n, np.inf)
            hi_arg = np.zeros(n, dtype=int)
            lo_arg = np.zeros(n, dtype=int)
            for r in np.flatnonzero(rows_ok):
                i = owner[r]
                if vals[r] > hi[i]:
                    hi[i], hi_arg[i] = vals[r], r
                if vals[r] < lo[i]:
                    lo[i], lo_arg[i] = vals[r], r
            valid = disjoint & wok & off[:, None] & off[None, :]
            if not valid.any():
                continue
            with np.errstate(invalid="ignore", divide="ignore"):
                R = np.where(valid, hi[:, None] / lo[None, :], -np.inf)
            a, b = np.unravel_index(int(np.argmax(R)), R.shape)
            out.append({"x": x, "t": t, "A": sets[a], "B": sets[b], "eps": signs[hi_arg[a]],
                        "eta": signs[lo_arg[b]], "lhs": float(hi[a]), "den": float(lo[b]),
                        "ratio": float(R[a, b])})
    return out


def _propC_superdem_implies_propA(ctx, rep):
    model = ctx.model
    Cu, Cs = ctx.const("Cu"), ctx.const("Cs")
    Ca = ctx.est("Ca")
    W = model.window
    for inst in _original_form_scan(ctx):
        A, B = inst["A"], inst["B"]
        ea = model.norm(set_matrix([A], W, [inst["eps"]])[0])
        eb = model.norm(set_matrix([B], W, [inst["eta"]])[0])
        r_s = ea / eb  # superdemocracy ratio of this pair
        r_u = eb / inst["den"]  # Property (C) ratio of y = x + 1_{eta B} on its greedy set B
        rhs = 3 * max(Cu, r_u, 1.0) * max(Cs, r_s, 1.0) * inst["den"]
        rep.add(inst["lhs"], rhs, {"x": _vec(inst["x"]), "A": list(A), "B": list(B),
                                   "eps": list(inst["eps"]), "eta": list(inst["eta"]),
                                   "r_s": r_s, "r_u": r_u})
    # the same relation between the family estimates is informative only, not binding
    rep.constants["estimate_level"] = {"Ca": Ca.value, "3 Cu Cs": 3 * Cu * Cs,
                                       "holds": passes(Ca.value, 3 * Cu * Cs)}
    rep.mode = "comparison"


def _weight_transfer(ctx, rep, v: Weight):
    model, w, family = ctx.model, ctx.w, ctx.family
    a, b = equivalence_constants(v, w, model.window)
    Ca_w = ctx.const("Ca")
    c2 = ctx.c2()
    K = (c2**2 * b + 2 * b * Ca_w**2) / a
    rep.constants.update(a=a, b=b, K=K, v=v.to_json())
    rep.mode = ctx.mode()
    per_x, _ = _propA_projection_scan(model, v, family)
    for ratio, wit in per_x:
        if wit is None:
            continue
        x = np.asarray(wit["x"])
        den = model.norm(_drop(x, wit["A"]) + set_matrix([wit["B"]], model.window, [wit["eta"]])[0])
        wit.pop("examined", None)
        rep.add(model.norm(x), K * den, wit)


def _lambda_kinks(x):
    vals = np.unique(np.abs(x[x != 0]))
    return list(vals)


def _truncation_lemma(ctx, rep):
    from ..greedy import truncate

    model, family = ctx.model, ctx.family
    Cq, Ku = ctx.const("Cq"), ctx.const("Ku")
    rep.mode = ctx.mode()
    # ||T_lam y|| is convex in lam between consecutive |y_j|, so the kinks suffice
    for x in family.vectors():
        nx = model.norm(x)
        lams = _lambda_kinks(x)
        T = np.array([truncate(x, lam) for lam in lams])
        tv = _batched_norms(model, T)
        k = int(np.argmax(tv))
        rep.add(tv[k], Cq * nx, {"x": _vec(x), "lambda": float(lams[k])}, "T_lambda")
        rv = _batched_norms(model, x[None, :] - T)
        k = int(np.argmax(rv))
        rep.add(rv[k], (Cq + 1) * nx, {"x": _vec(x), "lambda": float(lams[k])}, "I - T_lambda")
        inst = _greedy_instances(x, family, ctx.flags)
        rows = np.array([set_matrix([L], model.window, [np.sign(x[np.array(L, dtype=int) - 1])])[0] for _, L in inst])
        alphas = np.array([np.abs(x[np.array(L, dtype=int) - 1]).min() for _, L in inst])
        iv = alphas * _batched_norms(model, rows)
        k = int(np.argmax(iv))
        rep.add(iv[k], 2 * Cq * nx, {"x": _vec(x), "A": list(inst[k][1])}, "alpha 1_eps_Lambda")
        if np.count_nonzero(x) <= family.ca_support:
            subsets, Y = _subset_rows(x)
            rows, meta = [], []
            for A, y in zip(subsets, Y):
                for lam in _lambda_kinks(y) or [1.0]:
                    rows.append(truncate(y, lam))
                    meta.append((A, lam))
            uv = _batched_norms(model, np.array(rows))
            k = int(np.argmax(uv))
            rep.add(uv[k], Ku * nx, {"x": _vec(x), "A": list(meta[k][0]), "lambda": float(meta[k][1])},
                    "T_lambda (I - P_A)")


def _part1_lemma(ctx, rep):
    model, w, family = ctx.model, ctx.w, ctx.family
    Cq, Cc = ctx.const("Cq"), ctx.const("Cc")
    rep.mode = ctx.mode()
    sets = family.sets()
    # max over |a_j| <= 1 of a convex function sits at a sign vector
    hi, lo, hi_s, lo_s, flags = _signed_extremes(model, sets, family)
    for f in flags:
        if f not in ctx.flags:
            ctx.flags.append(f)
    weights = _weights_of(w, sets)
    mins = np.array([S[0] for S in sets])
    for i, A in enumerate(sets):
        ok = np.flatnonzero((mins > A[-1]) & (weights >= weights[i]))
        if len(ok) == 0:
            continue
        j = ok[int(np.argmin(lo[ok]))]
        rep.add(hi[i], 4 * Cq * Cc * lo[j],
                {"A": list(A), "a": list(hi_s[i]), "B": list(sets[j]), "eta": list(lo_s[j])})


def _find_c0_bound(ctx, rep):
    model, w, family = ctx.model, ctx.w, ctx.family
    L = window_limsup(w, model.window)
    Cs, c2 = ctx.const("Cs"), ctx.c2()
    rep.constants["limsup_window"] = L
    rep.mode = ctx.mode()
    sets = [S for S in family.sets(exhaustive=True) if measure(w, S) <= L]
    if not sets:
        rep.notes.append("no set has measure below the window limsup")
        return
    hi, _, hi_s, _, _ = _signed_extremes(model, sets, family)
    for i, S in enumerate(sets):
        rep.add(hi[i], c2 * Cs, {"A": list(S), "eps": list(hi_s[i])})


def _propA_formulations(ctx, rep):
    model, w, family = ctx.model, ctx.w, ctx.family
    W = model.window
    c2 = ctx.c2()
    ts = (1.0, 1.5, 2.0)
    a_form = _original_form_scan(ctx, ts)
    Ca_a = max(i["ratio"] for i in a_form)
    Cc_form = max(i["ratio"] for i in a_form if i["t"] == 1.0)
    b_scans = {}
    for t in ts:
        per_x, _ = _propA_projection_scan(model, w, family, t=t)
        b_scans[t] = per_x
    Cb = max(r for t in ts for r, wit in b_scans[t] if wit is not None)
    Cd_form = max(r for r, wit in b_scans[1.0] if wit is not None)
    rep.constants.update(Ca_form_a=Ca_a, C_form_b=Cb, C_form_c=Cc_form, C_form_d=Cd_form)
    rep.add(Cc_form, Ca_a, {}, "(a) => (c): C' <= C")
    rep.add(Cd_form, Cb, {}, "(b) => (d): C' <= C")
    rep.add(Cb, Cd_form + 2 * c2**2, {}, "(d) => (b): C <= C' + 2 c2^2")
    # instance level: every (b) instance with t > sup|x| against the shifted vector x'
    for t in ts[1:]:
        for r, wit in b_scans[t]:
            if wit is None:
                continue
            x = np.asarray(wit["x"])
            k = int(np.argmax(np.abs(x)))
            sgn = 1.0 if x[k] >= 0 else -1.0
            xp = x.copy()
            xp[k] = sgn * t
            BM = t * set_matrix([wit["B"]], W, [wit["eta"]])[0]
            den = model.norm(_drop(x, wit["A"]) + BM)
            r_d = model.norm(xp) / model.norm(_drop(xp, wit["A"]) + BM)
            wit.pop("examined", None)
            rep.add(model.norm(x), (max(Cd_form, r_d) + 2 * c2**2) * den, dict(wit, t=t, r_d=r_d),
                    "(d) => (b) instance")
    rep.mode = "comparison"


def _semi_greedy_implies_propA(ctx, rep):
    model, family = ctx.model, ctx.family
    Csg, Kb, c2 = ctx.const("Csg"), ctx.const("Kb"), ctx.c2()
    KC = Kb * Csg
    K = max(KC * (1 + (KC + 1) * (Csg * (Kb + 1) + c2**2)), 4 * KC * c2**2 + 1)
    rep.constants["K_reference"] = K
    steps = sorted({2, (family.max_support + 2) // 2 + 1, family.max_support})
    for s in steps:
        fam = dataclasses.replace(family, max_support=s, n_random=family.n_random * s // family.max_support)
        e = estimate("Ca", model, ctx.w, fam)
        rep.add(e.value, K, {"max_support": s, "n_random": fam.n_random, "family_size": fam.size(),
                             "Ca_witness": e.witness}, f"Ca over family step {s}")
    rep.mode = "qualitative"
    rep.notes.append("bounded Property (A) ratios across growing families; the reference bound uses estimated constants")


# registry --------------------------------------------------------------------

CHECKS: dict[str, Callable] = {
    "greedy-char-upper": lambda ctx, rep, **kw: _greedy_char_upper(ctx, rep, False),
    "almost-greedy-char-upper": lambda ctx, rep, **kw: _greedy_char_upper(ctx, rep, True),
    "partially-greedy-forward": lambda ctx, rep, **kw: _partially_greedy_forward(ctx, rep),
    "partially-greedy-reverse": lambda ctx, rep, **kw: _partially_greedy_reverse(ctx, rep),
    "propA-implies-superdem": lambda ctx, rep, **kw: _propA_implies_superdem(ctx, rep),
    "propC-superdem-implies-propA": lambda ctx, rep, **kw: _propC_superdem_implies_propA(ctx, rep),
    "weight-transfer": lambda ctx, rep, v=None, **kw: _weight_transfer(ctx, rep, v or Weight.constant(1.0)),
    "truncation-lemma": lambda ctx, rep, **kw: _truncation_lemma(ctx, rep),
    "part1-lemma": lambda ctx, rep, **kw: _part1_lemma(ctx, rep),
    "find-c0-bound": lambda ctx, rep, **kw: _find_c0_bound(ctx, rep),
    "propA-formulations": lambda ctx, rep, **kw: _propA_formulations(ctx, rep),
    "semi-greedy-implies-propA": lambda ctx, rep, **kw: _semi_greedy_implies_propA(ctx, rep),
}


def run_check(check_id: str, model: NormModel, w: Weight, family: SearchFamily, *,
              v: Optional[Weight] = None, budget: int = DEFAULT_BUDGET, tol: float = DEFAULT_TOL,
              exact_only: bool = False) -> CheckReport:
    """Run one registered check; ``exact_only`` refuses to fall back on estimated constants."""
    if check_id not in CHECKS:
        raise KeyError(f"unknown check {check_id!r}; registered: {', '.join(CHECKS)}")
    if family.window != model.window:
        raise ValueError("family window differs from model window")
    ctx = _Ctx(model, w, family, budget, tol)
    rep = CheckReport(check_id, "estimate")
    try:
        CHECKS[check_id](ctx, rep, v=v)
    except BudgetExceeded as exc:
        rep.budget_flags = ctx.flags + ["budget-exceeded"]
        rep.constants.update(ctx.used)
        raise BudgetExceeded(str(exc), partial=rep) from exc
    rep.constants.update(ctx.used)
    rep.budget_flags = list(ctx.flags)
    if exact_only and rep.mode == "estimate":
        raise ModeUnavailable(f"{check_id}: exact constants unavailable for this model")
    return rep


class ModeUnavailable(RuntimeError):
    """Exact mode was requested but the model does not declare the needed constants."""
