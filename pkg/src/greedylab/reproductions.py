"""Named reproductions: frozen configurations with their pass criteria.

Each reproduction returns tables (lists of flat rows), criteria (name, pass,
detail) and optionally full check/estimate items.  The criteria are asserted
by the CLI: exit 0 only when every criterion passes.
"""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

from .constants import SearchFamily, dm_table, estimate
from .constants.checks import CHECKS
from .greedy import greedy_set, indicator
from .optim import sigma_w
from .spaces import NormModel, pathological_spec
from .weights import Weight, measure, s_w_window

EXACT_TOL = 1e-9


def _crit(name: str, ok: bool, detail: str) -> dict:
    return {"name": name, "pass": bool(ok), "detail": detail}


def _close(a: float, b: float, tol: float = EXACT_TOL) -> bool:
    return abs(a - b) <= tol * max(1.0, abs(b))


# schreier-gap -------------------------------------------------------------------


def schreier_table(n_max: int = 6) -> list[dict]:
    rows = []
    for N in range(1, n_max + 1):
        W = N * N + N
        model = NormModel.build({"kind": "schreier"}, W)
        far = model.norm(indicator(range(N * N + 1, N * N + N + 1), window=W))
        near = model.norm(indicator(range(1, N + 1), window=W))
        rows.append({"N": N, "window": W, "norm_far_block": far, "norm_first_block": near,
                     "sqrt_N": math.sqrt(N), "ratio": far / near})
    return rows


def _schreier_gap(seed: int, workers: int) -> dict:
    rows = schreier_table(6)
    cons = []
    for W in (8, 12):
        model = NormModel.build({"kind": "schreier"}, W)
        fam = SearchFamily(W, seed=seed)
        e = estimate("Cc", model, Weight.constant(1.0), fam)
        d = estimate("Cd", model, Weight.constant(1.0), fam)
        cons.append({"window": W, "Cc": e.value, "Cd": d.value, "Cc_witness": e.witness, "Cd_witness": d.witness})
    criteria = [
        _crit("far block norm equals N", all(_close(r["norm_far_block"], r["N"]) for r in rows),
              "||1_{N^2+1..N^2+N}|| for N = 1..6"),
        _crit("first block norm at most sqrt(N)",
              all(r["norm_first_block"] <= r["sqrt_N"] + EXACT_TOL for r in rows), "||1_{1..N}|| for N = 1..6"),
        _crit("conservative with constant 1", all(_close(c["Cc"], 1.0) for c in cons),
              ", ".join(f"window {c['window']}: Cc = {c['Cc']:.12g}" for c in cons)),
    ]
    return {"config": {"n_max": 6, "cc_windows": [8, 12], "seed": seed},
            "tables": {"schreier_blocks": rows, "conservativeness": cons}, "criteria": criteria, "results": []}


# ebasis-no-propD ------------------------------------------------------------------


def ebasis_table(n_max: int = 8) -> list[dict]:
    rows = []
    for N in range(1, n_max + 1):
        W = 2 * N
        model = NormModel.build({"kind": "ebasis"}, W)
        z = np.zeros(W)
        z[0::2], z[1::2] = -1.0, 2.0
        nz = model.norm(z)
        ones = model.norm(np.ones(W))
        rows.append({"N": N, "norm_z": nz, "norm_sum_E": ones, "expected_sum_E": 0.75 * N + 0.25,
                     "propD_ratio": 1.0 * ones / nz})
    return rows


def _ebasis_no_propD(seed: int, workers: int) -> dict:
    rows = ebasis_table(8)
    model = NormModel.build({"kind": "ebasis"}, 16)
    tab = dm_table(model, 6)
    dm = [{"m": m, "d": tab["d"][m], "D": tab["D"][m], "m_over_8": m / 8,
           "d_witness": tab["d_witness"][m].tolist()} for m in sorted(tab["d"])]
    ratios = [r["propD_ratio"] for r in rows]
    criteria = [
        _crit("||z|| = 2", all(_close(r["norm_z"], 2.0) for r in rows), "N = 1..8"),
        _crit("||sum E_i|| = 3N/4 + 1/4", all(_close(r["norm_sum_E"], r["expected_sum_E"]) for r in rows),
              "N = 1..8"),
        _crit("Property (D) ratio grows", all(b > a for a, b in zip(ratios, ratios[1:])),
              f"ratio {ratios[0]:.4g} -> {ratios[-1]:.4g}"),
        _crit("d(m) >= m/8 (exhaustive, window 16)", all(r["d"] >= r["m_over_8"] - EXACT_TOL for r in dm),
              ", ".join(f"d({r['m']}) = {r['d']:.6g}" for r in dm)),
        _crit("d(m) <= D(m)", all(r["d"] <= r["D"] + EXACT_TOL for r in dm), "m = 1..6"),
    ]
    return {"config": {"n_max": 8, "dm_window": 16, "m_max": 6},
            "tables": {"ebasis_z": rows, "ebasis_dm": dm}, "criteria": criteria, "results": []}


# rosenthal-woo --------------------------------------------------------------------


def rw_greedy_instances(q: float, p: float, theta: float, window: int, n: int, seed: int) -> list[dict]:
    """Random (x, m): ratio ``||x - G_m x|| / sigma^w_{w(G)}(x)`` with w the model weight."""
    spec = {"kind": "rosenthal_woo", "q": "inf" if math.isinf(q) else q, "p": p,
            "weight": {"kind": "power", "theta": theta}}
    model = NormModel.build(spec, window)
    w = Weight.power(theta)
    rng = np.random.default_rng(seed)
    rows = []
    for i in range(n):
        k = int(rng.integers(2, window + 1))
        x = np.zeros(window)
        pos = rng.choice(window, size=k, replace=False)
        x[pos] = rng.uniform(-1.0, 1.0, size=k)
        m = int(rng.integers(1, k))
        G = greedy_set(x, m)
        r = x.copy()
        r[np.array(G) - 1] = 0.0
        delta = measure(w, G)
        sig = sigma_w(model, w, x, delta)
        num = model.norm(r)
        rows.append({"i": i, "m": m, "support": k, "delta": delta, "error": num, "sigma": sig.value,
                     "ratio": num / sig.value})
    return rows


def _rw_one_w_greedy(seed: int, workers: int) -> dict:
    window, theta = 12, 0.4
    tables, criteria = {}, []
    for p in (1.0, 2.0):
        spec = {"kind": "rosenthal_woo", "q": "inf", "p": p, "weight": {"kind": "power", "theta": theta}}
        model = NormModel.build(spec, window)
        ca = estimate("Ca", model, Weight.power(theta), SearchFamily(window, seed=seed))
        inst = rw_greedy_instances(math.inf, p, theta, window, 1000, seed)
        worst = max(r["ratio"] for r in inst)
        tables[f"greedy_ratios_p{int(p)}"] = inst
        tables.setdefault("property_A", []).append({"p": p, "Ca": ca.value, "examined": ca.examined,
                                                    "witness": ca.witness})
        criteria.append(_crit(f"Property (A) constant 1 (p={p:g})", ca.value <= 1 + EXACT_TOL,
                              f"Ca estimate {ca.value:.12g} over {ca.examined} instances"))
        criteria.append(_crit(f"1-w-greedy per instance (p={p:g})", worst <= 1 + 1e-6,
                              f"max ratio {worst:.12g} over {len(inst)} instances"))
    return {"config": {"window": window, "theta": theta, "p_values": [1, 2], "instances": 1000, "seed": seed},
            "tables": tables, "criteria": criteria, "results": []}


def rw_conservative_table(q: float, p: float, theta: float, ms) -> list[dict]:
    """``||1_{A_m}|| / ||1_{B_{m,k_m}}||`` with ``k_m`` the first shift where ``||1_B|| = m^{1/q}``."""
    if not theta > 0:
        raise ValueError("the shift k_m exists only for a decaying weight (theta > 0)")
    w = Weight.power(theta)
    rows = []
    for m in ms:
        target = m ** (1.0 / q)
        k = m
        while measure(w, range(k + 1, k + m + 1)) ** (1.0 / p) > target:
            k += max(1, k // 8)
        # step back to the smallest admissible shift
        lo, hi = max(m, k - max(1, k // 8)), k
        while lo < hi:
            mid = (lo + hi) // 2
            if measure(w, range(mid + 1, mid + m + 1)) ** (1.0 / p) <= target:
                hi = mid
            else:
                lo = mid + 1
        k = hi
        window = k + m
        spec = {"kind": "rosenthal_woo", "q": q, "p": p, "weight": {"kind": "power", "theta": theta}}
        model = NormModel.build(spec, window)
        nA = model.norm(indicator(range(1, m + 1), window=window))
        nB = model.norm(indicator(range(k + 1, k + m + 1), window=window))
        wA = measure(w, range(1, m + 1))
        expected = max(m ** (1.0 / q), wA ** (1.0 / p)) / m ** (1.0 / q)
        bound = ((m ** (1 - theta) - 1) / (1 - theta)) ** (1.0 / p) * m ** (-1.0 / q)
        rows.append({"m": m, "k_m": k, "norm_A": nA, "norm_B": nB, "ratio": nA / nB, "expected": expected,
                     "closed_form_bound": bound})
    return rows


def _rw_not_conservative(seed: int, workers: int) -> dict:
    q, p, theta = 2.0, 1.0, 0.4
    rows = rw_conservative_table(q, p, theta, range(4, 65))
    criteria = [
        _crit("ratio matches max(m^(1/q), w(A_m)^(1/p)) / m^(1/q)",
              all(_close(r["ratio"], r["expected"]) for r in rows), "m = 4..64"),
        _crit("ratio exceeds the closed-form bound", all(r["ratio"] > r["closed_form_bound"] for r in rows),
              "m = 4..64"),
        _crit("ratio grows", rows[-1]["ratio"] > rows[0]["ratio"],
              f"m=4: {rows[0]['ratio']:.6g}, m=64: {rows[-1]['ratio']:.6g}"),
    ]
    return {"config": {"q": q, "p": p, "theta": theta, "m_range": [4, 64]},
            "tables": {"rw_conservativeness": rows}, "criteria": criteria, "results": []}


def rw_democracy_sweep(q: float, p: float, theta: float, ns, ks) -> list[dict]:
    """For each ``n`` and shift ``k``: largest ``m`` with ``w(B_{m,k}) <= w(A_n)`` and the norm ratio."""
    w = Weight.power(theta)
    rows = []
    for n in ns:
        wA = measure(w, range(1, n + 1))
        for k in ks:
            if k < n:
                continue
            # w(B_{m,k}) increases with m; grow then bisect
            vals = w.values_upto(k + int(4 * wA * k**theta) + n + 2)
            pref = np.concatenate([[0.0], np.cumsum(vals[k:])])
            m = int(np.searchsorted(pref, wA * (1 + 1e-15), side="right")) - 1
            if m < 1:
                continue
            window = k + m
            spec = {"kind": "rosenthal_woo", "q": q, "p": p, "weight": {"kind": "power", "theta": theta}}
            model = NormModel.build(spec, window)
            nA = model.norm(indicator(range(1, n + 1), window=window))
            nB = model.norm(indicator(range(k + 1, k + m + 1), window=window))
            rows.append({"n": n, "k": k, "m": m, "w_A": wA, "w_B": float(pref[m]), "norm_A": nA,
                         "norm_B": nB, "ratio": nB / nA})
    return rows


def _rw_not_w_democratic(seed: int, workers: int) -> dict:
    q, p, theta = 2.0, 1.0, 0.4
    ns, ks = (4, 16), [4**j for j in range(2, 11)]
    rows = rw_democracy_sweep(q, p, theta, ns, ks)
    criteria = [_crit("w(B) <= w(A_n) on every row", all(r["w_B"] <= r["w_A"] * (1 + EXACT_TOL) for r in rows),
                      f"{len(rows)} rows")]
    for n in ns:
        sub = [r for r in rows if r["n"] == n]
        criteria.append(_crit(f"ratio grows with k (n={n})", sub[-1]["ratio"] > 2 * sub[0]["ratio"],
                              f"k={sub[0]['k']}: {sub[0]['ratio']:.6g}, k={sub[-1]['k']}: {sub[-1]['ratio']:.6g}"))
    return {"config": {"q": q, "p": p, "theta": theta, "n": list(ns), "k": ks},
            "tables": {"rw_democracy": rows}, "criteria": criteria, "results": []}


# sw-trivial ------------------------------------------------------------------------


def _sw_trivial(seed: int, workers: int) -> dict:
    weights = {"geometric 1/2": Weight.geometric(0.5), "power 0.4": Weight.power(0.4),
               "power 1": Weight.power(1.0), "constant 1": Weight.constant(1.0)}
    rows = []
    for label, w in weights.items():
        for W in (10, 20, 40):
            s, sat = s_w_window(w, W)
            rows.append({"weight": label, "window": W, "s_w": s, "saturated": sat})
    get = {(r["weight"], r["window"]): r["s_w"] for r in rows}
    criteria = [
        _crit("geometric 1/2 gives 0", all(get[("geometric 1/2", W)] == 0 for W in (10, 20, 40)), "windows 10, 20, 40"),
        _crit("constant 1 at window 10 gives 5", get[("constant 1", 10)] == 5, f"s_w = {get[('constant 1', 10)]}"),
    ]
    return {"config": {"weights": {k: v.to_json() for k, v in weights.items()}, "windows": [10, 20, 40]},
            "tables": {"s_w": rows}, "criteria": criteria, "results": []}


# pathological-f1q --------------------------------------------------------------------


def _pathological_f1q(seed: int, workers: int) -> dict:
    node = pathological_spec(q=2.0, blocks=3)
    model = NormModel.build(node)
    fam = SearchFamily(model.window, seed=seed)
    w = Weight.constant(1.0)
    rows = []
    for name in ("Cu", "Cs", "Cd", "propD"):
        e = estimate(name, model, w, fam)
        rows.append({"name": name, "value": e.value, "examined": e.examined, "witness": e.witness})
    val = {r["name"]: r["value"] for r in rows}
    criteria = [
        _crit("Property (C) ratio finite", math.isfinite(val["Cu"]), f"Cu estimate {val['Cu']:.12g}"),
        _crit("superdemocracy ratio finite", math.isfinite(val["Cs"]), f"Cs estimate {val['Cs']:.12g}"),
        _crit("Cd <= Cs", val["Cd"] <= val["Cs"] + EXACT_TOL, f"{val['Cd']:.6g} <= {val['Cs']:.6g}"),
        _crit("propD <= Cu", val["propD"] <= val["Cu"] + EXACT_TOL, f"{val['propD']:.6g} <= {val['Cu']:.6g}"),
    ]
    return {"config": {"spec": node.to_json(), "window": model.window, "seed": seed},
            "tables": {"pathological": rows}, "criteria": criteria, "results": []}


# theorem-suite -------------------------------------------------------------------------

# (space, weight, number of vectors given the brute-force sigma treatment, their
# support bound); numeric sigma on non-lattice norms dominates the run time, hence
# the smaller counts there
THEOREM_MATRIX = [
    ({"kind": "lp", "p": 1}, {"kind": "constant", "c": 1.0}, 12, None),
    ({"kind": "lp", "p": 2}, {"kind": "constant", "c": 1.0}, 12, None),
    ({"kind": "lp", "p": "inf"}, {"kind": "constant", "c": 1.0}, 12, None),
    ({"kind": "schreier"}, {"kind": "constant", "c": 1.0}, 12, None),
    ({"kind": "rosenthal_woo", "q": "inf", "p": 1, "weight": {"kind": "power", "theta": 0.4}},
     {"kind": "power", "theta": 0.4}, 12, None),
    ({"kind": "rosenthal_woo", "q": 2, "p": 1, "weight": {"kind": "power", "theta": 0.4}},
     {"kind": "power", "theta": 0.4}, 12, None),
    ({"kind": "ebasis"}, {"kind": "constant", "c": 1.0}, 4, None),
    ({"kind": "james", "q": 2}, {"kind": "constant", "c": 1.0}, 4, 4),
]
SUITE_WINDOW = 8


def theorem_suite_items(seed: int) -> list[tuple]:
    from .optim import DEFAULT_BUDGET, DEFAULT_TOL

    items = []
    for spec, weight, n_sigma, sigma_support in THEOREM_MATRIX:
        fam = SearchFamily(SUITE_WINDOW, seed=seed, sigma_vectors=n_sigma, sigma_support=sigma_support).to_json()
        for cid in CHECKS:
            items.append((cid, spec, weight, None, SUITE_WINDOW, fam, DEFAULT_BUDGET, DEFAULT_TOL, False))
    return items


def _theorem_suite(seed: int, workers: int) -> dict:
    from .cli import check_failed, check_item, pmap

    items = theorem_suite_items(seed)
    results = pmap(check_item, items, workers)
    rows = [{"spec": r["spec"], "check_id": r["check_id"], "mode": r["mode"], "binding": r.get("binding"),
             "all_pass": r.get("all_pass"), "max_ratio": r.get("max_ratio"), "status": r["status"]}
            for r in results]
    failed = [r for r in results if check_failed(r)]
    partial = [r for r in results if r["status"] != "ok"]
    criteria = [
        _crit("binding checks pass", not failed,
              f"{sum(1 for r in results if r.get('binding'))} binding reports, {len(failed)} failing"),
        _crit("every check completes", not partial, f"{len(results)} reports, {len(partial)} incomplete"),
    ]
    return {"config": {"matrix": [{"spec": s, "weight": w, "sigma_vectors": n, "sigma_support": k}
                                  for s, w, n, k in THEOREM_MATRIX],
                       "window": SUITE_WINDOW, "checks": list(CHECKS), "seed": seed},
            "tables": {"theorem_suite": rows}, "criteria": criteria, "results": results}


REPRODUCTIONS: dict[str, Callable[[int, int], dict]] = {
    "schreier-gap": _schreier_gap,
    "ebasis-no-propD": _ebasis_no_propD,
    "rw-one-w-greedy": _rw_one_w_greedy,
    "rw-not-conservative": _rw_not_conservative,
    "rw-not-w-democratic": _rw_not_w_democratic,
    "sw-trivial": _sw_trivial,
    "pathological-f1q": _pathological_f1q,
    "theorem-suite": _theorem_suite,
}


def run_reproduction(name: str, seed: int = 0, workers: int = 1) -> dict:
    if name not in REPRODUCTIONS:
        raise KeyError(f"unknown reproduction {name!r}; registered: {', '.join(REPRODUCTIONS)}")
    return REPRODUCTIONS[name](seed, workers)
