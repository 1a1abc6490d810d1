"""Acceptance criteria, one test per criterion, each timed against its limit.

Every test appends a ``[PASS]``/``[FAIL]`` line to ``RESULTS``; the lines are
printed as they happen and collected again in the terminal summary.
"""

import math
import time
from contextlib import contextmanager

import numpy as np
import pytest

import oracles
from greedylab.cli import main
from greedylab.constants import SearchFamily, dm_table, estimate, evaluate_witness, run_check
from greedylab.greedy import greedy_set
from greedylab.optim import min_norm_over_coeffs, sigma_w, sigma_w_tilde
from greedylab.reproductions import rw_conservative_table, rw_greedy_instances
from greedylab.spaces import NormModel
from greedylab.weights import Weight, measure, s_w_window

RESULTS: list[str] = []
TOL = 1e-9
ONE = Weight.constant()
W04 = Weight.power(0.4)
RW_INF = {"kind": "rosenthal_woo", "q": "inf", "p": 1, "weight": {"kind": "power", "theta": 0.4}}
RW_21 = {"kind": "rosenthal_woo", "q": 2, "p": 1, "weight": {"kind": "power", "theta": 0.4}}
LP = [{"kind": "lp", "p": 1}, {"kind": "lp", "p": 2}, {"kind": "lp", "p": "inf"}]
WINDOW = 8


class Criterion:
    def __init__(self, cid, limit):
        self.cid, self.limit = cid, limit
        self.failures: list[str] = []
        self.notes: list[str] = []

    def require(self, ok, what):
        if not ok:
            self.failures.append(what)

    def note(self, text):
        self.notes.append(text)


@contextmanager
def criterion(cid, limit):
    c = Criterion(cid, limit)
    start = time.perf_counter()
    try:
        yield c
    except Exception as exc:  # an error is a failed criterion, reported like one
        c.failures.append(f"error: {exc!r}")
    elapsed = time.perf_counter() - start
    if elapsed > limit:
        c.failures.append(f"took {elapsed:.2f}s, limit {limit:g}s")
    ok = not c.failures
    detail = "; ".join(c.failures if c.failures else c.notes)
    line = f"[{'PASS' if ok else 'FAIL'}] {cid} ({elapsed:.2f}s of {limit:g}s) {detail}"
    RESULTS.append(line)
    print(line)
    assert ok, line


def close(a, b, tol=TOL):
    return abs(a - b) <= tol * max(1.0, abs(b))


# 1. exact values ---------------------------------------------------------------------


def test_1a_schreier_blocks():
    with criterion("1a schreier: ||1_{N^2+1..N^2+N}|| = N, ||1_[1,N]|| <= sqrt N", 1.0) as c:
        for N in range(2, 7):
            model = NormModel.build({"kind": "schreier"}, N * N + N)
            far = model.norm(model.vector({n: 1 for n in range(N * N + 1, N * N + N + 1)}))
            near = model.norm(model.vector([1] * N))
            c.require(close(far, N), f"N={N}: far block {far}")
            c.require(near <= math.sqrt(N) * (1 + TOL), f"N={N}: first block {near}")
        c.note("N = 2..6")


def test_1b_ebasis():
    with criterion("1b ebasis: ||z|| = 2, ||sum E_i|| = 3N/4 + 1/4, d(m) >= m/8", 1.0) as c:
        for N in range(1, 9):
            model = NormModel.build({"kind": "ebasis"}, 2 * N)
            z = np.tile([-1.0, 2.0], N)
            c.require(close(model.norm(z), 2.0), f"N={N}: ||z|| = {model.norm(z)}")
            s = model.norm(np.ones(2 * N))
            c.require(s == 0.75 * N + 0.25, f"N={N}: ||sum E_i|| = {s}")
        table = dm_table(NormModel.build({"kind": "ebasis"}, 16), 6)
        for m in range(1, 7):
            c.require(table["d"][m] >= m / 8 - TOL, f"d({m}) = {table['d'][m]}")
        c.note(f"window 16, 3^16 signed sets; d(1..6) = {[round(table['d'][m], 6) for m in range(1, 7)]}")


def test_1c_rw_one_w_greedy():
    with criterion("1c RW(inf,1,n^-0.4): Property (A) ratio <= 1, w-greedy ratio <= 1 + 1e-6", 1.0) as c:
        model = NormModel.build(RW_INF, 12)
        ca = estimate("Ca", model, W04, SearchFamily(12))
        c.require(ca.value <= 1 + TOL, f"Ca = {ca.value}")
        rows = rw_greedy_instances(math.inf, 1.0, 0.4, 12, 1000, 0)
        worst = max(r["ratio"] for r in rows)
        c.require(len(rows) >= 1000 and worst <= 1 + 1e-6, f"max ratio {worst}")
        c.note(f"Ca = {ca.value:.12g} over {ca.examined} instances; max greedy ratio {worst:.12g} over {len(rows)}")


def test_1d_rw_not_conservative():
    with criterion("1d RW(2,1,n^-0.4): conservativeness ratio table m = 4..64", 1.0) as c:
        rows = rw_conservative_table(2.0, 1.0, 0.4, range(4, 65))
        w = W04
        for r in rows:
            m = r["m"]
            expected = max(math.sqrt(m), measure(w, range(1, m + 1))) / math.sqrt(m)
            bound = (m**0.6 - 1) / 0.6 * m**-0.5
            c.require(close(r["ratio"], expected), f"m={m}: ratio {r['ratio']} vs {expected}")
            c.require(r["ratio"] > bound, f"m={m}: ratio {r['ratio']} <= bound {bound}")
        c.require(rows[-1]["ratio"] > rows[0]["ratio"], "no growth")
        c.note(f"ratio {rows[0]['ratio']:.6g} at m=4, {rows[-1]['ratio']:.6g} at m=64")


def test_1e_s_w():
    with criterion("1e s_w: geometric(1/2) -> 0, constant window 10 -> 5", 1.0) as c:
        geo, _ = s_w_window(Weight.geometric(0.5), 10)
        const, _ = s_w_window(Weight.constant(), 10)
        c.require(geo == 0, f"geometric {geo}")
        c.require(const == 5, f"constant {const}")
        c.require(oracles.s_w([1.0] * 10) == 5 and oracles.s_w([0.5**n for n in range(1, 11)]) == 0,
                  "oracle disagrees")
        c.note(f"geometric {geo}, constant {const}")


# 2. oracle equivalences -------------------------------------------------------------


def test_2a_james_dp():
    with criterion("2a james DP = partition maximum, 200 vectors, exact", 30.0) as c:
        rng = np.random.default_rng(0)
        for i in range(200):
            n = int(rng.integers(1, 11))
            # quarter-integer entries keep every sum and square exact in binary floating point
            x = rng.integers(-8, 9, size=n) / 4.0
            q = 2.0 if i % 2 == 0 else 3.0
            dp = NormModel.build({"kind": "james", "q": q}, n).norm(x)
            c.require(dp == oracles.james_norm(x, q), f"x={x.tolist()} q={q}: {dp}")
        c.note("windows 1..10, q in {2, 3}")


def test_2b_numeric_minimizer():
    with criterion("2b numeric minimizer = lattice shortcut within 1e-6, 200 instances", 30.0) as c:
        rng = np.random.default_rng(1)
        specs = LP + [{"kind": "schreier"}, RW_INF, RW_21,
                      {"kind": "weighted_lp", "p": 3, "weight": {"kind": "geometric", "r": 0.7}}]
        worst = 0.0
        for i in range(200):
            spec = specs[i % len(specs)]
            n = int(rng.integers(2, 8))
            model = NormModel.build(spec, n)
            x = rng.uniform(-2, 2, size=n)
            A = tuple(sorted(rng.choice(np.arange(1, n + 1), size=int(rng.integers(1, n + 1)), replace=False)))
            exact = min_norm_over_coeffs(model, x, A)
            numeric = min_norm_over_coeffs(model, x, A, force_numeric=True)
            gap = abs(numeric.value - exact.value)
            worst = max(worst, gap)
            c.require(gap <= 1e-6, f"{spec} x={x.tolist()} A={A}: gap {gap}")
        c.note(f"max gap {worst:.3g}")


def test_2c_sigma_m():
    with criterion("2c sigma^w (w=1, delta=m) = best m-term error on lp(1), lp(2), lp(inf)", 30.0) as c:
        rng = np.random.default_rng(2)
        count = 0
        for spec in LP:
            p = float(spec["p"])
            for n in range(1, 9):
                model = NormModel.build(spec, n)
                for x in rng.uniform(-3, 3, size=(4, n)):
                    for m in range(n + 1):
                        got = sigma_w(model, ONE, x, m).value
                        want = oracles.best_m_term_error(x, m, p)
                        c.require(close(got, want, 1e-12), f"{spec} x={x.tolist()} m={m}: {got} vs {want}")
                        count += 1
        c.note(f"{count} (x, m) instances, windows 1..8")


# 3. theorem suites ------------------------------------------------------------------


def _model(spec, window=WINDOW):
    return NormModel.build(spec, window)


def _require_exact_pass(c, rep, label):
    c.require(rep.mode == "exact", f"{label}: mode {rep.mode}")
    c.require(rep.all_pass and rep.instances, f"{label}: max ratio {rep.max_ratio}")


def test_3a_truncation_lemma():
    with criterion("3a truncation-lemma on lp(p), schreier, rosenthal_woo (exact Cq = Ku = 1)", 120.0) as c:
        cases = [(s, ONE) for s in LP + [{"kind": "lp", "p": 3}, {"kind": "schreier"}]] + [(RW_INF, W04), (RW_21, W04)]
        n = 0
        for spec, w in cases:
            rep = run_check("truncation-lemma", _model(spec), w, SearchFamily(WINDOW))
            _require_exact_pass(c, rep, spec["kind"])
            c.require(rep.constants["Cq"]["value"] == 1 and rep.constants["Ku"]["value"] == 1,
                      f"{spec}: constants {rep.constants}")
            n += len(rep.instances)
        c.note(f"{len(cases)} models, {n} instances")


def test_3b_greedy_characterisations():
    with criterion("3b greedy-char-upper and almost-greedy-char-upper exact on RW(inf,1,n^-0.4)", 120.0) as c:
        n = 0
        for cid in ("greedy-char-upper", "almost-greedy-char-upper"):
            rep = run_check(cid, _model(RW_INF), W04, SearchFamily(WINDOW))
            _require_exact_pass(c, rep, cid)
            n += len(rep.instances)
        c.note(f"{n} instances")


def test_3c_superdemocracy_relations():
    with criterion("3c Cs <= 2 Ca and Ca <= 3 Cu Cs on lp models and ebasis", 120.0) as c:
        for spec in LP + [{"kind": "ebasis"}]:
            for cid in ("propA-implies-superdem", "propC-superdem-implies-propA"):
                rep = run_check(cid, _model(spec), ONE, SearchFamily(WINDOW))
                c.require(rep.binding and rep.all_pass, f"{spec['kind']} {cid}: {rep.mode}, max {rep.max_ratio}")
        c.note(f"window {WINDOW}, default family")


def test_3d_part1_and_c0_bound():
    with criterion("3d part1-lemma and find-c0-bound on schreier and lp(1)", 120.0) as c:
        for spec in ({"kind": "schreier"}, {"kind": "lp", "p": 1}):
            for cid in ("part1-lemma", "find-c0-bound"):
                rep = run_check(cid, _model(spec), ONE, SearchFamily(WINDOW))
                c.require(rep.all_pass and rep.instances, f"{spec['kind']} {cid}: max {rep.max_ratio}")
        c.note(f"window {WINDOW}")


def test_3e_weight_transfer():
    with criterion("3e weight-transfer on lp(2), v = 1, w explicit in [1, 3]", 120.0) as c:
        w = Weight.explicit([1, 3, 2, 1.5, 3, 1, 2.5, 2], tail=2)
        rep = run_check("weight-transfer", _model({"kind": "lp", "p": 2}), w, SearchFamily(WINDOW), v=ONE)
        c.require(rep.all_pass and rep.instances, f"max ratio {rep.max_ratio}")
        c.note(f"{len(rep.instances)} instances, max ratio {rep.max_ratio:.6g}")


# 4. structural invariants -----------------------------------------------------------


def test_4_structural_invariants():
    with criterion("4 nesting, scaling, sigma monotone in delta, family monotonicity, witnesses", 60.0) as c:
        rng = np.random.default_rng(4)
        grid = np.array([0.0, 0.5, -0.5, 1.0, -1.0, 2.0])
        for _ in range(300):
            x = rng.choice(grid, size=8)
            k = int(np.count_nonzero(x))
            for m in range(k):
                c.require(set(greedy_set(x, m)) < set(greedy_set(x, m + 1)), f"nesting x={x} m={m}")
                c.require(greedy_set(3.5 * x, m) == greedy_set(x, m), f"scaling x={x} m={m}")
        specs = [({"kind": "lp", "p": 2}, ONE), ({"kind": "schreier"}, ONE), (RW_21, W04),
                 ({"kind": "ebasis"}, Weight.power(0.5)), ({"kind": "james", "q": 2}, ONE)]
        for spec, w in specs:
            model = _model(spec, 6)
            for x in rng.choice(grid, size=(6, 6)):
                prev_s = prev_t = math.inf
                for delta in (0, 0.5, 1, 2, 3, 6):
                    s = sigma_w(model, w, x, delta).value if model.is_lattice else prev_s
                    t = sigma_w_tilde(model, w, x, delta).value
                    c.require(s <= prev_s + 1e-6 and t <= prev_t, f"{spec['kind']} x={x} delta={delta}")
                    prev_s, prev_t = s, t
            small = SearchFamily(6, n_random=10, max_support=3, dense_support=1, sigma_vectors=2)
            large = SearchFamily(6, n_random=40, max_support=5, dense_support=2, sigma_vectors=2)
            for name in ("Kb", "Ku", "Cq", "Cd", "Cs", "Ca", "Cc", "Cu", "propD", "Cp", "Cal", "D(3)", "d(3)"):
                lo, hi = estimate(name, model, w, small), estimate(name, model, w, large)
                if name.startswith("d("):
                    c.require(True, "")  # d(m) is exhaustive over the window, family-independent
                    c.require(lo.value == hi.value, f"{spec['kind']} {name}")
                else:
                    c.require(hi.value >= lo.value - 1e-12, f"{spec['kind']} {name}: {hi.value} < {lo.value}")
                for e in (lo, hi):
                    again = evaluate_witness(e.name, model, w, e.witness)
                    c.require(abs(again - e.value) <= 1e-12 * max(1.0, abs(e.value)),
                              f"{spec['kind']} {name}: witness gives {again}, estimate {e.value}")
        c.note("300 greedy vectors, 5 models x 13 estimators x 2 families")


# 5. full theorem suite --------------------------------------------------------------


def test_5_theorem_suite(tmp_path, capsys):
    with criterion("5 reproduce theorem-suite exits 0", 600.0) as c:
        code = main(["reproduce", "theorem-suite", "--out", str(tmp_path / "suite.json")])
        err = capsys.readouterr().err
        c.require(code == 0, f"exit {code}")
        lines = [ln for ln in err.splitlines() if ln.startswith("[")]
        c.note("; ".join(lines))
