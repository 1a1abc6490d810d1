import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from greedylab.constants import dm_table
from greedylab.spaces import NormModel, UnsupportedDual, pathological_spec
from greedylab.weights import Weight, measure

RW_SPECS = [
    {"kind": "rosenthal_woo", "q": q, "p": p, "weight": {"kind": "power", "theta": 0.4}}
    for q, p in [("inf", 1), (2, 1), (3, 2)]
]
ALL_SPECS = [
    {"kind": "lp", "p": 1}, {"kind": "lp", "p": 2}, {"kind": "lp", "p": "inf"}, {"kind": "lp", "p": 3},
    {"kind": "weighted_lp", "p": 2, "weight": {"kind": "power", "theta": 0.5}},
    {"kind": "schreier"}, {"kind": "james", "q": 2}, {"kind": "james", "q": 3}, {"kind": "ebasis"},
    {"kind": "rw_summing", "q": 2, "weight": {"kind": "power", "theta": 0.4}},
    {"kind": "dsum_inf", "parts": [{"kind": "lp", "p": 1}, {"kind": "lp", "p": 2}], "sizes": [3, 3]},
    {"kind": "dsum_l1", "parts": [{"kind": "schreier"}, {"kind": "james", "q": 2}], "sizes": [2, 4]},
    {"kind": "max_of", "parts": [{"kind": "lp", "p": 2}, {"kind": "james", "q": 2}]},
] + RW_SPECS

# plain double evaluation: keep magnitudes where p-th powers cannot underflow
coef = st.floats(-5, 5, allow_nan=False).filter(lambda v: v == 0 or abs(v) > 1e-6)
vec6 = st.lists(coef, min_size=6, max_size=6).map(np.array)


def test_norm_examples():
    assert NormModel.build({"kind": "lp", "p": 1}, 2).norm([1, 1]) == 2
    assert NormModel.build({"kind": "james", "q": 2}, 3).norm([1, -1, 1]) == pytest.approx(math.sqrt(3), abs=1e-12)
    schreier = NormModel.build({"kind": "schreier"}, 6)
    assert schreier.norm([1, 1, 1, 1, 0, 0]) == 1
    assert schreier.norm([0, 0, 0, 0, 1, 1]) == 2
    eb = NormModel.build({"kind": "ebasis"}, 6)
    assert eb.norm([1, 0, 0, 0, 0, 0]) == 1
    assert eb.norm([-1, 2, -1, 2, -1, 2]) == 2


def test_examples_against_oracles():
    assert oracles.james_norm([1, -1, 1]) == pytest.approx(math.sqrt(3))
    assert oracles.schreier_norm([1, 1, 1, 1]) == 1
    assert oracles.schreier_norm([0, 0, 0, 0, 1, 1]) == 2
    assert oracles.ebasis_norm([1, 0]) == 1
    assert oracles.ebasis_norm([-1, 2, -1, 2, -1, 2]) == 2


@pytest.mark.parametrize("spec", RW_SPECS)
def test_rosenthal_woo_indicator_closed_form(spec):
    model = NormModel.build(spec, 12)
    w = Weight.power(0.4)
    q = float(spec["q"])
    for A in [(1,), (2, 5), (1, 2, 3, 4), (3, 7, 8, 11, 12)]:
        x = model.vector({a: 1 for a in A})
        first = 1.0 if math.isinf(q) else len(A) ** (1 / q)
        expected = max(first, measure(w, A) ** (1 / spec["p"]))
        assert model.norm(x) == pytest.approx(expected, rel=1e-14)


@pytest.mark.parametrize("k", [0, 1, 2, 3])
def test_f1q_single_level(k):
    model = NormModel.build({"kind": "f1q", "q": 2, "levels": [k]})
    assert model.window == 2**k
    assert model.norm(np.ones(2**k)) == pytest.approx(2**k, rel=1e-14)


def test_f1q_rejects_wrong_size_and_levels():
    with pytest.raises(ValueError):
        NormModel.build({"kind": "f1q", "q": 2, "levels": [0, 1]}, 4)
    with pytest.raises(ValueError):
        NormModel.build({"kind": "f1q", "q": 2, "levels": [1, 1]})


def test_f1q_two_levels_by_hand():
    # coordinates: [0,1) then [0,1/2), [1/2,1); g = sqrt(1 + 4) on the left half, 1 on the right
    model = NormModel.build({"kind": "f1q", "q": 2, "levels": [0, 1]})
    assert model.norm([1, 1, 0]) == pytest.approx((math.sqrt(5) + 1) / 2)


def test_pathological_model_builds():
    model = NormModel(pathological_spec(), pathological_spec().size())
    assert model.window == 1 + 3 + 7
    assert not model.is_lattice
    assert model.norm(np.ones(model.window)) > 0


@pytest.mark.parametrize("n", range(1, 9))
def test_james_matches_partition_oracle_exhaustively_small(n):
    rng = np.random.default_rng(n)
    model = NormModel.build({"kind": "james", "q": 2}, n)
    for x in rng.uniform(-1, 1, size=(20, n)):
        assert model.norm(x) == pytest.approx(oracles.james_norm(x), rel=1e-12)
    for signs in itertools.product((1, -1), repeat=min(n, 6)):
        x = np.zeros(n)
        x[: len(signs)] = signs
        assert model.norm(x) == pytest.approx(oracles.james_norm(x), rel=1e-12)


@given(st.lists(st.floats(-3, 3, allow_nan=False), min_size=1, max_size=10), st.sampled_from([1.5, 2.0, 3.0]))
def test_james_dp_equals_partition_oracle(vals, q):
    model = NormModel.build({"kind": "james", "q": q}, len(vals))
    assert model.norm(vals) == pytest.approx(oracles.james_norm(vals, q), rel=1e-12, abs=1e-300)


@given(st.lists(st.sampled_from([0.0, 1.0, -1.0, 0.5, 2.0, -3.0]), min_size=1, max_size=10))
def test_schreier_matches_subset_oracle(vals):
    model = NormModel.build({"kind": "schreier"}, len(vals))
    # grid values keep everything exact
    assert model.norm(vals) == oracles.schreier_norm(vals)


@given(st.lists(st.floats(-3, 3, allow_nan=False), min_size=1, max_size=12))
def test_ebasis_matches_explicit_vectors(vals):
    model = NormModel.build({"kind": "ebasis"}, len(vals))
    assert model.norm(vals) == pytest.approx(oracles.ebasis_norm(vals), rel=1e-12, abs=1e-15)


@pytest.mark.parametrize("N", range(1, 7))
def test_schreier_blocks(N):
    model = NormModel.build({"kind": "schreier"}, N * N + N)
    assert model.norm(model.vector({n: 1 for n in range(N * N + 1, N * N + N + 1)})) == N
    assert model.norm(model.vector([1] * N)) <= math.sqrt(N)


@pytest.mark.parametrize("N", range(1, 11))
def test_ebasis_first_block_sum(N):
    model = NormModel.build({"kind": "ebasis"}, 2 * N)
    assert model.norm(np.ones(2 * N)) == 0.75 * N + 0.25


def test_ebasis_lower_democracy_bound():
    # the pair dynamic program visits every signed set of window 20
    table = dm_table(NormModel.build({"kind": "ebasis"}, 20), 10)
    for size in range(1, 11):
        assert table["size_min"][size] >= size / 8
    # and agrees with plain enumeration where that is affordable
    for W in (6, 9):
        model = NormModel.build({"kind": "ebasis"}, W)
        fast, slow = dm_table(model, W), dm_table(model, W, method="enumerate")
        np.testing.assert_allclose(fast["size_min"][1:], slow["size_min"][1:], rtol=1e-12)
        np.testing.assert_allclose(fast["size_max"][1:], slow["size_max"][1:], rtol=1e-12)


@pytest.mark.parametrize("W", [4, 6, 8])
def test_ebasis_lower_bound_by_enumeration(W):
    model = NormModel.build({"kind": "ebasis"}, W)
    for k in range(1, W + 1):
        for A in itertools.combinations(range(W), k):
            for signs in itertools.product((1, -1), repeat=k):
                x = np.zeros(W)
                x[list(A)] = signs
                assert oracles.ebasis_norm(x) >= k / 8
                assert model.norm(x) >= k / 8


def test_lattice_flags():
    expect = {"lp": True, "weighted_lp": True, "schreier": True, "rosenthal_woo": True,
              "james": False, "rw_summing": False, "ebasis": False}
    for spec in ALL_SPECS:
        model = NormModel.build(spec, 6)
        if spec["kind"] in expect:
            assert model.is_lattice is expect[spec["kind"]], spec
    assert NormModel.build({"kind": "f1q", "levels": [0, 1]}).is_lattice
    assert NormModel.build(ALL_SPECS[10], 6).is_lattice
    assert not NormModel.build(ALL_SPECS[11], 6).is_lattice
    assert not NormModel.build(ALL_SPECS[12], 6).is_lattice


@given(vec6, st.lists(st.floats(0, 1), min_size=6, max_size=6), st.sampled_from(
    [s for s in ALL_SPECS if NormModel.build(s, 6).is_lattice]))
def test_lattice_flag_is_honest(x, shrink, spec):
    model = NormModel.build(spec, 6)
    smaller = x * np.array(shrink)
    assert model.norm(smaller) <= model.norm(x) * (1 + 1e-12) + 1e-300


@given(vec6, vec6, coef, st.sampled_from(ALL_SPECS))
def test_norm_axioms(x, y, c, spec):
    model = NormModel.build(spec, 6)
    assert model.norm(np.zeros(6)) == 0
    nx = model.norm(x)
    assert nx >= 0
    assert model.norm(c * x) == pytest.approx(abs(c) * nx, rel=1e-12, abs=1e-300)
    assert model.norm(x + y) <= (nx + model.norm(y)) * (1 + 1e-12)


@given(vec6, st.sampled_from(ALL_SPECS))
def test_batched_and_single_evaluation_agree(x, spec):
    model = NormModel.build(spec, 6)
    assert model.norms(x[None, :])[0] == pytest.approx(model.norm(x), rel=1e-13, abs=1e-300)


def test_dual_norm_examples():
    assert NormModel.build({"kind": "lp", "p": 1}, 2).dual_norm([1, -1]) == 1
    for m in (1, 4, 9):
        assert NormModel.build({"kind": "lp", "p": 2}, 9).dual_norm([1] * m + [0] * (9 - m)) == pytest.approx(math.sqrt(m))
    for kind in ("schreier", "james", "ebasis"):
        model = NormModel.build({"kind": kind}, 4)
        assert not model.has_dual_closed_form
        with pytest.raises(UnsupportedDual):
            model.dual_norm([1, 0, 0, 0])


def test_dual_norm_composites():
    spec = {"kind": "dsum_inf", "parts": [{"kind": "lp", "p": 1}, {"kind": "lp", "p": 2}], "sizes": [2, 2]}
    model = NormModel.build(spec, 4)
    assert model.dual_norm([1, -1, 3, 4]) == pytest.approx(1 + 5)
    spec["kind"] = "dsum_l1"
    assert NormModel.build(spec, 4).dual_norm([1, -1, 3, 4]) == pytest.approx(5)


@given(vec6, vec6)
def test_weighted_dual_pairing(x, f):
    # |<f, x>| <= ||f||_* ||x||
    model = NormModel.build({"kind": "weighted_lp", "p": 3, "weight": {"kind": "power", "theta": 0.3}}, 6)
    assert abs(float(f @ x)) <= model.dual_norm(f) * model.norm(x) * (1 + 1e-12) + 1e-12


def test_frame_bounds_examples():
    assert NormModel.build({"kind": "lp", "p": 2}, 5).frame_bounds() == (1.0, 1.0, True)
    c1, c2, exact = NormModel.build({"kind": "ebasis"}, 8).frame_bounds()
    assert c1 == pytest.approx(1.0) and c2 >= 1 and not exact
    c1, c2, exact = NormModel.build({"kind": "schreier"}, 8).frame_bounds()
    assert (c1, c2) == (1.0, 1.0)
    assert np.all(NormModel.build({"kind": "schreier"}, 8).basis_norms == 1)


def test_parse_errors():
    bad = [{}, {"kind": "nope"}, {"kind": "lp", "p": 0.5}, {"kind": "dsum_inf", "parts": []},
           {"kind": "james", "q": 0.5}, {"kind": "weighted_lp", "p": 2}, "lp"]
    for spec in bad:
        with pytest.raises((ValueError, KeyError, TypeError)):
            NormModel.build(spec, 4)
    with pytest.raises(ValueError):
        NormModel.build({"kind": "dsum_inf", "parts": [{"kind": "lp"}], "sizes": [3]}, 4)
    with pytest.raises(ValueError):
        NormModel.build({"kind": "lp", "p": 2}, 4).norm([1, 2, 3])
    with pytest.raises(ValueError):
        NormModel.build({"kind": "lp", "p": 2}, 4).vector({5: 1})
    with pytest.raises(ValueError):
        NormModel.build({"kind": "lp", "p": 2}, 2).norm([np.nan, 1])


@pytest.mark.parametrize("spec", ALL_SPECS)
def test_spec_json_roundtrip(spec):
    model = NormModel.build(spec, 6)
    again = NormModel.build(model.to_json(), 6)
    x = np.arange(1, 7) * (-1.0) ** np.arange(6)
    assert again.norm(x) == model.norm(x)


@given(st.lists(st.floats(-1, 1), min_size=12, max_size=12), st.integers(0, 2**12 - 1))
def test_rw_inf_indicator_independent_of_signs(coeffs, mask):
    model = NormModel.build(RW_SPECS[0], 16)
    x = np.zeros(16)
    x[:12] = coeffs
    A = [12, 13, 14, 15]
    values = set()
    for signs in itertools.product((1, -1), repeat=4):
        y = x.copy()
        y[A] = signs
        values.add(model.norm(y))
    assert max(values) - min(values) <= 1e-12 * max(values)
