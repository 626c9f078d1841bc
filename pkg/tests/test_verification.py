import dataclasses
import math

import numpy as np
import pytest

from hpweights.grid_core import Grid, Rect, Refusal, SampledField
from hpweights.hardy_atoms import make_atom
from hpweights.presets import make_field
from hpweights.verification import (Case, SuiteReport, atom_corpus, lambda_threshold,
                                    run_suite, suite_chain17, suite_decomposition,
                                    suite_prop32, suite_prop33, suite_theorem_f, uniformity)
from hpweights.weights import Weight

WH = Weight.power(0.5)


@pytest.fixture(scope="module")
def small_corpus():
    return atom_corpus(WH, count=4, seed=1, r_range=(0.5, 2.0))


def test_uniformity_rule():
    assert uniformity([1.0, 2.0, 3.0]) == (3.0, 2.0, True)
    assert not uniformity([1.0, 1.0, 10.0])[2]
    assert not uniformity([1.0, math.inf])[2]
    with pytest.raises(ValueError):
        uniformity([])


def test_lambda_threshold():
    assert lambda_threshold(1, 1.0) == 5.0
    assert lambda_threshold(2, 1.0) == 4.0


def test_aggregate_dominates_cases():
    cases = [Case({}, 1, 1, c, True) for c in (0.5, 2.0, math.inf, 1.5)]
    rep = SuiteReport("x", cases)
    assert rep.aggregate_constant == 2.0
    assert all(rep.aggregate_constant >= c.constant for c in cases if math.isfinite(c.constant))
    assert rep.passed
    rep.error = "boom"
    assert not rep.passed


def test_prop32_small_corpus(small_corpus):
    rep = suite_prop32(small_corpus, WH, m=41)
    assert rep.passed
    assert rep.aggregate_constant >= max(c.constant for c in rep.cases)
    for c in rep.cases:
        assert c.extra["near_p"] >= 0 and c.extra["far_p"] >= 0


def test_prop32_monotone_under_corpus_extension(small_corpus):
    a = suite_prop32(small_corpus[:2], WH, m=41).aggregate_constant
    b = suite_prop32(small_corpus, WH, m=41).aggregate_constant
    assert b >= a


def test_prop32_errors(small_corpus):
    with pytest.raises(ValueError):
        suite_prop32([], WH, m=41)
    a = small_corpus[0]
    zero = dataclasses.replace(a, field=SampledField(a.field.grid, np.zeros(a.field.grid.size)))
    with pytest.raises(ValueError):
        suite_prop32([zero], WH, m=41)


def test_prop32_single_haar_atom_unweighted():
    w = Weight.power(0)
    a = make_atom(Rect((0.0,), (1.0,)), w, 0.9, 1.8, 0, seed=0)
    rep = suite_prop32([a], w, m=41)
    assert rep.passed and math.isfinite(rep.cases[0].lhs) and rep.cases[0].lhs > 0


def test_prop33_small_corpus(small_corpus):
    rep = suite_prop33(small_corpus, WH, m=41)
    assert rep.passed
    for c in rep.cases:
        assert c.extra["aperture_ratios"][0] == pytest.approx(1.0, abs=1e-12)
        assert c.extra["ring_bound_holds"]


def test_prop33_refuses_low_lambda(small_corpus):
    with pytest.raises(Refusal):
        suite_prop33(small_corpus, WH, lam=lambda_threshold(1, 1.0))
    with pytest.raises(Refusal):
        run_suite("prop33", lam=1.0)


def test_theorem_f_small():
    rep = suite_theorem_f(count=2, box=4.0, h=0.25, m=41)
    assert rep.passed
    assert rep.summary["max_drift"] < 0.1


def test_chain_sign_symmetric():
    g = Grid((-4.0,), (4.0,), 1 / 8)
    f = make_field("random", g, seed=5, spread=1.0)
    a = suite_chain17(f, points=10, m=41)
    b = suite_chain17(-f, points=10, m=41)
    assert a.passed and b.passed
    for ca, cb in zip(a.cases, b.cases):
        assert ca.extra["s_alpha"] == pytest.approx(cb.extra["s_alpha"], rel=1e-9, abs=1e-14)
        assert ca.extra["s_psi"] == pytest.approx(cb.extra["s_psi"], rel=1e-9, abs=1e-14)


def test_chain_constant_field_is_vacuous():
    g = Grid((-4.0,), (4.0,), 1 / 8)
    rep = suite_chain17(make_field("constant", g), points=10, m=41)
    assert rep.passed
    assert all(c.extra["s_alpha"] == 0 for c in rep.cases)


def test_chain_refuses_eps_below_alpha():
    with pytest.raises(Refusal):
        suite_chain17(points=5, eps=0.5, m=41)


def test_decomposition_small():
    # a box of 4 caps t at 2, too short for the side-2 atom
    rep = suite_decomposition(count=3, box=8.0, h=1 / 32)
    assert rep.passed, [c.extra for c in rep.cases]
    for c in rep.cases:
        assert c.extra["partition_exact"] and c.extra["support_in_5Q"]
        assert c.extra["worst_mean_over_l1"] <= 1e-8


def test_decomposition_flags_non_vanishing_input():
    g = Grid((-4.0,), (4.0,), 1 / 16)
    rep = suite_decomposition([make_field("constant", g)], h=1 / 16, box=4.0)
    assert not rep.passed
    assert "vanishing" in rep.cases[0].extra


def test_report_json_is_deterministic(small_corpus):
    a = suite_prop32(small_corpus[:2], WH, m=41)
    b = suite_prop32(small_corpus[:2], WH, m=41)
    assert a.to_json(include_runtime=False) == b.to_json(include_runtime=False)
    assert '"runtime"' not in a.to_json(include_runtime=False)
