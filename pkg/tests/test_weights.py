import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from hpweights.grid_core import Grid, Rect, SampledField
from hpweights.weights import (CubeFamily, InvalidWeight, Weight, a1_quantity, ap_constant,
                               ap_quantity, critical_index, doubling_ratio, lp_w_norm,
                               reverse_doubling_constant, subset_lower_bound, tail_integral,
                               majority_subset_ratio,
                               weighted_maximal, weighted_measure)

U = Rect((0.0,), (1.0,))


def test_weighted_measure_closed_forms():
    assert weighted_measure(Weight.power(0), Rect((-1.0,), (3.0,))) == pytest.approx(4)
    assert weighted_measure(Weight.power(1), U) == pytest.approx(0.5, abs=1e-6)
    assert weighted_measure(Weight.power(0.5), U) == pytest.approx(2 / 3, abs=1e-6)


def test_weighted_measure_2d_cells_sum_to_total():
    w = Weight.power(0.5, n=2)
    g = Grid((-1.0, -1.0), (1.0, 1.0), 1 / 8)
    assert w.cell_integrals(g).sum() == pytest.approx(w.integral(Rect((-1.0, -1.0), (1.0, 1.0))),
                                                      rel=1e-9)


def test_non_integrable_power_is_rejected():
    with pytest.raises(InvalidWeight):
        Weight.power(-2)
    with pytest.raises(InvalidWeight):
        Weight.from_spec("power:-1")


def test_ap_quantity_oracles():
    assert ap_quantity(Weight.power(0), 2, Rect((3.0,), (7.0,))) == pytest.approx(1)
    assert ap_quantity(Weight.power(0.5), 2, U) == pytest.approx(4 / 3, abs=1e-4)


@given(st.floats(-0.9, 0.9), st.floats(1.2, 4.0), st.floats(-3, 3), st.floats(0.01, 5))
def test_ap_quantity_at_least_one(a, p, c, s):
    # Hölder's inequality gives A_p >= 1 on every cube
    v = ap_quantity(Weight.power(a), p, Rect.cube([c], s))
    assert v >= 1 - 1e-9


def test_a1_oracles():
    assert a1_quantity(Weight.power(0), Rect((2.0,), (5.0,))) == pytest.approx(1)
    want = (2 / 3) * (2 ** 1.5 - 1)
    assert a1_quantity(Weight.power(0.5), Rect((1.0,), (2.0,))) == pytest.approx(want, abs=1e-4)


def test_a1_sampled_weight_grows_with_resolution():
    vals = []
    for h in (1 / 8, 1 / 64, 1 / 512):
        g = Grid((0.0,), (1.0,), h)
        ws = Weight.sampled(SampledField(g, np.sqrt(g.axis(0))))
        vals.append(a1_quantity(ws, U, g))
    assert vals[0] < vals[1] < vals[2]


def test_ap_constant_flags():
    fam = CubeFamily.over((-4.0,), (4.0,))
    one = ap_constant(Weight.power(0), 2, fam)
    assert one.sup == pytest.approx(1) and not one.flag
    half = ap_constant(Weight.power(0.5), 2, fam)
    assert math.isfinite(half.sup) and not half.flag
    assert ap_constant(Weight.power(1.5), 2, fam).flag


def test_critical_index():
    assert float(critical_index(Weight.power(0.5))) == pytest.approx(1.5, abs=0.05)
    assert float(critical_index(Weight.power(0))) <= 1 + 0.05
    assert float(critical_index(Weight.power(-0.5))) <= 1 + 0.05


def test_doubling():
    assert doubling_ratio(Weight.power(0), U, 2).ratio == pytest.approx(2)
    want = (0.5 ** 1.5 + 1.5 ** 1.5)
    assert doubling_ratio(Weight.power(0.5), U, 2).ratio == pytest.approx(want, abs=1e-3)
    fam = CubeFamily.over((-4.0,), (4.0,))
    rep = ap_constant(Weight.power(0.5), 2, fam)
    d = doubling_ratio(Weight.power(0.5), U, 2, rep)
    assert d.ok and d.ratio <= d.bound


def test_reverse_doubling_above_one():
    fam = CubeFamily.over((-4.0,), (4.0,), 0, 5)
    for a in (-0.5, 0.0, 0.5):
        assert reverse_doubling_constant(Weight.power(a), fam) > 1


def test_tail_integral_oracles():
    g = Grid((-8.0,), (8.0,), 1 / 16)
    t = tail_integral(Weight.power(0.5), 1.0, 2.0, g)
    assert t.truncated
    assert t.value_untruncated == pytest.approx(4.0, rel=1e-9)
    assert t.bound == pytest.approx(4 / 3, rel=1e-9)
    assert t.value == pytest.approx(4 - 4 / math.sqrt(8), rel=1e-9)
    one = tail_integral(Weight.power(0), 1.0, 2.0, g)
    # int_{|x|>=1} x^-2 = 2 and Q(0, 2r) = [-r, r] has measure 2
    assert one.value_untruncated == pytest.approx(2.0)
    assert one.bound == pytest.approx(2.0)


def _random_subset(rng, inside_idx, frac):
    k = max(1, int(round(frac * len(inside_idx))))
    return rng.choice(inside_idx, size=k, replace=False)


def test_subset_lower_bound_trivial_cases():
    g = Grid((0.0,), (1.0,), 1 / 16)
    Q = U
    full = g.cell_mask(Q)
    chk = subset_lower_bound(Weight.power(0), Q, full, 2, 1.0, g)
    assert chk.ok and chk.ratio == pytest.approx(1)
    half = full.copy()
    half[8:] = False
    chk = subset_lower_bound(Weight.power(0), Q, half, 2, 1.0, g)
    assert chk.ratio == pytest.approx(0.5) and chk.bound == pytest.approx(0.25)


def test_subset_lower_bound_random_draws():
    w = Weight.power(0.5)
    g = Grid((-4.0,), (4.0,), 1 / 16)
    fam = CubeFamily.over((-4.0,), (4.0,))
    ap = ap_constant(w, 2, fam).sup
    rng = np.random.default_rng(0)
    cubes = [r for _, r in fam.cubes() if g.cell_mask(r).sum() >= 4]
    for _ in range(100):
        Q = cubes[rng.integers(len(cubes))]
        idx = np.nonzero(g.cell_mask(Q).ravel())[0]
        E = np.zeros(g.size, dtype=bool)
        E[_random_subset(rng, idx, 0.25)] = True
        assert subset_lower_bound(w, Q, E.reshape(g.shape), 2, ap, g).ok


def test_lp_w_norm_basics():
    g = Grid((0.0,), (1.0,), 1 / 64)
    one = SampledField(g, np.ones(g.size))
    assert lp_w_norm(one, 2, Weight.power(0)) == pytest.approx(1)
    assert lp_w_norm(one * 2, 2, Weight.power(0)) == pytest.approx(2)


def test_lp_w_norm_haar_against_finer_grid():
    # Haar is piecewise constant on dyadic cells, so exact cell integrals of w
    # make the value resolution-independent; the fine grid is the oracle
    w = Weight.power(0.5)
    vals = []
    for h in (1 / 16, 1 / 160):
        g = Grid((0.0,), (1.0,), h)
        x = g.axis(0)
        f = SampledField(g, np.where(x < 0.5, 1.0, -1.0))
        vals.append(lp_w_norm(f, 1.8, w))
    exact = (2 / 3) ** (1 / 1.8)
    assert vals[0] == pytest.approx(exact, rel=1e-12)
    assert vals[1] == pytest.approx(exact, rel=1e-12)


def test_weighted_maximal():
    g = Grid((-4.0,), (4.0,), 1 / 8)
    c = SampledField(g, np.full(g.size, -3.0))
    M = weighted_maximal(c, Weight.power(0.5))
    assert np.allclose(M.values, 3.0)
    x = g.axis(0)
    chi = SampledField(g, ((x >= 0) & (x < 1)).astype(float))
    M1 = weighted_maximal(chi, Weight.power(0))
    M2 = weighted_maximal(chi * 2, Weight.power(0))
    assert np.allclose(M2.values, 2 * M1.values)
    # brute force over the same family at x = 2.0625
    fam = CubeFamily.for_grid(g)
    i = int(np.argmin(np.abs(x - 2.0625)))
    best = 0.0
    for _, r in fam.cubes():
        if r.contains(np.array([[x[i]]]))[0]:
            m = g.cell_mask(r)
            best = max(best, chi.values[m].mean())
    assert M1.values[i] == pytest.approx(best)


def test_majority_subset_ratio():
    g = Grid((0.0,), (4.0,), 1 / 16)
    # unweighted: more than half the cells carry more than half the mass
    assert 0.5 < majority_subset_ratio(Weight.power(0), g, draws=50) <= 1.0
    r = majority_subset_ratio(Weight.power(0.5), g, draws=50)
    assert 0 < r <= 1.0
