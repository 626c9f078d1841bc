import math
import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from hpweights.grid_core import (DegenerateConeWarning, DyadicCube, Grid, HalfSpaceLadder, Rect,
                                 Refusal, SampledField, TruncationWarning, cone_integral,
                                 cone_integrals, convolve_at, default_ladder, dyadic_family,
                                 dyadic_generation_of_scale, fmt, read_field_csv, tent_labels,
                                 write_field_csv)
from hpweights.kernel_family import TestKernel
from hpweights.presets import make_field


def test_grid_nodes_are_cell_centres():
    g = Grid((0.0,), (1.0,), 0.25)
    assert np.allclose(g.axis(0), [0.125, 0.375, 0.625, 0.875])
    assert g.size == 4 and g.cell_volume == 0.25


def test_constant_field_against_mean_zero_kernel_vanishes(tent_kernel):
    f = make_field("constant", Grid((-4.0,), (4.0,), 1 / 16))
    for t in (0.25, 1.0, 3.0):
        v = convolve_at(f, tent_kernel, t, 0.3)
        assert abs(v) <= 1e-10 * tent_kernel.l1()


def test_unit_mass_kernel_reproduces_constants():
    k = TestKernel.from_function(lambda z: 0.75 * np.clip(1 - z[:, 0] ** 2, 0, None), 2001, 1.0)
    k.values = k.values / k.mean()
    f = make_field("constant", Grid((-4.0,), (4.0,), 1 / 16))
    assert convolve_at(f, k, 0.5, 0.0) == pytest.approx(1.0, abs=1e-6)


@pytest.mark.parametrize("t", [0.125, 0.5, 1.0, 2.0])
def test_linear_field_against_odd_tent(tent_kernel, t):
    # int z phi(z) dz = 1/4 for the odd tent, so f*phi_t(0) = -t/4
    f = make_field("linear", Grid((-4.0,), (4.0,), 1 / 16))
    assert convolve_at(f, tent_kernel, t, 0.0) == pytest.approx(-t / 4, rel=1e-3)


def test_truncation_is_reported(tent_kernel):
    g = Grid((-1.0,), (1.0,), 1 / 16)
    f = SampledField(g, np.ones(g.size))
    with pytest.warns(TruncationWarning):
        convolve_at(f, tent_kernel, 2.0, 0.0)
    _, trunc = convolve_at(f, tent_kernel, 0.25, 0.0, report=True)
    assert not trunc


def test_cone_integral_zero_and_single_level():
    g = Grid((-4.0,), (4.0,), 1 / 64)
    lad = HalfSpaceLadder(1.0, 1.0 + 1e-9)
    assert len(lad.levels) == 1
    assert cone_integral(np.zeros((1, g.size)), g, lad, 0.0) == 0.0
    # count * h * ln(rho) / t -> 2 ln(rho) as h -> 0
    errs = []
    for h in (1 / 10, 1 / 40, 1 / 160):
        g = Grid((-4.0,), (4.0,), h)
        v = cone_integral(np.ones((1, g.size)), g, lad, 0.013)
        errs.append(abs(v - 2 * lad.log_step))
    assert errs[-1] <= errs[0] and errs[-1] < 2e-2 * lad.log_step


def test_cone_integral_constant_matches_count_formula():
    g = Grid((-4.0,), (4.0,), 1 / 8)
    lad = HalfSpaceLadder(0.5, 0.5 + 1e-9)
    v = cone_integral(np.ones((1, g.size)), g, lad, 0.0)
    count = int((np.abs(g.axis(0)) < 0.5).sum())
    assert v == pytest.approx(count * g.h * lad.log_step / 0.5, rel=1e-14)


@given(st.integers(0, 2 ** 31 - 1), st.floats(1.0, 4.0))
def test_cone_nesting(seed, beta):
    rng = np.random.default_rng(seed)
    g = Grid((-2.0,), (2.0,), 1 / 8)
    lad = default_ladder(g)
    F = rng.random((len(lad.levels), g.size))
    xs = rng.uniform(-2, 2, size=5)
    a = cone_integrals(F, g, lad, xs, 1.0, warn=False)
    b = cone_integrals(F, g, lad, xs, beta, warn=False)
    assert np.all(b >= a - 1e-12)


def test_cone_2d_matches_brute_force():
    rng = np.random.default_rng(1)
    g = Grid((-1.0, -1.0), (1.0, 1.0), 0.25)
    lad = HalfSpaceLadder(0.5, 1.0)
    F = rng.random((len(lad.levels),) + g.shape)
    x = np.array([0.1, -0.2])
    want = 0.0
    for j, t in enumerate(lad.levels):
        d = np.sqrt(((g.points() - x) ** 2).sum(1))
        want += F[j].ravel()[d < t].sum() * g.h ** 2 * lad.log_step / t ** 2
    assert cone_integral(F, g, lad, x) == pytest.approx(want, rel=1e-13)


def test_empty_cone_warns():
    g = Grid((0.0,), (1.0,), 0.25)
    lad = HalfSpaceLadder(0.01, 0.02)
    with pytest.warns(DegenerateConeWarning):
        cone_integrals(np.ones((len(lad.levels), g.size)), g, lad, [5.0])


def test_dyadic_family_children_parent_scale():
    g = Grid((0.0,), (1.0,), 1 / 8)
    fam = dyadic_family(g, 1, 1)
    assert [c.rect.lo + c.rect.hi for c in fam] == [(0.0, 0.5), (0.5, 1.0)]
    right = fam[1]
    assert right.parent().rect == Rect((0.0,), (1.0,))
    assert Rect((0.0,), (1.0,)).scale(3) == Rect((-1.0,), (2.0,))
    kids = DyadicCube(0, (0,), (0.0,), 1.0).children()
    assert [k.rect.lo[0] for k in kids] == [0.0, 0.5]
    with pytest.raises(Refusal):
        dyadic_family(g, 0, 5)


def test_tents_tile_the_ladder():
    g = Grid((0.0,), (8.0,), 1 / 8)
    lad = default_ladder(g)
    gens = dyadic_generation_of_scale(lad.levels, g.side)
    for t, k in zip(lad.levels, gens):
        side = math.ldexp(g.side, -int(k))
        assert side < t <= 2 * side * (1 + 1e-12)
    gen, corners = tent_labels(g, lad)
    # every (node, level) belongs to exactly one tent of its generation
    for j in range(len(lad.levels)):
        cube = DyadicCube(int(gen[j]), (int(corners[j][5][0]),), g.lo, g.side)
        assert cube.tent().contains(g.points()[5:6], lad.levels[j])[0]


def test_csv_round_trip(tmp_path):
    g = Grid((-1.0, 0.0), (1.0, 2.0), 0.25)
    f = SampledField(g, np.random.default_rng(0).normal(size=g.shape))
    p = tmp_path / "f.csv"
    write_field_csv(f, p)
    back = read_field_csv(p)
    assert back.grid.shape == g.shape
    assert np.array_equal(back.values, f.values)
    assert float(fmt(0.1)) == 0.1


def test_csv_non_uniform_row_reported(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("x,value\n0,1\n1,2\n2.5,3\n")
    with pytest.raises(ValueError, match="row 4"):
        read_field_csv(p)
