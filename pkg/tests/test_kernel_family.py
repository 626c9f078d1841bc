import numpy as np
import pytest
from hypothesis import given, strategies as st

from hpweights.grid_core import Grid, SampledField, convolve_batch
from hpweights.kernel_family import (AmplitudeSolverConfig, TestKernel, get_solver,
                                     holder_constant, inclusion_constant, intrinsic_amplitude,
                                     kernel_axis, lip_norm, random_feasible_kernel,
                                     tilde_amplitude, validate_c_alpha, validate_c_alpha_eps)
from hpweights.presets import make_field
from hpweights.weights import CubeFamily

from conftest import odd_tent

LINE = Grid((-4.0,), (4.0,), 1 / 16)


def test_validators_on_simple_kernels(tent_kernel):
    z = TestKernel.zeros(101, 1.0)
    assert validate_c_alpha(z)
    assert validate_c_alpha(tent_kernel)
    flat = TestKernel.from_function(lambda x: np.where(np.abs(x[:, 0]) <= 1, 0.1, 0.0), 101, 1.0)
    v = validate_c_alpha(flat)
    assert not v and v.reason.startswith("mean")
    assert holder_constant(tent_kernel) == pytest.approx(1.0)


def test_decaying_class_validators(tent_kernel):
    assert validate_c_alpha_eps(TestKernel.zeros(101, 1.0, eps=1.0, R=4.0), eps=1.0)
    c = inclusion_constant(1.0, 2.0, 201, 8.0)
    big = tent_kernel.embed(kernel_axis(201, 8.0)).scaled(c)
    assert validate_c_alpha_eps(big, 1.0, 2.0)
    # slightly more than c must break some constraint for the worst-case member
    assert 0 < c < 1

    def spike(z):
        x = z[:, 0]
        return np.where(np.isclose(x, 2.0), 0.5, 0.0) - np.where(np.isclose(x, -2.0), 0.5, 0.0)
    bad = TestKernel.from_function(spike, 101, 1.0, eps=1.0, R=4.0)
    v = validate_c_alpha_eps(bad, 1.0, 1.0)
    assert not v and v.reason.startswith("decay")


def test_lip_norm_oracles():
    fam = CubeFamily.over((0.0,), (4.0,), 0, 5)
    g = Grid((0.0,), (4.0,), 1 / 64)
    assert lip_norm(SampledField(g, np.full(g.size, 7.0)), fam) == 0.0
    b = SampledField(g, g.axis(0).copy())
    assert lip_norm(b, fam) == pytest.approx(0.25, abs=1e-3)


def test_lip_norm_haar_brute_force():
    fam = CubeFamily.over((0.0,), (4.0,), 0, 4)
    g = Grid((0.0,), (4.0,), 1 / 32)
    x = g.axis(0)
    b = SampledField(g, np.where(x < 0.5, 1.0, np.where(x < 1, -1.0, 0.0)))
    best = 0.0
    for _, r in fam.cubes():
        blk = b.values[g.cell_mask(r)]
        best = max(best, np.abs(blk - blk.mean()).sum() * g.h / r.volume ** 2)
    assert lip_norm(b, fam) == pytest.approx(best)


def test_intrinsic_amplitude_constant_and_linear():
    cfg = AmplitudeSolverConfig(m=201)
    assert intrinsic_amplitude(make_field("constant", LINE), 0.3, 0.5, 1.0, cfg) == 0.0
    for y, t in [(0.0, 0.25), (1.3, 1.0), (-2.0, 0.5)]:
        v = intrinsic_amplitude(make_field("linear", LINE), y, t, 1.0, cfg)
        assert v == pytest.approx(t / 4, rel=0.02)
    v = intrinsic_amplitude(make_field("linear", LINE, c1=-3.0, c0=2.0), 0.5, 0.5, 1.0, cfg)
    assert v == pytest.approx(3 * 0.5 / 4, rel=0.02)


def test_tilde_amplitude_bounds():
    cfg = AmplitudeSolverConfig(m=101)
    assert tilde_amplitude(make_field("constant", LINE), 0.0, 0.5, 1.0, 2.0, cfg) == 0.0
    c = inclusion_constant(1.0, 2.0, 101, cfg.R)
    v = tilde_amplitude(make_field("linear", LINE), 0.0, 0.25, 1.0, 2.0, cfg)
    assert v >= c * 0.25 / 4 * (1 - 1e-6)


def test_tilde_over_intrinsic_band():
    cfg = AmplitudeSolverConfig(m=101)
    c = inclusion_constant(1.0, 2.0, 101, cfg.R)
    ratios = []
    for seed in range(4):
        f = make_field("random", LINE, seed=seed)
        for y in (-1.0, 0.5):
            a = intrinsic_amplitude(f, y, 0.5, 1.0, cfg)
            b = tilde_amplitude(f, y, 0.5, 1.0, 2.0, cfg)
            if a > 1e-12:
                ratios.append(b / a)
    assert min(ratios) >= c * (1 - 1e-6)
    assert np.isfinite(max(ratios))


@given(st.integers(0, 10 ** 6))
def test_random_kernels_are_feasible_and_symmetric(seed):
    k = random_feasible_kernel(1.0, seed, m=101)
    assert validate_c_alpha(k)
    assert validate_c_alpha(-k)


@given(st.integers(0, 10 ** 6))
def test_random_decaying_kernels_are_feasible(seed):
    k = random_feasible_kernel(1.0, seed, m=41, eps=2.0, R=4.0)
    assert validate_c_alpha_eps(k, 1.0, 2.0)


def test_lp_dominates_random_kernels():
    f = make_field("random", LINE, seed=3)
    lp = get_solver(1.0, 101)
    y, t = np.array([[0.4]]), 0.75
    val = lp.amplitudes(f, t, y)[0][0]
    best = 0.0
    for s in range(200):
        v, _ = convolve_batch(f, random_feasible_kernel(1.0, s, m=101, R=1.0), t, y)
        best = max(best, abs(v[0]))
    assert val >= best - 1e-9


def test_lp_kernel_is_certified():
    f = make_field("bump", LINE)
    lp = get_solver(0.5, 101)
    vals, _, ks = lp.amplitudes(f, 0.5, np.array([[0.3]]), want_kernels=True)
    v = validate_c_alpha(ks[0], 0.5, mean_tol=1e-8)
    assert v.ok or v.worst < 1e-7
    direct, _ = convolve_batch(f, ks[0], 0.5, np.array([[0.3]]))
    assert abs(direct[0]) == pytest.approx(vals[0], rel=1e-6)


def test_lp_matches_tent_optimum_at_alpha_half():
    # f(x) = x: optimum is sup int z phi(z) over the class, independent of y
    f = make_field("linear", LINE)
    a = intrinsic_amplitude(f, 0.0, 1.0, 0.5, AmplitudeSolverConfig(m=101))
    b = intrinsic_amplitude(f, 1.0, 1.0, 0.5, AmplitudeSolverConfig(m=101))
    assert a == pytest.approx(b, rel=1e-6)
    assert a >= 0.25  # the odd tent is in C_{1/2} as well


def test_config_rejects_bad_m():
    with pytest.raises(ValueError):
        AmplitudeSolverConfig(m=20)
