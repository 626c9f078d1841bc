"""Weighted Hardy-space side: maximal functions, atoms, the admissible psi,
the Calderón reproducing formula and the tent-based atomic decomposition.

Two discretisations of ``f * psi_t`` appear here:

* kernel-grid quadrature (``grid_core.convolve_batch``), shared with the
  amplitude LPs so that ``S_psi <= L S_alpha`` holds sample by sample;
* lattice convolution on the field's own grid (:func:`lattice_convolve`),
  used for maximal functions and the decomposition, where exact discrete
  mean zero and exact supports matter.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import signal, special

from .grid_core import (DyadicCube, Grid, HalfSpaceLadder, Rect, Refusal, SampledField,
                        cone_integrals, default_ladder, dyadic_generation_of_scale, fmt,
                        write_field_csv)
from .kernel_family import TestKernel, Validation, holder_constant, kernel_axis
from .weights import Weight, lp_w_norm

__all__ = [
    "AdmissiblePsi",
    "admissible_psi",
    "calderon_integral",
    "lattice_kernel",
    "lattice_convolve",
    "unit_mass_profile",
    "maximal_fn",
    "hp_w_norm",
    "Atom",
    "validate_atom",
    "make_atom",
    "VanishReport",
    "vanishes_weakly_check",
    "AtomicDecomposition",
    "atomic_decompose",
    "reconstruct",
    "calderon_quadrature",
]


# --------------------------------------------------------------------------
# profiles


def _bump(r):
    """``(1 - r^2)^4`` on ``r < 1``."""
    return np.where(r < 1, np.clip(1 - r ** 2, 0, None) ** 4, 0.0)


def _psi_profile(r, n):
    """``-Laplacian (1 - |x|^2)^4`` as a function of ``r = |x|`` (mean zero)."""
    u = np.clip(1 - r ** 2, 0, None)
    if n == 1:
        val = 8 * u ** 2 * (1 - 7 * r ** 2)
    else:
        val = 16 * u ** 2 * (1 - 4 * r ** 2)
    return np.where(r < 1, val, 0.0)


def unit_mass_profile(n: int):
    """Smooth unit-mass bump ``B / int B`` and its sup norm."""
    if n == 1:
        mass = 256.0 / 315.0                      # int_{-1}^{1} (1-x^2)^4
    else:
        mass = math.pi / 5.0                      # 2 pi int_0^1 r (1-r^2)^4
    return (lambda r: _bump(r) / mass), 1.0 / mass


def _fourier_radial(fn, s, n, nodes: int = 2000):
    """Fourier transform at frequencies ``s`` (``e^{-2 pi i x xi}`` convention)."""
    x, wq = np.polynomial.legendre.leggauss(nodes)
    r = (x + 1) / 2
    wq = wq / 2
    s = np.atleast_1d(np.asarray(s, dtype=float))
    arg = 2 * np.pi * s[:, None] * r[None, :]
    if n == 1:
        return 2 * (np.cos(arg) @ (wq * fn(r)))
    return 2 * np.pi * (special.j0(arg) @ (wq * fn(r) * r))


def _log_frequency_integral(fn, n, u_lo=-10.0, u_hi=5.5, panels=200):
    """``int_0^inf |hat fn(s)|^2 ds / s`` as Gauss-Legendre panels in ``log s``."""
    gx, gw = np.polynomial.legendre.leggauss(16)
    edges = np.linspace(u_lo, u_hi, panels + 1)
    half = np.diff(edges) / 2
    mid = (edges[:-1] + edges[1:]) / 2
    u = (mid[:, None] + half[:, None] * gx[None, :]).ravel()
    wts = (half[:, None] * gw[None, :]).ravel()
    return float(wts @ _fourier_radial(fn, np.exp(u), n) ** 2)


def _calderon_profile_integral(n: int) -> float:
    """``int_0^inf |hat psi_0(s)|^2 ds / s`` for the raw profile."""
    return _log_frequency_integral(lambda r: _psi_profile(r, n), n)


@dataclass
class AdmissiblePsi:
    """Stored kernel ``psi`` (Hölder constant ``L <= 1``) and the constant ``c``
    making ``c psi`` satisfy the Calderón normalisation."""

    kernel: TestKernel
    L: float
    c: float
    alpha: float
    n: int
    raw_scale: float
    profile_integral: float

    @property
    def normalized_scale(self) -> float:
        """Factor turning the raw profile into ``c psi``."""
        return 1.0 / math.sqrt(self.profile_integral)

    def meta(self) -> dict:
        return {"alpha": self.alpha, "n": self.n, "m": len(self.kernel.axis), "L": self.L,
                "c": self.c, "profile": "-laplacian (1-|x|^2)^4"}


_PSI_CACHE: dict = {}


def admissible_psi(alpha: float = 1.0, n: int = 1, m: int | None = None) -> AdmissiblePsi:
    """Even (radial) mean-zero kernel supported in the unit ball.

    The profile ``-Laplacian (1-|x|^2)^4`` is sampled on the LP node grid,
    made exactly mean-zero by subtracting a multiple of the bump, and divided
    by its discrete Hölder constant.  ``c`` rescales it to the Calderón
    normalisation (``c > 1``: the normalised kernel is not in the class).
    """
    if not 0 < alpha <= 1:
        raise ValueError("alpha must lie in (0, 1]")
    if m is None:
        # the pairwise Hölder scan is quadratic in the node count
        m = 201 if n == 1 else 61
    key = (alpha, n, m)
    if key in _PSI_CACHE:
        return _PSI_CACHE[key]
    ax = kernel_axis(m, 1.0)
    k = TestKernel(ax, np.zeros((len(ax),) * n), alpha, None, n)
    r = k.norms
    raw = _psi_profile(r, n)
    bump = _bump(r)
    raw = raw - bump * (raw.sum() / bump.sum())
    k.values = raw.reshape(k.values.shape)
    lam = holder_constant(k, alpha) * (1 + 1e-12)
    k.values = k.values / lam
    L = 1.0 / (1 + 1e-12)
    integral = _calderon_profile_integral(n)
    if not (math.isfinite(integral) and integral > 0):
        raise RuntimeError("Calderón normalisation integral did not converge")
    c = lam / math.sqrt(integral)
    psi = AdmissiblePsi(k, L, c, alpha, n, lam, integral)
    _PSI_CACHE[key] = psi
    return psi


def calderon_integral(psi: AdmissiblePsi, u_hi: float = 5.5) -> float:
    """``int_0^inf |(c psi)^(s)|^2 ds / s`` from the continuous profile."""
    return _log_frequency_integral(lambda r: _psi_profile(r, psi.n) * psi.normalized_scale,
                                   psi.n, u_hi=u_hi)


# --------------------------------------------------------------------------
# lattice convolution


def lattice_kernel(profile, t: float, h: float, n: int, mean_zero: bool = False) -> np.ndarray:
    """``t^{-n} profile(|k h| / t)`` on offsets ``|k h| < t`` (odd-sized array).

    With ``mean_zero`` a multiple of the bump is subtracted so the discrete
    sum vanishes exactly.
    """
    K = int(math.ceil(t / h)) - 1
    off = np.arange(-K, K + 1) * h
    if n == 1:
        r = np.abs(off)
    else:
        X, Y = np.meshgrid(off, off, indexing="ij")
        r = np.hypot(X, Y)
    vals = np.where(r < t, profile(r / t), 0.0) / t ** n
    if mean_zero:
        b = np.where(r < t, _bump(r / t), 0.0)
        vals = vals - b * (vals.sum() / b.sum())
    return vals


def lattice_convolve(values: np.ndarray, kernel: np.ndarray, h: float) -> np.ndarray:
    """``sum_k f(x - y_k) K(y_k) h^n`` on the same grid (zero outside)."""
    n = values.ndim
    out = signal.oaconvolve(values, kernel, mode="same") if kernel.size > 64 else \
        signal.convolve(values, kernel, mode="same", method="direct")
    return out * h ** n


# --------------------------------------------------------------------------
# maximal functions


def maximal_fn(f: SampledField, ladder: HalfSpaceLadder | None = None,
               nontangential: bool = False) -> SampledField:
    """``sup_t |f * phi_t(x)|`` (or ``sup_{|y-x|<t}``) with the unit-mass bump."""
    g = f.grid
    ladder = ladder or default_ladder(g)
    prof, _ = unit_mass_profile(g.n)
    out = np.zeros(g.shape)
    for t in ladder.levels:
        conv = np.abs(lattice_convolve(f.values, lattice_kernel(prof, t, g.h, g.n), g.h))
        if nontangential:
            K = int(math.ceil(t / g.h)) - 1
            conv = _window_max(conv, K, g, t)
        np.maximum(out, conv, out=out)
    return SampledField(g, out)


def _window_max(vals, K, g, t):
    from scipy import ndimage
    if g.n == 1:
        return ndimage.maximum_filter(vals, size=2 * K + 1, mode="constant", cval=0.0)
    off = np.arange(-K, K + 1) * g.h
    X, Y = np.meshgrid(off, off, indexing="ij")
    foot = np.hypot(X, Y) < t
    return ndimage.maximum_filter(vals, footprint=foot, mode="constant", cval=0.0)


def hp_w_norm(f: SampledField, p: float, w: Weight, ladder=None) -> float:
    """``||M_phi f||_{L^p_w}``."""
    if not 0 < p <= 1:
        raise ValueError("p must lie in (0, 1]")
    return lp_w_norm(maximal_fn(f, ladder), p, w)


# --------------------------------------------------------------------------
# atoms


@dataclass
class Atom:
    field: SampledField
    cube: Rect
    p: float
    q: float
    s: int
    weight: Weight
    seed: int | None = None

    def describe(self) -> dict:
        return {"cube": self.cube.describe(), "p": self.p, "q": self.q, "s": self.s,
                "weight": self.weight.describe(), "seed": self.seed}


def _monomials(pts, center, s, scale):
    """Centred, scaled monomials of total degree <= s."""
    n = pts.shape[1]
    u = (pts - np.asarray(center)) / scale
    cols, degs = [], []
    for total in range(s + 1):
        for gamma in np.ndindex(*(total + 1,) * n):
            if sum(gamma) != total:
                continue
            cols.append(np.prod([u[:, d] ** gamma[d] for d in range(n)], axis=0))
            degs.append(total)
    return np.stack(cols, axis=1), degs


def validate_atom(a: Atom, rtol: float = 1e-6, moment_tol: float = 1e-8) -> Validation:
    """The three atom conditions: support, size in ``L^q_w``, vanishing moments.

    Moments are taken about the cube centre in units of the side, so the
    test ``|int a(x) ((x - x0)/r)^gamma| <= tol ||a||_1`` is scale-free.
    """
    f = a.field
    g = f.grid
    inside = g.cell_mask(a.cube)
    if np.any(f.values[~inside] != 0):
        return Validation(False, "(a) support leaves the cube")
    norm = lp_w_norm(f, a.q, a.weight)
    bound = a.weight.integral(a.cube) ** (1 / a.q - 1 / a.p)
    if norm > bound * (1 + rtol):
        return Validation(False, f"(b) ||a||_L^q_w = {norm:.9g} > w(Q)^(1/q-1/p) = {bound:.9g}",
                          norm / bound)
    l1 = f.l1()
    if a.s >= 0 and l1 > 0:
        V, degs = _monomials(g.points(), a.cube.center, a.s, a.cube.side)
        mom = V.T @ f.values.ravel() * g.cell_volume
        worst = float(np.abs(mom).max() / l1)
        if worst > moment_tol:
            i = int(np.argmax(np.abs(mom)))
            return Validation(False, f"(c) moment of degree {degs[i]} is {mom[i]:.3e}", worst)
    return Validation(True, "", norm / bound if bound > 0 else 0.0)


def make_atom(cube: Rect, w: Weight, p: float = 0.9, q: float = 1.8, s: int = 0,
              seed: int = 0, grid: Grid | None = None, degree: int = 4) -> Atom:
    """Random smooth atom on ``cube`` saturating the size condition.

    The shape is a random polynomial times ``prod (1 - u_d^2)^2`` with
    moments up to order ``s`` projected out.  The default grid spans eight
    sides around the cube with 16 cells per side.
    """
    if not (0 < p <= 1 and q > 1 and s >= 0):
        raise ValueError("need 0 < p <= 1, q > 1, s >= 0")
    r = cube.side
    if grid is None:
        lo = tuple(c - 8 * r for c in cube.center)
        grid = Grid.from_cells(lo, 256, r / 16)
    pts = grid.points()
    u = (pts - np.asarray(cube.center)) / (r / 2)
    env = np.prod(np.clip(1 - u ** 2, 0, None) ** 2, axis=1)
    env[~cube.contains(pts)] = 0.0
    for attempt in range(64):
        rng = np.random.default_rng(seed + attempt)
        P, _ = _monomials(pts, cube.center, degree, r / 2)
        shape = env * (P @ rng.normal(size=P.shape[1]))
        V, _ = _monomials(pts, cube.center, s, r)
        B = V * env[:, None]
        # project so that V^T shape = 0 exactly (up to rounding)
        M = V.T @ B
        coef = np.linalg.solve(M, V.T @ shape)
        shape = shape - B @ coef
        if np.abs(shape).max() > 1e-12:
            break
    else:
        raise RuntimeError("could not generate a non-degenerate atom")
    fld = SampledField(grid, shape)
    norm = lp_w_norm(fld, q, w)
    target = w.integral(cube) ** (1 / q - 1 / p)
    return Atom(SampledField(grid, shape * (target / norm)), cube, p, q, s, w, seed)


# --------------------------------------------------------------------------
# vanishing at infinity


@dataclass
class VanishReport:
    ts: list
    sups: list
    bounds: list
    bound_ok: list
    passed: bool
    ratio: float
    tol: float

    def to_dict(self) -> dict:
        return {"t": self.ts, "sup": self.sups, "bound": self.bounds, "bound_ok": self.bound_ok,
                "passed": self.passed, "final_over_max": self.ratio, "tol": self.tol}


def vanishes_weakly_check(f: SampledField, t_list=None, tol: float = 0.25) -> VanishReport:
    """``sup_x |f * phi_t(x)|`` over box nodes for increasing ``t``.

    Every ``t`` is checked against ``t^{-n} ||phi||_inf ||f||_1``; the check
    passes when all bounds hold and the value at the largest ``t`` is at most
    ``tol`` times the largest value seen.
    """
    g = f.grid
    if t_list is None:
        t_list = default_ladder(g).levels[::4]
    ts = np.asarray(t_list, dtype=float)
    if np.any(np.diff(ts) <= 0):
        raise ValueError("t_list must be increasing")
    prof, sup_phi = unit_mass_profile(g.n)
    l1 = f.l1()
    sups, bounds, ok = [], [], []
    for t in ts:
        conv = lattice_convolve(f.values, lattice_kernel(prof, t, g.h, g.n), g.h)
        s = float(np.abs(conv).max())
        b = t ** (-g.n) * sup_phi * l1
        sups.append(s)
        bounds.append(b)
        ok.append(bool(s <= b * (1 + 1e-12) + 1e-300))
    top = max(sups)
    ratio = sups[-1] / top if top > 0 else 0.0
    passed = all(ok) and ratio <= tol
    return VanishReport(ts.tolist(), sups, bounds, ok, passed, ratio, tol)


# --------------------------------------------------------------------------
# atomic decomposition


@dataclass
class DecompEntry:
    k: int | None
    l: int
    lam: float
    cube: DyadicCube
    atom: SampledField
    samples: int

    def describe(self) -> dict:
        r = self.cube.rect
        return {"k": self.k, "l": self.l, "lambda": self.lam,
                "cube": {"center": list(r.center), "side": r.side}, "samples": self.samples}


@dataclass
class AtomicDecomposition:
    entries: list
    grid: Grid
    padded: Grid
    ladder: HalfSpaceLadder
    s_psi: SampledField
    s_psi_norm: float
    p: float
    w_spec: str
    psi_meta: dict
    k_range: tuple
    total_samples: int
    assigned_samples: int
    zero_samples: int
    residual_samples: int
    source: SampledField | None = None
    calderon: SampledField | None = None
    classes: dict = field(default_factory=dict)

    @property
    def sum_lambda_p(self) -> float:
        return float(sum(abs(e.lam) ** self.p for e in self.entries))

    @property
    def coefficient_constant(self) -> float:
        if self.s_psi_norm == 0:
            return 0.0
        return self.sum_lambda_p / self.s_psi_norm ** self.p

    def to_dict(self, atom_dir=None) -> dict:
        entries = []
        for e in self.entries:
            d = e.describe()
            if atom_dir is not None:
                import os
                path = os.path.join(atom_dir, f"atom_k{e.k}_l{e.l}.csv")
                write_field_csv(e.atom, path)
                d["atom_csv_path"] = path
            entries.append(d)
        return {"p": self.p, "w_spec": self.w_spec, "psi_meta": self.psi_meta,
                "entries": entries, "sum_lambda_p": self.sum_lambda_p,
                "s_psi_norm": self.s_psi_norm, "k_range": list(self.k_range),
                "grid": self.grid.describe(), "padded_grid": self.padded.describe(),
                "ladder": self.ladder.describe(),
                "samples": {"total": self.total_samples, "assigned": self.assigned_samples,
                            "zero": self.zero_samples, "residual": self.residual_samples}}

    def to_json(self, atom_dir=None) -> str:
        return json.dumps(self.to_dict(atom_dir), indent=2, sort_keys=True)


def _level_class(s_r: np.ndarray) -> np.ndarray:
    """Largest ``k`` with ``2^k < s_r``; ``None``-like sentinel for ``s_r = 0``."""
    mant, e = np.frexp(s_r)
    k = np.where(mant == 0.5, e - 2, e - 1)
    return np.where(s_r > 0, k, np.iinfo(np.int64).min)


RESIDUAL = np.iinfo(np.int64).min


def _cube_classes(S: np.ndarray, grid: Grid, gen: int) -> np.ndarray:
    """Class ``k`` of every dyadic cube of one generation (array over cubes).

    ``|Q cap Omega_k| > |Q|/2`` counts cells with ``S > 2^k``; the largest such
    ``k`` is read off the ``floor(M/2)+1``-th largest value of ``S`` in ``Q``.
    """
    N = grid.shape[0]
    c = N >> gen
    cubes = 1 << gen
    if grid.n == 1:
        blocks = S.reshape(cubes, c)
    else:
        blocks = S.reshape(cubes, c, cubes, c).transpose(0, 2, 1, 3).reshape(cubes ** 2, c * c)
    M = blocks.shape[1]
    rank = M // 2 + 1
    srt = -np.sort(-blocks, axis=1)
    s_r = srt[:, rank - 1]
    k = _level_class(s_r)
    return k.reshape((cubes,) * grid.n)


def _is_pow2(v):
    return v > 0 and (v & (v - 1)) == 0


def atomic_decompose(f: SampledField, w: Weight, p: float = 0.9,
                     psi: AdmissiblePsi | None = None, ladder: HalfSpaceLadder | None = None,
                     keep_calderon: bool = True) -> AtomicDecomposition:
    """Tent-based decomposition ``f = sum_k sum_l lambda_kl a_kl``.

    ``f * psi_t`` is sampled on the grid nodes and ladder levels with the
    normalised lattice kernel.  Each sample ``(y_i, t_j)`` lies in the tent
    of one dyadic cube ``Q``; ``Q`` has a class ``k`` (``|Q cap Omega_k| >
    |Q|/2 >= |Q cap Omega_{k+1}|``, ``Omega_k = {S_psi f > 2^k}``) and the
    sample goes to the top-most ancestor of ``Q`` in the same class.  Cubes
    with at most half their cells in ``{S_psi f > 0}`` form a residual class.
    """
    g = f.grid
    n = g.n
    N = g.shape[0]
    if any(s != N for s in g.shape) or not _is_pow2(N):
        raise Refusal("decomposition needs a square grid with a power-of-two cell count")
    psi = psi or admissible_psi(1.0, n)
    ladder = ladder or default_ladder(g)
    ts = ladder.levels
    base = g.side
    gens = dyadic_generation_of_scale(ts, base)
    if gens.min() < 0:
        raise Refusal(f"ladder t_max={ladder.t_max} needs cubes larger than the box")
    if math.ldexp(base, -int(gens.max())) < g.h * (1 - 1e-12):
        raise Refusal("ladder t_min is below the finest dyadic generation of the grid")

    scale = psi.normalized_scale
    prof = lambda r: _psi_profile(r, n) * scale
    kernels = [lattice_kernel(prof, t, g.h, n, mean_zero=True) for t in ts]
    F = np.stack([lattice_convolve(f.values, K, g.h) for K in kernels])
    w_step = g.cell_volume * ladder.log_step
    S = np.sqrt(cone_integrals(F ** 2, g, ladder, g.points(), 1.0, warn=False)).reshape(g.shape)
    s_field = SampledField(g, S)
    s_norm = lp_w_norm(s_field, p, w)

    ell_max = math.ldexp(base, -int(gens.min()))
    pad = int(math.ceil(2 * ell_max / g.h))
    padded = Grid.from_cells(tuple(v - pad * g.h for v in g.lo), N + 2 * pad, g.h)
    inner = tuple(slice(pad, pad + N) for _ in range(n))

    total = F.size
    if not np.any(F):
        if np.any(f.values):
            raise Refusal("S_psi f vanishes identically although f does not: "
                          "resolution too coarse")
        return AtomicDecomposition([], g, padded, ladder, s_field, 0.0, p, w.describe(),
                                   psi.meta(), (0, 0), total, total, total, 0, f,
                                   SampledField(padded, np.zeros(padded.shape)) if
                                   keep_calderon else None)

    pos = S[S > 0]
    k_lo = int(math.floor(math.log2(pos.min()))) - 1
    k_hi = int(math.ceil(math.log2(S.max())))
    gmax = int(gens.max())
    classes = {gen: _cube_classes(S, g, gen) for gen in range(0, gmax + 1)}

    # top-most ancestor in the same class, generation by generation
    top = {}
    for gen in range(0, gmax + 1):
        cls = classes[gen]
        idx = np.indices(cls.shape)
        if gen == 0:
            top[gen] = (np.zeros_like(cls), idx)
            continue
        par_cls = classes[gen - 1][tuple(i // 2 for i in idx)]
        par_top_gen, par_top_idx = top[gen - 1]
        par_top_gen = par_top_gen[tuple(i // 2 for i in idx)]
        par_top_idx = [a[tuple(i // 2 for i in idx)] for a in par_top_idx]
        same = par_cls == cls
        tg = np.where(same, par_top_gen, gen)
        ti = [np.where(same, a, i) for a, i in zip(par_top_idx, idx)]
        top[gen] = (tg, ti)

    groups: dict = {}
    assigned = zero = residual = 0
    for j, t in enumerate(ts):
        gen = int(gens[j])
        c = N >> gen
        Fj = F[j]
        # cube index of every node at this generation
        node_idx = np.indices(g.shape) // c
        cls = classes[gen][tuple(node_idx)]
        tg, ti = top[gen]
        tgen = tg[tuple(node_idx)]
        tidx = [a[tuple(node_idx)] for a in ti]
        live = Fj != 0
        zero += int((~live).sum())
        residual += int((live & (cls == RESIDUAL)).sum())
        keys = np.stack([cls[live], tgen[live]] + [a[live] for a in tidx], axis=1)
        pos_idx = np.argwhere(live)
        if len(keys) == 0:
            continue
        uniq, inv = np.unique(keys, axis=0, return_inverse=True)
        inv = inv.ravel()
        for u_i, key in enumerate(uniq):
            sel = pos_idx[inv == u_i]
            groups.setdefault(tuple(int(v) for v in key), []).append((j, sel))
        assigned += int(live.sum())

    entries = []
    calderon = np.zeros(padded.shape)
    per_k: dict = {}
    for key in sorted(groups):
        k, tgen = key[0], key[1]
        corner = tuple(key[2:])
        cube = DyadicCube(tgen, corner, g.lo, base)
        rect = cube.rect
        wQ = w.integral(rect)
        energy = 0.0
        # synthesis runs on the cells of 5Q, which hold the exact support
        win = tuple(padded.index_range(rect.scale(5.0)))
        start = np.array([sl.start for sl in win])
        local = np.zeros(tuple(sl.stop - sl.start for sl in win))
        count = 0
        for j, sel in groups[key]:
            vals = F[j][tuple(sel.T)]
            energy += float((vals ** 2).sum())
            G = np.zeros(local.shape)
            G[tuple((sel + pad - start).T)] = vals
            local += lattice_convolve(G, kernels[j], g.h) * ladder.log_step
            count += len(sel)
        acc = np.zeros(padded.shape)
        acc[win] = local
        energy *= (wQ / rect.volume) * w_step
        lam = wQ ** (1 / p - 1 / 2) * math.sqrt(energy)
        calderon += acc
        if lam == 0:
            continue
        l = per_k.get(k, 0)
        per_k[k] = l + 1
        kk = None if k == RESIDUAL else k
        entries.append(DecompEntry(kk, l, lam, cube, SampledField(padded, acc / lam), count))

    d = AtomicDecomposition(entries, g, padded, ladder, s_field, s_norm, p, w.describe(),
                            psi.meta(), (k_lo, k_hi), total, assigned, zero, residual, f,
                            SampledField(padded, calderon) if keep_calderon else None,
                            {gen: classes[gen] for gen in classes})
    d.pad = pad
    d.inner = inner
    return d


def reconstruct(d: AtomicDecomposition) -> SampledField:
    """``sum lambda_kl a_kl`` on the padded grid (zero field when empty)."""
    out = np.zeros(d.padded.shape)
    for e in d.entries:
        out += e.lam * e.atom.values
    return SampledField(d.padded, out)


def calderon_quadrature(f: SampledField, psi: AdmissiblePsi | None = None,
                        ladder: HalfSpaceLadder | None = None, pad: int | None = None
                        ) -> SampledField:
    """Ungrouped quadrature of ``int int f*psi_t(y) psi_t(x-y) dy dt/t`` on a padded grid."""
    g = f.grid
    n = g.n
    psi = psi or admissible_psi(1.0, n)
    ladder = ladder or default_ladder(g)
    prof = lambda r: _psi_profile(r, n) * psi.normalized_scale
    if pad is None:
        pad = int(math.ceil(2 * ladder.t_max / g.h))
    padded = Grid.from_cells(tuple(v - pad * g.h for v in g.lo),
                             tuple(s + 2 * pad for s in g.shape), g.h)
    inner = tuple(slice(pad, pad + s) for s in g.shape)
    out = np.zeros(padded.shape)
    for t in ladder.levels:
        K = lattice_kernel(prof, t, g.h, n, mean_zero=True)
        Fj = lattice_convolve(f.values, K, g.h)
        G = np.zeros(padded.shape)
        G[inner] = Fj
        out += lattice_convolve(G, K, g.h) * ladder.log_step
    return SampledField(padded, out)


def pad_field(f: SampledField, padded: Grid) -> SampledField:
    """``f`` extended by zero to a larger aligned grid."""
    g = f.grid
    off = [int(round((a - b) / g.h)) for a, b in zip(g.lo, padded.lo)]
    out = np.zeros(padded.shape)
    out[tuple(slice(o, o + s) for o, s in zip(off, g.shape))] = f.values
    return SampledField(padded, out)


def relative_l2_error(f: SampledField, rec: SampledField) -> float:
    ref = pad_field(f, rec.grid)
    return float(np.linalg.norm(rec.values - ref.values) / np.linalg.norm(ref.values))
