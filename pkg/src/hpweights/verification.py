"""Named suites that measure the package's inequalities at desk scale.

Every suite returns a :class:`SuiteReport` with one case per input and the
measured constants; reports are deterministic for a given seed and config
apart from the ``runtime`` field.
"""

from __future__ import annotations

import hashlib
import json
import math
import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import kernel_family
from .grid_core import (Grid, HalfSpaceLadder, Rect, Refusal, SampledField, TruncationWarning,
                        default_ladder)
from .hardy_atoms import (admissible_psi, atomic_decompose, hp_w_norm, make_atom,
                          reconstruct, relative_l2_error, validate_atom, vanishes_weakly_check)
from .kernel_family import AmplitudeSolverConfig, inclusion_constant
from .presets import random_smooth
from .square_functions import (amplitude_field, aperture_ring_bound, g_from_field,
                               gstar_from_field, kernel_field, s_from_field,
                               weighted_norm_at_nodes)
from .weights import CubeFamily, Weight, ap_constant, lp_w_norm

__all__ = ["SuiteReport", "Case", "SUITES", "run_suite", "suite_prop32", "suite_prop33",
           "suite_theorem_f", "suite_chain17", "suite_decomposition", "uniformity",
           "lambda_threshold"]

UNIFORMITY_FACTOR = 3.0


def _clean(x):
    """JSON-safe copy: non-finite floats become strings, numpy scalars plain."""
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, (np.floating, float)):
        v = float(x)
        return v if math.isfinite(v) else str(v)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


@dataclass
class Case:
    descriptor: dict
    lhs: float
    rhs: float
    constant: float
    passed: bool
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"descriptor": self.descriptor, "lhs": self.lhs, "rhs": self.rhs,
                "constant": self.constant, "pass": self.passed, "extra": self.extra}


@dataclass
class SuiteReport:
    suite: str
    cases: list
    params: dict = field(default_factory=dict)
    summary: dict = field(default_factory=dict)
    runtime: float = 0.0
    error: str | None = None

    @property
    def aggregate_constant(self) -> float:
        vals = [c.constant for c in self.cases if math.isfinite(c.constant)]
        return max(vals) if vals else 0.0

    @property
    def passed(self) -> bool:
        return self.error is None and all(c.passed for c in self.cases)

    def to_dict(self, include_runtime: bool = True) -> dict:
        d = {"suite": self.suite, "passed": self.passed,
             "aggregate_constant": self.aggregate_constant, "params": self.params,
             "summary": self.summary, "cases": [c.to_dict() for c in self.cases],
             "error": self.error}
        if include_runtime:
            d["runtime"] = self.runtime
        return _clean(d)

    def to_json(self, include_runtime: bool = True) -> str:
        return json.dumps(self.to_dict(include_runtime), indent=2, sort_keys=True)

    def lines(self) -> list:
        out = [f"{self.suite}: {'PASS' if self.passed else 'FAIL'} "
               f"aggregate_constant={self.aggregate_constant:.6g}"]
        if self.error:
            out.append(f"  error: {self.error}")
        return out


def uniformity(values) -> tuple:
    """``(max, median, max <= 3 median)`` over finite positive values."""
    v = np.asarray(values, dtype=float)
    if len(v) == 0:
        raise ValueError("corpus is empty")
    if not np.all(np.isfinite(v)):
        return float("inf"), float(np.median(v)), False
    med = float(np.median(v))
    top = float(v.max())
    return top, med, bool(top <= UNIFORMITY_FACTOR * med)


def lambda_threshold(n: int, alpha: float) -> float:
    return (3 * n + 2 * alpha) / n


def _reset_solvers():
    # fresh LP models per suite: warm starts then never depend on earlier work
    kernel_family._SOLVERS.clear()


_FIELD_CACHE: dict = {}


def _cached_field(f: SampledField, alpha, cfg, ladder, eps=None):
    h = hashlib.sha1(f.values.tobytes()).hexdigest()
    key = (h, f.grid, alpha, cfg.m, cfg.R, eps, ladder)
    if key not in _FIELD_CACHE:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", TruncationWarning)
            _FIELD_CACHE[key] = amplitude_field(f, alpha, cfg, ladder, eps)
    return _FIELD_CACHE[key]


def clear_cache():
    _FIELD_CACHE.clear()
    _reset_solvers()


# --------------------------------------------------------------------------
# atom corpus


def atom_corpus(w: Weight, p: float = 0.9, alpha: float = 1.0, count: int = 20,
                seed: int = 0, r_range=(0.125, 8.0)) -> list:
    """Atoms with log-spaced sides in ``r_range`` and shifted centres."""
    rng = np.random.default_rng(seed)
    n = w.n
    q = p * (1 + alpha / n)
    lo, hi = math.log2(r_range[0]), math.log2(r_range[1])
    out = []
    for i in range(count):
        r = 2.0 ** (lo + (hi - lo) * i / max(count - 1, 1))
        # centres on the grid lattice (h = r/16) keep the cube aligned with cells
        shift = np.round(rng.uniform(-3, 3, size=n) * 16) / 16 * r
        cube = Rect.cube(shift, r)
        a = make_atom(cube, w, p, q, 0, seed=seed * 1000 + i)
        if not validate_atom(a):
            raise RuntimeError(f"generated atom {i} failed validation")
        out.append(a)
    return out


# --------------------------------------------------------------------------
# uniform bounds over atoms


def _q_star_mask(grid: Grid, cube: Rect) -> np.ndarray:
    big = cube.scale(2 * math.sqrt(grid.n))
    return grid.cell_mask(big)


def suite_prop32(atoms=None, w: Weight | None = None, p: float = 0.9, alpha: float = 1.0,
                 seed: int = 0, count: int = 20, m: int = 101) -> SuiteReport:
    """``||g_alpha(a)||_{L^p_w}`` uniform over an atom corpus."""
    t0 = time.perf_counter()
    _reset_solvers()
    w = w or Weight.power(0.5)
    n = w.n
    q = p * (1 + alpha / n)
    params = {"w": w.describe(), "p": p, "alpha": alpha, "q": q, "seed": seed, "m": m,
              "count": count}
    if ap_constant(w, q, CubeFamily.over((-4.0,) * n, (4.0,) * n)).flag:
        raise Refusal(f"{w.describe()} is flagged outside A_q at q={q}")
    atoms = atoms if atoms is not None else atom_corpus(w, p, alpha, count, seed)
    if not atoms:
        raise ValueError("atom corpus is empty")
    cfg = AmplitudeSolverConfig(m=m, n=n)
    vals, extras = [], []
    for a in atoms:
        g = a.field.grid
        if not np.any(a.field.values):
            raise ValueError("zero atom in corpus would make the bound vacuous")
        A = _cached_field(a.field, alpha, cfg, default_ladder(g))
        G = g_from_field(A)
        near = _q_star_mask(g, a.cube).ravel()
        W = w.cell_integrals(g).ravel()
        gp = np.abs(G) ** p * W
        vals.append(float(gp.sum() ** (1 / p)))
        extras.append({"near_p": float(gp[near].sum()), "far_p": float(gp[~near].sum())})
    top, med, ok = uniformity(vals)
    cases = []
    for a, v, ex in zip(atoms, vals, extras):
        cases.append(Case(a.describe(), v, UNIFORMITY_FACTOR * med, v,
                          bool(math.isfinite(v) and v <= UNIFORMITY_FACTOR * med), ex))
    summary = {"max": top, "median": med, "max_over_median": top / med if med else None}
    return SuiteReport("prop32", cases, params, summary, time.perf_counter() - t0)


def suite_prop33(atoms=None, w: Weight | None = None, p: float = 0.9, alpha: float = 1.0,
                 lam: float | None = None, seed: int = 0, count: int = 20, m: int = 101,
                 kmax: int = 4) -> SuiteReport:
    """``||g*_{lam,alpha}(a)||_{L^p_w}`` uniform over the corpus, plus the
    aperture growth ratios ``||S_{alpha,2^k} a||_{L^2_w} / ||S_alpha a||_{L^2_w}``."""
    t0 = time.perf_counter()
    _reset_solvers()
    w = w or Weight.power(0.5)
    n = w.n
    q = p * (1 + alpha / n)
    thr = lambda_threshold(n, alpha)
    lam = thr + 0.5 if lam is None else lam
    params = {"w": w.describe(), "p": p, "alpha": alpha, "q": q, "lambda": lam,
              "lambda_threshold": thr, "seed": seed, "m": m, "count": count}
    if not lam > thr:
        raise Refusal(f"lambda={lam} must exceed (3n+2 alpha)/n = {thr}")
    atoms = atoms if atoms is not None else atom_corpus(w, p, alpha, count, seed)
    if not atoms:
        raise ValueError("atom corpus is empty")
    cfg = AmplitudeSolverConfig(m=m, n=n)
    vals, extras = [], []
    for a in atoms:
        g = a.field.grid
        A = _cached_field(a.field, alpha, cfg, default_ladder(g))
        xs = g.points()
        G, tail = gstar_from_field(A, lam, xs, with_tail=True)
        ring = aperture_ring_bound(A, lam, xs)
        ring_ok = bool(np.all(G ** 2 <= ring * (1 + 1e-12) + 1e-300))
        W = w.cell_integrals(g).ravel()
        vals.append(float((np.abs(G) ** p * W).sum() ** (1 / p)))
        base = math.sqrt(float((s_from_field(A, xs, 1.0, warn=False) ** 2 * W).sum()))
        ratios, consts = [], []
        for k in range(0, kmax + 1):
            sk = math.sqrt(float((s_from_field(A, xs, 2.0 ** k, warn=False) ** 2 * W).sum()))
            ratios.append(sk / base if base else 0.0)
            consts.append(ratios[-1] / 2 ** (k * n * q / 2))
        extras.append({"aperture_ratios": ratios, "aperture_constants": consts,
                       "ring_bound_holds": ring_ok, "tail_bound": tail})
    top, med, ok = uniformity(vals)
    cases = []
    for a, v, ex in zip(atoms, vals, extras):
        good = (math.isfinite(v) and v <= UNIFORMITY_FACTOR * med and ex["ring_bound_holds"]
                and abs(ex["aperture_ratios"][0] - 1) < 1e-12)
        cases.append(Case(a.describe(), v, UNIFORMITY_FACTOR * med, v, bool(good), ex))
    summary = {"max": top, "median": med, "max_over_median": top / med if med else None,
               "aperture_constant": max(max(e["aperture_constants"]) for e in extras)}
    return SuiteReport("prop33", cases, params, summary, time.perf_counter() - t0)


# --------------------------------------------------------------------------
# weighted L^2 bound for S_alpha


def suite_theorem_f(weights=None, p: float = 2.0, alpha: float = 1.0, seed: int = 0,
                    count: int = 10, box: float = 8.0, h: float = 0.125, m: int = 101,
                    drift_tol: float = 0.10) -> SuiteReport:
    """``||S_alpha f||_{L^2_w} / ||f||_{L^2_w}`` on a smooth corpus at two resolutions.

    Both resolutions share the ladder ``[2h, box/2]`` of the coarse grid, so the
    drift isolates the spatial quadrature.
    """
    t0 = time.perf_counter()
    _reset_solvers()
    weights = weights or [Weight.power(0.0), Weight.power(0.5), Weight.power(-0.5)]
    params = {"weights": [w.describe() for w in weights], "p": p, "alpha": alpha,
              "seed": seed, "count": count, "box": box, "h": h, "m": m,
              "drift_tol": drift_tol}
    coarse = Grid((-box,), (box,), h)
    fine = coarse.refine()
    ladder = HalfSpaceLadder(2 * h, box / 2)
    cfg = AmplitudeSolverConfig(m=m)
    cases = []
    for w in weights:
        if ap_constant(w, p, CubeFamily.over((-4.0,), (4.0,))).flag:
            raise Refusal(f"{w.describe()} is flagged outside A_p at p={p}")
    for i in range(count):
        fs = [SampledField(gr, random_smooth(gr, seed * 1000 + i)) for gr in (coarse, fine)]
        if not np.any(fs[0].values):
            continue  # zero input: ratio undefined
        Ss = [s_from_field(_cached_field(f, alpha, cfg, ladder)) for f in fs]
        for w in weights:
            r = []
            for f, S in zip(fs, Ss):
                num = weighted_norm_at_nodes(S, f.grid, p, w)
                r.append(num / lp_w_norm(f, p, w))
            drift = abs(r[1] - r[0]) / r[0]
            cases.append(Case({"f": f"random seed={seed * 1000 + i}", "w": w.describe()},
                              r[1], r[0], max(r), bool(np.isfinite(r).all() and
                                                       drift < drift_tol),
                              {"drift": drift, "ratio_coarse": r[0], "ratio_fine": r[1]}))
    summary = {"max_drift": max(c.extra["drift"] for c in cases)}
    for w in weights:
        summary[f"constant[{w.describe()}]"] = max(c.constant for c in cases
                                                   if c.descriptor["w"] == w.describe())
    return SuiteReport("theorem-f", cases, params, summary, time.perf_counter() - t0)


# --------------------------------------------------------------------------
# pointwise chain


def suite_chain17(f: SampledField | None = None, points: int = 50, alpha: float = 1.0,
                  eps: float = 2.0, lam: float = 5.5, seed: int = 0, box: float = 4.0,
                  h: float = 0.0625, m: int = 101, R: float = 8.0,
                  w: Weight | None = None, p: float = 0.9) -> SuiteReport:
    """``S_psi <= L S_alpha <= (L/c) S~ <= (L/c) 2^{lam n/2} g~*`` sample by sample.

    ``c`` is the class-inclusion constant (so ``A_alpha <= A~ / c`` holds for
    the LP optima) and ``2^{lam n/2}`` comes from the cone factor of ``g*``.
    """
    t0 = time.perf_counter()
    _reset_solvers()
    w = w or Weight.power(0.5)
    grid = Grid((-box,), (box,), h) if f is None else f.grid
    f = f if f is not None else SampledField(grid, random_smooth(grid, seed, spread=box / 4))
    n = grid.n
    params = {"alpha": alpha, "eps": eps, "lambda": lam, "seed": seed, "points": points,
              "m": m, "R": R, "grid": grid.describe(), "w": w.describe(), "p": p}
    if not eps > alpha:
        raise Refusal(f"eps={eps} must exceed alpha={alpha}")
    ladder = default_ladder(grid)
    cfg = AmplitudeSolverConfig(m=m, R=R, n=n)
    psi = admissible_psi(alpha, n, m)
    c = inclusion_constant(alpha, eps, m, R, n)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TruncationWarning)
        Ap = kernel_field(f, psi.kernel, ladder)
    A = _cached_field(f, alpha, cfg, ladder)
    At = _cached_field(f, alpha, cfg, ladder, eps)
    rng = np.random.default_rng(seed)
    idx = np.sort(rng.choice(grid.size, size=min(points, grid.size), replace=False))
    xs = grid.points()[idx]
    s_psi = s_from_field(Ap, xs, warn=False)
    s_a = s_from_field(A, xs, warn=False)
    s_t = s_from_field(At, xs, warn=False)
    g_t = gstar_from_field(At, lam, xs)
    k3 = 2 ** (lam * n / 2)
    rt = 1e-6
    cases = []
    for i, x in enumerate(xs):
        l1 = s_psi[i] <= psi.L * s_a[i] * (1 + rt) + 1e-15
        l2 = s_a[i] <= s_t[i] / c * (1 + rt) + 1e-15
        l3 = s_t[i] <= k3 * g_t[i] * (1 + rt) + 1e-15
        ratio = lambda a, b: float(a / b) if b > 0 else 0.0
        cases.append(Case({"x": x.tolist()}, float(s_psi[i]), float(psi.L * s_a[i]),
                          ratio(s_a[i], s_t[i]), bool(l1 and l2 and l3),
                          {"s_psi": float(s_psi[i]), "s_alpha": float(s_a[i]),
                           "s_tilde": float(s_t[i]), "g_tilde_star": float(g_t[i]),
                           "psi_over_s_alpha": ratio(s_psi[i], s_a[i]),
                           "tilde_over_gstar": ratio(s_t[i], g_t[i]),
                           "links": [bool(l1), bool(l2), bool(l3)]}))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TruncationWarning)
        gt_all = gstar_from_field(At, lam)
    norm_g = weighted_norm_at_nodes(gt_all, grid, p, w)
    norm_h = hp_w_norm(f, p, w) if np.any(f.values) else 0.0
    summary = {"L": psi.L, "inclusion_constant": c, "C_middle": 1 / c,
               "C_last_theory": k3,
               "measured_middle": max((cs.constant for cs in cases), default=0.0),
               "measured_last": max((cs.extra["tilde_over_gstar"] for cs in cases),
                                    default=0.0),
               "gstar_over_hp_norm": norm_g / norm_h if norm_h else 0.0,
               "tilde_tail_bound": At.meta.get("tail_bound")}
    return SuiteReport("chain17", cases, params, summary, time.perf_counter() - t0)


# --------------------------------------------------------------------------
# decomposition round trip


def decomposition_corpus(w: Weight, grid: Grid, p: float = 0.9, count: int = 10,
                         seed: int = 0) -> list:
    """Atoms of side 1/2, 1 or 2 with centres on the dyadic lattice near the origin."""
    rng = np.random.default_rng(seed)
    out = []
    for i in range(count):
        side = [0.5, 1.0, 2.0][i % 3]
        center = np.round(rng.uniform(-2, 2, size=grid.n) * 4) / 4
        cube = Rect.cube(center, side)
        out.append(make_atom(cube, w, p, p * 2, 0, seed=seed * 1000 + i, grid=grid))
    return out


def suite_decomposition(corpus=None, w: Weight | None = None, p: float = 0.9, seed: int = 0,
                        count: int = 10, box: float = 8.0, h: float = 1 / 32,
                        q: float = 2.0, err_tol: float = 0.1,
                        fine_err_tol: float = 0.05) -> SuiteReport:
    """Vanishing check, decomposition, reconstruction and coefficient bound per input."""
    t0 = time.perf_counter()
    w = w or Weight.power(0.5)
    grid = Grid((-box,) * w.n, (box,) * w.n, h)
    params = {"w": w.describe(), "p": p, "q": q, "seed": seed, "count": count,
              "grid": grid.describe(), "err_tol": err_tol, "fine_err_tol": fine_err_tol}
    corpus = corpus if corpus is not None else [a.field for a in
                                                decomposition_corpus(w, grid, p, count, seed)]
    psi = admissible_psi(1.0, w.n)
    cases = []
    for i, f in enumerate(corpus):
        van = vanishes_weakly_check(f)
        desc = {"index": i, "seed": seed * 1000 + i}
        if not van.passed:
            cases.append(Case(desc, van.ratio, van.tol, math.inf, False,
                              {"vanishing": van.to_dict()}))
            continue
        d = atomic_decompose(f, w, p, psi)
        rec = reconstruct(d)
        err = relative_l2_error(f, rec) if np.any(f.values) else 0.0
        cal_gap = float(np.abs(rec.values - d.calderon.values).max()
                        / max(np.abs(d.calderon.values).max(), 1e-300))
        partition = d.assigned_samples + d.zero_samples == d.total_samples
        supp_ok, mean_worst, norm_consts = True, 0.0, []
        for e in d.entries:
            big = e.cube.rect.scale(5.0)
            outside = ~d.padded.cell_mask(big)
            if np.any(e.atom.values[outside] != 0):
                supp_ok = False
            mean_worst = max(mean_worst, abs(e.atom.integral()) / e.atom.l1())
            norm_consts.append(lp_w_norm(e.atom, q, w)
                               / w.integral(e.cube.rect) ** (1 / q - 1 / p))
        const = d.coefficient_constant
        ok = (err <= err_tol and partition and supp_ok and mean_worst <= 1e-8
              and cal_gap <= 1e-12)
        cases.append(Case(desc, d.sum_lambda_p, d.s_psi_norm ** p, const, bool(ok),
                          {"reconstruction_error": err, "calderon_gap": cal_gap,
                           "partition_exact": partition, "support_in_5Q": supp_ok,
                           "worst_mean_over_l1": mean_worst, "atoms": len(d.entries),
                           "atom_norm_constant": max(norm_consts, default=0.0),
                           "k_range": list(d.k_range), "vanishing_ratio": van.ratio}))
    consts = [c.constant for c in cases if math.isfinite(c.constant)]
    top, med, uni = uniformity(consts) if consts else (0.0, 0.0, True)
    for c in cases:
        if c.constant > UNIFORMITY_FACTOR * med:
            c.passed = False
    summary = {"max_constant": top, "median_constant": med, "uniform": uni,
               "atom_norm_constant": max((c.extra.get("atom_norm_constant", 0.0)
                                          for c in cases), default=0.0)}
    if corpus:
        f0 = corpus[0]
        if np.any(f0.values):
            fg = f0.grid.refine()
            f2 = SampledField(fg, f0.evaluate(fg.points()))
            e2 = relative_l2_error(f2, reconstruct(atomic_decompose(f2, w, p, psi)))
            summary["fine_error"] = e2
            if e2 > fine_err_tol:
                cases[0].passed = False
    return SuiteReport("decomposition", cases, params, summary, time.perf_counter() - t0)


SUITES = {
    "prop32": suite_prop32,
    "prop33": suite_prop33,
    "theorem-f": suite_theorem_f,
    "chain17": suite_chain17,
    "decomposition": suite_decomposition,
}


def run_suite(name: str, seed: int = 0, **kwargs) -> SuiteReport:
    if name not in SUITES:
        raise KeyError(f"unknown suite {name!r}; choose from {sorted(SUITES)}")
    return SUITES[name](seed=seed, **kwargs)
