"""Muckenhoupt weights: A_p quantities, critical index, weighted measures and norms.

A :class:`Weight` is either the closed form ``|x - c|^a`` (``a > -n``) or a
strictly positive sampled field read as piecewise constant on grid cells.
Closed forms are integrated exactly over rectangles (1-d antiderivatives,
polar integration around the singularity in 2-d), which keeps quantities
such as ``w(E)`` and ``[w]_{A_p}`` free of grid error.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np
from scipy import integrate

from .grid_core import Grid, Rect, SampledField, as_rect, dyadic_family

__all__ = [
    "InvalidWeight",
    "Weight",
    "CubeFamily",
    "ApReport",
    "weighted_measure",
    "ap_quantity",
    "a1_quantity",
    "ap_constant",
    "critical_index",
    "doubling_ratio",
    "reverse_doubling_constant",
    "tail_integral",
    "tail_ratio_spread",
    "subset_lower_bound",
    "majority_subset_ratio",
    "lp_w_norm",
    "weighted_maximal",
]


class InvalidWeight(ValueError):
    pass


# --------------------------------------------------------------------------
# closed-form integrals of |x|^b


def _log_onesided(A, B, b):
    """log of int_A^B s^b ds for 0 <= A < B (vectorised); -inf when empty."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    out = np.full(np.broadcast(A, B).shape, -np.inf)
    live = B > A
    e = b + 1.0
    with np.errstate(divide="ignore", invalid="ignore"):
        if abs(e) < 1e-14:
            val = np.log(np.log(B / A))
            val = np.where(A > 0, val, np.inf)
        elif e > 0:
            ratio = np.where(B > 0, A / np.where(B > 0, B, 1.0), 0.0)
            val = e * np.log(B) + np.log1p(-ratio ** e) - math.log(e)
        else:
            ratio = B / np.where(A > 0, A, 1.0)
            val = e * np.log(np.where(A > 0, A, 1.0)) + np.log(-np.expm1(e * np.log(ratio))) \
                - math.log(-e)
            val = np.where(A > 0, val, np.inf)
    out = np.where(live, val, out)
    return out


def _log_power_integral_1d(u, v, b):
    """log of int_u^v |x|^b dx, vectorised over interval endpoints."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    neg = _log_onesided(np.clip(-v, 0, None), np.clip(-u, 0, None), b)
    pos = _log_onesided(np.clip(u, 0, None), np.clip(v, 0, None), b)
    return np.logaddexp(neg, pos)


def _corner_integral_2d(A, B, b):
    """int_0^A int_0^B |x|^b dy dx for b > -2 (polar coordinates)."""
    if A <= 0 or B <= 0:
        return 0.0
    e = b + 2.0
    th = math.atan2(B, A)
    f1 = integrate.quad(lambda s: (A / math.cos(s)) ** e, 0.0, th, limit=200)[0]
    f2 = integrate.quad(lambda s: (B / math.sin(s)) ** e, th, math.pi / 2, limit=200)[0]
    return (f1 + f2) / e


_GL_X, _GL_W = np.polynomial.legendre.leggauss(12)


def _smooth_rect_integral_2d(x0, x1, y0, y1, b, depth=0):
    dist = math.hypot(max(x0, 0.0, -x1), max(y0, 0.0, -y1))
    size = max(x1 - x0, y1 - y0)
    if dist < size and depth < 8:
        xm, ym = (x0 + x1) / 2, (y0 + y1) / 2
        return sum(_smooth_rect_integral_2d(a, c, d, e, b, depth + 1)
                   for a, c in ((x0, xm), (xm, x1)) for d, e in ((y0, ym), (ym, y1)))
    xs = (x1 - x0) / 2 * _GL_X + (x1 + x0) / 2
    ys = (y1 - y0) / 2 * _GL_X + (y1 + y0) / 2
    r = np.hypot(xs[:, None], ys[None, :])
    return float((_GL_W[:, None] * _GL_W[None, :] * r ** b).sum() * (x1 - x0) * (y1 - y0) / 4)


def _power_integral_2d(lo, hi, b):
    x0, y0 = lo
    x1, y1 = hi
    contains = x0 <= 0 <= x1 and y0 <= 0 <= y1
    if b <= -2 and contains:
        return math.inf
    if contains:
        return sum(_corner_integral_2d(a, c, b) for a in (-x0, x1) for c in (-y0, y1))
    return _smooth_rect_integral_2d(x0, x1, y0, y1, b)


# --------------------------------------------------------------------------
# weights


class Weight:
    """A strictly positive weight ``w`` with cached rectangle integrals.

    Build with :meth:`power` for ``|x - c|^a`` or :meth:`sampled` for a
    positive field.  ``w(E)`` for a rectangle is :meth:`integral`.
    """

    def __init__(self, kind, n, a=None, center=None, field_=None, spec=None):
        self.kind = kind
        self.n = n
        self.a = a
        self.center = tuple(center) if center is not None else (0.0,) * n
        self.field = field_
        self.spec = spec
        self._cache = {}
        self._cell_cache = {}

    @classmethod
    def power(cls, a: float, n: int = 1, center=None) -> "Weight":
        if not a > -n:
            raise InvalidWeight(f"|x|^{a} is not locally integrable in dimension {n} (need a > -n)")
        c = (0.0,) * n if center is None else tuple(np.atleast_1d(center).astype(float))
        return cls("power", n, a=float(a), center=c, spec=f"power:{a:g}")

    @classmethod
    def sampled(cls, f: SampledField, spec: str | None = None) -> "Weight":
        if not np.all(f.values > 0):
            raise InvalidWeight("sampled weight must be strictly positive at every node")
        return cls("sampled", f.grid.n, field_=f, spec=spec or "sampled")

    @classmethod
    def from_spec(cls, spec: str, n: int = 1) -> "Weight":
        """``power:<a>`` or ``csv:<path>``."""
        kind, _, arg = spec.partition(":")
        if kind == "power":
            try:
                a = float(arg)
            except ValueError:
                raise InvalidWeight(f"bad power exponent in {spec!r}") from None
            w = cls.power(a, n)
            w.spec = spec
            return w
        if kind == "csv":
            from .grid_core import read_field_csv
            return cls.sampled(read_field_csv(arg), spec=spec)
        raise InvalidWeight(f"unknown weight spec {spec!r}")

    def __repr__(self):
        return f"Weight({self.spec})"

    # -- geometry ---------------------------------------------------------
    @property
    def box(self) -> Rect | None:
        if self.kind == "sampled":
            g = self.field.grid
            return Rect(g.lo, g.hi)
        return None

    def translate(self, x0) -> "Weight":
        """The weight ``x -> w(x + x0)``."""
        x0 = np.atleast_1d(np.asarray(x0, dtype=float))
        if self.kind == "power":
            w = Weight.power(self.a, self.n, center=np.array(self.center) - x0)
            w.spec = f"{self.spec}@{list(w.center)}"
            return w
        g = self.field.grid
        ng = Grid(tuple(np.array(g.lo) - x0), tuple(np.array(g.hi) - x0), g.h)
        return Weight.sampled(SampledField(ng, self.field.values), spec=f"{self.spec}@shift")

    def _check_inside(self, rect: Rect):
        box = self.box
        if box is not None and not rect.within(box):
            raise ValueError(f"set {rect.lo}..{rect.hi} leaves the weight's box")

    # -- integrals --------------------------------------------------------
    def log_integral(self, E, exponent: float = 1.0) -> float:
        """``log int_E w^exponent`` over a rectangle (``inf`` if divergent)."""
        rect = as_rect(E)
        key = (rect.lo, rect.hi, float(exponent))
        if key in self._cache:
            return self._cache[key]
        self._check_inside(rect)
        if self.kind == "power":
            b = self.a * exponent
            lo = np.array(rect.lo) - self.center
            hi = np.array(rect.hi) - self.center
            if self.n == 1:
                val = float(_log_power_integral_1d(lo[0], hi[0], b))
            else:
                val = _power_integral_2d(lo, hi, b)
                val = math.log(val) if val > 0 else -math.inf
        else:
            g = self.field.grid
            overlaps = []
            for d in range(g.n):
                edges = g.lo[d] + np.arange(g.shape[d] + 1) * g.h
                ov = np.clip(np.minimum(edges[1:], rect.hi[d]) - np.maximum(edges[:-1], rect.lo[d]),
                             0, None)
                overlaps.append(ov)
            logv = exponent * np.log(self.field.values)
            mask = overlaps[0] if g.n == 1 else overlaps[0][:, None] * overlaps[1][None, :]
            live = mask > 0
            if not live.any():
                val = -math.inf
            else:
                terms = logv[live] + np.log(mask[live])
                top = terms.max()
                val = float(top + math.log(np.exp(terms - top).sum()))
        self._cache[key] = val
        return val

    def integral(self, E, exponent: float = 1.0) -> float:
        return float(math.exp(self.log_integral(E, exponent)))

    def cell_integrals(self, grid: Grid) -> np.ndarray:
        """``int_cell w`` for every cell of ``grid`` (array of ``grid.shape``)."""
        if grid in self._cell_cache:
            return self._cell_cache[grid]
        if self.kind == "sampled":
            if grid != self.field.grid:
                raise ValueError("sampled weight evaluated on a foreign grid")
            out = self.field.values * grid.cell_volume
        elif self.n == 1:
            edges = grid.lo[0] + np.arange(grid.shape[0] + 1) * grid.h - self.center[0]
            out = np.exp(_log_power_integral_1d(edges[:-1], edges[1:], self.a))
        else:
            xs, ys = grid.axes()
            X, Y = np.meshgrid(xs - self.center[0], ys - self.center[1], indexing="ij")
            h = grid.h
            acc = np.zeros(grid.shape)
            for wx, gx in zip(_GL_W, _GL_X):
                for wy, gy in zip(_GL_W, _GL_X):
                    acc += wx * wy * np.hypot(X + gx * h / 2, Y + gy * h / 2) ** self.a
            out = acc * h * h / 4
            near = np.nonzero((np.abs(X) <= 2 * h) & (np.abs(Y) <= 2 * h))
            for i, j in zip(*near):
                lo = (X[i, j] - h / 2, Y[i, j] - h / 2)
                hi = (X[i, j] + h / 2, Y[i, j] + h / 2)
                out[i, j] = _power_integral_2d(lo, hi, self.a)
        self._cell_cache[grid] = out
        return out

    def node_values(self, grid: Grid) -> np.ndarray:
        """``w`` at the nodes; the cell holding the singularity gets its exact mean."""
        if self.kind == "sampled":
            return self.cell_integrals(grid) / grid.cell_volume
        pts = grid.points() - np.array(self.center)
        r = np.sqrt((pts ** 2).sum(axis=1)).reshape(grid.shape)
        with np.errstate(divide="ignore"):
            vals = r ** self.a
        cells = self.cell_integrals(grid) / grid.cell_volume
        singular = np.ones(grid.shape, dtype=bool)
        for d, ax in enumerate(grid.axes()):
            m = np.abs(ax - self.center[d]) <= grid.h / 2 + 1e-12 * grid.h
            singular = singular & (m if grid.n == 1 else (m[:, None] if d == 0 else m[None, :]))
        vals[singular] = cells[singular]
        return vals

    def ess_inf(self, E, grid: Grid | None = None) -> float:
        """Infimum of ``w`` on ``E``: exact for power weights, node minimum otherwise."""
        rect = as_rect(E)
        if self.kind == "power":
            lo = np.array(rect.lo) - self.center
            hi = np.array(rect.hi) - self.center
            near = np.where((lo <= 0) & (hi >= 0), 0.0, np.minimum(np.abs(lo), np.abs(hi)))
            far = np.maximum(np.abs(lo), np.abs(hi))
            r = math.sqrt((near ** 2).sum()) if self.a >= 0 else math.sqrt((far ** 2).sum())
            if r == 0:
                return 0.0 if self.a > 0 else (1.0 if self.a == 0 else math.inf)
            return r ** self.a
        g = self.field.grid if grid is None else grid
        mask = g.cell_mask(rect)
        if not mask.any():
            raise ValueError("set contains no grid nodes")
        return float(self.node_values(g)[mask].min())

    def describe(self) -> str:
        return self.spec


def weighted_measure(w: Weight, E, grid: Grid | None = None) -> float:
    """``w(E)`` for a rectangle or a disjoint union (iterable) of rectangles."""
    rects = [as_rect(E)] if isinstance(E, (Rect, tuple)) or hasattr(E, "rect") else \
        [as_rect(e) for e in E]
    total = 0.0
    for r in rects:
        if grid is not None and not grid.contains_rect(r):
            raise ValueError(f"set {r.lo}..{r.hi} is outside the grid box")
        total += w.integral(r)
    return total


def _log_ap(w: Weight, p: float, Q) -> float:
    rect = as_rect(Q)
    vol = math.log(rect.volume)
    la = w.log_integral(rect, 1.0) - vol
    lb = w.log_integral(rect, -1.0 / (p - 1.0)) - vol
    return la + (p - 1.0) * lb


def ap_quantity(w: Weight, p: float, Q) -> float:
    """``(avg_Q w)(avg_Q w^{-1/(p-1)})^{p-1}``; ``p <= 1`` gives the A_1 quotient."""
    if p <= 1:
        return a1_quantity(w, Q)
    if w.kind == "sampled" and not np.all(w.field.values > 0):
        raise InvalidWeight("non-positive weight sample")
    val = _log_ap(w, p, Q)
    return math.inf if val == math.inf else math.exp(val)


def a1_quantity(w: Weight, Q, grid: Grid | None = None) -> float:
    """``avg_Q w / essinf_Q w``."""
    rect = as_rect(Q)
    lo = w.ess_inf(rect, grid)
    if lo <= 0:
        return math.inf
    return w.integral(rect) / rect.volume / lo


# --------------------------------------------------------------------------
# cube families and the A_p constant


@dataclass(frozen=True)
class CubeFamily:
    """Dyadic cubes of generations ``k_min..k_max`` over ``box`` plus copies
    shifted by half a side (along every non-empty subset of axes) that stay
    inside the box."""

    box: Rect
    k_min: int = 0
    k_max: int = 8
    shifted: bool = True

    @classmethod
    def over(cls, lo, hi, k_min=0, k_max=8, shifted=True) -> "CubeFamily":
        return cls(Rect(lo, hi), k_min, k_max, shifted)

    @classmethod
    def for_grid(cls, grid: Grid, k_min: int = 0, k_max: int | None = None,
                 shifted: bool = True) -> "CubeFamily":
        if k_max is None:
            k_max = int(math.floor(math.log2(grid.side / grid.h) + 1e-9))
        return cls(Rect(grid.lo, grid.hi), k_min, k_max, shifted)

    def cubes(self) -> list:
        """List of ``(generation, rect)``."""
        box = self.box
        base = box.side
        out = []
        for k in range(self.k_min, self.k_max + 1):
            s = math.ldexp(base, -k)
            counts = [max(1, int(round((b - a) / s))) for a, b in zip(box.lo, box.hi)]
            shifts = [(0.0,) * box.n]
            if self.shifted:
                shifts += [tuple(s / 2 * m for m in mask)
                           for mask in np.ndindex(*(2,) * box.n) if any(mask)]
            for sh in shifts:
                for corner in np.ndindex(*counts):
                    lo = tuple(box.lo[d] + corner[d] * s + sh[d] for d in range(box.n))
                    r = Rect(lo, tuple(v + s for v in lo))
                    if r.within(box):
                        out.append((k, r))
        return out

    def describe(self) -> dict:
        return {"box": [list(self.box.lo), list(self.box.hi)], "k_min": self.k_min,
                "k_max": self.k_max, "shifted": self.shifted}


@dataclass
class ApReport:
    p: float
    family: dict
    per_cube: list
    sup: float
    per_generation_max: list
    flag: bool
    growth_threshold: float = 0.05

    def to_dict(self) -> dict:
        return {"p": self.p, "sup": self.sup, "per_generation_max": self.per_generation_max,
                "flag": self.flag, "family": self.family,
                "growth_threshold": self.growth_threshold}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _growth_flag(gen_max: list, threshold: float) -> bool:
    if any(not math.isfinite(v) for v in gen_max):
        return True
    if len(gen_max) < 3:
        return False
    a, b, c = gen_max[-3:]
    return b > (1 + threshold) * a and c > (1 + threshold) * b


def ap_constant(w: Weight, p: float, family: CubeFamily,
                growth_threshold: float = 0.05) -> ApReport:
    """Supremum of the A_p quantity over a cube family.

    ``flag`` means "not in A_p up to this resolution": some cube gave an
    infinite quantity, or the per-generation maxima grew by more than
    ``growth_threshold`` into each of the two finest generations.
    """
    cubes = family.cubes()
    if not cubes:
        raise ValueError("cube family is empty")
    per_cube, gens = [], {}
    for k, rect in cubes:
        v = ap_quantity(w, p, rect) if p > 1 else a1_quantity(w, rect)
        per_cube.append(v)
        gens[k] = max(gens.get(k, -math.inf), v)
    gen_max = [gens[k] for k in sorted(gens)]
    return ApReport(p=p, family=family.describe(), per_cube=per_cube, sup=max(per_cube),
                    per_generation_max=gen_max, flag=_growth_flag(gen_max, growth_threshold),
                    growth_threshold=growth_threshold)


@dataclass
class CriticalIndex:
    value: float
    lower_bound_only: bool
    tol: float
    evaluations: list = field(default_factory=list)

    def __float__(self):
        return self.value

    def describe(self) -> str:
        return f">= {self.value:g}" if self.lower_bound_only else f"{self.value:.6g}"


def critical_index(w: Weight, tol: float = 0.05, family: CubeFamily | None = None,
                   q_max: float = 16.0) -> CriticalIndex:
    """Bisection for ``inf {q > 1: flag false at q}``.

    Returns the smallest passing ``q`` found, within ``tol`` above the
    threshold; if even ``q_max`` fails the result is a lower bound.
    """
    if not 0 < tol < 0.5:
        raise ValueError("tol must lie in (0, 0.5)")
    if family is None:
        family = CubeFamily.over((-4.0,) * w.n, (4.0,) * w.n, 0, 8)
    evals = []

    def passes(q):
        ok = not ap_constant(w, q, family).flag
        evals.append((q, ok))
        return ok

    if not passes(q_max):
        return CriticalIndex(q_max, True, tol, evals)
    lo, hi = 1.0, q_max
    while hi - lo > tol:
        mid = (lo + hi) / 2
        if passes(mid):
            hi = mid
        else:
            lo = mid
    return CriticalIndex(hi, False, tol, evals)


# --------------------------------------------------------------------------
# doubling, tails, subsets


@dataclass
class DoublingResult:
    ratio: float
    bound: float | None
    ok: bool | None
    truncated: bool


def doubling_ratio(w: Weight, Q, lam: float, report: ApReport | None = None,
                   box: Rect | None = None) -> DoublingResult:
    """``w(lam Q) / w(Q)`` and, given an A_p report, the check
    ``ratio <= [w]_{A_p} lam^{np}``."""
    if not lam > 1:
        raise ValueError("lambda must exceed 1")
    rect = as_rect(Q)
    big = rect.scale(lam)
    limit = box if box is not None else w.box
    if limit is not None and not big.within(limit):
        import warnings
        warnings.warn("lambda Q leaves the box; doubling check skipped", UserWarning,
                      stacklevel=2)
        return DoublingResult(math.nan, None, None, True)
    ratio = w.integral(big) / w.integral(rect)
    if report is None:
        return DoublingResult(ratio, None, None, False)
    bound = report.sup * lam ** (w.n * report.p)
    return DoublingResult(ratio, bound, ratio <= bound * (1 + 1e-6), False)


def reverse_doubling_constant(w: Weight, family: CubeFamily) -> float:
    """``min w(2Q) / w(Q)`` over family cubes whose double stays in the box."""
    best = math.inf
    for _, rect in family.cubes():
        big = rect.scale(2.0)
        if not big.within(family.box):
            continue
        best = min(best, w.integral(big) / w.integral(rect))
    return best


@dataclass
class TailReport:
    r: float
    q: float
    value: float
    bound: float
    ratio: float
    truncated: bool
    value_untruncated: float | None = None


def tail_integral(w: Weight, r: float, q: float, grid: Grid) -> TailReport:
    """``int_{|x| >= r} w(x) |x|^{-nq} dx`` over the box vs ``r^{-nq} w(Q(0, 2r))``.

    ``Q(0, 2r)`` is the cube centred at the origin with side ``2r``.
    """
    if q <= 1:
        raise ValueError("q must exceed 1")
    if not r > 0:
        raise ValueError("r must be positive")
    n = grid.n
    bound = r ** (-n * q) * w.integral(Rect.cube((0.0,) * n, 2 * r))
    untrunc = None
    if w.kind == "power" and n == 1 and w.center == (0.0,):
        b = w.a - q
        lo, hi = grid.lo[0], grid.hi[0]
        right = math.exp(_log_onesided(r, hi, b)) if hi > r else 0.0
        left = math.exp(_log_onesided(r, -lo, b)) if -lo > r else 0.0
        value = left + right
        truncated = bool(hi < math.inf)
        if b < -1:
            untrunc = 2 * r ** (b + 1) / (-(b + 1))
    else:
        pts = grid.points()
        rad = np.sqrt((pts ** 2).sum(axis=1))
        W = w.cell_integrals(grid).ravel()
        sel = rad >= r
        value = float((W[sel] / rad[sel] ** (n * q)).sum())
        truncated = True
    return TailReport(r, q, value, bound, value / bound, truncated, untrunc)


def tail_ratio_spread(w: Weight, q: float, grid: Grid, rs=(0.5, 1.0, 2.0, 4.0)) -> tuple:
    """(max/min of value/bound over ``rs``, reports)."""
    reps = [tail_integral(w, r, q, grid) for r in rs]
    ratios = [t.ratio for t in reps]
    return max(ratios) / min(ratios), reps


@dataclass
class SubsetCheck:
    ratio: float
    bound: float
    ok: bool


def subset_lower_bound(w: Weight, Q, E_mask: np.ndarray, p: float, ap_sup: float,
                       grid: Grid) -> SubsetCheck:
    """Check ``w(E)/w(Q) >= [w]_{A_p}^{-1} (|E|/|Q|)^p`` for a union of cells ``E``."""
    rect = as_rect(Q)
    inside = grid.cell_mask(rect)
    if np.any(E_mask & ~inside):
        raise ValueError("E must be a union of cells inside Q")
    W = w.cell_integrals(grid)
    wE = float(W[E_mask].sum())
    wQ = float(W[inside].sum())
    frac = E_mask.sum() / inside.sum()
    bound = frac ** p / ap_sup
    ratio = wE / wQ
    return SubsetCheck(ratio, bound, ratio >= bound * (1 - 1e-6))


def majority_subset_ratio(w: Weight, grid: Grid, draws: int = 200, seed: int = 0,
                     frac: float = 0.5, k_range=(1, None)) -> float:
    """Measured ``min w(E)/w(Q)`` over random dyadic ``Q`` and unions of cells
    ``E`` with ``|E| > frac |Q|``."""
    rng = np.random.default_rng(seed)
    k_hi = k_range[1] if k_range[1] is not None else \
        int(math.floor(math.log2(grid.side / grid.h))) - 1
    cubes = [c for c in dyadic_family(grid, k_range[0], k_hi)]
    W = w.cell_integrals(grid)
    best = math.inf
    for _ in range(draws):
        Q = cubes[rng.integers(len(cubes))]
        sl = grid.index_range(Q.rect)
        block = W[tuple(sl)].ravel()
        m = len(block)
        need = int(math.floor(frac * m)) + 1
        take = rng.choice(m, size=min(m, need + rng.integers(0, max(1, m - need + 1))),
                          replace=False)
        best = min(best, block[take].sum() / block.sum())
    return float(best)


# --------------------------------------------------------------------------
# weighted norms and maximal operator


def lp_w_norm(f: SampledField, p: float, w: Weight) -> float:
    """``(int |f|^p w)^{1/p}`` with exact cell integrals of ``w``."""
    if not p > 0:
        raise ValueError("p must be positive")
    W = w.cell_integrals(f.grid)
    return float(((np.abs(f.values) ** p) * W).sum() ** (1.0 / p))


def weighted_maximal(f: SampledField, w: Weight, family: CubeFamily | None = None) -> SampledField:
    """``M_w f(x) = sup_{Q ∋ x} w(Q)^{-1} int_Q |f| w`` over a cube family."""
    g = f.grid
    if family is None:
        family = CubeFamily.for_grid(g)
    W = w.cell_integrals(g)
    num = np.abs(f.values) * W
    out = np.zeros(g.shape)
    for _, rect in family.cubes():
        sl = tuple(g.index_range(rect))
        den = W[sl].sum()
        if den <= 0:
            continue
        np.maximum(out[sl], num[sl].sum() / den, out=out[sl])
    return SampledField(g, out)


def iter_family(family: CubeFamily) -> Iterable:
    yield from family.cubes()
