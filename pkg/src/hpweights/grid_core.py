"""Uniform grids, sampled fields, dyadic cubes and the upper half-space ladder.

Every operator in the package is a midpoint (Riemann) quadrature on a
cell-centred uniform grid.  A grid over the box ``[lo, hi]`` with spacing
``h`` has ``N = (hi - lo) / h`` cells per axis; node ``i`` sits at the
centre ``lo + (i + 1/2) h`` of cell ``[lo + i h, lo + (i + 1) h)``.
Scales ``t`` of the half-space ``R^n x (0, inf)`` are sampled on a
log-uniform ladder, so ``dt / t`` becomes the constant ``ln(rho)``.
"""

from __future__ import annotations

import csv
import itertools
import math
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "Refusal",
    "TruncationWarning",
    "DegenerateConeWarning",
    "Grid",
    "SampledField",
    "Rect",
    "DyadicCube",
    "Tent",
    "HalfSpaceLadder",
    "default_ladder",
    "convolve_at",
    "convolve_batch",
    "kernel_sample_matrix",
    "cone_integral",
    "cone_integrals",
    "dyadic_family",
    "dyadic_generation_of_scale",
    "tent_labels",
    "read_field_csv",
    "write_field_csv",
    "fmt",
]

MIN_KERNEL_NODES = 9


class Refusal(ValueError):
    """An operation declined to run; the message carries the diagnostic."""


class TruncationWarning(UserWarning):
    """Part of a quadrature stencil fell outside the field's box."""


class DegenerateConeWarning(UserWarning):
    """A cone integral saw no grid samples at any ladder level."""


def fmt(x: float) -> str:
    """Format a float with 17 significant digits (round-trip exact)."""
    return format(float(x), ".17g")


# --------------------------------------------------------------------------
# grids and fields


@dataclass(frozen=True)
class Grid:
    lo: tuple
    hi: tuple
    h: float

    def __post_init__(self):
        lo = tuple(float(v) for v in np.atleast_1d(self.lo))
        hi = tuple(float(v) for v in np.atleast_1d(self.hi))
        if len(lo) != len(hi) or len(lo) not in (1, 2):
            raise ValueError("grid dimension must be 1 or 2")
        if not self.h > 0:
            raise ValueError("grid spacing must be positive")
        for a, b in zip(lo, hi):
            cells = (b - a) / self.h
            if b <= a or abs(cells - round(cells)) > 1e-9 * max(1.0, cells):
                raise ValueError(
                    f"box length {b - a} is not an integer multiple of h={self.h}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        object.__setattr__(self, "h", float(self.h))

    @classmethod
    def from_cells(cls, lo, cells, h) -> "Grid":
        lo = tuple(float(v) for v in np.atleast_1d(lo))
        cells = tuple(int(c) for c in np.broadcast_to(cells, (len(lo),)))
        return cls(lo, tuple(a + c * h for a, c in zip(lo, cells)), h)

    @property
    def n(self) -> int:
        return len(self.lo)

    @property
    def shape(self) -> tuple:
        return tuple(int(round((b - a) / self.h)) for a, b in zip(self.lo, self.hi))

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def cell_volume(self) -> float:
        return self.h ** self.n

    @property
    def side(self) -> float:
        """Side of the dyadic base cube anchored at ``lo``."""
        return max(b - a for a, b in zip(self.lo, self.hi))

    @property
    def diameter(self) -> float:
        return math.sqrt(sum((b - a) ** 2 for a, b in zip(self.lo, self.hi)))

    def axis(self, d: int) -> np.ndarray:
        return self.lo[d] + (np.arange(self.shape[d]) + 0.5) * self.h

    def axes(self) -> list:
        return [self.axis(d) for d in range(self.n)]

    def points(self) -> np.ndarray:
        """Node coordinates, shape ``(size, n)``, row-major order."""
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def refine(self, factor: int = 2) -> "Grid":
        return Grid(self.lo, self.hi, self.h / factor)

    def contains_rect(self, rect: "Rect", tol: float = 1e-12) -> bool:
        scale = max(1.0, self.side)
        return all(rl >= bl - tol * scale and rh <= bh + tol * scale
                   for rl, rh, bl, bh in zip(rect.lo, rect.hi, self.lo, self.hi))

    def cell_mask(self, rect: "Rect") -> np.ndarray:
        """Cells whose centres lie in the half-open rectangle."""
        masks = [(ax >= lo) & (ax < hi) for ax, lo, hi in zip(self.axes(), rect.lo, rect.hi)]
        out = masks[0]
        for m in masks[1:]:
            out = out[:, None] & m[None, :]
        return out

    def index_range(self, rect: "Rect") -> list:
        """Per-axis ``slice`` of the cells whose centres lie in ``rect``."""
        out = []
        for d in range(self.n):
            ax = self.axis(d)
            i0 = int(np.searchsorted(ax, rect.lo[d], side="left"))
            i1 = int(np.searchsorted(ax, rect.hi[d], side="left"))
            out.append(slice(i0, i1))
        return out

    def describe(self) -> dict:
        return {"lo": list(self.lo), "hi": list(self.hi), "h": self.h}


@dataclass
class SampledField:
    """Real values on the nodes of a grid, read as zero outside the box.

    ``exact`` optionally maps points ``(..., n)`` to closed-form values; when
    present, off-node evaluation uses it everywhere instead of interpolation
    and zero extension.
    """

    grid: Grid
    values: np.ndarray
    tag: dict | None = None
    exact: object = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.size == self.grid.size and vals.shape != self.grid.shape:
            vals = vals.reshape(self.grid.shape)
        if vals.shape != self.grid.shape:
            raise ValueError(f"values shape {vals.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("sampled field has non-finite values")
        self.values = vals

    def __mul__(self, c):
        ex = self.exact
        exact = None if ex is None else (lambda pts: c * ex(pts))
        return SampledField(self.grid, self.values * c, exact=exact)

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def __add__(self, other: "SampledField"):
        if other.grid != self.grid:
            raise ValueError("fields live on different grids")
        a, b = self.exact, other.exact
        exact = None if a is None or b is None else (lambda pts: a(pts) + b(pts))
        return SampledField(self.grid, self.values + other.values, exact=exact)

    def __sub__(self, other: "SampledField"):
        return self + (-other)

    def l1(self) -> float:
        return float(np.abs(self.values).sum() * self.grid.cell_volume)

    def l2(self) -> float:
        return float(np.sqrt((self.values ** 2).sum() * self.grid.cell_volume))

    def sup(self) -> float:
        return float(np.abs(self.values).max())

    def integral(self) -> float:
        return float(self.values.sum() * self.grid.cell_volume)

    def evaluate(self, pts) -> np.ndarray:
        """Piecewise-(bi)linear interpolation between node values.

        Inside the box but beyond the outermost nodes the nearest node value
        is used; outside the box the field is zero.  ``pts`` has trailing
        dimension ``n`` (or is a plain array when ``n == 1``).
        """
        g = self.grid
        pts = np.asarray(pts, dtype=float)
        if self.exact is not None:
            flat = pts.reshape(-1, g.n)
            shape = pts.shape[:-1] if (pts.ndim > 1 and pts.shape[-1] == g.n) else pts.shape
            return np.asarray(self.exact(flat), dtype=float).reshape(shape)
        if g.n == 1:
            x = pts[..., 0] if (pts.ndim > 1 and pts.shape[-1] == 1) else pts
            ax = g.axis(0)
            out = np.interp(x, ax, self.values)
            out[(x < g.lo[0]) | (x > g.hi[0])] = 0.0
            return out
        out_shape = pts.shape[:-1]
        p = pts.reshape(-1, 2)
        inside = np.ones(len(p), dtype=bool)
        idx, frac = [], []
        for d in range(2):
            u = (p[:, d] - g.lo[d]) / g.h - 0.5
            inside &= (p[:, d] >= g.lo[d]) & (p[:, d] <= g.hi[d])
            nd = g.shape[d]
            u = np.clip(u, 0.0, nd - 1)
            i0 = np.minimum(np.floor(u).astype(int), max(nd - 2, 0))
            idx.append(i0)
            frac.append(u - i0 if nd > 1 else np.zeros_like(u))
        v = self.values
        i, j = idx
        i1 = np.minimum(i + 1, g.shape[0] - 1)
        j1 = np.minimum(j + 1, g.shape[1] - 1)
        fx, fy = frac
        val = ((1 - fx) * (1 - fy) * v[i, j] + fx * (1 - fy) * v[i1, j]
               + (1 - fx) * fy * v[i, j1] + fx * fy * v[i1, j1])
        val[~inside] = 0.0
        return val.reshape(out_shape)


# --------------------------------------------------------------------------
# cubes


@dataclass(frozen=True)
class Rect:
    """Axis-parallel box ``[lo, hi)``; cubes are the equal-sided case."""

    lo: tuple
    hi: tuple

    def __post_init__(self):
        object.__setattr__(self, "lo", tuple(float(v) for v in np.atleast_1d(self.lo)))
        object.__setattr__(self, "hi", tuple(float(v) for v in np.atleast_1d(self.hi)))

    @classmethod
    def cube(cls, center, side) -> "Rect":
        c = np.atleast_1d(np.asarray(center, dtype=float))
        return cls(tuple(c - side / 2), tuple(c + side / 2))

    @property
    def n(self) -> int:
        return len(self.lo)

    @property
    def center(self) -> tuple:
        return tuple((a + b) / 2 for a, b in zip(self.lo, self.hi))

    @property
    def side(self) -> float:
        return max(b - a for a, b in zip(self.lo, self.hi))

    @property
    def volume(self) -> float:
        return float(np.prod([b - a for a, b in zip(self.lo, self.hi)]))

    def scale(self, lam: float) -> "Rect":
        c = np.array(self.center)
        half = np.array([b - a for a, b in zip(self.lo, self.hi)]) * lam / 2
        return Rect(tuple(c - half), tuple(c + half))

    def shift(self, offset) -> "Rect":
        off = np.broadcast_to(np.asarray(offset, dtype=float), (self.n,))
        return Rect(tuple(np.array(self.lo) + off), tuple(np.array(self.hi) + off))

    def contains(self, pts) -> np.ndarray:
        pts = np.asarray(pts, dtype=float).reshape(-1, self.n)
        out = np.ones(len(pts), dtype=bool)
        for d in range(self.n):
            out &= (pts[:, d] >= self.lo[d]) & (pts[:, d] < self.hi[d])
        return out

    def contains_closed(self, pts, tol: float = 1e-12) -> np.ndarray:
        pts = np.asarray(pts, dtype=float).reshape(-1, self.n)
        pad = tol * max(1.0, self.side)
        out = np.ones(len(pts), dtype=bool)
        for d in range(self.n):
            out &= (pts[:, d] >= self.lo[d] - pad) & (pts[:, d] <= self.hi[d] + pad)
        return out

    def within(self, other: "Rect", tol: float = 1e-12) -> bool:
        pad = tol * max(1.0, other.side)
        return all(a >= c - pad and b <= d + pad
                   for a, b, c, d in zip(self.lo, self.hi, other.lo, other.hi))

    def describe(self) -> dict:
        return {"center": list(self.center), "side": self.side}


def as_rect(E) -> Rect:
    if isinstance(E, Rect):
        return E
    if isinstance(E, DyadicCube):
        return E.rect
    lo, hi = E
    return Rect(lo, hi)


@dataclass(frozen=True)
class DyadicCube:
    """Dyadic cube of generation ``k`` relative to a base cube.

    Side ``base_side * 2**-k``; ``corner`` holds the integer coordinates of
    the lower corner in units of the side, counted from ``base_lo``.
    """

    k: int
    corner: tuple
    base_lo: tuple
    base_side: float

    @property
    def n(self) -> int:
        return len(self.corner)

    @property
    def side(self) -> float:
        return math.ldexp(self.base_side, -self.k)

    @property
    def volume(self) -> float:
        return self.side ** self.n

    @property
    def rect(self) -> Rect:
        s = self.side
        lo = tuple(b + c * s for b, c in zip(self.base_lo, self.corner))
        return Rect(lo, tuple(v + s for v in lo))

    @property
    def center(self) -> tuple:
        return self.rect.center

    def children(self) -> list:
        return [DyadicCube(self.k + 1, tuple(2 * c + o for c, o in zip(self.corner, offs)),
                           self.base_lo, self.base_side)
                for offs in itertools.product((0, 1), repeat=self.n)]

    def parent(self) -> "DyadicCube":
        return DyadicCube(self.k - 1, tuple(c // 2 for c in self.corner),
                          self.base_lo, self.base_side)

    def ancestor(self, k: int) -> "DyadicCube":
        if k > self.k:
            raise ValueError("ancestor generation must not be finer")
        shift = self.k - k
        return DyadicCube(k, tuple(c >> shift for c in self.corner), self.base_lo, self.base_side)

    def scale(self, lam: float) -> Rect:
        return self.rect.scale(lam)

    def tent(self) -> "Tent":
        return Tent(self)


@dataclass(frozen=True)
class Tent:
    """``{(y, t): y in Q, side(Q) < t <= 2 side(Q)}``."""

    cube: DyadicCube

    def contains(self, y, t) -> np.ndarray:
        ell = self.cube.side
        t = np.asarray(t, dtype=float)
        return self.cube.rect.contains(y) & (t > ell) & (t <= 2 * ell)


def dyadic_family(grid: Grid, k_min: int, k_max: int) -> list:
    """All dyadic cubes of generations ``k_min..k_max`` meeting the box."""
    if k_min > k_max:
        raise ValueError("k_min must not exceed k_max")
    base = grid.side
    if math.ldexp(base, -k_max) < grid.h * (1 - 1e-12):
        raise Refusal(f"generation {k_max} (side {math.ldexp(base, -k_max)}) "
                      f"is finer than the grid spacing {grid.h}")
    out = []
    for k in range(k_min, k_max + 1):
        s = math.ldexp(base, -k)
        counts = [max(1, math.ceil((b - a) / s - 1e-9)) for a, b in zip(grid.lo, grid.hi)]
        for corner in itertools.product(*[range(c) for c in counts]):
            out.append(DyadicCube(k, tuple(corner), grid.lo, base))
    return out


def dyadic_generation_of_scale(t, base_side: float) -> np.ndarray:
    """Generation ``k`` with ``side_k < t <= 2 side_k``, ``side_k = base 2^-k``."""
    u = np.log2(base_side / np.asarray(t, dtype=float))
    snapped = np.where(np.abs(u - np.round(u)) < 1e-9, np.round(u), u)
    return (np.floor(snapped) + 1).astype(int)


# --------------------------------------------------------------------------
# half-space ladder


@dataclass(frozen=True)
class HalfSpaceLadder:
    t_min: float
    t_max: float
    rho: float = 2 ** 0.25

    def __post_init__(self):
        if not (self.t_min > 0 and self.t_max > self.t_min and self.rho > 1):
            raise ValueError("ladder needs 0 < t_min < t_max and rho > 1")

    @property
    def levels(self) -> np.ndarray:
        count = int(math.floor(math.log(self.t_max / self.t_min) / math.log(self.rho) + 1e-9)) + 1
        return self.t_min * self.rho ** np.arange(count)

    @property
    def log_step(self) -> float:
        return math.log(self.rho)

    def refine(self) -> "HalfSpaceLadder":
        """Ladder with twice as many levels per octave over the same range."""
        return HalfSpaceLadder(self.t_min, self.t_max, math.sqrt(self.rho))

    def describe(self) -> dict:
        return {"t_min": self.t_min, "t_max": self.t_max, "rho": self.rho,
                "levels": len(self.levels)}


def default_ladder(grid: Grid, t_max: float | None = None) -> HalfSpaceLadder:
    """rho = 2^(1/4), t_min = 2h, t_max = half the box diameter."""
    return HalfSpaceLadder(2 * grid.h, t_max if t_max is not None else grid.diameter / 2,
                           2 ** 0.25)


def tent_labels(grid: Grid, ladder: HalfSpaceLadder) -> tuple:
    """Generation and dyadic corner of the tent holding each sample.

    Returns ``(gen, corners)`` with ``gen`` of shape ``(J,)`` and ``corners``
    of shape ``(J, *grid.shape, n)``: sample ``(y_i, t_j)`` lies in the tent
    of the dyadic cube of generation ``gen[j]`` with corner ``corners[j, i]``.
    """
    base = grid.side
    gen = dyadic_generation_of_scale(ladder.levels, base)
    sides = np.ldexp(base, -gen)
    if np.any(sides < grid.h * (1 - 1e-12)):
        raise Refusal("ladder reaches scales whose tents are finer than the grid")
    pts = grid.points()
    rel = (pts - np.array(grid.lo)) / sides[:, None, None]
    corners = np.floor(rel + 1e-12).astype(np.int64)
    return gen, corners.reshape((len(gen),) + grid.shape + (grid.n,))


# --------------------------------------------------------------------------
# convolution f * phi_t and cone integrals


def _check_kernel(kernel):
    across = int(np.count_nonzero(np.abs(kernel.axis) <= 1.0 + 1e-12))
    if across < MIN_KERNEL_NODES:
        raise Refusal(f"kernel grid too coarse: {across} nodes across the unit support, "
                      f"need at least {MIN_KERNEL_NODES}")


def kernel_sample_matrix(f: SampledField, kernel, t: float, ys) -> tuple:
    """Values ``f(y - t z_i)`` at the kernel nodes for every ``y`` in ``ys``.

    Returns ``(samples, truncated)`` where ``samples`` has shape
    ``(len(ys), m)`` and ``truncated`` flags rows whose stencil left the box.
    """
    if not t > 0:
        raise ValueError("scale t must be positive")
    ys = np.asarray(ys, dtype=float).reshape(-1, f.grid.n)
    z = kernel.nodes                                      # (m, n)
    pts = ys[:, None, :] - t * z[None, :, :]
    samples = f.evaluate(pts)
    g = f.grid
    live = np.abs(kernel.values.ravel()) > 0
    outside = np.zeros(pts.shape[:2], dtype=bool)
    for d in range(g.n):
        outside |= (pts[..., d] < g.lo[d]) | (pts[..., d] > g.hi[d])
    truncated = (outside & live[None, :]).any(axis=1)
    if f.exact is not None:
        truncated[:] = False
    return samples, truncated


def convolve_batch(f: SampledField, kernel, t: float, ys) -> tuple:
    """``f * phi_t (y)`` for many ``y`` at one scale; returns (values, truncated)."""
    _check_kernel(kernel)
    samples, truncated = kernel_sample_matrix(f, kernel, t, ys)
    return samples @ (kernel.values.ravel() * kernel.cell_volume), truncated


def convolve_at(f: SampledField, kernel, t: float, y, report: bool = False):
    """``f * phi_t (y) = int f(y - t z) phi(z) dz`` by midpoint quadrature.

    The quadrature runs over the kernel's own nodes with ``f`` interpolated
    at ``y - t z``.  With ``report=True`` a ``(value, truncated)`` pair is
    returned, ``truncated`` telling whether the stencil left ``f``'s box.
    """
    vals, trunc = convolve_batch(f, kernel, t, np.atleast_1d(np.asarray(y, dtype=float)))
    if report:
        return float(vals[0]), bool(trunc[0])
    if trunc[0]:
        warnings.warn("convolution stencil left the field's box; outside read as 0",
                      TruncationWarning, stacklevel=2)
    return float(vals[0])


def _window_sums_1d(F_level: np.ndarray, ys: np.ndarray, xs: np.ndarray, radius: float,
                    h: float) -> np.ndarray:
    csum = np.concatenate([[0.0], np.cumsum(F_level)])
    tol = 1e-9 * h
    lo = np.searchsorted(ys, xs - radius + tol, side="left")
    hi = np.searchsorted(ys, xs + radius - tol, side="right")
    return csum[hi] - csum[np.maximum(lo, 0)]


def cone_integrals(F: np.ndarray, grid: Grid, ladder: HalfSpaceLadder, xs,
                   beta: float = 1.0, warn: bool = True) -> np.ndarray:
    """``iint_{|x - y| < beta t} F(y, t) dy dt / t^{n+1}`` for every ``x`` in ``xs``.

    ``F`` holds samples of shape ``(J, *grid.shape)`` on the grid nodes and
    ladder levels.  The sum runs level by level, left to right.
    """
    if not beta > 0:
        raise ValueError("aperture beta must be positive")
    F = np.asarray(F, dtype=float)
    ts = ladder.levels
    if F.shape != (len(ts),) + grid.shape:
        raise ValueError(f"samples shape {F.shape} does not match ladder x grid")
    if not np.all(np.isfinite(F)):
        raise ValueError("cone integrand must be finite")
    xs = np.asarray(xs, dtype=float).reshape(-1, grid.n)
    out = np.zeros(len(xs))
    hit = np.zeros(len(xs), dtype=bool)
    w = grid.cell_volume * ladder.log_step
    if grid.n == 1:
        ys = grid.axis(0)
        for j, t in enumerate(ts):
            s = _window_sums_1d(F[j], ys, xs[:, 0], beta * t, grid.h)
            cnt = _window_sums_1d(np.ones_like(ys), ys, xs[:, 0], beta * t, grid.h)
            hit |= cnt > 0
            out += s * (w / t ** grid.n)
    else:
        pts = grid.points()
        for chunk in range(0, len(xs), 256):
            xc = xs[chunk:chunk + 256]
            dist = np.sqrt(((xc[:, None, :] - pts[None, :, :]) ** 2).sum(-1))
            for j, t in enumerate(ts):
                inside = dist < beta * t - 1e-9 * grid.h
                hit[chunk:chunk + 256] |= inside.any(axis=1)
                out[chunk:chunk + 256] += (inside @ F[j].ravel()) * (w / t ** grid.n)
    if warn and not hit.all():
        warnings.warn(f"{int((~hit).sum())} cone(s) met no grid samples at any level",
                      DegenerateConeWarning, stacklevel=2)
    return out


def cone_integral(F: np.ndarray, grid: Grid, ladder: HalfSpaceLadder, x,
                  beta: float = 1.0) -> float:
    """Single-point version of :func:`cone_integrals`."""
    return float(cone_integrals(F, grid, ladder, np.atleast_1d(np.asarray(x, dtype=float)),
                                beta)[0])


# --------------------------------------------------------------------------
# CSV


def write_field_csv(f: SampledField, path) -> None:
    names = ["x", "value"] if f.grid.n == 1 else ["x", "y", "value"]
    pts = f.grid.points()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(names)
        for p, v in zip(pts, f.values.ravel()):
            w.writerow([fmt(c) for c in p] + [fmt(v)])


def _uniform_axis(coords: Sequence[float], rows: Sequence[int], rtol: float = 1e-9):
    coords = np.asarray(coords, dtype=float)
    if len(coords) < 2:
        raise ValueError("need at least two nodes per axis")
    steps = np.diff(coords)
    h = steps[0]
    if h <= 0:
        raise ValueError(f"non-increasing coordinate at row {rows[1]}")
    bad = np.nonzero(np.abs(steps - h) > rtol * max(abs(h), 1.0))[0]
    if len(bad):
        raise ValueError(f"non-uniform grid at row {rows[bad[0] + 1]}")
    return h


def read_field_csv(path) -> SampledField:
    """Read ``x,value`` or ``x,y,value`` rows (row-major) into a field.

    Node coordinates are read as cell centres; the box is recovered by
    extending half a cell beyond the outermost nodes.
    """
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header = [c.strip() for c in rows[0]]
    body = rows[1:]
    if header == ["x", "value"]:
        data = np.array([[float(c) for c in r] for r in body])
        h = _uniform_axis(data[:, 0], list(range(2, len(body) + 2)))
        grid = Grid.from_cells(data[0, 0] - h / 2, len(body), h)
        return SampledField(grid, data[:, 1])
    if header == ["x", "y", "value"]:
        data = np.array([[float(c) for c in r] for r in body])
        ys = data[:, 1]
        ny = int(np.argmax(ys[1:] <= ys[:-1]) + 1) if np.any(ys[1:] <= ys[:-1]) else len(ys)
        if len(body) % ny:
            raise ValueError(f"ragged 2-d grid at row {len(body) - len(body) % ny + 2}")
        nx = len(body) // ny
        hy = _uniform_axis(ys[:ny], list(range(2, ny + 2)))
        for i in range(nx):
            block = data[i * ny:(i + 1) * ny]
            if not np.allclose(block[:, 1], ys[:ny], rtol=1e-9, atol=1e-12):
                first = int(np.argmax(~np.isclose(block[:, 1], ys[:ny], rtol=1e-9, atol=1e-12)))
                raise ValueError(f"non-uniform grid at row {i * ny + first + 2}")
            if not np.allclose(block[:, 0], block[0, 0], rtol=1e-9, atol=1e-12):
                raise ValueError(f"non-uniform grid at row {i * ny + 2}")
        hx = _uniform_axis(data[::ny, 0], [i * ny + 2 for i in range(nx)])
        if abs(hx - hy) > 1e-9 * max(hx, 1.0):
            raise ValueError("grid spacing differs between axes")
        grid = Grid.from_cells((data[0, 0] - hx / 2, data[0, 1] - hx / 2), (nx, ny), hx)
        return SampledField(grid, data[:, 2].reshape(nx, ny))
    raise ValueError(f"unrecognised CSV header {header!r}")


def iter_rects(cubes: Iterable) -> Iterable:
    for c in cubes:
        yield as_rect(c)
