"""Square functions as cone and ladder quadratures over amplitude fields.

An :class:`AmplitudeField` holds ``A(y_i, t_j) >= 0`` on every grid node and
ladder level.  All square functions of one comparison are evaluated from the
same field, so pointwise inequalities between them hold sample by sample.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .grid_core import (Grid, HalfSpaceLadder, SampledField, TruncationWarning, cone_integrals,
                        convolve_batch, default_ladder)
from .kernel_family import AmplitudeSolverConfig, get_solver, kernel_dictionary

__all__ = [
    "AmplitudeField",
    "amplitude_field",
    "kernel_field",
    "s_from_field",
    "g_from_field",
    "gstar_from_field",
    "aperture_ring_bound",
    "s_alpha",
    "g_alpha",
    "g_star",
    "s_psi",
    "s_tilde",
    "g_tilde_star",
    "t_max_sensitivity",
    "weighted_norm_at_nodes",
    "GSTAR_CUTOFF",
]

GSTAR_CUTOFF = 2.0 ** 6


@dataclass
class AmplitudeField:
    grid: Grid
    ladder: HalfSpaceLadder
    values: np.ndarray
    provenance: str
    truncated: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (len(self.ladder.levels),) + self.grid.shape:
            raise ValueError("amplitude values do not match ladder x grid")
        if np.any(self.values < 0) or not np.all(np.isfinite(self.values)):
            raise ValueError("amplitudes must be finite and non-negative")

    @property
    def energy(self) -> np.ndarray:
        return self.values ** 2

    def scaled(self, c: float) -> "AmplitudeField":
        return AmplitudeField(self.grid, self.ladder, abs(c) * self.values, self.provenance,
                              self.truncated, dict(self.meta))

    def rows(self):
        """``(y..., t, value)`` tuples for CSV dumps."""
        pts = self.grid.points()
        for j, t in enumerate(self.ladder.levels):
            for p, v in zip(pts, self.values[j].ravel()):
                yield (*p, t, v)


def amplitude_field(f: SampledField, alpha: float, cfg: AmplitudeSolverConfig | None = None,
                    ladder: HalfSpaceLadder | None = None, eps: float | None = None
                    ) -> AmplitudeField:
    """LP amplitudes at every node and level (decaying class when ``eps`` is given)."""
    cfg = cfg or AmplitudeSolverConfig(n=f.grid.n)
    g = f.grid
    ladder = ladder or default_ladder(g)
    ts = ladder.levels
    ys = g.points()
    out = np.zeros((len(ts),) + g.shape)
    trunc = np.zeros((len(ts),) + g.shape, dtype=bool)
    method = "lp"
    if g.n == 2 and cfg.m > cfg.m_lp_max_2d:
        method = "dictionary lower bound"
        kernels = kernel_dictionary(alpha, cfg, eps)
        for j, t in enumerate(ts):
            best = np.zeros(len(ys))
            for k in kernels:
                v, tr = convolve_batch(f, k, t, ys)
                best = np.maximum(best, np.abs(v))
            out[j] = best.reshape(g.shape)
            trunc[j] = tr.reshape(g.shape)
    else:
        lp = get_solver(alpha, cfg.m, g.n, eps, cfg.R, cfg.tol)
        for j, t in enumerate(ts):
            v, tr = lp.amplitudes(f, t, ys)
            out[j] = v.reshape(g.shape)
            trunc[j] = tr.reshape(g.shape)
    prov = f"intrinsic alpha={alpha}" if eps is None else f"tilde alpha={alpha} eps={eps}"
    meta = {"alpha": alpha, "eps": eps, "method": method, **cfg.describe()}
    if eps is not None:
        from .kernel_family import tail_bound
        meta["tail_bound"] = tail_bound(f, eps, cfg.R)
    return AmplitudeField(g, ladder, out, prov, trunc, meta)


def kernel_field(f: SampledField, kernel, ladder: HalfSpaceLadder | None = None,
                 scale: float = 1.0) -> AmplitudeField:
    """``|f * (scale psi)_t(y)|`` for a fixed kernel on its own node grid."""
    g = f.grid
    ladder = ladder or default_ladder(g)
    ys = g.points()
    out = np.zeros((len(ladder.levels),) + g.shape)
    trunc = np.zeros_like(out, dtype=bool)
    for j, t in enumerate(ladder.levels):
        v, tr = convolve_batch(f, kernel, t, ys)
        out[j] = np.abs(scale * v).reshape(g.shape)
        trunc[j] = tr.reshape(g.shape)
    return AmplitudeField(g, ladder, out, "fixed kernel", trunc, {"scale": scale})


# --------------------------------------------------------------------------
# square functions from a field


def _node_points(grid: Grid, xs):
    if xs is None:
        return grid.points()
    return np.asarray(xs, dtype=float).reshape(-1, grid.n)


def s_from_field(A: AmplitudeField, xs=None, beta: float = 1.0, warn: bool = True) -> np.ndarray:
    """Cone square function of aperture ``beta`` at ``xs`` (default: all nodes)."""
    xs = _node_points(A.grid, xs)
    return np.sqrt(cone_integrals(A.energy, A.grid, A.ladder, xs, beta, warn))


def _node_index(grid: Grid, xs) -> np.ndarray:
    idx = []
    for d in range(grid.n):
        u = (xs[:, d] - grid.lo[d]) / grid.h - 0.5
        i = np.rint(u).astype(int)
        if np.any(np.abs(u - i) > 1e-6) or np.any((i < 0) | (i >= grid.shape[d])):
            raise ValueError("zero-aperture evaluation needs grid nodes")
        idx.append(i)
    return np.ravel_multi_index(idx, grid.shape)


def g_from_field(A: AmplitudeField, xs=None) -> np.ndarray:
    """``(sum_j A(x, t_j)^2 ln rho)^{1/2}`` at grid nodes."""
    xs = _node_points(A.grid, xs)
    flat = A.energy.reshape(len(A.ladder.levels), -1)
    idx = _node_index(A.grid, xs)
    return np.sqrt(flat[:, idx].sum(axis=0) * A.ladder.log_step)


def _distances(grid: Grid, xs):
    pts = grid.points()
    return np.sqrt(((xs[:, None, :] - pts[None, :, :]) ** 2).sum(-1))


def gstar_from_field(A: AmplitudeField, lam: float, xs=None, cutoff: float = GSTAR_CUTOFF,
                     with_tail: bool = False):
    """``(sum (t/(t+|x-y|))^{lam n} A^2 h^n ln rho / t^n)^{1/2}`` over ``|x-y| < cutoff t``.

    With ``with_tail`` also returns the bound ``(1+cutoff)^{-lam n}`` times the
    total sampled energy for the dropped region.
    """
    if not lam > 0:
        raise ValueError("lambda must be positive")
    g = A.grid
    xs = _node_points(g, xs)
    n = g.n
    dist = _distances(g, xs)
    w = g.cell_volume * A.ladder.log_step
    out = np.zeros(len(xs))
    total = 0.0
    for j, t in enumerate(A.ladder.levels):
        e = A.energy[j].ravel()
        keep = dist < cutoff * t - 1e-9 * g.h
        fac = np.where(keep, (t / (t + dist)) ** (lam * n), 0.0)
        out += (fac @ e) * (w / t ** n)
        total += e.sum() * (w / t ** n)
    val = np.sqrt(out)
    if with_tail:
        return val, (1 + cutoff) ** (-lam * n) * total
    return val


def aperture_ring_bound(A: AmplitudeField, lam: float, xs=None, kmax: int = 6) -> np.ndarray:
    """``S^2 + 2^{lam n} sum_{k=1..kmax} 2^{-k lam n} S_{2^k}^2``, which dominates
    the truncated ``g*^2`` term by term (ring ``2^{k-1} t <= |x-y| < 2^k t``)."""
    g = A.grid
    xs = _node_points(g, xs)
    ln = lam * g.n
    out = s_from_field(A, xs, 1.0, warn=False) ** 2
    for k in range(1, kmax + 1):
        out = out + 2.0 ** ln * 2.0 ** (-k * ln) * s_from_field(A, xs, 2.0 ** k, warn=False) ** 2
    return out


# --------------------------------------------------------------------------
# per-point operators (build a field unless one is supplied)


def _field(f, alpha, cfg, ladder, eps, A):
    if A is not None:
        return A
    return amplitude_field(f, alpha, cfg, ladder, eps)


def s_alpha(f: SampledField, x, beta: float = 1.0, alpha: float = 1.0, cfg=None, ladder=None,
            A: AmplitudeField | None = None) -> np.ndarray:
    """Intrinsic square function of aperture ``beta`` at the points ``x``."""
    if not beta > 0:
        raise ValueError("aperture beta must be positive")
    return s_from_field(_field(f, alpha, cfg, ladder, None, A), np.atleast_1d(x), beta)


def s_tilde(f: SampledField, x, alpha: float, eps: float, beta: float = 1.0, cfg=None,
            ladder=None, A: AmplitudeField | None = None) -> np.ndarray:
    return s_from_field(_field(f, alpha, cfg, ladder, eps, A), np.atleast_1d(x), beta)


def g_alpha(f: SampledField, x, alpha: float = 1.0, cfg=None, ladder=None,
            A: AmplitudeField | None = None) -> np.ndarray:
    """Zero-aperture version at grid nodes ``x``."""
    return g_from_field(_field(f, alpha, cfg, ladder, None, A), np.atleast_1d(x))


def g_star(f: SampledField, x, lam: float, alpha: float = 1.0, cfg=None, ladder=None,
           eps: float | None = None, A: AmplitudeField | None = None) -> np.ndarray:
    """Infinite-aperture version; ``eps`` selects the decaying kernel class."""
    return gstar_from_field(_field(f, alpha, cfg, ladder, eps, A), lam, np.atleast_1d(x))


def g_tilde_star(f, x, lam, alpha, eps, cfg=None, ladder=None, A=None):
    return g_star(f, x, lam, alpha, cfg, ladder, eps, A)


def s_psi(f: SampledField, x, psi, ladder=None, A: AmplitudeField | None = None) -> np.ndarray:
    """Area integral of ``f`` for an admissible ``psi`` (its stored kernel)."""
    if A is None:
        kernel = getattr(psi, "kernel", psi)
        A = kernel_field(f, kernel, ladder)
    return s_from_field(A, np.atleast_1d(x), 1.0)


def t_max_sensitivity(f: SampledField, alpha: float = 1.0, cfg=None,
                      ladder: HalfSpaceLadder | None = None, xs=None) -> float:
    """Relative change of ``g_alpha`` at ``xs`` when ``t_max`` doubles."""
    g = f.grid
    ladder = ladder or default_ladder(g)
    wide = HalfSpaceLadder(ladder.t_min, 2 * ladder.t_max, ladder.rho)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TruncationWarning)
        a = g_from_field(amplitude_field(f, alpha, cfg, ladder), xs)
        b = g_from_field(amplitude_field(f, alpha, cfg, wide), xs)
    denom = max(float(np.abs(a).max()), 1e-300)
    return float(np.abs(b - a).max() / denom)


def weighted_norm_at_nodes(values: np.ndarray, grid: Grid, p: float, w) -> float:
    """``(sum |v_i|^p w(cell_i))^{1/p}`` for values sampled at the nodes."""
    W = w.cell_integrals(grid)
    return float(((np.abs(values).reshape(grid.shape) ** p) * W).sum() ** (1.0 / p))
