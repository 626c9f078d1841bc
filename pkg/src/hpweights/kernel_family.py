"""Hölder kernel classes, their validators and the amplitude linear programs.

A kernel is sampled on the nodes ``z_i = -R + i*delta`` (per axis) with
``delta = 2 / (m - 1)``; the unit-support class uses ``R = 1`` and the
decaying class ``C_(alpha, eps)`` a truncation radius ``R >= 1``.  The
amplitude

    A(f)(y, t) = sup_phi |sum_i f(y - t z_i) phi_i delta^n|

is a linear program over the node values; the feasible set is symmetric, so
the maximum of the linear objective is the supremum of its modulus.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import highspy
import numpy as np
import scipy.sparse as sp

from .grid_core import SampledField, TruncationWarning, kernel_sample_matrix, _check_kernel

__all__ = [
    "TestKernel",
    "AmplitudeSolverConfig",
    "Validation",
    "KernelLP",
    "LPSolveError",
    "kernel_axis",
    "validate_c_alpha",
    "validate_c_alpha_eps",
    "inclusion_constant",
    "holder_constant",
    "lip_norm",
    "intrinsic_amplitude",
    "tilde_amplitude",
    "random_feasible_kernel",
    "kernel_dictionary",
    "get_solver",
]

HOLDER_SLACK = 1e-12


class LPSolveError(RuntimeError):
    pass


def kernel_axis(m: int, R: float = 1.0) -> np.ndarray:
    """Nodes ``-R + i*delta`` with ``delta = 2/(m-1)``; ``R/delta`` must be an integer."""
    if m < 3 or m % 2 == 0:
        raise ValueError("kernel node count m must be odd and at least 3")
    delta = 2.0 / (m - 1)
    half = R / delta
    if abs(half - round(half)) > 1e-9:
        raise ValueError(f"R={R} is not a multiple of the node spacing {delta}")
    k = int(round(half))
    return np.arange(-k, k + 1) * delta


@dataclass
class TestKernel:
    """Node values of a candidate kernel on a square node grid."""

    __test__ = False  # not a pytest class

    axis: np.ndarray
    values: np.ndarray
    alpha: float
    eps: float | None = None
    n: int = 1

    def __post_init__(self):
        self.axis = np.asarray(self.axis, dtype=float)
        vals = np.asarray(self.values, dtype=float)
        shape = (len(self.axis),) * self.n
        self.values = vals.reshape(shape)

    @classmethod
    def zeros(cls, m: int, alpha: float, n: int = 1, eps=None, R: float = 1.0):
        ax = kernel_axis(m, R)
        return cls(ax, np.zeros((len(ax),) * n), alpha, eps, n)

    @classmethod
    def from_function(cls, fn, m: int, alpha: float, n: int = 1, eps=None, R: float = 1.0):
        ax = kernel_axis(m, R)
        k = cls(ax, np.zeros((len(ax),) * n), alpha, eps, n)
        k.values = np.asarray(fn(k.nodes), dtype=float).reshape(k.values.shape)
        return k

    @property
    def spacing(self) -> float:
        return float(self.axis[1] - self.axis[0])

    @property
    def cell_volume(self) -> float:
        return self.spacing ** self.n

    @property
    def radius(self) -> float:
        return float(self.axis[-1])

    @property
    def nodes(self) -> np.ndarray:
        mesh = np.meshgrid(*([self.axis] * self.n), indexing="ij")
        return np.stack([g.ravel() for g in mesh], axis=-1)

    @property
    def norms(self) -> np.ndarray:
        return np.sqrt((self.nodes ** 2).sum(axis=1))

    def mean(self) -> float:
        return float(self.values.sum() * self.cell_volume)

    def l1(self) -> float:
        return float(np.abs(self.values).sum() * self.cell_volume)

    def __neg__(self):
        return TestKernel(self.axis, -self.values, self.alpha, self.eps, self.n)

    def scaled(self, c: float) -> "TestKernel":
        return TestKernel(self.axis, c * self.values, self.alpha, self.eps, self.n)

    def embed(self, axis: np.ndarray) -> "TestKernel":
        """Same kernel on a larger aligned node axis, zero on the new nodes."""
        off = np.rint((self.axis[0] - axis[0]) / self.spacing).astype(int)
        if abs(axis[off] - self.axis[0]) > 1e-9 or off + len(self.axis) > len(axis):
            raise ValueError("target axis is not aligned with the kernel's nodes")
        out = np.zeros((len(axis),) * self.n)
        sl = tuple(slice(off, off + len(self.axis)) for _ in range(self.n))
        out[sl] = self.values
        return TestKernel(axis, out, self.alpha, self.eps, self.n)


@dataclass
class AmplitudeSolverConfig:
    """LP settings; ``m`` counts nodes per axis over ``[-1, 1]``."""

    m: int = 201
    tol: float = 1e-6
    oracle_count: int = 1000
    R: float = 8.0
    n: int = 1
    m_lp_max_2d: int = 33
    dictionary_size: int = 64

    def __post_init__(self):
        if self.m < 21 or self.m % 2 == 0:
            raise ValueError("m must be odd and at least 21")
        if self.R < 1:
            raise ValueError("truncation radius R must be at least 1")

    def describe(self) -> dict:
        return {"m": self.m, "tol": self.tol, "R": self.R, "n": self.n}


@dataclass
class Validation:
    ok: bool
    reason: str = ""
    worst: float = 0.0

    def __bool__(self):
        return self.ok


# --------------------------------------------------------------------------
# validators


def _decay(r, n, eps):
    return (1.0 + r) ** (-n - eps)


def _pair_blocks(M, chunk=2048):
    for a in range(0, M, chunk):
        yield a, min(M, a + chunk)


def _pairwise_worst(vals, nodes, alpha, weight=None):
    """max over pairs of ``|v_i - v_j| - cap_ij`` and the pair attaining it."""
    M = len(vals)
    worst, where = -math.inf, None
    for a, b in _pair_blocks(M):
        dist = np.sqrt(((nodes[a:b, None, :] - nodes[None, :, :]) ** 2).sum(-1))
        cap = dist ** alpha
        if weight is not None:
            cap = cap * (weight[a:b, None] + weight[None, :])
        gap = np.abs(vals[a:b, None] - vals[None, :]) - cap
        k = int(np.argmax(gap))
        if gap.flat[k] > worst:
            worst = float(gap.flat[k])
            where = (a + k // M, k % M)
    return worst, where


def validate_c_alpha(phi: TestKernel, alpha: float | None = None,
                     mean_tol: float = 1e-10) -> Validation:
    """Membership of the node values in the unit-support Hölder class.

    Checks support in the closed unit ball, ``sum phi_i delta^n = 0``, the
    all-pairs Hölder bound and ``|phi_i| <= (1 - |z_i|)^alpha``.
    """
    alpha = phi.alpha if alpha is None else alpha
    v = phi.values.ravel()
    r = phi.norms
    outside = r > 1 + 1e-12
    if np.any(np.abs(v[outside]) > 0):
        i = int(np.nonzero(outside & (v != 0))[0][0])
        return Validation(False, f"support: nonzero value at |z|={r[i]:.6g} > 1")
    mean = phi.mean()
    if abs(mean) > mean_tol:
        return Validation(False, f"mean: sum phi delta^n = {mean:.3e}", abs(mean))
    box = np.clip(1 - r, 0, None) ** alpha
    over = np.abs(v) - box
    if over.max() > HOLDER_SLACK:
        i = int(np.argmax(over))
        return Validation(False, f"boundary decay: |phi|={abs(v[i]):.6g} > (1-|z|)^alpha="
                                 f"{box[i]:.6g} at z={phi.nodes[i].tolist()}", float(over[i]))
    inside = ~outside
    worst, (i, j) = _pairwise_worst(v[inside], phi.nodes[inside], alpha)
    if worst > HOLDER_SLACK:
        nz = phi.nodes[inside]
        return Validation(False, f"holder: pair {nz[i].tolist()}, {nz[j].tolist()} "
                                 f"exceeds |z-z'|^alpha by {worst:.3e}", worst)
    return Validation(True, "", max(worst, 0.0))


def validate_c_alpha_eps(phi: TestKernel, alpha: float | None = None,
                         eps: float | None = None, mean_tol: float = 1e-10) -> Validation:
    """Membership in the decaying class: ``|phi| <= (1+|z|)^{-n-eps}``, the
    two-sided Hölder bound and mean zero."""
    alpha = phi.alpha if alpha is None else alpha
    eps = phi.eps if eps is None else eps
    if eps is None or not eps > 0:
        raise ValueError("eps must be positive")
    v = phi.values.ravel()
    d = _decay(phi.norms, phi.n, eps)
    mean = phi.mean()
    if abs(mean) > mean_tol:
        return Validation(False, f"mean: sum phi delta^n = {mean:.3e}", abs(mean))
    over = np.abs(v) - d
    if over.max() > HOLDER_SLACK:
        i = int(np.argmax(over))
        return Validation(False, f"decay: |phi|={abs(v[i]):.6g} > (1+|z|)^(-n-eps)="
                                 f"{d[i]:.6g} at z={phi.nodes[i].tolist()}", float(over[i]))
    worst, (i, j) = _pairwise_worst(v, phi.nodes, alpha, weight=d)
    if worst > HOLDER_SLACK:
        return Validation(False, f"holder: pair {phi.nodes[i].tolist()}, "
                                 f"{phi.nodes[j].tolist()} exceeds the bound by {worst:.3e}",
                          worst)
    return Validation(True, "", max(worst, 0.0))


def holder_constant(phi: TestKernel, alpha: float | None = None) -> float:
    """Smallest ``L`` with ``|phi_i - phi_j| <= L |z_i - z_j|^alpha`` and
    ``|phi_i| <= L (1 - |z_i|)^alpha`` on the nodes (unit-support class)."""
    alpha = phi.alpha if alpha is None else alpha
    v = phi.values.ravel()
    nodes = phi.nodes
    r = phi.norms
    best = 0.0
    box = np.clip(1 - r, 0, None) ** alpha
    live = box > 0
    if np.any(np.abs(v[~live]) > 0):
        return math.inf
    best = float((np.abs(v[live]) / box[live]).max(initial=0.0))
    M = len(v)
    for a, b in _pair_blocks(M):
        dist = np.sqrt(((nodes[a:b, None, :] - nodes[None, :, :]) ** 2).sum(-1))
        diff = np.abs(v[a:b, None] - v[None, :])
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(dist > 0, diff / dist ** alpha, 0.0)
        best = max(best, float(ratio.max()))
    return best


def inclusion_constant(alpha: float, eps: float, m: int, R: float, n: int = 1) -> float:
    """Largest ``c`` with ``c * C_alpha`` inside ``C_(alpha, eps)`` on the node grid.

    Unit-support kernels obey ``|phi_i| <= b_i = (1-|z_i|)^alpha`` and
    ``|phi_i - phi_j| <= min(|dz|^alpha, b_i + b_j)``; the decaying class
    allows ``d_i`` and ``|dz|^alpha (d_i + d_j)``.  The constant is the
    minimum of the ratios over nodes and node pairs of the unit ball.
    """
    ax = kernel_axis(m, 1.0)
    mesh = np.meshgrid(*([ax] * n), indexing="ij")
    nodes = np.stack([g.ravel() for g in mesh], axis=-1)
    r = np.sqrt((nodes ** 2).sum(axis=1))
    keep = r <= 1 + 1e-12
    nodes, r = nodes[keep], r[keep]
    b = np.clip(1 - r, 0, None) ** alpha
    d = _decay(r, n, eps)
    live = b > 0
    c = float((d[live] / b[live]).min())
    for a, e in _pair_blocks(len(r)):
        dist = np.sqrt(((nodes[a:e, None, :] - nodes[None, :, :]) ** 2).sum(-1)) ** alpha
        need = np.minimum(dist, b[a:e, None] + b[None, :])
        allow = dist * (d[a:e, None] + d[None, :])
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(need > 0, allow / need, np.inf)
        c = min(c, float(ratio.min()))
    del R  # the truncation radius does not enter: unit-ball nodes sit inside it
    return c


# --------------------------------------------------------------------------
# Lipschitz norm


def lip_norm(b: SampledField, family, alpha: float = 1.0) -> float:
    """``sup_Q |Q|^{-1-alpha/n} int_Q |b - b_Q|`` over the cubes of ``family``."""
    g = b.grid
    best = 0.0
    cubes = family.cubes() if hasattr(family, "cubes") else [(None, c) for c in family]
    if not cubes:
        raise ValueError("cube family is empty")
    for _, rect in cubes:
        sl = tuple(g.index_range(rect))
        block = b.values[sl]
        if block.size == 0:
            continue
        dev = np.abs(block - block.mean()).sum() * g.cell_volume
        best = max(best, dev / rect.volume ** (1 + alpha / g.n))
    return float(best)


# --------------------------------------------------------------------------
# the amplitude LP


@dataclass
class LPResult:
    value: float
    phi: np.ndarray | None
    iterations: int
    certified: bool
    method: str = "lp"

    def diagnostics(self, m: int) -> dict:
        return {"m": m, "iterations": self.iterations, "objective": self.value,
                "certified_feasible": self.certified}


class KernelLP:
    """Reusable LP over node values of one kernel class.

    The model is built once; each solve only swaps the objective, so HiGHS
    restarts from the previous optimal basis.
    """

    def __init__(self, alpha: float, m: int = 201, n: int = 1, eps: float | None = None,
                 R: float = 8.0, tol: float = 1e-6):
        if not 0 < alpha <= 1:
            raise ValueError("alpha must lie in (0, 1]")
        self.alpha, self.m, self.n, self.eps, self.tol = alpha, m, n, eps, tol
        self.R = R if eps is not None else 1.0
        ax = kernel_axis(m, self.R)
        self.template = TestKernel(ax, np.zeros((len(ax),) * n), alpha, eps, n)
        nodes = self.template.nodes
        r = self.template.norms
        if eps is None:
            bound = np.clip(1 - r, 0, None) ** alpha
            weight = None
        else:
            bound = _decay(r, n, eps)
            weight = bound
        self.active = np.nonzero(bound > 0)[0]
        self.bound = bound[self.active]
        self.template.values = bound.reshape(self.template.values.shape)
        self.rows = self._pairs(nodes[self.active], self.bound, weight is not None)
        self._build()
        self.iterations = 0
        self.solves = 0

    # constraint generation ------------------------------------------------
    def _pairs(self, nodes, b, decaying):
        alpha, n = self.alpha, self.n
        M = len(nodes)
        if n == 1 and alpha == 1.0:
            # neighbour rows imply the rest: by the triangle inequality for the
            # unit-support class, by convexity of the decay profile on each
            # side of 0 for the decaying class (cross-origin pairs kept)
            I = np.arange(M - 1)
            J = I + 1
            z = nodes[:, 0]
            if decaying:
                neg = np.nonzero(z < 0)[0]
                pos = np.nonzero(z > 0)[0]
                ii, jj = np.meshgrid(neg, pos, indexing="ij")
                ii, jj = ii.ravel(), jj.ravel()
                keep = (z[jj] - z[ii] < 1.0) & (jj - ii > 1)
                I = np.concatenate([I, ii[keep]])
                J = np.concatenate([J, jj[keep]])
        else:
            Is, Js = [], []
            for a, e in _pair_blocks(M):
                dist = np.sqrt(((nodes[a:e, None, :] - nodes[None, :, :]) ** 2).sum(-1))
                cap = dist ** alpha
                if decaying:
                    cap = cap * (b[a:e, None] + b[None, :])
                upper = np.arange(a, e)[:, None] < np.arange(M)[None, :]
                keep = upper & (cap < b[a:e, None] + b[None, :])
                ii, jj = np.nonzero(keep)
                Is.append(ii + a)
                Js.append(jj)
            I, J = np.concatenate(Is), np.concatenate(Js)
        dist = np.sqrt(((nodes[I] - nodes[J]) ** 2).sum(-1))
        cap = dist ** alpha
        if decaying:
            cap = cap * (b[I] + b[J])
        return I, J, cap

    def _build(self):
        I, J, cap = self.rows
        M = len(self.active)
        R = len(I)
        rr = np.concatenate([np.arange(R), np.arange(R), np.full(M, R)])
        cc = np.concatenate([I, J, np.arange(M)])
        vv = np.concatenate([np.ones(R), -np.ones(R), np.ones(M)])
        A = sp.csc_matrix((vv, (rr, cc)), shape=(R + 1, M))
        lp = highspy.HighsLp()
        lp.num_col_ = M
        lp.num_row_ = R + 1
        lp.col_cost_ = np.zeros(M)
        lp.col_lower_ = -self.bound
        lp.col_upper_ = self.bound.copy()
        lp.row_lower_ = np.concatenate([-cap, [0.0]])
        lp.row_upper_ = np.concatenate([cap, [0.0]])
        lp.a_matrix_.format_ = highspy.MatrixFormat.kColwise
        lp.a_matrix_.start_ = A.indptr
        lp.a_matrix_.index_ = A.indices
        lp.a_matrix_.value_ = A.data
        lp.a_matrix_.num_col_ = M
        lp.a_matrix_.num_row_ = R + 1
        lp.sense_ = highspy.ObjSense.kMaximize
        h = highspy.Highs()
        h.setOptionValue("output_flag", False)
        h.setOptionValue("threads", 1)
        h.setOptionValue("random_seed", 0)
        h.passModel(lp)
        self._h = h
        self._idx = np.arange(M, dtype=np.int32)
        self._A = A

    @property
    def num_rows(self) -> int:
        return len(self.rows[0]) + 1

    # solving ----------------------------------------------------------------
    def solve_cost(self, cost: np.ndarray, want_phi: bool = False) -> LPResult:
        """Maximise ``cost . phi`` over the class (cost on active nodes)."""
        cost = np.asarray(cost, dtype=float)
        centred = cost - cost.mean()
        scale = float(np.abs(centred).max()) if centred.size else 0.0
        if scale == 0.0 or scale <= 1e-15 * float(np.abs(cost).max()):
            phi = np.zeros(len(self.active)) if want_phi else None
            return LPResult(0.0, phi, 0, True, "constant")
        h = self._h
        h.changeColsCost(len(self._idx), self._idx, centred / scale)
        status = h.run()
        model = h.getModelStatus()
        if model != highspy.HighsModelStatus.kOptimal:
            # a cold restart recovers the rare basis that stalls
            h.clearSolver()
            h.run()
            model = h.getModelStatus()
            if model != highspy.HighsModelStatus.kOptimal:
                info = h.getInfo()
                raise LPSolveError(f"amplitude LP did not converge: {h.modelStatusToString(model)}"
                                   f" after {info.simplex_iteration_count} iterations"
                                   f" (status {status})")
        info = h.getInfo()
        self.solves += 1
        self.iterations += info.simplex_iteration_count
        phi = np.asarray(h.getSolution().col_value)
        obj = float(centred @ phi)
        certified = self.max_violation(phi) <= 1e-7
        value = max(obj, 0.0)
        return LPResult(value, phi if want_phi else None, info.simplex_iteration_count,
                        certified)

    def max_violation(self, phi: np.ndarray) -> float:
        I, J, cap = self.rows
        v = max(0.0, float((np.abs(phi) - self.bound).max()))
        if len(I):
            v = max(v, float((np.abs(phi[I] - phi[J]) - cap).max()))
        return max(v, abs(float(phi.sum())) * self.template.cell_volume)

    def kernel_from(self, phi: np.ndarray) -> TestKernel:
        vals = np.zeros(self.template.values.size)
        vals[self.active] = phi
        return TestKernel(self.template.axis, vals, self.alpha, self.eps, self.n)

    def amplitudes(self, f: SampledField, t: float, ys, want_kernels: bool = False):
        """``sup_phi |f * phi_t(y)|`` for each ``y`` in ``ys`` at one scale.

        Returns ``(values, truncated)``; with ``want_kernels`` also the
        optimal (certified) kernels.
        """
        _check_kernel(self.template)
        samples, truncated = kernel_sample_matrix(f, self.template, t, ys)
        costs = samples[:, self.active] * self.template.cell_volume
        vals = np.empty(len(costs))
        kernels = []
        for i, c in enumerate(costs):
            res = self.solve_cost(c, want_phi=want_kernels)
            vals[i] = res.value
            if want_kernels:
                kernels.append(self.kernel_from(res.phi))
        if want_kernels:
            return vals, truncated, kernels
        return vals, truncated


_SOLVERS: dict = {}


def get_solver(alpha: float, m: int, n: int = 1, eps: float | None = None, R: float = 8.0,
               tol: float = 1e-6) -> KernelLP:
    """Shared :class:`KernelLP` per configuration (models are costly to build)."""
    key = (float(alpha), int(m), int(n), None if eps is None else float(eps),
           float(R) if eps is not None else 1.0)
    if key not in _SOLVERS:
        _SOLVERS[key] = KernelLP(alpha, m, n, eps, R, tol)
    return _SOLVERS[key]


def _dictionary_amplitude(f, y, t, alpha, cfg, eps=None):
    kernels = kernel_dictionary(alpha, cfg, eps)
    best = 0.0
    from .grid_core import convolve_batch
    for k in kernels:
        v, _ = convolve_batch(f, k, t, np.atleast_2d(y))
        best = max(best, abs(float(v[0])))
    return best


def _amplitude(f, y, t, alpha, cfg, eps, report):
    if not t > 0:
        raise ValueError("scale t must be positive")
    n = f.grid.n
    if n == 2 and cfg.m > cfg.m_lp_max_2d:
        val = _dictionary_amplitude(f, y, t, alpha, cfg, eps)
        return (val, {"method": "dictionary", "lower_bound": True}) if report else val
    lp = get_solver(alpha, cfg.m, n, eps, cfg.R, cfg.tol)
    vals, trunc = lp.amplitudes(f, t, np.atleast_2d(np.asarray(y, dtype=float)).reshape(1, n))
    if trunc[0] and not report:
        warnings.warn("amplitude stencil left the field's box; outside read as 0",
                      TruncationWarning, stacklevel=3)
    if report:
        info = {"method": "lp", "lower_bound": False, "truncated": bool(trunc[0])}
        if eps is not None:
            info["tail_bound"] = tail_bound(f, eps, cfg.R)
        return float(vals[0]), info
    return float(vals[0])


def tail_bound(f: SampledField, eps: float, R: float) -> float:
    """``||f||_inf * int_{|z| > R} (1+|z|)^{-n-eps} dz`` (kernel truncation error)."""
    n = f.grid.n
    if n == 1:
        mass = 2 * (1 + R) ** (-eps) / eps
    else:
        # 2 pi int_R^inf r (1+r)^{-2-eps} dr
        mass = 2 * math.pi * ((1 + R) ** (-eps) / eps - (1 + R) ** (-1 - eps) / (1 + eps))
    return f.sup() * mass


def intrinsic_amplitude(f: SampledField, y, t: float, alpha: float,
                        cfg: AmplitudeSolverConfig | None = None, report: bool = False):
    """``sup over the unit-support class of |f * phi_t(y)|`` by linear programming."""
    cfg = cfg or AmplitudeSolverConfig()
    return _amplitude(f, y, t, alpha, cfg, None, report)


def tilde_amplitude(f: SampledField, y, t: float, alpha: float, eps: float,
                    cfg: AmplitudeSolverConfig | None = None, report: bool = False):
    """Same supremum over the decaying class truncated to ``[-R, R]^n``."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    cfg = cfg or AmplitudeSolverConfig()
    return _amplitude(f, y, t, alpha, cfg, eps, report)


# --------------------------------------------------------------------------
# random feasible kernels


def _smooth_random(rng, nodes, R):
    """Sum of a few random bumps and ramps on the node set."""
    out = np.zeros(len(nodes))
    for _ in range(rng.integers(1, 6)):
        c = rng.uniform(-R, R, size=nodes.shape[1])
        w = rng.uniform(0.05, 0.8) * R
        shape = rng.integers(3)
        r = np.sqrt(((nodes - c) ** 2).sum(-1)) / w
        if shape == 0:
            g = np.clip(1 - r, 0, None)
        elif shape == 1:
            g = np.exp(-r ** 2)
        else:
            g = np.sign(nodes[:, 0] - c[0]) * np.clip(1 - r, 0, None) ** 0.5
        out += rng.normal() * g
    return out


def random_feasible_kernel(alpha: float, seed: int, m: int = 201, n: int = 1,
                           eps: float | None = None, R: float = 8.0) -> TestKernel:
    """A deterministic (per seed) kernel that passes the matching validator.

    A random profile times the class envelope is made mean-zero with the
    envelope itself, then scaled below every constraint by a random factor.
    """
    rng = np.random.default_rng(seed)
    radius = 1.0 if eps is None else R
    k = TestKernel.zeros(m, alpha, n, eps, radius)
    nodes, r = k.nodes, k.norms
    env = np.clip(1 - r, 0, None) ** alpha if eps is None else _decay(r, n, eps)
    raw = _smooth_random(rng, nodes, 1.0 if eps is None else min(R, 3.0)) * env
    raw = raw - env * (raw.sum() / env.sum())
    raw[env == 0] = 0.0
    if not np.any(raw):
        raw = env * np.sign(nodes[:, 0])
        raw = raw - env * (raw.sum() / env.sum())
    probe = TestKernel(k.axis, raw, alpha, eps, n)
    if eps is None:
        worst = holder_constant(probe, alpha)
    else:
        over = float((np.abs(raw) / env).max())
        hol = 0.0
        for a, e in _pair_blocks(len(raw)):
            dist = np.sqrt(((nodes[a:e, None, :] - nodes[None, :, :]) ** 2).sum(-1))
            cap = dist ** alpha * (env[a:e, None] + env[None, :])
            with np.errstate(divide="ignore", invalid="ignore"):
                ratio = np.where(cap > 0, np.abs(raw[a:e, None] - raw[None, :]) / cap, 0.0)
            hol = max(hol, float(ratio.max()))
        worst = max(over, hol)
    s = rng.uniform(0.2, 1.0) / worst * (1 - 1e-9)
    probe.values = probe.values * s
    # exact discrete mean zero after scaling
    v = probe.values.ravel()
    v = v - env * (v.sum() / env.sum())
    probe.values = v.reshape(probe.values.shape)
    return probe


def kernel_dictionary(alpha: float, cfg: AmplitudeSolverConfig, eps: float | None = None):
    """Fixed feasible kernels for the 2-d lower-bound fallback."""
    key = ("dict", alpha, cfg.m, eps, cfg.R, cfg.dictionary_size)
    if key not in _SOLVERS:
        _SOLVERS[key] = [random_feasible_kernel(alpha, s, cfg.m, 2, eps, cfg.R)
                         for s in range(cfg.dictionary_size)]
    return _SOLVERS[key]
