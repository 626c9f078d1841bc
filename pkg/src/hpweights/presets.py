"""Closed-form test fields and the field-source mini language.

A field source is ``preset:<name>[:k=v,...]`` or ``csv:<path>``.  Presets
are sampled at the grid nodes, carry a tag with their parameters and,
except for ``atom``, keep their closed form for off-grid evaluation.
"""

from __future__ import annotations

import numpy as np

from .grid_core import Grid, Rect, SampledField, read_field_csv

__all__ = ["PRESETS", "make_field", "parse_source", "field_from_source", "random_smooth",
           "bump_field"]


def _radius(pts, center):
    return np.sqrt(((pts - np.asarray(center)) ** 2).sum(axis=1))


def _bump_at(pts, center, width, amp):
    c = np.broadcast_to(np.asarray(center, dtype=float), (pts.shape[1],))
    r = _radius(pts, c) / width
    return amp * np.where(r < 1, np.clip(1 - r ** 2, 0, None) ** 4, 0.0)


def bump_field(grid: Grid, center=0.0, width=1.0, amp=1.0) -> np.ndarray:
    """``amp (1 - |x - c|^2 / width^2)^4`` inside the ball of radius ``width``."""
    return _bump_at(grid.points(), center, width, amp)


def _random_at(pts, seed=0, count=3, spread=2.0, width=(0.5, 1.5)):
    rng = np.random.default_rng(seed)
    out = np.zeros(len(pts))
    for _ in range(count):
        c = rng.uniform(-spread, spread, size=pts.shape[1])
        wdt = rng.uniform(*width)
        out += rng.normal() * _bump_at(pts, c, wdt, 1.0)
    return out


def random_smooth(grid: Grid, seed: int = 0, count: int = 3, spread: float = 2.0,
                  width=(0.5, 1.5)) -> np.ndarray:
    """Sum of ``count`` random smooth bumps with centres in ``[-spread, spread]^n``."""
    out = _random_at(grid.points(), seed, count, spread, width)
    if not np.any(out):
        out = bump_field(grid, np.zeros(grid.n), 1.0)
    return out


# closed forms on point arrays of shape (N, n)


def _constant(pts, c=1.0):
    return np.full(len(pts), float(c))


def _linear(pts, c1=1.0, c0=0.0):
    return c1 * pts[:, 0] + c0


def _gauss(pts, center=0.0, sigma=1.0, amp=1.0):
    c = np.broadcast_to(np.asarray(center, dtype=float), (pts.shape[1],))
    return amp * np.exp(-_radius(pts, c) ** 2 / (2 * sigma ** 2))


def _haar(pts, lo=0.0, hi=1.0, amp=1.0):
    x = pts[:, 0]
    mid = (lo + hi) / 2
    return amp * (((x >= lo) & (x < mid)).astype(float) - ((x >= mid) & (x < hi)).astype(float))


def _odd_tent(pts, amp=1.0):
    x = pts[:, 0]
    a = np.abs(x)
    prof = np.where(a <= 0.5, a, np.where(a <= 1, 1 - a, 0.0))
    return amp * np.sign(x) * prof


def _bump(pts, center=0.0, width=1.0, amp=1.0):
    return _bump_at(pts, center, width, amp)


def _random(pts, seed=0, count=3, spread=2.0):
    return _random_at(pts, int(seed), int(count), float(spread))


PRESETS = {
    "constant": _constant,
    "linear": _linear,
    "gauss": _gauss,
    "haar": _haar,
    "odd-tent": _odd_tent,
    "bump": _bump,
    "random": _random,
    "atom": None,
}


def _atom_values(grid, seed=0, center=0.0, side=1.0, p=0.9, q=1.8, weight="power:0.5"):
    from .hardy_atoms import make_atom
    from .weights import Weight
    w = Weight.from_spec(str(weight), grid.n)
    cube = Rect.cube(np.broadcast_to(float(center), (grid.n,)), float(side))
    return make_atom(cube, w, float(p), float(q), 0, int(seed), grid=grid).field.values.ravel()


def make_field(name: str, grid: Grid, **params) -> SampledField:
    """Preset sampled on ``grid``; closed-form presets keep their exact evaluator."""
    if name not in PRESETS:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    tag = {"preset": name, **params}
    try:
        if name == "atom":
            return SampledField(grid, _atom_values(grid, **params), tag=tag)
        fn = PRESETS[name]
        vals = fn(grid.points(), **params)
    except TypeError as e:
        raise ValueError(f"bad parameters for preset {name!r}: {e}") from None
    exact = lambda pts: fn(np.asarray(pts, dtype=float).reshape(-1, grid.n), **params)
    return SampledField(grid, vals, tag=tag, exact=exact)


def _coerce(v: str):
    for cast in (int, float):
        try:
            return cast(v)
        except ValueError:
            pass
    return v


def parse_source(src: str) -> tuple:
    """``preset:name:k=v,...`` -> ("preset", name, params); ``csv:path`` -> ("csv", path, {})."""
    kind, _, rest = src.partition(":")
    if kind == "csv":
        if not rest:
            raise ValueError("csv source needs a path")
        return "csv", rest, {}
    if kind == "preset":
        name, _, args = rest.partition(":")
        params = {}
        for item in filter(None, args.split(",")):
            k, eq, v = item.partition("=")
            if not eq:
                raise ValueError(f"bad preset parameter {item!r} (want k=v)")
            params[k.strip()] = _coerce(v.strip())
        return "preset", name, params
    raise ValueError(f"unknown field source {src!r} (want preset:... or csv:...)")


def field_from_source(src: str, grid: Grid | None = None) -> SampledField:
    kind, name, params = parse_source(src)
    if kind == "csv":
        return read_field_csv(name)
    if grid is None:
        raise ValueError("preset fields need a grid")
    return make_field(name, grid, **params)
