"""Command-line interface: ``hpweights <group> <command> [options]``.

Groups are ``weights``, ``sqfn``, ``atoms`` and ``verify``.  Options may also
come from a flat ``key=value`` file given with ``--config``; explicit flags
win.  Errors print a single ``error: <reason>`` line and exit with 2 (bad
input or refusal), 3 (vanishing check failed before a decomposition) or 1
(a verdict or suite failed).
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys

EXIT_FAIL, EXIT_USAGE, EXIT_NOT_VANISHING = 1, 2, 3


class CliError(Exception):
    def __init__(self, msg, code=EXIT_USAGE):
        super().__init__(msg)
        self.code = code


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(f"{self.prog}: {message}".replace("\n", " "))


# --------------------------------------------------------------------------
# option groups


def _common(p):
    p.add_argument("--config", help="flat key=value file; explicit flags win")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=None,
                   help="cap on worker threads (default: machine parallelism)")
    p.add_argument("--out", help="write the main output here instead of stdout")


def _grid_opts(p, lo=-8.0, hi=8.0, h=1 / 16):
    p.add_argument("--dim", type=int, default=1, choices=(1, 2))
    p.add_argument("--lo", type=float, default=lo)
    p.add_argument("--hi", type=float, default=hi)
    p.add_argument("--h", type=float, default=h, help="grid spacing")


def _ladder_opts(p):
    p.add_argument("--t-min", type=float, default=None)
    p.add_argument("--t-max", type=float, default=None)
    p.add_argument("--rho", type=float, default=2 ** 0.25)


def _field_opt(p, required=True):
    p.add_argument("--field", required=required,
                   help="preset:<name>[:k=v,...] or csv:<path>")


def _weight_opt(p, default="power:0"):
    p.add_argument("--weight", default=default, help="power:<a> or csv:<path>")


def _lp_opts(p):
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--m", type=int, default=201, help="LP kernel nodes per axis (odd)")
    p.add_argument("--R", type=float, default=8.0, help="decaying-class truncation radius")


def _cube_opts(p, side=1.0):
    p.add_argument("--center", type=str, default="0", help="cube centre, comma separated")
    p.add_argument("--side", type=float, default=side)


def build_parser():
    top = _Parser(prog="hpweights", description=__doc__.splitlines()[0])
    groups = top.add_subparsers(dest="group", required=True, parser_class=_Parser)
    leaves = {}

    def leaf(grp, name, help_):
        p = grp.add_parser(name, help=help_)
        _common(p)
        leaves[name] = p
        return p

    # weights ---------------------------------------------------------------
    wg = groups.add_parser("weights", help="Muckenhoupt quantities")
    wsub = wg.add_subparsers(dest="cmd", required=True, parser_class=_Parser)
    for name, hlp in [("ap", "sup of the A_p quantity over dyadic cubes"),
                      ("critical-index", "smallest q with the A_q flag false"),
                      ("doubling", "w(lam Q)/w(Q)"),
                      ("tail", "tail integral against r^{-nq} w(Q(0,2r))"),
                      ("maximal", "weighted dyadic maximal function (CSV)")]:
        p = leaf(wsub, name, hlp)
        _weight_opt(p, "power:0.5")
        p.add_argument("--dim", type=int, default=1, choices=(1, 2))
        p.add_argument("--p", type=float, default=2.0)
        p.add_argument("--lo", type=float, default=-4.0)
        p.add_argument("--hi", type=float, default=4.0)
        p.add_argument("--k-min", type=int, default=0)
        p.add_argument("--k-max", type=int, default=8)
        if name == "critical-index":
            p.add_argument("--tol", type=float, default=0.05)
        if name == "doubling":
            _cube_opts(p)
            p.add_argument("--lam", type=float, default=2.0)
        if name == "tail":
            p.add_argument("--r", type=float, default=1.0)
            p.add_argument("--q", type=float, default=2.0)
            p.add_argument("--h", type=float, default=1 / 16)
        if name == "maximal":
            _field_opt(p)
            p.add_argument("--h", type=float, default=1 / 16)

    # sqfn ------------------------------------------------------------------
    sg = groups.add_parser("sqfn", help="square functions (CSV x,value)")
    ssub = sg.add_subparsers(dest="cmd", required=True, parser_class=_Parser)
    for name in ("s-alpha", "g-alpha", "g-star", "s-psi"):
        p = leaf(ssub, name, f"{name} at grid nodes or --x points")
        _field_opt(p)
        _grid_opts(p)
        _ladder_opts(p)
        _lp_opts(p)
        p.add_argument("--tilde", action="store_true", help="use the decaying kernel class")
        p.add_argument("--eps", type=float, default=None)
        p.add_argument("--beta", type=float, default=1.0, help="cone aperture")
        p.add_argument("--lam", type=float, default=None, help="g-star exponent")
        p.add_argument("--x", default=None, help="points: 'a,b,c' (1D) or 'x,y;x,y' (2D)")
        p.add_argument("--dump-amplitude", default=None, help="CSV path for y,t,value")

    # atoms -----------------------------------------------------------------
    ag = groups.add_parser("atoms", help="atoms and the atomic decomposition")
    asub = ag.add_subparsers(dest="cmd", required=True, parser_class=_Parser)
    p = leaf(asub, "validate", "check support, size and moments of an atom CSV")
    _field_opt(p)
    _cube_opts(p)
    _weight_opt(p, "power:0")
    p.add_argument("--p", type=float, default=0.9)
    p.add_argument("--q", type=float, default=1.8)
    p.add_argument("--s", type=int, default=0)
    p = leaf(asub, "make", "random smooth atom saturating the size condition (CSV)")
    _cube_opts(p)
    _weight_opt(p, "power:0")
    p.add_argument("--p", type=float, default=0.9)
    p.add_argument("--q", type=float, default=1.8)
    p.add_argument("--s", type=int, default=0)
    for name in ("decompose", "reconstruct"):
        p = leaf(asub, name, "tent-based decomposition" if name == "decompose"
                 else "decompose, resynthesise and report the L^2 error")
        _field_opt(p)
        _grid_opts(p, h=1 / 32)
        _weight_opt(p, "power:0")
        p.add_argument("--p", type=float, default=0.9)
        p.add_argument("--atom-dir", default=None, help="write atoms as CSV here")
        p.add_argument("--field-out", default=None, help="write the resynthesised field here")

    # verify ----------------------------------------------------------------
    vg = groups.add_parser("verify", help="verification suites (JSON)")
    vsub = vg.add_subparsers(dest="cmd", required=True, parser_class=_Parser)
    for name in ("prop32", "prop33", "theorem-f", "chain17", "decomposition", "all"):
        p = leaf(vsub, name, f"run the {name} suite" if name != "all" else "run every suite")
        p.add_argument("--out-dir", default=None, help="one <suite>.json per suite")
        p.add_argument("--count", type=int, default=None, help="corpus size")
        p.add_argument("--lambda", dest="lam", type=float, default=None)
        p.add_argument("--m", type=int, default=None)
        p.add_argument("--points", type=int, default=None, help="chain17 sample points")
        _field_opt(p, required=False)
    return top, leaves


# --------------------------------------------------------------------------
# config merging


def read_config(path) -> dict:
    out = {}
    with open(path) as fh:
        for num, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            k, eq, v = line.partition("=")
            if not eq:
                raise CliError(f"config line {num}: expected key=value")
            out[k.strip().replace("_", "-")] = v.strip()
    return out


def _leaf_name(argv):
    for i, tok in enumerate(argv):
        if tok in ("weights", "sqfn", "atoms", "verify") and i + 1 < len(argv):
            return argv[i + 1]
    return None


def merge_config(argv: list, leaves: dict) -> list:
    """Append config entries as flags unless the flag was given explicitly."""
    if "--config" not in argv:
        return argv
    i = argv.index("--config")
    if i + 1 >= len(argv):
        raise CliError("--config needs a path")
    cfg = read_config(argv[i + 1])
    leaf = leaves.get(_leaf_name(argv))
    known = set()
    for p in leaves.values():
        known.update(s for s in p._option_string_actions if s.startswith("--"))
    given = {tok.split("=", 1)[0] for tok in argv if tok.startswith("--")}
    extra = []
    for k, v in cfg.items():
        flag = "--" + k
        if flag not in known:
            raise CliError(f"unknown config key {k!r}")
        if leaf is None or flag not in leaf._option_string_actions or flag in given:
            continue
        action = leaf._option_string_actions[flag]
        if action.nargs == 0:
            if v.lower() in ("1", "true", "yes", "on"):
                extra.append(flag)
        else:
            extra += [flag, v]
    return list(argv) + extra


# --------------------------------------------------------------------------
# helpers


def _emit(text: str, path=None):
    if path:
        with open(path, "w") as fh:
            fh.write(text if text.endswith("\n") else text + "\n")
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _json(obj) -> str:
    from .verification import _clean
    return json.dumps(_clean(obj), indent=2, sort_keys=True)


def _vec(s: str, n: int):
    import numpy as np
    v = [float(t) for t in str(s).split(",") if t.strip()]
    if len(v) == 1:
        v = v * n
    if len(v) != n:
        raise CliError(f"expected {n} coordinates, got {s!r}")
    return np.array(v)


def _grid(a):
    from .grid_core import Grid
    if not a.hi > a.lo or not a.h > 0:
        raise CliError("grid needs lo < hi and h > 0")
    return Grid((a.lo,) * a.dim, (a.hi,) * a.dim, a.h)


def _weight(spec, n):
    from .weights import Weight
    return Weight.from_spec(spec, n)


def _field(a, grid=None):
    from .presets import field_from_source
    return field_from_source(a.field, grid)


def _points(spec, n):
    import numpy as np
    rows = [r for r in spec.split(";") if r.strip()] if n == 2 else \
        [t for t in spec.split(",") if t.strip()]
    pts = [[float(v) for v in r.split(",")] for r in rows] if n == 2 else \
        [[float(v)] for v in rows]
    return np.array(pts)


def _write_rows(rows, header, path):
    from .grid_core import fmt
    fh = open(path, "w", newline="") if path else sys.stdout
    try:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(header)
        for r in rows:
            wr.writerow([fmt(v) for v in r])
    finally:
        if path:
            fh.close()


# --------------------------------------------------------------------------
# commands


def cmd_weights(a) -> int:
    from .grid_core import Grid, Rect, SampledField
    from .weights import (CubeFamily, ap_constant, critical_index, doubling_ratio,
                          tail_integral, weighted_maximal)
    w = _weight(a.weight, a.dim)
    lo, hi = (a.lo,) * a.dim, (a.hi,) * a.dim
    if not a.hi > a.lo:
        raise CliError("need lo < hi")
    fam = CubeFamily.over(lo, hi, a.k_min, a.k_max)
    if a.cmd == "ap":
        if not a.p > 1:
            raise CliError("p must exceed 1")
        _emit(_json(ap_constant(w, a.p, fam).to_dict()), a.out)
    elif a.cmd == "critical-index":
        ci = critical_index(w, a.tol, fam)
        _emit(_json({"value": ci.value, "lower_bound_only": ci.lower_bound_only,
                     "tol": ci.tol, "describe": ci.describe()}), a.out)
    elif a.cmd == "doubling":
        Q = Rect.cube(_vec(a.center, a.dim), a.side)
        rep = ap_constant(w, a.p, fam) if a.p > 1 else None
        d = doubling_ratio(w, Q, a.lam, rep)
        _emit(_json({"ratio": d.ratio, "bound": d.bound, "ok": d.ok,
                     "truncated": d.truncated, "lam": a.lam, "cube": Q.describe()}), a.out)
    elif a.cmd == "tail":
        g = Grid(lo, hi, a.h)
        t = tail_integral(w, a.r, a.q, g)
        _emit(_json(dict(t.__dict__)), a.out)
    elif a.cmd == "maximal":
        g = Grid(lo, hi, a.h)
        f = _field(a, g)
        fam = CubeFamily.for_grid(f.grid)
        M = weighted_maximal(f, w, fam)
        pts = M.grid.points()
        header = ["x", "value"] if M.grid.n == 1 else ["x", "y", "value"]
        _write_rows(((*p, v) for p, v in zip(pts, M.values.ravel())), header, a.out)
    return 0


def cmd_sqfn(a) -> int:
    import warnings
    from .grid_core import HalfSpaceLadder, TruncationWarning, default_ladder
    from .hardy_atoms import admissible_psi
    from .kernel_family import AmplitudeSolverConfig
    from .square_functions import (amplitude_field, g_from_field, gstar_from_field,
                                   kernel_field, s_from_field, t_max_sensitivity)
    g = _grid(a)
    f = _field(a, g)
    g = f.grid
    if a.cmd == "g-star" and a.lam is None:
        raise CliError("g-star needs --lam")
    if a.tilde and a.eps is None:
        raise CliError("--tilde needs --eps")
    if a.tilde and a.cmd == "s-psi":
        raise CliError("s-psi uses a fixed kernel; --tilde does not apply")
    if a.tilde and not a.eps > a.alpha:
        raise CliError(f"eps={a.eps} must exceed alpha={a.alpha}")
    if not a.beta > 0:
        raise CliError("aperture beta must be positive")
    base = default_ladder(g)
    ladder = HalfSpaceLadder(a.t_min if a.t_min is not None else base.t_min,
                             a.t_max if a.t_max is not None else base.t_max, a.rho)
    cfg = AmplitudeSolverConfig(m=a.m, R=a.R, n=g.n)
    xs = g.points() if a.x is None else _points(a.x, g.n)
    eps = a.eps if a.tilde else None
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", TruncationWarning)
        if a.cmd == "s-psi":
            psi = admissible_psi(a.alpha, g.n, min(a.m, 201 if g.n == 1 else 33))
            A = kernel_field(f, psi.kernel, ladder)
        else:
            A = amplitude_field(f, a.alpha, cfg, ladder, eps)
        if a.cmd in ("s-alpha", "s-psi"):
            vals = s_from_field(A, xs, a.beta)
        elif a.cmd == "g-alpha":
            vals = g_from_field(A, xs)
            sens = t_max_sensitivity(f, a.alpha, cfg, ladder, xs)
            if sens > 0.05:
                print(f"warning: g-alpha changes by {sens:.3g} (relative) when t_max doubles",
                      file=sys.stderr)
        else:
            vals = gstar_from_field(A, a.lam, xs)
    for wmsg in {str(c.message) for c in caught}:
        print(f"warning: {wmsg}", file=sys.stderr)
    header = ["x", "value"] if g.n == 1 else ["x", "y", "value"]
    _write_rows(((*p, v) for p, v in zip(xs, vals)), header, a.out)
    if a.dump_amplitude:
        h = ["y", "t", "value"] if g.n == 1 else ["y1", "y2", "t", "value"]
        _write_rows(A.rows(), h, a.dump_amplitude)
    return 0


def cmd_atoms(a) -> int:
    from .grid_core import Rect, write_field_csv
    from .hardy_atoms import (Atom, atomic_decompose, make_atom, reconstruct,
                              relative_l2_error, validate_atom, vanishes_weakly_check)
    if a.cmd == "validate":
        f = _field(a)
        w = _weight(a.weight, f.grid.n)
        cube = Rect.cube(_vec(a.center, f.grid.n), a.side)
        v = validate_atom(Atom(f, cube, a.p, a.q, a.s, w))
        _emit(_json({"valid": v.ok, "reason": v.reason, "worst": v.worst}), a.out)
        return 0 if v.ok else EXIT_FAIL
    if a.cmd == "make":
        n = len(str(a.center).split(","))
        w = _weight(a.weight, n)
        cube = Rect.cube(_vec(a.center, n), a.side)
        atom = make_atom(cube, w, a.p, a.q, a.s, a.seed)
        if a.out:
            write_field_csv(atom.field, a.out)
        else:
            _write_rows(((*p, v) for p, v in zip(atom.field.grid.points(),
                                                 atom.field.values.ravel())),
                        ["x", "value"] if n == 1 else ["x", "y", "value"], None)
        return 0
    g = _grid(a)
    f = _field(a, g)
    w = _weight(a.weight, f.grid.n)
    van = vanishes_weakly_check(f)
    if not van.passed:
        raise CliError(f"field does not vanish weakly at infinity "
                       f"(final/max = {van.ratio:.3g} > {van.tol})", EXIT_NOT_VANISHING)
    d = atomic_decompose(f, w, a.p)
    if a.cmd == "decompose":
        if a.atom_dir:
            os.makedirs(a.atom_dir, exist_ok=True)
        _emit(d.to_json(a.atom_dir), a.out)
        return 0
    rec = reconstruct(d)
    if a.field_out:
        write_field_csv(rec, a.field_out)
    err = relative_l2_error(f, rec) if f.l2() > 0 else 0.0
    _emit(_json({"relative_l2_error": err, "atoms": len(d.entries),
                 "sum_lambda_p": d.sum_lambda_p, "s_psi_norm": d.s_psi_norm}), a.out)
    return 0


def cmd_verify(a) -> int:
    from .grid_core import Grid
    from .presets import field_from_source
    from .verification import SUITES, clear_cache, run_suite
    names = list(SUITES) if a.cmd == "all" else [a.cmd]
    reports = {}
    for name in names:
        kw = {}
        if a.count is not None and name in ("prop32", "prop33", "theorem-f", "decomposition"):
            kw["count"] = a.count
        if a.lam is not None and name in ("prop33", "chain17"):
            kw["lam"] = a.lam
        if a.m is not None and name in ("prop32", "prop33", "theorem-f", "chain17"):
            kw["m"] = a.m
        if name == "chain17":
            if a.points is not None:
                kw["points"] = a.points
            if a.field:
                kw["f"] = field_from_source(a.field, Grid((-4.0,), (4.0,), 1 / 16))
        elif name == "decomposition" and a.field:
            kw["corpus"] = [field_from_source(a.field, Grid((-8.0,), (8.0,), 1 / 32))]
        reports[name] = run_suite(name, seed=a.seed, **kw)
    clear_cache()
    if a.out_dir:
        os.makedirs(a.out_dir, exist_ok=True)
        for name, r in reports.items():
            _emit(r.to_json(), os.path.join(a.out_dir, f"{name}.json"))
    doc = {name: r.to_dict() for name, r in reports.items()}
    _emit(json.dumps(doc if len(doc) > 1 else next(iter(doc.values())), indent=2,
                     sort_keys=True), a.out)
    for r in reports.values():
        for line in r.lines():
            print(line, file=sys.stderr)
    return 0 if all(r.passed for r in reports.values()) else EXIT_FAIL


COMMANDS = {"weights": cmd_weights, "sqfn": cmd_sqfn, "atoms": cmd_atoms, "verify": cmd_verify}


def _thread_cap(k):
    """Context limiting BLAS/OpenMP pools to ``k`` threads (no-op for ``None``)."""
    import contextlib
    if k is None:
        return contextlib.nullcontext()
    if k < 1:
        raise CliError("--threads must be at least 1")
    from threadpoolctl import threadpool_limits
    return threadpool_limits(limits=k)


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        parser, leaves = build_parser()
        argv = merge_config(argv, leaves)
        a = parser.parse_args(argv)
        with _thread_cap(a.threads):
            return COMMANDS[a.group](a)
    except CliError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.code
    except (ValueError, KeyError, OSError) as e:
        # Refusal and InvalidWeight are ValueErrors
        msg = str(e).replace("\n", " ") or type(e).__name__
        print(f"error: {msg}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
