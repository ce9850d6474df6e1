"""Command line entry point: ``morphoheat <subcommand> --config <path> [--out <dir>] [--seed <u64>]``.

Exit status: 0 on success, 1 when ``verify`` finds a failing criterion,
2 on invalid input, 3 when a numerical method does not converge.
"""
import argparse
import csv
import logging
import os
import sys

import numpy as np

from . import __version__
from .config import default_time_list, expression_function, load, usage
from .errors import ArgumentError, ConvergenceError, EmptyDomainError

log = logging.getLogger("morphoheat")

CSV_COLUMNS = {
    "classify": ["scenario", "label", "x", "t", "spectrum", "phi_t", "grad_residual",
                 "phi_residual", "nondegenerate"],
    "evolve_topology": ["t", "volume", "area", "components", "holes", "euler"],
    "evolve_trajectories": ["seed", "t", "x", "abs_phi", "truncated"],
    "constants": ["quantity", "scenario", "t", "a", "b", "p", "n", "value", "iterations"],
    "cutoff": ["scenario", "eps", "grad_norm", "strip_mass"],
    "counterexample": ["xi", "numerator", "denominator", "ratio"],
    "solve_series": ["t", "norm", "volume", "components"],
    "solve_norms": ["quantity", "value"],
    "verify": ["criterion", "title", "passed", "detail"],
}


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.ndarray):
        return ";".join(_fmt(x) for x in v.ravel())
    return str(v)


def write_csv(out_dir, stem, rows, cfg):
    path = os.path.join(out_dir, f"{stem}.csv")
    with open(path, "w", newline="") as fh:
        fh.write(f"# morphoheat {__version__} config_sha256={cfg.digest} seed={cfg.seed}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS[stem])
        for r in rows:
            w.writerow([_fmt(v) for v in r])
    return path


# ------------------------------------------------------------ subcommands

def run_classify(cfg, out):
    from .levelset import SpaceTimeBox
    from .morse import find_critical_points

    f = cfg.field()
    cps = find_critical_points(f, SpaceTimeBox(cfg.box(), f.time_interval), int(cfg.get("grid_density")))
    rows = [(cfg.field_name(), c.scenario or "", c.x, c.t, c.spectrum, c.phi_t, c.grad_residual,
             c.phi_residual, c.nondegenerate) for c in cps]
    return [write_csv(out, "classify", rows, cfg)]


def run_evolve(cfg, out):
    from .flowmap import advect_batch
    from .geometry import BackgroundGrid, build_slice, count_holes, euler_characteristic
    from .morse import find_critical_points
    from .levelset import SpaceTimeBox

    f = cfg.field()
    grid = BackgroundGrid(f.dim, cfg.box(), int(cfg.get("n", 65)))
    times = cfg.number_list("t_list") if "t_list" in cfg.values else default_time_list(f)
    topo = []
    for t in times:
        sl = build_slice(f, grid, t)
        topo.append((t, sl.volume, sl.area, sl.n_components, count_holes(sl), euler_characteristic(sl)))
    files = [write_csv(out, "evolve_topology", topo, cfg)]

    # the flow map exists only on either side of a critical time: advect
    # boundary points of the first slice forward up to t_c and, past t_c,
    # those of the last slice backward down to it
    n_seeds = int(cfg.get("n_seeds"))
    n_steps = int(cfg.get("n_steps"))
    if n_seeds < 1 or n_steps < 1:
        raise ArgumentError("n_seeds and n_steps must be positive")
    cps = find_critical_points(f, SpaceTimeBox(cfg.box(), f.time_interval))
    t_first, t_last = times[0], times[-1]
    crit = sorted(c.t for c in cps if min(t_first, t_last) < c.t < max(t_first, t_last))
    if crit:
        legs = [(t_first, crit[0]), (t_last, crit[-1])]
    elif len(build_slice(f, grid, t_first).facet_measures):
        legs = [(t_first, t_last)]
    else:
        # nothing to seed at the start (island creation): run backward instead
        legs = [(t_last, t_first)]
    rows = []
    seed_id = 0
    for start, stop in legs:
        sl = build_slice(f, grid, start)
        if start == stop or len(sl.facet_measures) == 0:
            continue
        pts = sl.facet_centroids()
        pick = np.linspace(0, len(pts) - 1, min(n_seeds, len(pts))).astype(int)
        # polish centroids onto the zero level along the gradient
        seeds = pts[pick]
        for _ in range(3):
            g = f.grad(seeds, start)
            seeds = seeds - (f.eval(seeds, start) / np.sum(g * g, -1))[:, None] * g
        tt, P, last, stopped = advect_batch(f, seeds, start, stop, n_steps, cps)
        for i in range(len(seeds)):
            for k in range(0, int(last[i]) + 1, max(1, n_steps // 20)):
                rows.append((seed_id, tt[k], P[k, i], abs(float(f.eval(P[k, i], tt[k]))), bool(stopped[i])))
            seed_id += 1
    files.append(write_csv(out, "evolve_trajectories", rows, cfg))
    return files


def run_constants(cfg, out):
    from .geometry import BackgroundGrid
    from .inequalities import hardy_constant, poincare_constant, trace_constant

    q = str(cfg.require("quantity"))
    rows = []
    if q == "hardy":
        a, b, p = float(cfg.get("hardy_a")), float(cfg.get("hardy_b")), float(cfg.get("hardy_p"))
        for n in cfg.number_list("n_list", int):
            e = hardy_constant(a, b, p, n)
            rows.append((q, "", "", a, b, p, n, e.value, e.iterations))
    elif q in ("poincare", "trace_plain", "trace_weighted"):
        f = cfg.field()
        n = int(cfg.get("n", 129))
        grid = BackgroundGrid(f.dim, cfg.box(), n)
        for t in cfg.number_list("t_list"):
            if q == "poincare":
                e = poincare_constant(f, grid, t)
            else:
                e = trace_constant(f, grid, t, weighted=q == "trace_weighted")
            rows.append((q, cfg.field_name(), t, "", "", "", n, e.value, e.iterations))
    else:
        raise ArgumentError(f"unknown quantity {q!r}")
    return [write_csv(out, "constants", rows, cfg)]


def run_cutoff(cfg, out):
    from .cutoff import CutoffProfile, cutoff_study
    from .geometry import BackgroundGrid

    f = cfg.field()
    eps = cfg.number_list("eps_list")
    if any(e <= 0 for e in eps):
        raise ArgumentError("eps values must be positive")
    n = int(cfg.get("n", 257 if f.dim == 2 else 65))
    kind = str(cfg.get("u"))
    if kind == "minus_phi":
        u = lambda x, t: -f.eval(x, t)  # noqa: E731
    elif kind == "one":
        u = 1.0
    else:
        raise ArgumentError(f"u must be minus_phi or one, got {kind!r}")
    g, m = cutoff_study(f, CutoffProfile(1.0), BackgroundGrid(f.dim, cfg.box(), n), u, eps,
                        int(cfg.get("n_slabs")))
    rows = [(cfg.field_name(), e, a, b) for e, a, b in zip(eps, g, m)]
    return [write_csv(out, "cutoff", rows, cfg)]


def run_counterexample(cfg, out):
    from .cutoff import hole_counterexample

    rows = [(r.xi, r.numerator, r.denominator, r.ratio)
            for r in hole_counterexample(cfg.number_list("xi_list"))]
    return [write_csv(out, "counterexample", rows, cfg)]


def run_solve(cfg, out):
    from .geometry import BackgroundGrid, write_vtk
    from .solver import BilinearFormSpec, solve

    f = cfg.field()
    grid = BackgroundGrid(f.dim, cfg.box(), int(cfg.get("n")))
    form_name = str(cfg.get("form"))
    if form_name == "heat":
        form = BilinearFormSpec.heat()
    elif form_name == "advection":
        form = BilinearFormSpec.domain_velocity(f)
    else:
        raise ArgumentError(f"form must be heat or advection, got {form_name!r}")
    if f.q is not None and f.q == f.dim:
        log.warning("hole creation/vanishing lies outside the density argument behind the W theory; solving anyway")
    src = expression_function(cfg.get("f"), f.dim)
    u0 = expression_function(cfg.get("u0"), f.dim)
    sol = solve(f, grid, int(cfg.get("n_t")), src, u0, form)
    norms = sol.norms()
    series = [(t, nv, sl.volume, sl.n_components) for t, nv, sl in zip(sol.times, norms["slices"], sol.slices)]
    files = [write_csv(out, "solve_series", series, cfg)]
    summary = [(k, norms[k]) for k in ("L2_Q", "grad_Q", "H", "dual_ut", "W", "f_dual")]
    files.append(write_csv(out, "solve_norms", summary, cfg))
    if cfg.get("vtk"):
        for k, sl in enumerate(sol.slices):
            p = os.path.join(out, f"solve_{k:04d}.vtk")
            write_vtk(p, sl, {"u": sol.nodal(k)})
            files.append(p)
    return files


def run_verify(cfg, out):
    from .acceptance import CRITERIA, format_line, run_criterion

    nums = cfg.number_list("criteria", int)
    bad = [k for k in nums if k not in CRITERIA]
    if bad:
        raise ArgumentError(f"unknown criteria {bad}")
    rows = []
    failed = False
    for k in nums:
        try:
            r = run_criterion(k, cfg.seed)
        except (ConvergenceError, EmptyDomainError, ArgumentError) as exc:
            rows.append((k, CRITERIA[k].__name__, False, f"error: {exc}"))
            failed = True
            print(f"[FAIL] criterion {k:2d}: error: {exc}", file=sys.stderr)
            continue
        print(format_line(r), file=sys.stderr)
        rows.append((r.number, r.title, r.passed, r.detail))
        failed |= not r.passed
    files = [write_csv(out, "verify", rows, cfg)]
    return files, (1 if failed else 0)


COMMANDS = {
    "classify": run_classify,
    "evolve": run_evolve,
    "constants": run_constants,
    "cutoff": run_cutoff,
    "counterexample": run_counterexample,
    "solve": run_solve,
    "verify": run_verify,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="morphoheat", description=__doc__.splitlines()[0],
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--version", action="version", version=f"morphoheat {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, help=f"run {name}", epilog=usage(name),
                           formatter_class=argparse.RawDescriptionHelpFormatter)
        p.add_argument("--config", required=True, help="path to a key = value config file")
        p.add_argument("--out", default=".", help="output directory (default: current)")
        p.add_argument("--seed", type=int, default=0, help="seed for randomized checks (u64)")
    return parser


def run(subcommand, config_text, out=".", seed=0):
    """Execute one subcommand; returns (exit status, written files)."""
    if not 0 <= int(seed) < 2 ** 64:
        raise ArgumentError("seed must be an unsigned 64-bit integer")
    cfg = load(subcommand, config_text, seed)
    os.makedirs(out, exist_ok=True)
    if not os.access(out, os.W_OK):
        raise ArgumentError(f"output directory {out!r} is not writable")
    res = COMMANDS[subcommand](cfg, out)
    if isinstance(res, tuple):
        return res[1], res[0]
    return 0, res


def main(argv=None):
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        with open(args.config) as fh:
            text = fh.read()
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return 2
    try:
        status, files = run(args.subcommand, text, args.out, args.seed)
    except (ArgumentError, EmptyDomainError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ConvergenceError as exc:
        print(f"convergence failure: {exc}", file=sys.stderr)
        return 3
    for path in files:
        print(path)
    return status


if __name__ == "__main__":
    sys.exit(main())
