"""Command-line front end.

Every subcommand has a table of defaults. The resolved configuration is
built as defaults, then ``--config`` file values, then explicit flags, and is
written into every output file.

Exit codes: 0 success, 1 validation error, 2 failed acceptance check.
"""

import argparse
import json
import math
import os
import sys

import numpy as np

from ._report import Report
from .core import ProblemError

EXIT_OK, EXIT_INVALID, EXIT_FAILED = 0, 1, 2


class UsageError(Exception):
    pass


def _floats(text):
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    return [_frac(v) for v in str(text).split(",") if v.strip()]


def _frac(text):
    text = str(text).strip()
    if "/" in text:
        a, b = text.split("/", 1)
        return float(a) / float(b)
    return float(text)


# name -> (default, parser, help)
COMMON = {
    "out": ("fracmin_out", str, "output directory"),
    "seed": (0, int, "seed for randomized checks"),
}

COMMANDS = {
    "perimeter": {
        "shape": ("square", str, "square | disk | rotated_square | path to a polygon CSV"),
        "s": (0.25, _frac, "fractional order in (0, 1/2)"),
        "method": ("boundary", str, "boundary (boundary integral) or grid (cell assembly)"),
        "h": (1 / 32, _frac, "cell size for the grid method"),
        "n": (64, int, "vertices of the disk polygon"),
        "scale": (1.0, float, "dilation factor of the shape"),
    },
    "curvature": {
        "shape": ("disk", str, "disk | square | gaussian | cos | path to a polygon or graph CSV"),
        "kind": ("auto", str, "auto | polygon | graph (for CSV input)"),
        "s": (0.25, _frac, "fractional order"),
        "points": (64, int, "number of boundary samples"),
        "n": (128, int, "vertices of the disk polygon"),
    },
    "minimize": {
        "problem": (None, str, "problem JSON file (overrides datum/grid)"),
        "datum": ("halfplane", str, "halfplane | sector | ring | oscillating | perturbed | disk | empty"),
        "angle": (math.pi / 2, float, "halfplane normal angle"),
        "offset": (0.0, float, "halfplane offset"),
        "delta": (0.1, float, "ring or pad thickness"),
        "M": (8.0, float, "oscillation height"),
        "radius": (0.5, float, "disk datum radius"),
        "grid": (32, int, "cells across the unit ball"),
        "R_ext": (None, float, "exterior truncation radius"),
        "r_cut": (None, float, "pair truncation radius"),
        "tails": (True, lambda v: str(v).lower() not in ("0", "false", "no"), "exact far tails"),
        "s": (0.25, _frac, "fractional order"),
    },
    "experiment": {
        "scenario": ("ring", str, "ring | sector | oscillating | perturbed | digitization | flatness | bv"),
        "s": (0.25, _frac, "fractional order"),
        "s_list": ("0.25,0.1,0.05", _floats, "orders for the sector scenario"),
        "delta": ("0.01", _floats, "ring thickness or pad heights (comma list)"),
        "M": ("8,16,32", _floats, "oscillation heights"),
        "grid": (64, int, "cells across the unit ball"),
        "h": (None, _frac, "cell size for strip and flatness scenarios"),
        "R": ("4,8,16", _floats, "radii for the flatness and bv scenarios"),
        "eps": ("1/16,1/32,1/64,1/128", _floats, "cell sizes for digitization"),
    },
    "sweep": {
        "limit": ("half", str, "half (s -> 1/2) or zero (s -> 0)"),
        "shape": ("square", str, "square | disk | two_squares"),
        "s_list": (None, _floats, "s grid (default depends on the limit)"),
        "scale": (1.0, float, "dilation factor"),
        "window": ("0,0,2", _floats, "window disk cx,cy,r for the s -> 0 limit"),
    },
    "verify": {
        "suite": ("all", str, "core | interaction | boundary | mincut | diagnostics | all (comma list)"),
    },
}


SUMMARIES = {
    "perimeter": "fractional perimeter of a shape (boundary integral or grid)",
    "curvature": "nonlocal mean curvature sampled along a boundary",
    "minimize": "exact discrete minimizer for an exterior datum",
    "experiment": "stickiness, digitization, flatness and BV scenarios",
    "sweep": "limits s -> 1/2 and s -> 0 with extrapolation",
    "verify": "built-in property suites; exit 2 if any check fails",
}


def _parser():
    p = argparse.ArgumentParser(prog="fracmin", description="Fractional perimeters and their exact "
                                "discrete minimizers.")
    sub = p.add_subparsers(dest="command", metavar="command")
    for cmd, table in COMMANDS.items():
        sp = sub.add_parser(cmd, help=SUMMARIES[cmd], description=SUMMARIES[cmd])
        if cmd in ("experiment", "sweep"):
            key = "scenario" if cmd == "experiment" else "limit"
            sp.add_argument(key, nargs="?", default=None, help=table[key][2])
        sp.add_argument("--config", default=None, help="JSON file with parameter values")
        for name, (default, _, helptext) in {**table, **COMMON}.items():
            if cmd in ("experiment", "sweep") and name in ("scenario", "limit"):
                continue
            sp.add_argument(f"--{name.replace('_', '-')}", dest=name, default=None,
                            help=f"{helptext} (default: {default})")
    return p


def resolve_config(cmd, args):
    """Defaults, then config file, then flags. Unknown file keys are rejected."""
    table = {**COMMANDS[cmd], **COMMON}
    cfg = {k: v[0] for k, v in table.items()}
    if args.get("config"):
        try:
            with open(args["config"]) as fh:
                filecfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args['config']}: {exc}") from None
        if not isinstance(filecfg, dict):
            raise UsageError("config file must hold a JSON object")
        unknown = sorted(set(filecfg) - set(table))
        if unknown:
            raise UsageError(f"unknown config keys for '{cmd}': {', '.join(unknown)}")
        cfg.update(filecfg)
    for k, v in args.items():
        if k in table and v is not None:
            cfg[k] = v
    out = {}
    for k, v in cfg.items():
        conv = table[k][1]
        try:
            out[k] = None if v is None else conv(v)
        except (TypeError, ValueError) as exc:
            raise UsageError(f"bad value for {k}: {v!r} ({exc})") from None
    out["command"] = cmd
    return out


# ---------------------------------------------------------------------------
# commands


def _load_polygon_shape(name, n=64, scale=1.0):
    from .boundary import PolyBoundary, regular_polygon, unit_square
    from .diagnostics import rotated_square
    if name == "square":
        P = unit_square()
    elif name == "disk":
        P = regular_polygon(n)
    elif name == "rotated_square":
        P = rotated_square()
    elif os.path.exists(name):
        P = PolyBoundary.from_csv(name)
    else:
        raise ProblemError(f"unknown shape {name!r}")
    return P.scaled(scale) if scale != 1.0 else P


def cmd_perimeter(cfg):
    from .boundary import per_s_boundary_integral
    from .interaction import set_perimeter
    P = _load_polygon_shape(cfg["shape"], cfg["n"], cfg["scale"])
    s = cfg["s"]
    summary = {"shape": cfg["shape"], "s": s, "method": cfg["method"],
               "classical_perimeter": P.perimeter(), "area": P.area()}
    if cfg["method"] == "boundary":
        summary["per_s"] = per_s_boundary_integral(P, s)
    elif cfg["method"] == "grid":
        from shapely import contains_xy
        from shapely.geometry import Polygon
        h = cfg["h"]
        V = np.asarray(P.vertices)
        lo = np.floor(V.min(axis=0) / h) * h - h
        hi = np.ceil(V.max(axis=0) / h) * h + h
        nx, ny = (np.rint((hi - lo) / h)).astype(int)
        xs = lo[0] + (np.arange(nx) + 0.5) * h
        ys = lo[1] + (np.arange(ny) + 0.5) * h
        X, Y = np.meshgrid(xs, ys)
        img = contains_xy(Polygon(V), X, Y)
        summary.update(h=h, cells=int(img.sum()), per_s=set_perimeter(img, h, s))
    else:
        raise ProblemError("method must be 'boundary' or 'grid'")
    return Report("perimeter", summary), EXIT_OK


def _load_curve(cfg):
    from .boundary import GraphBoundary, PolyBoundary, regular_polygon, unit_square
    name = cfg["shape"]
    if name == "disk":
        return regular_polygon(cfg["n"])
    if name == "square":
        return unit_square()
    if name == "gaussian":
        return GraphBoundary.from_function(lambda x: 0.2 * np.exp(-x * x), 6.0, 600)
    if name == "cos":
        return GraphBoundary.from_function(lambda x: 0.1 * np.cos(x), 3 * math.pi, 600)
    if os.path.exists(name):
        kind = cfg["kind"]
        if kind == "auto":
            data = np.loadtxt(name, delimiter=",", comments="#", ndmin=2)
            xs = data[:, 0]
            kind = "graph" if len(xs) > 2 and np.allclose(np.diff(xs), xs[1] - xs[0]) else "polygon"
        return GraphBoundary.from_csv(name) if kind == "graph" else PolyBoundary.from_csv(name)
    raise ProblemError(f"unknown shape {name!r}")


def cmd_curvature(cfg):
    from .boundary import curvature_sweep
    rep = _load_curve(cfg)
    rows = curvature_sweep(rep, cfg["s"], n=cfg["points"])
    H = [r[1] for r in rows]
    summary = {"shape": cfg["shape"], "s": cfg["s"], "samples": len(rows),
               "min": float(min(H)), "max": float(max(H))}
    return Report("curvature", summary, ["arclength", "H_s"], [list(r) for r in rows]), EXIT_OK


def _datum(cfg):
    from . import core
    kind = cfg["datum"]
    if kind == "halfplane":
        return core.Halfplane(cfg["angle"], cfg["offset"])
    if kind == "sector":
        return core.Sector()
    if kind == "ring":
        return core.RingCap(cfg["delta"])
    if kind == "oscillating":
        return core.OscillatingJM(cfg["M"])
    if kind == "perturbed":
        return core.PerturbedHalfplane(cfg["delta"])
    if kind == "disk":
        return core.Disk(cfg["radius"])
    if kind == "empty":
        return core.Empty()
    raise ProblemError(f"unknown datum {kind!r}")


def cmd_minimize(cfg):
    from .core import disk_problem, problem_from_json
    from .mincut import minimize
    if cfg["problem"]:
        pb = problem_from_json(cfg["problem"])
    else:
        pb = disk_problem(cfg["grid"], _datum(cfg), R_ext=cfg["R_ext"])
    res = minimize(pb, cfg["s"], r_cut=cfg["r_cut"], tails=cfg["tails"])
    summary = res.to_dict()
    summary["problem"] = pb.to_dict()
    return Report("minimize", summary, images={"mask": pb.mask_to_image(res.mask)}), EXIT_OK


def cmd_experiment(cfg):
    from . import experiments
    sc = cfg["scenario"]
    if sc == "ring":
        reports = [experiments.ring(d, cfg["s"], cfg["grid"]) for d in cfg["delta"]]
        if len(reports) == 1:
            return reports[0], EXIT_OK
        rows = [[r.summary["delta"], r.summary["occupied_free_cells"], r.summary["energy"]]
                for r in reports]
        imgs = {f"delta{r.summary['delta']:g}": r.images["mask"] for r in reports}
        return Report("ring", {"scenario": "ring", "s": cfg["s"], "grid": cfg["grid"]},
                      ["delta", "occupied_free_cells", "energy"], rows, imgs), EXIT_OK
    if sc == "sector":
        return experiments.sector(cfg["s_list"], cfg["grid"]), EXIT_OK
    if sc == "oscillating":
        return experiments.oscillating(cfg["M"], cfg["s"], cfg["h"] or 0.25), EXIT_OK
    if sc == "perturbed":
        return experiments.perturbed(cfg["delta"], cfg["s"], cfg["h"] or 0.125), EXIT_OK
    if sc == "digitization":
        from .diagnostics import digitization_experiment
        r = digitization_experiment(cfg["s"], cfg["eps"])
        rows = [[x["eps"], x["classical"], x["per_s"], x["per_s_exact"], x["error"]] for x in r["rows"]]
        summary = {k: v for k, v in r.items() if k != "rows"}
        return Report("digitization", summary,
                      ["eps", "classical", "per_s", "per_s_exact", "error"], rows), EXIT_OK
    if sc in ("flatness", "bv"):
        fn = experiments.flatness_study if sc == "flatness" else experiments.bv_study
        return fn(cfg["R"], cfg["s"], cfg["h"] or 0.5), EXIT_OK
    raise ProblemError(f"unknown scenario {sc!r}")


def cmd_sweep(cfg):
    from .asymptotics import shape_from_name, sweep_s_to_half, sweep_s_to_zero
    shape = shape_from_name(cfg["shape"], scale=cfg["scale"])
    if cfg["limit"] == "half":
        sl = cfg["s_list"] or [0.30, 0.40, 0.45, 0.475]
        sw = sweep_s_to_half(shape, sl, name=cfg["shape"])
        col = "(1-2s)Per_s"
    elif cfg["limit"] == "zero":
        sl = cfg["s_list"] or [0.10, 0.05, 0.02]
        if len(cfg["window"]) != 3:
            raise ProblemError("window needs cx,cy,r")
        sw = sweep_s_to_zero(shape, tuple(cfg["window"]), sl, name=cfg["shape"])
        col = "(2s/varpi)Per_s"
    else:
        raise ProblemError("limit must be 'half' or 'zero'")
    return Report(f"sweep_{cfg['limit']}", sw.to_dict(), ["s", "Per_s", col], sw.rows()), EXIT_OK


def cmd_verify(cfg):
    from .verify import run_suites
    names = [n.strip() for n in cfg["suite"].split(",") if n.strip()]
    results = run_suites(names, seed=cfg["seed"])
    rows, failed = [], 0
    for suite, checks in results.items():
        for name, ok, detail in checks:
            rows.append([suite, name, "pass" if ok else "FAIL", detail])
            failed += not ok
            print(f"[{'pass' if ok else 'FAIL'}] {suite}: {name} {detail}".rstrip())
    summary = {"suites": list(results), "checks": len(rows), "failed": failed}
    return Report("verify", summary, ["suite", "check", "result", "detail"], rows), \
        (EXIT_FAILED if failed else EXIT_OK)


HANDLERS = {
    "perimeter": cmd_perimeter,
    "curvature": cmd_curvature,
    "minimize": cmd_minimize,
    "experiment": cmd_experiment,
    "sweep": cmd_sweep,
    "verify": cmd_verify,
}


def run(argv=None):
    parser = _parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:  # argparse reports usage errors this way
        return EXIT_OK if exc.code == 0 else EXIT_INVALID
    if not ns.command:
        parser.print_usage(sys.stderr)
        return EXIT_INVALID
    cmd = ns.command
    try:
        cfg = resolve_config(cmd, vars(ns))
        report, code = HANDLERS[cmd](cfg)
        paths = report.write(cfg["out"], cfg)
    except (UsageError, ProblemError) as exc:
        print(f"fracmin {cmd}: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    print(json.dumps(report.to_dict(cfg)["summary"], indent=2, sort_keys=True, default=str))
    print("wrote " + ", ".join(paths), file=sys.stderr)
    return code


def main():
    sys.exit(run())

