"""Boundary-stickiness scenarios run through the exact minimizer."""

import math

import numpy as np

from ._report import Report
from .core import (GridSpec, Halfplane, OscillatingJM, PerturbedHalfplane, ProblemError, RingCap, Sector,
                   as_order, disk_problem, make_problem)
from .interaction import build_model, frac_perimeter
from .mincut import minimize

SECTOR_R_CAP = 16.0


def _occupied_exterior(problem):
    return int(np.count_nonzero(problem.ext_state == 1))


def ring(delta, s=0.25, grid=64):
    """Lower half-annulus of thickness ``delta`` around ``B_1``; counts occupied free cells."""
    s = as_order(s).s
    datum = RingCap(delta)
    pb = disk_problem(grid, datum, R_ext=max(4.0, 2.0 + delta))
    if _occupied_exterior(pb) == 0:
        raise ProblemError(f"grid {grid} is too coarse to resolve delta={delta:g}: "
                           "no exterior cell lies in the ring")
    model = build_model(pb, s)
    res = minimize(pb, s, model=model)
    P = pb.free_centers()
    empty = frac_perimeter(pb, np.zeros(pb.n_free, bool), model=model)["total"]
    lower = frac_perimeter(pb, P[:, 1] < 0, model=model)["total"]
    occ = int(res.mask.bits.sum())
    summary = {
        "scenario": "ring", "delta": delta, "s": s, "grid": grid, "h": pb.h,
        "occupied_free_cells": occ, "occupied_area": occ * pb.h**2,
        "energy": res.energy["total"], "energy_empty": empty, "energy_lower_half": lower,
        "exterior_cells_in_datum": _occupied_exterior(pb), "tail_bound": res.energy["tail_bound"],
    }
    return Report(f"ring_delta{delta:g}", summary, images={"mask": pb.mask_to_image(res.mask)})


def sector_R_ext(s):
    """Truncation radius for the sector scenario: grows like ``4^(1/(2s))``, capped."""
    return float(min(max(8.0, 4.0 ** (1.0 / (2.0 * s))), SECTOR_R_CAP))


def sector(s_list=(0.25, 0.1, 0.05), grid=48):
    """Quadrant datum outside ``B_1``; the measured set is compared with the empty trace."""
    rows, images = [], {}
    for s in s_list:
        s = as_order(s).s
        pb = disk_problem(grid, Sector(), R_ext=sector_R_ext(s))
        res = minimize(pb, s)
        bits = res.mask.bits
        P = pb.free_centers()
        quarter = (P[:, 0] > 0) & (P[:, 1] > 0)
        a = pb.h**2
        rows.append([s, pb.R_ext, int(bits.sum()), bits.sum() * a,
                     np.count_nonzero(bits != quarter) * a, res.energy["total"],
                     res.energy["tail_bound"]])
        images[f"s{s:g}"] = pb.mask_to_image(res.mask)
    cols = ["s", "R_ext", "occupied_cells", "symdiff_sector_trace", "symdiff_quarter_disk",
            "energy", "tail_bound"]
    summary = {"scenario": "sector", "grid": grid, "s_list": [r[0] for r in rows],
               "symdiff_sector_trace": [r[3] for r in rows]}
    return Report("sector", summary, cols, rows, images)


def _strip_problem(datum, Y, h, margin=4.0):
    nx = int(round(2.0 / h))
    ny = int(round(2.0 * Y / h))
    if abs(nx * h - 2.0) > 1e-9 or abs(ny * h - 2.0 * Y) > 1e-9:
        raise ProblemError(f"cell size {h:g} does not tile the strip of half-height {Y:g}")
    g = GridSpec((-1.0, -Y), h, nx, ny)
    return make_problem(g, {"kind": "rect", "bounds": [-1.0, 1.0, -Y, Y]}, datum,
                        math.hypot(1.0, Y) + margin)


def band_onsets(image, ys, M, h):
    """Heights where full rows of E^c (above) and of E (below) begin.

    ``y_plus`` is the lowest height such that every row between it and ``M``
    is empty; ``y_minus`` the same for full rows between ``-M`` and it.
    """
    empty = ~image.any(axis=1)
    full = image.all(axis=1)
    y_plus = y_minus = None
    for k in np.nonzero((ys > 0) & (ys <= M))[0][::-1]:
        if not empty[k]:
            break
        y_plus = ys[k] - h / 2
    for k in np.nonzero((ys < 0) & (ys >= -M))[0]:
        if not full[k]:
            break
        y_minus = -(ys[k] + h / 2)
    return y_plus, y_minus


def oscillating(M_list=(8, 16, 32), s=0.25, h=0.25):
    """Oscillating data on the strip; fits band onset against ``M`` in log-log."""
    s = as_order(s).s
    alpha = (1 + 2 * s) / (2 + 2 * s)
    rows, images = [], {}
    for M in M_list:
        if h > M**alpha / 4:
            raise ProblemError(f"cell size {h:g} cannot resolve the band scale M^{alpha:.3f} "
                               f"= {M**alpha:.3g} at M={M:g}")
        pb = _strip_problem(OscillatingJM(M), M + 4.0, h)
        res = minimize(pb, s)
        img = pb.mask_to_image(res.mask)
        ys = pb.grid.centers()[1][:, 0]
        yp, ym = band_onsets(img, ys, M, h)
        rows.append([M, yp, ym, res.energy["total"], res.energy["tail_bound"]])
        images[f"M{M:g}"] = img
    summary = {"scenario": "oscillating", "s": s, "h": h, "target_exponent": alpha}
    ok = all(r[1] and r[2] for r in rows)
    summary["bands_detected"] = bool(ok)
    if ok and len(rows) >= 2:
        logM = np.log([r[0] for r in rows])
        summary["exponent_plus"] = float(np.polyfit(logM, np.log([r[1] for r in rows]), 1)[0])
        summary["exponent_minus"] = float(np.polyfit(logM, np.log([r[2] for r in rows]), 1)[0])
        mean = [0.5 * (r[1] + r[2]) for r in rows]
        summary["exponent"] = float(np.polyfit(logM, np.log(mean), 1)[0])
    cols = ["M", "y_plus", "y_minus", "energy", "tail_bound"]
    return Report("oscillating", summary, cols, rows, images)


def wall_heights(image, ys, h):
    """Top of the run of E cells starting at ``y = 0`` in the two wall columns, and over full rows."""
    def run(col):
        top = 0.0
        for k in np.nonzero(ys > 0)[0]:
            if not col[k]:
                break
            top = ys[k] + h / 2
        return top

    return run(image[:, 0]), run(image[:, -1]), run(image.all(axis=1))


def perturbed(delta_list=(0.25, 0.5, 1.0), s=0.25, h=0.125, Y=4.0):
    """Halfplane with two pads; reports how high E climbs along the walls."""
    s = as_order(s).s
    rows, images = [], {}
    for d in delta_list:
        if d < h:
            raise ProblemError(f"cell size {h:g} cannot resolve pads of height {d:g}")
        pb = _strip_problem(PerturbedHalfplane(d), Y, h)
        res = minimize(pb, s)
        img = pb.mask_to_image(res.mask)
        ys = pb.grid.centers()[1][:, 0]
        left, right, full = wall_heights(img, ys, h)
        rows.append([d, left, right, full, res.energy["total"], res.energy["tail_bound"]])
        images[f"delta{d:g}"] = img
    cols = ["delta", "wall_left", "wall_right", "full_rows", "energy", "tail_bound"]
    summary = {"scenario": "perturbed", "s": s, "h": h,
               "max_wall_height": [max(r[1], r[2]) for r in rows]}
    return Report("perturbed", summary, cols, rows, images)


def _halfplane_minimizer(R, s, h, datum):
    n = int(round(2 * R / h))
    if abs(n * h - 2 * R) > 1e-9:
        raise ProblemError(f"cell size {h:g} does not tile the ball of radius {R:g}")
    pb = disk_problem(n, datum, radius=R)
    res = minimize(pb, s)
    return pb, res, pb.mask_to_image(res.mask)


def flatness_study(R_list=(4, 8, 16), s=0.25, h=0.5, datum=None):
    """Flatness certificate in ``B_1`` of minimizers in ``B_R`` at a fixed cell size."""
    from .diagnostics import flatness_certificate
    s = as_order(s).s
    datum = datum if datum is not None else Halfplane()
    rows, images = [], {}
    for R in R_list:
        pb, res, img = _halfplane_minimizer(R, s, h, datum)
        cert = flatness_certificate(img, h, pb.grid.origin, window=(0.0, 0.0, 1.0))
        rows.append([R, cert.symdiff_area, cert.mu, cert.angle, cert.offset])
        images[f"R{R:g}"] = img
    areas = [r[1] for r in rows]
    summary = {"scenario": "flatness", "s": s, "h": h, "datum": datum.to_dict(),
               "nonincreasing": all(b <= a + 1e-12 for a, b in zip(areas, areas[1:])),
               "all_zero": all(a == 0 for a in areas)}
    if all(a > 0 for a in areas) and len(areas) >= 2:
        summary["slope"] = float(np.polyfit(np.log(R_list), np.log(areas), 1)[0])
    return Report("flatness", summary, ["R", "symdiff_area", "mu", "angle", "offset"], rows, images)


def bv_study(R_list=(4, 8, 16), s=0.25, h=0.5, delta=0.25):
    """Classical perimeter in ``B_{R/2}`` divided by ``R`` for halfplane-type data."""
    from .diagnostics import classical_perimeter
    s = as_order(s).s
    rows, images = [], {}
    for name, datum in (("halfplane", Halfplane()), ("perturbed", PerturbedHalfplane(delta))):
        for R in R_list:
            pb, res, img = _halfplane_minimizer(R, s, h, datum)
            per = classical_perimeter(img, h, pb.grid.origin, window=(0.0, 0.0, R / 2), pad=None)
            rows.append([name, R, per, per / R])
            images[f"{name}_R{R:g}"] = img
    spread = {}
    for name in ("halfplane", "perturbed"):
        r = [row[3] for row in rows if row[0] == name]
        spread[name] = max(r) / min(r) if min(r) > 0 else float("inf")
    summary = {"scenario": "bv", "s": s, "h": h, "ratio_spread": spread}
    return Report("bv", summary, ["datum", "R", "perimeter", "perimeter_over_R"], rows, images)


SCENARIOS = {"ring": ring, "sector": sector, "oscillating": oscillating, "perturbed": perturbed,
             "flatness": flatness_study, "bv": bv_study}


def experiment_stickiness(scenario, **params):
    """Run a named scenario (``ring``, ``sector``, ``oscillating``, ``perturbed``)."""
    try:
        fn = SCENARIOS[scenario]
    except KeyError:
        raise ProblemError(f"unknown scenario {scenario!r}; choose from {sorted(SCENARIOS)}") from None
    return fn(**params)
