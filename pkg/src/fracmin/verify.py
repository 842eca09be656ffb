"""Self-test suites behind ``fracmin verify``.

Each check returns ``(name, passed, detail)``. Suites are small enough to run
in seconds to a minute; the seed fixes every random draw.
"""

import math
import os
from contextlib import contextmanager

import numpy as np

from . import core, diagnostics, interaction
from .boundary import GraphBoundary, nmc, regular_polygon
from .core import FractionalOrder, GridSpec, ProblemError, geometric_constants, make_problem
from .interaction import cell_pair_weight, offset_weights, sobolev_identity_gap
from .mincut import build_network, exhaustive_minimum, minimize


@contextmanager
def _threads(n):
    old = os.environ.get("FRACMIN_THREADS")
    os.environ["FRACMIN_THREADS"] = str(n)
    try:
        yield
    finally:
        if old is None:
            os.environ.pop("FRACMIN_THREADS", None)
        else:
            os.environ["FRACMIN_THREADS"] = old


def _check(name, ok, detail=""):
    return (name, bool(ok), str(detail))


# ---------------------------------------------------------------------------


def suite_core(rng):
    out = []
    bad = []
    for s in (0.0, 0.5, -0.1, 0.7, float("nan")):
        try:
            FractionalOrder(s)
            bad.append(s)
        except ProblemError:
            pass
    ok_inside = all(FractionalOrder(s).s == s for s in rng.uniform(1e-6, 0.5 - 1e-6, 50))
    out.append(_check("order domain", not bad and ok_inside, f"accepted {bad}"))
    err = max(abs(geometric_constants(n)["kappa_n"] * n - geometric_constants(n)["varpi_n"])
              for n in range(1, 11))
    out.append(_check("kappa_n * n = varpi_n", err < 1e-12, f"max err {err:.2e}"))
    pts = rng.uniform(-5, 5, (10_000, 2))
    x, y = pts[:, 0], pts[:, 1]
    r2 = x * x + y * y
    preds = {
        "halfplane": (core.Halfplane(), y < 0),
        "sector": (core.Sector(), (x > 0) & (y > 0) & (r2 >= 1)),
        "ringcap": (core.RingCap(0.3), (r2 >= 1) & (r2 < 1.69) & (y < 0)),
        "oscillating": (core.OscillatingJM(2.0),
                        ((x >= 1) & (y < 2)) | ((x <= -1) & (y < -2)) | ((abs(x) < 1) & (y < 0))),
        "perturbed": (core.PerturbedHalfplane(0.5),
                      (y < 0) | ((abs(x) >= 2) & (abs(x) <= 3) & (y >= 0) & (y <= 0.5))),
    }
    for name, (datum, truth) in preds.items():
        m1, m2 = datum.membership(pts), datum.membership(pts)
        out.append(_check(f"membership {name}", np.array_equal(m1, truth) and np.array_equal(m1, m2)))
    return out


def suite_interaction(rng):
    out = []
    s = 0.25
    A, B = (0.0, 0.0, 1.0), (1.0, 0.0, 1.0)
    out.append(_check("pair weight symmetry",
                      cell_pair_weight(A, B, s) == cell_pair_weight(B, A, s)))
    errs = []
    for _ in range(6):
        dx, dy = rng.integers(-6, 7, 2)
        if dx == 0 and dy == 0:
            continue
        z = rng.uniform(-3, 3, 2)
        direct = cell_pair_weight((z[0], z[1], 1.0), (z[0] + dx, z[1] + dy, 1.0), s)
        errs.append(abs(direct / offset_weights(np.array([dx]), np.array([dy]), s)[0] - 1))
    out.append(_check("translation invariance", max(errs) < 1e-6, f"max rel {max(errs):.1e}"))
    w1 = cell_pair_weight((0, 0, 1.0), (2, 1, 1.0), s)
    w2 = cell_pair_weight((0, 0, 2.0), (4, 2, 2.0), s)
    out.append(_check("scaling law", abs(w2 / w1 / 2 ** (2 - 2 * s) - 1) < 1e-7))
    ws = [offset_weights(np.array([2]), np.array([1]), t)[0] for t in np.linspace(0.05, 0.45, 9)]
    out.append(_check("monotone in s", all(a > b for a, b in zip(ws, ws[1:]))))
    img = rng.random((16, 16)) < 0.5
    gap = sobolev_identity_gap(img, s) / (2 * interaction.set_perimeter(img, 1.0, s))
    out.append(_check("Sobolev identity", gap <= 1e-10, f"rel gap {gap:.1e}"))
    return out


def _small_problem(rng, n=3):
    g = GridSpec((0.0, 0.0), 1.0, n, n)
    ext = GridSpec((-4.0, -4.0), 1.0, n + 8, n + 8)
    em = rng.random((n + 8, n + 8)) < 0.5
    return make_problem(g, {"kind": "rect", "bounds": [0, n, 0, n]}, core.ExplicitMask(ext, em),
                        R_ext=n + 1.5)


def suite_mincut(rng):
    out = []
    ok = True
    for k in range(4):
        s = (0.1, 0.25, 0.4, 0.25)[k]
        pb = _small_problem(rng)
        res = minimize(pb, s)
        best, arg = exhaustive_minimum(build_network(pb, interaction.build_model(pb, s)))
        ok &= res.maxflow_int == best and any(np.array_equal(res.mask.bits, m) for m in arg)
    out.append(_check("exhaustive optimality", ok))
    pb = _small_problem(rng, 4)
    r1 = minimize(pb, 0.25, tails=False)
    r2 = minimize(pb.complement(), 0.25, tails=False)
    e_swap = interaction.frac_perimeter(pb, ~r2.mask.bits, 0.25,
                                        model=interaction.build_model(pb, 0.25, tails=False))
    tol = 1e-9 * max(1.0, r1.energy["total"])
    out.append(_check("complement duality",
                      abs(r1.energy["total"] - r2.energy["total"]) <= tol
                      and abs(e_swap["total"] - r1.energy["total"]) <= tol))
    dp = core.disk_problem(20, core.Halfplane(angle=math.pi / 2 + 0.3), R_ext=4.0)
    with _threads(1):
        a = minimize(dp, 0.25)
        ma = interaction.build_model(dp, 0.25)
    with _threads(4):
        b = minimize(dp, 0.25)
        mb = interaction.build_model(dp, 0.25)
    same = (np.array_equal(a.mask.bits, b.mask.bits) and a.energy == b.energy
            and np.array_equal(ma.a, mb.a) and np.array_equal(ma.b, mb.b))
    out.append(_check("determinism 1 vs 4 workers", same))
    return out


def suite_boundary(rng):
    out = []
    g = GraphBoundary(np.linspace(-4, 4, 81), np.zeros(81))
    worst = max(abs(nmc(g, x, s)) for s in (0.1, 0.25, 0.4) for x in rng.uniform(-2, 2, 4))
    out.append(_check("flat boundary has zero curvature", worst < 1e-6, f"max {worst:.1e}"))
    P = regular_polygon(64)
    p = P.midpoint(0)
    h1 = nmc(P, p, 0.25)
    h2 = nmc(P.scaled(2.0), 2.0 * p, 0.25)
    out.append(_check("curvature scaling", abs(h2 / h1 / 2 ** -0.5 - 1) < 1e-3))
    return out


def suite_diagnostics(rng):
    out = []
    h = 1 / 16
    img = rng.random((32, 32)) < 0.5
    origin = (-1.0, -1.0)
    ok_int, ok_anti, ok_tel = True, True, True
    for d in [(1, 0), (0, 1), (1, 1), (2, 1), (-1, 3)]:
        P = diagnostics.crossing_profile(img, h, d, origin)
        M = diagnostics.crossing_profile(img, h, (-d[0], -d[1]), origin)
        ok_int &= P.I_plus.dtype.kind == "i" and (P.I_plus >= 0).all() and (P.I_minus >= 0).all()
        ok_anti &= P.Phi_plus == M.Phi_minus and P.Phi_minus == M.Phi_plus
        ok_tel &= np.array_equal(P.I_plus - P.I_minus, P.last.astype(int) - P.first.astype(int))
    out.append(_check("crossing counts are integers", ok_int))
    out.append(_check("Phi_+(-v) = Phi_-(v)", ok_anti))
    out.append(_check("transitions telescope", ok_tel))
    # monotone reconstruction on lines without entries
    X, Y = np.meshgrid(origin[0] + (np.arange(32) + 0.5) * h, origin[1] + (np.arange(32) + 0.5) * h)
    wavy = Y < 0.2 * np.sin(3 * X)
    wavy[rng.integers(0, 32, 5), rng.integers(0, 32, 5)] ^= True
    ok = True
    for d in [(0, 1), (1, 0)]:
        P = diagnostics.crossing_profile(wavy, h, d, origin)
        seqs = diagnostics.line_sequences(wavy, h, d, origin)
        keys = sorted(seqs)
        for key, ip in zip(keys, P.I_plus):
            if ip == 0:
                ok &= bool(np.all(np.diff(seqs[key].astype(int)) <= 0))
    out.append(_check("no entries implies nonincreasing", ok))
    per = diagnostics.classical_perimeter(img, h, origin, window=(0, 0, 1), pad=None)
    cp = diagnostics.crossing_profile(img, h, (1, 0), origin)
    cq = diagnostics.crossing_profile(img, h, (0, 1), origin)
    total = h * (cp.I_plus.sum() + cp.I_minus.sum() + cq.I_plus.sum() + cq.I_minus.sum())
    out.append(_check("edge count equals crossing count", abs(per - total) < 1e-12))
    return out


SUITES = {
    "core": suite_core,
    "interaction": suite_interaction,
    "boundary": suite_boundary,
    "mincut": suite_mincut,
    "diagnostics": suite_diagnostics,
}


def run_suites(names=("all",), seed=0):
    if "all" in names:
        names = list(SUITES)
    results = {}
    for name in names:
        if name not in SUITES:
            raise ProblemError(f"unknown suite {name!r}; choose from {sorted(SUITES)} or 'all'")
        results[name] = SUITES[name](np.random.default_rng(seed))
    return results
