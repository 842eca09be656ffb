"""Limits of the fractional perimeter as ``s -> 1/2`` and ``s -> 0`` on bounded sets."""

from dataclasses import dataclass, field

import numpy as np

from .boundary import PolyBoundary, per_s_boundary_integral, rectangle, regular_polygon
from .core import ProblemError, as_order, geometric_constants
from .interaction import set_perimeter

KAPPA_1 = geometric_constants(1)["kappa_n"]
VARPI_2 = geometric_constants(2)["varpi_n"]


@dataclass
class LimitSweep:
    """Values along an ``s`` grid with a two-point linear extrapolation.

    ``uncertainty`` is the difference between the extrapolated value and the
    last computed one.
    """

    descriptor: str
    s: list
    per_s: list
    scaled: list
    limit: float
    uncertainty: float
    target: float
    kind: str
    extra: dict = field(default_factory=dict)

    @property
    def rel_error(self):
        return abs(self.limit - self.target) / abs(self.target) if self.target else abs(self.limit)

    def rows(self):
        return [[s, p, c] for s, p, c in zip(self.s, self.per_s, self.scaled)]

    def to_dict(self):
        return {"set": self.descriptor, "kind": self.kind, "s": list(self.s),
                "per_s": list(self.per_s), "scaled": list(self.scaled), "limit": self.limit,
                "uncertainty": self.uncertainty, "target": self.target,
                "rel_error": self.rel_error, **self.extra}


def _extrapolate(x, y):
    """Line through the last two points ``(x, y)`` evaluated at ``x = 0``."""
    if len(x) < 2:
        return y[-1], float("nan")
    x1, x2 = x[-2], x[-1]
    y1, y2 = y[-2], y[-1]
    lim = y2 - x2 * (y1 - y2) / (x1 - x2)
    return float(lim), float(abs(lim - y2))


def shape_from_name(name, **kw):
    """Named test sets: ``square``, ``disk`` (64-gon), ``two_squares`` (mask)."""
    lam = float(kw.get("scale", 1.0))
    if name == "square":
        return rectangle(0.0, lam, 0.0, lam)
    if name == "disk":
        return regular_polygon(int(kw.get("n", 64)), radius=lam)
    if name == "two_squares":
        h = float(kw.get("h", 1 / 16))
        k = int(round(1.0 / h))
        img = np.zeros((k, 3 * k), dtype=bool)
        img[:, :k] = True
        img[:, 2 * k:] = True
        return {"image": img, "h": h, "origin": (-1.5, -0.5)}
    raise ProblemError(f"unknown shape {name!r}")


def _per_s(shape, s):
    if isinstance(shape, PolyBoundary):
        return per_s_boundary_integral(shape, s)
    if isinstance(shape, dict):
        return set_perimeter(shape["image"], shape["h"], s)
    raise ProblemError("shape must be a polygon or a bounded mask dict {image, h}")


def _classical(shape):
    if isinstance(shape, PolyBoundary):
        return shape.perimeter()
    from .diagnostics import classical_perimeter
    return classical_perimeter(shape["image"], shape["h"])


def _area(shape):
    if isinstance(shape, PolyBoundary):
        return shape.area()
    return float(np.count_nonzero(shape["image"])) * shape["h"] ** 2


def _check_bounded(shape):
    if not isinstance(shape, (PolyBoundary, dict)):
        raise ProblemError("only bounded sets (polygons or finite masks) are supported")


def sweep_s_to_half(shape, s_list=(0.30, 0.40, 0.45, 0.475), name="set"):
    """``(1 - 2s) Per_s(E)`` on an ascending ``s`` grid, extrapolated to ``s = 1/2``."""
    _check_bounded(shape)
    s_list = [as_order(s).s for s in s_list]
    if any(b <= a for a, b in zip(s_list, s_list[1:])):
        raise ProblemError("s grid must be strictly ascending toward 1/2")
    per = [_per_s(shape, s) for s in s_list]
    scaled = [(1 - 2 * s) * p for s, p in zip(s_list, per)]
    lim, unc = _extrapolate([0.5 - s for s in s_list], scaled)
    target = KAPPA_1 * _classical(shape)
    return LimitSweep(name, s_list, per, scaled, lim, unc, target, "half")


def _inside_window(shape, window):
    cx, cy, r = window
    if isinstance(shape, PolyBoundary):
        pts = shape.vertices
    else:
        img = np.asarray(shape["image"], dtype=bool)
        iy, ix = np.nonzero(img)
        h = shape["h"]
        ox, oy = shape.get("origin", (0.0, 0.0))
        corners = [(ox + (ix + a) * h, oy + (iy + b) * h) for a in (0, 1) for b in (0, 1)]
        pts = np.array([[x, y] for cx_, cy_ in corners for x, y in zip(cx_, cy_)])
        if len(pts) == 0:
            return True
    d = np.hypot(pts[:, 0] - cx, pts[:, 1] - cy)
    return bool(d.max() <= r + 1e-12)


def sweep_s_to_zero(shape, window=(0.0, 0.0, 2.0), s_list=(0.10, 0.05, 0.02), name="set"):
    """``(2s / varpi_2) Per_s(E, B)`` on a descending ``s`` grid, extrapolated to ``s = 0``.

    For ``E`` inside the window ``B`` every interaction involves a point of
    ``B``, so the relative perimeter equals the whole-plane one and no
    truncation of the exterior is needed.
    """
    s_list = [as_order(s).s for s in s_list]
    if any(b >= a for a, b in zip(s_list, s_list[1:])):
        raise ProblemError("s grid must be strictly descending toward 0")
    if isinstance(shape, dict) and not np.asarray(shape["image"]).any():
        zeros = [0.0] * len(s_list)
        return LimitSweep(name, s_list, zeros, zeros, 0.0, 0.0, 0.0, "zero")
    _check_bounded(shape)
    if not _inside_window(shape, window):
        raise ProblemError("the set must lie inside the window for the bounded-set limit")
    per = [_per_s(shape, s) for s in s_list]
    scaled = [2 * s / VARPI_2 * p for s, p in zip(s_list, per)]
    lim, unc = _extrapolate(s_list, scaled)
    return LimitSweep(name, s_list, per, scaled, lim, unc, _area(shape), "zero",
                      {"window": list(window)})


def s_ratio_check(shape, s, lam):
    """``Per_s(lam E) / (lam^(2-2s) Per_s(E)) - 1`` for a polygon."""
    if not isinstance(shape, PolyBoundary):
        raise ProblemError("scaling check expects a polygon")
    a = per_s_boundary_integral(shape, s)
    b = per_s_boundary_integral(shape.scaled(lam), s)
    return b / (lam ** (2 - 2 * s) * a) - 1.0


__all__ = ["LimitSweep", "sweep_s_to_half", "sweep_s_to_zero", "shape_from_name", "s_ratio_check",
           "KAPPA_1", "VARPI_2"]
