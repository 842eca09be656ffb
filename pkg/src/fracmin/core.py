"""Sets, grids, exterior data and the fractional order.

Everything here is plain data plus validation. A cell belongs to a set when
its center does; the numerical modules work with the true cell geometry.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np

DIM = 2


class ProblemError(ValueError):
    """Raised when a problem, grid or datum is malformed."""


@dataclass(frozen=True)
class FractionalOrder:
    """The fractional parameter ``s``, restricted to the open interval (0, 1/2)."""

    s: float

    def __post_init__(self):
        s = float(self.s)
        if not (math.isfinite(s) and 0.0 < s < 0.5):
            raise ProblemError(f"fractional order must lie in (0, 1/2), got {self.s!r}")
        object.__setattr__(self, "s", s)

    @property
    def kernel_exponent(self):
        return DIM + 2.0 * self.s

    def __float__(self):
        return self.s


def as_order(s):
    return s if isinstance(s, FractionalOrder) else FractionalOrder(s)


def geometric_constants(n):
    """Volume ``kappa_n`` of the unit n-ball and area ``varpi_n`` of the unit sphere."""
    n = int(n)
    if n < 1:
        raise ProblemError("dimension must be >= 1")
    varpi = 2.0 * math.pi ** (n / 2.0) / math.gamma(n / 2.0)
    return {"kappa_n": varpi / n, "varpi_n": varpi}


@dataclass(frozen=True)
class GridSpec:
    """Axis-aligned grid of ``nx * ny`` closed square cells of side ``h``."""

    origin: tuple
    h: float
    nx: int
    ny: int

    def __post_init__(self):
        ox, oy = (float(v) for v in self.origin)
        if not (self.h > 0 and math.isfinite(self.h)):
            raise ProblemError("cell side h must be positive")
        if int(self.nx) < 1 or int(self.ny) < 1:
            raise ProblemError("grid needs at least one cell in each direction")
        object.__setattr__(self, "origin", (ox, oy))
        object.__setattr__(self, "h", float(self.h))
        object.__setattr__(self, "nx", int(self.nx))
        object.__setattr__(self, "ny", int(self.ny))

    @classmethod
    def covering(cls, xmin, xmax, ymin, ymax, h):
        nx = max(1, int(round((xmax - xmin) / h)))
        ny = max(1, int(round((ymax - ymin) / h)))
        return cls((xmin, ymin), h, nx, ny)

    @property
    def shape(self):
        # arrays are indexed [iy, ix]
        return (self.ny, self.nx)

    @property
    def bounds(self):
        ox, oy = self.origin
        return ox, ox + self.nx * self.h, oy, oy + self.ny * self.h

    def centers(self):
        ox, oy = self.origin
        xs = ox + (np.arange(self.nx) + 0.5) * self.h
        ys = oy + (np.arange(self.ny) + 0.5) * self.h
        return np.meshgrid(xs, ys)

    def center_of(self, ix, iy):
        ox, oy = self.origin
        return ox + (np.asarray(ix) + 0.5) * self.h, oy + (np.asarray(iy) + 0.5) * self.h

    def index_of(self, x, y):
        ox, oy = self.origin
        return (np.floor((np.asarray(x) - ox) / self.h).astype(int),
                np.floor((np.asarray(y) - oy) / self.h).astype(int))

    def to_dict(self):
        return {"origin": list(self.origin), "h": self.h, "nx": self.nx, "ny": self.ny}


# ---------------------------------------------------------------------------
# exterior data


class ExteriorDatum:
    """A set of the plane given by a membership predicate.

    Subclasses implement :meth:`membership` on arrays of shape ``(..., 2)``.
    ``radius`` is the radius of a centered ball containing the set, or ``None``
    for unbounded data.
    """

    kind = "abstract"
    radius = None

    def membership(self, pts):
        raise NotImplementedError

    def params(self):
        return {}

    def to_dict(self):
        return {"kind": self.kind, **self.params()}

    def complement(self):
        return Complement(self)

    def __eq__(self, other):
        return type(self) is type(other) and self.to_dict() == other.to_dict()

    def __hash__(self):
        return hash(json.dumps(self.to_dict(), sort_keys=True, default=str))

    def __repr__(self):
        args = ", ".join(f"{k}={v!r}" for k, v in self.params().items())
        return f"{type(self).__name__}({args})"


def _xy(pts):
    pts = np.asarray(pts, dtype=float)
    return pts[..., 0], pts[..., 1]


class Empty(ExteriorDatum):
    kind = "empty"
    radius = 0.0

    def membership(self, pts):
        return np.zeros(np.shape(pts)[:-1], dtype=bool)


class Halfplane(ExteriorDatum):
    """``{x : x . nu < offset}`` with outward normal ``nu = (cos angle, sin angle)``.

    The default is the lower halfplane ``{y < 0}``.
    """

    kind = "halfplane"

    def __init__(self, angle=math.pi / 2, offset=0.0):
        self.angle = float(angle)
        self.offset = float(offset)

    @property
    def normal(self):
        return np.array([math.cos(self.angle), math.sin(self.angle)])

    def membership(self, pts):
        x, y = _xy(pts)
        nu = self.normal
        return x * nu[0] + y * nu[1] < self.offset

    def params(self):
        return {"angle": self.angle, "offset": self.offset}


class Sector(ExteriorDatum):
    """First quadrant with the unit disk removed."""

    kind = "sector"

    def membership(self, pts):
        x, y = _xy(pts)
        return (x > 0) & (y > 0) & (x * x + y * y >= 1.0)


class RingCap(ExteriorDatum):
    """Lower half of the annulus ``B_{1+delta} minus B_1``."""

    kind = "ringcap"

    def __init__(self, delta):
        if not delta > 0:
            raise ProblemError("ring thickness must be positive")
        self.delta = float(delta)
        self.radius = 1.0 + self.delta

    def membership(self, pts):
        x, y = _xy(pts)
        r2 = x * x + y * y
        return (r2 >= 1.0) & (r2 < (1.0 + self.delta) ** 2) & (y < 0)

    def params(self):
        return {"delta": self.delta}


class OscillatingJM(ExteriorDatum):
    """Right side filled below ``M``, left side filled below ``-M``.

    Inside the strip ``|x| < 1`` (only reached by the truncation caps) the set
    is the lower halfplane.
    """

    kind = "oscillating"

    def __init__(self, M):
        if not M > 1:
            raise ProblemError("oscillation height M must exceed 1")
        self.M = float(M)

    def membership(self, pts):
        x, y = _xy(pts)
        right = (x >= 1.0) & (y < self.M)
        left = (x <= -1.0) & (y < -self.M)
        mid = (np.abs(x) < 1.0) & (y < 0.0)
        return right | left | mid

    def params(self):
        return {"M": self.M}


class PerturbedHalfplane(ExteriorDatum):
    """Lower halfplane plus the pads ``[-3,-2] x [0,delta]`` and ``[2,3] x [0,delta]``."""

    kind = "perturbed"

    def __init__(self, delta):
        if not delta > 0:
            raise ProblemError("pad height must be positive")
        self.delta = float(delta)

    def membership(self, pts):
        x, y = _xy(pts)
        pad = (np.abs(x) >= 2.0) & (np.abs(x) <= 3.0) & (y >= 0.0) & (y <= self.delta)
        return (y < 0.0) | pad

    def params(self):
        return {"delta": self.delta}


class Disk(ExteriorDatum):
    kind = "disk"

    def __init__(self, radius, center=(0.0, 0.0)):
        self.r = float(radius)
        self.center = (float(center[0]), float(center[1]))
        self.radius = math.hypot(*self.center) + self.r

    def membership(self, pts):
        x, y = _xy(pts)
        return (x - self.center[0]) ** 2 + (y - self.center[1]) ** 2 < self.r ** 2

    def params(self):
        return {"radius": self.r, "center": list(self.center)}


class ExplicitMask(ExteriorDatum):
    """Cells of a grid marked in ``mask`` (indexed ``[iy, ix]``); empty elsewhere."""

    kind = "mask"

    def __init__(self, grid, mask):
        self.grid = grid if isinstance(grid, GridSpec) else GridSpec(**grid)
        self.mask = np.asarray(mask, dtype=bool)
        if self.mask.shape != self.grid.shape:
            raise ProblemError("mask shape does not match its grid")
        self.mask.setflags(write=False)
        x0, x1, y0, y1 = self.grid.bounds
        self.radius = max(math.hypot(a, b) for a in (x0, x1) for b in (y0, y1))

    def membership(self, pts):
        x, y = _xy(pts)
        g = self.grid
        x0, x1, y0, y1 = g.bounds
        # far (or non-finite) points are decided before any integer cast
        inside = (x >= x0) & (x < x1) & (y >= y0) & (y < y1)
        out = np.zeros(np.shape(x), dtype=bool)
        ix, iy = g.index_of(x[inside], y[inside])
        ix = np.clip(ix, 0, g.nx - 1)
        iy = np.clip(iy, 0, g.ny - 1)
        out[inside] = self.mask[iy, ix]
        return out

    def params(self):
        return {"grid": self.grid.to_dict(), "mask": self.mask.astype(int).tolist()}


class Complement(ExteriorDatum):
    kind = "complement"

    def __init__(self, base):
        self.base = base

    def membership(self, pts):
        return ~self.base.membership(pts)

    def complement(self):
        return self.base

    def params(self):
        return {"base": self.base.to_dict()}


_KINDS = {
    cls.kind: cls
    for cls in (Empty, Halfplane, Sector, RingCap, OscillatingJM, PerturbedHalfplane,
                Disk, ExplicitMask, Complement)
}


def datum_from_dict(d):
    d = dict(d)
    kind = d.pop("kind")
    if kind not in _KINDS:
        raise ProblemError(f"unknown exterior kind {kind!r}")
    if kind == "complement":
        return Complement(datum_from_dict(d["base"]))
    if kind == "mask":
        return ExplicitMask(GridSpec(**d["grid"]), np.array(d["mask"], dtype=bool))
    return _KINDS[kind](**d)


# ---------------------------------------------------------------------------
# problems


def _omega_region(grid, omega_desc):
    """Boolean free-cell array on ``grid`` plus the reference center of the region."""
    if isinstance(omega_desc, np.ndarray):
        omega_desc = {"kind": "mask", "cells": omega_desc}
    kind = omega_desc["kind"]
    cx, cy = grid.centers()
    x0, x1, y0, y1 = grid.bounds
    if kind == "disk":
        c = np.asarray(omega_desc.get("center", (0.0, 0.0)), dtype=float)
        r = float(omega_desc["radius"])
        if c[0] - r < x0 - 1e-12 or c[0] + r > x1 + 1e-12 or c[1] - r < y0 - 1e-12 or c[1] + r > y1 + 1e-12:
            raise ProblemError("omega disk is not contained in the grid")
        omega = (cx - c[0]) ** 2 + (cy - c[1]) ** 2 < r * r
        center = c
    elif kind == "rect":
        a, b, c_, d = (float(v) for v in omega_desc["bounds"])
        if a < x0 - 1e-12 or b > x1 + 1e-12 or c_ < y0 - 1e-12 or d > y1 + 1e-12:
            raise ProblemError("omega rectangle is not contained in the grid")
        omega = (cx > a) & (cx < b) & (cy > c_) & (cy < d)
        center = np.array([(a + b) / 2, (c_ + d) / 2])
    elif kind == "mask":
        omega = np.asarray(omega_desc["cells"], dtype=bool)
        if omega.shape != grid.shape:
            raise ProblemError("omega mask is not contained in the grid")
        center = np.asarray(omega_desc.get("center", ((x0 + x1) / 2, (y0 + y1) / 2)), dtype=float)
    else:
        raise ProblemError(f"unknown omega kind {kind!r}")
    if not omega.any():
        raise ProblemError("omega contains no cells")
    return omega, center


@dataclass(frozen=True, eq=False)
class PixelProblem:
    """A free region of grid cells with fixed exterior occupancy around it.

    The fixed cells live on an extended lattice aligned with ``grid`` that
    covers the disk of radius ``R_ext`` around ``center``. ``ext_state`` holds
    ``1`` (in E), ``0`` (in E^c), ``-1`` (free) and ``-2`` (beyond ``R_ext``).
    """

    grid: GridSpec
    omega: np.ndarray
    exterior: ExteriorDatum
    R_ext: float
    center: np.ndarray
    omega_desc: dict
    ext_grid: GridSpec = field(repr=False)
    ext_offset: tuple = field(repr=False)
    ext_state: np.ndarray = field(repr=False)

    @property
    def n_free(self):
        return int(self.omega.sum())

    @property
    def h(self):
        return self.grid.h

    def free_cells(self):
        """Integer ``(ix, iy)`` of free cells on the extended lattice, row-major order."""
        iy, ix = np.nonzero(self.omega)
        return ix + self.ext_offset[0], iy + self.ext_offset[1]

    def free_centers(self):
        iy, ix = np.nonzero(self.omega)
        return np.stack(self.grid.center_of(ix, iy), axis=-1)

    @property
    def fixed_mask(self):
        """Occupancy (bool) of the fixed cells within ``R_ext`` on the extended lattice."""
        return self.ext_state == 1

    def mask_to_image(self, mask):
        """Full-grid occupancy for a free-cell mask, exterior cells from the datum."""
        mask = check_mask(self, mask)
        cx, cy = self.grid.centers()
        img = self.exterior.membership(np.stack([cx, cy], axis=-1))
        img[self.omega] = mask
        return img

    def complement(self):
        return make_problem(self.grid, self.omega_desc, self.exterior.complement(), self.R_ext)

    def to_dict(self):
        desc = dict(self.omega_desc)
        if desc.get("kind") == "mask":
            desc["cells"] = np.asarray(desc["cells"], dtype=int).tolist()
        if "center" in desc:
            desc["center"] = [float(v) for v in desc["center"]]
        return {
            "grid": self.grid.to_dict(),
            "omega": desc,
            "exterior": self.exterior.to_dict(),
            "R_ext": self.R_ext,
        }


def check_mask(problem, mask):
    bits = np.asarray(getattr(mask, "bits", mask))
    if bits.ndim != 1 or bits.shape[0] != problem.n_free:
        raise ProblemError(f"mask length {bits.shape} does not match |omega| = {problem.n_free}")
    return bits.astype(bool)


@dataclass(frozen=True)
class Mask:
    """One bit per free cell, in the row-major order of ``PixelProblem.free_cells``."""

    bits: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.bits, dtype=bool).copy()
        b.setflags(write=False)
        object.__setattr__(self, "bits", b)

    def __len__(self):
        return len(self.bits)

    def __array__(self, dtype=None, copy=None):
        return self.bits if dtype is None else self.bits.astype(dtype)

    def complement(self):
        return Mask(~self.bits)


def make_problem(grid, omega_desc, exterior, R_ext):
    """Validate and assemble a :class:`PixelProblem`."""
    if not isinstance(grid, GridSpec):
        grid = GridSpec(**grid)
    if isinstance(omega_desc, np.ndarray):
        omega_desc = {"kind": "mask", "cells": omega_desc}
    omega, center = _omega_region(grid, omega_desc)
    h = grid.h
    cx, cy = grid.centers()
    # circumscribed radius of the free cells (corners) around the center
    dx = np.abs(cx[omega] - center[0]) + h / 2
    dy = np.abs(cy[omega] - center[1]) + h / 2
    r_circ = float(np.sqrt(dx * dx + dy * dy).max())
    R_ext = float(R_ext)
    if not R_ext >= r_circ + h - 1e-12:
        raise ProblemError(
            f"R_ext={R_ext:g} is smaller than the extent of omega plus one cell ({r_circ + h:g})"
        )

    # extended lattice aligned with grid, covering the R_ext disk and the grid
    ox, oy = grid.origin
    lo_x = math.floor((min(center[0] - R_ext, ox) - ox) / h)
    hi_x = math.ceil((max(center[0] + R_ext, ox + grid.nx * h) - ox) / h)
    lo_y = math.floor((min(center[1] - R_ext, oy) - oy) / h)
    hi_y = math.ceil((max(center[1] + R_ext, oy + grid.ny * h) - oy) / h)
    ext = GridSpec((ox + lo_x * h, oy + lo_y * h), h, hi_x - lo_x, hi_y - lo_y)
    off = (-lo_x, -lo_y)
    ex, ey = ext.centers()
    inside = (ex - center[0]) ** 2 + (ey - center[1]) ** 2 <= R_ext * R_ext
    occ = exterior.membership(np.stack([ex, ey], axis=-1))
    state = np.where(inside, occ.astype(np.int8), np.int8(-2)).astype(np.int8)
    sl = (slice(off[1], off[1] + grid.ny), slice(off[0], off[0] + grid.nx))
    sub = state[sl]
    sub[omega] = -1
    state.setflags(write=False)
    omega = omega.copy()
    omega.setflags(write=False)
    return PixelProblem(grid, omega, exterior, R_ext, np.asarray(center, dtype=float),
                        dict(omega_desc), ext, off, state)


def disk_problem(n_cells, exterior, R_ext=None, radius=1.0, center=(0.0, 0.0)):
    """``B_radius`` on an ``n_cells x n_cells`` grid, the common experiment layout."""
    h = 2.0 * radius / n_cells
    grid = GridSpec((center[0] - radius, center[1] - radius), h, n_cells, n_cells)
    if R_ext is None:
        R_ext = radius * math.sqrt(2) + 2 * h
    return make_problem(grid, {"kind": "disk", "center": list(center), "radius": radius},
                        exterior, R_ext)


# ---------------------------------------------------------------------------
# serialization


def problem_to_json(problem, path=None):
    text = json.dumps(problem.to_dict(), indent=2)
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text


def problem_from_json(source):
    if isinstance(source, dict):
        d = source
    else:
        text = source
        if not str(text).lstrip().startswith("{"):
            with open(text) as fh:
                text = fh.read()
        d = json.loads(text)
    omega = dict(d["omega"])
    if omega.get("kind") == "mask":
        omega["cells"] = np.array(omega["cells"], dtype=bool)
    return make_problem(GridSpec(**d["grid"]), omega, datum_from_dict(d["exterior"]), d["R_ext"])


def write_pgm(path, image, comment=None):
    """Dump a 2-D occupancy/label array as plain-text PGM (P2), top row first."""
    img = np.asarray(image)
    img = np.flipud(img.astype(int))
    maxval = max(1, int(img.max()))
    lines = ["P2"]
    if comment:
        lines.extend("# " + c for c in str(comment).splitlines())
    lines.append(f"{img.shape[1]} {img.shape[0]}")
    lines.append(str(maxval))
    lines.extend(" ".join(str(v) for v in row) for row in img)
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_pgm(path):
    with open(path) as fh:
        tokens = [t for line in fh for t in line.split("#")[0].split()]
    if tokens[0] != "P2":
        raise ProblemError("not a plain PGM file")
    w, h, _ = int(tokens[1]), int(tokens[2]), int(tokens[3])
    data = np.array([int(t) for t in tokens[4:4 + w * h]]).reshape(h, w)
    return np.flipud(data)
