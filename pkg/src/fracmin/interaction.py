"""Pair interactions between square cells and the three-term perimeter.

For two axis-aligned rectangles the double integral of ``|x - y|^(-2-2s)``
reduces to a 2-D integral of the kernel against the product of the 1-D
overlap functions of the side intervals (piecewise linear "tents"). Pieces
whose corner sits at the singularity are done in polar coordinates with the
radial integral in closed form; everything else is tensor Gauss-Legendre.

On a lattice the weight only depends on the integer offset between cells, so
one table per ``s`` serves every problem (scaled by ``h^(2-2s)``).
"""

import csv
import json
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import shapely
from scipy import signal

from ._parallel import chunked_map
from ._quadrature import cos_power_from_tan, gauss_legendre, tanh_sinh
from .core import (Complement, Empty, Halfplane, PixelProblem, ProblemError, as_order,
                   check_mask)

NEAR = 32          # offsets with max(|dx|,|dy|) <= NEAR use Gauss quadrature
_GL_TABLE = 16     # nodes per half-tent in the table rule
_GL_POLAR = 24


# ---------------------------------------------------------------------------
# rectangles with a bilinear weight


def _polar_corner(a, b, c10, c01, c11, s):
    """``int_{[0,a]x[0,b]} (c10 x + c01 y + c11 x y) |z|^(-2-2s) dz``."""
    e1, e2 = 1.0 - 2.0 * s, 2.0 - 2.0 * s
    tc = math.atan2(b, a)
    total = 0.0
    for lo, hi, side in ((0.0, tc, 0), (tc, 0.5 * math.pi, 1)):
        th, w = gauss_legendre(_GL_POLAR, lo, hi)
        c, sn = np.cos(th), np.sin(th)
        rho = a / c if side == 0 else b / sn
        f = (c10 * c + c01 * sn) * rho ** e1 / e1 + c11 * c * sn * rho ** e2 / e2
        total += float(w @ f)
    return total


def _tensor(x0, x1, y0, y1, c, s, n):
    xs, wx = gauss_legendre(n, x0, x1)
    ys, wy = gauss_legendre(n, y0, y1)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    P = c[0] + c[1] * X + c[2] * Y + c[3] * X * Y
    K = (X * X + Y * Y) ** (-1.0 - s)
    return float(wx @ (P * K) @ wy)


def _rect(x0, x1, y0, y1, c, s, tol, depth=0):
    """Integral of the bilinear ``c = (c00, c10, c01, c11)`` times the kernel."""
    if x1 - x0 <= 0 or y1 - y0 <= 0:
        return 0.0
    # split along the axes through the singularity
    if x0 < 0.0 < x1:
        return _rect(x0, 0.0, y0, y1, c, s, tol, depth) + _rect(0.0, x1, y0, y1, c, s, tol, depth)
    if y0 < 0.0 < y1:
        return _rect(x0, x1, y0, 0.0, c, s, tol, depth) + _rect(x0, x1, 0.0, y1, c, s, tol, depth)
    at_x = x0 == 0.0 or x1 == 0.0
    at_y = y0 == 0.0 or y1 == 0.0
    if at_x and at_y:
        if abs(c[0]) > 1e-14 * (abs(c[1]) + abs(c[2]) + abs(c[3]) + 1e-300):
            raise ProblemError("cells overlap: the interaction is infinite")
        sx = 1.0 if x0 == 0.0 else -1.0
        sy = 1.0 if y0 == 0.0 else -1.0
        return _polar_corner(x1 - x0, y1 - y0, sx * c[1], sy * c[2], sx * sy * c[3], s)
    dx = 0.0 if x0 <= 0.0 <= x1 else min(abs(x0), abs(x1))
    dy = 0.0 if y0 <= 0.0 <= y1 else min(abs(y0), abs(y1))
    dist = math.hypot(dx, dy)
    size = max(x1 - x0, y1 - y0)
    if dist >= size or depth > 40:
        hi = _tensor(x0, x1, y0, y1, c, s, 16)
        lo = _tensor(x0, x1, y0, y1, c, s, 10)
        if abs(hi - lo) <= tol * abs(hi) or depth > 40:
            return hi
    xm, ym = 0.5 * (x0 + x1), 0.5 * (y0 + y1)
    return sum(_rect(a, b, p, q, c, s, tol, depth + 1)
               for a, b in ((x0, xm), (xm, x1)) for p, q in ((y0, ym), (ym, y1)))


def _overlap_pieces(a0, a1, b0, b1):
    """Pieces ``(lo, hi, p0, p1)`` of ``z -> |[a0,a1] ∩ ([b0,b1] - z)|`` as ``p0 + p1 z``."""
    knots = sorted([b0 - a1, b0 - a0, b1 - a1, b1 - a0])

    def val(z):
        return max(0.0, min(a1, b1 - z) - max(a0, b0 - z))

    out = []
    for lo, hi in zip(knots[:-1], knots[1:]):
        if hi - lo <= 0:
            continue
        vl, vh = val(lo), val(hi)
        p1 = (vh - vl) / (hi - lo)
        out.append((lo, hi, vl - p1 * lo, p1))
    return out


def _as_rect(cell):
    cell = tuple(float(v) for v in cell)
    if len(cell) == 3:
        x, y, side = cell
        return (x, x + side, y, y + side)
    if len(cell) == 4:
        return cell
    raise ProblemError("a cell is (xmin, ymin, side) or (xmin, xmax, ymin, ymax)")


def cell_pair_weight(cellA, cellB, s, tol=1e-8):
    """``int_A int_B |x - y|^(-2-2s) dy dx`` for axis-aligned squares (or rectangles).

    Cells are ``(xmin, ymin, side)`` or ``(xmin, xmax, ymin, ymax)``.
    """
    s = as_order(s).s
    if not tol > 0:
        raise ProblemError("tol must be positive")
    A, B = sorted([_as_rect(cellA), _as_rect(cellB)])
    if min(A[1], B[1]) > max(A[0], B[0]) and min(A[3], B[3]) > max(A[2], B[2]):
        raise ProblemError("cells overlap: the interaction is infinite")
    total = 0.0
    for xl, xh, p0, p1 in _overlap_pieces(A[0], A[1], B[0], B[1]):
        for yl, yh, q0, q1 in _overlap_pieces(A[2], A[3], B[2], B[3]):
            c = (p0 * q0, p1 * q0, p0 * q1, p1 * q1)
            total += _rect(xl, xh, yl, yh, c, s, 0.1 * tol)
    return total


# ---------------------------------------------------------------------------
# offset table for unit cells


def _far_weight(dx, dy, s):
    # midpoint plus the second-moment correction of the tent product
    r2 = np.asarray(dx, float) ** 2 + np.asarray(dy, float) ** 2
    alpha = 2.0 + 2.0 * s
    with np.errstate(divide="ignore"):
        return r2 ** (-alpha / 2) * (1.0 + alpha * alpha / (12.0 * r2))


@lru_cache(maxsize=32)
def _near_octant(s):
    """Weights for ``0 <= dy <= dx <= NEAR`` (unit cells), ``W[0,0] = 0``."""
    W = np.zeros((NEAR + 1, NEAR + 1))
    # touching offsets: the only ones where the singularity enters the support
    for dx, dy in ((1, 0), (1, 1)):
        W[dx, dy] = cell_pair_weight((0, 0, 1), (dx, dy, 1), s, tol=1e-13)
    u0, w0 = gauss_legendre(_GL_TABLE, -1.0, 0.0)
    u = np.concatenate([u0, -u0[::-1]])
    wu = np.concatenate([w0, w0[::-1]]) * (1.0 - np.abs(np.concatenate([u0, -u0[::-1]])))
    dxs, dys = np.nonzero(np.tri(NEAR + 1, dtype=bool))
    keep = dxs >= 2
    dxs, dys = dxs[keep], dys[keep]
    Z1 = dxs[:, None, None] + u[None, :, None]
    Z2 = dys[:, None, None] + u[None, None, :]
    K = (Z1 * Z1 + Z2 * Z2) ** (-1.0 - s)
    W[dxs, dys] = np.einsum("kij,i,j->k", K, wu, wu)
    W = np.maximum(W, W.T)
    W.setflags(write=False)
    return W


def offset_weights(dx, dy, s):
    """Unit-cell weight for integer offsets (vectorized); zero at the origin."""
    s = as_order(s).s
    ax = np.abs(np.asarray(dx, dtype=np.int64))
    ay = np.abs(np.asarray(dy, dtype=np.int64))
    ax, ay = np.broadcast_arrays(ax, ay)
    out = np.empty(ax.shape)
    near = np.maximum(ax, ay) <= NEAR
    out[near] = _near_octant(s)[ax[near], ay[near]]
    far = ~near
    out[far] = _far_weight(ax[far], ay[far], s)
    return out


def kernel_array(s, h, rx, ry):
    """Scaled weights on offsets ``[-ry, ry] x [-rx, rx]`` (indexed ``[dy, dx]``)."""
    s = as_order(s).s
    dy, dx = np.meshgrid(np.arange(-ry, ry + 1), np.arange(-rx, rx + 1), indexing="ij")
    return offset_weights(dx, dy, s) * h ** (2.0 - 2.0 * s)


# ---------------------------------------------------------------------------
# convex polygons and the cell self term


def convex_polygon_perimeter(vertices, s, level=5):
    """``Per_s`` of a convex polygon (counterclockwise vertices) from its volume form.

    For ``x`` inside, the complement seen from ``x`` is a union of angular
    sectors bounded by single edges, which gives a closed form per edge.
    """
    s = as_order(s).s
    V = np.asarray(vertices, dtype=float)
    n = len(V)
    A_all, B_all = V, np.roll(V, -1, axis=0)
    T = B_all - A_all
    L = np.hypot(T[:, 0], T[:, 1])
    tau = T / L[:, None]
    nu = np.stack([tau[:, 1], -tau[:, 0]], axis=1)
    Tn = np.roll(T, -1, axis=0)
    if np.any(T[:, 0] * Tn[:, 1] - T[:, 1] * Tn[:, 0] <= 0):
        raise ProblemError("polygon must be convex and counterclockwise")
    c = V.mean(axis=0)
    u, uc, wu = tanh_sinh(level)
    total = 0.0
    for k in range(n):
        A, B = A_all[k], B_all[k]
        dc = float((A - c) @ nu[k])
        area2 = float((A - c)[0] * (B - A)[1] - (A - c)[1] * (B - A)[0])
        U, V_ = np.meshgrid(u, u, indexing="ij")
        UC, VC = np.meshgrid(uc, uc, indexing="ij")

        def rel(X, dirn):
            # (X - P) . dirn, written so that exact zeros at vertices survive
            return (UC * ((X - c) @ dirn)
                    + U * (VC * ((X - A) @ dirn) + V_ * ((X - B) @ dirn)))

        acc = np.zeros(U.shape)
        for e in range(n):
            if e == k:
                d = UC * dc
            elif e == (k - 1) % n:
                # A lies on this edge's line, so only the B part of the segment counts
                d = UC * ((A_all[e] - c) @ nu[e]) + U * V_ * ((A_all[e] - B) @ nu[e])
            elif e == (k + 1) % n:
                d = UC * ((A_all[e] - c) @ nu[e]) + U * VC * ((A_all[e] - A) @ nu[e])
            else:
                d = rel(A_all[e], nu[e])
            d = np.maximum(d, 1e-300)
            tA = rel(A_all[e], tau[e])
            tB = rel(B_all[e], tau[e])
            acc += d ** (-2.0 * s) * (cos_power_from_tan(tB, d, s) - cos_power_from_tan(tA, d, s))
        total += area2 * float(wu @ (U * acc) @ wu)
    return total / (2.0 * s)


@lru_cache(maxsize=32)
def cell_self_term(s):
    """``I(Q, R^2 \\ Q)`` for the unit square ``Q``."""
    # level 4 already agrees with level 6 to the last printed digit
    return convex_polygon_perimeter([(0, 0), (1, 0), (1, 1), (0, 1)], s, level=4)


# ---------------------------------------------------------------------------
# far tails of the exterior datum


def _ray_exit(P, cos_t, sin_t, center, R):
    # distance along each ray from the points P to the circle |y - center| = R
    px = P[:, 0:1] - center[0]
    py = P[:, 1:2] - center[1]
    pd = px * cos_t + py * sin_t
    return -pd + np.sqrt(pd * pd - (px * px + py * py) + R * R)


def _full_tail(P, center, R, s, n_theta=256):
    th = (np.arange(n_theta) + 0.5) * (2 * np.pi / n_theta)
    r_out = _ray_exit(P, np.cos(th)[None, :], np.sin(th)[None, :], center, R)
    return (r_out ** (-2.0 * s)).sum(axis=1) * (2 * np.pi / n_theta) / (2.0 * s)


def _halfplane_tail(datum, P, center, R, s, panels=64, order=12):
    nu = datum.normal
    phi0 = math.atan2(nu[1], nu[0])
    th = []
    w = []
    for k in range(panels):
        # panels aligned so that the halfplane's edge directions are breakpoints
        lo = phi0 + 0.5 * np.pi + k * 2 * np.pi / panels
        t, ww = gauss_legendre(order, lo, lo + 2 * np.pi / panels)
        th.append(t)
        w.append(ww)
    th = np.concatenate(th)
    w = np.concatenate(w)
    c, sn = np.cos(th)[None, :], np.sin(th)[None, :]
    r_out = _ray_exit(P, c, sn, center, R)
    g = c * nu[0] + sn * nu[1]                       # rate of change of x . nu along the ray
    gap = datum.offset - (P @ nu)[:, None]           # > 0 when the point is inside E
    e = -2.0 * s
    with np.errstate(divide="ignore", invalid="ignore"):
        r1 = gap / g
        # ray inside E for r < r1 (g > 0) or r > r1 (g < 0)
        up = np.where(r1 > r_out, r_out ** e - r1 ** e, 0.0)
        down = np.where(r1 > r_out, r1 ** e, r_out ** e)
    val = np.where(g > 0, up, np.where(g < 0, down, np.where(gap > 0, r_out ** e, 0.0)))
    return (val @ w) / (2.0 * s)


def _numeric_tail(datum, P, center, R, s, n_theta=192, n_t=96):
    th = (np.arange(n_theta) + 0.5) * (2 * np.pi / n_theta)
    c, sn = np.cos(th), np.sin(th)
    r_out = _ray_exit(P, c[None, :], sn[None, :], center, R)
    tmax = r_out ** (-2.0 * s)
    frac = (np.arange(n_t) + 0.5) / n_t
    # r = t^(-1/(2s)); uniform in t is uniform in kernel mass along the ray
    t = tmax[..., None] * frac
    r = t ** (-1.0 / (2.0 * s))
    pts = np.stack([P[:, 0, None, None] + r * c[None, :, None],
                    P[:, 1, None, None] + r * sn[None, :, None]], axis=-1)
    inside = datum.membership(pts)
    return (inside.mean(axis=2) * tmax).sum(axis=1) * (2 * np.pi / n_theta) / (2.0 * s)


def _rim_pieces(problem):
    """Weighted points that turn the tail outside ``B_R`` into the tail outside the fixed cells.

    A lattice cell is fixed when its center is within ``R_ext``, so near the
    circle some of the disk is not covered by fixed cells and some fixed area
    lies outside it. Each such piece becomes one point at its centroid,
    weighted by its signed area and the datum occupancy there.
    """
    ext, h, R = problem.ext_grid, problem.h, problem.R_ext
    c = problem.center
    ex, ey = ext.centers()
    d = np.hypot(ex - c[0], ey - c[1])
    rim = np.abs(d - R) < h * math.sqrt(0.5)
    if not rim.any():
        return np.zeros((0, 2)), np.zeros(0)
    x0, y0 = ex[rim] - h / 2, ey[rim] - h / 2
    boxes = shapely.box(x0, y0, x0 + h, y0 + h)
    disk = shapely.Point(*c).buffer(R, quad_segs=512)
    fixed = problem.ext_state[rim] != -2
    pieces = np.where(fixed, shapely.difference(boxes, disk), shapely.intersection(boxes, disk))
    area = shapely.area(pieces)
    keep = area > 0
    pieces, area, fixed = pieces[keep], area[keep], fixed[keep]
    g = shapely.get_coordinates(shapely.centroid(pieces))
    occ = problem.exterior.membership(g)
    q = np.where(fixed, -area, area) * occ
    return g[q != 0], q[q != 0]


def _datum_tail(datum, P, center, R, s):
    """Per-point ``int_{E minus B_R(center)} |x - y|^(-2-2s) dy`` and whether it is exact."""
    if isinstance(datum, Empty):
        return np.zeros(len(P)), True
    if datum.radius is not None and math.hypot(*center) + datum.radius <= R:
        return np.zeros(len(P)), True
    if isinstance(datum, Halfplane):
        return _halfplane_tail(datum, P, center, R, s), True
    if isinstance(datum, Complement):
        base, exact = _datum_tail(datum.base, P, center, R, s)
        return _full_tail(P, center, R, s) - base, exact
    return _numeric_tail(datum, P, center, R, s), False


# ---------------------------------------------------------------------------
# the model


@dataclass(eq=False)
class InteractionModel:
    """Weights, unary terms and error bookkeeping for one problem and one ``s``.

    ``kernel`` holds ``w`` as a function of the offset between free cells on
    the user grid (indexed ``[dy + ny - 1, dx + nx - 1]``); ``w_ii`` is zero.
    """

    s: float
    problem: PixelProblem
    kernel: np.ndarray = field(repr=False)
    a: np.ndarray = field(repr=False)
    b: np.ndarray = field(repr=False)
    self_term: float
    r_cut: float = None
    tail_bound: float = 0.0
    tails: bool = True

    @property
    def n(self):
        return self.problem.n_free

    def pair_weight(self, i, j):
        ix, iy = self.problem.free_cells()
        g = self.problem.grid
        return self.kernel[iy[j] - iy[i] + g.ny - 1, ix[j] - ix[i] + g.nx - 1]

    def dense_weights(self):
        """Dense ``N x N`` matrix of ``w_ij`` (only sensible for small ``N``)."""
        ix, iy = self.problem.free_cells()
        g = self.problem.grid
        return self.kernel[(iy[None, :] - iy[:, None]) + g.ny - 1,
                           (ix[None, :] - ix[:, None]) + g.nx - 1]

    def to_csv(self, path):
        export_weights_csv(self, path)


def _conv_at(image, kernel, rows, cols):
    # full correlation with a centered kernel, read off at given cells
    full = signal.fftconvolve(image.astype(float), kernel, mode="full")
    ky, kx = (kernel.shape[0] - 1) // 2, (kernel.shape[1] - 1) // 2
    return full[rows + ky, cols + kx]


def exterior_unary_terms(problem, s, tails=True):
    """Unary terms ``(a, b, tail_bound)`` for the free cells.

    ``b_i`` interacts cell ``i`` with the fixed part of E, ``a_i`` with the fixed
    part of E^c. With ``tails`` the data beyond ``R_ext`` enters through a
    per-ray integral, and ``a`` follows from the exact total interaction of a
    cell with the rest of the plane.
    """
    return _unary(problem, as_order(s).s, tails)[:3]


def _unary(problem, s, tails):
    h = problem.h
    scale = h ** (2.0 - 2.0 * s)
    ext = problem.ext_state
    ny, nx = ext.shape
    K = kernel_array(s, h, nx - 1, ny - 1)
    fx, fy = problem.free_cells()
    occE = ext == 1
    occC = ext == 0
    b = _conv_at(occE, K, fy, fx) if occE.any() else np.zeros(problem.n_free)
    rho = problem.R_ext - _circumradius(problem)
    bound_cell = h * h * math.pi * rho ** (-2.0 * s) / s
    if not tails:
        a = _conv_at(occC, K, fy, fx) if occC.any() else np.zeros(problem.n_free)
        return np.maximum(a, 0), np.maximum(b, 0), bound_cell * problem.n_free, False
    C = problem.free_centers()
    Q, q = _rim_pieces(problem)
    res = {}
    # 2 x 2 Gauss points per free cell
    off = h / (2 * math.sqrt(3))
    shifts = [(-off, -off), (off, -off), (-off, off), (off, off)]

    def job(lo, hi):
        acc = np.zeros(hi - lo)
        for sx, sy in shifts:
            P = C[lo:hi] + (sx, sy)
            t, exact = _datum_tail(problem.exterior, P, problem.center, problem.R_ext, s)
            res["exact"] = exact
            if len(q):
                r2 = (P[:, 0, None] - Q[None, :, 0]) ** 2 + (P[:, 1, None] - Q[None, :, 1]) ** 2
                t = t + (r2 ** (-1.0 - s)) @ q
            acc += t
        return acc / 4.0

    tail = chunked_map(job, len(C), chunk=256) * h * h
    b = b + tail
    # total interaction of a cell with the plane minus what the free cells and E take
    g = problem.grid
    Kg = kernel_array(s, h, g.nx - 1, g.ny - 1)
    iy, ix = np.nonzero(problem.omega)
    free_sum = _conv_at(problem.omega, Kg, iy, ix)
    a = cell_self_term(s) * scale - free_sum - b
    exact = res.get("exact", True)
    return np.maximum(a, 0), np.maximum(b, 0), (0.0 if exact else bound_cell * problem.n_free), exact


def _circumradius(problem):
    P = problem.free_centers()
    h = problem.h
    d = np.abs(P - problem.center) + h / 2
    return float(np.hypot(d[:, 0], d[:, 1]).max())


def build_model(problem, s, r_cut=None, tails=True):
    """Assemble the :class:`InteractionModel` of ``problem`` at order ``s``."""
    s = as_order(s).s
    a, b, tail_bound, _ = _unary(problem, s, tails)
    g = problem.grid
    kern = kernel_array(s, problem.h, g.nx - 1, g.ny - 1)
    if r_cut is not None:
        r_cut = float(r_cut)
        if not r_cut > 0:
            raise ProblemError("r_cut must be positive")
        dy, dx = np.meshgrid(np.arange(-(g.ny - 1), g.ny), np.arange(-(g.nx - 1), g.nx), indexing="ij")
        drop = np.hypot(dx, dy) * problem.h > r_cut
        omega = problem.omega.astype(float)
        # pair mass lost by the cut, counted once per unordered pair
        counts = signal.fftconvolve(omega, omega[::-1, ::-1], mode="full")
        tail_bound += 0.5 * float(np.sum(np.rint(counts) * kern * drop))
        kern = np.where(drop, 0.0, kern)
    kern.setflags(write=False)
    return InteractionModel(s, problem, kern, a, b, cell_self_term(s) * problem.h ** (2 - 2 * s),
                            r_cut, float(tail_bound), tails)


# ---------------------------------------------------------------------------
# energies


def _images(problem, mask):
    bits = check_mask(problem, mask)
    E = np.zeros(problem.grid.shape)
    C = np.zeros(problem.grid.shape)
    E[problem.omega] = bits
    C[problem.omega] = ~bits
    return bits, E, C


def frac_perimeter(problem, mask, s=None, model=None):
    """Three-term ``Per_s`` of ``mask`` as ``{t1, t2, t3, total, tail_bound}``."""
    if model is None:
        if s is None:
            raise ProblemError("need either s or an interaction model")
        model = build_model(problem, s)
    bits, E, C = _images(problem, mask)
    t1 = 0.0
    if bits.any() and (~bits).any():
        t1 = float(np.sum(C * signal.fftconvolve(E, model.kernel, mode="same")))
    t2 = float(model.a[bits].sum())
    t3 = float(model.b[~bits].sum())
    return {"t1": t1, "t2": t2, "t3": t3, "total": t1 + t2 + t3, "tail_bound": model.tail_bound}


def brute_force_perimeter(problem, mask, model):
    """Naive double loop over free pairs and fixed cells; for cross-checking only."""
    bits = check_mask(problem, mask)
    fx, fy = problem.free_cells()
    W = model.dense_weights()
    t1 = 0.0
    for i in np.nonzero(bits)[0]:
        for j in np.nonzero(~bits)[0]:
            t1 += W[i, j]
    if model.tails:
        a, b = model.a, model.b
    else:
        scale = problem.h ** (2.0 - 2.0 * model.s)
        ey, ex = np.nonzero(problem.ext_state == 1)
        cy, cx = np.nonzero(problem.ext_state == 0)
        a = np.array([offset_weights(cx - fx[i], cy - fy[i], model.s).sum() for i in range(len(fx))]) * scale
        b = np.array([offset_weights(ex - fx[i], ey - fy[i], model.s).sum() for i in range(len(fx))]) * scale
    t2 = float(sum(a[i] for i in np.nonzero(bits)[0]))
    t3 = float(sum(b[i] for i in np.nonzero(~bits)[0]))
    return {"t1": t1, "t2": t2, "t3": t3, "total": t1 + t2 + t3}


def fixed_constant(problem, s):
    """``I(E minus Omega, E^c minus Omega)`` within ``R_ext``: the mask-independent fourth term."""
    s = as_order(s).s
    ext = problem.ext_state
    E = (ext == 1).astype(float)
    C = (ext == 0).astype(float)
    if not E.any() or not C.any():
        return 0.0
    ny, nx = ext.shape
    K = kernel_array(s, problem.h, nx - 1, ny - 1)
    return float(np.sum(C * signal.fftconvolve(E, K, mode="same")))


def set_perimeter(image, h, s):
    """Whole-plane ``Per_s`` of a bounded cell set given as a boolean image."""
    s = as_order(s).s
    img = np.asarray(image, dtype=float)
    if not img.any():
        return 0.0
    ny, nx = img.shape
    K = kernel_array(s, h, nx - 1, ny - 1)
    inner = float(np.sum(img * signal.fftconvolve(img, K, mode="same")))
    return img.sum() * cell_self_term(s) * h ** (2 - 2 * s) - inner


def sobolev_identity_gap(image, s, h=1.0):
    """Gap between ``2 I(E, E^c)`` and the seminorm sum ``sum |chi_i - chi_j|^2 w_ij``.

    ``image`` is a bounded set on a grid; the plane outside the grid is empty.
    The seminorm side is accumulated by an explicit pass over grid pairs plus
    the mass each occupied cell sends beyond the grid.
    """
    s = as_order(s).s
    img = np.asarray(image, dtype=bool)
    lhs = 2.0 * set_perimeter(img, h, s)
    ny, nx = img.shape
    scale = h ** (2 - 2 * s)
    ys, xs = np.mgrid[0:ny, 0:nx]
    xs, ys, chi = xs.ravel(), ys.ravel(), img.ravel().astype(float)
    S = cell_self_term(s) * scale
    rhs = 0.0
    for i in range(len(chi)):
        w = offset_weights(xs - xs[i], ys - ys[i], s) * scale
        rhs += float(np.sum((chi - chi[i]) ** 2 * w))
        if chi[i]:
            # both orderings of the pairs (i, y) with y outside the grid
            rhs += 2.0 * (S - float(w.sum()))
    return abs(lhs - rhs)


def energy_json(energy):
    keys = ("t1", "t2", "t3", "total", "tail_bound")
    return json.dumps({k: float(energy[k]) for k in keys if k in energy})


def export_weights_csv(model, path):
    """Write the offset table as ``dx, dy, weight`` rows (nonzero weights only)."""
    g = model.problem.grid
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["dx", "dy", "weight"])
        for iy, ix in zip(*np.nonzero(model.kernel)):
            wr.writerow([ix - (g.nx - 1), iy - (g.ny - 1), repr(float(model.kernel[iy, ix]))])
