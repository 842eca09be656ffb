"""Continuum boundaries: polygons and graphs.

Per_s of a polygon is computed from the double boundary integral of
``nu(x) . nu(y) |x - y|^(-2s)``; nonlocal mean curvature always subtracts the
tangent halfplane so that no principal value has to be taken numerically.
For polygons the radial integrals along rays are exact, for graphs the
vertical integrals are (through an incomplete beta function), which leaves
1-D quadratures only.
"""

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import interpolate, special
from shapely.geometry import LinearRing, Polygon

from ._quadrature import cos_power_from_tan, gauss_jacobi_left, gauss_legendre
from .core import ProblemError, as_order


class BoundaryError(ProblemError):
    pass


# ---------------------------------------------------------------------------
# representations


@dataclass(frozen=True, eq=False)
class PolyBoundary:
    """Simple closed polygon, stored counterclockwise."""

    vertices: np.ndarray

    def __post_init__(self):
        V = np.asarray(self.vertices, dtype=float)
        if V.ndim != 2 or V.shape[1] != 2 or len(V) < 3:
            raise BoundaryError("a polygon needs at least three (x, y) vertices")
        if np.allclose(V[0], V[-1]):
            V = V[:-1]
        ring = LinearRing(V)
        if not ring.is_simple or not Polygon(V).is_valid:
            raise BoundaryError("polygon is self-intersecting")
        if not ring.is_ccw:
            V = V[::-1]
        V = V.copy()
        V.setflags(write=False)
        object.__setattr__(self, "vertices", V)

    @property
    def n(self):
        return len(self.vertices)

    def segments(self):
        return self.vertices, np.roll(self.vertices, -1, axis=0)

    def normals(self):
        """Outward unit normal per segment (tangent rotated clockwise)."""
        A, B = self.segments()
        T = B - A
        T = T / np.hypot(T[:, 0], T[:, 1])[:, None]
        return np.stack([T[:, 1], -T[:, 0]], axis=1)

    def lengths(self):
        A, B = self.segments()
        return np.hypot(*(B - A).T)

    def perimeter(self):
        return float(self.lengths().sum())

    def area(self):
        return float(Polygon(self.vertices).area)

    def scaled(self, lam):
        return PolyBoundary(np.asarray(self.vertices) * lam)

    def translated(self, z):
        return PolyBoundary(np.asarray(self.vertices) + np.asarray(z, dtype=float))

    def midpoint(self, k):
        A, B = self.segments()
        return 0.5 * (A[k] + B[k])

    def contains(self, pts):
        from shapely import contains_xy
        pts = np.asarray(pts, dtype=float)
        return contains_xy(Polygon(self.vertices), pts[..., 0], pts[..., 1])

    @classmethod
    def from_csv(cls, path):
        return cls(_read_xy(path))


def regular_polygon(n, radius=1.0, center=(0.0, 0.0), apothem=False, phase=None):
    """Regular ``n``-gon. With ``apothem`` the segment midpoints lie at ``radius``.

    The default phase puts the midpoint of the first segment on the positive x-axis.
    """
    R = radius / math.cos(math.pi / n) if apothem else radius
    ph = -math.pi / n if phase is None else phase
    t = ph + 2 * np.pi * np.arange(n) / n
    return PolyBoundary(np.stack([center[0] + R * np.cos(t), center[1] + R * np.sin(t)], axis=1))


def rectangle(x0, x1, y0, y1):
    return PolyBoundary([(x0, y0), (x1, y0), (x1, y1), (x0, y1)])


def unit_square():
    return rectangle(0.0, 1.0, 0.0, 1.0)


@dataclass(frozen=True, eq=False)
class GraphBoundary:
    """Subgraph ``{y < u(x)}`` from samples on a uniform grid of ``[-L, L]``.

    The samples are joined by a clamped cubic spline and continued by the end
    values outside the window, which keeps the boundary C^1.
    """

    x: np.ndarray
    u: np.ndarray
    spline: object = field(init=False, repr=False)

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        u = np.asarray(self.u, dtype=float)
        if x.ndim != 1 or x.shape != u.shape or len(x) < 4:
            raise BoundaryError("graph needs matching 1-D sample arrays (at least 4)")
        if not np.all(np.isfinite(u)):
            raise BoundaryError("graph samples must be finite")
        dx = np.diff(x)
        if np.any(dx <= 0) or np.ptp(dx) > 1e-9 * dx.mean():
            raise BoundaryError("graph samples must lie on a uniform increasing grid")
        for arr in (x, u):
            arr.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "spline", interpolate.CubicSpline(x, u, bc_type="clamped"))

    @classmethod
    def from_function(cls, f, L, n):
        x = np.linspace(-L, L, n)
        return cls(x, f(x))

    @classmethod
    def from_csv(cls, path):
        xy = _read_xy(path)
        return cls(xy[:, 0], xy[:, 1])

    @property
    def lo(self):
        return float(self.x[0])

    @property
    def hi(self):
        return float(self.x[-1])

    @property
    def step(self):
        return float(self.x[1] - self.x[0])

    def __call__(self, x, nu=0):
        x = np.asarray(x, dtype=float)
        xc = np.clip(x, self.lo, self.hi)
        out = self.spline(xc, nu)
        if nu > 0:
            out = np.where((x < self.lo) | (x > self.hi), 0.0, out)
        return out

    def normals(self):
        """Outward normals at the samples, slopes by centered differences."""
        du = np.gradient(self.u, self.x)
        q = np.sqrt(1.0 + du * du)
        return np.stack([-du / q, 1.0 / q], axis=1)

    def contains(self, pts):
        pts = np.asarray(pts, dtype=float)
        return pts[..., 1] < self(pts[..., 0])


@dataclass(frozen=True)
class NormalPerturbation:
    """Normal deformation ``x + eps eta nu - eps eta(xbar) nu(xbar)`` of a graph."""

    eta: object
    epsilon: float
    xbar: float

    def check(self, g):
        xs = np.linspace(g.lo, g.hi, 4 * len(g.x))
        du = g(xs, 1)
        q = np.sqrt(1 + du * du)
        comp = np.stack([-self.eta(xs) * du / q, self.eta(xs) / q])
        slope = np.abs(np.gradient(comp, xs, axis=1)).max()
        if not self.epsilon * slope < 0.5:
            raise BoundaryError("perturbation too large: the deformed boundary may not be a graph")


def _read_xy(path):
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].lstrip().startswith("#")]
    try:
        float(rows[0][0])
    except ValueError:
        rows = rows[1:]
    return np.array([[float(r[0]), float(r[1])] for r in rows])


# ---------------------------------------------------------------------------
# boundary-integral perimeter


def _gl_pairs(A0, A1, B0, B1, s, n):
    """Tensor Gauss-Legendre of ``int_a int_b |x - y|^(-2s)`` for many segment pairs."""
    t, w = gauss_legendre(n, 0.0, 1.0)
    X = A0[:, None, :] + t[None, :, None] * (A1 - A0)[:, None, :]
    Y = B0[:, None, :] + t[None, :, None] * (B1 - B0)[:, None, :]
    D = X[:, :, None, :] - Y[:, None, :, :]
    r2 = np.einsum("kijd,kijd->kij", D, D)
    val = np.einsum("kij,i,j->k", r2 ** (-s), w, w)
    return val * np.hypot(*(A1 - A0).T) * np.hypot(*(B1 - B0).T)


def _seg_dist(a0, a1, b0, b1):
    def pt(p, q0, q1):
        d = q1 - q0
        lam = np.clip(np.dot(p - q0, d) / np.dot(d, d), 0.0, 1.0)
        return np.hypot(*(p - q0 - lam * d))
    return min(pt(a0, b0, b1), pt(a1, b0, b1), pt(b0, a0, a1), pt(b1, a0, a1))


def _far_pair(a0, a1, b0, b1, s):
    la, lb = np.hypot(*(a1 - a0)), np.hypot(*(b1 - b0))
    dist = _seg_dist(a0, a1, b0, b1)
    if dist >= max(la, lb):
        return float(_gl_pairs(a0[None], a1[None], b0[None], b1[None], s, 12)[0])
    if la >= lb:
        m = 0.5 * (a0 + a1)
        return _far_pair(a0, m, b0, b1, s) + _far_pair(m, a1, b0, b1, s)
    m = 0.5 * (b0 + b1)
    return _far_pair(a0, a1, b0, m, s) + _far_pair(a0, a1, m, b1, s)


def _corner_pair(V, P, Q, s):
    """``int int |x - y|^(-2s)`` over segments ``[V, P]`` and ``[V, Q]`` sharing ``V``."""
    l1, l2 = np.hypot(*(P - V)), np.hypot(*(Q - V))
    if l2 > 2 * l1:
        M = V + (Q - V) * (l1 / l2)
        return _corner_pair(V, P, M, s) + _far_pair(V, P, M, Q, s)
    if l1 > 2 * l2:
        M = V + (P - V) * (l2 / l1)
        return _corner_pair(V, M, Q, s) + _far_pair(M, P, V, Q, s)
    cb = np.dot(P - V, Q - V) / (l1 * l2)
    v, w = gauss_legendre(40, 0.0, 1.0)
    total = 0.0
    # split the square of parameters along its diagonal; each half is homogeneous
    for la, lb in ((l1, l2), (l2, l1)):
        k = lb / la
        q = 1.0 + (v * k) ** 2 - 2.0 * v * k * cb
        total += la ** (2 - 2 * s) / (2 - 2 * s) * k * float(w @ q ** (-s))
    return total


def _same_segment(L, s):
    return 2.0 * L ** (2 - 2 * s) / ((1 - 2 * s) * (2 - 2 * s))


def _pair_sum(A, B, nu, rows, s):
    """``sum_{i in rows, j} nu_i . nu_j J_ij`` where ``J`` is the kernel double integral."""
    n = len(A)
    L = np.hypot(*(B - A).T)
    total = 0.0
    for i in rows:
        total += _same_segment(L[i], s)
    rows = np.asarray(sorted(set(int(r) for r in rows)), dtype=int)
    if len(rows) == 0:
        return 0.0
    I, J = np.meshgrid(rows, np.arange(n), indexing="ij")
    I, J = I.ravel(), J.ravel()
    keep = I != J
    I, J = I[keep], J[keep]
    nxt = (I + 1) % n
    prv = (I - 1) % n
    adj = (J == nxt) | (J == prv)
    dots = np.einsum("kd,kd->k", nu[I], nu[J])
    # adjacent pairs
    for i, j, d in zip(I[adj], J[adj], dots[adj]):
        if j == (i + 1) % n:
            total += d * _corner_pair(B[i], A[i], B[j], s)
        else:
            total += d * _corner_pair(A[i], B[i], A[j], s)
    I, J, dots = I[~adj], J[~adj], dots[~adj]
    # distance estimate between segments from midpoints and half lengths
    mid = 0.5 * (A + B)
    gap = np.hypot(*(mid[I] - mid[J]).T) - 0.5 * (L[I] + L[J])
    big = np.maximum(L[I], L[J])
    far = gap >= 4 * big
    mid_ = (gap >= big) & ~far
    for sel, order in ((far, 6), (mid_, 12)):
        if sel.any():
            for lo in range(0, int(sel.sum()), 20000):
                idx = np.nonzero(sel)[0][lo:lo + 20000]
                vals = _gl_pairs(A[I[idx]], B[I[idx]], A[J[idx]], B[J[idx]], s, order)
                total += float(dots[idx] @ vals)
    near = ~(far | mid_)
    for i, j, d in zip(I[near], J[near], dots[near]):
        total += d * _far_pair(A[i], B[i], A[j], B[j], s)
    return total


def per_s_boundary_integral(poly, s, tol=1e-8):
    """Whole-plane ``Per_s`` of a polygon from its boundary double integral."""
    s = as_order(s).s
    if not tol > 0:
        raise BoundaryError("tol must be positive")
    if not isinstance(poly, PolyBoundary):
        poly = PolyBoundary(poly)
    A, B = poly.segments()
    return _pair_sum(A, B, poly.normals(), range(poly.n), s) / (4.0 * s * s)


def per_s_difference(polyA, polyB, moved, s):
    """``Per_s(A) - Per_s(B)`` for polygons with the same vertex count that differ only on ``moved`` segments."""
    s = as_order(s).s
    out = 0.0
    for poly, sign in ((polyA, 1.0), (polyB, -1.0)):
        A, B = poly.segments()
        nu = poly.normals()
        m = np.asarray(sorted(moved), dtype=int)
        rest = np.setdiff1d(np.arange(poly.n), m)
        # pairs with at least one moved segment: (m, all) + (rest, m)
        s1 = _pair_sum(A, B, nu, m, s)
        s2 = _cross_sum(A, B, nu, rest, m, s)
        out += sign * (s1 + s2)
    return out / (4.0 * s * s)


def _cross_sum(A, B, nu, rows, cols, s):
    """Sum over ``i in rows``, ``j in cols`` (disjoint sets) of ``nu_i . nu_j J_ij``."""
    total = 0.0
    for j in cols:
        # reuse the row routine with j as the row and the given rows as columns
        total += _row_subset(A, B, nu, int(j), np.asarray(rows, dtype=int), s)
    return total


def _row_subset(A, B, nu, i, cols, s):
    n = len(A)
    L = np.hypot(*(B - A).T)
    total = 0.0
    adj_mask = (cols == (i + 1) % n) | (cols == (i - 1) % n)
    for j in cols[adj_mask]:
        d = float(nu[i] @ nu[j])
        if j == (i + 1) % n:
            total += d * _corner_pair(B[i], A[i], B[j], s)
        else:
            total += d * _corner_pair(A[i], B[i], A[j], s)
    J = cols[~adj_mask & (cols != i)]
    if len(J) == 0:
        return total
    dots = nu[J] @ nu[i]
    mid = 0.5 * (A + B)
    gap = np.hypot(*(mid[J] - mid[i]).T) - 0.5 * (L[J] + L[i])
    big = np.maximum(L[J], L[i])
    far = gap >= 4 * big
    mid_ = (gap >= big) & ~far
    for sel, order in ((far, 6), (mid_, 12)):
        if sel.any():
            idx = np.nonzero(sel)[0]
            k = len(idx)
            vals = _gl_pairs(np.repeat(A[i][None], k, 0), np.repeat(B[i][None], k, 0),
                             A[J[idx]], B[J[idx]], s, order)
            total += float(dots[idx] @ vals)
    for j, d in zip(J[~(far | mid_)], dots[~(far | mid_)]):
        total += d * _far_pair(A[i], B[i], A[j], B[j], s)
    return total


# ---------------------------------------------------------------------------
# nonlocal mean curvature: polygons


def _locate(poly, p, rel=1e-9):
    A, B = poly.segments()
    p = np.asarray(p, dtype=float)
    T = B - A
    L2 = np.einsum("kd,kd->k", T, T)
    lam = np.einsum("kd,kd->k", p - A, T) / L2
    foot = A + np.clip(lam, 0, 1)[:, None] * T
    dist = np.hypot(*(p - foot).T)
    k = int(np.argmin(dist))
    scale = math.sqrt(L2.max())
    if dist[k] > 1e-9 * scale:
        raise BoundaryError("point is not on the boundary")
    if lam[k] < rel or lam[k] > 1 - rel:
        raise BoundaryError("point is a corner: nonlocal curvature is undefined there")
    return k


def _ray_crossings(poly, p, k, theta):
    """Sorted crossing distances (inf padded) of rays from ``p`` with all edges but ``k``."""
    A, B = poly.segments()
    e = np.stack([np.cos(theta), np.sin(theta)], axis=-1)           # (m, 2)
    others = np.array([j for j in range(poly.n) if j != k])
    a, b = A[others], B[others]
    d = b - a                                                        # (q, 2)
    w = a - p                                                        # (q, 2)
    # solve r e - lam d = w
    den = e[:, None, 0] * (-d[None, :, 1]) - e[:, None, 1] * (-d[None, :, 0])
    with np.errstate(divide="ignore", invalid="ignore"):
        r = (w[None, :, 0] * (-d[None, :, 1]) - w[None, :, 1] * (-d[None, :, 0])) / den
        lam = (e[:, None, 0] * w[None, :, 1] - e[:, None, 1] * w[None, :, 0]) / den
    ok = (den != 0) & (lam >= 0) & (lam < 1) & (r > 0)
    r = np.where(ok, r, np.inf)
    return np.sort(r, axis=1)


def _poly_angles(poly, p, k, theta0):
    # breakpoints: vertex directions and the tangent line, relative to theta0
    V = np.asarray(poly.vertices) - p
    ang = (np.arctan2(V[:, 1], V[:, 0]) - theta0) % (2 * np.pi)
    br = np.unique(np.concatenate([[0.0, np.pi, 2 * np.pi], ang]))
    pts = []
    for lo, hi in zip(br[:-1], br[1:]):
        if hi - lo < 1e-14:
            continue
        m = max(1, int(math.ceil((hi - lo) / (np.pi / 16))))
        edges = np.linspace(lo, hi, m + 1)
        for a, b in zip(edges[:-1], edges[1:]):
            pts.append(gauss_legendre(20, a, b))
    th = np.concatenate([q[0] for q in pts])
    w = np.concatenate([q[1] for q in pts])
    return th, w


def _poly_nmc_radial(poly, p, s, log_R=None):
    k = _locate(poly, p)
    A, B = poly.segments()
    tau = (B[k] - A[k]) / np.hypot(*(B[k] - A[k]))
    theta0 = math.atan2(tau[1], tau[0])
    th, w = _poly_angles(poly, p, k, theta0)
    r = _ray_crossings(poly, p, k, th + theta0)
    # theta in (0, pi) turns from the tangent towards the inside (normals point right of tau)
    sigma_h = np.where(th < np.pi, -1.0, 1.0)
    odd_lo = r[:, 0::2]
    odd_hi = np.concatenate([r[:, 1::2], np.full((len(r), 1), np.inf)], axis=1)[:, :odd_lo.shape[1]]
    if log_R is None:
        with np.errstate(divide="ignore"):
            seg = np.where(np.isfinite(odd_lo), odd_lo ** (-2 * s) - odd_hi ** (-2 * s), 0.0)
        per_ray = -(sigma_h / s) * seg.sum(axis=1)
    else:
        hi = np.minimum(odd_hi, log_R)
        seg = np.where(np.isfinite(odd_lo), np.log(hi) - np.log(np.minimum(odd_lo, log_R)), 0.0)
        per_ray = -2.0 * sigma_h * seg.sum(axis=1)
    return float(w @ per_ray)


# ---------------------------------------------------------------------------
# nonlocal mean curvature: graphs


def _psi(a, t, s):
    # int_0^{atan(a/t)} cos^(2s), t > 0
    return cos_power_from_tan(a, t, s)


def _graph_panels(g, x0):
    """Breakpoints in ``t = x - x0`` on each side: spline knots and window ends."""
    right = g.x[g.x > x0] - x0
    left = x0 - g.x[g.x < x0]
    return right, left[::-1]


def _side_integral(g, x0, u0, du0, knots, sign, s, n_gl=10, n_gj=14):
    """``int_0^T [Psi(a/t) - sign Psi(u')] t^(-1-2s) dt`` on one side (``x = x0 + sign t``)."""
    psi_tan = float(_psi(du0, 1.0, s))
    total = 0.0
    edges = np.concatenate([[0.0], knots])
    edges = edges[np.concatenate([[True], np.diff(edges) > 1e-14 * max(1.0, edges[-1])])]
    for j, (lo, hi) in enumerate(zip(edges[:-1], edges[1:])):
        if j == 0:
            t, w = gauss_jacobi_left(n_gj, -2.0 * s, lo, hi)
            wt = w / t
        else:
            t, w = gauss_legendre(n_gl, lo, hi)
            wt = w * t ** (-1.0 - 2.0 * s)
        a = g(x0 + sign * t) - u0
        f = _psi(a, t, s) - sign * psi_tan
        total += float(wt @ f)
    return total, edges[-1]


def _tail_side(a, T, s):
    """``int_T^inf Psi(a/t) t^(-1-2s) dt`` in closed-ish form (Gauss-Jacobi in ``w = |a|/t``)."""
    if a == 0.0:
        return 0.0
    m = abs(a) / T
    w, wt = gauss_jacobi_left(30, 2.0 * s, 0.0, m)
    f = _psi(w, 1.0, s) / w
    return math.copysign(abs(a) ** (-2.0 * s) * float(wt @ f), a)


def _graph_nmc(g, x0, s):
    if not (g.lo < x0 < g.hi):
        raise BoundaryError("point is not an interior point of the graph window")
    u0 = float(g(x0))
    du0 = float(g(x0, 1))
    right, left = _graph_panels(g, x0)
    # H = -2 int [Psi(a/|t|) - Psi(u' sgn t)] |t|^(-1-2s) dt, t = x - x0
    Ir, T1 = _side_integral(g, x0, u0, du0, right, +1, s)
    Il, T2 = _side_integral(g, x0, u0, du0, left, -1, s)
    psi_tan = float(_psi(du0, 1.0, s))
    tails = (_tail_side(float(g.u[-1]) - u0, T1, s) + _tail_side(float(g.u[0]) - u0, T2, s)
             - psi_tan * T1 ** (-2 * s) / (2 * s) + psi_tan * T2 ** (-2 * s) / (2 * s))
    return -2.0 * (Ir + Il + tails)


def nmc(rep, p, s, R_far=None):
    """Nonlocal mean curvature ``H^s_E(p)`` with the sign of ``chi_{E^c} - chi_E``.

    ``p`` is a boundary point of a polygon (not a vertex), or an abscissa /
    ``(x, u(x))`` point for a graph. Far fields are exact for both
    representations, so ``R_far`` only needs to be given for interface
    compatibility.
    """
    s = as_order(s).s
    if isinstance(rep, PolyBoundary):
        return _poly_nmc_radial(rep, p, s)
    if isinstance(rep, GraphBoundary):
        p = np.atleast_1d(np.asarray(p, dtype=float))
        x0 = float(p[0])
        if p.size == 2 and abs(p[1] - float(rep(x0))) > 1e-9 * (1 + abs(p[1])):
            raise BoundaryError("point is not on the graph")
        return _graph_nmc(rep, x0, s)
    raise BoundaryError(f"unsupported boundary representation {type(rep).__name__}")


def nmc_small_s_coefficients(rep, p, R):
    """Coefficients of ``2 s H^s(p) = c0 + s c1 + o(s)`` for a bounded polygon ``E``.

    ``c0 = 2 pi`` and ``c1 = 2 (int_{B_R(p)} (chi_{E^c} - chi_E) |x - p|^(-2) dx - 2 pi log R)``.
    """
    if not isinstance(rep, PolyBoundary):
        raise BoundaryError("the small-s expansion needs a bounded set (polygon)")
    p = np.asarray(p, dtype=float)
    if np.hypot(*(np.asarray(rep.vertices) - p).T).max() >= R:
        raise BoundaryError("E is not contained in B_R(p)")
    inner = _poly_nmc_radial(rep, p, 0.25, log_R=float(R))
    return {"c0": 2 * math.pi, "c1": 2.0 * (inner - 2 * math.pi * math.log(R))}


def curvature_sweep(rep, s, n=64):
    """``(arclength, H^s)`` samples along a boundary."""
    s = as_order(s).s
    rows = []
    if isinstance(rep, GraphBoundary):
        xs = np.linspace(rep.lo, rep.hi, n + 2)[1:-1]
        du = rep(xs, 1)
        arc = np.concatenate([[0.0], np.cumsum(np.sqrt(1 + du[1:] ** 2) * np.diff(xs))])
        for a, x in zip(arc, xs):
            rows.append((float(a), nmc(rep, x, s)))
    else:
        A, B = rep.segments()
        L = rep.lengths()
        start = np.concatenate([[0.0], np.cumsum(L)[:-1]])
        per = max(1, n // rep.n)
        for k in range(rep.n):
            for f in (np.arange(per) + 0.5) / per:
                rows.append((float(start[k] + f * L[k]), nmc(rep, A[k] + f * (B[k] - A[k]), s)))
    return rows


# ---------------------------------------------------------------------------
# first variation


def bump(center, radius, direction=(0.0, 1.0)):
    """Smooth compactly supported vector field ``direction * exp(1 - 1/(1 - r^2))``."""
    c = np.asarray(center, dtype=float)
    d = np.asarray(direction, dtype=float)

    def v(pts):
        pts = np.asarray(pts, dtype=float)
        r2 = np.sum((pts - c) ** 2, axis=-1) / radius ** 2
        with np.errstate(divide="ignore", over="ignore"):
            amp = np.where(r2 < 1, np.exp(1.0 - 1.0 / np.maximum(1.0 - r2, 1e-300)), 0.0)
        return amp[..., None] * d

    v.support = (c, float(radius))
    return v


def _convex_ray_interval(x, e, halfplanes):
    """Ray parameters ``r >= 0`` with ``n . (x + r e) < c`` for all ``(n, c)``."""
    lo = np.zeros(len(e))
    hi = np.full(len(e), np.inf)
    for nvec, c in halfplanes:
        ne = e @ nvec
        gap = c - x @ nvec
        with np.errstate(divide="ignore", invalid="ignore"):
            r = gap / ne
        hi = np.where(ne > 0, np.minimum(hi, r), hi)
        lo = np.where(ne < 0, np.maximum(lo, r), lo)
        hi = np.where((ne == 0) & (gap <= 0), -np.inf, hi)
    return lo, hi


def _outer_kernel_mass(x, pieces, corners, s, n_panel=48, order=16):
    """``int_G |x - y|^(-2-2s) dy`` for a union ``G`` of disjoint convex polygonal regions."""
    ang = np.sort(np.arctan2(corners[:, 1] - x[1], corners[:, 0] - x[0]) % (2 * np.pi))
    br = np.unique(np.concatenate([np.arange(5) * 0.5 * np.pi, ang]))
    th, w = [], []
    for lo, hi in zip(br[:-1], br[1:]):
        m = max(1, int(math.ceil((hi - lo) / (2 * np.pi / n_panel))))
        ed = np.linspace(lo, hi, m + 1)
        for a, b in zip(ed[:-1], ed[1:]):
            t_, w_ = gauss_legendre(order, a, b)
            th.append(t_)
            w.append(w_)
    th, w = np.concatenate(th), np.concatenate(w)
    e = np.stack([np.cos(th), np.sin(th)], axis=1)
    total = np.zeros(len(th))
    for hp in pieces:
        lo, hi = _convex_ray_interval(x, e, hp)
        ok = hi > lo
        with np.errstate(divide="ignore", invalid="ignore"):
            total += np.where(ok, lo ** (-2 * s) - hi ** (-2 * s), 0.0)
    return float(w @ total) / (2 * s)


def first_variation_check(rep, v, s, t_step, depth=None, n_poly=None, n_rhs=48):
    """Compare ``d/dt Per_s(Phi_t E)`` with ``int v . nu H^s dH`` on a graph.

    The perimeter derivative is a centered difference of polygon perimeters of
    the box-truncated set ``E cap ([-L, L] x [-D, inf))``, corrected by the exact
    derivative of its interaction with the discarded part of ``E``.
    Returns ``{lhs, rhs, gap}``.
    """
    s = as_order(s).s
    g = rep
    if not isinstance(g, GraphBoundary):
        raise BoundaryError("first_variation_check works on graphs")
    c, rad = getattr(v, "support", (None, None))
    if c is None:
        raise BoundaryError("vector field must declare a compact support (center, radius)")
    if not (c[0] - rad > g.lo and c[0] + rad < g.hi):
        raise BoundaryError("vector field is not compactly supported in the sample window")
    Bx = g.hi if abs(g.hi) >= abs(g.lo) else -g.lo
    if not math.isclose(g.lo, -g.hi):
        raise BoundaryError("first_variation_check expects a symmetric window [-L, L]")
    umin = float(min(g.u.min(), c[1] - rad))
    D = depth if depth is not None else max(2.0, 1.0 - umin)
    D = max(D, 1.0 - umin)
    n_poly = n_poly or (len(g.x) - 1)
    xs = np.linspace(-Bx, Bx, n_poly + 1)
    top = np.stack([xs, g(xs)], axis=1)
    moved_pts = np.nonzero(np.hypot(*(top - c).T) < rad)[0]
    if t_step == 0:
        raise BoundaryError("t_step must be nonzero")

    def polygon(t):
        pts = top + t * v(top)
        verts = [(-Bx, -D), (Bx, -D)] + [tuple(q) for q in pts[::-1]]
        return verts

    # segment k of the polygon: 0 bottom, 1 right side, 2 + j top pieces (right to left)
    moved = set()
    for idx in moved_pts:
        j = n_poly - idx   # position of vertex in reversed list
        for seg in (1 + j, 2 + j):
            moved.add(seg % (n_poly + 3))
    if not moved:
        lhs_poly = 0.0
    else:
        Pp = PolyBoundary(polygon(t_step))
        Pm = PolyBoundary(polygon(-t_step))
        if Pp.n != n_poly + 3 or Pm.n != n_poly + 3:
            raise BoundaryError("deformed polygon lost vertices; reduce t_step")
        lhs_poly = per_s_difference(Pp, Pm, moved, s) / (2 * t_step)

    # interaction of the moving boundary with G = E minus the box
    cl, cr = float(g.u[0]), float(g.u[-1])
    ex, ey = np.array([1.0, 0.0]), np.array([0.0, 1.0])
    pieces = [
        [(-ex, -Bx), (ey, cr)],                 # x > B, y < cR
        [(ex, -Bx), (ey, cl)],                  # x < -B, y < cL
        [(ex, Bx), (-ex, Bx), (ey, -D)],        # |x| < B, y < -D
    ]
    corners = np.array([(Bx, cr), (-Bx, cl), (Bx, -D), (-Bx, -D)])
    xq, wq = _support_rule(c[0], rad, n_rhs)
    yq = np.stack([xq, g(xq)], axis=1)
    du = g(xq, 1)
    V = v(yq)
    vn = -V[:, 0] * du + V[:, 1]                 # v . nu dH / dx
    gq = np.array([_outer_kernel_mass(y, pieces, corners, s) for y in yq])
    lhs = lhs_poly - 2.0 * float(wq @ (vn * gq))
    Hq = np.array([_graph_nmc(g, x, s) for x in xq])
    rhs = float(wq @ (vn * Hq))
    return {"lhs": lhs, "rhs": rhs, "gap": abs(lhs - rhs)}


def _support_rule(c, rad, n):
    panels = 8
    xs, ws = [], []
    for k in range(panels):
        a = c - rad + 2 * rad * k / panels
        x, w = gauss_legendre(max(4, n // panels), a, a + 2 * rad / panels)
        xs.append(x)
        ws.append(w)
    return np.concatenate(xs), np.concatenate(ws)


def first_variation_order(rep, v, s, t_step, **kw):
    """Observed convergence order of the perimeter difference quotient in ``t``."""
    vals = [first_variation_check(rep, v, s, t_step / 2 ** k, **kw) for k in range(3)]
    d1 = abs(vals[0]["lhs"] - vals[1]["lhs"])
    d2 = abs(vals[1]["lhs"] - vals[2]["lhs"])
    order = math.log2(d1 / d2) if d2 > 0 and d1 > 0 else float("inf")
    return order, vals


# ---------------------------------------------------------------------------
# second variation


def jacobi_apply(g, eta, xbar, s, n_gl=10, n_gj=14):
    """``int_Sigma [eta(y) - eta(xbar) nu(xbar) . nu(y)] |xbar - y|^(-2-2s) dH(y)``.

    ``eta`` is a function of the abscissa. The singular part is paired
    symmetrically around ``xbar`` so that the odd leading term cancels.
    """
    s = as_order(s).s
    xbar = float(np.atleast_1d(xbar)[0])
    if not (g.lo < xbar < g.hi):
        raise BoundaryError("base point is not on the graph window")
    ub, dub = float(g(xbar)), float(g(xbar, 1))
    eb = float(eta(np.array([xbar]))[0])
    qb = math.sqrt(1 + dub * dub)

    def f(x):
        du = g(x, 1)
        dot = (du * dub + 1.0) / (np.sqrt(1 + du * du) * qb)
        r2 = (x - xbar) ** 2 + (g(x) - ub) ** 2
        return (eta(x) - eb * dot) * np.sqrt(1 + du * du) * r2 ** (-1.0 - s)

    Tsym = min(xbar - g.lo, g.hi - xbar)
    ks = np.abs(g.x - xbar)
    edges = np.unique(np.concatenate([[0.0, Tsym], ks[(ks > 1e-12) & (ks < Tsym)]]))
    total = 0.0
    for j, (lo, hi) in enumerate(zip(edges[:-1], edges[1:])):
        if j == 0:
            t, w = gauss_jacobi_left(n_gj, -2.0 * s, lo, hi)
            w = w * t ** (2.0 * s)
        else:
            t, w = gauss_legendre(n_gl, lo, hi)
        total += float(w @ (f(xbar + t) + f(xbar - t)))
    # remaining window on the long side, then the flat continuation
    if xbar + Tsym < g.hi:
        a, b = xbar + Tsym, g.hi
    else:
        a, b = g.lo, xbar - Tsym
    kn = g.x[(g.x > a) & (g.x < b)]
    ed = np.concatenate([[a], kn, [b]])
    for lo, hi in zip(ed[:-1], ed[1:]):
        t, w = gauss_legendre(n_gl, lo, hi)
        total += float(w @ f(t))
    for end, sign in ((g.hi, 1.0), (g.lo, -1.0)):
        # x = end + sign * (1/w - 1); the integrand behaves like w^(2s) at w = 0
        w_, ww = gauss_jacobi_left(40, 2.0 * s, 0.0, 1.0)
        x = end + sign * (1.0 / w_ - 1.0)
        total += float(ww @ (f(x) / w_ ** (2.0 + 2.0 * s)))
    return total


def deformed_graph(g, pert):
    """Graph of ``Sigma*_eps`` resampled on the grid of ``g``."""
    eps, eta, xbar = pert.epsilon, pert.eta, float(pert.xbar)
    dub = float(g(xbar, 1))
    qb = math.sqrt(1 + dub * dub)
    eb = float(eta(np.array([xbar]))[0])
    k1, k2 = -eb * dub / qb, eb / qb

    def shift(x):
        du = g(x, 1)
        return eps * k1 + eps * eta(x) * du / np.sqrt(1 + du * du)

    Y = g.x
    x = Y + shift(Y)
    for _ in range(60):
        x_new = Y + shift(x)
        if np.max(np.abs(x_new - x)) < 1e-15 * (1 + np.abs(Y).max()):
            x = x_new
            break
        x = x_new
    du = g(x, 1)
    ustar = g(x) - eps * k2 + eps * eta(x) / np.sqrt(1 + du * du)
    return GraphBoundary(Y, ustar)


def second_variation_check(g, eta, xbar, s, epsilon=1e-3):
    """Finite-difference second variation against :func:`jacobi_apply`.

    ``D(eps) = (H_E(xbar) - H_{E*_eps}(xbar)) / (2 eps)`` is extrapolated with
    ``2 D(eps/2) - D(eps)``. The base point must be a sample of ``g``.
    """
    s = as_order(s).s
    if np.min(np.abs(g.x - xbar)) > 1e-12:
        raise BoundaryError("xbar must be one of the graph samples")
    H0 = _graph_nmc(g, xbar, s)

    def D(eps):
        pert = NormalPerturbation(eta, eps, xbar)
        pert.check(g)
        return (H0 - _graph_nmc(deformed_graph(g, pert), xbar, s)) / (2 * eps)

    d1, d2 = D(epsilon), D(epsilon / 2)
    fd = 2 * d2 - d1
    J = jacobi_apply(g, eta, xbar, s)
    return {"fd": fd, "fd_raw": d1, "jacobi": J, "rel_gap": abs(fd - J) / abs(J)}


# ---------------------------------------------------------------------------
# classical reference


def classical_nmc_disk(r, s):
    """``H^s`` of the disk of radius ``r`` at any boundary point."""
    s = as_order(s).s
    return (2 * r) ** (-2 * s) / s * special.beta(0.5, 0.5 - s)
