"""Exact minimization of the discrete three-term perimeter by minimum cut.

Each free cell is a node. The source side of a cut is the set E inside the
free region: the arc ``source -> i`` (capacity ``b_i``) is cut when ``i`` is
left out of E, the arc ``i -> sink`` (capacity ``a_i``) when ``i`` is put in,
and the pair arcs carry ``w_ij`` both ways. The cut value of a mask is then
exactly ``t1 + t2 + t3``.
"""

import time
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator

from . import maxflow
from ._validation import check_int_range, check_points, check_positive
from .core import Mask, PixelProblem, ProblemError, as_order
from .interaction import build_model, fixed_constant, frac_perimeter

QUANTUM_BITS = 48


@dataclass(eq=False)
class FlowNetwork:
    """Pair arcs ``(i, j, w)`` with ``i < j``, unary capacities and bookkeeping.

    ``constant`` is the mask-independent interaction between fixed cells. It
    is reported, not added: cut values equal the three-term energy.
    """

    n_free: int
    i: np.ndarray = field(repr=False)
    j: np.ndarray = field(repr=False)
    w: np.ndarray = field(repr=False)
    a: np.ndarray = field(repr=False)
    b: np.ndarray = field(repr=False)
    constant: float = 0.0
    tail_bound: float = 0.0
    quantum: float = None

    def __post_init__(self):
        total = 2.0 * float(self.w.sum()) + float(self.a.sum()) + float(self.b.sum())
        if self.quantum is None:
            self.quantum = total / 2.0**QUANTUM_BITS if total > 0 else 1.0
        q = self.quantum
        self.wq = np.rint(self.w / q).astype(np.int64)
        self.aq = np.rint(self.a / q).astype(np.int64)
        self.bq = np.rint(self.b / q).astype(np.int64)

    @property
    def n_nodes(self):
        return self.n_free + 2

    @property
    def arc_count(self):
        """``(pair arcs, terminal arcs)``; each pair counts once."""
        return len(self.w), 2 * self.n_free

    def _cut(self, mask, w, a, b):
        bits = np.asarray(getattr(mask, "bits", mask), dtype=bool)
        if bits.shape != (self.n_free,):
            raise ProblemError("mask length does not match the network")
        across = bits[self.i] != bits[self.j]
        return w[across].sum() + a[bits].sum() + b[~bits].sum()

    def cut_value(self, mask):
        """Floating-point cut value of the partition induced by ``mask``."""
        return float(self._cut(mask, self.w, self.a, self.b))

    def int_cut_value(self, mask):
        """Cut value in units of ``quantum`` (exact integer arithmetic)."""
        return int(self._cut(mask, self.wq, self.aq, self.bq))


@dataclass(eq=False)
class MinimizerResult:
    mask: Mask
    energy: dict
    maxflow: float
    canonical: bool
    stats: dict
    maxflow_int: int = 0
    constant: float = 0.0

    def to_dict(self):
        return {
            "energy": {k: float(v) for k, v in self.energy.items()},
            "maxflow": float(self.maxflow),
            "maxflow_quanta": int(self.maxflow_int),
            "fixed_constant": float(self.constant),
            "canonical": bool(self.canonical),
            "stats": dict(self.stats),
            "occupied": int(np.count_nonzero(self.mask.bits)),
        }


def build_network(problem, model):
    """Flow network of ``problem`` under the interaction ``model``."""
    if model.problem is not problem:
        raise ProblemError("interaction model was assembled for a different problem")
    W = model.dense_weights()
    iu, ju = np.triu_indices(problem.n_free, k=1)
    w = W[iu, ju]
    if (w < 0).any() or (model.a < 0).any() or (model.b < 0).any():
        raise ProblemError("negative interaction weight; the kernel tables are inconsistent")
    keep = w > 0
    return FlowNetwork(problem.n_free, iu[keep], ju[keep], w[keep], model.a.copy(), model.b.copy(),
                       constant=fixed_constant(problem, model.s), tail_bound=model.tail_bound)


def solve(network):
    """Minimum cut with the smallest possible source side.

    Phase one of push-relabel runs on the reversed network (terminals
    swapped, arcs turned around). In the reversed residual graph the nodes
    that still reach the new sink form the smallest sink side there, which
    is the smallest source side of the original cut.
    """
    t0 = time.perf_counter()
    n = network.n_free
    src, snk = n, n + 1  # reversed: old sink becomes the source
    term = np.arange(n, dtype=np.int64)
    tail = np.concatenate([network.i, np.full(n, src), term])
    head = np.concatenate([network.j, term, np.full(n, snk)])
    cap = np.concatenate([network.wq, network.aq, network.bq])
    rcap = np.concatenate([network.wq, np.zeros(2 * n, dtype=np.int64)])
    start, hd, cp, rev = maxflow.build_csr(n + 2, tail, head, cap, rcap)
    value, pushes, relabels = maxflow.push_relabel(n + 2, src, snk, start, hd, cp, rev)
    side = maxflow.reaches_sink(n + 2, snk, start, hd, cp, rev)
    bits = side[:n].copy()
    return Mask(bits), int(value), {"pushes": int(pushes), "relabels": int(relabels),
                                    "seconds": time.perf_counter() - t0}


def minimize(problem, s, r_cut=None, quantum=None, tails=True, model=None):
    """Assemble, cut and cross-check one instance."""
    if not isinstance(problem, PixelProblem):
        raise ProblemError("minimize expects a PixelProblem")
    s = as_order(s).s
    t0 = time.perf_counter()
    if model is None:
        model = build_model(problem, s, r_cut=r_cut, tails=tails)
    net = build_network(problem, model)
    if quantum is not None:
        net = FlowNetwork(net.n_free, net.i, net.j, net.w, net.a, net.b, net.constant,
                          net.tail_bound, quantum=check_positive("quantum", quantum))
    t1 = time.perf_counter()
    mask, flow, stats = solve(net)
    energy = frac_perimeter(problem, mask, model=model)
    q = net.quantum
    N = max(problem.n_free, 1)
    if abs(energy["total"] - flow * q) > N * N * q:
        raise ArithmeticError(
            f"cut value {flow * q!r} and re-evaluated energy {energy['total']!r} disagree"
        )
    stats.update(assembly_seconds=t1 - t0, n_free=problem.n_free, pair_arcs=len(net.w),
                 quantum=q)
    return MinimizerResult(mask, energy, flow * q, True, stats, flow, net.constant)


def exhaustive_minimum(network):
    """Integer-exact minimum over all ``2^N`` masks and the argmin list (``N <= 20``)."""
    n = network.n_free
    if n > 20:
        raise ProblemError("exhaustive search is limited to 20 free cells")
    codes = np.arange(2**n, dtype=np.int64)
    bits = ((codes[:, None] >> np.arange(n)) & 1).astype(bool)
    vals = bits @ network.aq + (~bits) @ network.bq
    for i, j, w in zip(network.i, network.j, network.wq):
        vals += w * (bits[:, i] != bits[:, j])
    best = int(vals.min())
    return best, [bits[k] for k in np.nonzero(vals == best)[0]]


class SPerimeterMinimizer(BaseEstimator):
    """Estimator wrapper around :func:`minimize`.

    ``fit`` takes a :class:`PixelProblem` in place of a feature matrix;
    ``predict`` reports membership of the minimizing set at given points.
    """

    def __init__(self, s=0.25, r_cut=None, tails=True, quantum_bits=QUANTUM_BITS):
        self.s = s
        self.r_cut = r_cut
        self.tails = tails
        self.quantum_bits = quantum_bits

    def fit(self, X, y=None):
        if not isinstance(X, PixelProblem):
            raise ProblemError("fit expects a PixelProblem")
        as_order(self.s)
        bits = check_int_range("quantum_bits", self.quantum_bits, 8, 56)
        r_cut = check_positive("r_cut", self.r_cut, allow_none=True)
        model = build_model(X, self.s, r_cut=r_cut, tails=bool(self.tails))
        net = build_network(X, model)
        quantum = None
        if bits != QUANTUM_BITS:
            total = 2.0 * float(net.w.sum()) + float(net.a.sum()) + float(net.b.sum())
            quantum = total / 2.0**bits if total > 0 else 1.0
        self.result_ = minimize(X, self.s, quantum=quantum, model=model)
        self.problem_ = X
        self.mask_ = self.result_.mask
        self.energy_ = self.result_.energy
        return self

    def predict(self, X):
        """Membership (bool) of the fitted set at points ``X`` of shape ``(m, 2)``."""
        if not hasattr(self, "result_"):
            raise ProblemError("estimator is not fitted")
        pts = check_points(X)
        pb = self.problem_
        out = pb.exterior.membership(pts)
        ix, iy = pb.grid.index_of(pts[:, 0], pts[:, 1])
        g = pb.grid
        ok = (ix >= 0) & (ix < g.nx) & (iy >= 0) & (iy < g.ny)
        img = pb.mask_to_image(self.mask_)
        sel = np.zeros(len(pts), dtype=bool)
        sel[ok] = pb.omega[iy[ok], ix[ok]]
        out[sel] = img[iy[sel], ix[sel]]
        return out

    def score(self, X=None, y=None):
        """Negative three-term energy of the fitted set."""
        return -float(self.energy_["total"])

