import math

import numpy as np
import pytest
from sklearn.base import clone

from fracmin import core
from fracmin.core import ExplicitMask, GridSpec, Halfplane, ProblemError, disk_problem, make_problem
from fracmin.interaction import build_model, frac_perimeter
from fracmin.maxflow import push_relabel
from fracmin.mincut import SPerimeterMinimizer, build_network, exhaustive_minimum, minimize


def _random_problem(rng, nx=3, ny=3):
    g = GridSpec((0.0, 0.0), 1.0, nx, ny)
    ext = GridSpec((-4.0, -4.0), 1.0, nx + 8, ny + 8)
    return make_problem(g, {"kind": "rect", "bounds": [0, nx, 0, ny]},
                        ExplicitMask(ext, rng.random((ny + 8, nx + 8)) < 0.5),
                        R_ext=math.hypot(nx, ny) + 1.5)


def test_two_by_two_halfplane_takes_lower_row():
    g = GridSpec((-1.0, -1.0), 1.0, 2, 2)
    pb = make_problem(g, {"kind": "rect", "bounds": [-1, 1, -1, 1]}, Halfplane(), R_ext=8.0)
    res = minimize(pb, 0.25)
    P = pb.free_centers()
    assert np.array_equal(res.mask.bits, P[:, 1] < 0)


def test_empty_datum_gives_empty_minimizer():
    pb = disk_problem(10, core.Empty())
    model = build_model(pb, 0.3)
    assert np.all(model.b == 0)
    res = minimize(pb, 0.3)
    assert not res.mask.bits.any()
    assert res.energy["total"] == 0.0


def test_full_datum_gives_full_minimizer():
    pb = disk_problem(10, core.Complement(core.Empty()))
    res = minimize(pb, 0.3)
    assert res.mask.bits.all()


def test_arc_count_dense():
    pb = disk_problem(6, Halfplane())
    net = build_network(pb, build_model(pb, 0.25))
    n = pb.n_free
    assert net.arc_count == (n * (n - 1) // 2, 2 * n)


@pytest.mark.parametrize("seed", range(6))
def test_matches_exhaustive_search(seed):
    rng = np.random.default_rng(seed)
    pb = _random_problem(rng, 3 + seed % 2, 3)
    s = (0.1, 0.25, 0.4)[seed % 3]
    res = minimize(pb, s)
    best, argmins = exhaustive_minimum(build_network(pb, build_model(pb, s)))
    assert res.maxflow_int == best
    assert any(np.array_equal(res.mask.bits, m) for m in argmins)
    # canonical choice: the smallest minimizer is contained in every other one
    for m in argmins:
        assert np.all(m[res.mask.bits])


def test_cut_value_equals_energy():
    rng = np.random.default_rng(11)
    pb = _random_problem(rng, 4, 4)
    model = build_model(pb, 0.25)
    net = build_network(pb, model)
    for _ in range(5):
        mask = rng.random(pb.n_free) < 0.5
        assert net.cut_value(mask) == pytest.approx(frac_perimeter(pb, mask, model=model)["total"], rel=1e-12)


def test_push_relabel_on_textbook_network():
    # CLRS figure: max flow 23
    edges = [(0, 1, 16), (0, 2, 13), (1, 3, 12), (2, 1, 4), (2, 4, 14), (3, 2, 9), (3, 5, 20),
             (4, 3, 7), (4, 5, 4)]
    from fracmin.maxflow import build_csr
    csr = build_csr(6, np.array([e[0] for e in edges]), np.array([e[1] for e in edges]),
                    np.array([e[2] for e in edges], dtype=np.int64), np.zeros(len(edges), dtype=np.int64))
    flow = push_relabel(6, 0, 5, *csr)[0]
    assert flow == 23


def test_disk_halfplane_minimizer_is_the_halfplane():
    d = Halfplane(angle=math.pi / 2 + 0.4, offset=0.1)
    pb = disk_problem(48, d)
    res = minimize(pb, 0.25)
    P = pb.free_centers()
    wrong = res.mask.bits != d.membership(P)
    dist = np.abs(P @ np.asarray(d.normal) - d.offset)
    assert wrong.sum() <= 4
    assert np.all(dist[wrong] <= pb.h)


def test_result_summary_fields():
    pb = disk_problem(8, Halfplane())
    out = minimize(pb, 0.25).to_dict()
    assert set(out["energy"]) >= {"t1", "t2", "t3", "total", "tail_bound"}
    assert out["occupied"] == pb.n_free // 2


def test_estimator_params_clone_fit_predict():
    est = SPerimeterMinimizer(s=0.3)
    assert est.get_params() == {"s": 0.3, "r_cut": None, "tails": True, "quantum_bits": 48}
    est.set_params(s=0.2)
    twin = clone(est)
    assert twin.get_params()["s"] == 0.2 and not hasattr(twin, "result_")
    pb = disk_problem(16, Halfplane())
    est.fit(pb)
    pred = est.predict(np.array([[0.1, -0.5], [0.1, 0.5], [0.0, -3.0], [0.0, 3.0]]))
    assert pred.tolist() == [True, False, True, False]
    assert est.score() == pytest.approx(-est.energy_["total"])


def test_estimator_validation():
    with pytest.raises(ProblemError):
        SPerimeterMinimizer().fit(np.zeros((3, 2)))
    with pytest.raises(ProblemError):
        SPerimeterMinimizer(s=0.7).fit(disk_problem(4, Halfplane()))
    with pytest.raises(ProblemError):
        SPerimeterMinimizer(r_cut=-1.0).fit(disk_problem(4, Halfplane()))
    est = SPerimeterMinimizer().fit(disk_problem(4, Halfplane()))
    with pytest.raises(ProblemError):
        est.predict(np.zeros((3, 3)))
    with pytest.raises(ProblemError):
        est.predict(np.array([[np.nan, 0.0]]))
    with pytest.raises(ProblemError):
        SPerimeterMinimizer().predict(np.zeros((1, 2)))


def test_coarse_quantum_still_optimal_within_rounding():
    pb = _random_problem(np.random.default_rng(2), 3, 3)
    exact = SPerimeterMinimizer(s=0.25).fit(pb)
    coarse = SPerimeterMinimizer(s=0.25, quantum_bits=12).fit(pb)
    n = pb.n_free
    total = coarse.result_.maxflow / max(coarse.result_.maxflow_int, 1)
    assert coarse.energy_["total"] <= exact.energy_["total"] + (n * n) * total


def test_r_cut_adds_to_tail_bound():
    pb = disk_problem(12, Halfplane())
    full = minimize(pb, 0.25)
    cut = minimize(pb, 0.25, r_cut=0.5)
    assert cut.energy["tail_bound"] > full.energy["tail_bound"]
    assert abs(cut.energy["total"] - full.energy["total"]) <= cut.energy["tail_bound"]
