import math

import numpy as np
import pytest

from fracmin import core
from fracmin.core import (FractionalOrder, GridSpec, Halfplane, ProblemError, disk_problem,
                          geometric_constants, make_problem)


@pytest.mark.parametrize("s", [0.0, 0.5, -0.2, 1.0, float("nan"), float("inf")])
def test_order_rejects_outside_open_interval(s):
    with pytest.raises(ProblemError):
        FractionalOrder(s)


def test_order_kernel_exponent():
    assert FractionalOrder(0.25).kernel_exponent == pytest.approx(2.5)


@pytest.mark.parametrize("n,kappa", [(1, 2.0), (2, math.pi), (3, 4 * math.pi / 3)])
def test_geometric_constants_low_dimensions(n, kappa):
    c = geometric_constants(n)
    assert c["kappa_n"] == pytest.approx(kappa, rel=1e-14)
    assert c["varpi_n"] == pytest.approx(n * kappa, rel=1e-14)


def test_grid_centers_and_index_roundtrip():
    g = GridSpec((-1.0, -2.0), 0.25, 8, 16)
    cx, cy = g.centers()
    assert cx.shape == (16, 8)
    ix, iy = g.index_of(cx.ravel(), cy.ravel())
    assert np.array_equal(ix, np.tile(np.arange(8), 16))
    assert np.array_equal(iy, np.repeat(np.arange(16), 8))


def test_halfplane_membership_and_complement():
    d = Halfplane(angle=0.0, offset=1.0)
    pts = np.array([[0.5, 3.0], [1.5, -3.0], [1.0, 0.0]])
    assert d.membership(pts).tolist() == [True, False, False]
    assert d.complement().membership(pts).tolist() == [False, True, True]


def test_datum_roundtrip_through_dict():
    for d in (core.Halfplane(0.3, 0.1), core.Sector(), core.RingCap(0.2), core.OscillatingJM(4.0),
              core.PerturbedHalfplane(0.5), core.Disk(0.7), core.Empty()):
        again = core.datum_from_dict(d.to_dict())
        pts = np.random.default_rng(1).uniform(-5, 5, (500, 2))
        assert np.array_equal(again.membership(pts), d.membership(pts))


def test_problem_rejects_small_truncation_radius():
    g = GridSpec((-1.0, -1.0), 0.5, 4, 4)
    with pytest.raises(ProblemError):
        make_problem(g, {"kind": "rect", "bounds": [-1, 1, -1, 1]}, Halfplane(), R_ext=1.0)


def test_disk_problem_layout():
    pb = disk_problem(16, Halfplane())
    assert pb.h == pytest.approx(1 / 8)
    P = pb.free_centers()
    assert np.all(np.hypot(P[:, 0], P[:, 1]) < 1.0)
    # all fixed cells below the axis are in E
    ex, ey = pb.ext_grid.centers()
    fixed = pb.ext_state >= 0
    assert np.array_equal(pb.ext_state[fixed] == 1, ey[fixed] < 0)


def test_problem_json_roundtrip(tmp_path):
    pb = disk_problem(12, core.RingCap(0.3), R_ext=3.0)
    path = tmp_path / "p.json"
    core.problem_to_json(pb, path)
    again = core.problem_from_json(path)
    assert np.array_equal(again.omega, pb.omega)
    assert np.array_equal(again.ext_state, pb.ext_state)


def test_pgm_roundtrip(tmp_path):
    img = np.random.default_rng(0).random((7, 5)) < 0.5
    core.write_pgm(tmp_path / "m.pgm", img, comment="x")
    assert np.array_equal(core.read_pgm(tmp_path / "m.pgm"), img)


def test_mask_length_checked():
    pb = disk_problem(8, Halfplane())
    with pytest.raises(ProblemError):
        pb.mask_to_image(np.zeros(pb.n_free + 1, bool))
