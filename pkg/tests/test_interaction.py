
import numpy as np
import pytest
from scipy import integrate

from fracmin import core, interaction
from fracmin.boundary import PolyBoundary, per_s_boundary_integral
from fracmin.interaction import (build_model, brute_force_perimeter, cell_pair_weight,
                                 frac_perimeter, offset_weights, set_perimeter)


def _tri(t):
    return max(0.0, 1.0 - abs(t))


def _pair_oracle(dx, dy, s):
    """Unit cells at integer offset: ``x - y`` has density ``tri(u - dx) tri(v - dy)``.

    Integrated piece by piece over the four unit squares where the density is
    bilinear; touching cells leave an integrable corner singularity.
    """
    tot = 0.0
    for u0 in (dx - 1, dx):
        for v0 in (dy - 1, dy):
            tot += integrate.dblquad(lambda v, u: _tri(u - dx) * _tri(v - dy) * (u * u + v * v) ** (-1 - s),
                                     u0, u0 + 1, v0, v0 + 1, epsabs=1e-14, epsrel=1e-12)[0]
    return tot


@pytest.mark.filterwarnings("ignore::scipy.integrate.IntegrationWarning")
@pytest.mark.parametrize("s", [0.1, 0.25, 0.4])
@pytest.mark.parametrize("dx,dy", [(1, 0), (1, 1), (2, 1), (3, 0), (5, 4)])
def test_pair_weight_matches_convolution_oracle(dx, dy, s):
    w = cell_pair_weight((0.0, 0.0, 1.0), (float(dx), float(dy), 1.0), s)
    assert w == pytest.approx(_pair_oracle(dx, dy, s), rel=1e-8)


def test_far_pair_weight_monte_carlo():
    s, d = 0.25, 100.0
    rng = np.random.default_rng(7)
    x = rng.random((400_000, 2))
    y = rng.random((400_000, 2)) + [d, 0.0]
    mc = np.mean(np.sum((x - y) ** 2, axis=1) ** (-1 - s))
    w = offset_weights(np.array([100]), np.array([0]), s)[0]
    assert w == pytest.approx(mc, rel=2e-5)


def test_pair_weight_scaling_and_symmetry():
    s = 0.3
    a = cell_pair_weight((0.0, 0.0, 0.5), (1.5, 0.5, 0.5), s)
    b = cell_pair_weight((0.0, 0.0, 1.0), (3.0, 1.0, 1.0), s)
    assert a == pytest.approx(b * 0.5 ** (2 - 2 * s), rel=1e-9)
    assert cell_pair_weight((1.5, 0.5, 0.5), (0.0, 0.0, 0.5), s) == a


def test_pair_weight_rejects_overlap():
    with pytest.raises(core.ProblemError):
        cell_pair_weight((0.0, 0.0, 1.0), (0.5, 0.0, 1.0), 0.25)


def test_l_shape_grid_matches_boundary_integral():
    s, n = 0.25, 16
    img = np.zeros((2 * n, 2 * n), bool)
    img[:n, :] = True
    img[:, :n] = True
    L = PolyBoundary([(0, 0), (2, 0), (2, 1), (1, 1), (1, 2), (0, 2)])
    assert set_perimeter(img, 1 / n, s) == pytest.approx(per_s_boundary_integral(L, s), rel=1e-3)


def test_three_terms_match_brute_force():
    rng = np.random.default_rng(3)
    g = core.GridSpec((0.0, 0.0), 1.0, 4, 3)
    ext = core.ExplicitMask(core.GridSpec((-4.0, -4.0), 1.0, 12, 11), rng.random((11, 12)) < 0.5)
    pb = core.make_problem(g, {"kind": "rect", "bounds": [0, 4, 0, 3]}, ext, R_ext=4.5)
    for tails in (False, True):
        model = build_model(pb, 0.25, tails=tails)
        for _ in range(5):
            mask = rng.random(pb.n_free) < 0.5
            fast = frac_perimeter(pb, mask, model=model)
            slow = brute_force_perimeter(pb, mask, model)
            for k in ("t1", "t2", "t3", "total"):
                assert fast[k] == pytest.approx(slow[k], rel=1e-9, abs=1e-12)


def test_halfplane_energy_independent_of_truncation():
    # the datum edge runs along cell edges, so the digitized datum is exact
    e = []
    for R in (3.0, 4.5, 8.0):
        pb = core.disk_problem(8, core.Halfplane(), R_ext=R)
        P = pb.free_centers()
        res = frac_perimeter(pb, P[:, 0] < 0.3, 0.25)
        assert res["tail_bound"] == 0.0
        e.append(res["total"])
    assert max(e) == pytest.approx(min(e), rel=2e-5)


def test_halfplane_unary_terms_symmetric():
    # reflection in the datum edge swaps E and E^c, hence a and b
    pb = core.disk_problem(16, core.Halfplane(), R_ext=8.0)
    model = build_model(pb, 0.25)
    P = pb.free_centers()
    order = np.lexsort((P[:, 0], P[:, 1]))
    mirror = np.lexsort((P[:, 0], -P[:, 1]))
    assert np.allclose(model.a[order], model.b[mirror], rtol=1e-6)
    top = np.argmax(P[:, 1])
    assert model.a[top] > model.b[top]


def test_numeric_tail_within_bound():
    lo = build_model(core.disk_problem(8, core.Sector(), R_ext=3.0), 0.25)
    hi = build_model(core.disk_problem(8, core.Sector(), R_ext=6.0), 0.25)
    assert lo.tail_bound > 0
    assert np.all(np.abs(lo.b - hi.b) <= lo.tail_bound / lo.n)


def test_ring_unary_terms():
    model = build_model(core.disk_problem(16, core.RingCap(0.1)), 0.25)
    P = model.problem.free_centers()
    assert np.all(model.a > 0) and np.all(model.b > 0)
    top = P[:, 1] > 0.8
    assert np.all(model.b[top] < 0.1 * model.a[top])


def test_sobolev_identity_small_image():
    img = np.random.default_rng(5).random((6, 7)) < 0.5
    gap = interaction.sobolev_identity_gap(img, 0.2)
    assert gap <= 1e-10 * set_perimeter(img, 1.0, 0.2)


def test_empty_set_has_zero_perimeter():
    assert set_perimeter(np.zeros((4, 4), bool), 0.5, 0.25) == 0.0


def test_weights_csv_export(tmp_path):
    pb = core.disk_problem(6, core.Halfplane())
    model = build_model(pb, 0.25)
    path = tmp_path / "w.csv"
    interaction.export_weights_csv(model, path)
    rows = path.read_text().splitlines()
    assert rows[0] == "dx,dy,weight"
    dx, dy, w = rows[1].split(",")
    assert float(w) > 0
