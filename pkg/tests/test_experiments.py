import numpy as np
import pytest

from fracmin import experiments
from fracmin.core import ProblemError


def test_ring_small_delta_empty():
    rep = experiments.ring(0.05, s=0.25, grid=32)
    assert rep.summary["exterior_cells_in_datum"] > 0
    assert rep.summary["occupied_free_cells"] == 0
    assert rep.summary["energy"] <= rep.summary["energy_lower_half"]


def test_ring_refuses_unresolved_delta():
    with pytest.raises(ProblemError):
        experiments.ring(0.001, grid=16)


def test_sector_truncation_radius_policy():
    assert experiments.sector_R_ext(0.4) == 8.0
    assert experiments.sector_R_ext(0.3) == pytest.approx(4 ** (1 / 0.6))
    assert experiments.sector_R_ext(0.05) == experiments.SECTOR_R_CAP


def test_band_onsets():
    ys = (np.arange(8) - 3.5) * 1.0
    img = np.zeros((8, 4), bool)
    img[:3] = True
    img[3, 1] = True
    img[5, 2] = True
    yp, ym = experiments.band_onsets(img, ys, 4.0, 1.0)
    assert yp == 2.0
    assert ym == 1.0


def test_wall_heights():
    ys = (np.arange(6) - 2.5) * 1.0
    img = np.zeros((6, 3), bool)
    img[:3] = True
    img[3:5, 0] = True
    left, right, full = experiments.wall_heights(img, ys, 1.0)
    assert (left, right, full) == (2.0, 0.0, 0.0)


def test_oscillating_refuses_coarse_cells():
    with pytest.raises(ProblemError):
        experiments.oscillating(M_list=(8,), h=1.0)


def test_unknown_scenario():
    with pytest.raises(ProblemError):
        experiments.experiment_stickiness("nope")
