import math

import numpy as np
import pytest

from fracmin.core import ProblemError
from fracmin.diagnostics import (balanced_direction, classical_perimeter, crossing_profile,
                                 digitization_experiment, digitize_rotated_square, farey_directions,
                                 flatness_certificate, halfplane_symdiff, line_sequences,
                                 rotated_square)


def _grid(n, h):
    origin = (-n * h / 2, -n * h / 2)
    c = origin[0] + (np.arange(n) + 0.5) * h
    X, Y = np.meshgrid(c, c)
    return X, Y, origin


def test_classical_perimeter_of_a_block():
    img = np.zeros((6, 6), bool)
    img[1:4, 2:5] = True
    assert classical_perimeter(img, 0.5) == pytest.approx(0.5 * 12)


def test_classical_perimeter_padding_rules():
    img = np.ones((4, 4), bool)
    assert classical_perimeter(img, 1.0) == 16.0
    assert classical_perimeter(img, 1.0, pad=True) == 0.0
    assert classical_perimeter(img, 1.0, pad=None) == 0.0


def test_classical_perimeter_window_brute_force():
    rng = np.random.default_rng(0)
    img = rng.random((20, 20)) < 0.5
    h, origin, win = 0.1, (-1.0, -1.0), (0.1, -0.2, 0.6)
    count = 0
    for iy in range(20):
        for ix in range(20):
            cx, cy = origin[0] + (ix + 0.5) * h, origin[1] + (iy + 0.5) * h
            for dx, dy in ((1, 0), (0, 1)):
                jx, jy = ix + dx, iy + dy
                if jx < 20 and jy < 20 and img[iy, ix] != img[jy, jx]:
                    mx, my = cx + dx * h / 2, cy + dy * h / 2
                    count += (mx - win[0]) ** 2 + (my - win[1]) ** 2 < win[2] ** 2
    assert classical_perimeter(img, h, origin, window=win, pad=None) == pytest.approx(count * h)


def test_halfplane_crossings_sign_convention():
    h = 1 / 16
    X, Y, origin = _grid(48, h)
    img = Y < 0
    up = crossing_profile(img, h, (0, 1), origin)
    # moving up, every vertical line leaves E once inside the unit disk
    assert up.Phi_plus == 0.0
    assert up.Phi_minus == pytest.approx(2.0, abs=2 * h)
    down = crossing_profile(img, h, (0, -1), origin)
    assert down.Phi_plus == pytest.approx(up.Phi_minus)


def test_rational_direction_spacing():
    p = crossing_profile(np.zeros((10, 10), bool), 0.5, (2, 1), (-2.5, -2.5), (0, 0, 2.0))
    assert p.spacing == pytest.approx(0.5 / math.sqrt(5))
    assert np.allclose(p.v, np.array([2, 1]) / math.sqrt(5))
    with pytest.raises(ProblemError):
        crossing_profile(np.zeros((4, 4), bool), 1.0, (0.5, 1.0))
    with pytest.raises(ProblemError):
        crossing_profile(np.zeros((4, 4), bool), 1.0, (0, 0))


def test_line_sequences_follow_direction():
    h = 0.25
    X, Y, origin = _grid(8, h)
    img = X + Y < 0
    seqs = line_sequences(img, h, (1, 1), origin, window=(0, 0, 10))
    for seq in seqs.values():
        assert np.all(np.diff(seq.astype(int)) <= 0)


def test_farey_directions_are_primitive_and_unique():
    dirs = farey_directions(5)
    assert len(set(dirs)) == len(dirs)
    assert all(math.gcd(p, q) == 1 for p, q in dirs)
    assert (1, 0) in dirs and (0, 1) in dirs


def test_balanced_direction_on_tilted_halfplane():
    h = 1 / 32
    X, Y, origin = _grid(96, h)
    theta = 0.3
    img = (-math.sin(theta)) * X + math.cos(theta) * Y < 0
    v, d, psi = balanced_direction(img, h, origin)
    # balanced direction runs along the edge
    assert abs(abs(v @ np.array([math.cos(theta), math.sin(theta)])) - 1) < 0.01
    assert abs(psi) <= 2 * h


def test_flatness_certificate_halfplane_and_flipped_cell():
    h = 1 / 16
    X, Y, origin = _grid(48, h)
    img = Y < 0
    cert = flatness_certificate(img, h, origin)
    assert cert.symdiff_area == pytest.approx(0.0, abs=1e-12)
    assert cert.below
    bad = img.copy()
    iy, ix = 24 + 3, 24 + 2
    bad[iy, ix] = True
    assert flatness_certificate(bad, h, origin).symdiff_area == pytest.approx(h * h, rel=1e-9)


def test_halfplane_symdiff_of_disk_half():
    h = 1 / 8
    X, Y, origin = _grid(24, h)
    empty = np.zeros_like(X, dtype=bool)
    area = halfplane_symdiff(empty, h, origin, (0.0, 1.0), 0.0, True)
    assert area == pytest.approx(math.pi / 2, rel=1e-4)


def test_digitized_rotated_square_contains_square():
    img, origin = digitize_rotated_square(1 / 32)
    h = 1 / 32
    n = img.shape[0]
    c = origin[0] + (np.arange(n) + 0.5) * h
    X, Y = np.meshgrid(c, c)
    inside = np.abs(X) + np.abs(Y) < 1 / math.sqrt(2) - h
    assert img[inside].all()
    assert rotated_square().area() == pytest.approx(1.0)


def test_digitization_rejects_coarse_cells():
    with pytest.raises(ProblemError):
        digitization_experiment(0.25, [0.25])


def test_digitization_classical_values():
    out = digitization_experiment(0.25, [1 / 16, 1 / 32])
    assert [r["classical"] for r in out["rows"]] == [6.0, 5.75]
