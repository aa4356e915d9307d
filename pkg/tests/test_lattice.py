import numpy as np
import pytest

from displab.lattice import TorusLattice, make_lattice


def test_1d_16_modes():
    lat = make_lattice(1, 16)
    assert lat.dim == 1
    assert lat.shape == (16,)
    assert set(lat.modes(0).tolist()) == set(range(-8, 8))


def test_2d_8_mode_grid():
    lat = make_lattice(2, 8)
    assert lat.shape == (8, 8)
    assert lat.mode_count == 64
    assert set(lat.modes(0).tolist()) == set(range(-4, 4))
    assert set(lat.modes(1).tolist()) == set(range(-4, 4))


def test_period_scale_halves_frequencies():
    lat = make_lattice(1, 16, period_scale=2.0)
    freqs = sorted(lat.frequencies(0).tolist())
    assert freqs == [k / 2.0 for k in range(-8, 8)]
    assert lat.nyquist == 4.0


def test_modes_follow_fft_order():
    lat = make_lattice(1, 8)
    assert lat.modes(0).tolist() == [0, 1, 2, 3, -4, -3, -2, -1]


@pytest.mark.parametrize("bad", [0, 1, 4, 12, 20, 100])
def test_modes_per_axis_must_be_dyadic_and_at_least_8(bad):
    with pytest.raises(ValueError):
        make_lattice(1, bad)


def test_period_scale_must_be_positive():
    with pytest.raises(ValueError):
        make_lattice(1, 16, period_scale=0.0)
    with pytest.raises(ValueError):
        make_lattice(2, 16, period_scale=(1.0, -2.0))


def test_dim_must_be_one_or_two():
    with pytest.raises(ValueError):
        make_lattice(3, 16)
    with pytest.raises(ValueError):
        make_lattice(0, 16)


def test_zero_mode_exists_on_every_axis():
    for dim in (1, 2):
        lat = make_lattice(dim, 8)
        for ax in range(dim):
            assert 0 in lat.modes(ax)


def test_lattice_caching_returns_identical_object():
    a = make_lattice(2, 32, period_scale=(1.0, 2.0))
    b = make_lattice(2, 32, period_scale=(1.0, 2.0))
    assert a is b
    assert a == b
    assert hash(a) == hash(b)


def test_grid_spacing():
    lat = make_lattice(1, 16, period_scale=2.0)
    x = lat.grid(0)
    assert x[0] == 0.0
    assert np.allclose(np.diff(x), 2.0 * np.pi * 2.0 / 16)


def test_abs_frequency_is_euclidean():
    lat = make_lattice(2, 8)
    r = lat.abs_frequency()
    g1, g2 = lat.frequency_grids()
    assert np.array_equal(r, np.hypot(*np.broadcast_arrays(g1, g2)))


def test_with_modes_changes_resolution_only():
    lat = make_lattice(2, 8, period_scale=(1.0, 3.0))
    fine = lat.with_modes(32)
    assert fine.modes_per_axis == 32
    assert fine.period_scale == lat.period_scale
    assert fine.dim == lat.dim
