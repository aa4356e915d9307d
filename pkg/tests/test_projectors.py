"""Band projector fixtures plus the direct-convolution oracle for
separated products.

The oracle multiplies coefficient pairs one by one and filters on the
modulus gap; nothing in it touches FFTs or the library's pair machinery.
"""

import numpy as np
import pytest

from displab.fields import FourierField, random_field, synthesize
from displab.lattice import make_lattice
from displab.projectors import (
    BandProjector,
    dyadic_bands,
    project,
    separated_product,
    slice_band,
)


def _field_with_modes(lat, mode_to_coeff):
    c = np.zeros(lat.shape, dtype=np.complex128)
    modes = lat.modes(0)
    for k, v in mode_to_coeff.items():
        c[np.nonzero(modes == k)[0][0]] = v
    return FourierField(lat, c)


def separated_product_oracle(u1, u2, threshold):
    """O(M^2) double sum keeping pairs with ||k1|-|k2|| > threshold.

    Returns {output mode: coefficient}; the padded result lattice is big
    enough that no pair can alias, so every sum is present.
    """
    lat = u1.lattice
    modes = lat.modes(0)
    scale = lat.period_scale[0]
    out = {}
    for i1, k1 in enumerate(modes):
        if u1.coeffs[i1] == 0:
            continue
        for i2, k2 in enumerate(modes):
            if u2.coeffs[i2] == 0:
                continue
            if abs(abs(k1) - abs(k2)) / scale <= threshold:
                continue
            total = int(k1 + k2)
            out[total] = out.get(total, 0.0) + u1.coeffs[i1] * u2.coeffs[i2]
    return out


def _assert_matches_mode_dict(field, expected, tol=1e-12):
    modes = field.lattice.modes(0)
    for i, k in enumerate(modes):
        want = expected.get(int(k), 0.0)
        assert abs(field.coeffs[i] - want) < tol, f"mode {k}"


# -- sharp dyadic -----------------------------------------------------------


def test_p1_retains_modes_zero_and_one():
    lat = make_lattice(1, 16)
    u = _field_with_modes(lat, {0: 1.0, 1: 2.0, 3: 3.0, 5: 4.0})
    kept = project(u, BandProjector.sharp_dyadic(1))
    expected = _field_with_modes(lat, {0: 1.0, 1: 2.0})
    assert np.array_equal(kept.coeffs, expected.coeffs)


def test_p2_retains_mode_three():
    lat = make_lattice(1, 16)
    u = _field_with_modes(lat, {0: 1.0, 1: 2.0, 3: 3.0, 5: 4.0})
    kept = project(u, BandProjector.sharp_dyadic(2))
    expected = _field_with_modes(lat, {3: 3.0})
    assert np.array_equal(kept.coeffs, expected.coeffs)


def test_sharp_partition_of_unity_is_exact():
    for dim in (1, 2):
        lat = make_lattice(dim, 32)
        rng = np.random.default_rng(dim)
        u = FourierField(lat, rng.standard_normal(lat.shape) + 1j * rng.standard_normal(lat.shape))
        total = np.zeros(lat.shape, dtype=np.complex128)
        for n in dyadic_bands(lat):
            total = total + project(u, BandProjector.sharp_dyadic(n)).coeffs
        assert np.array_equal(total, u.coeffs)


def test_sharp_projection_is_idempotent_exactly():
    lat = make_lattice(1, 64)
    rng = np.random.default_rng(4)
    u = FourierField(lat, rng.standard_normal(64) + 1j * rng.standard_normal(64))
    p = BandProjector.sharp_dyadic(4)
    once = project(u, p)
    twice = project(once, p)
    assert np.array_equal(once.coeffs, twice.coeffs)


def test_band_must_be_dyadic():
    with pytest.raises(ValueError):
        BandProjector.sharp_dyadic(3)
    with pytest.raises(ValueError):
        BandProjector.sharp_dyadic(0)


# -- smooth dyadic ----------------------------------------------------------


def test_smooth_symbol_support_and_plateau():
    lat = make_lattice(1, 256)
    n = 16
    sym = BandProjector.smooth_dyadic(n).symbol(lat)
    r = np.abs(lat.frequencies(0))
    assert np.all(sym[(r >= n) & (r < 2 * n)] == 1.0)
    assert np.all(sym[(r < n / 2) | (r >= 4 * n)] == 0.0)
    inside = (r >= n / 2) & (r < 4 * n)
    assert np.all(sym[inside] >= 0.0) and np.all(sym[inside] <= 1.0)


def test_smooth_projection_preserves_realness():
    lat = make_lattice(1, 128)
    u = random_field(lat, BandProjector.sharp_dyadic(8), seed=0, real_symmetric=True)
    v = project(u, BandProjector.smooth_dyadic(8))
    assert v.real_symmetric
    assert np.max(np.abs(synthesize(v).imag)) == 0.0


# -- interval slices --------------------------------------------------------


def test_slice_band_p16_quarter_width():
    lat = make_lattice(1, 128)
    pieces = slice_band(16, 0.25)
    assert len(pieces) == 8
    u = random_field(lat, BandProjector.sharp_dyadic(16), seed=3)
    total = np.zeros(lat.shape, dtype=np.complex128)
    for piece in pieces:
        total = total + project(u, piece).coeffs
    assert np.array_equal(total, project(u, BandProjector.sharp_dyadic(16)).coeffs)


def test_slice_band_p8_eighth_width():
    assert len(slice_band(8, 0.125)) == 16


def test_slices_are_disjoint():
    lat = make_lattice(1, 128)
    pieces = slice_band(16, 0.25)
    coverage = sum(p.mask(lat).astype(int) for p in pieces)
    assert coverage.max() <= 1


# -- separated products -----------------------------------------------------


def test_equal_moduli_pair_is_killed():
    lat = make_lattice(1, 64)
    u1 = _field_with_modes(lat, {8: 1.0})
    u2 = _field_with_modes(lat, {-8: 1.0})
    out = separated_product(u1, u2, 4.0)
    assert out.norm == 0.0


def test_separated_pair_is_kept():
    lat = make_lattice(1, 64)
    u1 = _field_with_modes(lat, {8: 1.0})
    u2 = _field_with_modes(lat, {2: 1.0})
    out = separated_product(u1, u2, 4.0)
    _assert_matches_mode_dict(out, {10: 1.0})


def test_boundary_gap_is_excluded():
    # |8| - |4| = 4 is not strictly greater than 4
    lat = make_lattice(1, 64)
    u1 = _field_with_modes(lat, {8: 1.0})
    u2 = _field_with_modes(lat, {4: 1.0})
    assert separated_product(u1, u2, 4.0).norm == 0.0


@pytest.mark.parametrize("seed", [0, 1, 2, 3, 4])
def test_zero_threshold_matches_convolution_oracle(seed):
    lat = make_lattice(1, 8)
    rng = np.random.default_rng(seed)
    u1 = FourierField(lat, rng.standard_normal(8) + 1j * rng.standard_normal(8))
    u2 = FourierField(lat, rng.standard_normal(8) + 1j * rng.standard_normal(8))
    out = separated_product(u1, u2, 0.0)
    _assert_matches_mode_dict(out, separated_product_oracle(u1, u2, 0.0))


@pytest.mark.parametrize("threshold", [0.0, 1.0, 2.5, 4.0])
def test_oracle_agreement_up_to_16_modes(threshold):
    lat = make_lattice(1, 16)
    rng = np.random.default_rng(int(threshold * 10))
    u1 = FourierField(lat, rng.standard_normal(16) + 1j * rng.standard_normal(16))
    u2 = FourierField(lat, rng.standard_normal(16) + 1j * rng.standard_normal(16))
    out = separated_product(u1, u2, threshold)
    _assert_matches_mode_dict(out, separated_product_oracle(u1, u2, threshold))
