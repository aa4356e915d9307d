"""p-variation, energy ledger, and windowed V² tests.

The DP optimum is certified against exhaustive enumeration of every
sub-partition (2^M masks), which is the definition.
"""

import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from displab.dispersion import get_spec, propagate, window
from displab.fields import FourierField
from displab.lattice import make_lattice
from displab.projectors import BandProjector, dyadic_bands, project
from displab.variation import (
    EnergyLedger,
    SampledPath,
    e_s_norm,
    load_path,
    save_path,
    shorttime_v2,
    v_p_norm,
)


def brute_force_vp(values, p):
    """Max over all index subsequences of the increment-power sum."""

    def inc(a, b):
        if isinstance(a, FourierField):
            return (b - a).norm
        return abs(b - a)

    m = len(values)
    best = 0.0
    for mask in range(2**m):
        idx = [i for i in range(m) if mask >> i & 1]
        if len(idx) < 2:
            continue
        total = sum(inc(values[a], values[b]) ** p for a, b in zip(idx, idx[1:]))
        best = max(best, total)
    return best ** (1.0 / p)


def _mode_field(lat, mode, value=1.0):
    c = np.zeros(lat.shape, dtype=np.complex128)
    c[np.nonzero(lat.modes(0) == mode)[0][0]] = value
    return FourierField(lat, c)


def _random_coeff_field(lat, seed):
    rng = np.random.default_rng(seed)
    c = rng.standard_normal(lat.shape) + 1j * rng.standard_normal(lat.shape)
    return FourierField(lat, c)


# -- SampledPath ---------------------------------------------------------------


def test_times_must_strictly_increase():
    with pytest.raises(ValueError):
        SampledPath((0.0, 0.0), (1.0, 2.0))
    with pytest.raises(ValueError):
        SampledPath((1.0, 0.5), (1.0, 2.0))


def test_length_mismatch_and_empty():
    with pytest.raises(ValueError):
        SampledPath((0.0, 1.0), (1.0,))
    with pytest.raises(ValueError):
        SampledPath((), ())


def test_no_mixing_fields_and_scalars():
    lat = make_lattice(1, 8)
    with pytest.raises(ValueError):
        SampledPath((0.0, 1.0), (FourierField.zero(lat), 3.0))


def test_fields_must_share_a_lattice():
    a = FourierField.zero(make_lattice(1, 8))
    b = FourierField.zero(make_lattice(1, 16))
    with pytest.raises(ValueError):
        SampledPath((0.0, 1.0), (a, b))


def test_path_is_frozen():
    p = SampledPath.from_scalars([0.0, 1.0])
    with pytest.raises(dataclasses.FrozenInstanceError):
        p.times = (0.0, 2.0)


def test_from_scalars_defaults_to_index_times():
    p = SampledPath.from_scalars([4.0, 5.0, 6.0])
    assert p.times == (0.0, 1.0, 2.0)
    assert p.is_scalar


# -- v_p_norm -----------------------------------------------------------------


def test_constant_path_has_zero_variation():
    assert v_p_norm(SampledPath.from_scalars([5.0, 5.0, 5.0]), 2.0) == 0.0


def test_single_increment():
    assert v_p_norm(SampledPath.from_scalars([0.0, 3.0]), 2.0) == 3.0


def test_up_down_contrast_between_p_one_and_two():
    path = SampledPath.from_scalars([0.0, 1.0, 0.0])
    assert abs(v_p_norm(path, 2.0) - math.sqrt(2.0)) < 1e-15
    assert v_p_norm(path, 1.0) == 2.0


def test_p_domain_and_sample_count():
    path = SampledPath.from_scalars([0.0, 1.0])
    with pytest.raises(ValueError):
        v_p_norm(path, 0.5)
    with pytest.raises(ValueError):
        v_p_norm(path, math.inf)
    with pytest.raises(ValueError):
        v_p_norm(SampledPath.from_scalars([1.0]), 2.0)


@pytest.mark.parametrize("seed", range(6))
def test_dp_matches_exhaustive_enumeration_scalar(seed):
    rng = np.random.default_rng(seed)
    m = int(rng.integers(2, 13))
    vals = list(rng.standard_normal(m) * 3.0)
    path = SampledPath.from_scalars(vals)
    for p in (1.0, 1.5, 2.0, 3.0):
        assert v_p_norm(path, p) == pytest.approx(brute_force_vp(vals, p), rel=1e-13)


@pytest.mark.parametrize("seed", range(4))
def test_dp_matches_exhaustive_enumeration_fields(seed):
    lat = make_lattice(1, 8)
    rng = np.random.default_rng(100 + seed)
    m = int(rng.integers(2, 11))
    vals = []
    for _ in range(m):
        c = np.zeros(lat.shape, dtype=np.complex128)
        for mode in (1, 2, 3, -2):
            c[np.nonzero(lat.modes(0) == mode)[0][0]] = rng.standard_normal() + 1j * rng.standard_normal()
        vals.append(FourierField(lat, c))
    path = SampledPath(tuple(range(m)), tuple(vals))
    for p in (1.0, 2.0, 2.5):
        assert v_p_norm(path, p) == pytest.approx(brute_force_vp(vals, p), rel=1e-13)


@given(
    vals=st.lists(
        st.floats(min_value=-5.0, max_value=5.0, allow_nan=False),
        min_size=2,
        max_size=9,
    ),
    p=st.floats(min_value=1.0, max_value=3.0),
    bump=st.floats(min_value=0.0, max_value=3.0),
)
@settings(max_examples=60, deadline=None)
def test_variation_decreases_in_p(vals, p, bump):
    path = SampledPath.from_scalars(vals)
    assert v_p_norm(path, p + bump) <= v_p_norm(path, p) + 1e-9


def test_refinement_grows_the_norm_at_p_one():
    coarse = SampledPath.from_scalars([0.0, 3.0], times=[0.0, 1.0])
    refined = SampledPath.from_scalars([0.0, 5.0, 3.0], times=[0.0, 0.5, 1.0])
    assert v_p_norm(refined, 1.0) == 7.0 >= v_p_norm(coarse, 1.0)
    # at p=1 the full chain is already optimal (triangle inequality), so the
    # DP answer coincides with the plain telescoped sum
    rng = np.random.default_rng(7)
    vals = list(rng.standard_normal(9))
    chain = sum(abs(b - a) for a, b in zip(vals, vals[1:]))
    assert v_p_norm(SampledPath.from_scalars(vals), 1.0) == pytest.approx(chain)


def test_full_chain_is_not_optimal_above_p_one():
    # inserting the midpoint sample drops the plain chained sum below the
    # coarse value; the sup over sub-partitions recovers it by skipping
    vals = [0.0, 0.5, 1.0]
    path = SampledPath.from_scalars(vals)
    chained = (0.5**2 + 0.5**2) ** 0.5
    assert chained < 1.0
    assert v_p_norm(path, 2.0) == 1.0


# -- energy ledger --------------------------------------------------------------


def test_ledger_validation_and_lookup():
    led = EnergyLedger(s=1.0, bands=(1, 2), entries=(0.5, 2.0))
    assert led.entry(2) == 2.0
    with pytest.raises(KeyError):
        led.entry(8)
    with pytest.raises(ValueError):
        EnergyLedger(s=1.0, bands=(1, 2), entries=(0.5,))
    with pytest.raises(ValueError):
        EnergyLedger(s=1.0, bands=(1,), entries=(-0.1,))


def test_ledger_total_is_weighted_sum():
    led = EnergyLedger(s=0.5, bands=(1, 4), entries=(3.0, 2.0))
    assert led.total == pytest.approx(1.0 * 3.0 + 4.0 * 2.0)


def test_single_dyad_unit_field():
    lat = make_lattice(1, 16)
    u = _mode_field(lat, 4)
    path = SampledPath((0.0, 1.0), (u, u))
    led = e_s_norm(path, 1.0)
    assert led.entry(4) == pytest.approx(1.0, abs=1e-15)
    assert led.total == pytest.approx(16.0, abs=1e-12)


def test_s_zero_total_recovers_squared_norm():
    lat = make_lattice(1, 16)
    u = _random_coeff_field(lat, 3)
    path = SampledPath((0.0, 0.5), (u, u))
    assert e_s_norm(path, 0.0).total == pytest.approx(u.norm**2, rel=1e-14)


@pytest.mark.parametrize("name", ["schrodinger", "airy"])
def test_free_evolution_leaves_the_ledger_alone(name):
    spec = get_spec(name)
    lat = make_lattice(1, 32)
    u = _random_coeff_field(lat, 11)
    times = (0.0, 0.3, 0.9, 2.0)
    path = SampledPath(times, tuple(propagate(u, spec, t) for t in times))
    led = e_s_norm(path, 1.25)
    ref = e_s_norm(SampledPath((0.0,), (u,)), 1.25)
    assert led.total == pytest.approx(ref.total, rel=1e-12)


def test_ledger_rejects_scalar_paths():
    with pytest.raises(ValueError):
        e_s_norm(SampledPath.from_scalars([0.0, 1.0]), 1.0)


# -- shorttime V² ----------------------------------------------------------------


def test_zero_path_scores_zero():
    lat = make_lattice(1, 16)
    z = FourierField.zero(lat)
    path = SampledPath((0.0, 0.3, 0.6, 0.9), (z, z, z, z))
    assert shorttime_v2(path, get_spec("schrodinger"), 1.0, bands=[1]) == 0.0


def test_free_evolution_reduces_to_the_energy_total():
    spec = get_spec("schrodinger")
    lat = make_lattice(1, 16)
    u = _random_coeff_field(lat, 21)
    times = tuple(j / 32.0 for j in range(9))
    path = SampledPath(times, tuple(propagate(u, spec, t) for t in times))
    got = shorttime_v2(path, spec, 0.75)
    want = math.sqrt(e_s_norm(path, 0.75).total)
    assert got == pytest.approx(want, rel=1e-12)


def test_one_jump_window_is_the_two_step_atom():
    # a window holding one jump of a piecewise-free path: the DP picks the
    # anchor jump plus the jump increment over every coarser alternative
    spec = get_spec("schrodinger")
    lat = make_lattice(1, 16)
    f = _mode_field(lat, 2, 1.0)
    g = _mode_field(lat, 2, -2.0)
    times = (0.0, 0.15, 0.3, 0.45)
    vals = tuple(
        propagate(f if t < 0.3 else g, spec, t) for t in times
    )
    s = 0.25
    got = shorttime_v2(SampledPath(times, vals), spec, s, bands=[2])
    anchored = [FourierField.zero(lat), f, f, g, g]
    best = brute_force_vp(anchored, 2.0) ** 2
    assert best == pytest.approx((f - FourierField.zero(lat)).norm ** 2 + (g - f).norm ** 2)
    assert got == pytest.approx(math.sqrt(2.0 ** (2 * s) * best), rel=1e-12)


def test_sparse_windows_are_an_error():
    spec = get_spec("schrodinger")
    lat = make_lattice(1, 16)
    u = _mode_field(lat, 2)
    path = SampledPath((0.0, 0.25), (u, u))
    with pytest.raises(ValueError, match="samples"):
        shorttime_v2(path, spec, 0.0, bands=[2])


def test_band_above_nyquist_is_an_error():
    lat = make_lattice(1, 16)
    u = _mode_field(lat, 2)
    path = SampledPath((0.0, 0.1, 0.2), (u, u, u))
    with pytest.raises(ValueError, match="Nyquist"):
        shorttime_v2(path, get_spec("schrodinger"), 0.0, bands=[16])


def test_scalar_paths_are_rejected():
    with pytest.raises(ValueError):
        shorttime_v2(SampledPath.from_scalars([0.0, 1.0]), get_spec("airy"), 0.0)


# -- snapshot round trip -----------------------------------------------------------


def test_save_load_round_trip(tmp_path):
    lat = make_lattice(1, 16)
    times = (0.0, 0.1, 0.30000000000000004)
    vals = tuple(_random_coeff_field(lat, 40 + i) for i in range(3))
    path = SampledPath(times, vals)
    save_path(path, str(tmp_path / "run"))
    back = load_path(str(tmp_path / "run"))
    assert back.times == times  # repr round-trips floats exactly
    for a, b in zip(path.values, back.values):
        assert np.array_equal(a.coeffs, b.coeffs)


def test_scalar_paths_do_not_serialize(tmp_path):
    with pytest.raises(ValueError):
        save_path(SampledPath.from_scalars([1.0, 2.0]), str(tmp_path))


def test_load_rejects_foreign_directories(tmp_path):
    with pytest.raises(ValueError, match="manifest"):
        load_path(str(tmp_path))
    (tmp_path / "manifest.txt").write_text("something else\n")
    with pytest.raises(ValueError):
        load_path(str(tmp_path))


def test_dyadic_bands_partition_matches_ledger_bands():
    lat = make_lattice(1, 16)
    u = _random_coeff_field(lat, 55)
    led = e_s_norm(SampledPath((0.0,), (u,)), 0.0)
    assert led.bands == tuple(dyadic_bands(lat))
    recon = sum(
        project(u, BandProjector.sharp_dyadic(n)).norm ** 2 for n in led.bands
    )
    assert recon == pytest.approx(u.norm**2, rel=1e-14)
