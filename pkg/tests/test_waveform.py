"""Pulse construction and ambiguity tests.

The Gaussian has a closed-form ambiguity function, which serves as the
independent oracle for the numerical inner-product route. RRC and IOTA are
checked against their defining properties (Nyquist autocorrelation, lattice
orthogonality) instead of stored sample sequences.
"""

import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

import potsim
from potsim import (
    AmbiguityTable,
    ConfigError,
    CrossAmbiguity,
    LatticeConfig,
    ParameterError,
    ambiguity,
    build_ambiguity_table,
    filter_factory,
    make_gaussian,
    make_iota,
    make_rrc,
)
from potsim.waveform import rrc_time_response


def gaussian_ambiguity_magnitude(rho, lam, phi):
    """Closed-form |A| of the unit-energy Gaussian at normalized offsets.

    lam is the time offset in units of tau0, phi the frequency offset in
    units of 1/tau0.
    """
    return np.exp(-(np.pi / 2.0) * (rho * lam ** 2 + phi ** 2 / rho))


# ---------------------------------------------------------------------------
# pulse construction


@pytest.mark.parametrize("family,param", [("gaussian", 0.2), ("rrc", 0.2), ("iota", 0.2)])
def test_pulses_have_unit_discrete_energy(family, param):
    pulse = filter_factory(family, param)
    energy = np.sum(pulse.samples ** 2) / pulse.sample_rate
    assert energy == pytest.approx(1.0, abs=1e-9)


@pytest.mark.parametrize("family,param", [("gaussian", 0.2), ("rrc", 0.2), ("iota", 0.2)])
def test_sample_count_matches_span_times_rate(family, param):
    pulse = filter_factory(family, param)
    assert len(pulse.samples) == int(pulse.span * pulse.sample_rate)


@pytest.mark.parametrize("make", [make_gaussian, make_iota])
def test_gaussian_and_iota_are_even_about_center(make):
    pulse = make(0.5)
    c = pulse.center_index
    left = pulse.samples[c - 1:0:-1]
    right = pulse.samples[c + 1:]
    m = min(len(left), len(right))
    assert np.allclose(left[:m], right[:m], atol=1e-12)


def test_gaussian_center_sample_matches_truncation_renormalized_peak():
    for rho, span in ((1.0, 8.0), (0.2, 8.0)):
        pulse = make_gaussian(rho, span=span)
        trunc_energy = quad(
            lambda u: np.sqrt(2.0 * rho) * np.exp(-2.0 * np.pi * rho * u * u),
            -span / 2.0, span / 2.0)[0]
        expected = (2.0 * rho) ** 0.25 / np.sqrt(trunc_energy)
        assert pulse.samples[pulse.center_index] == pytest.approx(expected, abs=1e-6)


def test_rrc_value_at_zero_matches_analytic_limit():
    for alpha in (1.0, 0.5, 0.2):
        value = rrc_time_response(np.array([0.0]), alpha)[0]
        assert value == pytest.approx(1.0 + alpha * (4.0 / np.pi - 1.0), abs=1e-9)


def test_rrc_is_continuous_at_quarter_period_singularity():
    for alpha in (1.0, 0.35):
        u_star = 1.0 / (4.0 * alpha)
        probe = rrc_time_response(u_star + np.array([-1e-7, 0.0, 1e-7]), alpha)
        assert np.all(np.isfinite(probe))
        assert abs(probe[0] - probe[1]) < 1e-5
        assert abs(probe[2] - probe[1]) < 1e-5


def test_rrc_autocorrelation_is_nyquist_at_symbol_lag(lattice):
    pulse = make_rrc(1.0)
    value = ambiguity(pulse, pulse, lattice, delta_l=1)
    assert abs(value) < 1e-3


@pytest.mark.parametrize("bad", [0.0, -0.3])
def test_nonpositive_dispersion_is_rejected(bad):
    with pytest.raises(ParameterError):
        make_gaussian(bad)
    with pytest.raises(ParameterError):
        make_iota(bad)


@pytest.mark.parametrize("bad", [0.0, 1.2, -0.1])
def test_rrc_roll_off_outside_unit_interval_is_rejected(bad):
    with pytest.raises(ParameterError):
        make_rrc(bad)


def test_undersampled_or_short_pulses_are_rejected():
    with pytest.raises(ParameterError):
        make_gaussian(0.2, sample_rate=4)
    with pytest.raises(ParameterError):
        make_gaussian(0.2, span=2.0)
    with pytest.raises(ParameterError):
        make_rrc(0.2, span=6.0)


def test_filter_factory_dispatches_and_rejects_unknown_family():
    assert filter_factory("gaussian", 0.2).family == "gaussian"
    assert filter_factory("rrc", 0.2).family == "rrc"
    assert filter_factory("iota", 0.2).family == "iota"
    with pytest.raises(ParameterError):
        filter_factory("hann", 0.2)


@given(st.floats(min_value=0.05, max_value=1.0))
@settings(max_examples=20, deadline=None)
def test_gaussian_unit_energy_across_dispersion(rho):
    pulse = make_gaussian(rho)
    assert np.sum(pulse.samples ** 2) / pulse.sample_rate == pytest.approx(1.0, abs=1e-9)


@given(st.integers(min_value=-5, max_value=5))
@settings(max_examples=11, deadline=None)
def test_resample_shifted_reproduces_samples_at_integer_shifts(shift):
    pulse = make_gaussian(0.3)
    shifted = pulse.resample_shifted(np.array([float(shift)]))[0]
    k = shift * pulse.sample_rate
    expect = np.zeros_like(pulse.samples)
    if k >= 0:
        expect[k:] = pulse.samples[:len(pulse.samples) - k]
    else:
        expect[:k] = pulse.samples[-k:]
    assert np.allclose(shifted, expect, atol=1e-12)


# ---------------------------------------------------------------------------
# lattice configuration


def test_lattice_for_bandwidth_covers_the_channel():
    lat = LatticeConfig.for_bandwidth(200e3, 12, 12)
    assert lat.num_subcarriers * lat.nu0 == pytest.approx(200e3, abs=1.0)
    assert lat.tau0 * lat.nu0 == pytest.approx(1.0, abs=1e-12)
    sparse = LatticeConfig.for_bandwidth(200e3, 12, 12, density=2.0)
    assert sparse.density == pytest.approx(2.0, abs=1e-12)


def test_lattice_rejects_nonpositive_parameters():
    with pytest.raises(ParameterError):
        LatticeConfig(tau0=0.0, nu0=1.0, num_subcarriers=4, num_symbols=4)
    with pytest.raises(ParameterError):
        LatticeConfig(tau0=1.0, nu0=1.0, num_subcarriers=0, num_symbols=4)


# ---------------------------------------------------------------------------
# ambiguity oracle checks


def test_matched_filters_at_zero_offset_give_unity(gaussian_02, lattice):
    value = ambiguity(gaussian_02, gaussian_02, lattice)
    assert abs(value - 1.0) < 1e-9


@pytest.mark.parametrize("rho", [1.0, 0.2])
def test_gaussian_ambiguity_matches_closed_form_on_grid(rho, lattice):
    pulse = make_gaussian(rho)
    offsets = (0.0, 0.25, 0.5, 1.0, 1.5)
    for lam, phi in itertools.product(offsets, offsets):
        got = abs(ambiguity(pulse, pulse, lattice,
                            delta_f=phi * lattice.nu0, delta_t=lam * lattice.tau0))
        assert got == pytest.approx(gaussian_ambiguity_magnitude(rho, lam, phi), abs=1e-4)


def test_half_spacing_offset_value_at_isotropic_dispersion(lattice):
    pulse = make_gaussian(1.0)
    got = abs(ambiguity(pulse, pulse, lattice, delta_f=lattice.nu0 / 2.0))
    assert got == pytest.approx(np.exp(-np.pi / 8.0), abs=1e-6)


def test_non_overlapping_supports_give_exact_zero(rrc_02, lattice):
    value = ambiguity(rrc_02, rrc_02, lattice, delta_l=int(3 * rrc_02.span))
    assert value == 0j


def test_residual_delay_beyond_span_is_a_domain_error(gaussian_02, lattice):
    with pytest.raises(ParameterError):
        ambiguity(gaussian_02, gaussian_02, lattice,
                  delta_t=2.0 * gaussian_02.span * lattice.tau0)


def test_mismatched_sample_rates_are_a_config_error(lattice):
    a = make_gaussian(0.2, sample_rate=16)
    b = make_gaussian(0.2, sample_rate=32)
    with pytest.raises(ConfigError):
        ambiguity(a, b, lattice)


@given(st.floats(min_value=-1.5, max_value=1.5), st.floats(min_value=-1.5, max_value=1.5))
@settings(max_examples=20, deadline=None)
def test_ambiguity_magnitude_is_symmetric_under_offset_negation(lam, phi, ):
    pulse = make_gaussian(0.4)
    lat = LatticeConfig.for_bandwidth(200e3, 12, 12)
    fwd = abs(ambiguity(pulse, pulse, lat, delta_f=phi * lat.nu0, delta_t=lam * lat.tau0))
    rev = abs(ambiguity(pulse, pulse, lat, delta_f=-phi * lat.nu0, delta_t=-lam * lat.tau0))
    assert fwd == pytest.approx(rev, abs=1e-9)


def _magnitude_grid(pulse, taus, nus):
    shifted = pulse.resample_shifted(taus)
    phases = np.exp(2j * np.pi * np.outer(pulse.time_grid, nus))
    return np.abs((shifted * pulse.samples[None, :] / pulse.sample_rate) @ phases)


@pytest.mark.parametrize("family,param", [("gaussian", 0.2), ("rrc", 0.2), ("iota", 0.2)])
def test_ambiguity_peaks_at_the_origin(family, param):
    pulse = filter_factory(family, param)
    grid = np.linspace(-2.0, 2.0, 41)
    mags = _magnitude_grid(pulse, grid, grid)
    peak = np.unravel_index(np.argmax(mags), mags.shape)
    assert peak == (20, 20)


@pytest.mark.parametrize("family,param", [("gaussian", 0.2), ("rrc", 0.2), ("iota", 0.2)])
def test_squared_ambiguity_volume_is_unity(family, param):
    pulse = filter_factory(family, param)
    grid = np.linspace(-6.0, 6.0, 121)
    cell = (grid[1] - grid[0]) ** 2
    volume = np.sum(_magnitude_grid(pulse, grid, grid) ** 2) * cell
    assert volume == pytest.approx(1.0, rel=0.02)


def test_isotropic_gaussian_has_equal_time_and_frequency_cuts(lattice):
    pulse = make_gaussian(1.0)
    for a in (0.25, 0.5, 0.75):
        along_time = abs(ambiguity(pulse, pulse, lattice, delta_t=a * lattice.tau0))
        along_freq = abs(ambiguity(pulse, pulse, lattice, delta_f=a * lattice.nu0))
        assert along_time == pytest.approx(along_freq, abs=1e-3)


def test_shrinking_dispersion_squeezes_ambiguity_toward_time(lattice):
    freq_cut = []
    time_cut = []
    for rho in (1.0, 0.5, 0.2):
        pulse = make_gaussian(rho)
        freq_cut.append(abs(ambiguity(pulse, pulse, lattice, delta_f=lattice.nu0 / 2.0)))
        time_cut.append(abs(ambiguity(pulse, pulse, lattice, delta_t=lattice.tau0)))
    assert freq_cut[0] > freq_cut[1] > freq_cut[2]
    assert time_cut[0] < time_cut[1] < time_cut[2]


# ---------------------------------------------------------------------------
# lattice orthogonality of the constructed pulses


def test_iota_is_orthogonal_to_pure_lattice_shifts_at_unit_dispersion(lattice):
    pulse = make_iota(1.0)
    assert abs(ambiguity(pulse, pulse, lattice, delta_l=1)) < 1e-3
    assert abs(ambiguity(pulse, pulse, lattice, delta_n=1)) < 1e-3


def test_iota_design_lattice_orthogonality_extends_to_mixed_shifts():
    lat = LatticeConfig.for_bandwidth(200e3, 12, 12, density=2.0)
    pulse = make_iota(1.0, density=2.0)
    for dl, dn in itertools.product(range(-2, 3), repeat=2):
        if (dl, dn) == (0, 0):
            continue
        assert abs(ambiguity(pulse, pulse, lat, delta_l=dl, delta_n=dn)) < 1e-3


def test_rrc_design_lattice_orthogonality():
    alpha = 0.2
    lat = LatticeConfig.for_bandwidth(200e3, 12, 12, density=1.0 + alpha)
    pulse = make_rrc(alpha)
    for dl, dn in itertools.product(range(-2, 3), repeat=2):
        if (dl, dn) == (0, 0):
            continue
        assert abs(ambiguity(pulse, pulse, lat, delta_l=dl, delta_n=dn)) < 1e-3


def test_iota_stays_close_to_gaussian_away_from_lattice_points(lattice):
    iota = make_iota(1.0)
    gauss = make_gaussian(1.0)
    for lam, phi in ((0.4, 0.35), (0.3, 0.6), (0.5, 0.5)):
        a_iota = abs(ambiguity(iota, iota, lattice,
                               delta_f=phi * lattice.nu0, delta_t=lam * lattice.tau0))
        a_gauss = abs(ambiguity(gauss, gauss, lattice,
                                delta_f=phi * lattice.nu0, delta_t=lam * lattice.tau0))
        assert a_iota == pytest.approx(a_gauss, abs=0.1)


# ---------------------------------------------------------------------------
# precomputed table


def test_table_has_one_entry_per_offset_combination(gaussian_02, lattice):
    table = build_ambiguity_table(gaussian_02, gaussian_02, lattice, fo_quantum=8)
    assert len(table) == (2 * 12 - 1) * 12 * 8


def test_table_peak_entry_is_unity(gaussian_02, lattice):
    table = build_ambiguity_table(gaussian_02, gaussian_02, lattice, fo_quantum=8)
    assert abs(table.entry(0, 0, 0) - 1.0) < 1e-6


def test_table_entries_agree_with_direct_evaluation(gaussian_02, lattice):
    table = build_ambiguity_table(gaussian_02, gaussian_02, lattice, fo_quantum=8)
    direct = ambiguity(gaussian_02, gaussian_02, lattice,
                       delta_l=1, delta_n=2, delta_f=3 * lattice.nu0 / 8)
    assert abs(table.entry(1, 2, 3) - direct) < 1e-12


def test_table_entries_respect_the_unit_bound(gaussian_02, lattice):
    table = build_ambiguity_table(gaussian_02, gaussian_02, lattice, fo_quantum=8)
    assert np.all(np.abs(table.values) <= 1.0 + 1e-9)


def test_table_round_trips_through_disk(tmp_path, gaussian_02, lattice):
    table = build_ambiguity_table(gaussian_02, gaussian_02, lattice, fo_quantum=8)
    path = tmp_path / "table.npz"
    table.save(path)
    loaded = AmbiguityTable.load(path)
    assert np.array_equal(loaded.values, table.values)
    assert loaded.fo_quantum == table.fo_quantum
    assert loaded.lattice.tau0 == table.lattice.tau0


# ---------------------------------------------------------------------------
# channel-facing evaluator


def test_cross_ambiguity_block_matches_direct_values(cross_gaussian, gaussian_02, lattice):
    block = cross_gaussian.block(0.37, qdiff=3)
    direct = ambiguity(gaussian_02, gaussian_02, lattice, delta_l=-2, delta_n=4,
                       delta_f=3 * lattice.nu0 / 8, delta_t=0.37 * lattice.tau0)
    assert abs(block[-2 + 12 - 1, 4] - direct) < 1e-5


def test_cross_ambiguity_block_vanishes_beyond_combined_span(cross_gaussian):
    block = cross_gaussian.block(40.0, qdiff=0)
    assert np.all(block == 0)


def test_cci_profile_columns_match_single_offset_energies(cross_gaussian, rng):
    realization = potsim.ChannelRealization(link_id=(1, 0), path_gain=0.5,
                                            tap_delays=(0.0,), tap_gains=(1.0 + 0j,))
    delay = 0.42 * cross_gaussian.lattice.tau0
    profile = cross_gaussian.cci_energy_profile(realization, delay)
    for qdiff in (-7, -3, 0, 2, 7):
        single = cross_gaussian.cci_energy(realization, delay, qdiff)
        assert profile[qdiff + 8 - 1] == pytest.approx(single, rel=1e-12)
