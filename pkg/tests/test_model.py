from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mmharvest.model import (
    AntennaPattern,
    GainDistribution,
    LinkState,
    SystemParams,
    dbm_to_watts,
    free_space_intercept,
    gain_distribution,
    harvested_energy,
    path_loss,
    thermal_noise_power,
    ula_beamwidths,
    ula_pattern,
    watts_to_dbm,
)


# --- harvested energy -------------------------------------------------------


def test_harvest_above_threshold():
    assert harvested_energy(10e-6, 0.3, 1e-6) == pytest.approx(3e-6, rel=1e-15)


def test_harvest_below_threshold_is_zero():
    assert harvested_energy(0.5e-6, 1.0, 1e-6) == 0.0


def test_harvest_at_threshold_is_zero():
    assert harvested_energy(1e-6, 1.0, 1e-6) == 0.0


def test_harvest_rejects_negative_power():
    with pytest.raises(ValueError):
        harvested_energy(-1.0, 1.0, 0.0)
    with pytest.raises(ValueError):
        harvested_energy(1.0, 1.0, -1e-9)


@given(
    y=st.floats(1e-12, 1e-2),
    c=st.floats(1.0, 1e3),
    xi=st.floats(0.01, 1.0),
    psi_min=st.floats(0.0, 1e-6),
)
def test_harvest_monotone_and_homogeneous(y, c, xi, psi_min):
    assert harvested_energy(c * y, xi, psi_min) >= harvested_energy(y, xi, psi_min)
    if y > psi_min:
        assert harvested_energy(c * y, xi, psi_min) == pytest.approx(c * harvested_energy(y, xi, psi_min), rel=1e-12)


# --- path loss ---------------------------------------------------------------


def test_path_loss_unit_distance_gives_intercept():
    p = SystemParams(intercept_los=1.0, intercept_nlos=1.0)
    assert path_loss(1.0, LinkState.LOS, p) == 1.0


def test_path_loss_nlos_power_law():
    p = SystemParams(intercept_los=1.0, intercept_nlos=1.0, alpha_nlos=4.0)
    assert path_loss(10.0, LinkState.NLOS, p) == pytest.approx(1e-4, rel=1e-14)


def test_free_space_intercept_at_28ghz():
    # Friis reference computed independently: (c / (4 pi f))^2
    lam = 299_792_458.0 / 28e9
    expected = (lam / (4 * math.pi)) ** 2
    assert free_space_intercept(28e9) == pytest.approx(expected, rel=1e-15)
    assert free_space_intercept(28e9) == pytest.approx(7.26e-7, rel=2e-3)
    assert 10 * math.log10(free_space_intercept(28e9)) == pytest.approx(-61.4, abs=0.05)


def test_path_loss_rejects_short_links(params):
    with pytest.raises(ValueError):
        path_loss(0.5, LinkState.LOS, params)


@given(r1=st.floats(1.0, 1e4), dr=st.floats(1e-3, 1e3))
def test_path_loss_strictly_decreasing(r1, dr):
    p = SystemParams()
    for state in LinkState:
        assert path_loss(r1 + dr, state, p) < path_loss(r1, state, p)


def test_path_loss_continuous_at_min_distance(params):
    for state in LinkState:
        a = path_loss(params.min_distance, state, params)
        b = path_loss(params.min_distance * (1 + 1e-12), state, params)
        assert b == pytest.approx(a, rel=1e-10)


# --- parameters -------------------------------------------------------------


def test_default_noise_is_thermal_over_bandwidth():
    p = SystemParams()
    assert p.noise_power == pytest.approx(dbm_to_watts(-174 + 80 + 10), rel=1e-12)
    assert watts_to_dbm(thermal_noise_power(100e6, 10.0)) == pytest.approx(-84.0, abs=1e-12)


@pytest.mark.parametrize(
    "kwargs",
    [
        {"bs_density": -1.0},
        {"blockage_beta": 0.0},
        {"min_distance": 0.0},
        {"alpha_nlos": 2.0},
        {"alpha_los": 1.5},
        {"nakagami_los": 0},
        {"nakagami_nlos": 2.5},
        {"rectifier_eff": 0.0},
        {"rectifier_eff": 1.1},
        {"connected_fraction": 1.5},
    ],
)
def test_invalid_parameters_rejected(kwargs):
    with pytest.raises(ValueError):
        SystemParams(**kwargs)


# --- antenna patterns and gain law ---------------------------------------------


def test_pattern_invariants():
    with pytest.raises(ValueError):
        AntennaPattern(1.0, 2.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        AntennaPattern(2.0, 1.0, 0.0, 1.0)
    with pytest.raises(ValueError):
        AntennaPattern(2.0, 1.0, 4.0, 3.0)


def test_gain_law_sector_tx_omni_rx(gains):
    # direct enumeration of the four sector products
    assert gains.gains[0] == pytest.approx(10.0)
    assert gains.gains[2] == pytest.approx(0.1)
    assert gains.probs[0] == pytest.approx(1 / 12, abs=1e-15)
    assert gains.probs[2] == pytest.approx(11 / 12, abs=1e-15)
    assert gains.probs[1] == 0 and gains.probs[3] == 0
    assert gains.probs[4] == pytest.approx(0.0, abs=1e-15)


def test_gain_law_omni_both_sides():
    g = gain_distribution(AntennaPattern.omni(), AntennaPattern.omni())
    assert g.gains[0] == 1.0 and g.probs[0] == 1.0
    assert g.mean == 1.0


def test_gain_law_partial_coverage_has_zero_atom():
    tx = AntennaPattern(4.0, 0.5, math.pi / 3, math.pi)
    g = gain_distribution(tx, AntennaPattern.omni())
    assert g.probs[4] == pytest.approx(1 - (1 / 6 + 1 / 2), abs=1e-15)
    assert g.probs[4] > 0


def test_gain_law_validation():
    with pytest.raises(ValueError):
        GainDistribution((1, 1, 1, 1, 1), (0.2,) * 5)
    with pytest.raises(ValueError):
        GainDistribution((1, 1, 1, 1, 0), (0.5, 0.5, 0.5, 0, 0))


def _pattern(draw):
    main_bw = draw(st.floats(0.01, 2 * math.pi))
    side_bw = draw(st.floats(0.0, 1.0)) * (2 * math.pi - main_bw)
    side = draw(st.floats(0.0, 10.0))
    main = side + draw(st.floats(0.0, 100.0))
    return AntennaPattern(main, side, main_bw, side_bw)


patterns = st.composite(_pattern)


@given(tx=patterns(), rx=patterns())
def test_gain_mass_is_one(tx, rx):
    g = gain_distribution(tx, rx)
    assert math.fsum(g.probs) == pytest.approx(1.0, abs=1e-12)
    assert min(g.probs) >= 0
    assert g.gains[4] == 0


# --- ULA approximation -------------------------------------------------------


def test_ula_beamwidths_n8():
    main, side = ula_beamwidths(8)
    assert math.degrees(main) == pytest.approx((360 / math.pi) * math.asin(0.892 / 8), abs=1e-12)
    assert math.degrees(main) == pytest.approx(12.80, abs=0.01)
    assert math.degrees(side) == pytest.approx(57.91, abs=0.01)


def test_ula_side_beamwidth_full_circle_at_n2():
    assert math.degrees(ula_beamwidths(2)[1]) == pytest.approx(360.0, abs=1e-12)


def test_ula_rejects_single_element():
    with pytest.raises(ValueError):
        ula_pattern(1)


@pytest.mark.parametrize("n", [2, 3, 4, 8, 16, 32, 64, 128])
def test_ula_normalized(n):
    assert ula_pattern(n).radiated_power == pytest.approx(1.0, abs=1e-9)


@pytest.mark.parametrize("n", [4, 8, 16, 32])
def test_ula_literal_convention_normalized(n):
    pat = ula_pattern(n, "literal")
    assert pat.radiated_power == pytest.approx(1.0, abs=1e-9)
    v = pat.main_gain / (10 * math.log10(n))
    assert pat.side_gain == pytest.approx(v * (pat.main_gain - 12), rel=1e-12)


def test_ula_literal_convention_infeasible_for_small_arrays():
    with pytest.raises(ValueError):
        ula_pattern(2, "literal")


def test_ula_main_beam_narrows_with_size():
    widths = [ula_pattern(n).main_beamwidth for n in range(2, 80)]
    assert all(b < a for a, b in zip(widths, widths[1:]))
    gains = [ula_pattern(n).main_gain for n in (4, 8, 16, 32, 64)]
    assert np.all(np.diff(gains) > 0)


@settings(max_examples=30)
@given(n=st.integers(2, 256))
def test_ula_pattern_valid_for_any_size(n):
    pat = ula_pattern(n)
    assert pat.main_gain >= pat.side_gain > 0
    assert pat.radiated_power == pytest.approx(1.0, abs=1e-9)
