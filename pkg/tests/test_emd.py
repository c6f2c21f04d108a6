import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy.interpolate import CubicSpline

from staug.emd import (
    STOP_FEW_EXTREMA,
    STOP_LOW_ENERGY,
    STOP_MAX_IMFS,
    DegenerateEnvelopeError,
    EmdConfig,
    count_zero_crossings,
    decompose,
    decompose_window,
    envelope,
    find_extrema,
    imf_oscillation_defects,
    natural_cubic_spline,
    sift,
)

from conftest import corr, two_tone


def brute_force_extrema(x):
    """Strict neighbours only; valid for signals without plateaus."""
    mx = [i for i in range(1, len(x) - 1) if x[i] > x[i - 1] and x[i] > x[i + 1]]
    mn = [i for i in range(1, len(x) - 1) if x[i] < x[i - 1] and x[i] < x[i + 1]]
    return mx, mn


def rel_err(a, b):
    return np.linalg.norm(a - b) / np.linalg.norm(b)


# ---- find_extrema


def test_extrema_single_oscillation():
    mx, mn = find_extrema([0, 1, 0, -1, 0])
    assert mx.tolist() == [1] and mn.tolist() == [3]


def test_extrema_plateau_midpoint_rounds_down():
    mx, mn = find_extrema([0, 1, 1, 0])
    assert mx.tolist() == [1] and mn.tolist() == []
    mx, _ = find_extrema([0, 2, 2, 2, 0])
    assert mx.tolist() == [2]


def test_extrema_edge_plateau_is_not_extremum():
    mx, mn = find_extrema([3, 3, 1, 2])
    assert mx.tolist() == [] and mn.tolist() == [2]


def test_extrema_short_signal():
    mx, mn = find_extrema([1.0, 2.0])
    assert mx.size == 0 and mn.size == 0


def test_extrema_sampled_sinusoid_matches_scan():
    k = np.arange(64)
    s = np.sin(2 * np.pi * k / 16)
    mx, mn = find_extrema(s)
    bmx, bmn = brute_force_extrema(s)
    assert mx.tolist() == bmx == [4, 20, 36, 52]
    assert mn.tolist() == bmn == [12, 28, 44, 60]


@settings(max_examples=100, deadline=None)
@given(arrays(np.float64, st.integers(3, 80), elements=st.floats(-10, 10, allow_nan=False)))
def test_extrema_agree_with_scan_without_plateaus(x):
    if np.any(x[1:] == x[:-1]):
        return
    mx, mn = find_extrema(x)
    bmx, bmn = brute_force_extrema(x)
    assert mx.tolist() == bmx and mn.tolist() == bmn


# ---- envelope


def test_natural_spline_matches_reference():
    rng = np.random.default_rng(3)
    for n in (2, 3, 7, 40):
        knots = np.sort(rng.choice(500, n, replace=False)).astype(float) - 100
        vals = rng.standard_normal(n)
        at = np.linspace(knots[0] - 5, knots[-1] + 5, 300)
        ref = CubicSpline(knots, vals, bc_type="natural")(at)
        np.testing.assert_allclose(natural_cubic_spline(knots, vals, at), ref, atol=1e-10)


def test_envelope_two_equal_knots_is_constant():
    L = 20
    sig = np.random.default_rng(0).standard_normal(L)
    sig[0] = sig[-1] = 5.0
    np.testing.assert_allclose(envelope(sig, [0, L - 1]), 5.0, atol=1e-12)


def test_envelope_passes_through_knots():
    sig = np.zeros(11)
    sig[5] = 10.0
    env = envelope(sig, [0, 5, 10])
    assert env[5] == pytest.approx(10.0, abs=1e-12)
    assert env[0] == pytest.approx(0.0, abs=1e-12)


def test_envelope_sinusoid_maxima_against_oracle():
    k = np.arange(64)
    s = np.sin(2 * np.pi * k / 16)
    mx, _ = find_extrema(s)
    env = envelope(s, mx, EmdConfig(boundary_extrema=2))
    # oracle: same knot set (two maxima reflected about each end) through scipy
    knots = np.array([-20, -4, 4, 20, 36, 52, 2 * 63 - 52, 2 * 63 - 36], dtype=float)
    ref = CubicSpline(knots, np.ones(knots.size), bc_type="natural")(k)
    np.testing.assert_allclose(env, ref, atol=1e-12)
    np.testing.assert_allclose(env[mx], 1.0, atol=1e-12)
    interior = env[4:53]
    assert interior.min() >= 0.95 and interior.max() <= 1.05


def test_envelope_degenerate():
    with pytest.raises(DegenerateEnvelopeError):
        envelope(np.zeros(10), [3])


# ---- sift


def test_sift_well_sampled_tone_is_already_imf():
    t = np.arange(256)
    p = np.sin(2 * np.pi * 0.05 * t)
    out = sift(p)
    assert rel_err(out.imf, p) < 0.05


@pytest.mark.xfail(strict=True, reason=(
    "at 0.4 cycles/step the sampled tone has alternating peak heights (0.588/0.951), "
    "so any extrema-knot envelope has a non-zero mean; one sift pass changes it by ~16%"
))
def test_sift_pure_tone_near_nyquist_is_unchanged():
    t = np.arange(256)
    p = np.sin(2 * np.pi * 0.4 * t)
    assert rel_err(sift(p).imf, p) < 0.05


def test_sift_constant_is_rejected():
    with pytest.raises(DegenerateEnvelopeError):
        sift(np.ones(50))


def test_sift_two_tone_picks_fast_component():
    x, hi, _ = two_tone(512)
    out = sift(x)
    assert abs(corr(out.imf, hi)) > 0.9
    assert 1 <= out.iterations <= 10 and not out.terminated


# ---- decompose


def test_decompose_ramp_has_no_imfs():
    x = np.arange(100) / 100
    dec = decompose(x)
    assert dec.n_imfs == 0
    np.testing.assert_array_equal(dec.residue, x)
    assert dec.stop_reason == STOP_FEW_EXTREMA


def test_decompose_two_tone_with_trend():
    x, hi, lo = two_tone(512, 0.002)
    dec = decompose(x)
    assert 2 <= dec.n_imfs <= 6
    assert abs(corr(dec.imfs[0], hi)) > 0.9
    assert max(abs(corr(imf, lo)) for imf in dec.imfs[1:]) > 0.8
    trend = 0.002 * np.arange(512)
    assert corr(dec.residue, trend) > 0.99
    assert np.max(np.abs(dec.residue - trend)) < 0.1
    assert imf_oscillation_defects(dec) == []


def test_decompose_length_one_and_zero_signal():
    assert decompose([3.0]).n_imfs == 0
    dec = decompose(np.zeros(30))
    assert dec.n_imfs == 0 and np.all(dec.residue == 0)


def test_decompose_stop_reasons():
    x, _, _ = two_tone(512, 0.002)
    assert decompose(x, EmdConfig(max_imfs=1)).stop_reason == STOP_MAX_IMFS
    # a high residue-energy ratio stops right after the first IMF
    dec = decompose(x, EmdConfig(residue_energy_ratio=0.9))
    assert dec.stop_reason == STOP_LOW_ENERGY and dec.n_imfs == 1


def test_decompose_is_deterministic():
    x = np.random.default_rng(5).standard_normal(192)
    a, b = decompose(x), decompose(x)
    assert a.n_imfs == b.n_imfs
    for u, v in zip(a.imfs + [a.residue], b.imfs + [b.residue]):
        assert np.array_equal(u, v)


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, st.integers(1, 200), elements=st.floats(-1e3, 1e3, allow_nan=False)))
def test_completeness_property(x):
    dec = decompose(x)
    norm = np.linalg.norm(x)
    err = np.linalg.norm(x - dec.reconstruct())
    assert err <= 1e-8 * norm or err < 1e-300 or norm == 0


def test_zero_crossings():
    assert count_zero_crossings([1, -1, 1, 0, -1]) == 3
    assert count_zero_crossings([0, 0, 0]) == 0


# ---- decompose_window


def test_decompose_window_mixed_channels(ramp_tone_window):
    dec = decompose_window(ramp_tone_window)
    assert dec.channels[0].n_imfs == 0
    assert dec.channels[1].n_imfs >= 1
    assert dec.source_length == 192
    np.testing.assert_allclose(dec.reconstruct(), ramp_tone_window.full(), atol=1e-12)


def test_decompose_window_single_channel_matches_decompose(two_tone_window):
    dec = decompose_window(two_tone_window)
    ref = decompose(two_tone_window.full()[0])
    assert len(dec.channels) == 1
    assert dec.channels[0].n_imfs == ref.n_imfs
    np.testing.assert_array_equal(dec.channels[0].residue, ref.residue)


def test_decompose_window_history_only(ramp_tone_window):
    dec = decompose_window(ramp_tone_window, part="history")
    assert dec.source_length == 96 and dec.part == "history"
    with pytest.raises(ValueError):
        decompose_window(ramp_tone_window, part="middle")
