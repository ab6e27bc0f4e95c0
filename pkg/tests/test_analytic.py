import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kirigami.analytic import (
    AnalyticInput,
    InfeasibleTargetError,
    ShapeClass,
    attainable_bound,
    bending_energy_total,
    cap_chord_length,
    cap_height_ratio,
    curvature_from_prestretch,
    height_ratio,
    inverse_design,
    pyramid_height_ratio,
    scaling_law_height_ratio,
    stretch_energy_total,
    unstretched_area,
)
from kirigami.materials import SUBSTRATE, small_strain_stretch_energy

CS, D, L = 209.44, 2986.0, 60.0


def test_curvature_balances_small_strain_energies():
    # bending energy A D kappa^2 / 2 equals A C_s (eps/(1+eps))^2 / 2
    for eps in (0.1, 0.6, 1.0):
        k = float(curvature_from_prestretch(CS, D, eps))
        area = 123.0
        assert bending_energy_total(D, area, k) == pytest.approx(
            small_strain_stretch_energy(CS, area, eps / (1 + eps)), rel=1e-13
        )


def test_curvature_zero_and_negative_strain():
    assert curvature_from_prestretch(CS, D, 0.0) == 0.0
    with pytest.raises(ValueError):
        curvature_from_prestretch(CS, D, -0.1)


def test_pyramid_closed_form_values():
    # kappa L / 4 = 1 -> sin(pi/4) / 2
    assert pyramid_height_ratio(4.0 / L, L) == pytest.approx(math.sqrt(2) / 4, rel=1e-15)
    assert pyramid_height_ratio(0.0, L) == 0.0
    assert pyramid_height_ratio(1e4, L) < 0.5
    with pytest.raises(ValueError):
        pyramid_height_ratio(-1.0, L)


def test_cap_height_ratio_linear():
    assert cap_height_ratio(0.08, 100.0) == pytest.approx(1.0, rel=1e-15)


def test_cap_chord_relation_is_exact():
    rng = np.random.default_rng(7)
    rho = rng.uniform(10, 500, 100)
    hgt = rng.uniform(0.01, 1.0, 100) * rho
    ell = cap_chord_length(rho, hgt)
    assert np.allclose(hgt / ell, cap_height_ratio(1 / rho, ell), rtol=1e-12, atol=0)


def test_scaling_law_is_composition():
    eps = np.linspace(0, 2, 21)
    assert np.allclose(
        scaling_law_height_ratio(CS, D, L, eps),
        cap_height_ratio(curvature_from_prestretch(CS, D, eps), L),
        rtol=1e-14,
        atol=0,
    )


def test_scaling_law_two_root_two():
    eps = 0.5
    base = scaling_law_height_ratio(CS, D, L, eps)
    assert scaling_law_height_ratio(CS, 8 * D, 2 * math.sqrt(2) * L, eps) == pytest.approx(base, rel=1e-14)


def test_height_ratio_dispatch():
    inp = AnalyticInput(CS, D, L, 1.6)
    kappa = math.sqrt(CS / D) * 0.6 / 1.6
    assert height_ratio(inp) == pytest.approx(math.sin(math.atan(kappa * L / 4)) / 2, rel=1e-14)
    cap = AnalyticInput(CS, D, L, 1.6, "spherical_cap")
    assert cap.shape_class is ShapeClass.SPHERICAL_CAP
    assert height_ratio(cap) == pytest.approx(kappa * L / 8, rel=1e-14)
    assert height_ratio(AnalyticInput(CS, D, L, 1.0)) == 0.0


def test_unstretched_area():
    assert unstretched_area(60.0, 1.0) == pytest.approx(1800.0)
    assert unstretched_area(60.0, 2.0) == pytest.approx(450.0)
    assert unstretched_area(60.0, 2.0, "circle") == pytest.approx(math.pi * 900 / 4)
    with pytest.raises(ValueError):
        unstretched_area(60.0, 0.9)
    with pytest.raises(ValueError):
        unstretched_area(60.0, 1.2, "hexagon")


def test_stretch_energy_total_matches_density():
    assert stretch_energy_total(SUBSTRATE, 1.5, 10.0, 1.1) == pytest.approx(42.5287 * 11.0, rel=1e-4)


def test_bounds():
    inp = AnalyticInput(CS, D, L, 1.6)
    assert attainable_bound(inp, "size") == 0.5
    s = math.sqrt(CS / D)
    assert attainable_bound(inp, "prestretch") == pytest.approx(math.sin(math.atan(s * L / 4)) / 2)
    assert attainable_bound(AnalyticInput(CS, D, L, 1.6, "spherical_cap"), "size") == math.inf
    with pytest.raises(ValueError):
        attainable_bound(inp, "thickness")


def _closed_form_eps(target, c_s, d, length):
    q = 4 * math.tan(math.asin(2 * target)) / (length * math.sqrt(c_s / d))
    return q / (1 - q)


@pytest.mark.parametrize("target", [0.05, 0.2, 0.35])
def test_inverse_prestretch_against_closed_form(target):
    fixed = AnalyticInput(CS, D, L, 1.3)
    lam = inverse_design(target, "prestretch", fixed)
    assert lam - 1 == pytest.approx(_closed_form_eps(target, CS, D, L), rel=1e-9)
    assert abs(height_ratio(AnalyticInput(CS, D, L, lam)) - target) < 1e-9


@pytest.mark.parametrize("target", [0.05, 0.3, 0.49])
def test_inverse_size_round_trip(target):
    fixed = AnalyticInput(CS, D, L, 1.6)
    size = inverse_design(target, "size", fixed)
    # closed form: kappa L / 4 = tan(asin(2 target))
    kappa = math.sqrt(CS / D) * 0.6 / 1.6
    assert size == pytest.approx(4 * math.tan(math.asin(2 * target)) / kappa, rel=1e-9)
    assert abs(height_ratio(AnalyticInput(CS, D, size, 1.6)) - target) < 1e-9


def test_inverse_edge_cases():
    fixed = AnalyticInput(CS, D, L, 1.6)
    assert inverse_design(0.0, "prestretch", fixed) == 1.0
    with pytest.raises(InfeasibleTargetError):
        inverse_design(0.0, "size", fixed)
    with pytest.raises(InfeasibleTargetError) as ei:
        inverse_design(0.5, "size", fixed)
    assert ei.value.bound == 0.5
    with pytest.raises(InfeasibleTargetError):
        inverse_design(0.49, "prestretch", fixed)
    with pytest.raises(InfeasibleTargetError):
        inverse_design(0.1, "size", AnalyticInput(CS, D, L, 1.0))


@settings(max_examples=200)
@given(st.floats(1.0001, 10.0), st.floats(5.0, 500.0), st.floats(10.0, 1e4))
def test_pyramid_bounded_and_monotone(lam, length, d):
    a = height_ratio(AnalyticInput(CS, d, length, lam))
    b = height_ratio(AnalyticInput(CS, d, length, lam * 1.01))
    assert 0 < a < 0.5
    assert b >= a


@settings(max_examples=100)
@given(st.floats(0.01, 0.3), st.floats(5.0, 300.0))
def test_inverse_round_trip_property(target, length):
    fixed = AnalyticInput(CS, D, length, 1.5)
    try:
        lam = inverse_design(target, "prestretch", fixed)
    except InfeasibleTargetError as exc:
        assert target >= exc.bound
        return
    assert abs(height_ratio(AnalyticInput(CS, D, length, lam)) - target) < 1e-9
