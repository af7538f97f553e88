"""Confining potential, truncation cap, external field, and run constants."""

import math

import numpy as np
import pytest

from ringkinetics.domain import AnnulusSpec, NormsBundle
from ringkinetics.errors import DomainError, PotentialTableError
from ringkinetics.potential import (
    AprioriConstants,
    PotentialSpec,
    base_potential,
    base_potential_slope,
    capped_potential,
    confinement_radii,
    confinement_threshold,
    external_field,
    external_field_profile,
    margin_band_sup,
    truncation_level,
)

SQRT2 = math.sqrt(2.0)


# ---------------------------------------------------------------------------
# Reference profile
# ---------------------------------------------------------------------------

def test_base_potential_closed_form_points(csc_spec):
    # midpoint: csc(pi/2) - 1 = 0; quarter point: csc(pi/4) - 1 = sqrt(2) - 1
    assert base_potential(csc_spec, 2.0) == pytest.approx(0.0, abs=1e-15)
    assert base_potential(csc_spec, 1.5) == pytest.approx(SQRT2 - 1.0)
    assert base_potential(csc_spec, 2.5) == pytest.approx(SQRT2 - 1.0)
    # scalar in, scalar out
    assert isinstance(base_potential(csc_spec, 1.5), float)


def test_base_potential_wall_sentinel_and_domain(csc_spec):
    assert base_potential(csc_spec, 1.0 + 1e-15) == math.inf
    assert base_potential(csc_spec, 3.0 - 1e-15) == math.inf
    for bad in (1.0, 3.0, 0.5, 3.5):
        with pytest.raises(DomainError, match="open interval"):
            base_potential(csc_spec, bad)


def test_base_potential_symmetric_and_monotone(csc_spec):
    r = np.linspace(1.01, 2.0, 200)
    left = base_potential(csc_spec, r)
    right = base_potential(csc_spec, 4.0 - r)
    np.testing.assert_allclose(left, right, rtol=1e-12)
    assert np.all(np.diff(left) < 0.0)  # decreasing toward the midpoint
    assert np.all(left >= 0.0)


def test_base_potential_slope_matches_finite_differences(csc_spec, rng):
    r = rng.uniform(1.2, 2.8, size=40)
    h = 1e-6
    fd = (base_potential(csc_spec, r + h) - base_potential(csc_spec, r - h)) / (2 * h)
    np.testing.assert_allclose(base_potential_slope(csc_spec, r), fd, rtol=1e-7)
    assert base_potential_slope(csc_spec, 2.0) == pytest.approx(0.0, abs=1e-15)


def test_margin_band_sup_closed_form(csc_spec):
    assert margin_band_sup(csc_spec, 0.5) == pytest.approx(SQRT2 - 1.0)
    with pytest.raises(DomainError):
        margin_band_sup(csc_spec, 1.0)


# ---------------------------------------------------------------------------
# Tabulated profiles
# ---------------------------------------------------------------------------

def _tabulated_from_csc(annulus, n=2001, floor=100.0):
    explicit = PotentialSpec("explicit-csc", annulus, annulus.delta)
    # Clip the table where the explicit profile crosses the divergence floor.
    r = np.linspace(annulus.r1 + 1e-4, annulus.r2 - 1e-4, n)
    psi = base_potential(explicit, r)
    table = np.column_stack([r, psi])
    assert abs(table[0, 1]) >= floor and abs(table[-1, 1]) >= floor
    return PotentialSpec("tabulated", annulus, annulus.delta, table=table,
                         divergence_floor=floor)


def test_tabulated_profile_matches_explicit(annulus, csc_spec):
    spec = _tabulated_from_csc(annulus)
    r = np.linspace(1.1, 2.9, 101)
    np.testing.assert_allclose(
        base_potential(spec, r), base_potential(csc_spec, r), rtol=1e-6, atol=1e-8
    )


def test_tabulated_validation_errors(annulus):
    good_r = np.linspace(1.1, 2.9, 8)
    tall = 1e3 * np.ones(8)
    with pytest.raises(PotentialTableError, match="unknown potential kind"):
        PotentialSpec("mystery", annulus, annulus.delta)
    with pytest.raises(PotentialTableError, match="n >= 4"):
        PotentialSpec("tabulated", annulus, annulus.delta, table=np.ones((2, 2)))
    bad_r = good_r.copy()
    bad_r[3] = bad_r[2]
    with pytest.raises(PotentialTableError, match="strictly increasing"):
        PotentialSpec("tabulated", annulus, annulus.delta,
                      table=np.column_stack([bad_r, tall]))
    outside = np.column_stack([np.linspace(0.9, 2.9, 8), tall])
    with pytest.raises(PotentialTableError, match="strictly inside"):
        PotentialSpec("tabulated", annulus, annulus.delta, table=outside)
    small = np.column_stack([good_r, np.ones(8)])
    with pytest.raises(PotentialTableError, match="divergence floor"):
        PotentialSpec("tabulated", annulus, annulus.delta, table=small)


# ---------------------------------------------------------------------------
# A-priori constants: the hand-evaluated example
# ---------------------------------------------------------------------------

def test_constants_canonical_values(unit_constants):
    assert unit_constants.transit_count(1.0) == 1
    assert unit_constants.growth_rate(1.0) == pytest.approx(13.0, abs=1e-12)
    assert unit_constants.field_coeff(1.0) == pytest.approx(55.0, abs=1e-12)
    assert unit_constants.bar_gain(1.0) == pytest.approx(4339.0 / 13.0, abs=1e-12)


def test_transit_count_edges(unit_constants):
    assert unit_constants.transit_count(0.0) == 0
    assert unit_constants.transit_count(2.0) == 1  # exact multiple stays down
    assert unit_constants.transit_count(2.0 + 1e-6) == 2
    assert unit_constants.transit_count(4.5) == 3
    with pytest.raises(DomainError):
        unit_constants.transit_count(-0.1)


def test_bounds_nondecreasing_in_time(unit_constants, rng):
    ts = np.sort(rng.uniform(0.0, 6.0, size=24))
    for fn in (
        unit_constants.tangential_field_bound,
        unit_constants.momentum_support_bound,
        unit_constants.density_bound,
        unit_constants.growth_rate,
        unit_constants.field_coeff,
    ):
        vals = [fn(float(t)) for t in ts]
        assert all(b >= a - 1e-12 for a, b in zip(vals, vals[1:]))


def test_radial_field_bound_is_charge_plus_lambda(annulus):
    norms = NormsBundle(1.0, 1.0, 1.0, f0_l1=0.7, rp0f0_l1=1.0,
                        f0_linf=1.0, lam=0.2, m0=1.0)
    assert AprioriConstants(annulus, norms).radial_field_bound() == pytest.approx(0.9)


# ---------------------------------------------------------------------------
# Truncation cap
# ---------------------------------------------------------------------------

def test_truncation_level_formula(csc_spec, unit_constants, annulus):
    t = 1.0
    expected = (annulus.r2 / annulus.r1) * (SQRT2 - 1.0) + (
        unit_constants.bar_gain(t) / annulus.r1
    ) * math.exp(unit_constants.growth_rate(t) * t)
    assert truncation_level(csc_spec, unit_constants, 0.5, t) == pytest.approx(expected)


def test_capped_potential_three_branches(csc_spec, unit_constants, annulus):
    t = 0.01  # keep the cap low enough to be reachable
    bar = truncation_level(csc_spec, unit_constants, 0.5, t)

    # untouched branch: the midpoint value is zero, far below the cap
    assert capped_potential(csc_spec, unit_constants, 0.5, t, 2.0) == pytest.approx(0.0, abs=1e-14)

    # blend branch: invert psi(r*) = bar + 1/2; the cubic blend maps the
    # half-unit overshoot to exactly 5/8
    r_star = 1.0 + (annulus.width / math.pi) * math.asin(1.0 / (bar + 1.5))
    assert base_potential(csc_spec, r_star) == pytest.approx(bar + 0.5, rel=1e-12)
    assert capped_potential(csc_spec, unit_constants, 0.5, t, r_star) == pytest.approx(
        bar + 0.625, rel=1e-10
    )

    # flat branch: at the wall sentinel the profile is +inf, capped to bar + 1
    assert capped_potential(
        csc_spec, unit_constants, 0.5, t, 1.0 + 1e-15
    ) == pytest.approx(bar + 1.0)

    # the cap is a hard ceiling everywhere
    r = np.linspace(1.0 + 1e-12, 3.0 - 1e-12, 2001)
    assert np.max(capped_potential(csc_spec, unit_constants, 0.5, t, r)) <= bar + 1.0 + 1e-12


def test_blend_keeps_cap_c1():
    # The cubic blend glues the live profile (slope 1 in overshoot units) to
    # the flat ceiling (slope 0): value and slope match at both ends.
    from ringkinetics.potential import _hermite_blend, _hermite_blend_slope

    assert _hermite_blend(np.array(0.0)) == 0.0
    assert _hermite_blend(np.array(1.0)) == 1.0
    assert _hermite_blend_slope(np.array(0.0)) == 1.0
    assert _hermite_blend_slope(np.array(1.0)) == 0.0
    assert _hermite_blend(np.array(0.5)) == pytest.approx(0.625)
    u = np.linspace(0.05, 0.95, 19)
    h = 1e-7
    fd = (_hermite_blend(u + h) - _hermite_blend(u - h)) / (2 * h)
    np.testing.assert_allclose(_hermite_blend_slope(u), fd, rtol=1e-6)


def test_capped_potential_continuous_at_the_seams(csc_spec, unit_constants, annulus):
    t = 0.01
    bar = truncation_level(csc_spec, unit_constants, 0.5, t)
    width = annulus.width

    def psi(r):
        return capped_potential(csc_spec, unit_constants, 0.5, t, r)

    # radii where the overshoot u = psi_base - bar crosses 0 and 1
    for level in (bar, bar + 1.0):
        seam = 1.0 + (width / math.pi) * math.asin(1.0 / (level + 1.0))
        h = 1e-9
        assert abs(psi(seam + h) - psi(seam - h)) <= 1e-2


# ---------------------------------------------------------------------------
# External field
# ---------------------------------------------------------------------------

def test_external_field_is_divergence_of_r_psi(csc_spec, unit_constants, rng):
    # B_ext = psi/r + psi' = (1/r) d/dr (r psi): check against finite
    # differences of the capped potential in every branch.
    t = 0.01
    bar = truncation_level(csc_spec, unit_constants, 0.5, t)
    blend_r = 1.0 + (2.0 / math.pi) * math.asin(1.0 / (bar + 1.5))
    flat_r = 1.0 + 0.25 * (blend_r - 1.0)  # well inside the flat zone
    # Near the wall the third radial derivative is enormous, so the stencil
    # there must be much tighter to keep the truncation error in check.
    points = [(float(r), 1e-6) for r in rng.uniform(1.5, 2.5, 8)]
    points += [(blend_r, 1e-9), (flat_r, 1e-9)]
    for r, h in points:
        num = (
            (r + h) * capped_potential(csc_spec, unit_constants, 0.5, t, r + h)
            - (r - h) * capped_potential(csc_spec, unit_constants, 0.5, t, r - h)
        ) / (2 * h * r)
        val = external_field(csc_spec, unit_constants, 0.5, t, r)
        assert val == pytest.approx(num, rel=5e-5, abs=5e-5)


def test_external_field_vanishes_at_midpoint(csc_spec, unit_constants):
    # psi(r_mid) = 0 and psi'(r_mid) = 0, so B_ext(r_mid) = 0 exactly
    assert external_field(csc_spec, unit_constants, 0.5, 1.0, 2.0) == pytest.approx(
        0.0, abs=1e-14
    )


def test_external_field_profile_handles_walls_and_none(csc_spec, unit_constants):
    r = np.linspace(1.0, 3.0, 33)  # includes both walls
    prof = external_field_profile(csc_spec, unit_constants, 0.5, 0.01, r)
    assert prof.shape == r.shape
    assert np.all(np.isfinite(prof))
    np.testing.assert_array_equal(
        external_field_profile(None, None, 0.5, 0.0, r), np.zeros_like(r)
    )


# ---------------------------------------------------------------------------
# Confinement radii
# ---------------------------------------------------------------------------

def test_confinement_threshold_formula(csc_spec, unit_constants, annulus):
    t = 1.0
    band_edge = abs(1.0 / math.sin(math.pi * (annulus.width - 0.5) / annulus.width) - 1.0)
    expected = (
        1.0
        + (annulus.r2 / annulus.r1) * band_edge
        + (unit_constants.bar_gain(t) / annulus.r1) * math.exp(unit_constants.growth_rate(t) * t)
    )
    assert confinement_threshold(csc_spec, unit_constants, 0.5, t) == pytest.approx(expected)


def test_confinement_radii_symmetric_and_shrinking(csc_spec, unit_constants, annulus):
    lo1, hi1 = confinement_radii(csc_spec, unit_constants, 0.5, 0.5)
    lo2, hi2 = confinement_radii(csc_spec, unit_constants, 0.5, 2.0)
    for lo, hi in ((lo1, hi1), (lo2, hi2)):
        assert lo + hi == pytest.approx(annulus.r1 + annulus.r2)
        assert annulus.r1 < lo < hi < annulus.r2
    # the provable clearance decays as the threshold grows with time
    assert lo2 - annulus.r1 < lo1 - annulus.r1
    # and matches the arcsin closed form
    cs = confinement_threshold(csc_spec, unit_constants, 0.5, 0.5)
    assert lo1 - annulus.r1 == pytest.approx((annulus.width / math.pi) * math.asin(1.0 / cs))


def test_confinement_radii_require_explicit_profile(annulus, unit_constants):
    spec = _tabulated_from_csc(annulus)
    with pytest.raises(DomainError, match="explicit cosecant"):
        confinement_radii(spec, unit_constants, 0.5, 1.0)
