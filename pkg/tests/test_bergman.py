"""Limit-kernel oracles: closed forms vs series, the rational-basis
evaluator vs every closed form, and the zero-intensity functional."""

import numpy as np
import pytest

from jellium.errors import ValidationError
from jellium.bergman import (disk_kernel, exterior_disk_kernel, szego_disk,
                             disk_diag, exterior_disk_diag, disk_scaled_diag,
                             exterior_weighted_diag, annulus_weighted_diag,
                             gaf_zero_intensity, Circle, RationalDomain,
                             RationalBergman, rational_bergman)


def disk_kernel_series_oracle(z, w, terms=400):
    u = z * np.conj(w)
    return sum((k + 1) * u ** k for k in range(terms)) / np.pi


def exterior_series_oracle(z, w, terms=400):
    u = 1.0 / (z * np.conj(w))
    return sum((k - 1) * u ** k for k in range(2, terms)) / np.pi


def szego_series_oracle(z, w, terms=400):
    u = z * np.conj(w)
    return sum(u ** k for k in range(terms)) / (2 * np.pi)


def test_disk_kernel_values():
    assert disk_kernel(0, 0) == pytest.approx(1 / np.pi, rel=1e-14)
    assert disk_kernel(0.5, 0.5) == pytest.approx(16 / (9 * np.pi), rel=1e-14)
    z, w = 0.3 + 0.4j, -0.2 + 0.6j
    assert disk_kernel(z, w) == pytest.approx(disk_kernel_series_oracle(z, w), rel=1e-12)
    assert disk_kernel(z, w) == pytest.approx(np.conj(disk_kernel(w, z)), rel=1e-14)


def test_exterior_kernel_values():
    s2 = complex(np.sqrt(2.0))
    assert exterior_disk_kernel(s2, s2).real == pytest.approx(1 / np.pi, rel=1e-13)
    assert exterior_disk_kernel(2, 2) == pytest.approx(1 / (9 * np.pi), rel=1e-14)
    z, w = 1.5 + 0.5j, -1.1 - 1.2j
    assert exterior_disk_kernel(z, w) == pytest.approx(
        exterior_series_oracle(z, w), rel=1e-12)


def test_exterior_blowup_power_law():
    # diag ~ (|z|^2 - 1)^{-2} near the boundary
    v1 = exterior_disk_diag(np.sqrt(1.1))
    v2 = exterior_disk_diag(np.sqrt(1.01))
    ratio = v2 / v1
    assert ratio == pytest.approx((0.1 / 0.01) ** 2, rel=1e-2)


def test_boundary_rejected():
    with pytest.raises(ValidationError):
        disk_kernel(1.0, 0.5)
    with pytest.raises(ValidationError):
        exterior_disk_kernel(1.0, 2.0)
    with pytest.raises(ValidationError):
        szego_disk(0.2, 1.0)


def test_szego_values():
    assert szego_disk(0, 0) == pytest.approx(1 / (2 * np.pi), rel=1e-14)
    assert szego_disk(0.5, 0.5) == pytest.approx(2 / (3 * np.pi), rel=1e-14)
    z, w = 0.1 + 0.7j, 0.4 - 0.2j
    assert szego_disk(z, w) == pytest.approx(szego_series_oracle(z, w), rel=1e-12)
    assert szego_disk(z, w) == pytest.approx(np.conj(szego_disk(w, z)), rel=1e-14)


def test_annulus_single_term_normalization():
    # with only the n = 0 term: 1 / (2 pi int_1^2 r dr) = 1 / (3 pi)
    # check by comparing the full series against a brute bilateral sum
    def brute(a, b, q, r, nmax=500):
        total = 0.0
        for n in range(-nmax, nmax + 1):
            p = 2 * n + 1 - 2 * q
            integral = np.log(b / a) if abs(p + 1) < 1e-14 else \
                (b ** (p + 1) - a ** (p + 1)) / (p + 1)
            total += r ** (2 * n - 2 * q) / (2 * np.pi * integral)
        return total

    for q in (0.0, 0.3, 0.77):
        for r in (1.2, np.sqrt(2), 1.9):
            assert annulus_weighted_diag(1, 2, q, r) == pytest.approx(
                brute(1, 2, q, r), rel=1e-10)
    single = 1.0 / (2 * np.pi * 1.5)
    assert single == pytest.approx(1 / (3 * np.pi), rel=1e-15)


def test_annulus_index_shift_invariance():
    for q in (0.0, 0.3, 0.9):
        d0 = annulus_weighted_diag(1, 2, q, np.sqrt(2))
        d1 = annulus_weighted_diag(1, 2, q + 1.0, np.sqrt(2))
        assert abs(d1 / d0 - 1.0) < 1e-10


def test_annulus_wide_limit_reaches_exterior():
    # the n = -1 term decays like 1 / log b, so percent-level agreement
    # needs b near 1e15
    t = 1.5
    ext = exterior_disk_diag(t)
    rel_104 = abs(annulus_weighted_diag(1, 1e4, 0.0, t) / ext - 1.0)
    rel_1016 = abs(annulus_weighted_diag(1, 1e16, 0.0, t) / ext - 1.0)
    assert rel_1016 < 0.01
    # the observed rate matches the 1 / log b law
    assert rel_104 == pytest.approx(rel_1016 * np.log(1e16) / np.log(1e4), rel=0.05)


def test_annulus_diag_q_dependence_scale():
    # Poisson summation: the charge class moves the diagonal only at scale
    # exp(-2 pi^2 / log(b/a)): invisible for A(1,2), >1% for A(1,100)
    d0 = annulus_weighted_diag(1, 2, 0.0, np.sqrt(2))
    d3 = annulus_weighted_diag(1, 2, 0.3, np.sqrt(2))
    assert abs(d3 / d0 - 1.0) < 1e-9
    w0 = annulus_weighted_diag(1, 100, 0.0, 10.0)
    w3 = annulus_weighted_diag(1, 100, 0.3, 10.0)
    assert abs(w3 / w0 - 1.0) > 0.01


def test_annulus_diag_continuous_in_q():
    d = annulus_weighted_diag(1, 100, 0.30, 10.0)
    d_eps = annulus_weighted_diag(1, 100, 0.31, 10.0)
    assert abs(d_eps / d - 1.0) <= 0.05


def test_annulus_rejects_outside():
    with pytest.raises(ValidationError):
        annulus_weighted_diag(1, 2, 0.0, 2.5)


def test_exterior_weighted_closed_form_vs_wide_annulus():
    # the weighted exterior diagonal is the b -> infinity annulus limit
    for q in (0.0, 0.3, 0.6):
        v = exterior_weighted_diag(1.0, q, 1.5)
        w = annulus_weighted_diag(1.0, 1e15, q, 1.5)
        tol = 0.02 if q == 0.0 else 1e-6  # q = 0 keeps the 1/log b mode
        assert v == pytest.approx(w, rel=tol)
    assert exterior_weighted_diag(1.0, 0.0, 1.5) == pytest.approx(
        exterior_disk_diag(1.5), rel=1e-14)


def test_scaled_disk_diag():
    assert disk_scaled_diag(1.0, 0.5) == pytest.approx(disk_diag(0.5), rel=1e-14)
    # scaling: B_{rD}(z) = B_D(z/r) / r^2
    assert disk_scaled_diag(2.0, 1.0) == pytest.approx(disk_diag(0.5) / 4.0, rel=1e-14)


def test_rational_disk_matches_closed_form():
    rb = RationalBergman(RationalDomain(outer=Circle(0j, 1.0)), (), n_poly=44)
    assert rb.gram_residual < 1e-8
    prev = None
    for z in (0j, 0.35 + 0.2j, 0.6 - 0.5j, 0.8 + 0j):
        assert rb.diag(z) == pytest.approx(disk_diag(z), rel=1e-6)


def test_rational_exterior_matches_closed_form():
    dom = RationalDomain(outer=None, holes=(Circle(0j, 1.0),), anchors=(0j,))
    rb = RationalBergman(dom, (0.0,), n_pole=44)
    for z in (1.25 + 0j, 1.5 + 0.7j, 2.5 - 1.0j):
        assert rb.diag(z) == pytest.approx(exterior_disk_diag(z), rel=1e-6)


def test_rational_annulus_matches_series():
    dom = RationalDomain(outer=Circle(0j, 2.0), holes=(Circle(0j, 1.0),),
                         anchors=(0j,))
    rb = RationalBergman(dom, (0.3,), n_poly=28, n_pole=28)
    z = complex(np.sqrt(2.0))
    assert rb.diag(z) == pytest.approx(
        annulus_weighted_diag(1, 2, 0.3, z), rel=1e-5)


def test_rational_charge_reduction_mod_one():
    dom = RationalDomain(outer=Circle(0j, 2.0), holes=(Circle(0j, 1.0),),
                         anchors=(0j,))
    a = RationalBergman(dom, (0.3,), n_poly=20, n_pole=20)
    b = RationalBergman(dom, (1.3,), n_poly=20, n_pole=20)
    z = 1.4 + 0.2j
    assert a.diag(z) == pytest.approx(b.diag(z), rel=1e-12)


def test_rational_anchor_freedom():
    # moving the anchor inside the hole leaves the diagonal unchanged
    dom0 = RationalDomain(outer=Circle(0j, 2.0), holes=(Circle(0j, 1.0),),
                          anchors=(0j,))
    dom1 = RationalDomain(outer=Circle(0j, 2.0), holes=(Circle(0j, 1.0),),
                          anchors=(0.2 + 0.1j,))
    a = RationalBergman(dom0, (0.3,), n_poly=26, n_pole=26)
    b = RationalBergman(dom1, (0.3,), n_poly=26, n_pole=26)
    for z in (1.35 + 0j, -1.6 + 0.4j):
        assert a.diag(z) == pytest.approx(b.diag(z), rel=1e-4)


def test_rational_family_growth_monotone():
    dom = RationalDomain(outer=Circle(0j, 2.0), holes=(Circle(0j, 1.0),),
                         anchors=(0j,))
    z = 1.5 + 0.3j
    prev = 0.0
    for size in (6, 12, 20, 28):
        val = RationalBergman(dom, (0.3,), n_poly=size, n_pole=size).diag(z)
        assert val >= prev - 1e-12
        prev = val


def test_rational_off_center_hole():
    # no closed form: check positivity, Gram quality, and growth stability
    dom = RationalDomain(outer=Circle(0j, 2.0), holes=(Circle(0.5 + 0j, 0.4),))
    small = RationalBergman(dom, (0.25,), n_poly=10, n_pole=10)
    big = RationalBergman(dom, (0.25,), n_poly=16, n_pole=16)
    assert big.gram_residual < 1e-6
    for z in (-1.0 + 0.3j, 1.4 + 0.8j):
        assert big.diag(z) > 0
        assert big.diag(z) >= small.diag(z) - 1e-12
    # away from the boundaries the family has converged
    assert big.diag(-1.0 + 0.3j) == pytest.approx(small.diag(-1.0 + 0.3j), rel=1e-4)


def test_rational_two_off_center_holes():
    # grazing arcs from two holes: needs the documented denser angular rule
    dom = RationalDomain(outer=Circle(0j, 3.0),
                         holes=(Circle(-1.2 + 0j, 0.5), Circle(1.3 + 0.2j, 0.4)))
    rb = RationalBergman(dom, (0.2, 0.6), n_poly=6, n_pole=6,
                         radial_subdiv=10, arc_density=80)
    assert rb.gram_residual < 1e-6
    assert rb.diag(0.1 + 1.5j) > 0


def test_rational_conditioning_error_reports_residual():
    from jellium.errors import ConditioningError
    dom = RationalDomain(outer=Circle(0j, 3.0),
                         holes=(Circle(-1.2 + 0j, 0.5), Circle(1.3 + 0.2j, 0.4)))
    with pytest.raises(ConditioningError) as err:
        RationalBergman(dom, (0.2, 0.6), n_poly=10, n_pole=10,
                        radial_subdiv=8, arc_density=24)
    assert err.value.residual > 1e-6
    assert "family size" in str(err.value)


def test_rational_single_call_wrapper():
    val = rational_bergman(RationalDomain(outer=Circle(0j, 1.0)), (), 0.3 + 0j,
                           n_poly=30)
    assert val == pytest.approx(disk_diag(0.3), rel=1e-6)


def test_rational_domain_validation():
    with pytest.raises(ValidationError):
        RationalDomain(outer=Circle(0j, 1.0), holes=(Circle(0j, 1.5),))
    with pytest.raises(ValidationError):
        RationalDomain(outer=None, holes=(Circle(0j, 1.0),), anchors=(2.0 + 0j,))
    with pytest.raises(ValidationError):
        RationalDomain(outer=Circle(0j, 3.0),
                       holes=(Circle(-1 + 0j, 0.8), Circle(0.5 + 0j, 0.8)))


def test_gaf_zero_intensity_from_szego():
    diag = lambda z: szego_disk(z, z).real
    assert gaf_zero_intensity(diag, 0.0) == pytest.approx(1 / np.pi, abs=1e-6)
    assert gaf_zero_intensity(diag, 0.5) == pytest.approx(
        16 / (9 * np.pi), abs=1e-6)
    assert gaf_zero_intensity(lambda z: 3.7, 0.2 + 0.1j) == pytest.approx(0.0, abs=1e-9)
    with pytest.raises(ValidationError):
        gaf_zero_intensity(lambda z: -1.0, 0.0)


def test_gaf_intensity_matches_disk_kernel_on_grid():
    diag = lambda z: szego_disk(z, z).real
    for r in np.linspace(0.0, 0.8, 9):
        assert gaf_zero_intensity(diag, complex(r)) == pytest.approx(
            disk_diag(r), rel=1e-5)
