"""Potential evaluation against brute-force quadrature oracles, hole
bookkeeping, and the cut-open-circle representative."""

import numpy as np
import pytest
from scipy.integrate import quad

from jellium.errors import ValidationError
from jellium.measures import (MeasureSpec, UniformCircle, UniformDisk,
                              UniformAnnulus, RadialDensity, PolarDensity,
                              circle_mixture, log_potential, hole_masses,
                              class_representative, PotentialField)

CIRCLE = circle_mixture([(1.0, 1.0)])
DISK = MeasureSpec(((1.0, UniformDisk(1.0)),))


def circle_potential_oracle(z, radius=1.0):
    # (1/2pi) int log|z - radius e^{i t}| dt
    val, _ = quad(lambda t: np.log(abs(z - radius * np.exp(1j * t))),
                  0.0, 2.0 * np.pi, limit=200)
    return val / (2.0 * np.pi)


def disk_potential_oracle(z, radius=1.0):
    # 2-d quadrature of log|z - w| over the uniform disk
    def inner(r):
        val, _ = quad(lambda t: np.log(abs(z - r * np.exp(1j * t))),
                      0.0, 2.0 * np.pi, limit=200)
        return r * val
    val, _ = quad(inner, 0.0, radius, limit=200)
    return val * 2.0 / radius ** 2 / (2.0 * np.pi)


def test_circle_potential_center_is_zero():
    assert log_potential(CIRCLE, 0j) == 0.0


def test_circle_potential_outside_matches_quadrature_oracle():
    oracle = circle_potential_oracle(2.0)
    assert oracle == pytest.approx(np.log(2.0), abs=1e-10)
    assert log_potential(CIRCLE, 2 + 0j) == pytest.approx(oracle, abs=1e-9)


def test_disk_potential_center_and_boundary():
    assert disk_potential_oracle(0.0) == pytest.approx(-0.5, abs=1e-8)
    assert disk_potential_oracle(1.0) == pytest.approx(0.0, abs=1e-7)
    assert log_potential(DISK, 0j) == pytest.approx(-0.5, abs=1e-14)
    assert log_potential(DISK, 1 + 0j) == pytest.approx(0.0, abs=1e-14)


def test_annulus_potential_against_quadrature():
    mu = MeasureSpec(((1.0, UniformAnnulus(1.0, 2.0)),))

    def oracle(z):
        def inner(r):
            val, _ = quad(lambda t: np.log(abs(z - r * np.exp(1j * t))),
                          0, 2 * np.pi, limit=200)
            return r * val
        val, _ = quad(inner, 1.0, 2.0, limit=200)
        return val * 2.0 / (4.0 - 1.0) / (2.0 * np.pi)

    for z in (0.3 + 0.1j, 1.5 + 0j, 3.0 - 1.0j):
        assert log_potential(mu, z) == pytest.approx(oracle(z), abs=1e-8)


def test_potential_equals_log_abs_outside_support():
    mu = circle_mixture([(0.25, 0.5), (0.5, 1.0), (0.25, 2.0)])
    for z in (2 + 1j, -3.5j, 10 + 0j):
        assert abs(log_potential(mu, z) - np.log(abs(z))) < 1e-14


def test_radial_potential_nondecreasing():
    mu = MeasureSpec(((0.5, UniformDisk(1.0)), (0.5, UniformAnnulus(1.5, 2.5))))
    r = np.linspace(0.0, 4.0, 400)
    u = log_potential(mu, r.astype(complex))
    assert np.all(np.diff(u) >= -1e-12)


def test_potential_rejects_nonfinite():
    with pytest.raises(ValidationError):
        log_potential(CIRCLE, complex(np.inf, 0))


def test_tabulated_radial_density_matches_closed_form_disk():
    # F(r) = r^2 is the unit-disk CDF; on a fine grid the interpolant error
    # is second order
    grid = np.linspace(0.0, 1.0, 801)
    tab = MeasureSpec(((1.0, RadialDensity(tuple(grid), tuple(grid ** 2))),))
    for z in (0j, 0.4 + 0.2j, 1.5 + 0j):
        assert log_potential(tab, z) == pytest.approx(
            log_potential(DISK, z), abs=5e-6)


def test_polar_density_matches_radial_annulus():
    r_grid = np.linspace(1.0, 2.0, 41)
    t_grid = np.linspace(0.0, 2 * np.pi, 64, endpoint=False)
    dens = np.full((41, 64), 1.0 / (np.pi * 3.0))  # uniform annulus density
    mu = MeasureSpec(((1.0, PolarDensity(tuple(r_grid), tuple(t_grid),
                                         tuple(map(tuple, dens)))),))
    ref = MeasureSpec(((1.0, UniformAnnulus(1.0, 2.0)),))
    field = PotentialField(mu)
    assert field.mode == "quadrature"
    for z in (0.2 + 0.1j, 3.0 + 0j):
        assert field(z) == pytest.approx(log_potential(ref, z), abs=2e-6)
    field.require_tolerance(1e-4)  # refinement check reports its accuracy
    with pytest.raises(Exception) as err:
        field.require_tolerance(1e-16)
    assert getattr(err.value, "achieved", None) is not None


def test_measure_validation():
    with pytest.raises(ValidationError):
        MeasureSpec(((0.5, UniformCircle(1.0)),))  # mass != 1
    with pytest.raises(ValidationError):
        MeasureSpec(((1.0, UniformCircle(-1.0)),))
    with pytest.raises(ValidationError):
        MeasureSpec(((1.0, UniformAnnulus(2.0, 1.0)),))
    with pytest.raises(ValidationError):
        MeasureSpec(((0.5, UniformCircle(1.0)), (0.6, UniformCircle(2.0))))


def test_hole_masses_two_circles():
    q = 0.3
    mu = circle_mixture([(q, 1.0), (1 - q, 2.0)])
    holes = hole_masses(mu, (1.0, 2.0))
    assert holes.masses == (q,)
    assert holes.anchors == (0j,)


def test_hole_masses_exterior_and_disk():
    assert hole_masses(CIRCLE, (1.0, np.inf)).masses == (1.0,)
    assert hole_masses(CIRCLE, (0.0, 1.0)).masses == ()


def test_hole_masses_rejects_overlap():
    with pytest.raises(ValidationError):
        hole_masses(CIRCLE, (0.5, 2.0))


def test_class_representative_examples():
    assert class_representative(5.1, 0.1) == pytest.approx(0.1, abs=1e-12)
    assert class_representative(3.95, 0.0) == pytest.approx(-0.05, abs=1e-12)
    assert class_representative(0.6, 0.9) == pytest.approx(0.6, abs=1e-12)


def test_class_representative_integer_shift():
    rng = np.random.default_rng(0)
    for _ in range(200):
        x = float(rng.uniform(-50, 50))
        lim = float(rng.uniform(0, 1))
        r1 = class_representative(x, lim)
        r2 = class_representative(x + 1.0, lim)
        assert abs(round(r2 - r1) - (r2 - r1)) < 1e-12
        assert lim - 0.5 - 1e-12 <= r1 < lim + 0.5


def test_hole_representatives():
    mu = circle_mixture([(0.5, 1.0), (0.5, 2.0)])
    holes = hole_masses(mu, (1.0, 2.0))
    reps = holes.representatives(kappa=7.0, limits=(0.5,))
    assert reps[0] == pytest.approx(0.5)
