"""Weighted polynomial norms and kernels against quadrature oracles,
closed forms, and the Bergman monotonicity bound."""

import numpy as np
import pytest
from scipy.integrate import quad

from jellium.errors import ValidationError
from jellium.measures import (MeasureSpec, UniformDisk, circle_mixture,
                              log_potential)
from jellium.wpoly import (BasisParams, build_basis, KernelEvaluator,
                           radial_norms, radial_log_norms, kernel_eval,
                           kernel_diag_grid)
from jellium.bergman import exterior_disk_diag

CIRCLE = circle_mixture([(1.0, 1.0)])
TWO_CIRCLE = circle_mixture([(1 / np.sqrt(2), 1.0), (1 - 1 / np.sqrt(2), 2.0)])
DISK = MeasureSpec(((1.0, UniformDisk(1.0)),))


def norm_quadrature_oracle(measure, kappa, k):
    body, _ = quad(
        lambda r: r ** (2 * k + 1) * np.exp(-2 * kappa * log_potential(measure, r + 0j)),
        0.0, measure.outer_radius(), limit=400)
    tail, _ = quad(lambda r: r ** (2 * k + 1 - 2 * kappa),
                   measure.outer_radius(), np.inf, limit=200)
    return 2.0 * np.pi * (body + tail)


def test_circle_norms_closed_form():
    params = BasisParams(4, 5.0)
    norms = radial_norms(CIRCLE, params)
    # 2 pi (1/(2k+2) + 1/(2 kappa - 2k - 2))
    assert norms[0] == pytest.approx(5 * np.pi / 4, rel=1e-14)
    assert norms[1] == pytest.approx(5 * np.pi / 6, rel=1e-14)


@pytest.mark.parametrize("measure,kappa", [
    (CIRCLE, 5.0), (TWO_CIRCLE, 4.3), (DISK, 4.9)])
def test_norms_match_quadrature_oracle(measure, kappa):
    params = BasisParams(4, kappa)
    norms = radial_norms(measure, params)
    for k in range(4):
        assert norms[k] == pytest.approx(
            norm_quadrature_oracle(measure, kappa, k), rel=1e-9)


def test_norms_dilation_scaling():
    # dilating the measure by c and recentering kappa U by kappa log c
    # multiplies ||z^k||^2 by c^{2k+2}
    c = 2.0
    kappa = 7.0
    base = radial_log_norms(CIRCLE, BasisParams(6, kappa))
    dil = radial_log_norms(circle_mixture([(1.0, c)]), BasisParams(6, kappa))
    k = np.arange(6)
    expected = base + (2 * k + 2) * np.log(c) - 2 * kappa * np.log(c)
    assert np.allclose(dil, expected, atol=1e-12)


def test_kernel_two_term_example():
    # circle-uniform, kappa = N + 1, N = 2, diagonal at |z|^2 = 2
    kernel = KernelEvaluator(build_basis(CIRCLE, BasisParams(2, 3.0)))
    z = complex(np.sqrt(2.0))
    assert kernel.diag(z) == pytest.approx(1.0 / (4 * np.pi), rel=1e-13)
    assert kernel_eval(kernel, z, z).real == pytest.approx(1.0 / (4 * np.pi), rel=1e-13)


def test_kernel_hermitian_and_nonnegative():
    kernel = KernelEvaluator(build_basis(CIRCLE, BasisParams(8, 9.0)))
    rng = np.random.default_rng(1)
    pts = rng.normal(size=6) + 1j * rng.normal(size=6)
    for z in pts:
        for w in pts:
            assert kernel.eval(z, w) == pytest.approx(
                np.conj(kernel.eval(w, z)), abs=1e-14)
        assert kernel.diag(z) >= 0.0


def test_kernel_diag_at_zero_exact():
    for n in (1, 2, 64, 512):
        kernel = KernelEvaluator(build_basis(CIRCLE, BasisParams(n, n + 1.0)))
        assert kernel.diag(0j) == pytest.approx(
            1.0 / (np.pi * (1.0 + 1.0 / n)), abs=1e-12)


def test_n_equals_one_kernel_is_inverse_norm():
    basis = build_basis(CIRCLE, BasisParams(1, 1.5))
    kernel = KernelEvaluator(basis)
    z = 0.7 + 0.2j
    w = np.exp(-2 * 1.5 * log_potential(CIRCLE, z))
    assert kernel.diag(z) == pytest.approx(w / basis.norms[0], rel=1e-13)


def test_kernel_diag_grid_matches_pointwise():
    kernel = KernelEvaluator(build_basis(TWO_CIRCLE, BasisParams(12, 13.0)))
    grid = np.array([0.5 + 0j, 1.5 + 0.2j, 2.5 - 1j])
    vals = kernel_diag_grid(kernel, grid)
    for z, v in zip(grid, vals):
        assert v == pytest.approx(kernel.diag(z), rel=1e-14)


def test_general_path_reproduces_radial_norms():
    params = BasisParams(16, 17.0)
    b_rad = build_basis(CIRCLE, params)
    b_gen = build_basis(CIRCLE, params, force_general=True)
    assert b_gen.gram_residual < 1e-10
    assert b_gen.quadrature_residual < 1e-10
    kr, kg = KernelEvaluator(b_rad), KernelEvaluator(b_gen)
    grid = np.array([0.3 + 0.1j, 0.9j, 1.2 + 0j, 1.7 - 0.4j, 2.6 + 1j])
    assert np.max(np.abs(kg.diag(grid) / kr.diag(grid) - 1.0)) < 1e-8


def test_general_path_two_circle():
    params = BasisParams(12, 12.7)
    b_rad = build_basis(TWO_CIRCLE, params)
    b_gen = build_basis(TWO_CIRCLE, params, force_general=True)
    kr, kg = KernelEvaluator(b_rad), KernelEvaluator(b_gen)
    grid = np.array([0.5 + 0j, 1.4 + 0.3j, 2.4 - 0.5j])
    assert np.max(np.abs(kg.diag(grid) / kr.diag(grid) - 1.0)) < 1e-8


def test_general_path_discrete_trace_is_n():
    params = BasisParams(10, 11.0)
    basis = build_basis(CIRCLE, params, force_general=True)
    r, wr, theta, wt = basis._nodes
    kernel = KernelEvaluator(basis)
    pts = (r[:, None] * np.exp(1j * theta)[None, :]).ravel()
    area = (r[:, None] * wr[:, None] * wt[None, :]).ravel()
    trace = float(np.dot(kernel.diag(pts), area))
    assert trace == pytest.approx(10.0, rel=1e-6)


def test_discrete_reproducing_property():
    # int |K(z, w)|^2 dm(w) = K(z, z) over the discrete node measure
    params = BasisParams(10, 11.0)
    basis = build_basis(CIRCLE, params, force_general=True)
    kernel = KernelEvaluator(basis)
    r, wr, theta, wt = basis._nodes
    pts = (r[:, None] * np.exp(1j * theta)[None, :]).ravel()
    area = (r[:, None] * wr[:, None] * wt[None, :]).ravel()
    for z in (0.4 + 0.2j, 1.6 - 0.5j):
        row = kernel.cross_matrix(np.array([z]), pts)[0]
        reproduced = float(np.dot(np.abs(row) ** 2, area))
        assert reproduced == pytest.approx(kernel.diag(z), rel=1e-6)


def test_monotonicity_against_exterior_bergman():
    # K_N(z, z) <= B(z, z) on the uncharged component, every N
    for n in (4, 16, 64, 256):
        kernel = KernelEvaluator(build_basis(CIRCLE, BasisParams(n, n + 1.0)))
        for t in (1.1, 1.3, 2.0, 4.0):
            assert kernel.diag(complex(t)) <= exterior_disk_diag(t) * (1 + 1e-6)


def test_off_diagonal_modulus_converges_to_exterior_kernel():
    # off-diagonal moduli are gauge-invariant and converge like the diagonal
    from jellium.bergman import exterior_disk_kernel
    pairs = [(1.5 + 0j, 1.4 + 0.6j), (2.0 + 0.5j, -1.3 - 0.2j)]
    errs = {}
    for n in (64, 256):
        kernel = KernelEvaluator(build_basis(CIRCLE, BasisParams(n, n + 1.0)))
        errs[n] = max(
            abs(abs(kernel.eval(z, w)) / abs(exterior_disk_kernel(z, w)) - 1.0)
            for z, w in pairs)
    assert errs[256] < 0.01
    assert errs[256] < errs[64] / 2.5


def test_kappa_chi_family_converges_to_weighted_exterior():
    # kappa = N + chi: the outliers see the weighted exterior kernel at
    # charge class chi
    from jellium.bergman import exterior_weighted_diag
    for chi in (0.25, 0.5):
        errs = {}
        for n in (128, 512):
            kernel = KernelEvaluator(build_basis(CIRCLE, BasisParams(n, n + chi)))
            errs[n] = max(
                abs(kernel.diag(complex(t)) / exterior_weighted_diag(1.0, chi, t) - 1.0)
                for t in (1.3, 1.8))
        assert errs[512] < 0.01
        assert errs[512] < errs[128] / 2.5


def test_gauge_weight_multiplication_matches_degree_shift():
    # multiplying the weight by |z|^2 maps the space onto the degree-shifted
    # window: the correlation diagonals agree identically
    n = 24
    for kappa in (n + 0.5, n + 1.0):
        mult = build_basis(TWO_CIRCLE, BasisParams(n - 1, kappa, weight_power=1))
        shift = build_basis(TWO_CIRCLE, BasisParams(n - 1, kappa, degree_offset=1))
        km, ks = KernelEvaluator(mult), KernelEvaluator(shift)
        grid = np.array([0.4 + 0.1j, 1.3 + 0j, 1.6 - 0.8j, 3.0 + 1j])
        assert np.max(np.abs(km.diag(grid) / ks.diag(grid) - 1.0)) < 1e-10


def test_params_validation():
    with pytest.raises(ValidationError):
        BasisParams(4, 4.0)       # kappa must exceed N
    with pytest.raises(ValidationError):
        BasisParams(4, 5.5)       # kappa above N + 1
    with pytest.raises(ValidationError):
        BasisParams(0, 1.0)
    BasisParams(4, 4.0 + 1e-6)    # barely admissible is fine


def test_general_path_polar_density_smoke():
    # nonradial extended path at small N: the orthonormalization must hold
    # at the honest (coarse-data) tolerance and the trace must be N
    from jellium.measures import PolarDensity
    r_grid = np.linspace(0.5, 1.5, 17)
    t_grid = np.linspace(0, 2 * np.pi, 24, endpoint=False)
    area = np.pi * (1.5 ** 2 - 0.5 ** 2)
    dens = (1.0 + 0.2 * np.cos(t_grid))[None, :] * np.ones((17, 1)) / area
    mu = MeasureSpec(((1.0, PolarDensity(tuple(r_grid), tuple(t_grid),
                                         tuple(map(tuple, dens)))),))
    params = BasisParams(6, 6.6)
    basis = build_basis(mu, params, gram_tol=1e-4)
    assert basis.kind == "general"
    assert basis.gram_residual < 1e-10
    kernel = KernelEvaluator(basis)
    r, wr, theta, wt = basis._nodes
    pts = (r[:, None] * np.exp(1j * theta)[None, :]).ravel()
    w = (r[:, None] * wr[:, None] * wt[None, :]).ravel()
    trace = float(np.dot(kernel.diag(pts), w))
    assert trace == pytest.approx(6.0, rel=1e-6)
    z, wq = 1.0 + 0.3j, 0.3 - 1.0j
    assert kernel.eval(z, wq) == pytest.approx(np.conj(kernel.eval(wq, z)), abs=1e-12)


def test_nonradial_measure_rejected_on_radial_path():
    from jellium.measures import PolarDensity
    r_grid = tuple(np.linspace(1.0, 2.0, 9))
    t_grid = tuple(np.linspace(0, 2 * np.pi, 8, endpoint=False))
    dens = tuple(tuple(row) for row in
                 np.full((9, 8), 1.0 / (3 * np.pi)) * (1 + 0.1 * np.cos(t_grid))[None, :])
    mu = MeasureSpec(((1.0, PolarDensity(r_grid, t_grid, dens)),))
    with pytest.raises(ValidationError):
        radial_norms(mu, BasisParams(4, 4.5))


def test_divergent_top_degree_rejected():
    with pytest.raises(ValidationError):
        BasisParams(4, 5.0, weight_power=2)  # top-degree tail diverges
