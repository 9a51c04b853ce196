"""The N-dimensional weighted polynomial space and its correlation kernel.

The kernel is

    K_N(z, w) = sum_k p_k(z) conj(p_k(w)) sqrt(w(z) w(w)),
    w(z) = |z|^{2 p} e^{-2 kappa U(z)},

where (p_k) is an orthonormal basis of the span of monomials
z^{offset} ... z^{offset + n - 1} in L^2(C, w dm). For radial measures the
monomials are already orthogonal and only their norms are needed; otherwise
the basis comes from a column-pivoted QR of the weighted monomial samples on
a polar quadrature grid. All magnitude-sensitive products are assembled in
log space so degrees and charges in the thousands cannot overflow.
"""

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import ValidationError, ConditioningError
from .measures import MeasureSpec, PotentialField, log_potential
from .quadrature import panel_nodes, trapezoid_theta
from .radialweight import RadialWeight

GRAM_TOL = 1e-8


@dataclass(frozen=True)
class BasisParams:
    """Dimension, total charge, and conditioning scale of the basis.

    degree_offset / weight_power describe gauge-shifted variants: the weight
    gains |z|^{2 weight_power} and the monomial window starts at
    degree_offset. The canonical gas basis is offset 0, power 0, where the
    admissible window N < kappa <= N + 1 is enforced.
    """

    n: int
    kappa: float
    scale: float = 0.0  # 0 -> outer support radius, set at build time
    degree_offset: int = 0
    weight_power: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise ValidationError("basis dimension must be >= 1")
        if self.degree_offset == 0 and self.weight_power == 0:
            if not (self.n < self.kappa <= self.n + 1):
                raise ValidationError(
                    f"kappa must exceed N and be at most N+1, got kappa={self.kappa}, N={self.n}"
                )
        top = self.degree_offset + self.n - 1 + self.weight_power
        if not (top + 1 < self.kappa):
            raise ValidationError(
                "divergent norm: kappa must exceed top degree + weight_power + 1"
            )

    def degrees(self):
        return np.arange(self.degree_offset, self.degree_offset + self.n)


@dataclass
class WeightedBasis:
    params: BasisParams
    measure: MeasureSpec
    kind: str                       # "radial" | "general"
    log_norms: np.ndarray = None    # radial path
    coeffs: np.ndarray = None       # general path: column j = poly j over scaled monomials
    scale: float = 1.0
    gram_residual: float = 0.0
    quadrature_residual: float = 0.0
    node_count: int = 0
    _nodes: tuple = field(default=None, repr=False)

    @property
    def norms(self):
        """Squared norms ||z^k||^2 (may overflow for extreme weights; the
        log_norms field is the overflow-safe representation)."""
        if self.log_norms is None:
            raise ValidationError("norms only defined on the radial path")
        return np.exp(self.log_norms)


def radial_log_norms(measure, params):
    w = RadialWeight(measure, params.kappa, params.weight_power)
    return w.log_norms(params.degrees())


def radial_norms(measure, params):
    """||z^k||^2 for k in the degree window (radial measures only)."""
    return np.exp(radial_log_norms(measure, params))


def _polar_nodes(measure, params, n_theta=None, radial_subdiv=None, gl_order=16):
    """Polar quadrature nodes covering the plane: composite GL panels in r
    over the support (split at measure breakpoints), an inverted-variable
    tail beyond it, and a uniform angular grid (exact for the occurring
    angular frequencies when n_theta > 2 * top_degree)."""
    top = params.degree_offset + params.n - 1
    if n_theta is None:
        n_theta = 2 * top + 6
    outer = measure.outer_radius()
    breaks = [0.0] + measure.breakpoints()
    if breaks[-1] < outer:
        breaks.append(outer)
    if radial_subdiv is None:
        radial_subdiv = max(8, (params.n + 3) // 4)
    rs, wr = [], []
    for lo, hi in zip(breaks[:-1], breaks[1:]):
        edges = np.linspace(lo, hi, radial_subdiv + 1)
        for a, b in zip(edges[:-1], edges[1:]):
            x, w = panel_nodes(a, b, gl_order)
            rs.append(x)
            wr.append(w)
    # tail r = outer / u, dr = outer / u^2 du
    u_edges = np.geomspace(1e-9, 1.0, 13)
    for a, b in zip(u_edges[:-1], u_edges[1:]):
        u, w = panel_nodes(a, b, gl_order)
        rs.append(outer / u)
        wr.append(w * outer / u ** 2)
    r = np.concatenate(rs)
    wr = np.concatenate(wr)
    theta, wt = trapezoid_theta(n_theta)
    return r, wr, theta, wt


def _weighted_monomial_matrix(measure, params, r, wr, theta, wt, scale):
    """A[i, k] = (z_i / s)^{d_k} sqrt(w(z_i) dm_i), assembled stably."""
    kappa, p = params.kappa, params.weight_power
    with np.errstate(divide="ignore"):
        logr = np.log(np.maximum(r, 1e-300))
    if measure.is_radial():
        u = np.asarray(log_potential(measure, r.astype(complex)))[:, None]
    else:
        nodes = r[:, None] * np.exp(1j * theta)[None, :]
        u = np.asarray(log_potential(measure, nodes.ravel())).reshape(nodes.shape)
    # log of w(z) * r (area element) * wr * wt, halved for the sqrt factor
    log_w = (2.0 * p + 1.0) * logr[:, None] - 2.0 * kappa * u \
        + np.log(wr)[:, None] + np.log(wt)[None, :]
    z_ratio = np.exp(logr - math.log(scale))[:, None] * np.exp(1j * theta)[None, :]
    base_log = 0.5 * log_w \
        + params.degree_offset * (logr[:, None] - math.log(scale))
    base = np.exp(base_log) * np.exp(1j * params.degree_offset * theta)[None, :]
    n_nodes = r.size * theta.size
    A = np.empty((n_nodes, params.n), dtype=complex)
    col = base
    A[:, 0] = col.ravel()
    for j in range(1, params.n):
        col = col * z_ratio
        A[:, j] = col.ravel()
    return A


def build_basis(measure, params, force_general=False, n_theta=None,
                radial_subdiv=None, gram_tol=GRAM_TOL):
    """Orthonormal basis of the weighted polynomial space.

    Radial measures get the diagonal monomial basis with closed-form or
    quadrature norms; the general path samples weighted monomials on a polar
    grid and orthonormalizes by column-pivoted QR. The quadrature_residual
    field reports the Gram departure re-measured on a refined grid, which is
    the honest accuracy signal for the general path.
    """
    scale = params.scale if params.scale > 0 else measure.outer_radius()
    if measure.is_radial() and not force_general:
        log_norms = radial_log_norms(measure, params)
        return WeightedBasis(params=params, measure=measure, kind="radial",
                             log_norms=log_norms, scale=scale)

    r, wr, theta, wt = _polar_nodes(measure, params, n_theta, radial_subdiv)
    A = _weighted_monomial_matrix(measure, params, r, wr, theta, wt, scale)
    q, rmat, piv = scipy.linalg.qr(A, mode="economic", pivoting=True)
    rinv = scipy.linalg.solve_triangular(rmat, np.eye(params.n), lower=False)
    coeffs = np.zeros((params.n, params.n), dtype=complex)
    coeffs[piv, :] = rinv
    gram = (A @ coeffs).conj().T @ (A @ coeffs)
    gram_residual = float(np.max(np.abs(gram - np.eye(params.n))))

    r2, wr2, theta2, wt2 = _polar_nodes(
        measure, params, n_theta,
        (radial_subdiv or max(8, (params.n + 3) // 4)) * 2)
    A2 = _weighted_monomial_matrix(measure, params, r2, wr2, theta2, wt2, scale)
    B2 = A2 @ coeffs
    gram2 = B2.conj().T @ B2
    quad_residual = float(np.max(np.abs(gram2 - np.eye(params.n))))

    if gram_residual > gram_tol or quad_residual > 100 * gram_tol:
        raise ConditioningError(
            f"orthonormalization failed: gram residual {gram_residual:.2e}, "
            f"refined {quad_residual:.2e}",
            residual=max(gram_residual, quad_residual),
            suggestion="reduce N or increase the node count",
        )
    return WeightedBasis(params=params, measure=measure, kind="general",
                         coeffs=coeffs, scale=scale,
                         gram_residual=gram_residual,
                         quadrature_residual=quad_residual,
                         node_count=A.shape[0],
                         _nodes=(r, wr, theta, wt))


class KernelEvaluator:
    """The finite-N correlation kernel of a WeightedBasis: Hermitian,
    nonnegative on the diagonal, rank N."""

    def __init__(self, basis: WeightedBasis, potential: PotentialField = None):
        self.basis = basis
        self.potential = potential or PotentialField(basis.measure)

    @property
    def n(self):
        return self.basis.params.n

    def _log_weight_half(self, z):
        """0.5 * log w(z) elementwise over complex z."""
        p = self.basis.params
        u = np.asarray(self.potential(z))
        r = np.abs(np.atleast_1d(z))
        with np.errstate(divide="ignore"):
            logr = np.log(np.maximum(r, 1e-300))
        half = p.weight_power * logr - p.kappa * u
        return half, logr

    def feature_rows(self, z):
        """Rows phi(z)_k = p_k(z) sqrt(w(z)); kernel values are inner
        products of these rows."""
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        params = self.basis.params
        degrees = params.degrees()
        half, logr = self._log_weight_half(z)
        theta = np.angle(z)
        if self.basis.kind == "radial":
            expo = degrees[None, :] * logr[:, None] + half[:, None] \
                - 0.5 * self.basis.log_norms[None, :]
            mag = np.exp(expo)
            # r = 0 with degree 0 gives 0 * (-inf); the monomial is 1 there
            zero = logr < -600
            if np.any(zero):
                safe = degrees[None, :] * np.where(zero[:, None], 0.0, logr[:, None])
                mag = np.where(
                    zero[:, None] & (degrees[None, :] > 0), 0.0,
                    np.where(zero[:, None],
                             np.exp(safe + half[:, None] - 0.5 * self.basis.log_norms[None, :]),
                             mag))
            return mag * np.exp(1j * theta[:, None] * degrees[None, :])
        log_s = math.log(self.basis.scale)
        expos = degrees[None, :] * (logr[:, None] - log_s) + half[:, None]
        monos = np.exp(expos) * np.exp(1j * theta[:, None] * degrees[None, :])
        return monos @ self.basis.coeffs

    def eval(self, z, w):
        """K_N(z, w); Hermitian by construction."""
        fz = self.feature_rows(np.asarray([z], dtype=complex))
        fw = self.feature_rows(np.asarray([w], dtype=complex))
        return complex(np.sum(fz[0] * np.conj(fw[0])))

    def diag(self, z):
        f = self.feature_rows(z)
        out = np.sum(np.abs(f) ** 2, axis=1)
        return out if np.ndim(z) else float(out[0])

    def cross_matrix(self, zs, ws):
        """K_N(z_i, w_j) as a matrix."""
        fz = self.feature_rows(zs)
        fw = self.feature_rows(ws)
        return fz @ fw.conj().T


def kernel_eval(kernel: KernelEvaluator, z, w):
    return kernel.eval(z, w)


def kernel_diag_grid(kernel: KernelEvaluator, grid):
    """Elementwise K_N(z, z) over a grid of points."""
    return kernel.diag(np.asarray(grid, dtype=complex))
