"""Counts, intensities, kernel-comparison reports, and subsequence selection:
the quantitative layer that turns kernels and samples into checkable numbers."""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .measures import class_representative
from .radialweight import RadialWeight
from .wpoly import BasisParams, build_basis


@dataclass(frozen=True)
class RegionSpec:
    """Annular region r_min <= |z| < r_max, optionally sector-restricted.

    Boundary convention: a point with |z| exactly r_min is inside, exactly
    r_max is outside.
    """

    r_min: float = 0.0
    r_max: float = math.inf
    theta_min: float = None
    theta_max: float = None
    compact_in_component: bool = False

    def __post_init__(self):
        if not (0.0 <= self.r_min < self.r_max):
            raise ValidationError("region needs 0 <= r_min < r_max")
        if (self.theta_min is None) != (self.theta_max is None):
            raise ValidationError("sector needs both angle bounds")
        if self.theta_min is not None and not (self.theta_min < self.theta_max):
            raise ValidationError("sector angles must be ordered")

    def is_sector(self):
        return self.theta_min is not None

    def contains(self, points):
        pts = np.asarray(points, dtype=complex)
        r = np.abs(pts)
        mask = (r >= self.r_min) & (r < self.r_max)
        if self.is_sector():
            span = self.theta_max - self.theta_min
            rel = np.mod(np.angle(pts) - self.theta_min, 2.0 * np.pi)
            mask &= rel < span
        return mask


def count_in(sample, region):
    """Number of sample points inside the region."""
    return int(np.sum(region.contains(sample.points)))


def count_in_moduli(moduli, region):
    """Count for radial regions directly from a modulus multiset."""
    if region.is_sector():
        raise ValidationError("modulus statistics cannot resolve sectors")
    m = np.asarray(moduli)
    return int(np.sum((m >= region.r_min) & (m < region.r_max)))


def expected_count_radial(basis, region):
    """Exact expected number of gas points in a radial region:
    sum_k P(R_k in region) with P a ratio of weighted radial integrals."""
    if region.is_sector():
        raise ValidationError("expected_count_radial needs a radial region")
    if basis.kind != "radial":
        raise ValidationError("expected_count_radial needs the radial basis")
    params = basis.params
    weight = RadialWeight(basis.measure, params.kappa, params.weight_power)
    degrees = params.degrees()
    log_part = weight.log_moment(degrees, region.r_min, region.r_max)
    log_total = weight.log_moment(degrees)
    with np.errstate(invalid="ignore"):
        probs = np.exp(log_part - log_total)
    probs = np.where(np.isfinite(log_part), probs, 0.0)
    return float(np.sum(probs))


def scaling_table(measure, kappa_rule, n_list, region):
    """Rows (N, eta_N, eta_N / sqrt(N), eta_N / (sqrt(N) log N)) of the
    exact expected outlier count over an N ladder."""
    rows = []
    for n in n_list:
        basis = build_basis(measure, BasisParams(n, kappa_rule(n)))
        eta = expected_count_radial(basis, region)
        rows.append({
            "n": int(n),
            "eta": eta,
            "eta_over_sqrt_n": eta / math.sqrt(n),
            "eta_over_sqrt_n_log_n": eta / (math.sqrt(n) * math.log(n)),
        })
    return rows


def sup_rel_diff(values_a, values_b):
    """max |A - B| / B over a shared grid; B must be strictly positive."""
    a = np.asarray(values_a, dtype=float)
    b = np.asarray(values_b, dtype=float)
    if a.shape != b.shape:
        raise ValidationError("grids must match")
    if np.any(b <= 0):
        raise ValidationError("reference values must be positive")
    return float(np.max(np.abs(a - b) / b))


def pearson_correlation(counts_a, counts_b):
    """Pearson correlation of paired per-replica counts."""
    x = np.asarray(counts_a, dtype=float)
    y = np.asarray(counts_b, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValidationError("count vectors must be 1-d and aligned")
    sx, sy = x.std(), y.std()
    if sx == 0.0 or sy == 0.0:
        raise ValidationError("zero-variance counts: correlation undefined")
    return float(np.mean((x - x.mean()) * (y - y.mean())) / (sx * sy))


def count_correlation(samples, region_a, region_b):
    """Correlation of per-replica counts in two disjoint regions."""
    ca = np.array([count_in(s, region_a) for s in samples])
    cb = np.array([count_in(s, region_b) for s in samples])
    return pearson_correlation(ca, cb)


def empirical_intensity(samples, r_edges, theta_edges=None):
    """Histogram estimate of the 1-point intensity on a polar grid:
    counts / (replicas * bin area)."""
    r_edges = np.asarray(r_edges, dtype=float)
    if theta_edges is None:
        theta_edges = np.array([0.0, 2.0 * np.pi])
    theta_edges = np.asarray(theta_edges, dtype=float)
    m = len(samples)
    if m == 0:
        raise ValidationError("need at least one sample")
    grid = np.zeros((len(r_edges) - 1, len(theta_edges) - 1))
    for s in samples:
        r = np.abs(s.points)
        t = np.mod(np.angle(s.points), 2.0 * np.pi)
        h, _, _ = np.histogram2d(r, t, bins=(r_edges, theta_edges))
        grid += h
    areas = 0.5 * np.diff(r_edges ** 2)[:, None] * np.diff(theta_edges)[None, :]
    return grid / (m * areas)


def subsequence_select(q, kappa_rule, target_q, n_range, tol):
    """All N in n_range whose representative charge [kappa_N q] lies within
    tol of the target class."""
    if not (0.0 < q <= 1.0):
        raise ValidationError("hole mass q must lie in (0, 1]")
    if not (0.0 <= target_q < 1.0):
        raise ValidationError("target class must lie in [0, 1)")
    ns = np.asarray(list(n_range), dtype=int)
    kappas = np.array([kappa_rule(int(n)) for n in ns])
    x = kappas * q
    reps = x - np.floor(x - target_q + 0.5)
    return [int(n) for n, r in zip(ns, reps) if abs(r - target_q) <= tol]


@dataclass
class ComparisonReport:
    """Pointwise comparison of two positive grid functions, the finite proxy
    for locally uniform kernel convergence."""

    grid: np.ndarray
    values_a: np.ndarray
    values_b: np.ndarray
    rel_diff: np.ndarray = field(init=False)
    sup_rel_diff: float = field(init=False)
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=complex)
        self.values_a = np.asarray(self.values_a, dtype=float)
        self.values_b = np.asarray(self.values_b, dtype=float)
        self.rel_diff = np.abs(self.values_a - self.values_b) / self.values_b
        self.sup_rel_diff = float(np.max(self.rel_diff))

    def rows(self):
        for z, a, b, d in zip(self.grid, self.values_a, self.values_b, self.rel_diff):
            yield {"re": z.real, "im": z.imag, "value_a": a, "value_b": b,
                   "rel_diff": d}


def kappa_rule_n_plus_1(n):
    return float(n + 1)


def make_kappa_rule(kind, chi=None):
    """kappa_N = N + 1 or N + chi with chi in (0, 1]."""
    if kind == "N+1":
        return kappa_rule_n_plus_1
    if kind == "N+chi":
        if chi is None or not (0.0 < chi <= 1.0):
            raise ValidationError("kappa rule N+chi needs chi in (0, 1]")
        return lambda n: float(n) + float(chi)
    raise ValidationError(f"unknown kappa rule {kind!r}")
