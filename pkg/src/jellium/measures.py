"""Background measures, their logarithmic potentials, and hole bookkeeping.

A measure is a mixture of radial profiles (circles, disks, annuli, tabulated
radial CDFs) plus an extended path for polar-grid densities. For mixtures of
circles/disks/annuli the potential U(r) is piecewise

    U(r) = c + lam * log r + q * r^2

on each inter-breakpoint interval, and equals log r beyond the support. This
piecewise form is what makes closed-form norms, counts, and samplers possible
downstream.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError, QuadratureError
from .quadrature import panel_nodes

MASS_TOL = 1e-12


@dataclass(frozen=True)
class UniformCircle:
    """Unit of mass spread uniformly over the circle |z| = radius."""
    radius: float


@dataclass(frozen=True)
class UniformDisk:
    """Unit of mass spread uniformly over the disk |z| <= radius."""
    radius: float


@dataclass(frozen=True)
class UniformAnnulus:
    """Unit of mass spread uniformly over inner <= |z| <= outer."""
    inner: float
    outer: float


@dataclass(frozen=True)
class RadialDensity:
    """Radial profile given by a tabulated CDF on a grid.

    cdf is normalized to 1 at the last grid point; the component mass scales
    it. Between grid points the CDF is linear (piecewise-constant density).
    """
    radii: tuple
    cdf: tuple

    def __post_init__(self):
        object.__setattr__(self, "radii", tuple(float(r) for r in self.radii))
        object.__setattr__(self, "cdf", tuple(float(c) for c in self.cdf))


@dataclass(frozen=True)
class PolarDensity:
    """Extended path: density w(r, theta) sampled on a polar grid over an
    annular support. theta grid must be uniform on [0, 2pi). The sampled
    shape is normalized to unit mass internally; the component mass scales
    it."""
    r_grid: tuple
    theta_grid: tuple
    values: tuple  # row-major (len(r_grid), len(theta_grid))

    def as_arrays(self):
        r = np.asarray(self.r_grid, dtype=float)
        t = np.asarray(self.theta_grid, dtype=float)
        v = np.asarray(self.values, dtype=float).reshape(len(r), len(t))
        return r, t, v


RADIAL_PROFILES = (UniformCircle, UniformDisk, UniformAnnulus, RadialDensity)
CLOSED_FORM_PROFILES = (UniformCircle, UniformDisk, UniformAnnulus)


@dataclass(frozen=True)
class Component:
    mass: float
    profile: object


@dataclass(frozen=True)
class MeasureSpec:
    """A probability measure given as a mass-weighted mixture of profiles."""

    components: tuple

    def __post_init__(self):
        comps = tuple(
            c if isinstance(c, Component) else Component(float(c[0]), c[1])
            for c in self.components
        )
        object.__setattr__(self, "components", comps)
        self._validate()

    def _validate(self):
        if not self.components:
            raise ValidationError("measure needs at least one component")
        total = 0.0
        for comp in self.components:
            if not (comp.mass > 0.0):
                raise ValidationError("component masses must be strictly positive")
            total += comp.mass
            p = comp.profile
            if isinstance(p, UniformCircle):
                if not (p.radius > 0.0):
                    raise ValidationError("circle radius must be positive")
            elif isinstance(p, UniformDisk):
                if not (p.radius > 0.0):
                    raise ValidationError("disk radius must be positive")
            elif isinstance(p, UniformAnnulus):
                if not (0.0 <= p.inner < p.outer):
                    raise ValidationError("annulus bounds must satisfy 0 <= inner < outer")
            elif isinstance(p, RadialDensity):
                r = np.asarray(p.radii)
                c = np.asarray(p.cdf)
                if r.ndim != 1 or r.shape != c.shape or len(r) < 2:
                    raise ValidationError("radial CDF needs matching 1-d grids")
                if r[0] < 0 or np.any(np.diff(r) <= 0):
                    raise ValidationError("radial CDF grid must be increasing and nonnegative")
                if abs(c[0]) > MASS_TOL or abs(c[-1] - 1.0) > MASS_TOL:
                    raise ValidationError("radial CDF must run from 0 to 1")
                if np.any(np.diff(c) < -MASS_TOL):
                    raise ValidationError("radial CDF must be nondecreasing")
            elif isinstance(p, PolarDensity):
                r, t, v = p.as_arrays()
                if len(r) < 2 or len(t) < 4:
                    raise ValidationError("polar grid too small")
                if r[0] <= 0 or np.any(np.diff(r) <= 0):
                    raise ValidationError("polar r-grid must be positive increasing")
                dt = np.diff(t)
                if np.any(np.abs(dt - dt[0]) > 1e-9) or abs(t[0]) > 1e-12:
                    raise ValidationError("polar theta-grid must be uniform from 0")
                if np.any(v < 0):
                    raise ValidationError("polar density must be nonnegative")
            else:
                raise ValidationError(f"unknown profile type {type(p).__name__}")
        if abs(total - 1.0) > MASS_TOL:
            raise ValidationError(f"component masses must sum to 1, got {total!r}")

    # -- structure ---------------------------------------------------------

    def is_radial(self):
        return all(isinstance(c.profile, RADIAL_PROFILES) for c in self.components)

    def has_closed_form(self):
        return all(isinstance(c.profile, CLOSED_FORM_PROFILES) for c in self.components)

    def outer_radius(self):
        radii = []
        for c in self.components:
            p = c.profile
            if isinstance(p, UniformCircle) or isinstance(p, UniformDisk):
                radii.append(p.radius)
            elif isinstance(p, UniformAnnulus):
                radii.append(p.outer)
            elif isinstance(p, RadialDensity):
                radii.append(p.radii[-1])
            elif isinstance(p, PolarDensity):
                radii.append(p.r_grid[-1])
        return max(radii)

    def breakpoints(self):
        """Sorted radii at which the radial potential changes analytic form."""
        pts = set()
        for c in self.components:
            p = c.profile
            if isinstance(p, UniformCircle) or isinstance(p, UniformDisk):
                pts.add(p.radius)
            elif isinstance(p, UniformAnnulus):
                pts.add(p.inner)
                pts.add(p.outer)
            elif isinstance(p, RadialDensity):
                pts.update(p.radii)
            elif isinstance(p, PolarDensity):
                pts.add(p.r_grid[0])
                pts.add(p.r_grid[-1])
        return sorted(r for r in pts if r > 0)

    def radial_cdf(self, r):
        """Mass of the closed disk {|z| <= r} (radial measures only)."""
        if not self.is_radial():
            raise ValidationError("radial_cdf requires a radial measure")
        r = float(r)
        total = 0.0
        for c in self.components:
            p = c.profile
            if isinstance(p, UniformCircle):
                total += c.mass if r >= p.radius else 0.0
            elif isinstance(p, UniformDisk):
                total += c.mass * min(1.0, (r / p.radius) ** 2)
            elif isinstance(p, UniformAnnulus):
                num = max(0.0, min(r, p.outer) ** 2 - p.inner ** 2)
                total += c.mass * num / (p.outer ** 2 - p.inner ** 2)
            elif isinstance(p, RadialDensity):
                total += c.mass * float(np.interp(r, p.radii, p.cdf))
        return total


def circle_mixture(pairs):
    """Convenience constructor: [(mass, radius), ...] -> MeasureSpec."""
    return MeasureSpec(tuple((m, UniformCircle(r)) for m, r in pairs))


# -- piecewise potential ---------------------------------------------------

@dataclass(frozen=True)
class PotentialPiece:
    r_lo: float
    r_hi: float
    const: float
    log_coeff: float
    quad_coeff: float

    def u(self, r):
        r = np.asarray(r, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            lg = np.where(r > 0, np.log(np.maximum(r, 1e-300)), 0.0)
        out = self.const + self.log_coeff * lg + self.quad_coeff * r * r
        return out


def potential_pieces(measure):
    """Piecewise (const, log, quadratic) form of U(r) on [0, R_outer].

    Only available when every component is a circle/disk/annulus. Beyond
    R_outer the potential is exactly log r (total mass 1).
    """
    if not measure.has_closed_form():
        return None
    breaks = [0.0] + measure.breakpoints()
    pieces = []
    for lo, hi in zip(breaks[:-1], breaks[1:]):
        mid = 0.5 * (lo + hi)
        c = lam = q = 0.0
        for comp in measure.components:
            m, p = comp.mass, comp.profile
            if isinstance(p, UniformCircle):
                if mid >= p.radius:
                    lam += m
                else:
                    c += m * math.log(p.radius)
            elif isinstance(p, UniformDisk):
                if mid >= p.radius:
                    lam += m
                else:
                    c += m * (math.log(p.radius) - 0.5)
                    q += m / (2.0 * p.radius ** 2)
            elif isinstance(p, UniformAnnulus):
                a, b = p.inner, p.outer
                if mid >= b:
                    lam += m
                elif mid <= a:
                    if a == 0.0:
                        c += m * (math.log(b) - 0.5)  # degenerate disk
                    else:
                        c += m * ((b * b * math.log(b) - a * a * math.log(a))
                                  / (b * b - a * a) - 0.5)
                else:
                    den = b * b - a * a
                    lam += -m * a * a / den
                    c += m * (b * b * math.log(b) - 0.5 * b * b) / den
                    q += m / (2.0 * den)
        pieces.append(PotentialPiece(lo, hi, c, lam, q))
    return pieces


def _radial_density_potential(profile, r):
    """U for a unit-mass tabulated radial CDF, exact for the linear
    interpolant: U(r) = F(r) log r + sum of int log s dF over s > r."""
    grid = np.asarray(profile.radii)
    cdf = np.asarray(profile.cdf)
    r = np.atleast_1d(np.asarray(r, dtype=float))
    out = np.zeros_like(r)
    # atom-free piecewise-linear CDF: density f_j on [s_j, s_{j+1}]
    s0, s1 = grid[:-1], grid[1:]
    df = np.diff(cdf)
    with np.errstate(divide="ignore", invalid="ignore"):
        f = np.where(df > 0, df / (s1 - s0), 0.0)

    def int_logs(a, b):
        # int_a^b log s ds, elementwise, a <= b
        a = np.maximum(a, 1e-300)
        b = np.maximum(b, 1e-300)
        return b * (np.log(b) - 1.0) - a * (np.log(a) - 1.0)

    for i, ri in enumerate(r):
        if ri <= 0:
            # U(0) = int log s dF(s)
            out[i] = float(np.sum(f * int_logs(s0, s1)))
            continue
        upper = np.clip(s0, ri, None), np.clip(s1, ri, None)
        tail = float(np.sum(f * int_logs(upper[0], upper[1])))
        out[i] = float(np.interp(ri, grid, cdf)) * math.log(ri) + tail
    return out


class _PolarQuadrature:
    """Fixed quadrature nodes for a PolarDensity component. The measure is
    the bilinear interpolant of the samples; nodes subdivide each cell."""

    def __init__(self, profile, subdiv=2, order=4):
        r, t, v = profile.as_arrays()
        dt = t[1] - t[0]
        nodes_r, w_r, vals_interp = [], [], []
        # theta cells wrap: append the first column at 2pi
        t_ext = np.concatenate([t, [t[0] + 2 * np.pi]])
        v_ext = np.concatenate([v, v[:, :1]], axis=1)
        rr, ww, tt, wt, dens = [], [], [], [], []
        for i in range(len(r) - 1):
            for s in range(subdiv):
                a = r[i] + (r[i + 1] - r[i]) * s / subdiv
                b = r[i] + (r[i + 1] - r[i]) * (s + 1) / subdiv
                xr, wr = panel_nodes(a, b, order)
                for j in range(len(t)):
                    for s2 in range(subdiv):
                        ta = t_ext[j] + dt * s2 / subdiv
                        tb = t_ext[j] + dt * (s2 + 1) / subdiv
                        xt, wth = panel_nodes(ta, tb, order)
                        R, T = np.meshgrid(xr, xt, indexing="ij")
                        WR, WT = np.meshgrid(wr, wth, indexing="ij")
                        # bilinear interpolation inside cell (i, j)
                        fr = (R - r[i]) / (r[i + 1] - r[i])
                        ft = (T - t_ext[j]) / dt
                        dv = (v_ext[i, j] * (1 - fr) * (1 - ft)
                              + v_ext[i + 1, j] * fr * (1 - ft)
                              + v_ext[i, j + 1] * (1 - fr) * ft
                              + v_ext[i + 1, j + 1] * fr * ft)
                        rr.append(R.ravel())
                        tt.append(T.ravel())
                        ww.append((WR * WT).ravel())
                        dens.append(dv.ravel())
        self.r = np.concatenate(rr)
        self.theta = np.concatenate(tt)
        self.w = np.concatenate(ww) * np.concatenate(dens) * self.r
        self.total_mass = float(np.sum(self.w))
        self.points = self.r * np.exp(1j * self.theta)

    def potential(self, z, chunk=256):
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        out = np.empty(len(z))
        for lo in range(0, len(z), chunk):
            block = z[lo:lo + chunk]
            d = np.abs(block[:, None] - self.points[None, :])
            with np.errstate(divide="ignore"):
                out[lo:lo + chunk] = np.log(np.maximum(d, 1e-300)) @ self.w
        return out / self.total_mass


_POLAR_CACHE = {}


def _polar_quadrature(profile, subdiv=2):
    key = (id(profile), subdiv)
    hit = _POLAR_CACHE.get(key)
    if hit is not None and hit[0] is profile:
        return hit[1]
    quad = _PolarQuadrature(profile, subdiv=subdiv)
    if len(_POLAR_CACHE) > 16:
        _POLAR_CACHE.clear()
    _POLAR_CACHE[key] = (profile, quad)
    return quad


@dataclass
class PotentialField:
    """Evaluates U(z) for a measure; mode picked from the component types."""

    measure: MeasureSpec
    mode: str = field(init=False)
    _pieces: list = field(init=False, default=None, repr=False)
    _polar: list = field(init=False, default=None, repr=False)

    achieved_tol: float = field(init=False, default=0.0)

    def __post_init__(self):
        self._pieces = potential_pieces(self.measure)
        self._polar = None
        if self.measure.has_closed_form():
            self.mode = "closed-form-radial"
        elif self.measure.is_radial():
            self.mode = "radial-tabulated"
        else:
            self.mode = "quadrature"
            polar_profiles = [c.profile for c in self.measure.components
                              if isinstance(c.profile, PolarDensity)]
            self._polar = [(p, _polar_quadrature(p)) for p in polar_profiles]
            # refinement check on probe points straddling each support
            worst = 0.0
            for profile, quad in self._polar:
                fine = _polar_quadrature(profile, subdiv=3)
                r_lo, r_hi = quad.r.min(), quad.r.max()
                probe = np.array([0.5 * r_lo, 1.3 * r_hi,
                                  0.5 * (r_lo + r_hi)]).astype(complex)
                diff = np.abs(quad.potential(probe) - fine.potential(probe))
                worst = max(worst, float(diff.max()))
            self.achieved_tol = worst

    def require_tolerance(self, tol):
        """Raise QuadratureError when the achieved polar-quadrature accuracy
        misses the requested tolerance."""
        if self.achieved_tol > tol:
            raise QuadratureError(
                "polar quadrature did not reach the requested tolerance",
                achieved=self.achieved_tol, requested=tol)

    def __call__(self, z):
        return log_potential(self.measure, z, _field=self)


def log_potential(measure, z, _field=None):
    """U^mu(z) = int log|z - w| dmu(w).

    Radial components reduce to int log max(|z|, s) dF(s), evaluated in
    closed form; polar-density components go through 2-d quadrature.
    Non-finite z is rejected.
    """
    z_arr = np.atleast_1d(np.asarray(z, dtype=complex))
    if not np.all(np.isfinite(z_arr)):
        raise ValidationError("log_potential requires finite z")
    r = np.abs(z_arr)
    out = np.zeros(len(z_arr))
    polar_iter = iter(_field._polar) if _field is not None and _field._polar else None
    for comp in measure.components:
        m, p = comp.mass, comp.profile
        if isinstance(p, UniformCircle):
            out += m * np.log(np.maximum(r, p.radius))
        elif isinstance(p, UniformDisk):
            R = p.radius
            inside = r < R
            out += np.where(
                inside,
                m * (math.log(R) - 0.5 + 0.5 * (r / R) ** 2),
                m * np.log(np.maximum(r, 1e-300)),
            )
        elif isinstance(p, UniformAnnulus):
            a, b = p.inner, p.outer
            den = b * b - a * a
            u_in = (b * b * math.log(b) - a * a * math.log(a)) / den - 0.5 if a > 0 \
                else math.log(b) - 0.5
            with np.errstate(divide="ignore", invalid="ignore"):
                logr = np.log(np.maximum(r, 1e-300))
            u_mid = (-a * a * logr + b * b * math.log(b) - 0.5 * (b * b - r * r)) / den
            out += m * np.where(r <= a, u_in, np.where(r >= b, logr, u_mid))
        elif isinstance(p, RadialDensity):
            out += m * _radial_density_potential(p, r)
        elif isinstance(p, PolarDensity):
            if polar_iter is not None:
                _, quad = next(polar_iter)
            else:
                quad = _polar_quadrature(p)
            out += m * quad.potential(z_arr)
    return out if np.ndim(z) else float(out[0])


# -- holes and class representatives ---------------------------------------

@dataclass(frozen=True)
class HoleData:
    """Anchors and measure masses of the holes of an uncharged region."""

    anchors: tuple
    masses: tuple

    def representatives(self, kappa, limits=None):
        """Representative charges [kappa * q_i] per the cut-open-circle
        convention, one limit per hole (defaults to the fractional parts)."""
        if limits is None:
            limits = tuple((kappa * q) % 1.0 for q in self.masses)
        return tuple(
            class_representative(kappa * q, lim)
            for q, lim in zip(self.masses, limits)
        )


def _region_bounds(region):
    if hasattr(region, "r_min"):
        return float(region.r_min), float(region.r_max)
    lo, hi = region
    return float(lo), float(hi)


def hole_masses(measure, region):
    """Hole anchors and masses for an annular uncharged region.

    The region {r_min < |z| < r_max} must not meet supp(mu). Its single
    possible hole is the closed disk {|z| <= r_min}; a disk region
    (r_min = 0) is simply connected and has no holes.
    """
    if not measure.is_radial():
        raise ValidationError("hole_masses: v1 supports radial measures only")
    r_min, r_max = _region_bounds(region)
    if not (0.0 <= r_min < r_max):
        raise ValidationError("region bounds must satisfy 0 <= r_min < r_max")
    eps = 1e-12
    for comp in measure.components:
        p = comp.profile
        if isinstance(p, UniformCircle):
            bad = r_min + eps < p.radius < r_max - eps
        elif isinstance(p, UniformDisk):
            bad = p.radius > r_min + eps and r_max > eps
        elif isinstance(p, UniformAnnulus):
            bad = p.inner < r_max - eps and p.outer > r_min + eps
        elif isinstance(p, RadialDensity):
            radii = np.asarray(p.radii)
            cdf = np.asarray(p.cdf)
            inner_mass = np.interp(min(r_max, radii[-1]), radii, cdf) - np.interp(r_min, radii, cdf)
            bad = inner_mass > eps
        else:
            bad = True
        if bad:
            raise ValidationError("region overlaps the support of the measure")
    if r_min == 0.0:
        return HoleData(anchors=(), masses=())
    return HoleData(anchors=(0j,), masses=(measure.radial_cdf(r_min),))


def class_representative(x, limit):
    """The representative [x] with x - [x] integer and
    [x] in [limit - 1/2, limit + 1/2)."""
    limit = float(limit)
    if not (0.0 <= limit < 1.0):
        raise ValidationError("limit must lie in [0, 1)")
    x = float(x)
    k = math.floor(x - limit + 0.5)
    return x - k
