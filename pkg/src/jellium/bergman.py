"""Limit kernels: disk and exterior-disk Bergman kernels, weighted annulus
diagonals, a rational-basis oracle for circular multiply connected domains,
the disk Szego kernel, and the zero-intensity functional of Gaussian
analytic functions."""

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import ValidationError, TruncationError, ConditioningError
from .quadrature import panel_nodes
from .radialweight import _log_power_integral


def _check_strict(cond, msg):
    if not cond:
        raise ValidationError(msg)


def disk_kernel(z, w):
    """Bergman kernel of the unit disk: 1 / (pi (1 - z conj(w))^2)."""
    z, w = complex(z), complex(w)
    _check_strict(abs(z) < 1 and abs(w) < 1, "disk kernel needs |z|, |w| < 1")
    return 1.0 / (math.pi * (1.0 - z * np.conj(w)) ** 2)


def exterior_disk_kernel(z, w):
    """Bergman kernel of {|z| > 1}: 1 / (pi (z conj(w) - 1)^2)."""
    z, w = complex(z), complex(w)
    _check_strict(abs(z) > 1 and abs(w) > 1, "exterior kernel needs |z|, |w| > 1")
    return 1.0 / (math.pi * (z * np.conj(w) - 1.0) ** 2)


def szego_disk(z, w):
    """Szego kernel of the unit disk: 1 / (2 pi (1 - z conj(w)))."""
    z, w = complex(z), complex(w)
    _check_strict(abs(z) < 1 and abs(w) < 1, "Szego kernel needs |z|, |w| < 1")
    return 1.0 / (2.0 * math.pi * (1.0 - z * np.conj(w)))


def disk_diag(z):
    r2 = abs(complex(z)) ** 2
    _check_strict(r2 < 1, "diagonal needs |z| < 1")
    return 1.0 / (math.pi * (1.0 - r2) ** 2)


def exterior_disk_diag(z):
    r2 = abs(complex(z)) ** 2
    _check_strict(r2 > 1, "diagonal needs |z| > 1")
    return 1.0 / (math.pi * (r2 - 1.0) ** 2)


def annulus_weighted_diag(a, b, charge, z, tol=1e-10, max_terms=200000):
    """Diagonal of the weighted Bergman correlation kernel of the annulus
    a < |z| < b with weight |z|^{-2 charge}:

        sum_n |z|^{2n - 2 charge} / (2 pi int_a^b r^{2n+1-2 charge} dr).

    The bilateral series is evaluated at the given charge (no mod-1
    reduction) so the charge -> charge + 1 index-shift invariance is a real
    numerical check. Truncation uses monotone term-ratio tail bounds.
    """
    _check_strict(0 < a < b, "annulus needs 0 < a < b")
    r = abs(complex(z))
    _check_strict(a < r < b, "annulus diagonal needs a < |z| < b")
    q = float(charge)
    logr = math.log(r)

    def log_term(n):
        m = np.asarray([2.0 * n + 1.0 - 2.0 * q])
        log_i = float(_log_power_integral(m, a, b)[0])
        return (2.0 * n - 2.0 * q) * logr - math.log(2.0 * math.pi) - log_i

    n0 = int(round(q))
    total = math.exp(log_term(n0))
    # upward: term ratios decrease monotonically toward (r/b)^2 < 1
    prev = log_term(n0)
    n = n0
    for _ in range(max_terms):
        n += 1
        cur = log_term(n)
        t = math.exp(cur)
        total += t
        ratio = math.exp(cur - prev)
        prev = cur
        if ratio < 1.0 and t * ratio / (1.0 - ratio) < 0.5 * tol * total:
            break
    else:
        raise TruncationError("annulus series: upward tail did not close",
                              achieved=t / total)
    prev = log_term(n0)
    n = n0
    for _ in range(max_terms):
        n -= 1
        cur = log_term(n)
        t = math.exp(cur)
        total += t
        ratio = math.exp(cur - prev)
        prev = cur
        if ratio < 1.0 and t * ratio / (1.0 - ratio) < 0.5 * tol * total:
            break
    else:
        raise TruncationError("annulus series: downward tail did not close",
                              achieved=t / total)
    return total


def disk_scaled_diag(radius, z):
    """Bergman diagonal of the disk |z| < radius."""
    r2 = abs(complex(z)) ** 2
    rr = radius * radius
    _check_strict(r2 < rr, "diagonal needs |z| < radius")
    return rr / (math.pi * (rr - r2) ** 2)


def exterior_weighted_diag(radius, charge, z):
    """Diagonal of the weighted Bergman kernel of {|z| > radius} with weight
    |z|^{-2 charge}, charge reduced to [0, 1): closed form of the series
    over integrable negative powers."""
    q = float(charge) % 1.0
    t2 = abs(complex(z)) ** 2
    rr = radius * radius
    _check_strict(t2 > rr, "diagonal needs |z| > radius")
    x = rr / t2
    return (x ** (1.0 + q) * (1.0 / (1.0 - x) ** 2 + (q - 1.0) / (1.0 - x))
            / (math.pi * rr))


def gaf_zero_intensity(diag_fn, z, h=1e-3):
    """First intensity of the zero process of a Gaussian analytic function
    whose covariance diagonal is diag_fn: (1/pi) d dbar log diag.

    Five-point Laplacian stencils at steps h and h/2, Richardson-combined.
    """
    z = complex(z)

    def lap(hh):
        pts = [z + hh, z - hh, z + 1j * hh, z - 1j * hh, z]
        vals = [float(diag_fn(p)) for p in pts]
        if min(vals) <= 0.0:
            raise ValidationError("diag must be strictly positive near z")
        g = [math.log(v) for v in vals]
        return (g[0] + g[1] + g[2] + g[3] - 4.0 * g[4]) / hh ** 2

    l1 = lap(h)
    l2 = lap(h / 2.0)
    return (4.0 * l2 - l1) / 3.0 / (4.0 * math.pi)


# -- rational-basis oracle ---------------------------------------------------

@dataclass(frozen=True)
class Circle:
    center: complex
    radius: float


@dataclass(frozen=True)
class RationalDomain:
    """A circular domain: interior of `outer` (or the whole plane when outer
    is None) minus the closed hole disks. Anchors default to hole centers."""

    outer: Circle = None
    holes: tuple = ()
    anchors: tuple = None

    def __post_init__(self):
        anchors = self.anchors
        if anchors is None:
            anchors = tuple(h.center for h in self.holes)
        object.__setattr__(self, "anchors", tuple(complex(a) for a in anchors))
        if len(self.anchors) != len(self.holes):
            raise ValidationError("need exactly one anchor per hole")
        for h, anc in zip(self.holes, self.anchors):
            if abs(anc - h.center) >= h.radius:
                raise ValidationError("anchor must lie strictly inside its hole")
            if self.outer is not None:
                if abs(h.center - self.outer.center) + h.radius >= self.outer.radius:
                    raise ValidationError("holes must lie strictly inside the outer circle")
        for i in range(len(self.holes)):
            for j in range(i + 1, len(self.holes)):
                hi, hj = self.holes[i], self.holes[j]
                if abs(hi.center - hj.center) <= hi.radius + hj.radius:
                    raise ValidationError("holes must be pairwise disjoint")

    def contains(self, z):
        z = complex(z)
        if self.outer is not None and abs(z - self.outer.center) >= self.outer.radius:
            return False
        return all(abs(z - h.center) > h.radius for h in self.holes)


def _subtract_arc(arcs, lo, hi):
    """Remove [lo, hi] (radians, possibly wrapping) from a list of
    non-wrapping arcs within [0, 2pi)."""
    two_pi = 2.0 * math.pi
    width = hi - lo
    if width >= two_pi:
        return []
    lo = lo % two_pi
    hi = lo + width
    cuts = [(lo, min(hi, two_pi))]
    if hi > two_pi:
        cuts.append((0.0, hi - two_pi))
    out = arcs
    for c_lo, c_hi in cuts:
        nxt = []
        for a_lo, a_hi in out:
            if c_hi <= a_lo or c_lo >= a_hi:
                nxt.append((a_lo, a_hi))
                continue
            if c_lo > a_lo:
                nxt.append((a_lo, c_lo))
            if c_hi < a_hi:
                nxt.append((c_hi, a_hi))
        out = nxt
    return out


class RationalBergman:
    """Weighted Bergman diagonal of a circular domain via orthonormalization
    of a rational family (polynomials plus negative powers at the anchors)
    in L^2(domain, prod |z - z_i|^{-2 Q_i} dm).

    Charges are reduced to [0, 1) (only the class matters on the diagonal).
    The quadrature is polar around the domain center with per-radius arc
    exclusion of the holes, panel splits at the tangency radii, and an
    inverted-variable tail for unbounded domains.
    """

    def __init__(self, domain: RationalDomain, charges, n_poly=24, n_pole=24,
                 radial_subdiv=10, gl_order=12, arc_density=None):
        self.domain = domain
        self.charges = tuple(float(q) % 1.0 for q in charges)
        if len(self.charges) != len(domain.holes):
            raise ValidationError("need one charge per hole")
        self.n_poly = int(n_poly) if domain.outer is not None else 0
        self.n_pole = int(n_pole)
        q_tot = sum(self.charges)
        self._k_min = 1 if (q_tot > 1e-12 or domain.outer is not None) else 2
        self._members = self._build_members()
        max_freq = max([self.n_poly] + [self._k_min + self.n_pole for _ in domain.holes] + [4])
        self._arc_density = arc_density or (2 * max_freq + 8)
        nodes = self._quadrature_nodes(radial_subdiv, gl_order)
        self._fit(nodes)
        nodes2 = self._quadrature_nodes(2 * radial_subdiv, gl_order + 4)
        F2 = self._family_matrix(*nodes2)
        B2 = F2 @ self.coeffs
        gram2 = B2.conj().T @ B2
        self.gram_residual = float(np.max(np.abs(gram2 - np.eye(len(self._members)))))
        if self.gram_residual > 1e-6:
            raise ConditioningError(
                f"rational Gram residual {self.gram_residual:.2e} at family "
                f"size {len(self._members)}",
                residual=self.gram_residual,
                suggestion="reduce the family size or refine the quadrature",
            )

    # family members are (kind, index, param): ("poly", d) or ("pole", i, k)
    def _build_members(self):
        members = []
        rounds = max(self.n_poly, self.n_pole)
        for step in range(rounds):
            if step < self.n_poly:
                members.append(("poly", step))
            if step < self.n_pole:
                for i in range(len(self.domain.holes)):
                    members.append(("pole", i, self._k_min + step))
        if not members:
            raise ValidationError("empty rational family")
        return members

    def _center(self):
        if self.domain.outer is not None:
            return complex(self.domain.outer.center)
        if self.domain.holes:
            return complex(np.mean([h.center for h in self.domain.holes]))
        return 0j

    def _scale(self):
        if self.domain.outer is not None:
            return self.domain.outer.radius
        return max(h.radius for h in self.domain.holes) if self.domain.holes else 1.0

    def _quadrature_nodes(self, radial_subdiv, gl_order):
        c0 = self._center()
        crit = {0.0}
        for h in self.domain.holes:
            d = abs(h.center - c0)
            crit.add(abs(d - h.radius))
            crit.add(d + h.radius)
        bounded = self.domain.outer is not None
        if bounded:
            r_max = self.domain.outer.radius
            crit = {c for c in crit if c < r_max}
            crit.add(r_max)
        else:
            r_far = 2.0 * max([abs(h.center - c0) + h.radius for h in self.domain.holes] + [1.0])
            crit.add(r_far)
        breaks = sorted(crit)
        rs, ws = [], []
        for lo, hi in zip(breaks[:-1], breaks[1:]):
            # arc widths behave like sqrt(r - r*) at the tangency radii;
            # the cosine substitution r = lo + (hi-lo)(1-cos(pi u))/2 makes
            # the integrand smooth in u, restoring spectral panel accuracy
            edges = np.linspace(0.0, 1.0, radial_subdiv + 1)
            for a, b in zip(edges[:-1], edges[1:]):
                u, wu = panel_nodes(a, b, gl_order)
                rs.append(lo + (hi - lo) * 0.5 * (1.0 - np.cos(np.pi * u)))
                ws.append(wu * (hi - lo) * 0.5 * np.pi * np.sin(np.pi * u))
        r = np.concatenate(rs)
        wr = np.concatenate(ws)
        tail = None
        if not bounded:
            r_far = breaks[-1]
            u_edges = np.geomspace(1e-8, 1.0, 11)
            ts, tws = [], []
            for a, b in zip(u_edges[:-1], u_edges[1:]):
                u, w = panel_nodes(a, b, gl_order)
                ts.append(r_far / u)
                tws.append(w * r_far / u ** 2)
            tail = (np.concatenate(ts), np.concatenate(tws))
        pts, wts = [], []
        for radius_block in ([(r, wr)] + ([tail] if tail else [])):
            rr, ww = radius_block
            for radius, wradius in zip(rr, ww):
                arcs = [(0.0, 2.0 * math.pi)]
                dead = False
                for h in self.domain.holes:
                    d = abs(h.center - c0)
                    if d < 1e-14:
                        if radius < h.radius:
                            dead = True
                            break
                        continue
                    if radius <= d - h.radius or radius >= d + h.radius:
                        continue
                    if radius <= h.radius - d:
                        dead = True
                        break
                    cosw = (radius ** 2 + d ** 2 - h.radius ** 2) / (2.0 * radius * d)
                    half = math.acos(min(1.0, max(-1.0, cosw)))
                    phi = math.atan2((h.center - c0).imag, (h.center - c0).real)
                    arcs = _subtract_arc(arcs, phi - half, phi + half)
                if dead or not arcs:
                    continue
                full_circle = len(arcs) == 1 and \
                    arcs[0][1] - arcs[0][0] >= 2.0 * math.pi - 1e-12
                for a_lo, a_hi in arcs:
                    length = a_hi - a_lo
                    if length <= 1e-12:
                        continue
                    order = max(6, int(math.ceil(length / (2.0 * math.pi)
                                                 * self._arc_density)))
                    u, wu = panel_nodes(0.0, 1.0, order)
                    if full_circle:
                        t = a_lo + length * u
                        wt = wu * length
                    else:
                        # arc endpoints graze a hole: cosine substitution
                        # smooths the boundary-layer derivatives
                        t = a_lo + length * 0.5 * (1.0 - np.cos(np.pi * u))
                        wt = wu * length * 0.5 * np.pi * np.sin(np.pi * u)
                    pts.append(c0 + radius * np.exp(1j * t))
                    wts.append(wt * wradius * radius)
        return np.concatenate(pts), np.concatenate(wts)

    def _log_weight(self, z):
        out = np.zeros(len(z))
        for q, anc in zip(self.charges, self.domain.anchors):
            if q != 0.0:
                out -= 2.0 * q * np.log(np.abs(z - anc))
        return out

    def _member_values(self, z):
        c0 = self._center()
        s = self._scale()
        cols = []
        for mem in self._members:
            if mem[0] == "poly":
                cols.append(((z - c0) / s) ** mem[1])
            else:
                _, i, k = mem
                h = self.domain.holes[i]
                cols.append((h.radius / (z - self.domain.anchors[i])) ** k)
        return np.stack(cols, axis=1)

    def _family_matrix(self, pts, wts):
        vals = self._member_values(pts)
        sqrtw = np.exp(0.5 * self._log_weight(pts)) * np.sqrt(wts)
        return vals * sqrtw[:, None]

    def _fit(self, nodes):
        F = self._family_matrix(*nodes)
        q, rmat, piv = scipy.linalg.qr(F, mode="economic", pivoting=True)
        nmem = len(self._members)
        rinv = scipy.linalg.solve_triangular(rmat, np.eye(nmem), lower=False)
        coeffs = np.zeros((nmem, nmem), dtype=complex)
        coeffs[piv, :] = rinv
        self.coeffs = coeffs

    @property
    def family_size(self):
        return len(self._members)

    def diag(self, z):
        z_arr = np.atleast_1d(np.asarray(z, dtype=complex))
        for zi in z_arr:
            if not self.domain.contains(zi):
                raise ValidationError(f"{zi} is not inside the domain")
        feats = self._member_values(z_arr) @ self.coeffs
        out = np.sum(np.abs(feats) ** 2, axis=1) * np.exp(self._log_weight(z_arr))
        return out if np.ndim(z) else float(out[0])


def rational_bergman(domain, charges, z, **kwargs):
    """One-shot weighted Bergman diagonal at z (builds a RationalBergman;
    use the class directly for grids)."""
    return RationalBergman(domain, charges, **kwargs).diag(z)
