"""Radial weighted moments and exact modulus samplers.

For a radial measure with potential U(r) the weight is

    w(r) = r^{2 p} e^{-2 kappa U(r)},   p = weight_power,

and everything downstream (norms, expected counts, Kostlan moduli, rejection
proposals) reduces to the moments

    I_k(lo, hi) = int_lo^hi r^{2k+1} w(r) dr.

For circle/disk/annulus mixtures U is piecewise c + lam log r + q r^2, so
each piece contributes either a pure power integral or an incomplete-gamma
integral; both are evaluated in log space, exactly up to scipy's special
functions. Tabulated radial CDFs fall back to panel quadrature in log space.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammainc, gammaincc, gammaincinv, gammainccinv, gammaln

from .errors import ValidationError
from .measures import potential_pieces, log_potential
from .quadrature import composite_nodes

_NEG_INF = -np.inf


def _log1mexp(x):
    """log(1 - exp(x)) for x < 0, stable."""
    x = np.asarray(x, dtype=float)
    out = np.where(x > -0.693, np.log(-np.expm1(x)), np.log1p(-np.exp(x)))
    return out


def _log_power_integral(m, a, b):
    """log int_a^b r^m dr for scalar bounds, vector exponent m. b may be inf."""
    m = np.asarray(m, dtype=float)
    out = np.full(m.shape, _NEG_INF)
    p1 = m + 1.0
    if np.isinf(b):
        if a <= 0:
            raise ValidationError("divergent power integral")
        ok = p1 < 0
        if not np.all(ok):
            raise ValidationError("divergent tail moment: kappa too small for degree")
        return p1 * math.log(a) - np.log(-p1)
    if a == 0.0:
        if np.any(p1 <= 0):
            raise ValidationError("divergent power integral at 0")
        return p1 * math.log(b) - np.log(p1)
    la, lb = math.log(a), math.log(b)
    pos = p1 > 0
    neg = p1 < 0
    zero = ~pos & ~neg
    if np.any(pos):
        out[pos] = p1[pos] * lb + _log1mexp(p1[pos] * (la - lb)) - np.log(p1[pos])
    if np.any(neg):
        out[neg] = p1[neg] * la + _log1mexp(p1[neg] * (lb - la)) - np.log(-p1[neg])
    if np.any(zero):
        out[zero] = math.log(lb - la)
    return out


def _log_gamma_band(s, y1, y2):
    """log int_{y1}^{y2} t^{s-1} e^{-t} dt, vectorized over s."""
    s = np.asarray(s, dtype=float)
    p1 = gammainc(s, y1)
    p2 = gammainc(s, y2)
    lower = p2 - p1
    upper = gammaincc(s, y1) - gammaincc(s, y2)
    delta = np.where(p1 < 0.5, lower, upper)
    with np.errstate(divide="ignore"):
        return gammaln(s) + np.log(np.maximum(delta, 0.0))


@dataclass(frozen=True)
class WeightPiece:
    r_lo: float
    r_hi: float           # inf for the tail piece
    log_c: float          # additive log constant
    alpha: float          # power of r in the weight
    gamma: float          # gaussian rate: exp(-gamma r^2), >= 0


class RadialWeight:
    """Moments and samplers for one (measure, kappa, weight_power) triple."""

    def __init__(self, measure, kappa, weight_power=0):
        if not measure.is_radial():
            raise ValidationError("RadialWeight requires a radial measure")
        if not (kappa > 0):
            raise ValidationError("kappa must be positive")
        self.measure = measure
        self.kappa = float(kappa)
        self.weight_power = int(weight_power)
        self.outer = measure.outer_radius()
        u_pieces = potential_pieces(measure)
        if u_pieces is not None:
            self.pieces = [
                WeightPiece(p.r_lo, p.r_hi, -2.0 * kappa * p.const,
                            2 * self.weight_power - 2.0 * kappa * p.log_coeff,
                            2.0 * kappa * p.quad_coeff)
                for p in u_pieces
            ]
        else:
            self.pieces = None  # tabulated path
        # tail: U(r) = log r exactly beyond the support
        self.tail = WeightPiece(self.outer, np.inf, 0.0,
                                2 * self.weight_power - 2.0 * kappa, 0.0)

    def max_degree(self):
        """Largest k with finite moment: need 2k + alpha_tail + 1 < -1."""
        return int(math.ceil(-self.tail.alpha / 2.0)) - 2

    def _check_degrees(self, degrees):
        if np.max(degrees) > self.max_degree():
            raise ValidationError(
                f"degree {int(np.max(degrees))} has a divergent tail moment "
                f"(kappa={self.kappa}, weight_power={self.weight_power})"
            )

    # -- moments -----------------------------------------------------------

    def _piece_log_moment(self, piece, degrees, lo=None, hi=None):
        """log int over the piece (clipped to [lo, hi]) of r^{2k+1} w(r)."""
        a = piece.r_lo if lo is None else max(piece.r_lo, lo)
        b = piece.r_hi if hi is None else min(piece.r_hi, hi)
        degrees = np.asarray(degrees)
        if not a < b:
            return np.full(degrees.shape, _NEG_INF)
        m = 2.0 * degrees + 1.0 + piece.alpha
        if piece.gamma == 0.0:
            return piece.log_c + _log_power_integral(m, a, b)
        g = piece.gamma
        s = 0.5 * (m + 1.0)
        if np.all(s > 0):
            y1, y2 = g * a * a, g * b * b
            return (piece.log_c - math.log(2.0) - s * math.log(g)
                    + _log_gamma_band(s, y1, y2))
        # rare: strongly negative power against a gaussian factor
        return piece.log_c + self._numeric_log_moment(
            degrees, a, b, lambda r: piece.alpha * np.log(r) - g * r * r)

    def _numeric_log_moment(self, degrees, a, b, log_weight_fn):
        ks = np.asarray(degrees, dtype=float).reshape(-1, 1)
        breaks = np.linspace(a, b, 33)
        x, w = composite_nodes(breaks, 24)
        g = (2.0 * ks + 1.0) * np.log(x)[None, :] + log_weight_fn(x)[None, :]
        mshift = g.max(axis=1, keepdims=True)
        vals = mshift[:, 0] + np.log(np.exp(g - mshift) @ w)
        return vals.reshape(np.asarray(degrees).shape)

    def log_moment(self, degrees, lo=0.0, hi=np.inf):
        """log int_lo^hi r^{2k+1} w(r) dr for each degree k."""
        degrees = np.atleast_1d(np.asarray(degrees, dtype=int))
        self._check_degrees(degrees)
        parts = []
        if self.pieces is not None:
            for piece in self.pieces:
                parts.append(self._piece_log_moment(piece, degrees, lo, hi))
        else:
            a = max(0.0, lo)
            b = min(self.outer, hi)
            if a < b:
                two_kappa = 2.0 * self.kappa
                p2 = 2.0 * self.weight_power

                def logw(r):
                    u = np.asarray(log_potential(self.measure, r.astype(complex)))
                    return p2 * np.log(np.maximum(r, 1e-300)) - two_kappa * u

                # panels bounded by the CDF grid so the interpolant kinks
                # never straddle a panel
                inner = [x for x in self.measure.breakpoints() if a < x < b]
                breaks = [a] + inner + [b]
                sub = []
                for p0, p1 in zip(breaks[:-1], breaks[1:]):
                    sub.extend(np.linspace(p0, p1, 5)[:-1])
                sub.append(b)
                x, w = composite_nodes(np.asarray(sub), 24)
                lw = logw(x)
                ks = degrees.reshape(-1, 1).astype(float)
                g = (2.0 * ks + 1.0) * np.log(np.maximum(x, 1e-300))[None, :] + lw[None, :]
                mshift = g.max(axis=1, keepdims=True)
                parts.append(mshift[:, 0] + np.log(np.exp(g - mshift) @ w))
        parts.append(self._piece_log_moment(self.tail, degrees, lo, hi))
        stacked = np.stack(parts, axis=0)
        mx = stacked.max(axis=0)
        out = np.where(
            np.isfinite(mx),
            mx + np.log(np.sum(np.exp(stacked - mx[None, :]), axis=0)),
            _NEG_INF,
        )
        return out

    def log_norms(self, degrees):
        """log ||z^k||^2 = log 2 pi + log moment over (0, inf)."""
        return math.log(2.0 * math.pi) + self.log_moment(degrees)

    def log_weight(self, r):
        """log w(r) elementwise."""
        r = np.asarray(r, dtype=float)
        u = np.asarray(log_potential(self.measure, r.astype(complex)))
        with np.errstate(divide="ignore"):
            lr = np.log(np.maximum(r, 1e-300))
        return 2.0 * self.weight_power * lr - 2.0 * self.kappa * u


class RadialModuliSampler:
    """Exact inverse-CDF sampler for the modulus laws

        density_k(r) proportional to r^{2k+1} w(r),  k in degrees.

    Piece selection uses exact log piece masses; inversion within a piece is
    exact (power law or inverse incomplete gamma); tabulated measures use a
    dense monotone CDF grid.
    """

    def __init__(self, weight: RadialWeight, degrees):
        self.weight = weight
        self.degrees = np.atleast_1d(np.asarray(degrees, dtype=int))
        w = weight
        self.pieces = (list(w.pieces) if w.pieces is not None else []) + [w.tail]
        if w.pieces is not None:
            mass = np.stack(
                [w._piece_log_moment(p, self.degrees) for p in self.pieces], axis=0
            )
        else:
            # single numeric piece on [0, outer] + exact tail
            body = w.log_moment(self.degrees, 0.0, w.outer)
            tail = w._piece_log_moment(w.tail, self.degrees)
            mass = np.stack([body, tail], axis=0)
            self.pieces = ["numeric", w.tail]
            self._build_numeric_cdf()
        mx = mass.max(axis=0, keepdims=True)
        prob = np.exp(mass - mx)
        prob /= prob.sum(axis=0, keepdims=True)
        self.piece_cum = np.cumsum(prob, axis=0)  # (n_pieces, n_deg)

    def _build_numeric_cdf(self):
        w = self.weight
        grid = np.linspace(0.0, w.outer, 4097)[1:]
        lw = w.log_weight(grid)
        self._grid = grid
        self._grid_logw = lw

    def _invert_numeric(self, k, u):
        from .errors import QuadratureError
        g, lw = self._grid, self._grid_logw
        logd = (2.0 * k + 1.0) * np.log(g) + lw
        if not np.any(np.isfinite(logd)):
            raise QuadratureError("CDF tabulation failed: weight vanished")
        d = np.exp(logd - logd[np.isfinite(logd)].max())
        cdf = np.concatenate([[0.0], np.cumsum(0.5 * (d[1:] + d[:-1]) * np.diff(g))])
        if not (np.isfinite(cdf[-1]) and cdf[-1] > 0):
            raise QuadratureError("CDF tabulation failed: degenerate total mass")
        cdf /= cdf[-1]
        return np.interp(u, cdf, np.concatenate([[0.0], g[1:]]))

    def _invert_piece(self, piece, k, u):
        """Quantiles within one piece, vectorized over paired (k, u)."""
        k = np.asarray(k, dtype=float)
        u = np.asarray(u, dtype=float)
        if piece == "numeric":
            out = np.empty(u.shape)
            for kk in np.unique(k):
                sel = k == kk
                out[sel] = self._invert_numeric(kk, u[sel])
            return out
        a, b = piece.r_lo, piece.r_hi
        m = 2.0 * k + 1.0 + piece.alpha
        if piece.gamma == 0.0:
            p1 = m + 1.0
            if np.isinf(b):
                return a * (1.0 - u) ** (1.0 / p1)
            out = np.empty(u.shape)
            flat = np.abs(p1) < 1e-12
            if np.any(flat):
                out[flat] = a * (b / a) ** u[flat]
            if np.any(~flat):
                pp = p1[~flat]
                ap, bp = a ** pp, b ** pp
                out[~flat] = (ap + u[~flat] * (bp - ap)) ** (1.0 / pp)
            return out
        g = piece.gamma
        s = 0.5 * (m + 1.0)
        y1, y2 = g * a * a, g * b * b
        pa, pb = gammainc(s, y1), gammainc(s, y2)
        lower = pa < 0.5
        t = np.empty(u.shape)
        if np.any(lower):
            t[lower] = gammaincinv(s[lower], pa[lower] + u[lower] * (pb[lower] - pa[lower]))
        if np.any(~lower):
            qa, qb = gammaincc(s[~lower], y1), gammaincc(s[~lower], y2)
            t[~lower] = gammainccinv(s[~lower], qa - u[~lower] * (qa - qb))
        return np.sqrt(t / g)

    def sample_for_degrees(self, ks, generator):
        """One modulus per entry of ks (degrees may repeat), drawn from the
        corresponding modulus laws; consumes 2 * len(ks) uniforms."""
        ks = np.asarray(ks, dtype=int)
        pos = np.searchsorted(self.degrees, ks)
        u_piece = generator.random(len(ks))
        u_inv = generator.random(len(ks))
        idx = (u_piece[None, :] > self.piece_cum[:, pos]).sum(axis=0)
        out = np.empty(len(ks))
        for pi in np.unique(idx):
            sel = idx == pi
            out[sel] = self._invert_piece(self.pieces[pi], ks[sel], u_inv[sel])
        return out

    def sample_all(self, generator):
        """One modulus per degree (the Kostlan decomposition draw)."""
        return self.sample_for_degrees(self.degrees, generator)

    def sample_degree(self, k, generator, size):
        """Many i.i.d. moduli for a single degree."""
        return self.sample_for_degrees(np.full(size, int(k)), generator)
