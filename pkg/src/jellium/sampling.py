"""Exact samplers for the gas and the random-polynomial zero process.

All randomness flows through counter-based Philox streams keyed by a hash of
(master seed, derivation path), so any replica is reproducible in isolation
and results never depend on worker scheduling.
"""

import hashlib
import math
from dataclasses import dataclass, field

import numba as nb
import numpy as np

from .errors import ValidationError, EnvelopeError
from .measures import MeasureSpec, UniformCircle, log_potential
from .radialweight import RadialWeight, RadialModuliSampler
from .wpoly import KernelEvaluator


# -- reproducible streams ----------------------------------------------------

@dataclass(frozen=True)
class RngStream:
    """Counter-based stream: the Philox key is a hash of the master seed and
    the derivation path, so streams with distinct paths are independent and
    order-insensitive."""

    master_seed: int
    path: tuple = ()

    def child(self, *labels):
        return RngStream(self.master_seed, self.path + tuple(labels))

    def key(self):
        tag = repr((int(self.master_seed), self.path)).encode()
        digest = hashlib.blake2b(tag, digest_size=16).digest()
        return int.from_bytes(digest, "little")

    def generator(self):
        return np.random.Generator(np.random.Philox(key=self.key()))


def _as_generator(rng):
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    raise ValidationError("rng must be an RngStream or numpy Generator")


@dataclass
class PointSample:
    """One realization of a point process with its provenance."""

    points: np.ndarray
    model: str          # gas | zeros | bruteforce
    n: int
    seed: int
    replica: int = 0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=complex)
        if not np.all(np.isfinite(self.points)):
            raise ValidationError("sample points must be finite")


# -- gas density --------------------------------------------------------------

def joint_density_log(measure, kappa, points):
    """Unnormalized log density of the gas:
    2 sum_{i<j} log|z_i - z_j| - 2 kappa sum_j U(z_j).

    Coincident points return -inf.
    """
    pts = np.asarray(points, dtype=complex)
    if not np.all(np.isfinite(pts)):
        raise ValidationError("points must be finite")
    n = len(pts)
    interaction = 0.0
    for i in range(n):
        d = np.abs(pts[i + 1:] - pts[i])
        if np.any(d == 0.0):
            return -np.inf
        interaction += float(np.sum(np.log(d)))
    u = np.asarray(log_potential(measure, pts))
    return 2.0 * interaction - 2.0 * kappa * float(np.sum(u))


# -- brute force at tiny N ----------------------------------------------------

class BruteForceSampler:
    """Exact rejection sampler for N <= 3.

    The product bound |z - w|^2 <= (1 + |z|^2)(1 + |w|^2) certifies the
    envelope: the target density is dominated (constant exactly 1) by the
    product of per-point proposals with radial density proportional to
    r (1 + r^2)^{N-1} e^{-2 kappa U(r)}, a binomial mixture of the
    per-degree modulus laws.
    """

    def __init__(self, measure, kappa, n):
        if n > 3:
            raise ValidationError("brute force is for N <= 3")
        if not measure.is_radial():
            raise ValidationError("brute force proposal requires a radial measure")
        self.measure = measure
        self.kappa = float(kappa)
        self.n = int(n)
        weight = RadialWeight(measure, kappa)
        degrees = np.arange(n)
        self.sampler = RadialModuliSampler(weight, degrees)
        log_moments = weight.log_moment(degrees)
        logits = np.array(
            [math.lgamma(n) - math.lgamma(j + 1) - math.lgamma(n - j) + log_moments[j]
             for j in range(n)]
        )
        logits -= logits.max()
        self.mix = np.exp(logits)
        self.mix /= self.mix.sum()

    def propose(self, generator, count):
        """(count, n) proposal points plus their acceptance ratios."""
        n = self.n
        ks = generator.choice(n, size=count * n, p=self.mix)
        radii = self.sampler.sample_for_degrees(ks, generator).reshape(count, n)
        theta = generator.random((count, n)) * 2.0 * np.pi
        z = radii * np.exp(1j * theta)
        ratio = np.ones(count)
        for i in range(n):
            for j in range(i + 1, n):
                ratio *= np.abs(z[:, i] - z[:, j]) ** 2
        bound = np.prod(1.0 + radii ** 2, axis=1) ** (n - 1)
        ratio = ratio / bound
        if np.any(ratio > 1.0 + 1e-9):
            raise EnvelopeError(
                f"certified envelope violated: max ratio {ratio.max():.6f}"
            )
        return z, np.clip(ratio, 0.0, 1.0)

    def sample_batch(self, generator, m, batch=4096):
        """m exact draws, vectorized rejection."""
        out = np.empty((m, self.n), dtype=complex)
        got = 0
        while got < m:
            z, ratio = self.propose(generator, batch)
            acc = generator.random(batch) < ratio
            take = min(m - got, int(acc.sum()))
            out[got:got + take] = z[acc][:take]
            got += take
        return out


def bruteforce_sample(measure, kappa, n, rng, replica=0):
    """One exact gas sample at N <= 3 by certified rejection."""
    gen = _as_generator(rng)
    sampler = BruteForceSampler(measure, kappa, n)
    pts = sampler.sample_batch(gen, 1, batch=64)[0]
    seed = rng.master_seed if isinstance(rng, RngStream) else 0
    return PointSample(pts, "bruteforce", n, seed, replica)


# -- HKPV sequential-conditional sampling -------------------------------------

class ProjectionSampler:
    """Exact sampler of the rank-N projection DPP given by a radial-path
    KernelEvaluator.

    Points are drawn one at a time from the conditional densities obtained
    by projecting out the directions of already-drawn points; proposals come
    from the exact 1-point intensity K(x, x)/N (a uniform mixture over the
    per-degree modulus laws), and the rejection ratio residual/K(x, x) is a
    certified envelope.
    """

    def __init__(self, kernel: KernelEvaluator):
        basis = kernel.basis
        if basis.kind != "radial":
            raise ValidationError(
                "exact sequential sampling needs the radial (monomial) basis"
            )
        self.kernel = kernel
        self.n = basis.params.n
        params = basis.params
        weight = RadialWeight(basis.measure, params.kappa, params.weight_power)
        self.sampler = RadialModuliSampler(weight, params.degrees())

    def sample(self, generator):
        n = self.n
        kernel = self.kernel
        points = np.empty(n, dtype=complex)
        basis_vecs = np.zeros((n, n), dtype=complex)  # orthonormal e_j rows
        for i in range(n):
            remaining = n - i
            # the first draw is unconditional (acceptance probability 1)
            batch = 1 if i == 0 else min(64, max(2, (3 * n) // (2 * remaining)))
            while True:
                ks = generator.integers(0, n, size=batch)
                radii = self.sampler.sample_for_degrees(ks, generator)
                theta = generator.random(batch) * 2.0 * np.pi
                z = radii * np.exp(1j * theta)
                feats = kernel.feature_rows(z)          # (batch, n)
                norms2 = np.sum(np.abs(feats) ** 2, axis=1)
                if i > 0:
                    proj = feats @ basis_vecs[:i].conj().T
                    res = norms2 - np.sum(np.abs(proj) ** 2, axis=1)
                else:
                    proj = None
                    res = norms2.copy()
                if np.any(res < -1e-9 * norms2):
                    raise EnvelopeError("conditional density went negative")
                res = np.maximum(res, 0.0)
                u = generator.random(batch)
                acc = np.nonzero(u * norms2 < res)[0]
                if acc.size:
                    j = int(acc[0])
                    points[i] = z[j]
                    direction = feats[j].copy()
                    if i > 0:
                        direction -= proj[j] @ basis_vecs[:i]
                    nrm = math.sqrt(max(res[j], 1e-300))
                    basis_vecs[i] = direction / nrm
                    break
        return points


def hkpv_sample(kernel, rng, replica=0):
    """One exact sample of the rank-N projection DPP."""
    gen = _as_generator(rng)
    sampler = ProjectionSampler(kernel)
    pts = sampler.sample(gen)
    seed = rng.master_seed if isinstance(rng, RngStream) else 0
    return PointSample(pts, "gas", sampler.n, seed, replica)


def _moduli_sampler(basis):
    sampler = getattr(basis, "_cached_moduli_sampler", None)
    if sampler is None:
        if basis.kind != "radial":
            raise ValidationError("Kostlan moduli require a radial measure")
        params = basis.params
        weight = RadialWeight(basis.measure, params.kappa, params.weight_power)
        sampler = RadialModuliSampler(weight, params.degrees())
        basis._cached_moduli_sampler = sampler
    return sampler


def kostlan_moduli(basis, rng):
    """Independent moduli (R_0, ..., R_{N-1}) equal in law to the modulus
    multiset of the gas; valid for modulus statistics only."""
    return _moduli_sampler(basis).sample_all(_as_generator(rng))


def kostlan_moduli_batch(basis, rng, m):
    """(m, N) independent Kostlan draws in one vectorized pass."""
    sampler = _moduli_sampler(basis)
    gen = _as_generator(rng)
    ks = np.tile(sampler.degrees, m)
    return sampler.sample_for_degrees(ks, gen).reshape(m, len(sampler.degrees))


# -- random polynomial zeros --------------------------------------------------

@dataclass(frozen=True)
class GafModel:
    """Random polynomial sum_k xi_k z^k of degree n, with i.i.d. standard
    complex Gaussian coefficients. The monomials are orthonormal for the
    uniform unit-circle background, whose potential vanishes on the support."""

    degree: int
    background: MeasureSpec = None

    def __post_init__(self):
        if self.degree < 1:
            raise ValidationError("degree must be >= 1")
        bg = self.background
        if bg is None:
            bg = MeasureSpec(((1.0, UniformCircle(1.0)),))
            object.__setattr__(self, "background", bg)
        if not (len(bg.components) == 1
                and isinstance(bg.components[0].profile, UniformCircle)):
            raise ValidationError(
                "v1 random-polynomial background is the uniform unit circle"
            )

    def basis_gram(self, n_nodes=None):
        """Gram of the monomial basis under the discrete circle measure."""
        n = self.degree
        m = n_nodes or (4 * n + 9)
        theta = np.arange(m) * 2.0 * np.pi / m
        radius = self.background.components[0].profile.radius
        z = radius * np.exp(1j * theta)
        v = z[:, None] ** np.arange(n + 1)[None, :]
        return (v.conj().T @ v) / m


def gaf_coefficients(model, generator, count=1):
    """(count, degree+1) i.i.d. standard complex Gaussian coefficients,
    redrawing rows whose leading coefficient underflows."""
    n1 = model.degree + 1
    c = (generator.standard_normal((count, n1))
         + 1j * generator.standard_normal((count, n1))) / math.sqrt(2.0)
    for _ in range(100):
        bad = np.abs(c[:, -1]) < 1e-300
        if not np.any(bad):
            break
        nb_ = int(bad.sum())
        c[bad] = (generator.standard_normal((nb_, n1))
                  + 1j * generator.standard_normal((nb_, n1))) / math.sqrt(2.0)
    return c


def _polyval_ascending(coeffs, z):
    out = np.zeros_like(z)
    for c in coeffs[::-1]:
        out = out * z + c
    return out


def polynomial_roots(coeffs):
    """All roots of sum_k coeffs[k] z^k: balanced companion-matrix
    eigenvalues plus one Newton polish step per root.

    Returns (roots, max_residual, max_step). The residual is backward-error
    normalized, |P(z)| / sum_k |c_k| |z|^k, so it is O(machine eps) for good
    roots even where the naive polynomial value is pure cancellation.
    """
    coeffs = np.asarray(coeffs, dtype=complex)
    roots = np.roots(coeffs[::-1])
    deriv = coeffs[1:] * np.arange(1, len(coeffs))
    p = _polyval_ascending(coeffs, roots)
    dp = _polyval_ascending(deriv, roots)
    step = np.where(dp != 0, p / dp, 0.0)
    polished = roots - step
    residual = np.abs(_polyval_ascending(coeffs, polished))
    scale = _polyval_ascending(np.abs(coeffs) + 0j, np.abs(polished) + 0j).real
    max_residual = float(np.max(residual / np.maximum(scale, 1e-300)))
    return polished, max_residual, float(np.abs(step).max())


def gaf_zeros_sample(model, rng, replica=0, residual_tol=1e-10):
    """Zeros of one random polynomial draw."""
    gen = _as_generator(rng)
    coeffs = gaf_coefficients(model, gen, 1)[0]
    polished, max_residual, max_step = polynomial_roots(coeffs)
    meta = {"max_residual": max_residual, "max_polish_step": max_step}
    if max_residual > residual_tol:
        meta["residual_warning"] = True
    seed = rng.master_seed if isinstance(rng, RngStream) else 0
    return PointSample(polished, "zeros", model.degree, seed, replica, meta)


# -- argument-principle zero counting ----------------------------------------

@nb.njit(fastmath=False, cache=True)
def _crossing_winding(vx, vy):
    """Winding numbers of closed sampled curves (rows) about 0, at full and
    half resolution, with quarter/three-quarter-turn step guards."""
    rows, k = vx.shape
    w_full = np.zeros(rows, np.int64)
    ok_full = np.ones(rows, np.bool_)
    w_half = np.zeros(rows, np.int64)
    ok_half = np.ones(rows, np.bool_)
    for b in range(rows):
        wf = 0
        okf = True
        for j in range(k):
            j2 = j + 1 if j + 1 < k else 0
            ax = vx[b, j]; ay = vy[b, j]
            bx = vx[b, j2]; by = vy[b, j2]
            cr = ax * by - ay * bx
            dot = ax * bx + ay * by
            if dot <= 0.0:
                okf = False
            if ay < 0.0:
                if by >= 0.0 and cr > 0.0:
                    wf += 1
            else:
                if by < 0.0 and cr < 0.0:
                    wf -= 1
        w_full[b] = wf
        ok_full[b] = okf
        wh = 0
        okh = True
        for j in range(0, k, 2):
            j2 = j + 2 if j + 2 < k else 0
            ax = vx[b, j]; ay = vy[b, j]
            bx = vx[b, j2]; by = vy[b, j2]
            cr = ax * by - ay * bx
            dot = ax * bx + ay * by
            if dot <= -abs(cr):
                okh = False
            if ay < 0.0:
                if by >= 0.0 and cr > 0.0:
                    wh += 1
            else:
                if by < 0.0 and cr < 0.0:
                    wh -= 1
        w_half[b] = wh
        ok_half[b] = okh
    return w_full, ok_full, w_half, ok_half


def zero_counts_in_disks(coeffs, radii, k_start=1024, k_max=1 << 14):
    """Number of polynomial zeros in |z| < r for each row of ascending
    coefficients and each radius, by winding numbers of the boundary image.

    The boundary values come from a zero-padded inverse FFT; a count is
    accepted only when the windings at K and K/2 samples agree and every
    phase step passes its cap (pi/2 at full resolution, where a single
    near-circle zero cannot alias silently). Unresolved rows escalate to
    finer sampling and finally to companion-matrix roots, so the returned
    counts are exact integers.
    """
    coeffs = np.asarray(coeffs, dtype=complex)
    m, n1 = coeffs.shape
    radii = np.asarray(radii, dtype=float)
    out = np.empty((m, len(radii)), dtype=np.int64)
    powers = np.arange(n1)
    fallback_rows = set()
    for ir, r in enumerate(radii):
        scaled = coeffs * (r ** powers)[None, :]
        todo = np.arange(m)
        res = np.full(m, np.iinfo(np.int64).min, dtype=np.int64)
        k = k_start
        while todo.size and k <= k_max:
            vals = np.fft.ifft(scaled[todo], n=k, axis=1)
            vx = np.ascontiguousarray(vals.real)
            vy = np.ascontiguousarray(vals.imag)
            wf, okf, wh, okh = _crossing_winding(vx, vy)
            good = okf & okh & (wf == wh)
            res[todo[good]] = wf[good]
            todo = todo[~good]
            k *= 4
        out[:, ir] = res
        fallback_rows.update(todo.tolist())
    if fallback_rows:
        rows = sorted(fallback_rows)
        for b in rows:
            moduli = np.abs(np.roots(coeffs[b][::-1]))
            for ir, r in enumerate(radii):
                if out[b, ir] == np.iinfo(np.int64).min:
                    out[b, ir] = int(np.sum(moduli < r))
    return out
