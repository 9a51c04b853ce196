"""Gauss-Legendre panel quadrature with adaptive bisection, plus log-space
variants for integrands spanning hundreds of orders of magnitude."""

import numpy as np
from numpy.polynomial.legendre import leggauss

from .errors import QuadratureError

_GL_CACHE = {}


def gl_nodes(order):
    """Cached Gauss-Legendre nodes/weights on [-1, 1]."""
    if order not in _GL_CACHE:
        _GL_CACHE[order] = leggauss(order)
    return _GL_CACHE[order]


def panel_nodes(a, b, order):
    """Nodes and weights for one GL panel on [a, b]."""
    x, w = gl_nodes(order)
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    return mid + half * x, half * w


def composite_nodes(breaks, order):
    """Nodes/weights of a composite GL rule over consecutive panels."""
    xs, ws = [], []
    for a, b in zip(breaks[:-1], breaks[1:]):
        x, w = panel_nodes(a, b, order)
        xs.append(x)
        ws.append(w)
    return np.concatenate(xs), np.concatenate(ws)


def adaptive_integral(fn, a, b, rtol=1e-10, order=16, max_panels=2048):
    """Integrate fn over [a, b] by adaptive panel bisection.

    fn must accept an ndarray of points. Returns (value, achieved_rtol).
    Raises QuadratureError if the panel budget is exhausted before the
    tolerance is met.
    """
    stack = [(a, b)]
    total = 0.0
    err_total = 0.0
    n_panels = 0
    while stack:
        lo, hi = stack.pop()
        x1, w1 = panel_nodes(lo, hi, order)
        x2, w2 = panel_nodes(lo, hi, 2 * order)
        coarse = float(np.dot(w1, fn(x1)))
        fine = float(np.dot(w2, fn(x2)))
        err = abs(fine - coarse)
        scale = abs(fine) + abs(total) + 1e-300
        if err <= 0.25 * rtol * scale or (hi - lo) < 1e-15 * (b - a):
            total += fine
            err_total += err
            n_panels += 1
            if n_panels > max_panels:
                raise QuadratureError(
                    "panel budget exhausted",
                    achieved=err_total / (abs(total) + 1e-300),
                    requested=rtol,
                )
        else:
            mid = 0.5 * (lo + hi)
            stack.append((lo, mid))
            stack.append((mid, hi))
            n_panels += 1
            if n_panels > max_panels:
                raise QuadratureError(
                    "panel budget exhausted",
                    achieved=err,
                    requested=rtol,
                )
    achieved = err_total / (abs(total) + 1e-300)
    return total, achieved


def log_panel_sum(log_fn, x, w):
    """log of sum(w * exp(log_fn(x))) with max-shift stabilization.

    Weights must be positive. Returns -inf for an empty panel.
    """
    g = log_fn(x)
    m = np.max(g)
    if not np.isfinite(m):
        return -np.inf
    return m + np.log(np.dot(w, np.exp(g - m)))


def log_adaptive_integral(log_fn, a, b, rtol=1e-10, order=16, max_depth=40):
    """log of the integral of exp(log_fn) over [a, b], panel-adaptive.

    Comparison between coarse and refined rules happens on log values, so
    integrands like r^{2k+1} e^{-2 kappa U(r)} with k, kappa in the
    thousands never overflow. Returns (log_value, achieved_rtol).
    """
    def nlogadd(la, lb):
        if la == -np.inf:
            return lb
        if lb == -np.inf:
            return la
        m = max(la, lb)
        return m + np.log(np.exp(la - m) + np.exp(lb - m))

    stack = [(a, b, 0)]
    log_total = -np.inf
    worst = 0.0
    while stack:
        lo, hi, depth = stack.pop()
        x1, w1 = panel_nodes(lo, hi, order)
        x2, w2 = panel_nodes(lo, hi, 2 * order)
        lc = log_panel_sum(log_fn, x1, w1)
        lf = log_panel_sum(log_fn, x2, w2)
        if lf == -np.inf and lc == -np.inf:
            continue
        err = abs(np.expm1(lc - lf)) if np.isfinite(lc) else 1.0
        if err <= rtol or depth >= max_depth:
            if err > rtol:
                worst = max(worst, err)
            log_total = nlogadd(log_total, lf)
        else:
            mid = 0.5 * (lo + hi)
            stack.append((lo, mid, depth + 1))
            stack.append((mid, hi, depth + 1))
    if worst > 100 * rtol:
        raise QuadratureError(
            "log-space adaptive quadrature stalled",
            achieved=worst,
            requested=rtol,
        )
    return log_total, worst if worst > 0 else rtol


def trapezoid_theta(n):
    """Uniform angular nodes and weights on [0, 2pi) (spectrally accurate
    for smooth periodic integrands)."""
    theta = np.arange(n) * (2.0 * np.pi / n)
    w = np.full(n, 2.0 * np.pi / n)
    return theta, w
