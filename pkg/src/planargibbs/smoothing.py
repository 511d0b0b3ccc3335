"""Splitting a continuous spin coupling into a smooth part and a small rest.

Given a continuous symmetric periodic V and a target 0 < eps < 1, we build
V = Vbar - v where Vbar is twice continuously differentiable and 0 < v < eps
pointwise.  Vbar is the convolution of V with a compactly supported C^2 bump
density plus eps/2; the bump half-width delta comes from a certified
continuity modulus of V, which pins v into (0, eps).  The construction also
certifies an upper bound on sup |Vbar''|, the curvature constant consumed by
the deformation-energy threshold downstream.

A sign-split variant produces a second decomposition V = Vbar_minus + v_minus
(same delta and kernel) for use on pairs with negative coupling sign.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .potential import SpinCoupling, TabulatedSpin, TrigPolySpin

TWO_PI = 2.0 * math.pi

DELTA_CAP = math.pi / 4.0
SIMPSON_NODES = 4097  # odd node count over [-delta, delta]


def _simpson(values: np.ndarray, h: float) -> np.ndarray:
    """Composite Simpson rule along the last axis (odd number of nodes)."""
    n = values.shape[-1]
    if n % 2 != 1:
        raise ValueError("Simpson rule needs an odd node count")
    w = np.ones(n)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return np.tensordot(values, w, axes=([-1], [0])) * (h / 3.0)


@dataclass(frozen=True)
class SmoothingKernel:
    """C^2 bump probability density supported in [-delta, delta].

    density(t) is proportional to exp(-delta^2 / (delta^2 - t^2)) inside the
    support and 0 outside, normalized to unit integral.
    """

    delta: float
    normalizer: float
    second_derivative_sup: float

    def density(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        inside = np.abs(t) < self.delta
        out = np.zeros_like(t)
        denom = self.delta**2 - t[inside] ** 2
        out[inside] = np.exp(-self.delta**2 / denom) / self.normalizer
        return out

    def density_second(self, t) -> np.ndarray:
        """Second derivative of the density (piecewise-analytic formula)."""
        t = np.asarray(t, dtype=float)
        d2 = self.delta**2
        inside = np.abs(t) < self.delta
        out = np.zeros_like(t)
        ti = t[inside]
        denom = d2 - ti * ti
        phi1 = -2.0 * d2 * ti / denom**2
        phi2 = -2.0 * d2 * (d2 + 3.0 * ti * ti) / denom**3
        out[inside] = (np.exp(-d2 / denom) / self.normalizer) * (phi1 * phi1 + phi2)
        return out

    def fourier_cosine(self, m: int) -> float:
        """Integral of density(t) cos(m t) over the support."""
        t = np.linspace(-self.delta, self.delta, SIMPSON_NODES)
        h = t[1] - t[0]
        return float(_simpson(self.density(t) * np.cos(m * t), h))


def mollifier(delta: float) -> SmoothingKernel:
    """Build the bump kernel of half-width delta and certify its constants."""
    if not (delta > 0 and math.isfinite(delta)):
        raise ValueError(f"delta must be positive, got {delta}")
    t = np.linspace(-delta, delta, SIMPSON_NODES)
    h = t[1] - t[0]
    inside = np.abs(t) < delta
    raw = np.zeros_like(t)
    raw[inside] = np.exp(-(delta**2) / (delta**2 - t[inside] ** 2))
    c = float(_simpson(raw, h))
    kernel = SmoothingKernel(delta=delta, normalizer=c, second_derivative_sup=0.0)
    # grid maximization of |f''| on the open support
    tt = np.linspace(-delta, delta, 16385)[1:-1]
    sup2 = float(np.max(np.abs(kernel.density_second(tt))))
    kernel = SmoothingKernel(delta=delta, normalizer=c, second_derivative_sup=sup2)
    mass = float(_simpson(kernel.density(t), h))
    if abs(mass - 1.0) > 1e-10:
        raise AssertionError(f"kernel normalization off by {mass - 1.0:.3e}")
    return kernel


def continuity_modulus(coupling: SpinCoupling, epsilon: float) -> float:
    """Largest certified half-width delta with |V(s') - V(s)| < eps/2 when |s' - s| < 2 delta.

    Halving search from the cap pi/4; each candidate is certified by a grid
    sweep over (s, shift) pairs refined until stable.
    """
    if not (0.0 < epsilon < 1.0):
        raise ValueError(f"epsilon must be in (0, 1), got {epsilon}")
    delta = DELTA_CAP
    while delta > 1e-7:
        if _modulus_bound(coupling, 2.0 * delta) < 0.5 * epsilon * (1.0 - 1e-6):
            return delta
        delta *= 0.5
    raise ValueError("could not certify a continuity modulus; V may be too rough")


def _modulus_bound(coupling: SpinCoupling, width: float) -> float:
    """Stabilized grid estimate of sup over |t| <= width of |V(s + t) - V(s)|."""
    base_sigma, base_shift = 2048, 65
    prev = -1.0
    for level in range(6):
        ns = base_sigma * (2**level)
        nt = base_shift * (2**level) - (2**level - 1)
        s = np.linspace(0.0, TWO_PI, ns, endpoint=False)
        t = np.linspace(-width, width, nt)
        vals = coupling.evaluate(s)
        cur = 0.0
        for tk in t:
            cur = max(cur, float(np.max(np.abs(coupling.evaluate(s + tk) - vals))))
        if prev >= 0 and abs(cur - prev) <= 1e-6 * max(1.0, cur):
            return cur
        prev = cur
    return prev


@dataclass(frozen=True)
class SmoothDecomposition:
    """V written as Vbar - v (v_sign=+1) or Vbar + v (v_sign=-1).

    ``vbar`` is smooth, ``v`` stays strictly inside (0, epsilon), and
    ``vbar_second_sup`` is a certified upper bound on sup |Vbar''|.
    """

    epsilon: float
    delta: float
    kernel: SmoothingKernel
    base: SpinCoupling
    vbar: SpinCoupling
    vbar_second_sup: float
    v_sign: int = 1

    def vbar_eval(self, dsigma) -> np.ndarray:
        return self.vbar.evaluate(dsigma)

    def v_eval(self, dsigma) -> np.ndarray:
        """The small remainder, positive by construction."""
        diff = self.vbar.evaluate(dsigma) - self.base.evaluate(dsigma)
        return diff if self.v_sign > 0 else -diff

    def curvature_threshold(self) -> float:
        """Deformation-energy threshold 2 / sup|Vbar''| (inf for flat Vbar)."""
        if self.vbar_second_sup <= 0.0:
            return math.inf
        return 2.0 / self.vbar_second_sup


@dataclass(frozen=True)
class SignSplitDecomposition:
    plus: SmoothDecomposition
    minus: SmoothDecomposition


class _ConvolvedSpin(SpinCoupling):
    """Dense-grid convolution of a tabulated/base coupling with the kernel."""

    def __init__(self, base: SpinCoupling, kernel: SmoothingKernel, offset: float,
                 grid: int = 8192):
        t = np.linspace(-kernel.delta, kernel.delta, SIMPSON_NODES)
        h = t[1] - t[0]
        weights = kernel.density(t)
        sigma = np.linspace(0.0, TWO_PI, grid, endpoint=False)
        vals = np.empty(grid)
        chunk = 256
        for start in range(0, grid, chunk):
            stop = min(start + chunk, grid)
            block = base.evaluate(sigma[start:stop, None] + t[None, :])
            vals[start:stop] = _simpson(block * weights[None, :], h)
        self._sigma = np.concatenate([sigma, [TWO_PI]])
        self._vals = np.concatenate([vals, [vals[0]]]) + offset
        self._kernel = kernel
        self._base = base
        self._offset = offset

    def evaluate(self, dsigma):
        s = np.mod(np.asarray(dsigma, dtype=float), TWO_PI)
        return np.interp(s, self._sigma, self._vals)

    def exact_at(self, dsigma, nodes: int = 4 * (SIMPSON_NODES - 1) + 1) -> np.ndarray:
        """Direct Simpson convolution (no grid interpolation); for checks."""
        t = np.linspace(-self._kernel.delta, self._kernel.delta, nodes)
        h = t[1] - t[0]
        weights = self._kernel.density(t)
        s = np.asarray(dsigma, dtype=float).reshape(-1)
        out = np.empty(s.shape[0])
        chunk = 128
        for start in range(0, s.shape[0], chunk):
            stop = min(start + chunk, s.shape[0])
            block = self._base.evaluate(s[start:stop, None] + t[None, :])
            out[start:stop] = _simpson(block * weights[None, :], h)
        return out + self._offset


def _convolved_second(base: SpinCoupling, kernel: SmoothingKernel, sigma: np.ndarray) -> np.ndarray:
    """Second derivative of the convolution.

    For piecewise-linear tables this is exact: differentiating the
    convolution twice turns the table's slope jumps into kernel evaluations,
    (f * V)''(s) = sum over kinks of (slope jump) * f(kink - s).  Other
    couplings fall back to quadrature against the kernel's second derivative.
    """
    if isinstance(base, TabulatedSpin):
        nodes = base.angles[:-1]
        vals = base.values
        h_grid = base.angles[1] - base.angles[0]
        slopes = (vals[1:] - vals[:-1]) / h_grid
        jumps = slopes - np.roll(slopes, 1)  # jump at each left node, wrapped
        out = np.zeros(sigma.shape[0])
        chunk = 128
        for start in range(0, sigma.shape[0], chunk):
            stop = min(start + chunk, sigma.shape[0])
            d = nodes[None, :] - sigma[start:stop, None]
            d = np.mod(d + math.pi, TWO_PI) - math.pi
            out[start:stop] = np.sum(jumps[None, :] * kernel.density(d), axis=1)
        return out
    t = np.linspace(-kernel.delta, kernel.delta, SIMPSON_NODES)
    h = t[1] - t[0]
    w2 = kernel.density_second(t)
    out = np.empty(sigma.shape[0])
    chunk = 256
    for start in range(0, sigma.shape[0], chunk):
        stop = min(start + chunk, sigma.shape[0])
        block = base.evaluate(sigma[start:stop, None] + t[None, :])
        out[start:stop] = _simpson(block * w2[None, :], h)
    return out


def _build_vbar(coupling: SpinCoupling, kernel: SmoothingKernel, offset: float) -> tuple[SpinCoupling, float, Callable]:
    """Convolve and certify curvature; returns (vbar, sup|vbar''|, analytic_second)."""
    if isinstance(coupling, TrigPolySpin):
        damped = {m: a * kernel.fourier_cosine(m) for m, a in coupling.coefficients.items()}
        damped[0] = damped.get(0, 0.0) + offset
        vbar = TrigPolySpin(damped)

        def second(sigma):
            return vbar.second_derivative(sigma)

        grid = np.linspace(0.0, TWO_PI, 4096, endpoint=False)
        sup2 = float(np.max(np.abs(second(grid))))
        return vbar, sup2 * (1.0 + 1e-9) + 1e-12, second

    vbar = _ConvolvedSpin(coupling, kernel, offset)

    def second(sigma):
        return _convolved_second(coupling, kernel, np.asarray(sigma, dtype=float).reshape(-1))

    grid = np.linspace(0.0, TWO_PI, 2048, endpoint=False)
    sup2 = float(np.max(np.abs(second(grid))))
    # grid maxima of an interpolated table can undershoot; keep a safety factor
    return vbar, sup2 * 1.001 + 1e-9, second


def _check_v_bounds(decomp: SmoothDecomposition, grid: int = 4096) -> None:
    s = np.linspace(0.0, TWO_PI, grid, endpoint=False)
    v = decomp.v_eval(s)
    if not (np.all(v > 0.0) and np.all(v < decomp.epsilon)):
        raise AssertionError(
            f"remainder out of range: min={v.min():.3e}, max={v.max():.3e}, eps={decomp.epsilon}")


def smooth_decompose(coupling: SpinCoupling, epsilon: float) -> SmoothDecomposition:
    """Decompose V = Vbar - v with smooth Vbar and 0 < v < epsilon.

    Vbar(s) = (f_delta * V)(s) + eps/2 with delta from the certified
    continuity modulus; v = Vbar - V then lies strictly inside (0, eps).
    """
    delta = continuity_modulus(coupling, epsilon)
    kernel = mollifier(delta)
    vbar, sup2, _ = _build_vbar(coupling, kernel, +0.5 * epsilon)
    decomp = SmoothDecomposition(
        epsilon=epsilon, delta=delta, kernel=kernel, base=coupling, vbar=vbar,
        vbar_second_sup=sup2, v_sign=+1,
    )
    _check_v_bounds(decomp)
    bound = 2.0 * delta * kernel.second_derivative_sup * coupling.sup_norm() + 1e-8
    if sup2 > bound:
        raise AssertionError(f"curvature bound violated: {sup2} > {bound}")
    return decomp


def sign_split_decompose(coupling: SpinCoupling, epsilon: float) -> SignSplitDecomposition:
    """Two decompositions sharing one kernel: V = Vbar - v and V = Vbar_minus + v_minus.

    The minus variant shifts the convolution down by eps/2 so that
    v_minus = V - Vbar_minus also lies in (0, eps); it serves pairs whose
    positional coupling is negative.
    """
    plus = smooth_decompose(coupling, epsilon)
    vbar_m, sup2_m, _ = _build_vbar(coupling, plus.kernel, -0.5 * epsilon)
    minus = SmoothDecomposition(
        epsilon=epsilon, delta=plus.delta, kernel=plus.kernel, base=coupling,
        vbar=vbar_m, vbar_second_sup=sup2_m, v_sign=-1,
    )
    _check_v_bounds(minus)
    return SignSplitDecomposition(plus=plus, minus=minus)


def second_derivative_sup(decomp: SmoothDecomposition) -> float:
    """Certified sup |Vbar''|, cross-checked by central finite differences.

    The analytic path convolves with the kernel's second derivative; the
    finite-difference path differentiates exact (non-interpolated) values of
    Vbar.  Disagreement beyond 1e-4 of the sup magnitude raises.
    """
    sigma = np.linspace(0.0, TWO_PI, 512, endpoint=False)
    _, _, second = _build_vbar(decomp.base, decomp.kernel,
                               0.5 * decomp.epsilon * decomp.v_sign)
    analytic = np.asarray(second(sigma), dtype=float).reshape(-1)

    if isinstance(decomp.vbar, TrigPolySpin):
        h = 1e-4
        exact = decomp.vbar.evaluate
        fd = (np.asarray(exact(sigma + h)) - 2.0 * np.asarray(exact(sigma))
              + np.asarray(exact(sigma - h))) / (h * h)
    else:
        # fourth-order stencil: the tabulated path evaluates Vbar by
        # quadrature, and a wider, higher-order difference keeps the
        # quadrature noise amplification below the comparison tolerance
        h = decomp.delta / 50.0
        exact = decomp.vbar.exact_at  # type: ignore[union-attr]
        fd = (-np.asarray(exact(sigma + 2 * h)) + 16.0 * np.asarray(exact(sigma + h))
              - 30.0 * np.asarray(exact(sigma)) + 16.0 * np.asarray(exact(sigma - h))
              - np.asarray(exact(sigma - 2 * h))) / (12.0 * h * h)
    scale = max(float(np.max(np.abs(analytic))), 1e-12)
    rel = float(np.max(np.abs(fd - analytic))) / scale
    if rel > 1e-4:
        raise AssertionError(f"finite-difference curvature check failed: rel={rel:.3e}")
    return decomp.vbar_second_sup
