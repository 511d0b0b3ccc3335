import math

import numpy as np
import pytest

from planargibbs.potential import TabulatedSpin, TrigPolySpin
from planargibbs.smoothing import (DELTA_CAP, SmoothDecomposition, continuity_modulus,
                                   mollifier, second_derivative_sup,
                                   sign_split_decompose, smooth_decompose)

TWO_PI = 2.0 * math.pi
GRID = np.linspace(0.0, TWO_PI, 4096, endpoint=False)


def cosine():
    return TrigPolySpin({1: -1.0})


def triangle():
    ang = np.linspace(0.0, TWO_PI, 721)
    return TabulatedSpin(ang, 0.5 * np.minimum(ang, TWO_PI - ang))


def ripple():
    ang = np.linspace(0.0, TWO_PI, 1025)
    return TabulatedSpin(ang, -np.cos(ang) + 0.3 * np.cos(2 * ang))


class TestContinuityModulus:
    def test_constant_returns_cap(self):
        assert continuity_modulus(TrigPolySpin({0: 5.0}), 0.3) == DELTA_CAP

    def test_cosine_certified_width(self):
        """|cos a - cos b| <= |a - b| makes eps/4 admissible; the certified
        width must reach at least the 0.02 the bound guarantees for eps=0.1."""
        delta = continuity_modulus(cosine(), 0.1)
        assert delta >= 0.02

    def test_invalid_epsilon(self):
        with pytest.raises(ValueError):
            continuity_modulus(cosine(), 0.0)
        with pytest.raises(ValueError):
            continuity_modulus(cosine(), 1.0)

    def test_certificate_holds(self, rng):
        """The returned width really keeps oscillations below eps/2."""
        V = ripple()
        eps = 0.12
        delta = continuity_modulus(V, eps)
        s = rng.uniform(0, TWO_PI, 4000)
        t = rng.uniform(-2 * delta, 2 * delta, 4000) * (1 - 1e-9)
        assert np.max(np.abs(V.evaluate(s + t) - V.evaluate(s))) < eps / 2


class TestMollifier:
    def test_unit_mass(self):
        kernel = mollifier(0.3)
        t = np.linspace(-0.3, 0.3, 4097)
        mass = np.trapezoid(kernel.density(t), t)
        assert abs(mass - 1.0) < 1e-8

    def test_center_value(self):
        """density(0) equals exp(-1) over the normalizer."""
        kernel = mollifier(0.2)
        assert np.isclose(kernel.density(0.0) * kernel.normalizer, math.exp(-1),
                          rtol=1e-12)

    def test_vanishes_at_support_edge(self):
        kernel = mollifier(0.25)
        edge = np.array([-0.25, 0.25, 0.2499999, -0.2499999])
        assert np.all(kernel.density(edge) < 1e-10)
        assert np.all(np.abs(kernel.density_second(edge)) < 1e-3)

    def test_symmetric(self):
        kernel = mollifier(0.15)
        t = np.linspace(0, 0.15, 100)
        assert np.allclose(kernel.density(t), kernel.density(-t), rtol=1e-14)

    def test_second_derivative_continuity(self):
        """f'' stays finite-difference-continuous across the support."""
        kernel = mollifier(0.2)
        t = np.linspace(-0.2 + 1e-6, 0.2 - 1e-6, 20001)
        f2 = kernel.density_second(t)
        jumps = np.abs(np.diff(f2))
        assert np.max(jumps) < 1e-2 * max(1.0, np.max(np.abs(f2)))

    def test_invalid_delta(self):
        with pytest.raises(ValueError):
            mollifier(0.0)
        with pytest.raises(ValueError):
            mollifier(-1.0)


class TestSmoothDecompose:
    @pytest.mark.parametrize("coupling,eps", [
        (cosine(), 0.1), (triangle(), 0.1), (ripple(), 0.08),
    ])
    def test_contract(self, coupling, eps):
        """Reconstruction, strict remainder bounds, and the curvature cap."""
        dec = smooth_decompose(coupling, eps)
        rec = dec.vbar_eval(GRID) - dec.v_eval(GRID) - coupling.evaluate(GRID)
        assert np.max(np.abs(rec)) <= 1e-10
        v = dec.v_eval(GRID)
        assert np.all(v > 0.0) and np.all(v < eps)
        bound = 2 * dec.delta * dec.kernel.second_derivative_sup * coupling.sup_norm()
        assert dec.vbar_second_sup <= bound + 1e-8

    def test_constant_coupling(self):
        """A constant splits into itself plus eps/2 on both parts."""
        dec = smooth_decompose(TrigPolySpin({0: 2.0}), 0.2)
        assert np.allclose(dec.v_eval(GRID), 0.1, atol=1e-12)
        assert np.allclose(dec.vbar_eval(GRID), 2.1, atol=1e-12)
        assert second_derivative_sup(dec) <= 1e-10

    def test_cosine_curvature_near_one(self):
        """Mollifying the cosine contracts its curvature by the kernel's
        first cosine moment, staying just below 1."""
        dec = smooth_decompose(cosine(), 0.1)
        damping = dec.kernel.fourier_cosine(1)
        assert damping < 1.0
        assert np.isclose(dec.vbar_second_sup, damping, rtol=1e-6)
        assert dec.vbar_second_sup <= 1.0 + 1e-9

    def test_vbar_symmetric(self):
        for coupling in (cosine(), triangle()):
            dec = smooth_decompose(coupling, 0.1)
            assert np.max(np.abs(dec.vbar_eval(GRID) - dec.vbar_eval(-GRID))) <= 1e-12

    def test_direct_convolution_oracle(self):
        """Grid Vbar agrees with an independent trapezoid convolution."""
        coupling = ripple()
        eps = 0.1
        dec = smooth_decompose(coupling, eps)
        t = np.linspace(-dec.delta, dec.delta, 20001)
        w = dec.kernel.density(t)
        probe = np.linspace(0, TWO_PI, 37)
        direct = np.array([np.trapezoid(w * coupling.evaluate(s + t), t)
                           for s in probe]) + eps / 2
        assert np.allclose(dec.vbar_eval(probe), direct, atol=1e-7)


class TestSecondDerivative:
    def test_finite_difference_agreement(self):
        for coupling, eps in ((cosine(), 0.1), (triangle(), 0.1), (ripple(), 0.08)):
            dec = smooth_decompose(coupling, eps)
            assert second_derivative_sup(dec) == dec.vbar_second_sup

    def test_triangle_kink_scale(self):
        """Smoothing a slope jump of 1 concentrates curvature ~ f(0)."""
        dec = smooth_decompose(triangle(), 0.1)
        peak = dec.kernel.density(0.0)
        assert 0.5 * peak <= dec.vbar_second_sup <= 1.5 * peak


class TestSignSplit:
    def test_constant(self):
        split = sign_split_decompose(TrigPolySpin({0: 1.0}), 0.2)
        assert np.allclose(split.minus.v_eval(GRID), 0.1, atol=1e-12)

    def test_reconstruction_both_parts(self):
        V = ripple()
        split = sign_split_decompose(V, 0.1)
        plus = split.plus.vbar_eval(GRID) - split.plus.v_eval(GRID)
        minus = split.minus.vbar_eval(GRID) + split.minus.v_eval(GRID)
        assert np.max(np.abs(plus - V.evaluate(GRID))) <= 1e-10
        assert np.max(np.abs(minus - V.evaluate(GRID))) <= 1e-10

    def test_shared_width(self):
        split = sign_split_decompose(cosine(), 0.1)
        assert split.plus.delta == split.minus.delta
        assert split.plus.kernel is split.minus.kernel

    def test_minus_remainder_strict(self):
        split = sign_split_decompose(triangle(), 0.1)
        v = split.minus.v_eval(GRID)
        assert np.all(v > 0.0) and np.all(v < 0.1)
