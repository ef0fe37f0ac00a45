import math

import numpy as np
import pytest

from viscowave.spectral import (
    BadIndex,
    Domain1D,
    LengthMismatch,
    ModeSet,
    eigenpair,
    preset_function,
    project,
    reconstruct,
    resolve_coefficients,
    simpson_weights,
)


def simpson_integral(f, L, panels=4096):
    xs, w = simpson_weights(L, panels)
    return float(w @ f(xs))


class TestEigenpair:
    def test_unit_eigenvalue_on_pi(self):
        lam, w = eigenpair(Domain1D(math.pi), 1)
        assert lam == pytest.approx(1.0, abs=1e-15)
        assert w(0.0) == pytest.approx(0.0, abs=1e-15)
        assert w(math.pi) == pytest.approx(0.0, abs=1e-12)

    def test_second_mode_unit_interval(self):
        lam, _ = eigenpair(Domain1D(1.0), 2)
        assert lam == pytest.approx(39.47841760435743, abs=1e-10)

    def test_normalization_quadrature(self):
        # frozen: composite Simpson with 10^4 panels gives exactly 1.0
        _, w1 = eigenpair(Domain1D(math.pi), 1)
        norm = simpson_integral(lambda x: w1(x) ** 2, math.pi, panels=10**4)
        assert norm == pytest.approx(1.0, abs=1e-12)

    def test_bad_index(self):
        with pytest.raises(BadIndex):
            eigenpair(Domain1D(1.0), 0)


class TestModeSet:
    def test_lambdas_strictly_increasing(self):
        ms = ModeSet(Domain1D(2.0), 12)
        assert np.all(np.diff(ms.lambdas) > 0.0)

    def test_orthonormality(self):
        L = math.pi
        ms = ModeSet(Domain1D(L), 6)
        gram = np.empty((6, 6))
        for k in range(6):
            _, wk = eigenpair(ms.domain, k + 1)
            gram[:, k] = project(wk, ms)
        assert np.max(np.abs(gram - np.eye(6))) <= 1e-10

    def test_gradient_orthogonality(self):
        L = 2.5
        ms = ModeSet(Domain1D(L), 5)
        amp = math.sqrt(2.0 / L)
        for j in range(1, 6):
            for k in range(1, 6):
                dj = lambda x, j=j: amp * (j * math.pi / L) * np.cos(j * math.pi * x / L)
                dk = lambda x, k=k: amp * (k * math.pi / L) * np.cos(k * math.pi * x / L)
                val = simpson_integral(lambda x: dj(x) * dk(x), L)
                expect = ms.lambdas[j - 1] if j == k else 0.0
                assert val == pytest.approx(expect, abs=1e-9)


class TestProject:
    def test_projects_basis_to_unit_vector(self):
        ms = ModeSet(Domain1D(math.pi), 4)
        _, w1 = eigenpair(ms.domain, 1)
        c = project(w1, ms)
        assert np.max(np.abs(c - np.array([1.0, 0.0, 0.0, 0.0]))) <= 1e-10

    def test_zero_function(self):
        ms = ModeSet(Domain1D(1.0), 3)
        assert np.all(project(lambda x: 0.0 * x, ms) == 0.0)

    def test_parabola_coefficients(self):
        # c1 = 4 sqrt(2/pi) from the antiderivative; c2 vanishes by symmetry
        ms = ModeSet(Domain1D(math.pi), 2)
        c = project(lambda x: x * (math.pi - x), ms)
        assert c[0] == pytest.approx(3.1915382432114616, abs=1e-6)
        assert abs(c[1]) <= 1e-10


class TestReconstruct:
    def test_single_mode_value(self):
        ms = ModeSet(Domain1D(math.pi), 2)
        vals = reconstruct([1.0, 0.0], ms, [math.pi / 2])
        assert vals[0] == pytest.approx(0.7978845608028654, abs=1e-12)

    def test_zero_coefficients(self):
        ms = ModeSet(Domain1D(1.0), 3)
        assert np.all(reconstruct([0.0, 0.0, 0.0], ms, np.linspace(0, 1, 11)) == 0.0)

    def test_length_mismatch(self):
        ms = ModeSet(Domain1D(1.0), 3)
        with pytest.raises(LengthMismatch):
            reconstruct([1.0, 2.0], ms, [0.5])

    def test_project_reconstruct_round_trip(self):
        L = math.pi
        ms = ModeSet(Domain1D(L), 32)
        f = lambda x: x * (L - x)
        c = project(f, ms)
        xs = np.linspace(0.0, L, 1001)
        err = np.max(np.abs(reconstruct(c, ms, xs) - f(xs)))
        assert err <= 1e-3


class TestNormIdentities:
    def test_parseval(self):
        rng = np.random.RandomState(11)
        L = math.pi
        ms = ModeSet(Domain1D(L), 64)
        c = rng.randn(64)
        norm_sq = simpson_integral(lambda x: reconstruct(c, ms, x) ** 2, L)
        assert norm_sq == pytest.approx(float(c @ c), abs=1e-8 * float(c @ c))

    def test_poincare_inequality(self):
        rng = np.random.RandomState(5)
        d = Domain1D(2.7)
        ms = ModeSet(d, 16)
        cs = d.poincare_constant
        for _ in range(25):
            c = rng.randn(16)
            assert float(c @ c) <= cs**2 * float(ms.lambdas @ (c * c)) + 1e-12

    def test_poincare_equality_mode_one(self):
        d = Domain1D(1.3)
        ms = ModeSet(d, 4)
        c = np.array([2.0, 0.0, 0.0, 0.0])
        lhs = float(c @ c)
        rhs = d.poincare_constant**2 * float(ms.lambdas @ (c * c))
        assert lhs == pytest.approx(rhs, rel=1e-14)


class TestPresets:
    def test_preset_values(self):
        d = Domain1D(2.0)
        assert np.all(preset_function("zero", d)(np.linspace(0, 2, 5)) == 0.0)
        sine = preset_function("sine 2", d)
        assert sine(0.5) == pytest.approx(1.0, abs=1e-15)
        assert sine(1.0) == pytest.approx(0.0, abs=1e-15)
        parab = preset_function("parabola", d)
        assert parab(1.0) == pytest.approx(1.0)
        bump = preset_function("bump", d)
        assert bump(0.0) == 0.0 and bump(2.0) == 0.0
        assert bump(1.0) == pytest.approx(1.0)

    def test_unknown_preset(self):
        with pytest.raises(ValueError):
            preset_function("wiggle", Domain1D(1.0))
        with pytest.raises(ValueError):
            preset_function("sine x", Domain1D(1.0))

    def test_resolve_coefficients(self):
        ms = ModeSet(Domain1D(math.pi), 4)
        c = resolve_coefficients((1.0, 2.0), ms)
        assert np.array_equal(c, [1.0, 2.0, 0.0, 0.0])
        with pytest.raises(LengthMismatch):
            resolve_coefficients((1.0,) * 5, ms)
        named = resolve_coefficients("sine 1", ms)
        assert named[0] == pytest.approx(math.sqrt(math.pi / 2.0), abs=1e-10)
