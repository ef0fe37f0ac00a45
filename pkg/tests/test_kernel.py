import math

import numpy as np
import pytest

from viscowave.kernel import (
    ABSENT_KERNEL,
    KernelSpec,
    MassExceedsOne,
    NonPositiveMass,
    NonPositiveRate,
    NonPositiveT0,
    advance_memory,
    g0_up_to,
    validate,
)


def iterate_memory(traj, dt, spec):
    """Reference driver: start from 0 and fold the whole trajectory in."""
    M = 0.0
    for i in range(len(traj) - 1):
        M = advance_memory(M, traj[i], traj[i + 1], dt, spec)
    return M


def global_trapezoid(traj, dt, spec):
    """Independent oracle: composite trapezoid of g(t-s) x(s) over the
    stored trajectory."""
    n = len(traj) - 1
    s = np.arange(n + 1) * dt
    t = n * dt
    return np.trapezoid(spec.alpha * np.exp(-spec.beta * (t - s)) * np.asarray(traj), dx=dt)


class TestValidate:
    def test_half_mass(self):
        spec = validate(1.0, 2.0)
        assert spec.l == pytest.approx(0.5, abs=1e-15)
        assert spec.zeta == 2.0

    def test_boundary_mass_rejected(self):
        with pytest.raises(MassExceedsOne):
            validate(1.0, 1.0)

    def test_fractional_mass(self):
        spec = validate(0.5, 3.0)
        assert spec.l == pytest.approx(1.0 - 1.0 / 6.0, abs=1e-12)

    def test_sign_errors(self):
        with pytest.raises(NonPositiveMass):
            validate(0.0, 1.0)
        with pytest.raises(NonPositiveMass):
            validate(-1.0, 1.0)
        with pytest.raises(NonPositiveRate):
            validate(1.0, 0.0)

    def test_admissible_range_properties(self):
        rng = np.random.RandomState(7)
        for _ in range(50):
            beta = rng.uniform(0.1, 10.0)
            alpha = beta * rng.uniform(0.01, 0.99)
            spec = validate(alpha, beta)
            assert 0.0 < spec.l < 1.0
            ts = rng.uniform(0.0, 5.0, size=8)
            g = spec.g(ts)
            assert np.all(g > 0.0)
            # decay condition holds with equality: g(t + h) = g(t) e^{-zeta h}
            h = 0.37
            assert np.allclose(spec.g(ts + h), g * math.exp(-spec.zeta * h), rtol=1e-13)


class TestG0:
    def test_quadrature_oracle(self):
        # frozen from composite trapezoid at step 1e-5: 0.2454210903...
        spec = validate(1.0, 4.0)
        assert g0_up_to(spec, 1.0) == pytest.approx(0.24542109027781644, abs=1e-12)
        assert g0_up_to(spec, 1.0) == pytest.approx(0.2454210903105, abs=1e-8)

    def test_total_mass_limit(self):
        spec = validate(1.0, 2.0)
        assert g0_up_to(spec, 100.0) == pytest.approx(0.5, abs=1e-12)

    def test_vanishing_anchor(self):
        spec = validate(1.0, 2.0)
        assert g0_up_to(spec, 1e-12) == pytest.approx(0.0, abs=1e-11)
        with pytest.raises(NonPositiveT0):
            g0_up_to(spec, 0.0)
        with pytest.raises(NonPositiveT0):
            g0_up_to(spec, -1.0)

    def test_monotone_and_bounded(self):
        spec = validate(0.7, 1.9)
        ts = np.linspace(0.01, 20.0, 200)
        vals = np.array([g0_up_to(spec, t) for t in ts])
        assert np.all(np.diff(vals) >= 0.0)          # saturates at total mass in float
        early = vals[ts <= 5.0]
        assert np.all(np.diff(early) > 0.0)
        assert np.all(vals < spec.total_mass() + 1e-15)


class TestMemoryRecurrence:
    def test_constant_input_closed_form(self):
        # x == 1, alpha=1, beta=2, t=1: M -> (1 - e^{-2})/2
        spec = validate(1.0, 2.0)
        dt = 1e-3
        traj = np.ones(1001)
        M = iterate_memory(traj, dt, spec)
        assert M == pytest.approx(0.43233235838169365, abs=1e-6)

    def test_zero_input(self):
        spec = validate(1.0, 2.0)
        M = iterate_memory(np.zeros(100), 0.01, spec)
        assert M == 0.0

    def test_ramp_closed_form(self):
        # x(s) = s, alpha = beta = 1, t = 2: integral is 1 + e^{-2}
        spec = KernelSpec(1.0, 1.0)
        dt = 1e-3
        traj = np.arange(2001) * dt
        M = iterate_memory(traj, dt, spec)
        assert M == pytest.approx(1.1353352832366128, abs=1e-5)

    def test_recurrence_equals_global_trapezoid(self):
        # algebraically identical summations; difference is pure rounding
        rng = np.random.RandomState(42)
        for _ in range(10):
            beta = rng.uniform(0.5, 5.0)
            spec = validate(beta * rng.uniform(0.2, 0.9), beta)
            dt = rng.choice([1e-3, 5e-3, 2e-2])
            n = rng.randint(50, 400)
            traj = rng.randn(n + 1)
            M = iterate_memory(traj, dt, spec)
            ref = global_trapezoid(traj, dt, spec)
            assert abs(M - ref) <= 1e-6 * max(1.0, abs(ref))
            assert abs(M - ref) <= 1e-11 * max(1.0, abs(ref))  # actually rounding-level

    def test_squared_memory_same_contract(self):
        rng = np.random.RandomState(3)
        spec = validate(1.0, 3.0)
        dt = 2e-3
        traj = rng.randn(301)
        Q = iterate_memory(traj**2, dt, spec)
        ref = global_trapezoid(traj**2, dt, spec)
        assert abs(Q - ref) <= 1e-12 * max(1.0, abs(ref))

    def test_vectorized_over_modes(self):
        spec = validate(1.0, 3.0)
        M = np.array([0.1, 0.2])
        out = advance_memory(M, np.array([1.0, 2.0]), np.array([1.5, 2.5]), 0.01, spec)
        for j in range(2):
            scalar = advance_memory(M[j], [1.0, 2.0][j], [1.5, 2.5][j], 0.01, spec)
            assert out[j] == pytest.approx(scalar, abs=0)

    def test_absent_kernel(self):
        assert advance_memory(0.7, 1.0, 2.0, 0.01, ABSENT_KERNEL) == 0.0
        assert ABSENT_KERNEL.l == 1.0
        assert g0_up_to(ABSENT_KERNEL, 5.0) == 0.0
