import math
from dataclasses import replace

import numpy as np
import pytest

from viscowave import ABSENT_KERNEL, Domain1D, HistoryBuffer, SimConfig, run, validate
from viscowave import diagnostics as D
from viscowave.kernel import KernelSpec, advance_memory
from viscowave.simulate import ModalState

PI_DOMAIN = Domain1D(math.pi)
MEMORY = validate(1.0, 3.0)


def make_state(gamma, v, M=None, Q=None, G=0.0, t=0.0, n=0):
    gamma = np.asarray(gamma, dtype=float)
    v = np.asarray(v, dtype=float)
    M = np.zeros_like(gamma) if M is None else np.asarray(M, dtype=float)
    Q = np.zeros_like(gamma) if Q is None else np.asarray(Q, dtype=float)
    return ModalState(t, n, gamma, gamma.copy(), gamma.copy(), v, M, Q, G)


def flat_history(m, v_row):
    hb = HistoryBuffer(m, len(v_row))
    hb.seed(np.tile(np.asarray(v_row, dtype=float), (m + 1, 1)))
    return hb


def decay_config(**kw):
    defaults = dict(
        domain=PI_DOMAIN, modes=4, kernel=MEMORY, mu1=0.0, mu2=0.05,
        tau=0.5, m=50, t_end=5.0, sample_every=1,
        u0="parabola", u1="zero", f0="match_u1",
    )
    defaults.update(kw)
    return SimConfig(**defaults)


class TestClassicalEnergy:
    def test_position_only(self):
        st = make_state([1.0, 0.0], [0.0, 0.0])
        assert D.classical_energy(st, [1.0, 4.0]) == pytest.approx(0.5)

    def test_all_zero(self):
        st = make_state([0.0, 0.0], [0.0, 0.0])
        assert D.classical_energy(st, [1.0, 4.0]) == 0.0

    def test_mixed(self):
        st = make_state([1.0, 1.0], [1.0, 2.0])
        assert D.classical_energy(st, [1.0, 4.0]) == pytest.approx(5.0)


class TestHistoryMismatch:
    def test_zero_at_start(self):
        st = make_state([1.0], [0.0])
        assert D.g_circ_grad(st, MEMORY, [1.0]) == 0.0

    def test_frozen_trajectory_vanishes(self):
        # constant gamma: M = gamma G, Q = gamma^2 G under the same weights
        spec = MEMORY
        dt, n, gamma = 1e-3, 1500, 0.7
        M = Q = G = 0.0
        for _ in range(n):
            M = advance_memory(M, gamma, gamma, dt, spec)
            Q = advance_memory(Q, gamma * gamma, gamma * gamma, dt, spec)
            G = advance_memory(G, 1.0, 1.0, dt, spec)
        st = make_state([gamma], [0.0], M=[M], Q=[Q], G=G, t=n * dt)
        assert abs(D.g_circ_grad(st, spec, [1.0])) <= 1e-10

    def test_ramp_oracle(self):
        # gamma(s) = s, alpha = beta = 1, t = 1: the mismatch integral is
        # int_0^1 e^{-(1-s)} (1-s)^2 ds = 2 - 5/e
        spec = KernelSpec(1.0, 1.0)
        dt, n = 1e-4, 10000
        M = Q = G = 0.0
        for i in range(n):
            s0, s1 = i * dt, (i + 1) * dt
            M = advance_memory(M, s0, s1, dt, spec)
            Q = advance_memory(Q, s0 * s0, s1 * s1, dt, spec)
            G = advance_memory(G, 1.0, 1.0, dt, spec)
        st = make_state([1.0], [0.0], M=[M], Q=[Q], G=G, t=1.0)
        assert D.g_circ_grad(st, spec, [1.0]) == pytest.approx(0.16060279414278833, abs=1e-6)


class TestModifiedEnergy:
    def test_reduces_to_classical_at_start(self):
        st = make_state([1.0], [0.0])
        hb = flat_history(4, [0.0])
        val = D.modified_energy(st, hb, MEMORY, [1.0], xi=0.0, sigma=0.0)
        assert val == pytest.approx(0.5)

    def test_xi_zero_is_script_energy(self):
        rng = np.random.RandomState(0)
        for _ in range(10):
            st = make_state(rng.randn(3), rng.randn(3), M=rng.randn(3),
                            Q=np.abs(rng.randn(3)), G=0.2)
            hb = flat_history(6, rng.randn(3))
            lambdas = [1.0, 4.0, 9.0]
            ut2 = float((st.v**2).sum())
            grad2 = float((np.array(lambdas) * st.gamma**2).sum())
            gc = D.g_circ_grad(st, MEMORY, lambdas)
            expect = 0.5 * (ut2 + (1 - st.G) * grad2 + gc)
            assert D.modified_energy(st, hb, MEMORY, lambdas, 0.0, 0.0) == pytest.approx(expect, rel=1e-13)

    def test_flat_history_delay_term(self):
        # velocities identically 1 over [t - 0.5, t], xi = 2, sigma = 0:
        # the delay term contributes (xi/2) * tau = 0.5
        m, tau = 10, 0.5
        st = make_state([0.0], [1.0])
        hb = flat_history(m, [1.0])
        base = D.modified_energy(st, hb, MEMORY, [1.0], 0.0, 0.0)
        val = D.modified_energy(st, hb, MEMORY, [1.0], 2.0, 0.0, dt=tau / m)
        assert val - base == pytest.approx(0.5, abs=1e-12)

    def test_history_underfilled(self):
        st = make_state([0.0], [1.0], n=3)
        hb = flat_history(4, [1.0])  # newest index is 0, state says 3
        with pytest.raises(D.HistoryUnderfilled):
            D.modified_energy(st, hb, MEMORY, [1.0], 0.0, 0.0)


class TestLyapunov:
    def test_zero_weights_reduce_to_energy(self):
        st = make_state([0.3], [0.4], M=[0.1], Q=[0.2], G=0.3)
        hb = flat_history(4, [0.4])
        E = D.modified_energy(st, hb, MEMORY, [1.0], 0.0, 0.0)
        L = D.lyapunov(st, hb, MEMORY, [1.0], eps1=0.0, eps2=0.0, xi=0.0, sigma=0.0)
        assert L == pytest.approx(E)

    def test_zero_velocity_reduces_to_energy(self):
        st = make_state([0.7], [0.0], M=[0.2], Q=[0.3], G=0.4)
        hb = flat_history(4, [0.0])
        E = D.modified_energy(st, hb, MEMORY, [1.0], 0.0, 0.0)
        L = D.lyapunov(st, hb, MEMORY, [1.0], eps1=0.3, eps2=0.7, xi=0.0, sigma=0.0)
        assert L == pytest.approx(E)

    def test_arithmetic_from_definitions(self):
        # gamma=1, v=1, lambda=1, G=0.4, eps1=0.1, eps2=0.2, xi=0
        hb = flat_history(4, [1.0])
        # frozen-history inputs: M = gamma G, Q = gamma^2 G
        st = make_state([1.0], [1.0], M=[0.4], Q=[0.4], G=0.4)
        # g_circ = 0, E = (1 + 0.6)/2 = 0.8, Psi = 1, Chi = 0
        assert D.lyapunov(st, hb, MEMORY, [1.0], 0.1, 0.2, 0.0, 0.0) == pytest.approx(0.9)
        # uncorrelated inputs: M = 0, Q = 0.4
        st = make_state([1.0], [1.0], M=[0.0], Q=[0.4], G=0.4)
        # g_circ = 0.8, E = (1 + 0.6 + 0.8)/2 = 1.2, Psi = 1, Chi = -0.4
        assert D.lyapunov(st, hb, MEMORY, [1.0], 0.1, 0.2, 0.0, 0.0) == pytest.approx(1.22)


class TestEnergyIdentity:
    def test_conservative_residual_tiny(self):
        cfg = decay_config(kernel=ABSENT_KERNEL, mu1=0.0, mu2=0.0, modes=1,
                           u0=(1.0,), u1=(0.0,), f0="match_u1", t_end=10.0, m=100, tau=0.1)
        tr = run(cfg)
        _, r = D.energy_identity_residual(tr)
        e0 = D.evaluate_trace(tr).e[0]
        assert np.max(np.abs(r)) <= 1e-5 * e0

    def test_damped_mode_matches_closed_form_rate(self):
        # mu1 = 0.2 single mode: RHS must equal -0.2 ||u_t||^2 with u_t from
        # the closed-form solution
        cfg = decay_config(kernel=ABSENT_KERNEL, mu1=0.2, mu2=0.0, modes=1,
                           u0=(1.0,), u1=(0.0,), f0="match_u1", t_end=10.0, m=100, tau=0.1)
        tr = run(cfg)
        table = D.evaluate_trace(tr)
        w = math.sqrt(0.99)
        # d/dt of e^{-0.1 t}(cos wt + (0.1/w) sin wt) = -e^{-0.1 t}(w + 0.01/w) sin wt
        v_exact = -np.exp(-0.1 * tr.t) * (w + 0.01 / w) * np.sin(w * tr.t)
        rhs = -cfg.mu1 * table.ut_sq
        rhs_exact = -cfg.mu1 * v_exact**2
        assert np.max(np.abs(rhs - rhs_exact)) <= 1e-6

        _, r = D.energy_identity_residual(tr, table)
        tr_half = run(replace(cfg, m=200))
        _, r_half = D.energy_identity_residual(tr_half)
        assert np.max(np.abs(r)) / np.max(np.abs(r_half)) >= 2.0

    def test_residual_converges_with_memory_and_delay(self):
        cfg = decay_config()
        _, r = D.energy_identity_residual(run(cfg))
        _, r_half = D.energy_identity_residual(run(replace(cfg, m=100)))
        assert np.max(np.abs(r)) / np.max(np.abs(r_half)) >= 2.0


class TestComparisonInequality:
    def test_zero_cases(self):
        st = make_state([1.0], [0.0])
        assert D.comparison_inequality_margin(st, MEMORY, PI_DOMAIN, [1.0]) == 0.0

    def test_margin_nonnegative_along_runs(self):
        for cfg in (decay_config(), decay_config(mu1=0.1, mu2=0.0),
                    decay_config(mu1=-0.1, mu2=0.3, u1="sine 1", t_end=4.0)):
            table = D.evaluate_trace(run(cfg))
            assert table.comparison_margin.min() >= -1e-10
            assert table.g_circ.min() >= -1e-10


class TestPriorBound:
    def test_conservative_gronwall_factor_one(self):
        cfg = decay_config(kernel=ABSENT_KERNEL, mu1=0.0, mu2=0.0,
                           modes=8, t_end=10.0, m=100, tau=0.1)
        tr = run(cfg)
        table = D.evaluate_trace(tr)
        pb = D.prior_bound(tr, table)
        assert pb.C == pytest.approx(table.E_script[0])
        assert pb.ok  # within the documented O(dt^2) wobble slack

    def test_zero_data_zero_solution(self):
        cfg = decay_config(u0="zero", u1="zero", f0="zero", t_end=2.0)
        tr = run(cfg)
        table = D.evaluate_trace(tr)
        pb = D.prior_bound(tr, table)
        assert pb.C == 0.0
        assert np.all(table.E_script == 0.0)
        assert np.all(tr.gamma == 0.0)
        assert pb.ok

    def test_growth_case_stays_below_envelope(self):
        cfg = decay_config(mu1=-0.1, mu2=0.3, u1="sine 1", t_end=10.0)
        tr = run(cfg)
        pb = D.prior_bound(tr)
        assert pb.ok and pb.worst_margin > 0.0


class TestSampleEvaluation:
    def test_evaluate_sample_fields(self):
        st = make_state([1.0], [1.0], M=[0.0], Q=[0.4], G=0.4)
        hb = flat_history(4, [1.0])
        s = D.evaluate_sample(st, hb, MEMORY, [1.0], eps1=0.1, eps2=0.2,
                              xi=0.0, sigma=0.0, dt=0.1)
        assert s.e == pytest.approx(1.0)
        assert s.g_circ == pytest.approx(0.8)
        assert s.E_script == pytest.approx(1.2)
        assert s.Psi == pytest.approx(1.0)
        assert s.Chi == pytest.approx(-0.4)
        assert s.L == pytest.approx(1.22)
        assert s.delay_int == pytest.approx(0.4)  # ||u_t||^2 = 1 over 4 slots of 0.1

    def test_sample_invariants_along_run(self):
        table = D.evaluate_trace(run(decay_config(t_end=8.0)))
        assert np.all(table.e >= 0.0)
        assert np.all(table.E_mod >= 0.0)
        assert np.all(table.g_circ >= -1e-10)


class TestEquivalence:
    def test_two_sided_bounds_hold(self):
        tr = run(decay_config(mu2=1e-4, t_end=20.0, modes=6, u0="sine 6", sample_every=5))
        rep = D.equivalence_margins(tr)
        assert rep.beta1 > 0.0
        assert rep.beta2 > 1.0
        assert rep.ok

    def test_large_eps_reports_degenerate_lower(self):
        tr = run(decay_config(t_end=1.0))
        tr.eps1 = 5.0  # deliberately outside the certified regime
        rep = D.equivalence_margins(tr)
        assert rep.beta1 == 0.0
