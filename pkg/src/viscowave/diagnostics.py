"""Energy and Lyapunov functionals evaluated from modal state, plus runtime
residual checks of the identities and inequalities they satisfy.

Orthonormality of the sine basis turns every spatial integral into a modal
sum: ||u_t||^2 = sum v_j^2, ||grad u||^2 = sum lam_j g_j^2, and the history
mismatch functional expands under the convolution as

    (g o grad u)(t) = sum_j lam_j (g_j^2 G - 2 g_j M_j + Q_j),

with M_j, Q_j the memory accumulators of g_j, g_j^2 and G the accumulated
kernel mass UNDER THE SAME quadrature weights.  Using the quadrature-
consistent G (rather than the closed-form integral) makes the expansion an
exact sum of nonnegative terms, so the sign facts and the comparison
inequality below hold at the discrete level up to rounding, not merely up to
O(dt^2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class HistoryUnderfilled(ValueError):
    """The history buffer does not cover [t - tau, t] for the given state."""


# ---------------------------------------------------------------------------
# modal-sum cores (broadcast over leading sample axes)
# ---------------------------------------------------------------------------

def _ut_sq(v):
    return (v * v).sum(axis=-1)


def _grad_sq(gamma, lambdas):
    return (lambdas * gamma * gamma).sum(axis=-1)


def _g_circ(gamma, M, Q, G, lambdas):
    G = np.asarray(G)[..., None] if np.ndim(G) else G
    return (lambdas * (gamma * gamma * G - 2.0 * gamma * M + Q)).sum(axis=-1)


def _psi(gamma, v):
    return (gamma * v).sum(axis=-1)


def _chi(gamma, v, M, G):
    G = np.asarray(G)[..., None] if np.ndim(G) else G
    return -(v * (gamma * G - M)).sum(axis=-1)


def _script_energy(ut_sq, grad_sq, g_circ, G):
    return 0.5 * (ut_sq + (1.0 - np.asarray(G)) * grad_sq + g_circ)


# ---------------------------------------------------------------------------
# state-level operations
# ---------------------------------------------------------------------------

def classical_energy(state, lambdas) -> float:
    """e(t) = (||u_t||^2 + ||grad u||^2) / 2."""
    lambdas = np.asarray(lambdas, dtype=float)
    return float(0.5 * (_ut_sq(state.v) + _grad_sq(state.gamma, lambdas)))


def g_circ_grad(state, kernel, lambdas) -> float:
    """History mismatch int_0^t g(t-s) ||grad u(t) - grad u(s)||^2 ds,
    expanded through the memory accumulators; nonnegative up to rounding."""
    lambdas = np.asarray(lambdas, dtype=float)
    return float(_g_circ(state.gamma, state.M, state.Q, state.G, lambdas))


def delay_integral(window, sigma: float, dt: float) -> float:
    """Trapezoid of e^{sigma (s - t)} ||u_t(s)||^2 over the m+1 history slots
    covering [t - tau, t] (window rows oldest first)."""
    window = np.asarray(window, dtype=float)
    m = window.shape[0] - 1
    offsets = np.arange(-m, 1, dtype=float) * dt
    w = np.full(m + 1, dt)
    w[0] = w[-1] = 0.5 * dt
    return float((w * np.exp(sigma * offsets)) @ (window * window).sum(axis=1))


def modified_energy(state, history, kernel, lambdas, xi: float, sigma: float, dt: float = None) -> float:
    """Augmented energy: the memory-weighted energy plus (xi/2) times the
    exponentially tilted delay integral.  With xi = 0 this is the plain
    history-energy of the well-posedness estimate."""
    if history.newest != state.step_index:
        raise HistoryUnderfilled(
            f"history newest index {history.newest} != state step {state.step_index}"
        )
    lambdas = np.asarray(lambdas, dtype=float)
    ut_sq = _ut_sq(state.v)
    grad_sq = _grad_sq(state.gamma, lambdas)
    g_circ = _g_circ(state.gamma, state.M, state.Q, state.G, lambdas)
    e_script = float(_script_energy(ut_sq, grad_sq, g_circ, state.G))
    if xi == 0.0:
        return e_script
    if dt is None:
        raise ValueError("dt required when xi != 0")
    return e_script + 0.5 * xi * delay_integral(history.window(), sigma, dt)


def lyapunov(state, history, kernel, lambdas, eps1: float, eps2: float,
             xi: float, sigma: float, dt: float = None) -> float:
    """L = E + eps1 * Psi + eps2 * Chi with Psi = sum gamma_j v_j and
    Chi = -sum v_j (gamma_j G - M_j)."""
    E = modified_energy(state, history, kernel, lambdas, xi, sigma, dt)
    return float(
        E + eps1 * _psi(state.gamma, state.v) + eps2 * _chi(state.gamma, state.v, state.M, state.G)
    )


def comparison_inequality_margin(state, kernel, domain, lambdas) -> float:
    """Margin RHS - LHS of the comparison inequality

        || int_0^t g(t-s)(u(t) - u(s)) ds ||^2  <=  (1-l) C*^2 (g o grad u)(t)

    whose modal LHS is sum_j (gamma_j G - M_j)^2.  Must be >= -1e-10."""
    lambdas = np.asarray(lambdas, dtype=float)
    diff = state.gamma * state.G - state.M
    lhs = float((diff * diff).sum())
    c_star = domain.poincare_constant
    rhs = (1.0 - kernel.l) * c_star ** 2 * _g_circ(
        state.gamma, state.M, state.Q, state.G, lambdas
    )
    return float(rhs) - lhs


@dataclass
class EnergySample:
    """All functionals at one sample time."""

    t: float
    e: float
    E_script: float
    E_mod: float
    g_circ: float
    Psi: float
    Chi: float
    L: float
    delay_int: float


def evaluate_sample(state, history, kernel, lambdas, eps1=0.0, eps2=0.0,
                    xi=0.0, sigma=0.0, dt=None) -> EnergySample:
    lambdas = np.asarray(lambdas, dtype=float)
    ut_sq = float(_ut_sq(state.v))
    grad_sq = float(_grad_sq(state.gamma, lambdas))
    g_circ = float(_g_circ(state.gamma, state.M, state.Q, state.G, lambdas))
    e_script = float(_script_energy(ut_sq, grad_sq, g_circ, state.G))
    d_int = delay_integral(history.window(), sigma, dt) if dt is not None else 0.0
    e_mod = e_script + 0.5 * xi * d_int
    psi = float(_psi(state.gamma, state.v))
    chi = float(_chi(state.gamma, state.v, state.M, state.G))
    return EnergySample(
        t=state.t,
        e=0.5 * (ut_sq + grad_sq),
        E_script=e_script,
        E_mod=e_mod,
        g_circ=g_circ,
        Psi=psi,
        Chi=chi,
        L=e_mod + eps1 * psi + eps2 * chi,
        delay_int=d_int,
    )


# ---------------------------------------------------------------------------
# trace-level evaluation
# ---------------------------------------------------------------------------

@dataclass
class EnergyTable:
    """Vectorized functionals along a sampled trace; the first eight entries
    are the fixed CSV columns."""

    t: np.ndarray
    e: np.ndarray
    E_script: np.ndarray
    E_mod: np.ndarray
    L: np.ndarray
    g_circ: np.ndarray
    delay_int: np.ndarray
    max_abs_gamma: np.ndarray
    Psi: np.ndarray
    Chi: np.ndarray
    ut_sq: np.ndarray
    grad_sq: np.ndarray
    delayed_sq: np.ndarray
    cross: np.ndarray
    comparison_margin: np.ndarray

    CSV_COLUMNS = ("t", "e", "E_script", "E_mod", "L", "g_circ", "delay_int", "max_abs_gamma")


def evaluate_trace(trace) -> EnergyTable:
    lambdas = trace.lambdas
    ut_sq = _ut_sq(trace.v)
    grad_sq = _grad_sq(trace.gamma, lambdas)
    g_circ = _g_circ(trace.gamma, trace.M, trace.Q, trace.G, lambdas)
    e_script = _script_energy(ut_sq, grad_sq, g_circ, trace.G)
    e_mod = e_script + 0.5 * trace.xi * trace.delay_int
    psi = _psi(trace.gamma, trace.v)
    chi = _chi(trace.gamma, trace.v, trace.M, trace.G)
    diff = trace.gamma * trace.G[:, None] - trace.M
    c_star = trace.config.domain.poincare_constant
    margin = (1.0 - trace.config.kernel.l) * c_star ** 2 * g_circ - (diff * diff).sum(axis=1)
    return EnergyTable(
        t=trace.t,
        e=0.5 * (ut_sq + grad_sq),
        E_script=e_script,
        E_mod=e_mod,
        L=e_mod + trace.eps1 * psi + trace.eps2 * chi,
        g_circ=g_circ,
        delay_int=trace.delay_int,
        max_abs_gamma=np.abs(trace.gamma).max(axis=1),
        Psi=psi,
        Chi=chi,
        ut_sq=ut_sq,
        grad_sq=grad_sq,
        delayed_sq=_ut_sq(trace.v_delayed),
        cross=(trace.v * trace.v_delayed).sum(axis=1),
        comparison_margin=margin,
    )


def energy_identity_residual(trace, table: EnergyTable = None):
    """Residual series of the exact energy balance

        dE/dt = (g' o grad u)/2 - g(t) ||grad u||^2 / 2
                - mu2 <u_t(t), u_t(t-tau)> - mu1 ||u_t||^2
                + (xi/2) ||u_t||^2 - (xi/2) e^{-sigma tau} ||u_t(t-tau)||^2
                - (sigma xi / 2) * delay integral,

    with (g' o grad u) = -beta (g o grad u) for the exponential kernel.
    dE/dt is the centered difference of E over the sampled grid, so the
    residual shrinks at least first order in dt; returns (t_interior, r)."""
    if table is None:
        table = evaluate_trace(trace)
    cfg = trace.config
    steps = trace.steps
    if trace.n_samples < 3:
        raise ValueError("need at least 3 samples for a centered difference")
    stride = np.diff(steps)
    if not np.all(stride == stride[0]):
        raise ValueError("energy residual requires uniformly strided samples")
    dts = stride[0] * cfg.dt

    kern = cfg.kernel
    gprime_circ = -kern.zeta * table.g_circ if kern.present else np.zeros_like(table.g_circ)
    g_t = kern.g(trace.t) if kern.present else np.zeros_like(trace.t)
    rhs = (
        0.5 * gprime_circ
        - 0.5 * g_t * table.grad_sq
        - cfg.mu2 * table.cross
        - cfg.mu1 * table.ut_sq
        + 0.5 * trace.xi * table.ut_sq
        - 0.5 * trace.xi * math.exp(-trace.sigma * cfg.tau) * table.delayed_sq
        - 0.5 * trace.sigma * trace.xi * trace.delay_int
    )
    dE = (table.E_mod[2:] - table.E_mod[:-2]) / (2.0 * dts)
    return trace.t[1:-1], dE - rhs[1:-1]


@dataclass
class PriorBound:
    C: float
    ok: bool
    worst_margin: float  # min over samples of C - E_script


def prior_bound(trace, table: EnergyTable = None, rel_slack: float = 1e-4) -> PriorBound:
    """Growth envelope for arbitrary feedback signs:

        E_script(t) <= ( |mu2|/2 * int_{-tau}^0 ||phi||^2 + E_script(0) )
                       * exp(2 (|mu2| + |mu1|) T)   for t in [0, T].

    rel_slack absorbs the stepper's O(dt^2) energy wobble, which matters only
    when the Gronwall factor is 1 (conservative runs)."""
    if table is None:
        table = evaluate_trace(trace)
    cfg = trace.config
    growth = math.exp(2.0 * (abs(cfg.mu2) + abs(cfg.mu1)) * cfg.t_end)
    C = (0.5 * abs(cfg.mu2) * trace.prehistory_sq + table.E_script[0]) * growth
    worst = float(np.min(C - table.E_script))
    ok = bool(np.all(table.E_script <= C * (1.0 + rel_slack) + 1e-300))
    return PriorBound(C=C, ok=ok, worst_margin=worst)


@dataclass
class EquivalenceReport:
    beta1: float          # lower constant, clipped at 0 when the chain degenerates
    beta2: float
    worst_lower: float    # min (L - beta1 E); meaningful only when beta1 > 0
    worst_upper: float    # min (beta2 E - L)
    ok: bool


def equivalence_margins(trace, table: EnergyTable = None) -> EquivalenceReport:
    """Two-sided comparability beta1 E <= L <= beta2 E along the trace, with
    constants from the Young/Poincare bounds

        eps1 |Psi| <= (eps1 C*/2)(||u_t||^2 + ||grad u||^2)
        eps2 |Chi| <= (eps2/2) ||u_t||^2 + (eps2 (1-l) C*^2 / 2)(g o grad u)

    and the component bounds ||u_t||^2 <= 2E, ||grad u||^2 <= 2E/l,
    (g o grad u) <= 2E.  The check asserts the inequalities pointwise, never
    the constants' optimality; a nonpositive beta1 is reported, not failed.
    """
    if table is None:
        table = evaluate_trace(trace)
    cfg = trace.config
    c_star = cfg.domain.poincare_constant
    l = cfg.kernel.l
    c = trace.eps1 * c_star * (1.0 + 1.0 / l) + trace.eps2 * (1.0 + (1.0 - l) * c_star ** 2)
    beta1 = max(0.0, 1.0 - c)
    beta2 = 1.0 + c
    lower = table.L - beta1 * table.E_mod
    upper = beta2 * table.E_mod - table.L
    scale = max(1.0, float(np.max(np.abs(table.E_mod))))
    ok_upper = bool(np.all(upper >= -1e-10 * scale))
    ok_lower = beta1 == 0.0 or bool(np.all(lower >= -1e-10 * scale))
    return EquivalenceReport(
        beta1=beta1,
        beta2=beta2,
        worst_lower=float(np.min(lower)),
        worst_upper=float(np.min(upper)),
        ok=ok_upper and ok_lower,
    )
