"""Constructive stability thresholds, decay-rate fitting, and empirical
threshold bracketing.

The certified chain closes the generic estimate constants explicitly and
then picks each free parameter deterministically inside its admissible
window:

    delta1 = l/4                          (makes the grad-energy coefficient -l/2)
    C1 = max(1, mu^2 C*^2 / l)            (Young + Poincare on the feedback term)
    C2 = (1-l) C*^2 / l                   (Young + comparison inequality, delta1 = l/4)
    C3 = (1-l)/4,  C4 = g(0) C*^2 / 4,  C5 = mu^2 (1-l) C*^2 / 4
    C6 = C3 + C5,  C7 = C4

    delta2 = min(g0/4, l g0 / (16 C1)) / 2
    eps2   = delta2 / (4 C7)
    eps1   = midpoint of (eps2 g0 / (8 C1), eps2 (g0 - 2 delta2) / (2 C1))
    k1 = eps2 (g0 - delta2) - eps1 C1,   k2 = eps1 C1 + eps2 delta2
    sigma  = ln(k1/k2) / (2 tau)          (so e^{sigma tau} = sqrt(k1/k2) < k1/k2)
    xi     = midpoint of (2 k2 e^{sigma tau}, 2 k1)
    a      = min(2 k1 - xi, xi e^{-sigma tau} - 2 k2) > 0

Feedback of magnitude |mu| < a makes the Lyapunov derivative strictly
negative.  Because C1, C5 themselves contain mu^2 while a bounds |mu|, the
usable threshold is the self-consistent fixed point
a* = sup { mu >= 0 : mu < a(mu) }, found by bisection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace as dc_replace

import numpy as np

from .kernel import KernelError, KernelSpec, g0_up_to, validate as validate_kernel
from .spectral import Domain1D
from . import diagnostics
from . import simulate as sim


class AnalysisError(ValueError):
    pass


class InfeasibleConstants(AnalysisError):
    """A parameter window came out empty (requires a degenerate kernel)."""


class NonPositiveEnergy(AnalysisError):
    """Log-linear fitting needs strictly positive energies."""


class WindowTooShort(AnalysisError):
    """Decay fits require at least 10 samples in the window."""


class SameClassAtEndpoints(AnalysisError):
    """Threshold bisection needs one stable and one unstable endpoint."""


@dataclass(frozen=True)
class EstimateConstants:
    """Explicit closure of the generic constants in the derivative
    estimates of the auxiliary functionals."""

    delta1: float
    C1: float
    C2: float
    C3: float
    C4: float
    C5: float
    C6: float
    C7: float


def derive_constants(kernel: KernelSpec, domain: Domain1D, mu: float) -> EstimateConstants:
    """Close the generic constants for trial feedback magnitude |mu|."""
    c_star = domain.poincare_constant
    l = kernel.l
    g_at_0 = kernel.alpha if kernel.present else 0.0
    delta1 = l / 4.0
    C1 = max(1.0, mu * mu * c_star ** 2 / l)
    C2 = (1.0 - l) * c_star ** 2 / l
    C3 = (1.0 - l) / 4.0
    C4 = g_at_0 * c_star ** 2 / 4.0
    C5 = mu * mu * (1.0 - l) * c_star ** 2 / 4.0
    return EstimateConstants(delta1, C1, C2, C3, C4, C5, C3 + C5, C4)


@dataclass(frozen=True)
class InequalityRow:
    name: str
    lhs: float
    rhs: float
    satisfied: bool


@dataclass(frozen=True)
class LyapunovParams:
    """Certified parameter set; all windows verified at construction."""

    g0: float
    t0: float
    tau: float
    mu: float
    l: float
    c_star: float
    constants: EstimateConstants
    delta2: float
    eps1: float
    eps2: float
    sigma: float
    xi: float
    k1: float
    k2: float
    a: float

    def inequality_rows(self, mu: float = None) -> list:
        """The four solvability inequalities with both sides evaluated at
        feedback magnitude |mu| (defaults to the construction mu).  All four
        hold exactly when |mu| < a."""
        if mu is None:
            mu = self.mu
        mu = abs(mu)
        C1, C7 = self.constants.C1, self.constants.C7
        exp_st = math.exp(self.sigma * self.tau)
        rows = [
            InequalityRow(
                "damping_coefficient",
                mu / 2.0 + self.xi / 2.0 + self.eps1 * C1 + self.eps2 * (self.delta2 - self.g0),
                0.0,
                mu / 2.0 + self.xi / 2.0 + self.eps1 * C1 + self.eps2 * (self.delta2 - self.g0) < 0.0,
            ),
            InequalityRow(
                "gradient_coefficient",
                self.eps2 * self.delta2 - self.eps1 * self.l / 2.0,
                0.0,
                self.eps2 * self.delta2 - self.eps1 * self.l / 2.0 < 0.0,
            ),
            InequalityRow(
                "memory_sign",
                0.5 - self.eps2 * C7 / self.delta2,
                0.0,
                0.5 - self.eps2 * C7 / self.delta2 > 0.0,
            ),
            InequalityRow(
                "delayed_coefficient",
                self.eps1 * C1 + self.eps2 * self.delta2 + mu / 2.0 - self.xi / (2.0 * exp_st),
                0.0,
                self.eps1 * C1 + self.eps2 * self.delta2 + mu / 2.0 - self.xi / (2.0 * exp_st) < 0.0,
            ),
        ]
        return rows

    def all_satisfied(self, mu: float = None) -> bool:
        return all(r.satisfied for r in self.inequality_rows(mu))


def select_params(kernel: KernelSpec, domain: Domain1D, tau: float, t0: float, mu: float) -> LyapunovParams:
    """Run the deterministic parameter chain; every free choice is pinned to
    the half / midpoint / geometric-mean of its window."""
    if not kernel.present:
        raise InfeasibleConstants("the decay construction requires a memory kernel")
    g0 = g0_up_to(kernel, t0)
    if not g0 > 0.0:
        raise InfeasibleConstants(f"accumulated kernel mass must be positive, got {g0}")
    mu = abs(mu)
    consts = derive_constants(kernel, domain, mu)
    l = kernel.l

    delta2 = 0.5 * min(g0 / 4.0, l * g0 / (16.0 * consts.C1))
    eps2 = delta2 / (4.0 * consts.C7)
    lo = eps2 * g0 / (8.0 * consts.C1)
    hi = eps2 * (g0 - 2.0 * delta2) / (2.0 * consts.C1)
    if not lo < hi:
        raise InfeasibleConstants(f"empty eps1 window ({lo}, {hi})")
    eps1 = 0.5 * (lo + hi)

    k1 = eps2 * (g0 - delta2) - eps1 * consts.C1
    k2 = eps1 * consts.C1 + eps2 * delta2
    if not (k1 > k2 > 0.0):
        raise InfeasibleConstants(f"need k1 > k2 > 0, got k1={k1}, k2={k2}")

    sigma = math.log(k1 / k2) / (2.0 * tau)
    exp_st = math.exp(sigma * tau)  # = sqrt(k1/k2)
    xi_lo, xi_hi = 2.0 * k2 * exp_st, 2.0 * k1
    if not xi_lo < xi_hi:
        raise InfeasibleConstants(f"empty xi window ({xi_lo}, {xi_hi})")
    xi = 0.5 * (xi_lo + xi_hi)

    a = min(2.0 * k1 - xi, xi / exp_st - 2.0 * k2)
    params = LyapunovParams(
        g0=g0, t0=t0, tau=tau, mu=mu, l=l, c_star=domain.poincare_constant,
        constants=consts, delta2=delta2, eps1=eps1, eps2=eps2,
        sigma=sigma, xi=xi, k1=k1, k2=k2, a=a,
    )
    if not a > 0.0:
        raise InfeasibleConstants(f"threshold came out nonpositive: a={a}")
    rows = params.inequality_rows(mu=0.0)
    if not (rows[1].satisfied and rows[2].satisfied):
        raise InfeasibleConstants("mu-independent inequalities failed under substitution")
    return params


def theoretical_threshold(kernel: KernelSpec, domain: Domain1D, tau: float, t0: float,
                          tol: float = 1e-10) -> float:
    """Self-consistent feedback threshold a* = sup { mu : mu < a(mu) }.

    a(mu) is nonincreasing in mu (it enters only through C1, C5), so
    f(mu) = a(mu) - mu has a unique sign change, bracketed on
    [0, 2 k1(mu=0)]; bisection to `tol` is deterministic."""
    p0 = select_params(kernel, domain, tau, t0, mu=0.0)
    if not p0.a > 0.0:
        return 0.0

    def excess(mu: float) -> float:
        return select_params(kernel, domain, tau, t0, mu=mu).a - mu

    lo, hi = 0.0, 2.0 * p0.k1
    if excess(hi) >= 0.0:
        return hi
    n_iter = max(1, math.ceil(math.log2((hi - lo) / tol)))
    for _ in range(n_iter):
        mid = 0.5 * (lo + hi)
        if excess(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def threshold_tau_report(kernel: KernelSpec, domain: Domain1D, taus, t0: float):
    """Observed a*(tau) profile; monotone nonincrease is plausible but not
    claimed, so violations are reported rather than asserted."""
    values = [theoretical_threshold(kernel, domain, float(tau), t0) for tau in taus]
    diffs = np.diff(values)
    return values, bool(np.all(diffs <= 1e-12))


# ---------------------------------------------------------------------------
# decay fitting
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DecayFit:
    lambda_est: float
    K_est: float
    r2: float
    window: tuple
    n_samples: int


def fit_log_linear(t, E, window) -> DecayFit:
    """Least-squares line on (t, ln E) inside the window; lambda = -slope,
    K anchored at the first window sample so E_fit = K e^{-lambda (t - t_first)}.

    Zero-variance convention: an exactly flat series reports lambda = 0 with
    r2 = 1 (a perfect fit by the constant)."""
    t = np.asarray(t, dtype=float)
    E = np.asarray(E, dtype=float)
    w0, w1 = window
    mask = (t >= w0) & (t <= w1)
    if int(mask.sum()) < 10:
        raise WindowTooShort(f"only {int(mask.sum())} samples in window {window}; need >= 10")
    tw = t[mask]
    Ew = E[mask]
    if np.any(Ew <= 0.0):
        raise NonPositiveEnergy("energy must be strictly positive on the fit window")
    y = np.log(Ew)
    ybar = y.mean()
    tbar = tw.mean()
    sstot = float(((y - ybar) ** 2).sum())
    if sstot <= 1e-26 * tw.size * max(1.0, ybar * ybar):
        return DecayFit(0.0, float(math.exp(ybar)), 1.0, (w0, w1), int(tw.size))
    slope = float(((tw - tbar) * (y - ybar)).sum() / ((tw - tbar) ** 2).sum())
    intercept = ybar - slope * tbar
    ssres = float(((y - (intercept + slope * tw)) ** 2).sum())
    lam = -slope
    K = math.exp(intercept + slope * tw[0])
    return DecayFit(lam, K, 1.0 - ssres / sstot, (w0, w1), int(tw.size))


def fit_decay(trace, window) -> DecayFit:
    """Fit the run's modified energy; accepts a Trace or a (t, E) pair."""
    if isinstance(trace, sim.Trace):
        table = diagnostics.evaluate_trace(trace)
        return fit_log_linear(table.t, table.E_mod, window)
    t, E = trace
    return fit_log_linear(t, E, window)


# ---------------------------------------------------------------------------
# empirical stability threshold
# ---------------------------------------------------------------------------

_AXIS_PARAMS = ("mu1", "mu2", "tau", "alpha", "beta")


def apply_parameter(config: sim.SimConfig, name: str, value: float) -> sim.SimConfig:
    """Substitute one sweepable parameter into a scenario; invalid points
    surface as AnalysisError so sweeps can record them in-row."""
    if name not in _AXIS_PARAMS:
        raise AnalysisError(f"unknown sweep parameter {name!r}; choose from {_AXIS_PARAMS}")
    try:
        if name in ("mu1", "mu2"):
            return dc_replace(config, **{name: float(value)})
        if name == "tau":
            return dc_replace(config, tau=float(value))
        kern = config.kernel
        if not kern.present:
            raise AnalysisError(f"cannot sweep kernel parameter {name!r} with kernel absent")
        alpha = float(value) if name == "alpha" else kern.alpha
        beta = float(value) if name == "beta" else kern.beta
        return dc_replace(config, kernel=validate_kernel(alpha, beta))
    except (KernelError, ValueError) as exc:
        raise AnalysisError(f"{name}={value}: {exc}")


@dataclass(frozen=True)
class ClassifiedPoint:
    value: float
    outcome: str          # "stable" or "unstable"
    lambda_est: float     # nan when the run blew up
    r2: float
    blowup_time: float    # nan when the run completed


def classify_run(config: sim.SimConfig, window=None, r2_gate: float = 0.9) -> ClassifiedPoint:
    """Stability classifier: unstable iff the run overflows or the fitted
    energy rate is negative with a confident fit (r2 >= gate)."""
    if window is None:
        window = (0.25 * config.t_end, config.t_end)
    try:
        trace = sim.run(config)
    except sim.Blowup as b:
        return ClassifiedPoint(math.nan, "unstable", math.nan, math.nan, b.time)
    table = diagnostics.evaluate_trace(trace)
    try:
        fit = fit_log_linear(table.t, table.E_mod, window)
    except NonPositiveEnergy:
        # energy hit exact zero: nothing left to grow
        return ClassifiedPoint(math.nan, "stable", math.inf, 1.0, math.nan)
    outcome = "unstable" if (fit.lambda_est < 0.0 and fit.r2 >= r2_gate) else "stable"
    return ClassifiedPoint(math.nan, outcome, fit.lambda_est, fit.r2, math.nan)


def empirical_threshold(config: sim.SimConfig, bracket, param: str = "mu2",
                        window=None, tol: float = 1e-3):
    """Bisect the parameter between a stable and an unstable endpoint.

    Returns (value, audit) where audit lists every classified point in
    evaluation order."""
    lo, hi = float(bracket[0]), float(bracket[1])
    audit = []

    def classify(value: float) -> str:
        point = classify_run(apply_parameter(config, param, value), window)
        audit.append(dc_replace(point, value=value))
        return point.outcome

    c_lo = classify(lo)
    c_hi = classify(hi)
    if c_lo == c_hi:
        raise SameClassAtEndpoints(
            f"{param}={lo} and {param}={hi} both classified {c_lo!r}"
        )
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if classify(mid) == c_lo:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi), audit
