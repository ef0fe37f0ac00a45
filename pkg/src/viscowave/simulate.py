"""Time integration of the modal delay integro-differential system.

Inserting the sine-basis expansion u(x,t) = sum_j gamma_j(t) w_j(x) into the
weak form of the wave equation with exponential memory and delayed velocity
feedback decouples the spatial problem into, per mode j,

    gamma_j'' + mu1 gamma_j' + mu2 gamma_j'(t - tau)
        + lambda_j gamma_j - lambda_j int_0^t g(t-s) gamma_j(s) ds = 0.

The stepper is a central-difference scheme with the instantaneous damping
treated implicitly,

    (1 + mu1 dt/2) g^{n+1} = 2 g^n - (1 - mu1 dt/2) g^{n-1}
                             + dt^2 (-lam g^n + lam M^n - mu2 v^{n-m}),

with dt = tau/m so the delayed velocity v^{n-m} is an exact ring-buffer
lookup, velocities defined by the centered difference
v^n = (g^{n+1} - g^{n-1})/(2 dt), and the memory accumulators advanced once
per step by the exact exponential recurrence.  The whole scheme is second
order; see the self-convergence tests.
"""

from __future__ import annotations

import hashlib
import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from . import __version__
from .kernel import ABSENT_KERNEL, KernelSpec, advance_memory
from .spectral import DEFAULT_PANELS, Domain1D, ModeSet, resolve_coefficients

ODE_FORMS = ("convolution", "effective_stiffness")

# Test hook: when set, applied to the two-level-ahead position cache after
# every step, deliberately desynchronizing positions from memory/history so
# invariant checks can be shown to catch a broken stepper.
_debug_gamma_corruption = None


class Blowup(RuntimeError):
    """A modal coefficient left the overflow guard: the run is classified
    unstable, not erroneous.  Carries the time of first overflow and the
    partial trace accumulated so far (when raised by ``run``)."""

    def __init__(self, time: float, partial_trace=None):
        super().__init__(f"coefficient overflow at t={time:g}")
        self.time = time
        self.partial_trace = partial_trace


@dataclass(frozen=True)
class SimConfig:
    """Complete description of one simulation scenario.

    u0, u1 are preset names or coefficient tuples for the initial position /
    velocity; f0 describes the velocity prehistory on [-tau, 0] ("zero",
    "match_u1", "ramp", a spatial preset name, or a coefficient tuple, all
    constant in time except "ramp" which rises linearly to the initial
    velocity).  dt = tau/m by construction.
    """

    domain: Domain1D
    modes: int
    kernel: KernelSpec
    mu1: float
    mu2: float
    tau: float
    m: int
    t_end: float
    sample_every: int = 1
    u0: object = "zero"
    u1: object = "zero"
    f0: object = "match_u1"
    panels: int = DEFAULT_PANELS
    overflow_guard: float = 1e12
    ode_form: str = "convolution"
    lyap_t0: float = 1.0

    def __post_init__(self):
        if not self.tau > 0.0:
            raise ValueError(f"tau must be > 0, got {self.tau}")
        if self.m < 2:
            raise ValueError(f"steps per delay m must be >= 2, got {self.m}")
        if self.modes < 1:
            raise ValueError(f"modes must be >= 1, got {self.modes}")
        if self.t_end < 0.0:
            raise ValueError(f"t_end must be >= 0, got {self.t_end}")
        if self.sample_every < 1:
            raise ValueError(f"sample_every must be >= 1, got {self.sample_every}")
        if self.ode_form not in ODE_FORMS:
            raise ValueError(f"ode_form must be one of {ODE_FORMS}, got {self.ode_form!r}")
        if not self.overflow_guard > 0.0:
            raise ValueError("overflow_guard must be > 0")
        if not self.lyap_t0 > 0.0:
            raise ValueError("lyap_t0 must be > 0")

    @property
    def dt(self) -> float:
        return self.tau / self.m

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))

    def canonical_text(self) -> str:
        """Deterministic key-value dump of everything that determines the
        trajectory; hashed into the output metadata."""

        def fmt(v):
            if isinstance(v, str):
                return f'"{v}"'
            if isinstance(v, (tuple, list, np.ndarray)):
                return "[" + ", ".join(repr(float(x)) for x in v) + "]"
            if isinstance(v, float):
                return repr(v)
            return str(v)

        k = self.kernel
        kern = f"alpha={k.alpha!r} beta={k.beta!r}" if k.present else "none"
        pairs = [
            ("format", 1),
            ("domain.length", float(self.domain.length)),
            ("modes", self.modes),
            ("kernel", kern),
            ("mu1", float(self.mu1)),
            ("mu2", float(self.mu2)),
            ("tau", float(self.tau)),
            ("m", self.m),
            ("t_end", float(self.t_end)),
            ("sample_every", self.sample_every),
            ("u0", self.u0),
            ("u1", self.u1),
            ("f0", self.f0),
            ("panels", self.panels),
            ("overflow_guard", float(self.overflow_guard)),
            ("ode_form", self.ode_form),
            ("lyap_t0", float(self.lyap_t0)),
        ]
        return "\n".join(f"{name} = {fmt(value)}" for name, value in pairs)

    def hash(self) -> str:
        return hashlib.sha256(self.canonical_text().encode()).hexdigest()


class HistoryBuffer:
    """Ring buffer of the last m+1 modal velocity vectors on the step grid.

    Entries are addressed by absolute step index, so the lookup at lag
    exactly tau (m slots) can never be off by one; dt divides tau by
    construction.
    """

    def __init__(self, m: int, n_modes: int):
        self.m = m
        self.n_modes = n_modes
        self.data = np.zeros((m + 1, n_modes))
        self.newest = 0

    def seed(self, values: np.ndarray) -> None:
        """Install velocities for step indices -m..0 (rows oldest first)."""
        values = np.asarray(values, dtype=float)
        if values.shape != (self.m + 1, self.n_modes):
            raise ValueError(
                f"prehistory must have shape {(self.m + 1, self.n_modes)}, got {values.shape}"
            )
        cap = self.m + 1
        for i in range(-self.m, 1):
            self.data[i % cap] = values[i + self.m]
        self.newest = 0

    def get(self, index: int) -> np.ndarray:
        if not (self.newest - self.m <= index <= self.newest):
            raise IndexError(
                f"velocity at step {index} not retained (window "
                f"[{self.newest - self.m}, {self.newest}])"
            )
        return self.data[index % (self.m + 1)]

    def push(self, v: np.ndarray, index: int) -> None:
        if index != self.newest + 1:
            raise ValueError(f"pushes must be consecutive; expected {self.newest + 1}, got {index}")
        self.data[index % (self.m + 1)] = v
        self.newest = index

    def window(self) -> np.ndarray:
        """Velocities at steps newest-m .. newest, oldest first, shape (m+1, N)."""
        cap = self.m + 1
        order = np.arange(self.newest - self.m, self.newest + 1) % cap
        return self.data[order]

    def copy(self) -> "HistoryBuffer":
        hb = HistoryBuffer(self.m, self.n_modes)
        hb.data = self.data.copy()
        hb.newest = self.newest
        return hb


@dataclass
class ModalState:
    """Diagnostic-complete modal state at one grid time.

    v is the centered-difference velocity at time t, which pins down the
    following position, cached in gamma_next = gamma_prev + 2 dt v; the
    memory accumulators M (of gamma), Q (of gamma^2) and G (of the constant
    1, i.e. the quadrature-consistent accumulated kernel mass) are current
    for time t.
    """

    t: float
    step_index: int
    gamma: np.ndarray
    gamma_prev: np.ndarray
    gamma_next: np.ndarray
    v: np.ndarray
    M: np.ndarray
    Q: np.ndarray
    G: float

    def copy(self) -> "ModalState":
        return ModalState(
            self.t,
            self.step_index,
            self.gamma.copy(),
            self.gamma_prev.copy(),
            self.gamma_next.copy(),
            self.v.copy(),
            self.M.copy(),
            self.Q.copy(),
            self.G,
        )


def modal_rhs(state: ModalState, delayed_velocity, lambdas, config: SimConfig):
    """Acceleration coefficients gamma_j'' at the state's time.

    Convolution form: -lam*gamma + lam*M - mu1*v - mu2*delayed.  The
    effective-stiffness variant replaces the convolution by the accumulated
    kernel mass acting on the current position (comparison mode, not the
    default).
    """
    lambdas = np.asarray(lambdas, dtype=float)
    if config.ode_form == "convolution":
        elastic = -lambdas * state.gamma + lambdas * state.M
    else:
        elastic = -lambdas * (1.0 - state.G) * state.gamma
    return elastic - config.mu1 * state.v - config.mu2 * delayed_velocity


def _force_without_mu1(gamma, M, G, delayed_velocity, lambdas, config: SimConfig):
    """RHS of the position update; the mu1 term lives in the implicit
    factors of the central-difference scheme."""
    if config.ode_form == "convolution":
        elastic = -lambdas * gamma + lambdas * M
    else:
        elastic = -lambdas * (1.0 - G) * gamma
    return elastic - config.mu2 * delayed_velocity


def _check_guard(gamma, t: float, guard: float) -> None:
    peak = float(np.max(np.abs(gamma))) if gamma.size else 0.0
    if not math.isfinite(peak) or peak > guard:
        raise Blowup(t)


def _advance(state: ModalState, history: HistoryBuffer, config: SimConfig, lambdas) -> ModalState:
    """One full step t_n -> t_{n+1}; pushes v^{n+1} into the history."""
    dt = config.dt
    n = state.step_index
    g_cur = state.gamma_next          # position at t_{n+1}, already determined
    g_prev = state.gamma

    M1 = advance_memory(state.M, g_prev, g_cur, dt, config.kernel)
    Q1 = advance_memory(state.Q, g_prev * g_prev, g_cur * g_cur, dt, config.kernel)
    G1 = float(advance_memory(state.G, 1.0, 1.0, dt, config.kernel))

    delayed = history.get(n + 1 - config.m)
    force = _force_without_mu1(g_cur, M1, G1, delayed, lambdas, config)
    a = 1.0 + 0.5 * config.mu1 * dt
    b = 1.0 - 0.5 * config.mu1 * dt
    g_next = (2.0 * g_cur - b * g_prev + dt * dt * force) / a
    if _debug_gamma_corruption is not None:
        g_next = _debug_gamma_corruption(g_next)
    v1 = (g_next - g_prev) / (2.0 * dt)
    history.push(v1, n + 1)

    t1 = (n + 1) * dt
    _check_guard(g_cur, t1, config.overflow_guard)
    return ModalState(t1, n + 1, g_cur, g_prev, g_next, v1, M1, Q1, G1)


def step(state: ModalState, history: HistoryBuffer, config: SimConfig, lambdas=None):
    """Pure one-step transition: returns (state', history') without mutating
    the inputs.  ``run`` uses the same core in place."""
    if lambdas is None:
        lambdas = ModeSet(config.domain, config.modes).lambdas
    hb = history.copy()
    return _advance(state.copy(), hb, config, np.asarray(lambdas, dtype=float)), hb


def _history_grid(config: SimConfig, modes: ModeSet, v0: np.ndarray) -> np.ndarray:
    """Velocity prehistory phi_j(s) on s = -tau + i*dt, i = 0..m (rows oldest
    first).  Warns when phi(0) disagrees with the projected initial
    velocity."""
    m = config.m
    spec = config.f0
    if isinstance(spec, str) and spec == "zero":
        grid = np.zeros((m + 1, modes.n))
    elif isinstance(spec, str) and spec == "match_u1":
        grid = np.tile(v0, (m + 1, 1))
    elif isinstance(spec, str) and spec == "ramp":
        ramp = np.linspace(0.0, 1.0, m + 1)[:, None]
        grid = ramp * v0[None, :]
    else:
        coeffs = resolve_coefficients(spec, modes, config.panels)
        grid = np.tile(coeffs, (m + 1, 1))
    scale = max(1.0, float(np.max(np.abs(v0))) if v0.size else 0.0)
    mismatch = float(np.max(np.abs(grid[-1] - v0))) if v0.size else 0.0
    if mismatch > 1e-9 * scale:
        warnings.warn(
            f"history preset {spec!r} disagrees with the initial velocity at s=0 "
            f"(max |phi(0) - v0| = {mismatch:g}); the seeded history wins at the "
            "delayed lookup",
            UserWarning,
            stacklevel=3,
        )
    return grid


def initial_state(config: SimConfig, modes: ModeSet, history: HistoryBuffer) -> ModalState:
    """Project initial data, seed the prehistory, and bootstrap the first
    position by the Taylor start gamma^1 = gamma^0 + dt v^0 + dt^2/2 a^0."""
    gamma0 = resolve_coefficients(config.u0, modes, config.panels)
    v0 = resolve_coefficients(config.u1, modes, config.panels)
    history.seed(_history_grid(config, modes, v0))

    dt = config.dt
    zeros = np.zeros(modes.n)
    boot = ModalState(0.0, 0, gamma0, gamma0.copy(), gamma0.copy(), v0, zeros, zeros.copy(), 0.0)
    accel0 = modal_rhs(boot, history.get(-config.m), modes.lambdas, config)
    gamma1 = gamma0 + dt * v0 + 0.5 * dt * dt * accel0
    # synthetic previous level consistent with the centered velocity at t=0
    gamma_prev = gamma1 - 2.0 * dt * v0
    return ModalState(0.0, 0, gamma0, gamma_prev, gamma1, v0, zeros, zeros.copy(), 0.0)


@dataclass
class Trace:
    """Sampled run output: raw modal snapshots plus the delay-window scalars
    that cannot be reconstructed after the ring buffer moves on."""

    config: SimConfig
    lyap: object            # LyapunovParams or None (kernel absent)
    sigma: float
    xi: float
    eps1: float
    eps2: float
    lambdas: np.ndarray
    t: np.ndarray           # (S,)
    steps: np.ndarray       # (S,) int step indices
    gamma: np.ndarray       # (S, N)
    v: np.ndarray
    M: np.ndarray
    Q: np.ndarray
    v_delayed: np.ndarray   # velocity vector at t - tau per sample
    G: np.ndarray           # (S,) accumulated kernel mass
    delay_int: np.ndarray   # (S,) trapezoid of e^{sigma(s-t)} ||u_t(s)||^2 over [t-tau, t]
    prehistory_sq: float    # trapezoid of ||phi(s)||^2 over [-tau, 0]
    blowup_time: float = None
    config_hash: str = ""
    version: str = __version__

    @property
    def n_samples(self) -> int:
        return self.t.size

    def metadata(self) -> dict:
        cfg = self.config
        return {
            "version": self.version,
            "config_hash": self.config_hash,
            "dt": cfg.dt,
            "m": cfg.m,
            "tau": cfg.tau,
            "modes": cfg.modes,
            "quadrature_panels": cfg.panels,
            "sample_every": cfg.sample_every,
            "sigma": self.sigma,
            "xi": self.xi,
            "eps1": self.eps1,
            "eps2": self.eps2,
            "ode_form": cfg.ode_form,
        }


def resolve_lyapunov(config: SimConfig):
    """Certified-decay parameters used for the run's modified energy and
    Lyapunov diagnostics: the constructive chain when memory is present,
    all-zero otherwise (which reproduces the plain history-augmented
    energy)."""
    if not config.kernel.present:
        return None
    from .analysis import select_params

    return select_params(
        config.kernel,
        config.domain,
        config.tau,
        t0=config.lyap_t0,
        mu=abs(config.mu2),
    )


def run(config: SimConfig, lyap="auto") -> Trace:
    """Integrate the scenario and return the sampled trace.

    Deterministic: identical configs give identical traces.  Raises Blowup
    (with the partial trace attached) when a coefficient exceeds the
    overflow guard.
    """
    modes = ModeSet(config.domain, config.modes)
    lambdas = modes.lambdas
    history = HistoryBuffer(config.m, modes.n)
    state = initial_state(config, modes, history)

    if lyap == "auto":
        lyap = resolve_lyapunov(config)
    sigma = 0.0 if lyap is None else lyap.sigma
    xi = 0.0 if lyap is None else lyap.xi
    eps1 = 0.0 if lyap is None else lyap.eps1
    eps2 = 0.0 if lyap is None else lyap.eps2

    dt = config.dt
    m = config.m
    # fixed delay-integral weights: trapezoid x exponential tilt on the window
    offsets = np.arange(-m, 1, dtype=float) * dt
    w_delay = np.full(m + 1, dt)
    w_delay[0] = w_delay[-1] = 0.5 * dt
    w_delay = w_delay * np.exp(sigma * offsets)

    pre_window = history.window()
    w_plain = np.full(m + 1, dt)
    w_plain[0] = w_plain[-1] = 0.5 * dt
    prehistory_sq = float(w_plain @ (pre_window * pre_window).sum(axis=1))

    samples = []

    def emit(st: ModalState):
        win = history.window()
        ut2 = (win * win).sum(axis=1)
        samples.append(
            (
                st.t,
                st.step_index,
                st.gamma.copy(),
                st.v.copy(),
                st.M.copy(),
                st.Q.copy(),
                win[0].copy(),
                st.G,
                float(w_delay @ ut2),
            )
        )

    blowup_time = None
    n_steps = config.n_steps
    emit(state)
    try:
        for n in range(1, n_steps + 1):
            state = _advance(state, history, config, lambdas)
            if n % config.sample_every == 0 or n == n_steps:
                emit(state)
    except Blowup as b:
        blowup_time = b.time

    trace = Trace(
        config=config,
        lyap=lyap,
        sigma=sigma,
        xi=xi,
        eps1=eps1,
        eps2=eps2,
        lambdas=lambdas,
        t=np.array([s[0] for s in samples]),
        steps=np.array([s[1] for s in samples], dtype=int),
        gamma=np.array([s[2] for s in samples]),
        v=np.array([s[3] for s in samples]),
        M=np.array([s[4] for s in samples]),
        Q=np.array([s[5] for s in samples]),
        v_delayed=np.array([s[6] for s in samples]),
        G=np.array([s[7] for s in samples]),
        delay_int=np.array([s[8] for s in samples]),
        prehistory_sq=prehistory_sq,
        blowup_time=blowup_time,
        config_hash=config.hash(),
    )
    if blowup_time is not None:
        raise Blowup(blowup_time, partial_trace=trace)
    return trace


def rescale_initial_data(config: SimConfig, factor: float) -> SimConfig:
    """Scale the initial data by a constant.  Coefficient tuples scale
    directly; the history presets tied to u1 ("zero", "match_u1", "ramp")
    scale implicitly and pass through; fixed-shape spatial presets cannot
    be rescaled."""

    def scale(v, u1_relative=False):
        if isinstance(v, str):
            if u1_relative and v in ("zero", "match_u1", "ramp"):
                return v
            raise ValueError("cannot rescale a named preset; use coefficient tuples")
        return tuple(float(factor) * float(x) for x in v)

    return replace(
        config,
        u0=scale(config.u0),
        u1=scale(config.u1),
        f0=scale(config.f0, u1_relative=True),
    )
