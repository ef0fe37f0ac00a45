"""viscowave: modal simulation and stability analysis of a viscoelastic wave
equation with interior delayed-velocity feedback on a 1D interval.

The displacement field is expanded in the Dirichlet sine eigenbasis; each
modal coefficient obeys a delay integro-differential equation coupling an
exponential-memory convolution, instantaneous damping and a lagged velocity
term.  The package integrates that system, evaluates the associated energy /
Lyapunov functionals with runtime invariant checks, and derives certified
feedback-size thresholds for exponential decay.
"""

__version__ = "0.1.0"

from .kernel import KernelSpec, ABSENT_KERNEL, validate, g0_up_to, advance_memory
from .spectral import Domain1D, ModeSet, eigenpair, project, reconstruct
from .simulate import SimConfig, ModalState, HistoryBuffer, Trace, Blowup, run, step
from .analysis import (
    LyapunovParams,
    DecayFit,
    derive_constants,
    select_params,
    theoretical_threshold,
    fit_decay,
    empirical_threshold,
)

__all__ = [
    "__version__",
    "KernelSpec",
    "ABSENT_KERNEL",
    "validate",
    "g0_up_to",
    "advance_memory",
    "Domain1D",
    "ModeSet",
    "eigenpair",
    "project",
    "reconstruct",
    "SimConfig",
    "ModalState",
    "HistoryBuffer",
    "Trace",
    "Blowup",
    "run",
    "step",
    "LyapunovParams",
    "DecayFit",
    "derive_constants",
    "select_params",
    "theoretical_threshold",
    "fit_decay",
    "empirical_threshold",
]
