"""Exponential relaxation kernel g(t) = alpha*exp(-beta*t) and exact
incremental recurrences for convolution integrals against it.

The kernel family is restricted to single exponentials on purpose: the decay
condition g'(t) <= -zeta*g(t) then holds with equality for zeta = beta, and
every memory integral

    M(t) = int_0^t g(t-s) x(s) ds

admits the one-step recurrence

    M(t+dt) = exp(-beta*dt) * M(t) + trapezoid of g(t+dt-s) x(s) on [t, t+dt]

which is algebraically identical to a global composite-trapezoid evaluation
over the stored trajectory, so memory costs O(1) per step per mode.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


class KernelError(ValueError):
    """Base class for kernel validation failures."""


class NonPositiveMass(KernelError):
    """Kernel amplitude alpha must be positive."""


class NonPositiveRate(KernelError):
    """Kernel decay rate beta must be positive."""


class MassExceedsOne(KernelError):
    """Total kernel mass alpha/beta must stay below one (residual l > 0)."""


class NonPositiveT0(KernelError):
    """Accumulated-mass anchor t0 must be positive."""


@dataclass(frozen=True)
class KernelSpec:
    """Validated exponential kernel, or the 'absent' kernel g == 0.

    alpha : amplitude, g(0) = alpha
    beta  : decay rate (1/time)
    l     : residual elasticity 1 - alpha/beta (1.0 when absent)
    zeta  : sharp decay-condition constant, equals beta
    """

    alpha: float
    beta: float
    present: bool = True

    @property
    def l(self) -> float:
        if not self.present:
            return 1.0
        return 1.0 - self.alpha / self.beta

    @property
    def zeta(self) -> float:
        return self.beta if self.present else 0.0

    def g(self, t):
        """Pointwise kernel value; vectorizes over numpy arrays."""
        if not self.present:
            return 0.0 * t
        import numpy as np

        return self.alpha * np.exp(-self.beta * t)

    def total_mass(self) -> float:
        """int_0^inf g = alpha/beta (0 when absent)."""
        if not self.present:
            return 0.0
        return self.alpha / self.beta

    def decay_factor(self, dt: float) -> float:
        """exp(-beta*dt), the exact per-step attenuation of every memory
        integral."""
        if not self.present:
            return 0.0
        return math.exp(-self.beta * dt)


ABSENT_KERNEL = KernelSpec(0.0, 0.0, present=False)


def validate(alpha: float, beta: float) -> KernelSpec:
    """Check the admissibility conditions and build a KernelSpec.

    Requires alpha > 0, beta > 0 and alpha < beta so that the residual
    elasticity l = 1 - alpha/beta is positive.
    """
    if not alpha > 0.0:
        raise NonPositiveMass(f"kernel amplitude must be > 0, got alpha={alpha}")
    if not beta > 0.0:
        raise NonPositiveRate(f"kernel decay rate must be > 0, got beta={beta}")
    if alpha >= beta:
        raise MassExceedsOne(
            f"kernel mass alpha/beta={alpha / beta:g} >= 1; need alpha < beta"
        )
    return KernelSpec(float(alpha), float(beta))


def g0_up_to(spec: KernelSpec, t0: float) -> float:
    """Closed-form accumulated mass g0 = int_0^t0 g(s) ds.

    Monotone increasing in t0 and bounded by alpha/beta.
    """
    if not t0 > 0.0:
        raise NonPositiveT0(f"t0 must be > 0, got {t0}")
    if not spec.present:
        return 0.0
    return spec.alpha * (1.0 - math.exp(-spec.beta * t0)) / spec.beta


def advance_memory(M, x_old, x_new, dt: float, spec: KernelSpec):
    """One exact-weight trapezoid step of M(t) = int_0^t g(t-s) x(s) ds.

    M(t+dt) = e^{-beta dt} M(t) + (dt/2) (alpha*x_new + alpha*e^{-beta dt}*x_old)

    Elementwise over numpy arrays, so a whole mode vector advances in one
    call.  Iterating from M(0)=0 reproduces the composite trapezoid rule
    applied to s -> g(t-s) x(s) on the step grid, exactly (same weights, same
    nodes).  The same recurrence serves Q(t) = int g(t-s) x(s)^2 ds by
    passing squared samples.
    """
    if not dt > 0.0:
        raise KernelError(f"dt must be > 0, got {dt}")
    if not spec.present:
        return 0.0 * M
    decay = math.exp(-spec.beta * dt)
    half = 0.5 * dt * spec.alpha
    return decay * M + half * (x_new + decay * x_old)
