"""Closed-form Dirichlet eigenpairs on (0, L) and L2 projection onto the
first N sine modes.

lambda_j = (j*pi/L)^2,  w_j(x) = sqrt(2/L) sin(j*pi*x/L),  j = 1, 2, ...

The w_j are L2-orthonormal with grad-orthogonality
int w_j' w_k' = lambda_j delta_jk, and the Poincare constant of the interval
is sharp: C* = L/pi, attained by mode 1.  Projections use composite Simpson
quadrature with a fixed, recorded panel count so runs reproduce bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

DEFAULT_PANELS = 4096


class BadIndex(ValueError):
    """Mode indices are 1-based."""


class LengthMismatch(ValueError):
    """Coefficient vector length must equal the mode count."""


@dataclass(frozen=True)
class Domain1D:
    """The interval (0, length) with homogeneous Dirichlet ends."""

    length: float

    def __post_init__(self):
        if not self.length > 0.0:
            raise ValueError(f"domain length must be > 0, got {self.length}")

    @property
    def poincare_constant(self) -> float:
        """Sharp constant C* with ||u||_2 <= C* ||u'||_2; equals L/pi."""
        return self.length / math.pi


class ModeSet:
    """First n Dirichlet eigenpairs of -d^2/dx^2 on (0, L)."""

    def __init__(self, domain: Domain1D, n: int):
        if n < 1:
            raise BadIndex(f"need at least one mode, got n={n}")
        self.domain = domain
        self.n = int(n)
        j = np.arange(1, self.n + 1, dtype=float)
        self.lambdas = (j * math.pi / domain.length) ** 2

    def basis_matrix(self, xs) -> np.ndarray:
        """Values w_j(x_i), shape (n, len(xs))."""
        xs = np.asarray(xs, dtype=float)
        L = self.domain.length
        j = np.arange(1, self.n + 1, dtype=float)[:, None]
        return math.sqrt(2.0 / L) * np.sin(j * math.pi * xs[None, :] / L)


def eigenpair(domain: Domain1D, j: int):
    """Return (lambda_j, w_j) with w_j evaluable at scalars or arrays.

    w_j vanishes at both endpoints and is L2-normalized on (0, L).
    """
    if j < 1:
        raise BadIndex(f"mode index must be >= 1, got {j}")
    L = domain.length
    lam = (j * math.pi / L) ** 2
    amp = math.sqrt(2.0 / L)

    def w(x):
        return amp * np.sin(j * math.pi * np.asarray(x, dtype=float) / L)

    return lam, w


def simpson_weights(L: float, panels: int):
    """Nodes and weights of composite Simpson on [0, L] with `panels`
    subintervals (must be even)."""
    if panels < 2 or panels % 2 != 0:
        raise ValueError(f"Simpson panel count must be even and >= 2, got {panels}")
    xs = np.linspace(0.0, L, panels + 1)
    w = np.ones(panels + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    w *= L / panels / 3.0
    return xs, w


def project(f, modes: ModeSet, panels: int = DEFAULT_PANELS) -> np.ndarray:
    """Coefficients c_j = int_0^L f(x) w_j(x) dx, j = 1..n, by composite
    Simpson with the given panel count."""
    xs, w = simpson_weights(modes.domain.length, panels)
    fx = np.asarray(f(xs), dtype=float)
    basis = modes.basis_matrix(xs)
    return basis @ (w * fx)


def reconstruct(coeffs, modes: ModeSet, xs) -> np.ndarray:
    """Pointwise synthesis u(x_i) = sum_j c_j w_j(x_i); linear in coeffs."""
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.shape != (modes.n,):
        raise LengthMismatch(
            f"expected {modes.n} coefficients, got shape {coeffs.shape}"
        )
    return coeffs @ modes.basis_matrix(xs)


# ---------------------------------------------------------------------------
# Initial-data presets.  Arbitrary functions enter only through explicit
# coefficient lists, which keeps config files language-agnostic.
# ---------------------------------------------------------------------------

def preset_function(name: str, domain: Domain1D):
    """Named spatial profile on [0, L] used by the config grammar.

    "zero"      -> 0
    "sine K"    -> sin(K pi x / L)          (K a positive integer)
    "parabola"  -> x (L - x)
    "bump"      -> exp(1 - 1/(1 - r^2)),  r = 2x/L - 1   (C-infinity, compact)
    """
    L = domain.length
    parts = name.split()
    if name == "zero":
        return lambda x: np.zeros_like(np.asarray(x, dtype=float))
    if parts[0] == "sine" and len(parts) == 2:
        try:
            k = int(parts[1])
        except ValueError:
            raise ValueError(f"bad sine preset {name!r}; use e.g. 'sine 1'")
        if k < 1:
            raise ValueError(f"sine preset index must be >= 1, got {k}")
        return lambda x: np.sin(k * math.pi * np.asarray(x, dtype=float) / L)
    if name == "parabola":
        return lambda x: np.asarray(x, dtype=float) * (L - np.asarray(x, dtype=float))
    if name == "bump":

        def bump(x):
            x = np.asarray(x, dtype=float)
            r = 2.0 * x / L - 1.0
            out = np.zeros_like(r)
            inside = np.abs(r) < 1.0
            out[inside] = np.exp(1.0 - 1.0 / (1.0 - r[inside] ** 2))
            return out

        return bump
    raise ValueError(f"unknown preset {name!r}")


def resolve_coefficients(value, modes: ModeSet, panels: int = DEFAULT_PANELS) -> np.ndarray:
    """Turn a preset name or explicit coefficient list into a length-n
    coefficient vector.  Lists shorter than n are zero-padded; longer lists
    are rejected."""
    if isinstance(value, str):
        return project(preset_function(value, modes.domain), modes, panels)
    coeffs = np.asarray(value, dtype=float)
    if coeffs.ndim != 1 or coeffs.size > modes.n:
        raise LengthMismatch(
            f"coefficient list length {coeffs.size} exceeds mode count {modes.n}"
        )
    out = np.zeros(modes.n)
    out[: coeffs.size] = coeffs
    return out
