"""Two-step position-only integrators for y'' = -w0^2 y - g y' + f(t).

Both variants have the form

    y_{n+1} = a y_n - b y_{n-1} + int_{-dt}^{dt} h(tau) f(t_n + tau) dtau.

The ETD variant propagates the damped oscillator exactly; the Verlet variant
uses a = 2, b = 1 and h = dt - |tau| and leaves the linear terms in f.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from ..model import ModelParams, RegimeError, omega_gamma


class Integrator(enum.Enum):
    ETD = "etd"
    VERLET = "verlet"


ETD = Integrator.ETD
VERLET = Integrator.VERLET

_GL_X, _GL_W = np.polynomial.legendre.leggauss(24)


@dataclass(frozen=True)
class StepperCoeffs:
    """Coefficients (a, b) and weight function h of the two-step scheme."""

    a: float
    b: float
    kind: Integrator
    gamma: float
    omega: float
    dt: float

    def h(self, tau):
        """Weight function on [-dt, dt]; vanishes at both ends."""
        tau = np.asarray(tau, dtype=float)
        r = self.dt - np.abs(tau)
        if self.kind is VERLET:
            out = r
        else:
            out = np.exp(-0.5 * self.gamma * (self.dt - tau)) * np.sin(self.omega * r) / self.omega
        return np.asarray(out)[()] if tau.ndim == 0 else out

    def chi(self, s):
        """Impulse response of the linear part used by the one-step start."""
        s = np.asarray(s, dtype=float)
        if self.kind is VERLET:
            out = s
        else:
            out = np.exp(-0.5 * self.gamma * s) * np.sin(self.omega * s) / self.omega
        return np.asarray(out)[()] if s.ndim == 0 else out

    def integrate(self, f, lo: float, hi: float):
        """Gauss-Legendre quadrature of h(tau) f(tau) over [lo, hi] inside one half."""
        x = 0.5 * (hi - lo) * _GL_X + 0.5 * (hi + lo)
        w = 0.5 * (hi - lo) * _GL_W
        return np.sum(w * self.h(x) * f(x), axis=-1)


def stepper_coeffs(params: ModelParams, dt: float, integrator: Integrator = ETD) -> StepperCoeffs:
    """Coefficients of the two-step integrator.

    ETD: a = 2 cos(w_g dt) exp(-g dt/2), b = exp(-g dt),
    h(tau) = exp(-g (dt - tau)/2) sin(w_g (dt - |tau|)) / w_g.
    Verlet: a = 2, b = 1, h(tau) = dt - |tau|.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    if integrator is VERLET:
        w = math.sqrt(params.omega0 ** 2 - params.gamma ** 2 / 4) if params.underdamped else float("nan")
        return StepperCoeffs(2.0, 1.0, VERLET, params.gamma, w, dt)
    if not params.underdamped:
        raise RegimeError("ETD coefficients require the underdamped regime")
    w = omega_gamma(params)
    g = params.gamma
    return StepperCoeffs(2.0 * math.cos(w * dt) * math.exp(-0.5 * g * dt), math.exp(-g * dt),
                         ETD, g, w, dt)


def quadratic_basis(tau, dt: float):
    """Lagrange basis on nodes (-dt, 0, dt), shape (3, ...)."""
    x = np.asarray(tau, dtype=float) / dt
    return np.stack([0.5 * x * (x - 1.0), 1.0 - x * x, 0.5 * x * (x + 1.0)])


def hat_basis(tau, dt: float):
    """Piecewise-linear basis on nodes (-dt, 0, dt), shape (3, ...)."""
    x = np.asarray(tau, dtype=float) / dt
    return np.stack([np.maximum(-x, 0.0), 1.0 - np.abs(x), np.maximum(x, 0.0)])


def interpolation_weights(coeffs: StepperCoeffs, basis=quadratic_basis) -> np.ndarray:
    """u_j = int h(tau) l_j(tau) dtau for a basis on (-dt, 0, dt)."""
    dt = coeffs.dt
    left = coeffs.integrate(lambda x: basis(x, dt), -dt, 0.0)
    right = coeffs.integrate(lambda x: basis(x, dt), 0.0, dt)
    return left + right


def homogeneous_profile(coeffs: StepperCoeffs, omega0: float, n: int) -> np.ndarray:
    """G^A(lag) for lags 0..n-1 from the canonical seed, advanced by the scheme.

    The seed encodes G^A(t, t) = 0 and d/dt1 G^A = -1 on the diagonal.
    """
    dt = coeffs.dt
    prof = np.zeros(max(n, 2))
    if coeffs.kind is ETD:
        prof[1] = -math.exp(-0.5 * coeffs.gamma * dt) * math.sin(coeffs.omega * dt) / coeffs.omega
        a, b = coeffs.a, coeffs.b
        for k in range(1, n - 1):
            prof[k + 1] = a * prof[k] - b * prof[k - 1]
    else:
        g = coeffs.gamma
        # Taylor seed: y'' = -w0^2 y - g y' = g at the diagonal from above
        prof[1] = -dt + 0.5 * g * dt * dt
        a, b, c = verlet_linear(coeffs, omega0)
        for k in range(1, n - 1):
            prof[k + 1] = a * prof[k] - b * prof[k - 1]
    return prof[:n]


def verlet_linear(coeffs: StepperCoeffs, omega0: float) -> tuple[float, float, float]:
    """Effective (a, b, scale) of Verlet with the linear force taken implicitly.

    Central evaluation of -w0^2 y - g y' with y' = (y_{n+1} - y_{n-1})/(2 dt)
    gives y_{n+1} = a y_n - b y_{n-1} + scale * int h f.
    """
    dt, g = coeffs.dt, coeffs.gamma
    s = 1.0 / (1.0 + 0.5 * g * dt)
    return (2.0 - (omega0 * dt) ** 2) * s, (1.0 - 0.5 * g * dt) * s, s


def derivative_profile(coeffs: StepperCoeffs, prof: np.ndarray) -> np.ndarray:
    """d/dt1 G^A at lags 0..len(prof)-2 on the branch t1 >= t2.

    ETD uses the two-point stencil that is exact for damped oscillations,
    y'_k = w (y_k cos(w dt) - exp(-g dt/2) y_{k-1}) / sin(w dt) - g y_k / 2;
    Verlet uses central differences.  The diagonal value is the canonical -1.
    """
    dt = coeffs.dt
    n = len(prof) - 1
    d = np.empty(n)
    d[0] = -1.0
    if coeffs.kind is ETD:
        w, g = coeffs.omega, coeffs.gamma
        c, s = math.cos(w * dt), math.sin(w * dt)
        e = math.exp(-0.5 * g * dt)
        d[1:] = w * (prof[1:n] * c - e * prof[0:n - 1]) / s - 0.5 * g * prof[1:n]
    else:
        d[1:] = (prof[2:n + 1] - prof[0:n - 1]) / (2 * dt)
    return d


def ccr_residual(prof: np.ndarray, dt: float) -> float:
    """|d/dt1 G^A + 1| on the diagonal from the one-sided second-order stencil."""
    return abs((4.0 * prof[1] - prof[2]) / (2.0 * dt) + 1.0)
