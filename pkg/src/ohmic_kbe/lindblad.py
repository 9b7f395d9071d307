"""Born-Markov reference for the damped oscillator.

The reference is the quantum-optical master equation with jump operators a
and a^dagger at rates gamma (nbar + 1) and gamma nbar.  Its steady state is the
isolated thermal state; two-time correlators follow from the quantum
regression theorem and decay exponentially at all times.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .model import ModelParams, omega_gamma

__all__ = [
    "LindbladModel",
    "steady_covariance",
    "covariance_rhs",
    "evolve_covariance",
    "symmetric_correlator",
    "regression_correlator",
]


@dataclass(frozen=True)
class LindbladModel:
    """Quantum-optical master equation for the oscillator.

    Attributes
    ----------
    params : ModelParams
        Oscillator parameters; only omega0, gamma and temperature enter.
    """

    params: ModelParams

    @property
    def nbar(self) -> float:
        """Thermal occupation 1/(exp(omega0/T) - 1)."""
        x = self.params.omega0 / self.params.temperature
        return 1.0 / math.expm1(x) if x < 700 else 0.0

    @property
    def coth_factor(self) -> float:
        """2 nbar + 1 = coth(omega0/2T)."""
        x = self.params.omega0 / (2 * self.params.temperature)
        return 1.0 / math.tanh(x) if x < 350 else 1.0


def steady_covariance(model: LindbladModel) -> tuple[float, float]:
    """Stationary (<x^2>, <p^2>) = ((2 nbar + 1)/(2 w0), w0 (2 nbar + 1)/2)."""
    w0 = model.params.omega0
    c = model.coth_factor
    return c / (2 * w0), w0 * c / 2


def covariance_rhs(model: LindbladModel):
    """Right-hand side of the closed equations for (X, P, C).

    X = <x^2>, P = <p^2>, C = <{x, p}>/2 with zero means.
    """
    w0, g = model.params.omega0, model.params.gamma
    xs, ps = steady_covariance(model)

    def rhs(t, y):
        X, P, C = y
        return [
            -g * (X - xs) + 2 * C,
            -g * (P - ps) - 2 * w0 * w0 * C,
            P - w0 * w0 * X - g * C,
        ]

    return rhs


def evolve_covariance(model: LindbladModel, y0, t_final: float, rtol: float = 1e-12,
                      atol: float = 1e-14) -> np.ndarray:
    """Integrate the covariance equations from ``y0`` = (X, P, C) to ``t_final``."""
    sol = solve_ivp(covariance_rhs(model), (0.0, t_final), list(y0), method="DOP853",
                    rtol=rtol, atol=atol)
    return sol.y[:, -1]


def symmetric_correlator(model: LindbladModel, t):
    """Symmetrized correlator <{x(t), x(0)}>/2 in the steady state.

    varPhi exp(-gamma t/2) [cos(nu t) + (gamma/2 nu) sin(nu t)], nu = omega_gamma,
    the solution of the damped mean-value equations with zero initial slope.
    """
    nu = omega_gamma(model.params)
    g = model.params.gamma
    var_phi, _ = steady_covariance(model)
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("t must be non-negative")
    out = var_phi * np.exp(-0.5 * g * t) * (np.cos(nu * t) + g / (2 * nu) * np.sin(nu * t))
    return np.asarray(out)[()] if t.ndim == 0 else out


def regression_correlator(model: LindbladModel, times) -> np.ndarray:
    """Numerical regression: propagate (<x(t)x>, <p(t)x>) with x' = p, p' = -w0^2 x - g p.

    The initial vector is (varPhi, C_ss) with C_ss = 0 in the steady state.
    """
    w0, g = model.params.omega0, model.params.gamma
    var_phi, _ = steady_covariance(model)
    times = np.asarray(times, dtype=float)
    sol = solve_ivp(lambda t, y: [y[1], -w0 * w0 * y[0] - g * y[1]], (0.0, float(times.max())),
                    [var_phi, 0.0], t_eval=times, method="DOP853", rtol=1e-12, atol=1e-15)
    return sol.y[0]
