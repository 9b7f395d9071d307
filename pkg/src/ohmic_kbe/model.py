"""Physical and numerical parameters of the damped oscillator problem.

Natural units with hbar = k_B = m = 1.  ``omega0`` is the renormalized
resonance frequency: the bare frequency is shifted by a counterterm that
cancels the leading mass renormalization of the bath.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Union


class _Sentinel:
    __slots__ = ("_name",)

    def __init__(self, name: str):
        self._name = name

    def __repr__(self) -> str:
        return self._name

    def __reduce__(self):
        return self._name


WIDE_BAND = _Sentinel("WIDE_BAND")
"""Symbolic infinite cutoff; kernels switch to their analytic limits."""

UNBOUNDED = _Sentinel("UNBOUNDED")
"""Memory depth without truncation."""


class OhmicKBEError(Exception):
    """Base class of all package errors."""


class RegimeError(OhmicKBEError, ValueError):
    """Parameters outside the regime an operation supports."""


class ConfigError(OhmicKBEError, ValueError):
    """Invalid parameter values or configuration input."""


class SingularityError(OhmicKBEError, ValueError):
    """Pointwise evaluation of a distribution or at a singular point."""


class ToleranceError(OhmicKBEError, RuntimeError):
    """A quadrature or sum did not reach its requested tolerance.

    Attributes
    ----------
    achieved : float
        Error estimate actually achieved.
    """

    def __init__(self, message: str, achieved: float = float("nan")):
        super().__init__(message)
        self.achieved = achieved


class InvariantError(OhmicKBEError, RuntimeError):
    """A runtime invariant was violated during time stepping."""

    def __init__(self, message: str, step: int = -1):
        super().__init__(message)
        self.step = step


class WideBandValidityWarning(UserWarning):
    """omega_c / T is too small for the wide-band treatment of the kernel."""


class TruncationWarning(UserWarning):
    """A truncated sum or memory window may be inaccurate."""


Cutoff = Union[float, _Sentinel]
MemoryDepth = Union[int, _Sentinel]


@dataclass(frozen=True)
class ModelParams:
    """Physical scales of the ohmically damped oscillator.

    Parameters
    ----------
    omega0 : float
        Renormalized resonance frequency, > 0.
    gamma : float
        Damping rate, >= 0.
    temperature : float
        Bath temperature, > 0.
    omega_c : float or WIDE_BAND
        Exponential cutoff of the bath rate function.
    t0 : float
        Initial time of the evolution.
    """

    omega0: float
    gamma: float
    temperature: float
    omega_c: Cutoff = WIDE_BAND
    t0: float = 0.0
    wide_band_warning: bool = field(default=False, init=False, compare=False)

    def __post_init__(self):
        for name in ("omega0", "gamma", "temperature", "t0"):
            v = getattr(self, name)
            if not isinstance(v, (int, float)) or not math.isfinite(v):
                raise ConfigError(f"{name} must be a finite real number, got {v!r}")
        if self.omega0 <= 0:
            raise ConfigError("omega0 must be positive")
        if self.gamma < 0:
            raise ConfigError("gamma must be non-negative")
        if self.temperature <= 0:
            raise ConfigError("temperature must be positive")
        if self.omega_c is not WIDE_BAND:
            wc = self.omega_c
            if not isinstance(wc, (int, float)) or not math.isfinite(wc) or wc <= 0:
                raise ConfigError("omega_c must be positive and finite, or WIDE_BAND")
            if wc / self.temperature < 100:
                object.__setattr__(self, "wide_band_warning", True)
                warnings.warn(
                    f"omega_c/T = {wc / self.temperature:.3g} < 100; the dropped "
                    "cutoff correction of the symmetric kernel is not negligible",
                    WideBandValidityWarning,
                    stacklevel=3,
                )

    @property
    def wide_band(self) -> bool:
        return self.omega_c is WIDE_BAND

    @property
    def underdamped(self) -> bool:
        return self.gamma < 2.0 * self.omega0

    def omega_gamma(self) -> float:
        return omega_gamma(self)

    def replace(self, **changes) -> "ModelParams":
        kw = dict(
            omega0=self.omega0,
            gamma=self.gamma,
            temperature=self.temperature,
            omega_c=self.omega_c,
            t0=self.t0,
        )
        kw.update(changes)
        return ModelParams(**kw)


@dataclass(frozen=True)
class GridSpec:
    """Uniform time grid and history truncation.

    Parameters
    ----------
    dt : float
        Time step.
    n_steps : int
        Number of steps to take.
    memory_depth : int or UNBOUNDED
        Number of past steps kept in the memory integrals.
    """

    dt: float
    n_steps: int
    memory_depth: MemoryDepth = UNBOUNDED

    def __post_init__(self):
        if not isinstance(self.dt, (int, float)) or not (self.dt > 0) or not math.isfinite(self.dt):
            raise ConfigError("dt must be positive and finite")
        if isinstance(self.n_steps, bool) or not isinstance(self.n_steps, int) or self.n_steps < 0:
            raise ConfigError("n_steps must be a non-negative integer")
        md = self.memory_depth
        if md is not UNBOUNDED:
            if isinstance(md, bool) or not isinstance(md, int) or md < 2:
                raise ConfigError("memory_depth must be an integer >= 2 or UNBOUNDED")

    def depth(self) -> int:
        """Effective number of retained lags."""
        if self.memory_depth is UNBOUNDED:
            return self.n_steps + 1
        return min(int(self.memory_depth), self.n_steps + 1)

    def memory_time(self) -> float:
        if self.memory_depth is UNBOUNDED:
            return math.inf
        return self.memory_depth * self.dt

    def truncation_flagged(self, params: ModelParams, multiples: float = 15.0) -> bool:
        """True when the finite memory window is shorter than ``multiples``
        times the decay time 1/(2 pi T) of the noise kernel.

        Lines t2 = const evolve independently of older lines, so the window
        only has to cover the range of Sigma^S in the history integral.
        """
        if self.memory_depth is UNBOUNDED:
            return False
        return self.memory_time() < multiples / (2 * math.pi * params.temperature)


def omega_gamma(params: ModelParams) -> float:
    """Damped oscillation frequency sqrt(omega0**2 - gamma**2/4)."""
    if not params.underdamped:
        raise RegimeError(
            f"overdamped regime (gamma={params.gamma} >= 2*omega0={2 * params.omega0}) "
            "has no real omega_gamma"
        )
    return math.sqrt((params.omega0 - params.gamma / 2) * (params.omega0 + params.gamma / 2))


def fastest_scale(params: ModelParams) -> float:
    return max(params.omega0, params.gamma, 2 * math.pi * params.temperature)


def default_dt(params: ModelParams, fraction: float = 1.0 / 100) -> float:
    """Time step as a fraction of the period of the fastest system scale.

    Returns ``fraction * 2 pi / max(omega0, gamma, 2 pi T)``.
    """
    if not (0 < fraction <= 1):
        raise ConfigError("fraction must lie in (0, 1]")
    return fraction * 2 * math.pi / fastest_scale(params)
