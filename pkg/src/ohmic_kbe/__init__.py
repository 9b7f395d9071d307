"""Kadanoff-Baym solver for the ohmically damped quantum harmonic oscillator."""

from .model import (
    UNBOUNDED,
    WIDE_BAND,
    ConfigError,
    GridSpec,
    InvariantError,
    ModelParams,
    OhmicKBEError,
    RegimeError,
    SingularityError,
    ToleranceError,
    TruncationWarning,
    WideBandValidityWarning,
    default_dt,
    omega_gamma,
)

__version__ = "0.1.0"
