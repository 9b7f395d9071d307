"""Exact equilibrium correlators of the ohmic oscillator.

The symmetric correlator splits into a contribution from the two damped poles
of the spectral function and a sum over the bosonic Matsubara frequencies
w_n = 2 pi T n:

    G^S(t) = -i/(2 w_g) [sinh(w_g b) cos(w_g t) + sin(g b/2) sin(w_g |t|)]
                        / [cosh(w_g b) - cos(g b/2)] exp(-g |t|/2)
             + 2 i g T sum_{n>=1} w_n exp(-w_n |t|) / [(w_n^2 + w0^2)^2 - g^2 w_n^2]

with b = 1/T.  The Matsubara sum is truncated and completed by an integral
tail estimate whose magnitude is reported as the truncation bound.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

from .model import ModelParams, RegimeError, TruncationWarning, WIDE_BAND, omega_gamma
from .selfenergy import lamb_shift, rate_function

__all__ = [
    "EquilibriumCurve",
    "spectral_function",
    "spectral_function_finite",
    "g_A_equilibrium",
    "g_S_equilibrium",
    "g_S_pole_part",
    "g_S_matsubara_part",
    "g_S_frequency_integral",
    "field_variance",
    "field_variance_integral",
    "field_variance_zero_temperature",
    "momentum_variance",
    "momentum_variance_integral",
    "euclidean_self_energy",
    "default_matsubara_terms",
    "tabulate",
]

_CHUNK = 1 << 18


@dataclass(frozen=True)
class EquilibriumCurve:
    """Tabulated equilibrium correlators.

    Attributes
    ----------
    times : ndarray
        Relative times t = t1 - t2.
    gS : ndarray of complex
        Symmetric correlator, purely imaginary.
    gA : ndarray of float
        Antisymmetric correlator.
    meta : ModelParams
        Parameters used.
    tail_bound : float
        Largest Matsubara truncation estimate over the table.
    """

    times: np.ndarray
    gS: np.ndarray
    gA: np.ndarray
    meta: ModelParams
    tail_bound: float = 0.0


def default_matsubara_terms(params: ModelParams, include_cutoff: bool = True) -> int:
    scale = max(params.omega0, params.gamma)
    if include_cutoff and params.omega_c is not WIDE_BAND:
        scale = max(scale, float(params.omega_c))
    return max(1000, math.ceil(50.0 * scale / (2 * math.pi * params.temperature)))


def spectral_function(omega, params: ModelParams):
    """Wide-band spectral function A(w) = 2 g w / [(w^2 - w0^2)^2 + (g w)^2]."""
    w = np.asarray(omega, dtype=float)
    g, w0 = params.gamma, params.omega0
    out = 2 * g * w / ((w * w - w0 * w0) ** 2 + (g * w) ** 2)
    return np.asarray(out)[()] if w.ndim == 0 else out


def spectral_function_finite(omega, params: ModelParams):
    """Spectral function with the exponential cutoff in both the width and the shift.

    A(w) = Gamma(w) / [(w^2 - w0^2 - delta(w))^2 + Gamma(w)^2/4], where delta is
    the frequency-dependent shift left after the counterterm.  Reduces to
    ``spectral_function`` in wide-band mode.
    """
    if params.omega_c is WIDE_BAND:
        return spectral_function(omega, params)
    w = np.asarray(omega, dtype=float)
    G = rate_function(w, params)
    d = lamb_shift(w, params)
    out = G / ((w * w - params.omega0 ** 2 - d) ** 2 + 0.25 * G * G)
    return np.asarray(out)[()] if w.ndim == 0 else out


def g_A_equilibrium(t, params: ModelParams):
    """G^A(t) = -(1/w_g) sin(w_g t) exp(-g |t|/2)."""
    wg = omega_gamma(params)
    t = np.asarray(t, dtype=float)
    out = -np.sin(wg * t) / wg * np.exp(-0.5 * params.gamma * np.abs(t))
    return np.asarray(out)[()] if t.ndim == 0 else out


def g_S_pole_part(t, params: ModelParams):
    """Contribution of the two damped poles to G^S(t)."""
    wg = omega_gamma(params)
    g, T = params.gamma, params.temperature
    t = np.asarray(t, dtype=float)
    x = wg / T
    y = g / (2 * T)
    # divide numerator and denominator by cosh(x) to stay finite for x >> 1
    sech = 2.0 * math.exp(-x) / (1.0 + math.exp(-2.0 * x))
    ratio_c = math.tanh(x) / (1.0 - math.cos(y) * sech)
    ratio_s = math.sin(y) * sech / (1.0 - math.cos(y) * sech)
    at = np.abs(t)
    out = -0.5j / wg * (ratio_c * np.cos(wg * t) + ratio_s * np.sin(wg * at)) * np.exp(-0.5 * g * at)
    return np.asarray(out)[()] if t.ndim == 0 else out


def _matsubara_summand(n, t, g, w0, T):
    wn = 2 * math.pi * T * n
    return wn * np.exp(-wn * t) / ((wn * wn + w0 * w0) ** 2 - g * g * wn * wn)


def g_S_matsubara_part(t, params: ModelParams, n_matsubara: int | None = None):
    """Matsubara-sum contribution to G^S(t).

    Returns
    -------
    value : complex or ndarray
        Truncated sum plus integral tail estimate.
    tail : float or ndarray
        Magnitude of the tail estimate, the reported truncation bound.
    """
    g, w0, T = params.gamma, params.omega0, params.temperature
    if not params.underdamped:
        # roots of w_n^2 - g w_n + w0^2 can hit a Matsubara frequency
        disc = math.sqrt(g * g - 4 * w0 * w0)
        for r in ((g - disc) / 2, (g + disc) / 2):
            n = r / (2 * math.pi * T)
            if abs(n - round(n)) < 1e-12 and round(n) >= 1:
                raise RegimeError("Matsubara denominator vanishes for these parameters")
    N = default_matsubara_terms(params, include_cutoff=False) if n_matsubara is None else int(n_matsubara)
    if N < 1:
        raise ValueError("n_matsubara must be positive")
    t = np.atleast_1d(np.abs(np.asarray(t, dtype=float)))
    total = np.zeros(t.shape)
    step = max(1, _CHUNK // max(1, t.size))
    # sum from the small terms upward for a stable accumulation order
    for hi in range(N, 0, -step):
        lo = max(1, hi - step + 1)
        n = np.arange(hi, lo - 1, -1, dtype=float)
        total += _matsubara_summand(n[None, :], t[:, None], g, w0, T).sum(axis=1)
    tail = np.empty(t.shape)
    for i, ti in enumerate(t):
        tail[i] = integrate.quad(lambda n: _matsubara_summand(n, ti, g, w0, T), N + 0.5, np.inf,
                                 epsabs=0.0, epsrel=1e-10, limit=200)[0]
    val = 2j * g * T * (total + tail)
    bound = 2 * g * T * np.abs(tail)
    return val, bound


def g_S_equilibrium(t, params: ModelParams, n_matsubara: int | None = None,
                    tol: float = 1e-4, return_bound: bool = False):
    """Symmetric equilibrium correlator G^S(t), purely imaginary.

    Parameters
    ----------
    t : float or array_like
        Relative time.
    params : ModelParams
        Underdamped parameters; the cutoff is not used (wide-band result).
    n_matsubara : int, optional
        Number of Matsubara terms.  Defaults to
        max(1000, ceil(50 max(w0, g) / (2 pi T))).
    tol : float
        A TruncationWarning is issued if the tail estimate exceeds ``tol``
        relative to |G^S(0)|.  The estimate is added to the result, so the
        actual truncation error is far below it.
    return_bound : bool
        Also return the truncation bound.
    """
    scalar = np.ndim(t) == 0
    tt = np.atleast_1d(np.asarray(t, dtype=float))
    pole = np.atleast_1d(g_S_pole_part(tt, params))
    mats, bound = g_S_matsubara_part(tt, params, n_matsubara)
    val = pole + mats
    ref = abs(g_S_pole_part(0.0, params))
    if np.max(bound) > tol * ref:
        warnings.warn(f"Matsubara tail estimate {np.max(bound):.3g} exceeds tolerance",
                      TruncationWarning, stacklevel=2)
    if scalar:
        val, bound = complex(val[0]), float(bound[0])
    return (val, bound) if return_bound else val


def g_S_frequency_integral(t: float, params: ModelParams, epsabs: float = 1e-12) -> complex:
    """G^S(t) = -i int_0^inf dw/(2 pi) A(w) coth(w/2T) cos(w t).

    Uses the finite-cutoff spectral function when omega_c is finite.  This is
    an independent oracle for ``g_S_equilibrium`` and the only route to the
    finite-cutoff correlator.
    """
    T = params.temperature

    def f(w):
        if w == 0.0:
            g = params.gamma
            return 4 * g * T / params.omega0 ** 4 / (2 * math.pi)
        return spectral_function_finite(w, params) / math.tanh(w / (2 * T)) / (2 * math.pi)

    w0, g = params.omega0, params.gamma
    pts = sorted({w0, max(w0 - 2 * g, 0.5 * w0), w0 + 2 * g})
    top = 50.0 * max(w0, g, T)
    if params.omega_c is not WIDE_BAND:
        top = max(top, 60.0 * params.omega_c)
    t = abs(float(t))
    if t == 0.0:
        edges = [0.0, *pts, 10 * max(w0, g, T)]
        val = sum(integrate.quad(f, a, b, epsabs=epsabs, epsrel=1e-12, limit=400)[0]
                  for a, b in zip(edges[:-1], edges[1:]))
        val += integrate.quad(f, edges[-1], np.inf, epsabs=epsabs, epsrel=1e-12, limit=400)[0]
        return -1j * val
    edges = [0.0, *pts, 10 * max(w0, g, T)]
    val = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        val += integrate.quad(f, a, b, weight="cos", wvar=t, epsabs=epsabs, limit=400)[0]
    val += integrate.quad(f, edges[-1], np.inf, weight="cos", wvar=t, epsabs=epsabs, limlst=200)[0]
    return -1j * val


def field_variance(params: ModelParams, n_matsubara: int | None = None) -> float:
    """<phi^2>_T = i G^S(0) from the pole plus Matsubara decomposition."""
    return float((1j * g_S_equilibrium(0.0, params, n_matsubara)).real)


def field_variance_integral(params: ModelParams, epsabs: float = 1e-13) -> float:
    """<phi^2>_T from the frequency integral (1/2) int dw/(2 pi) coth(w/2T) A(w)."""
    return float((1j * g_S_frequency_integral(0.0, params, epsabs)).real)


def field_variance_zero_temperature(omega0: float, gamma: float) -> float:
    """Ground-state <phi^2> of the wide-band ohmic oscillator.

    [pi + 2 arccot(g w_g / (w_g^2 - g^2/4))] / (4 pi w_g), with arccot taking
    values in (0, pi) so the expression is continuous through w_g = g/2.
    """
    if not gamma < 2 * omega0:
        raise RegimeError("zero-temperature closed form requires the underdamped regime")
    wg = math.sqrt(omega0 * omega0 - gamma * gamma / 4)
    if gamma == 0:
        return 1.0 / (2 * omega0)
    acot = math.atan2(wg * wg - gamma * gamma / 4, gamma * wg)
    return (math.pi + 2 * acot) / (4 * math.pi * wg)


MATSUBARA_REGULATOR = "matsubara"
SPECTRAL_REGULATOR = "spectral"


def euclidean_self_energy(wn, params: ModelParams, regulator: str = MATSUBARA_REGULATOR):
    """Bath self-energy on the imaginary axis, counterterm included.

    ``"matsubara"`` damps the ohmic value directly, g|w_n| exp(-|w_n|/wc).
    ``"spectral"`` is the continuation of the exponentially cut-off rate used by
    ``spectral_function_finite``: (2g/pi)|w_n| aux(|w_n|/wc) with
    aux(z) = Ci(z) sin z - (Si(z) - pi/2) cos z.  Both tend to g|w_n| for
    |w_n| << wc and agree in their log(wc) growth of <pi^2>.
    """
    w = np.abs(np.asarray(wn, dtype=float))
    g, wc = params.gamma, params.omega_c
    if regulator == MATSUBARA_REGULATOR:
        return g * w * np.exp(-w / wc)
    if regulator == SPECTRAL_REGULATOR:
        z = w / wc
        si, ci = special.sici(np.where(z > 0, z, 1.0))
        aux = ci * np.sin(z) - (si - 0.5 * math.pi) * np.cos(z)
        return np.where(z > 0, (2 * g / math.pi) * w * aux, 0.0)
    raise ValueError(f"unknown regulator {regulator!r}")


def _momentum_summand(wn, params: ModelParams, regulator: str):
    w0 = params.omega0
    damp = euclidean_self_energy(wn, params, regulator)
    return (w0 * w0 + damp) / (wn * wn + w0 * w0 + damp)


def momentum_variance(params: ModelParams, n_matsubara: int | None = None,
                      tol: float = 1e-4, return_bound: bool = False,
                      regulator: str = MATSUBARA_REGULATOR):
    """<pi^2>_T = T sum_n (w0^2 + S(w_n)) / (w_n^2 + w0^2 + S(w_n)).

    S is the Euclidean self-energy of ``euclidean_self_energy``; the default
    is S = g|w_n| e^{-|w_n|/wc}.  Diverges logarithmically with the cutoff, so
    omega_c must be finite.  The sum over |n| <= N is completed by an integral
    tail estimate.
    """
    if params.omega_c is WIDE_BAND:
        raise RegimeError("<pi^2> diverges in wide-band mode")
    T = params.temperature
    N = default_matsubara_terms(params) if n_matsubara is None else int(n_matsubara)
    a = 2 * math.pi * T
    total = 0.0
    for hi in range(N, 0, -_CHUNK):
        lo = max(1, hi - _CHUNK + 1)
        n = np.arange(hi, lo - 1, -1, dtype=float)
        total += _momentum_summand(a * n, params, regulator).sum()
    f = lambda n: float(_momentum_summand(a * n, params, regulator))
    mid = max(2.0 * N, 60.0 * params.omega_c / a)
    tail = integrate.quad(f, N + 0.5, mid, epsabs=0.0, epsrel=1e-10, limit=400)[0]
    tail += integrate.quad(f, mid, np.inf, epsabs=0.0, epsrel=1e-10, limit=400)[0]
    value = T * (1.0 + 2.0 * (total + tail))
    bound = 2.0 * T * abs(tail)
    if bound > tol * value:
        warnings.warn(f"Matsubara tail estimate {bound:.3g} exceeds tolerance",
                      TruncationWarning, stacklevel=2)
    return (value, bound) if return_bound else value


def momentum_variance_integral(params: ModelParams, epsabs: float = 1e-12) -> float:
    """<pi^2>_T = int_0^inf dw/(2 pi) w^2 A(w) coth(w/2T) with the finite-cutoff A.

    Independent of the Matsubara route; agrees with ``momentum_variance`` for
    ``regulator="spectral"``.
    """
    if params.omega_c is WIDE_BAND:
        raise RegimeError("<pi^2> diverges in wide-band mode")
    T = params.temperature

    def f(w):
        if w == 0.0:
            return 0.0
        return w * w * spectral_function_finite(w, params) / math.tanh(w / (2 * T)) / (2 * math.pi)

    w0, g, wc = params.omega0, params.gamma, float(params.omega_c)
    edges = sorted({0.0, 0.5 * w0, w0, w0 + 2 * g, 10 * max(w0, g, T), wc, 10 * wc})
    val = sum(integrate.quad(f, a, b, epsabs=epsabs, epsrel=1e-11, limit=800)[0]
              for a, b in zip(edges[:-1], edges[1:]))
    val += integrate.quad(f, edges[-1], np.inf, epsabs=epsabs, epsrel=1e-11, limit=400)[0]
    return float(val)


def tabulate(times, params: ModelParams, n_matsubara: int | None = None) -> EquilibriumCurve:
    """Tabulate G^S and G^A on the given relative times."""
    times = np.asarray(times, dtype=float)
    gS, bound = g_S_equilibrium(times, params, n_matsubara, return_bound=True)
    gA = g_A_equilibrium(times, params)
    return EquilibriumCurve(times=times, gS=np.atleast_1d(gS), gA=np.atleast_1d(gA),
                            meta=params, tail_bound=float(np.max(bound)))
