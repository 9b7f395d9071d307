"""Embedding self-energy of the ohmic bath in time and frequency.

Conventions: f(t) = int dw/(2 pi) exp(-i w t) f(w).  The bath rate function is
Gamma(w) = 2 gamma w exp(-|w|/omega_c), the antisymmetric (dissipative) part is
Sigma^A(w) = -i Gamma(w) and the symmetric (noise) part follows from the
fluctuation-dissipation relation Sigma^S(w) = coth(w/2T) Sigma^A(w) / 2.

In the time domain Sigma^S(t) is evaluated with the cutoff entering only
through cos(2 pi T/omega_c); the correction that scales like T/omega_c is
dropped.  All kernels are written in terms of E = exp(-2 pi T |t|) and
1 - E (via ``expm1``) so that neither small |t| nor large omega_c/T loses
digits.

The moments of Sigma^S that remove its non-integrable diagonal singularity are

    P(t1, t2) = int_{t0}^{t2} Sigma^S(t1 - t') dt'
    Q(t1, t2) = int_{t0}^{t2} Sigma^S(t1 - t') (t' - t1) dt'

read as Hadamard finite parts when t1 lies inside [t0, t2] in wide-band mode.
They follow from the antiderivatives ``_anti_p`` (of Sigma^S(u)) and
``_anti_q`` (of u Sigma^S(u)).
"""

from __future__ import annotations

import math

import numpy as np
from scipy import integrate, special

from .model import ModelParams, SingularityError, ToleranceError, WIDE_BAND

__all__ = [
    "rate_function",
    "sigma_A_time",
    "sigma_A_moments",
    "sigma_S_time",
    "sigma_S_freq",
    "sigma_S_freq_kernel",
    "p_kernel",
    "q_kernel",
    "p_kernel_quad",
    "q_kernel_quad",
    "q_diag",
    "q_diag_asymptote",
    "lhopital_endpoint",
    "re_sigma_ret",
    "lamb_shift",
    "finite_part_convolution",
    "p_antiderivative",
    "q_antiderivative",
    "transient_bound",
    "translation_invariance_time",
]

_QUAD_TOL = 1e-10


def _eta(params: ModelParams, omega_c=None) -> float:
    """1 - cos(2 pi T / omega_c), zero in wide-band mode."""
    wc = params.omega_c if omega_c is None else omega_c
    if wc is WIDE_BAND:
        return 0.0
    return 2.0 * math.sin(math.pi * params.temperature / wc) ** 2


def _parts(u, params: ModelParams, eta: float):
    a = 2.0 * math.pi * params.temperature
    x = a * np.abs(u)
    E = np.exp(-x)
    om = -np.expm1(-x)
    D = om * om + 2.0 * eta * E
    return E, om, D


def _as_output(res, scalar: bool):
    return np.asarray(res)[()] if scalar else res


def rate_function(omega, params: ModelParams):
    """Gamma(w) = 2 gamma w exp(-|w|/omega_c)."""
    w = np.asarray(omega, dtype=float)
    out = 2.0 * params.gamma * w
    if params.omega_c is not WIDE_BAND:
        out = out * np.exp(-np.abs(w) / params.omega_c)
    return _as_output(out, w.ndim == 0)


def sigma_A_time(t, params: ModelParams):
    """Antisymmetric self-energy -2 gamma (2t/omega_c) / (pi (omega_c^-2 + t^2)^2).

    Only defined for finite ``omega_c``; the wide-band limit is the
    distribution 2 gamma delta'(t).
    """
    if params.omega_c is WIDE_BAND:
        raise SingularityError("Sigma^A is a distribution in wide-band mode")
    t = np.asarray(t, dtype=float)
    wc = float(params.omega_c)
    out = -2.0 * params.gamma * (2.0 * t / wc) / (math.pi * (wc ** -2 + t * t) ** 2)
    return _as_output(out, t.ndim == 0)


def sigma_A_moments(length, params: ModelParams):
    """Local moments of Sigma^A over the last ``length`` of history.

    Returns ``(m0, m1)`` with m0 = int_0^L Sigma^A(u) du and
    m1 = int_0^L Sigma^A(u) (-u) du, u = t1 - t'.  For L*omega_c >> 1,
    m0 -> -2 gamma omega_c / pi (the mass shift cancelled by the counterterm)
    and m1 -> gamma (the local friction).
    """
    if params.omega_c is WIDE_BAND:
        raise SingularityError("Sigma^A moments diverge in wide-band mode")
    x = np.asarray(length, dtype=float) * params.omega_c
    g = params.gamma
    m0 = -(2.0 * g * params.omega_c / math.pi) * x * x / (1.0 + x * x)
    m1 = (2.0 * g / math.pi) * (np.arctan(x) - x / (1.0 + x * x))
    return _as_output(m0, x.ndim == 0), _as_output(m1, x.ndim == 0)


def sigma_S_time(t, params: ModelParams):
    """Symmetric self-energy Sigma^S(t), purely imaginary and even.

    Finite omega_c:
        i gamma pi T^2 (2c cosh(2 pi T t) - 2) / (c - cosh(2 pi T t))^2,
        c = cos(2 pi T/omega_c);
    wide band:
        i gamma pi T^2 / sinh^2(pi T t).
    """
    t = np.asarray(t, dtype=float)
    wb = params.omega_c is WIDE_BAND
    if wb and np.any(t == 0):
        raise SingularityError("wide-band Sigma^S is singular at t = 0")
    eta = _eta(params)
    E, om, D = _parts(t, params, eta)
    T = params.temperature
    num = (1.0 - eta) * om * om - 2.0 * eta * E
    out = 4j * params.gamma * math.pi * T * T * E * num / (D * D)
    return _as_output(out, t.ndim == 0)


def sigma_S_freq(omega, params: ModelParams):
    """Sigma^S(w) = coth(w/2T) (-i Gamma(w)) / 2, with the limit -2i gamma T at w = 0."""
    w = np.asarray(omega, dtype=float)
    T = params.temperature
    aw = np.abs(w)
    # |w| coth(|w|/2T), continuous through w = 0
    x = aw / (2 * T)
    with np.errstate(divide="ignore", invalid="ignore"):
        wcoth = np.where(x > 1e-8, aw / np.tanh(np.where(x > 1e-8, x, 1.0)), 2 * T)
    if params.omega_c is not WIDE_BAND:
        wcoth = wcoth * np.exp(-aw / params.omega_c)
    out = -1j * params.gamma * wcoth
    return _as_output(out, w.ndim == 0)


def sigma_S_freq_kernel(omega, params: ModelParams):
    """Exact Fourier transform of the implemented time kernel ``sigma_S_time``.

    The time kernel equals -(i gamma/pi) Re sum_k (1/omega_c + i t + k/T)^-2,
    whose transform is -i gamma |w| [exp(-|w|/omega_c) + 2 cosh(w/omega_c) n_B(|w|)].
    It differs from ``sigma_S_freq`` by a relative amount of order
    |w| n_B(|w|) / (omega_c coth(w/2T)), the dropped cutoff correction.
    """
    w = np.asarray(omega, dtype=float)
    T = params.temperature
    aw = np.abs(w)
    if params.omega_c is WIDE_BAND:
        return sigma_S_freq(omega, params)
    wc = params.omega_c
    x = aw / T
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        wnb = np.where(x > 1e-8, aw / np.expm1(np.where(x > 1e-8, x, 1.0)), T)
        out = -1j * params.gamma * (aw * np.exp(-aw / wc) + 2.0 * np.cosh(w / wc) * wnb)
    return _as_output(out, w.ndim == 0)


def _anti_p(u, params: ModelParams, eta: float):
    """Antiderivative of Sigma^S(u) in u, odd, vanishing at infinity up to a constant."""
    E, om, D = _parts(u, params, eta)
    return -1j * params.gamma * params.temperature * np.sign(u) * (1.0 - E * E) / D


def _anti_q(u, params: ModelParams, eta: float):
    """Antiderivative of u Sigma^S(u) in u, even."""
    E, om, D = _parts(u, params, eta)
    g, T = params.gamma, params.temperature
    with np.errstate(divide="ignore"):
        logD = np.log(D)
    return (1j * g * T * np.abs(u) * 2.0 * E * (E - 1.0 + eta) / D
            + (1j * g / (2.0 * math.pi)) * (logD - math.log(2.0)))


def _check_wb_points(params, *us):
    if params.omega_c is WIDE_BAND:
        for u in us:
            if np.any(np.asarray(u) == 0):
                raise SingularityError(
                    "wide-band P/Q diverge when t1 coincides with an interval endpoint"
                )


def p_kernel(t1, t2, params: ModelParams, grid_t0: float | None = None):
    """P(t1, t2) = int_{t0}^{t2} Sigma^S(t1 - t') dt' from the closed antiderivative."""
    t0 = params.t0 if grid_t0 is None else grid_t0
    t1 = np.asarray(t1, dtype=float)
    t2 = np.asarray(t2, dtype=float)
    if np.any(t2 < t0):
        raise ValueError("p_kernel requires t2 >= grid_t0")
    eta = _eta(params)
    ua, ub = t1 - t2, t1 - t0
    _check_wb_points(params, np.where(t2 > t0, ua, 1.0), np.where(t2 > t0, ub, 1.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        out = _anti_p(ub, params, eta) - _anti_p(ua, params, eta)
    out = np.where(t2 == t0, 0j, out)
    return _as_output(out, out.ndim == 0)


def q_kernel(t1, t2, params: ModelParams, grid_t0: float | None = None):
    """Q(t1, t2) = int_{t0}^{t2} Sigma^S(t1 - t') (t' - t1) dt' from the closed antiderivative."""
    t0 = params.t0 if grid_t0 is None else grid_t0
    t1 = np.asarray(t1, dtype=float)
    t2 = np.asarray(t2, dtype=float)
    if np.any(t2 < t0):
        raise ValueError("q_kernel requires t2 >= grid_t0")
    eta = _eta(params)
    ua, ub = t1 - t2, t1 - t0
    _check_wb_points(params, np.where(t2 > t0, ua, 1.0), np.where(t2 > t0, ub, 1.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        out = _anti_q(ua, params, eta) - _anti_q(ub, params, eta)
    out = np.where(t2 == t0, 0j, out)
    return _as_output(out, out.ndim == 0)


def _cquad(f, lo, hi, points=None, epsabs=_QUAD_TOL, limit=400):
    """Adaptive quadrature of a complex integrand, returning (value, error)."""
    kw = dict(epsabs=epsabs, epsrel=1e-12, limit=limit)
    if points is not None:
        points = [p for p in points if lo < p < hi]
        if points:
            kw["points"] = points
    re, ere = integrate.quad(lambda x: np.real(f(x)), lo, hi, **kw)
    im, eim = integrate.quad(lambda x: np.imag(f(x)), lo, hi, **kw)
    return re + 1j * im, math.hypot(ere, eim)


def _hfp_moment(t1: float, t2: float, params: ModelParams, t0: float, order: int,
                epsabs: float):
    """Quadrature evaluation of P (order 0) or Q (order 1).

    In wide-band mode with t1 inside [t0, t2] the double pole i gamma/(pi u^2)
    is subtracted and its finite part added back analytically.
    """
    g = params.gamma
    if t2 == t0:
        return 0j, 0.0
    if params.omega_c is WIDE_BAND:
        if t1 == t2 or t1 == t0:
            raise SingularityError("wide-band P/Q diverge at an interval endpoint")
        lo, hi = t1 - t2, t1 - t0  # u-range
        sing = 1j * g / math.pi
        if lo < 0 < hi:
            def f(u):
                if u == 0.0:
                    # limit of Sigma^S - i g/(pi u^2) and of its u-weighted version
                    return (-1j * g * math.pi * params.temperature ** 2 / 3.0) if order == 0 else 0j
                r = sigma_S_time(u, params) - sing / (u * u)
                return r if order == 0 else -u * r
            val, err = _cquad(f, lo, hi, points=[0.0], epsabs=epsabs)
            if order == 0:
                val += sing * (1.0 / lo - 1.0 / hi)
            else:
                val += -sing * (math.log(abs(hi)) - math.log(abs(lo)))
            return val, err
        if order == 0:
            return _cquad(lambda u: sigma_S_time(u, params), lo, hi, epsabs=epsabs)
        return _cquad(lambda u: -u * sigma_S_time(u, params), lo, hi, epsabs=epsabs)
    pts = [t1]
    if params.omega_c is not WIDE_BAND:
        w = 1.0 / params.omega_c
        pts += [t1 - 30 * w, t1 + 30 * w]
    if order == 0:
        return _cquad(lambda tp: sigma_S_time(t1 - tp, params), t0, t2, pts, epsabs)
    return _cquad(lambda tp: sigma_S_time(t1 - tp, params) * (tp - t1), t0, t2, pts, epsabs)


def p_kernel_quad(t1: float, t2: float, params: ModelParams, grid_t0: float | None = None,
                  epsabs: float = _QUAD_TOL) -> complex:
    """Adaptive-quadrature evaluation of P; raises ToleranceError if not converged."""
    t0 = params.t0 if grid_t0 is None else grid_t0
    val, err = _hfp_moment(float(t1), float(t2), params, t0, 0, epsabs)
    if not err <= 100 * max(epsabs, 1e-12 * abs(val)):
        raise ToleranceError("P quadrature did not converge", achieved=err)
    return val


def q_kernel_quad(t1: float, t2: float, params: ModelParams, grid_t0: float | None = None,
                  epsabs: float = _QUAD_TOL) -> complex:
    """Adaptive-quadrature evaluation of Q; raises ToleranceError if not converged."""
    t0 = params.t0 if grid_t0 is None else grid_t0
    val, err = _hfp_moment(float(t1), float(t2), params, t0, 1, epsabs)
    if not err <= 100 * max(epsabs, 1e-12 * abs(val)):
        raise ToleranceError("Q quadrature did not converge", achieved=err)
    return val


def q_diag(t, params: ModelParams, grid_t0: float | None = None, effective_cutoff=None):
    """Diagonal value Q(t, t).

    Equals (i gamma/2 pi) log[(1 - c) / (cosh(2 pi T s) - c)]
    - i gamma T s sinh(2 pi T s) / (c - cosh(2 pi T s)) with s = t - t0 and
    c = cos(2 pi T/omega_c).  Wide-band parameters need ``effective_cutoff``
    because the diagonal value diverges logarithmically with omega_c.
    """
    t0 = params.t0 if grid_t0 is None else grid_t0
    wc = params.omega_c
    if effective_cutoff is not None:
        wc = effective_cutoff
    if wc is WIDE_BAND:
        raise SingularityError("q_diag diverges in wide-band mode; pass effective_cutoff")
    s = np.asarray(t, dtype=float) - t0
    if np.any(s < 0):
        raise ValueError("q_diag requires t >= grid_t0")
    eta = _eta(params, wc)
    out = np.asarray(_anti_q(np.zeros_like(s), params, eta) - _anti_q(s, params, eta))
    return _as_output(out, out.ndim == 0)


def q_diag_asymptote(params: ModelParams, effective_cutoff=None) -> complex:
    """Limit of q_diag for t - t0 >> 1/(2 pi T): (i gamma/2 pi) log(4 sin^2(pi T/omega_c))."""
    wc = params.omega_c if effective_cutoff is None else effective_cutoff
    if wc is WIDE_BAND:
        raise SingularityError("the diagonal asymptote diverges in wide-band mode")
    return 1j * params.gamma / (2 * math.pi) * math.log(
        4.0 * math.sin(math.pi * params.temperature / wc) ** 2)


def lhopital_endpoint(second_derivative_GA, params: ModelParams):
    """Value of Sigma^S(t1 - t') R_2(t') at t' = t1: (i gamma/2 pi) d^2 G^A."""
    return 1j * params.gamma / (2 * math.pi) * second_derivative_GA


def _k_func(y):
    """exp(y) E1(y) + exp(-y) Ei(y) for y > 0."""
    y = np.asarray(y, dtype=float)
    out = np.empty_like(y)
    small = y < 40
    ys = y[small]
    out[small] = np.exp(ys) * special.exp1(ys) + np.exp(-ys) * special.expi(ys)
    yl = y[~small]
    # asymptotic series: the odd terms cancel between the two pieces
    acc = np.zeros_like(yl)
    term = 1.0 / yl
    for k in range(0, 16, 2):
        acc += 2.0 * term
        term = term * (k + 1) * (k + 2) / (yl * yl)
    out[~small] = acc
    return out


def lamb_shift(omega, params: ModelParams):
    """Frequency-dependent shift delta(w) = Re Sigma^R(w) + 2 gamma omega_c/pi.

    Closed form (gamma w/pi) K(w/omega_c) with
    K(y) = exp(y) E1(y) + exp(-y) Ei(y), extended as an odd function.  It is
    what remains of the real self-energy after the counterterm.
    """
    if params.omega_c is WIDE_BAND:
        w = np.asarray(omega, dtype=float)
        return _as_output(np.zeros_like(w), w.ndim == 0)
    w = np.asarray(omega, dtype=float)
    y = np.abs(w) / params.omega_c
    out = np.zeros_like(y)
    nz = y > 0
    out[nz] = params.gamma * np.abs(w[nz]) / math.pi * _k_func(y[nz])
    return _as_output(out, w.ndim == 0)


def re_sigma_ret(omega: float, params: ModelParams, epsabs: float = 1e-10) -> float:
    """Real part of the retarded self-energy by principal-value quadrature.

    Re Sigma^R(w) = -(1/2 pi) PV int Gamma(w') / (w' - w) dw'.  Splitting
    1/(w' - w) = 1/w' + w / (w' (w' - w)) isolates the leading term
    -2 gamma omega_c/pi; the remainder is a Cauchy-weighted integral over
    w' > 0 after folding the negative half-line.
    """
    if params.omega_c is WIDE_BAND:
        raise SingularityError("Re Sigma^R diverges linearly in omega_c in wide-band mode")
    wc = float(params.omega_c)
    g = params.gamma
    lead = -2.0 * g * wc / math.pi
    w = abs(float(omega))
    if w == 0.0:
        return lead
    f = lambda x: math.exp(-x / wc)
    upper = max(60.0 * wc, 4.0 * w)
    # PV int_0^inf e^{-x/wc} / (x - w) dx
    pv, e1 = integrate.quad(f, 0.0, 2.0 * w, weight="cauchy", wvar=w, epsabs=epsabs, limit=400)
    tail, e2 = integrate.quad(lambda x: f(x) / (x - w), 2.0 * w, upper, epsabs=epsabs,
                              epsrel=1e-12, limit=400)
    other, e3 = integrate.quad(lambda x: f(x) / (x + w), 0.0, upper, epsabs=epsabs,
                               epsrel=1e-12, limit=400)
    err = e1 + e2 + e3
    if not err < 1e3 * epsabs + 1e-9 * abs(pv + tail - other):
        raise ToleranceError("principal-value quadrature did not converge", achieved=err)
    return lead - (g * w / math.pi) * (pv + tail - other)


def finite_part_convolution(f, t1: float, params: ModelParams, lower: float = -math.inf,
                            upper: float = math.inf, df=None, h: float = 1e-5,
                            epsabs: float = 1e-10) -> complex:
    """Regularized action int Sigma^S(t1 - t') f(t') dt' over [lower, upper].

    The constant and linear Taylor terms of f at t1 are subtracted and added
    back through the moments P and Q, which carry the Hadamard finite part.
    ``df`` is the derivative of f; a central difference with step ``h`` is
    used when it is omitted.
    """
    if not lower < upper:
        raise ValueError("empty integration interval")
    f1 = f(t1)
    d1 = df(t1) if df is not None else (f(t1 + h) - f(t1 - h)) / (2 * h)
    eta = _eta(params)
    a = 2 * math.pi * params.temperature

    def anti_p(u):
        if math.isinf(u):
            return -1j * params.gamma * params.temperature * math.copysign(1.0, u)
        return _anti_p(u, params, eta)

    def anti_q(u):
        if math.isinf(u):
            return -1j * params.gamma / (2 * math.pi) * math.log(2.0)
        return _anti_q(u, params, eta)

    ua, ub = t1 - upper, t1 - lower
    P = anti_p(ub) - anti_p(ua)
    Q = anti_q(ua) - anti_q(ub)

    def rem(tp):
        u = t1 - tp
        if abs(u) * a < 1e-6:
            return 0j
        return sigma_S_time(u, params) * (f(tp) - f1 - d1 * (tp - t1))

    span = 40.0 / a
    lo = max(lower, t1 - span)
    hi = min(upper, t1 + span)
    pts = [t1]
    if params.omega_c is not WIDE_BAND:
        w = 1.0 / params.omega_c
        pts += [t1 - 30 * w, t1 + 30 * w]
    val, _ = _cquad(rem, lo, hi, pts, epsabs)
    # tails beyond the thermal window, where Sigma^S ~ exp(-2 pi T |u|)
    if lower < lo:
        v, _ = _cquad(rem, max(lower, lo - 400.0 / a), lo, None, epsabs)
        val += v
    if upper > hi:
        v, _ = _cquad(rem, hi, min(upper, hi + 400.0 / a), None, epsabs)
        val += v
    return P * f1 + Q * d1 + val


def p_antiderivative(u, params: ModelParams):
    """Antiderivative of Sigma^S(u): -i g T sgn(u) (1 - E^2) / D.

    P(t1, t2) = p_antiderivative(t1 - t0) - p_antiderivative(t1 - t2).
    """
    u = np.asarray(u, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = _anti_p(u, params, _eta(params))
    return _as_output(out, u.ndim == 0)


def q_antiderivative(u, params: ModelParams):
    """Antiderivative of u Sigma^S(u).

    Q(t1, t2) = q_antiderivative(t1 - t2) - q_antiderivative(t1 - t0).
    """
    u = np.asarray(u, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = _anti_q(u, params, _eta(params))
    return _as_output(out, u.ndim == 0)


def transient_bound(s, params: ModelParams):
    """Bound on the departure of P and Q from their translation-invariant limits.

    Both antiderivatives approach constants as E = exp(-2 pi T s) -> 0; the
    returned bound is (2 g T (1 + s) + g/pi) E / (1 - E)^2.
    """
    s = np.asarray(s, dtype=float)
    E = np.exp(-2 * math.pi * params.temperature * s)
    g, T = params.gamma, params.temperature
    with np.errstate(divide="ignore"):
        out = (2 * g * T * (1 + s) + g / math.pi) * E / (-np.expm1(-2 * math.pi * T * s)) ** 2
    return _as_output(out, s.ndim == 0)


def translation_invariance_time(params: ModelParams, tol: float = 1e-10) -> float:
    """Smallest distance from t0 beyond which P and Q are translation invariant to ``tol``."""
    a = 2 * math.pi * params.temperature
    if params.gamma == 0:
        return 0.0
    s = 1.0 / a
    while transient_bound(s, params) > tol:
        s *= 1.25
    lo, hi = s / 1.25, s
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if transient_bound(mid, params) > tol:
            lo = mid
        else:
            hi = mid
    return hi
