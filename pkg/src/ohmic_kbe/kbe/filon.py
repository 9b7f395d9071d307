"""Product-quadrature weights for the stiff P and Q terms near the diagonal.

On the line t2 = t_m the two-step update needs int h(tau) K(t_n + tau, t_m) g(tau)
dtau for K in {P, Q} and a slowly varying factor g (G^A or its derivative).
g is replaced by its interpolant on the nodes (t_{n-1}, t_n, t_{n+1}) and the
kernel is integrated exactly against the interpolation basis.  On the line
m = n the factor has a kink at tau = 0, so piecewise-linear hats are used.

With c = n - m and A_P, A_Q the antiderivatives of Sigma^S and u Sigma^S,

    P(t_n + tau, t_m) = A_P(n dt + tau) - A_P(c dt + tau)
    Q(t_n + tau, t_m) = A_Q(c dt + tau) - A_Q(n dt + tau),

so every weight is a lag part (three lines, computed once) plus an absolute
part that depends on n only and becomes constant far from t0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from ..model import ModelParams, ToleranceError, WIDE_BAND
from ..selfenergy import p_antiderivative, q_antiderivative, translation_invariance_time
from .stepper import StepperCoeffs, hat_basis, quadratic_basis

_QUAD_EPS = 1e-13
BOOTSTRAP_CUTOFF_FACTOR = 1.0e3


@dataclass(frozen=True)
class TranslationInvariant:
    """Cache key of weights that depend on the lag n - m only."""

    lag: int


@dataclass(frozen=True)
class FilonWeightSet:
    """Weights for nodes (-1, 0, +1) of one line.

    Attributes
    ----------
    wq, wp : ndarray of complex, shape (3,)
        Weights of the Q and P kernels.
    key : tuple or TranslationInvariant
        (n, m) or TranslationInvariant(n - m).
    """

    wq: np.ndarray
    wp: np.ndarray
    key: object


def _basis_for(c: int):
    return hat_basis if c == 0 else quadratic_basis


def _imag_quad(f, lo, hi, points, epsabs):
    pts = [p for p in points if lo < p < hi]
    kw = dict(epsabs=epsabs, epsrel=1e-12, limit=500)
    if pts:
        kw["points"] = pts
    val, err = integrate.quad(f, lo, hi, **kw)
    if err > max(100 * epsabs, 1e-9 * abs(val)):
        raise ToleranceError("Filon weight quadrature did not converge", achieved=err)
    return val


class FilonTables:
    """Lag and absolute parts of the Filon weights for one parameter set.

    Parameters
    ----------
    params : ModelParams
        Bath parameters.
    coeffs : StepperCoeffs
        Integrator providing h.
    tol : float
        Absolute tolerance of the translation-invariance switch.
    """

    def __init__(self, params: ModelParams, coeffs: StepperCoeffs, tol: float = 1e-10,
                 epsabs: float = _QUAD_EPS):
        self.params = params
        self.coeffs = coeffs
        self.dt = coeffs.dt
        self.epsabs = epsabs
        dt = self.dt
        # weights carry a factor of order dt^2 from h
        self.ti_time = translation_invariance_time(params, tol / max(dt * dt, 1e-300))
        self.n_ti = max(3, math.ceil(self.ti_time / dt) + 2)
        self.lag_p = {}
        self.lag_q = {}
        for c in (-1, 0, 1):
            self.lag_p[c], self.lag_q[c] = self._lag_part(c)
        self._abs = {}
        U = {b: self._basis_integral(b) for b in (quadratic_basis, hat_basis)}
        ap_inf = complex(-1j * params.gamma * params.temperature)
        aq_inf = complex(-1j * params.gamma / (2 * math.pi) * math.log(2.0))
        self._abs_inf = {b: (ap_inf * U[b], aq_inf * U[b]) for b in U}

    def _basis_integral(self, basis):
        dt = self.dt
        return (self.coeffs.integrate(lambda x: basis(x, dt), -dt, 0.0)
                + self.coeffs.integrate(lambda x: basis(x, dt), 0.0, dt))

    def _kernel_integrals(self, shift: float, basis, fold_odd: bool):
        """int h(tau) A(shift + tau) l_j(tau) dtau for A in {A_P, A_Q}, imaginary parts."""
        dt, p, h = self.dt, self.params, self.coeffs.h
        sing = -shift
        pts = [sing]
        if p.omega_c is not WIDE_BAND:
            w = 1.0 / p.omega_c
            pts += [sing - 40 * w, sing + 40 * w, sing - w, sing + w]
        pts.append(0.0)
        outp = np.zeros(3)
        outq = np.zeros(3)
        for j in range(3):
            lj = lambda x, j=j: basis(x, dt)[j]
            if fold_odd:
                # A_P is odd about the singular point: principal value by folding
                fp = lambda x: (h(x) * lj(x) - h(-x) * lj(-x)) * np.imag(p_antiderivative(x, p)) \
                    if x != 0.0 else 0.0
                outp[j] = _imag_quad(fp, 0.0, dt, [w for w in pts if w > 0], self.epsabs)
            else:
                fp = lambda x: h(x) * lj(x) * np.imag(p_antiderivative(shift + x, p)) \
                    if shift + x != 0.0 else 0.0
                outp[j] = _imag_quad(fp, -dt, dt, pts, self.epsabs)
            fq = lambda x: h(x) * lj(x) * np.imag(q_antiderivative(shift + x, p)) \
                if (shift + x != 0.0 or p.omega_c is not WIDE_BAND) else 0.0
            outq[j] = _imag_quad(fq, -dt, dt, pts, self.epsabs)
        return 1j * outp, 1j * outq

    def _lag_part(self, c: int):
        fold = c == 0 and self.params.omega_c is WIDE_BAND
        return self._kernel_integrals(c * self.dt, _basis_for(c), fold)

    def absolute_part(self, n: int, basis):
        """(int h A_P(n dt + tau) l_j, int h A_Q(n dt + tau) l_j)."""
        if n >= self.n_ti:
            return self._abs_inf[basis]
        key = (n, basis)
        hit = self._abs.get(key)
        if hit is not None:
            return hit
        if n <= 2:
            val = self._kernel_integrals(n * self.dt, basis, False)
        else:
            dt, p = self.dt, self.params
            f = lambda x: basis(x, dt) * p_antiderivative(n * dt + x, p)
            g = lambda x: basis(x, dt) * q_antiderivative(n * dt + x, p)
            co = self.coeffs
            val = (co.integrate(f, -dt, 0.0) + co.integrate(f, 0.0, dt),
                   co.integrate(g, -dt, 0.0) + co.integrate(g, 0.0, dt))
        self._abs[key] = val
        return val

    def weights(self, n: int, m: int) -> FilonWeightSet:
        """Weight set of line m at step n, for m in {n-1, n, n+1}."""
        c = n - m
        if c not in (-1, 0, 1):
            raise ValueError("Filon weights exist only on the three diagonal-adjacent lines")
        if m < 0 or n < 1:
            raise ValueError("invalid step indices")
        ti = min(n - 1, m) >= self.n_ti
        key = TranslationInvariant(c) if ti else (n, m)
        if m == 0:
            z = np.zeros(3, dtype=complex)
            return FilonWeightSet(z, z.copy(), key)
        ap, aq = self.absolute_part(n, _basis_for(c))
        wp = ap - self.lag_p[c]
        wq = self.lag_q[c] - aq
        return FilonWeightSet(np.asarray(wq), np.asarray(wp), key)

    def prune(self, n: int):
        """Drop cached absolute parts that can no longer be requested."""
        for key in [k for k in self._abs if k[0] < n - 1]:
            del self._abs[key]


def bootstrap_weights(params: ModelParams, coeffs: StepperCoeffs, epsabs: float = _QUAD_EPS):
    """Weights of the first diagonal step, t1 in [t0, t0 + dt] on the line t2 = t0 + dt.

    Returns (wp, wq), each for the linear basis on nodes (t0, t0 + dt), of
    int chi(dt - s) K(t0 + s, t0 + dt) lambda_i(s) ds.  In wide-band mode
    the kernel uses the cutoff BOOTSTRAP_CUTOFF_FACTOR / dt.
    """
    dt = coeffs.dt
    chi = coeffs.chi
    if params.omega_c is WIDE_BAND:
        # the switch-on singularity of P at t1 = t0 is only log-integrable
        # with a cutoff; the choice affects the initial transient only
        params = params.replace(omega_c=BOOTSTRAP_CUTOFF_FACTOR / dt)
    pts = [0.0, dt]
    if params.omega_c is not WIDE_BAND:
        w = 1.0 / params.omega_c
        pts += [40 * w, w, dt - w, dt - 40 * w]
    lam = (lambda s: 1.0 - s / dt, lambda s: s / dt)

    def P(s):
        return np.imag(p_antiderivative(s, params) - p_antiderivative(s - dt, params))

    def Q(s):
        return np.imag(q_antiderivative(s - dt, params) - q_antiderivative(s, params))

    wp = np.zeros(2)
    wq = np.zeros(2)
    for i in range(2):
        fp = lambda s, i=i: chi(dt - s) * lam[i](s) * P(s) if 0.0 < s < dt else 0.0
        fq = lambda s, i=i: chi(dt - s) * lam[i](s) * Q(s) if 0.0 < s < dt else 0.0
        wp[i] = _imag_quad(fp, 0.0, dt, pts, epsabs)
        wq[i] = _imag_quad(fq, 0.0, dt, pts, epsabs)
    return 1j * wp, 1j * wq
