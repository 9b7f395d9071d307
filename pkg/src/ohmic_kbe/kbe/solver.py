"""Time stepping of the Kadanoff-Baym equations of the ohmic oscillator.

Method of lines on the two-time grid t_n = t0 + n dt.  For fixed t2 = t_m,
G^A(t1, t2) and G^S(t1, t2) obey damped-oscillator equations in t1; the noise
enters G^S through

    F(t1, t2) = int_{t0}^{t2} Sigma^S(t1 - t') G^A(t', t2) dt'
              = [Sigma^S R_2](t1, t2) + G^A P(t1, t2) + dG^A Q(t1, t2),

where R_2 is the remainder of the first-order Taylor expansion of G^A about
t' = t1.  The remainder term is tabulated once by Simpson's rule, since the
force depends on G^A only.  For t1 > t2 the kink of G^A at t' = t2 makes it
behave as KINK * l log l in the lag l = t1 - t2; the 1/u^2 part of that
integrand is integrated in closed form and the l log l term is integrated
exactly against the interpolation basis.  With a finite cutoff the kernel
has structure of width 1/omega_c at t' = t1 that the grid does not resolve;
its leading image term times the Taylor remainder is likewise integrated in
closed form.  P and Q are closed forms; on the
three lines next to the diagonal they are integrated exactly against the
interpolated G^A factors (Filon weights).

All correlator values of G^S are purely imaginary; internally only their
imaginary parts are carried.
"""

from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from ..model import (
    GridSpec,
    InvariantError,
    ModelParams,
    RegimeError,
    TruncationWarning,
    UNBOUNDED,
    WIDE_BAND,
)
from ..selfenergy import p_antiderivative, q_antiderivative, sigma_S_time
from .filon import FilonTables, FilonWeightSet, TranslationInvariant, bootstrap_weights
from .grid import ANTISYMMETRIC, SYMMETRIC, TwoTimeGrid
from .stepper import (
    ETD,
    VERLET,
    Integrator,
    ccr_residual,
    derivative_profile,
    hat_basis,
    homogeneous_profile,
    interpolation_weights,
    quadratic_basis,
    stepper_coeffs,
    verlet_linear,
)

CCR_TOLERANCE = 5e-3
CAUCHY_SCHWARZ_SLACK = 1e-8
ROW_BUDGET = 4_000_000
# lines beyond this lag get no l log l correction (it decays like 1/L^2)
KINK_LINES = 256


def default_memory_depth(params: ModelParams, dt: float, multiples: float = 25.0) -> int:
    """History depth that resolves Sigma^S down to exp(-multiples)."""
    return max(3, math.ceil(multiples / (2 * math.pi * params.temperature * dt)))


def check_regime(params: ModelParams):
    """Reject configurations outside the solver's domain."""
    if not params.underdamped:
        raise RegimeError("the solver supports the underdamped regime only")
    if params.gamma / params.temperature >= 1e3 and params.gamma > params.omega0:
        raise RegimeError(
            "deep-overdamped/ultra-cold corner (gamma/T >= 1e3 with gamma > omega0): "
            "the remainder term is too localized for the grid")


def _origin_model(u, a, g):
    """Imaginary part of (Sigma_0(u) u^2 - i g/pi) / 2 per unit d^2 G^A.

    Sigma_0 = -(i g/pi) Re (a + i u)^-2 is the near-origin form of the
    finite-cutoff kernel, a = 1/omega_c.  Times d^2 G^A it matches
    Sigma^S R_2 at |u| ~ a, where the grid cannot resolve it.
    """
    return -(g / (2 * math.pi)) * (a ** 4 + 3 * a * a * u * u) / (a * a + u * u) ** 2


def _origin_model_integral(u, a, g):
    """Antiderivative of ``_origin_model`` in u, odd."""
    x = u / a
    return -(g / (2 * math.pi)) * a * (2 * np.arctan(x) - x / (1 + x * x))


def _kink_model(u, l, g):
    """Leading small-u form of Sigma^S R_2 on a line of positive lag l."""
    return (g * g / (2 * math.pi)) * (-2 * l * l / (u * u) + 4 * l / u)


def cumulative_simpson(y: np.ndarray, dx: float) -> np.ndarray:
    """Cumulative integral along the last axis: composite Simpson for even
    counts of intervals, Simpson plus a closing 3/8 panel for odd counts, and
    the trapezoid for a single interval."""
    K = y.shape[-1] - 1
    out = np.zeros(y.shape)
    if K >= 1:
        out[..., 1] = 0.5 * dx * (y[..., 0] + y[..., 1])
    if K >= 2:
        pairs = dx / 3.0 * (y[..., 0:K - 1:2] + 4.0 * y[..., 1:K:2] + y[..., 2:K + 1:2])
        even = np.cumsum(pairs, axis=-1)
        out[..., 2::2] = even
        if K >= 3:
            J = np.arange(3, K + 1, 2)
            base = np.zeros(y.shape[:-1] + (len(J),))
            base[..., 1:] = even[..., :len(J) - 1]
            tail = 3.0 * dx / 8.0 * (y[..., J - 3] + 3.0 * y[..., J - 2] + 3.0 * y[..., J - 1] + y[..., J])
            out[..., 3::2] = base + tail
    return out


@dataclass
class ForceTerms:
    """Parts of the noise force at one grid point (t_n, t_m).

    ``slow`` is the tabulated remainder term; the total force is
    slow + ga * p + dga * q.
    """

    slow: complex
    ga: float
    p: complex
    dga: float
    q: complex

    @property
    def total(self) -> complex:
        return self.slow + self.ga * self.p + self.dga * self.q


class SolverState:
    """Grids, tables and counters of one KBE run.

    Created by :func:`initialize`; advanced by :func:`step`.
    """

    def __init__(self, params: ModelParams, grid: GridSpec, initial_variance: float,
                 integrator: Integrator, initial_momentum_variance: float | None):
        self.params = params
        self.grid = grid
        self.integrator = integrator
        self.dt = float(grid.dt)
        self.v0 = float(initial_variance)
        self.p0 = (params.omega0 ** 2 * self.v0 if initial_momentum_variance is None
                   else float(initial_momentum_variance))
        self.coeffs = stepper_coeffs(params, self.dt, integrator)
        if integrator is VERLET:
            self.A, self.B, self.S = verlet_linear(self.coeffs, params.omega0)
        else:
            self.A, self.B, self.S = self.coeffs.a, self.coeffs.b, 1.0
        N = grid.n_steps
        md = grid.memory_depth
        self.M = max(2, N + 1 if md is UNBOUNDED else int(md))
        self.current_step = 0
        self.weight_cache: dict = {}
        rows = int(min(N + 2, max(4, ROW_BUDGET // (self.M + 1))))
        self.gS = TwoTimeGrid(self.M, SYMMETRIC, self.dt, rows, imaginary=True)
        self.gA = TwoTimeGrid(self.M + 2, ANTISYMMETRIC, self.dt, max(4, min(rows, N + 3)))
        self.diag = np.zeros(N + 2)
        self._build_profiles()
        self._build_tables()
        self.filon = FilonTables(params, self.coeffs)
        self.u_quad = interpolation_weights(self.coeffs, quadratic_basis) * self.S
        self.u_hat = interpolation_weights(self.coeffs, hat_basis) * self.S
        self.kink = self._kink_correction()
        self.kink[:3] += self._cutoff_step_correction()
        if integrator is VERLET:
            self.kink += self._verlet_correction()
        self._L = np.arange(self.M + 2)

    # ------------------------------------------------------------------ tables
    def _build_profiles(self):
        M = self.M
        co = self.coeffs
        self.ga = homogeneous_profile(co, self.params.omega0, M + 4)
        self.dga = derivative_profile(co, self.ga)
        self.ccr = ccr_residual(self.ga, self.dt)
        lags = np.arange(-2, M + 2)
        self.ga_l = np.sign(lags) * self.ga[np.abs(lags)]
        self.dga_l = self.dga[np.abs(lags)]

    def _build_tables(self):
        p, dt, M, N = self.params, self.dt, self.M, self.grid.n_steps
        k = np.arange(N + 3) * dt
        lags = np.arange(-2, M + 2)
        u = lags * dt
        self.Ps = np.imag(p_antiderivative(k, p))
        self.Qs = np.imag(q_antiderivative(k, p))
        self.Pl = np.imag(p_antiderivative(u, p))
        self.Ql = np.imag(q_antiderivative(u, p))
        self.mcap = min(M, N + 1)
        self.FR = self._remainder_table()

    def _remainder_table(self) -> np.ndarray:
        """Imaginary part of int Sigma^S(t1 - t') R_2(t') dt' for lags -2..M+1
        and lines 0..mcap, truncated at t1 - t' <= M dt."""
        p, dt, M = self.params, self.dt, self.M
        w0, g = p.omega0, p.gamma
        Jmax = M + 2
        a = 0.0 if p.omega_c is WIDE_BAND else 1.0 / p.omega_c
        j = np.arange(Jmax + 1)
        ga = self.ga
        out = np.zeros((M + 4, self.mcap + 1))
        cols = np.arange(self.mcap + 1)
        block = max(1, 2_000_000 // (Jmax + 1))
        for start in range(0, M + 4, block):
            li = np.arange(start, min(M + 4, start + block))
            lags = li - 2
            uu = (lags[:, None] + j[None, :]) * dt
            r2 = -ga[j][None, :] - self.ga_l[li][:, None] + self.dga_l[li][:, None] * uu
            zero = (lags[:, None] + j[None, :]) == 0
            sig = np.imag(sigma_S_time(np.where(zero, 1.0, uu), p))
            y = sig * r2
            # d^2 G^A from the equation of motion on the branch t1 <= t2
            ak = np.abs(lags)
            d2 = w0 * w0 * ga[ak] + g * self.dga[ak]
            if a > 0:
                # remove the cutoff-scale structure near t' = t1 (lags <= 0 only)
                near = (lags <= 0)[:, None]
                y = np.where(zero, 0.0, y)
                y = y - np.where(near, d2[:, None] * _origin_model(uu, a, g), 0.0)
            else:
                # l'Hopital value at t' = t1
                y = np.where(zero, (g / (2 * math.pi)) * d2[:, None], y)
            # singular part of the kink remainder for l > 0, integrated exactly
            lpos = np.maximum(lags, 0)[:, None] * dt
            usafe = np.where(uu > 0, uu, 1.0)
            y = y - np.where(lpos > 0, _kink_model(usafe, lpos, g), 0.0)
            C = cumulative_simpson(y, dt)
            J = np.minimum(cols[None, :], (M - lags)[:, None])
            ok = J >= 0
            Jc = np.maximum(J, 0)
            U = lpos + Jc * dt
            with np.errstate(divide="ignore", invalid="ignore"):
                exact = (g * g / (2 * math.pi)) * (2 * lpos ** 2 * (1.0 / U - 1.0 / lpos)
                                                   + 4 * lpos * np.log(U / lpos))
            exact = np.where(lpos > 0, exact, 0.0)
            if a > 0:
                u0 = lags[:, None] * dt
                om = d2[:, None] * (_origin_model_integral(u0 + Jc * dt, a, g)
                                    - _origin_model_integral(u0, a, g))
                exact = exact + np.where((lags <= 0)[:, None], om, 0.0)
            out[li] = np.where(ok, np.take_along_axis(C, Jc, axis=1) + exact, 0.0)
        return out

    def _kink_correction(self) -> np.ndarray:
        """Exact-minus-interpolated integral of KINK * l log(l/dt) on each line.

        Entry L belongs to the update of lag L (nodes L-2, L-1, L); L = 1 uses
        hats, the others the quadratic basis.
        """
        dt, co, S = self.dt, self.coeffs, self.S
        kappa = -2.0 * self.params.gamma ** 2 / math.pi
        phi = lambda x: np.where(x > 0, x * np.log(np.where(x > 0, x, 1.0) / dt), 0.0)
        n = min(self.M + 2, KINK_LINES)
        out = np.zeros(self.M + 2)
        for L in range(1, n):
            basis, uw = (hat_basis, self.u_hat) if L == 1 else (quadratic_basis, self.u_quad)
            nodes = phi((L - 2 + np.arange(3)) * dt)
            if L <= 3:
                f = lambda x: float(co.h(x) * phi((L - 1) * dt + x))
                ex = sum(integrate.quad(f, lo, hi, epsabs=1e-18, epsrel=1e-13, limit=200)[0]
                         for lo, hi in ((-dt, 0.0), (0.0, dt)))
            else:
                ex = (co.integrate(lambda x: phi((L - 1) * dt + x), -dt, 0.0)
                      + co.integrate(lambda x: phi((L - 1) * dt + x), 0.0, dt))
            out[L] = kappa * (S * ex - np.dot(uw, nodes))
        return out

    def _verlet_correction(self) -> np.ndarray:
        """Error of the Verlet linear terms on the log singularity of G^S.

        Along a line, Im d^2 G^S = -(gamma/pi) log|x| + smooth near the
        diagonal (x the lag), from the dG^A Q force.  Verlet replaces
        int h (-w0^2 y - gamma y') by dt^2 (-w0^2 y_n) - gamma dt (y_{n+1} -
        y_{n-1})/2; entry L is the exact-minus-discrete value of that
        replacement for the singular part phi of y.
        """
        dt, co, S = self.dt, self.coeffs, self.S
        g, w0 = self.params.gamma, self.params.omega0
        c = -g / math.pi

        def logx(x):
            ax = np.abs(x)
            return np.where(ax > 0, np.log(np.where(ax > 0, ax, 1.0)), 0.0)

        phi = lambda x: c * (0.5 * x * x * logx(x) - 0.75 * x * x)
        dphi = lambda x: c * (x * logx(x) - x)
        n = min(self.M + 2, KINK_LINES)
        out = np.zeros(self.M + 2)
        for L in range(n):
            xc = (L - 1) * dt
            f = lambda x: -w0 * w0 * phi(xc + x) - g * dphi(xc + x)
            if L <= 3:
                fs = lambda x: float(co.h(x) * f(x))
                ex = sum(integrate.quad(fs, lo, hi, epsabs=1e-18, epsrel=1e-13, limit=200)[0]
                         for lo, hi in ((-dt, 0.0), (0.0, dt)))
            else:
                ex = co.integrate(f, -dt, 0.0) + co.integrate(f, 0.0, dt)
            disc = -w0 * w0 * dt * dt * phi(xc) - g * 0.5 * dt * (phi(xc + dt) - phi(xc - dt))
            out[L] = S * (ex - disc)
        return out

    def _cutoff_step_correction(self) -> np.ndarray:
        """Exact-minus-interpolated integral of the cutoff step on lines L = 0, 1, 2.

        With a finite cutoff the remainder force drops by gamma^2/omega_c
        across the diagonal within a width 1/omega_c; on the grid this is a
        step (half height at lag 0) that the interpolants smear.
        """
        out = np.zeros(3)
        if self.params.omega_c is WIDE_BAND:
            return out
        dt, co, S = self.dt, self.coeffs, self.S
        K = self.params.gamma ** 2 / self.params.omega_c
        left = co.integrate(lambda x: np.ones_like(x), -dt, 0.0)
        right = co.integrate(lambda x: np.ones_like(x), 0.0, dt)
        # (exact integral of h * step, step values at the nodes lag L-2, L-1, L)
        cases = {0: (left + right, self.u_quad, (1.0, 1.0, 0.5)),
                 1: (left, self.u_hat, (1.0, 0.5, 0.0)),
                 2: (0.0, self.u_quad, (0.5, 0.0, 0.0))}
        for L, (ex, uw, theta) in cases.items():
            out[L] = K * (S * ex - np.dot(uw, theta))
        return out

    # --------------------------------------------------------------- accessors
    def lag_index(self, lag):
        return np.asarray(lag) + 2

    def force_terms(self, n: int, m: int) -> ForceTerms:
        l = n - m
        if not -2 <= l <= self.M + 1:
            raise IndexError("point outside the retained band")
        i = l + 2
        mc = min(m, self.mcap)
        if m == 0:
            pv, qv = 0.0, 0.0
        else:
            pv = self.Ps[n] - self.Pl[i]
            qv = self.Ql[i] - self.Qs[n]
        return ForceTerms(1j * self.FR[i, mc], float(self.ga_l[i]), 1j * pv,
                          float(self.dga_l[i]), 1j * qv)

    def weights(self, n: int, m: int) -> FilonWeightSet:
        fl = self.filon
        if min(n - 1, m) >= fl.n_ti and m > 0:
            key = TranslationInvariant(n - m)
            ws = self.weight_cache.get(key)
            if ws is None:
                ws = fl.weights(n, m)
                self.weight_cache[key] = ws
            return ws
        key = (n, m)
        ws = self.weight_cache.get(key)
        if ws is None:
            ws = fl.weights(n, m)
            self.weight_cache[key] = ws
        return ws

    def _prune_cache(self, n: int):
        for key in [k for k in self.weight_cache if isinstance(k, tuple) and isinstance(k[0], int) and k[0] < n]:
            del self.weight_cache[key]
        self.filon.prune(n)

    def variance(self, n: int | None = None) -> float:
        """i G^S(t_n, t_n) = <phi^2>(t_n)."""
        n = self.current_step if n is None else n
        return -float(self.diag[n])

    @property
    def time(self) -> float:
        return self.params.t0 + self.current_step * self.dt


def initialize(params: ModelParams, grid: GridSpec, initial_variance: float,
               integrator: Integrator = ETD,
               initial_momentum_variance: float | None = None) -> SolverState:
    """Set up grids and tables for an uncorrelated initial state.

    Parameters
    ----------
    params, grid : ModelParams, GridSpec
        Physical and numerical parameters.
    initial_variance : float
        <phi^2> at t0; G^S(t0, t0) = -i initial_variance.
    integrator : Integrator
        ETD (default) or VERLET.
    initial_momentum_variance : float, optional
        <pi^2> at t0, default omega0^2 * initial_variance.  <{phi, pi}> = 0.
    """
    if not initial_variance > 0:
        raise ValueError("initial_variance must be positive")
    check_regime(params)
    if grid.truncation_flagged(params):
        warnings.warn("memory window is shorter than 15/(2 pi T), the range of the noise kernel",
                      TruncationWarning, stacklevel=2)
    st = SolverState(params, grid, initial_variance, integrator, initial_momentum_variance)
    if st.ccr > CCR_TOLERANCE:
        raise InvariantError(f"CCR residual {st.ccr:.3g} exceeds {CCR_TOLERANCE}", step=0)
    row = st.gS.new_row(0)
    row[0] = -st.v0
    st.diag[0] = -st.v0
    for n in range(2):
        ra = st.gA.new_row(n)
        k = min(n, len(ra) - 1)
        ra[:k + 1] = st.ga[:k + 1]
    return st


def _advance_gA(st: SolverState, n: int):
    """Row n of G^A by the two-step recursion on every retained line."""
    ra = st.gA.new_row(n)
    top = min(n, st.gA.depth)
    ra[0] = 0.0
    if top >= 1:
        ra[1] = st.ga[1]
    if top >= 2:
        r1 = st.gA.row(n - 1)
        r2 = st.gA.row(n - 2)
        ra[2:top + 1] = st.A * r1[1:top] - st.B * r2[0:top - 1]


def _bootstrap(st: SolverState):
    """First step: line t2 = t0 exactly, then the diagonal from t1 = t0."""
    dt, co, p = st.dt, st.coeffs, st.params
    y0 = -st.v0
    w, g = co.omega, co.gamma
    new = st.gS.new_row(1)
    if st.integrator is ETD:
        e = math.exp(-0.5 * g * dt)
        c, s = math.cos(w * dt), math.sin(w * dt)
        new[1] = y0 * e * (c + 0.5 * g / w * s)
        ydot = -st.p0 * e * s / w
        yl = new[1]
        base = e * (yl * c + (ydot + 0.5 * g * yl) * s / w)
    else:
        new[1] = y0 * (1.0 - 0.5 * (p.omega0 * dt) ** 2)
        ydot = -st.p0 * dt
        yl = new[1]
        base = yl + dt * ydot + 0.5 * dt * dt * (-p.omega0 ** 2 * yl - g * ydot)
    # linear interpolation between the nodes t1 = t0 (lag -1) and t1 = t0 + dt (lag 0)
    lam = lambda x: np.stack([1.0 - x / dt, x / dt])
    xs = 0.5 * dt * (np.polynomial.legendre.leggauss(24)[0] + 1.0)
    ws = 0.5 * dt * np.polynomial.legendre.leggauss(24)[1]
    uu = np.sum(ws * co.chi(dt - xs) * lam(xs), axis=1)
    wp, wq = bootstrap_weights(p, co)
    key = ("bootstrap",)
    st.weight_cache[key] = FilonWeightSet(wq, wp, key)
    idx = st.lag_index(np.array([-1, 0]))
    mc = min(1, st.mcap)
    I = (np.dot(uu, st.FR[idx, mc]) + np.dot(st.ga_l[idx], wp.imag)
         + np.dot(st.dga_l[idx], wq.imag))
    new[0] = base + I
    st.diag[1] = new[0]


def step(st: SolverState) -> SolverState:
    """Advance the state from t_n to t_{n+1}.

    (i) G^A gains row n+2 so that it stays one step ahead; (ii) every retained
    line t2 = t_m, m <= n, of G^S is advanced to t_{n+1}; (iii) the diagonal
    point is obtained from one more step along the line t2 = t_{n+1}.
    """
    n = st.current_step
    if n >= st.grid.n_steps:
        raise IndexError("all configured steps have been taken")
    _advance_gA(st, n + 2)
    if n == 0:
        _bootstrap(st)
        st.current_step = 1
        _check(st, 1)
        return st
    M, A, B = st.M, st.A, st.B
    FR, gal, dgal = st.FR, st.ga_l, st.dga_l
    rowN = st.gS.row(n)
    rowP = st.gS.row(n - 1)
    new = st.gS.new_row(n + 1)
    Lmax = min(n + 1, M)
    uq, uh = st.u_quad, st.u_hat
    if Lmax >= 3:
        L = st._L[3:Lmax + 1]
        mc = np.minimum(n + 1 - L, st.mcap)
        I = np.zeros(Lmax - 2)
        for j in (-1, 0, 1):
            i = L + (1 + j)  # index of lag L - 1 + j
            F = (FR[i, mc] + gal[i] * (st.Ps[n + j] - st.Pl[i])
                 + dgal[i] * (st.Ql[i] - st.Qs[n + j]))
            I += uq[j + 1] * F
        I += st.kink[3:Lmax + 1]
        if n + 1 - Lmax == 0:
            # line t2 = t0 carries no force
            I[-1] = 0.0
        new[3:Lmax + 1] = A * rowN[2:Lmax] - B * rowP[1:Lmax - 1] + I
    # lines m = n - 1 and m = n, then the diagonal on m = n + 1
    S = st.S
    for m, u_w in ((n - 1, uq), (n, uh)):
        L = n + 1 - m
        ws = st.weights(n, m)
        idx = np.array([L - 2, L - 1, L]) + 2
        mc = min(m, st.mcap)
        I = (np.dot(u_w, FR[idx, mc]) + S * np.dot(gal[idx], ws.wp.imag)
             + S * np.dot(dgal[idx], ws.wq.imag) + st.kink[L])
        if m == 0:
            I = 0.0
        yprev = rowP[L - 2] if L >= 2 else rowN[1]
        new[L] = A * rowN[L - 1] - B * yprev + I
    ws = st.weights(n, n + 1)
    idx = np.array([-2, -1, 0]) + 2
    mc = min(n + 1, st.mcap)
    I = (np.dot(uq, FR[idx, mc]) + S * np.dot(gal[idx], ws.wp.imag)
         + S * np.dot(dgal[idx], ws.wq.imag) + st.kink[0])
    new[0] = A * new[1] - B * new[2] + I
    st.diag[n + 1] = new[0]
    st.current_step = n + 1
    _check(st, n + 1)
    if n % 64 == 0:
        st._prune_cache(n)
    return st


def _check(st: SolverState, n: int):
    v = -st.diag[n]
    if not math.isfinite(v) or v <= 0:
        raise InvariantError(f"variance {v!r} is not positive at step {n}", step=n)


def cauchy_schwarz_violation(st: SolverState, n: int | None = None) -> float:
    """max over retained m of |G^S(t_n, t_m)|^2 - <phi^2>(t_n) <phi^2>(t_m), clipped at 0."""
    n = st.current_step if n is None else n
    row = st.gS.row(n)
    top = min(n, st.M)
    m = n - np.arange(top + 1)
    lhs = row[:top + 1] ** 2
    rhs = st.diag[n] * st.diag[m]
    return float(max(0.0, np.max(lhs - rhs)))


def filon_weights(state: SolverState, n: int, m: int) -> FilonWeightSet:
    """Filon weights of line m at step n (m in {n-1, n, n+1})."""
    return state.weights(n, m)


def regularized_force(state: SolverState, n: int, m: int) -> ForceTerms:
    """Force decomposition at (t_n, t_m): remainder term, G^A P and dG^A Q parts."""
    return state.force_terms(n, m)


@dataclass
class Observers:
    """What :func:`evolve` records.

    Attributes
    ----------
    slices : tuple of int
        Reference indices m for the slices G^S(t_n, t_m), n >= m.
    cauchy_schwarz : bool
        Track the Cauchy-Schwarz violation of every new row.
    """

    slices: tuple = ()
    cauchy_schwarz: bool = True


@dataclass
class Trajectory:
    """Per-step observables of a run."""

    times: np.ndarray
    variance: np.ndarray
    ccr_residual: np.ndarray
    cs_violation: np.ndarray
    wall_time: np.ndarray
    slices: dict = field(default_factory=dict)

    @property
    def final_variance(self) -> float:
        return float(self.variance[-1])


def evolve(state: SolverState, observers: Observers | None = None,
           n_steps: int | None = None, callback=None) -> Trajectory:
    """Run ``n_steps`` steps (default: up to grid.n_steps) and record observables.

    The record starts with the current step, so zero steps give the current
    observables only.
    """
    obs = observers or Observers()
    start = state.current_step
    stop = state.grid.n_steps if n_steps is None else min(state.grid.n_steps, start + n_steps)
    count = stop - start + 1
    times = state.params.t0 + state.dt * np.arange(start, stop + 1)
    var = np.empty(count)
    cs = np.zeros(count)
    wall = np.empty(count)
    slices = {m: [] for m in obs.slices}
    t_begin = time.perf_counter()

    def record(i):
        n = state.current_step
        var[i] = state.variance(n)
        if obs.cauchy_schwarz:
            cs[i] = cauchy_schwarz_violation(state, n)
        wall[i] = time.perf_counter() - t_begin
        for m in obs.slices:
            if m <= n and n - m <= state.M:
                slices[m].append((state.params.t0 + n * state.dt, state.gS[n, m]))

    record(0)
    for i in range(1, count):
        step(state)
        record(i)
        if callback is not None:
            callback(state)
    sl = {m: (np.array([a for a, _ in v]), np.array([b for _, b in v], dtype=complex))
          for m, v in slices.items()}
    return Trajectory(times, var, np.full(count, state.ccr), cs, wall, sl)
