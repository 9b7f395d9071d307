"""Acceptance suite: one test group per criterion, each recording a PASS/FAIL line.

Verdicts are printed as they are produced and collected again in the
terminal summary (see conftest.py).
"""

import math
import warnings

import numpy as np
import pytest
from scipy import integrate

from ohmic_kbe.analysis import (
    FD2,
    FD4,
    SINC,
    decay_series,
    equilibrium_grid,
    extract_momentum_variance,
    fit_exponential,
    fit_power_law,
    thermalization_scan,
)
from ohmic_kbe.equilibrium import g_S_equilibrium, momentum_variance
from ohmic_kbe.kbe import Observers, cauchy_schwarz_violation, evolve, initialize
from ohmic_kbe.kbe.filon import FilonTables, TranslationInvariant
from ohmic_kbe.kbe.stepper import homogeneous_profile, stepper_coeffs
from ohmic_kbe.model import GridSpec, ModelParams, default_dt, omega_gamma
from ohmic_kbe.selfenergy import (
    finite_part_convolution,
    p_kernel,
    q_diag,
    q_kernel,
    sigma_S_time,
)

from acceptance_log import record
from oracles import kernel_integral, variance_by_quadrature


@pytest.fixture(autouse=True)
def _quiet():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        yield


# -- 1. oracle self-consistency ----------------------------------------------

ORACLE_SETS = [(0.05, 0.01), (0.05, 10.0), (0.1, 0.1), (0.2, 3.0), (0.4, 0.03),
               (0.6, 1.0), (0.8, 0.3), (1.0, 5.0), (1.2, 0.01), (1.5, 10.0)]


def test_criterion_1_oracle_self_consistency():
    worst = 0.0
    for g, T in ORACLE_SETS:
        p = ModelParams(1.0, g, T)
        val = (1j * g_S_equilibrium(0.0, p)).real
        ref = variance_by_quadrature(1.0, g, T)
        worst = max(worst, abs(val - ref) / ref)
    ok = worst <= 1e-6
    record("1", "i gS(0) vs frequency integral, 10 sets", ok, f"worst rel {worst:.2e}")
    assert ok


# -- 2. G^A exactness --------------------------------------------------------

def test_criterion_2_retarded_exactness():
    p = ModelParams(1.0, 0.5, 1.0)
    dt = default_dt(p)
    t = dt * np.arange(1001)
    ref = -np.sin(omega_gamma(p) * t) * np.exp(-0.5 * p.gamma * t) / omega_gamma(p)
    prof = homogeneous_profile(stepper_coeffs(p, dt), p.omega0, 1001)
    err_prof = np.max(np.abs(prof - ref))
    st = initialize(p, GridSpec(dt, 1000, 150), 0.5 / math.tanh(0.5))
    evolve(st, Observers(cauchy_schwarz=False))
    n = st.current_step
    got = np.array([st.gA[n, n - k] for k in range(151)])
    err_grid = np.max(np.abs(got - ref[:151]))
    ok = max(err_prof, err_grid) <= 1e-8
    record("2", "ETD G^A vs closed form over 1000 steps", ok,
           f"profile {err_prof:.1e}, solver grid {err_grid:.1e}")
    assert ok


# -- 3. thermalization benchmark ---------------------------------------------

@pytest.mark.slow
def test_criterion_3_thermalization_scan():
    res = thermalization_scan([0.3, 1.0, 3.0, 10.0], [0.1, 0.3, 0.5, 1.0],
                              ModelParams(1.0, 0.1, 1.0, omega_c=1e5))
    errs = [c.rel_error for c in res.cells]
    ok = len(errs) == 16 and all(math.isfinite(e) and e <= 1e-2 for e in errs)
    ok = ok and all(c.converged for c in res.cells)
    record("3", "4x4 scan, relative error of the long-time diagonal", ok,
           f"max {res.max_error():.2e}")
    assert ok


# -- 4. decomposition identity -----------------------------------------------

def test_criterion_4_decomposition_identity():
    p = ModelParams(1.0, 0.5, 1.0, omega_c=1e3)
    dt = default_dt(p)
    h = dt / 1e3
    w = omega_gamma(p)
    # smooth stand-in for G^A with its exact derivative
    G = lambda tau: -np.sin(w * tau) * np.exp(-0.25 * tau) / w
    dG = lambda tau: (-np.cos(w * tau) + 0.25 * np.sin(w * tau) / w) * np.exp(-0.25 * tau)
    xg, wg = np.polynomial.legendre.leggauss(6)

    def brute(t1, t2):
        n = int(round(t2 / h))
        edges = np.linspace(0.0, t2, n + 1)
        a, b = edges[:-1], edges[1:]
        tot = 0j
        for k in range(0, n, 200000):
            aa, bb = a[k:k + 200000], b[k:k + 200000]
            x = 0.5 * (bb - aa)[:, None] * xg + 0.5 * (bb + aa)[:, None]
            tot += np.sum(0.5 * (bb - aa)[:, None] * wg * sigma_S_time(t1 - x, p) * G(x - t2))
        return tot

    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(20):
        t1, t2 = rng.uniform(0.2, 4.0, 2)
        lhs = brute(t1, t2)
        r2 = lambda tp: sigma_S_time(t1 - tp, p).imag * (
            G(tp - t2) - G(t1 - t2) - dG(t1 - t2) * (tp - t1))
        pts = [x for x in (t1 - 0.04, t1, t1 + 0.04) if 0 < x < t2]
        slow = integrate.quad(r2, 0.0, t2, points=pts or None, limit=800,
                              epsabs=1e-14, epsrel=1e-13)[0]
        rhs = 1j * slow + G(t1 - t2) * p_kernel(t1, t2, p, 0.0) \
            + dG(t1 - t2) * q_kernel(t1, t2, p, 0.0)
        worst = max(worst, abs(lhs - rhs) / abs(lhs))
    ok = worst <= 1e-6
    record("4", "fine-grid convolution vs slow + P + Q split, 20 pairs", ok,
           f"worst rel {worst:.1e}")
    assert ok


# -- 5. jump asymptote -------------------------------------------------------

def test_criterion_5_jump_asymptote():
    g, T = 0.5, 1.0
    t = 20 / (2 * math.pi * T)
    worst_closed = worst_log = 0.0
    vals = []
    for k in (1e4, 1e5, 1e6):
        wc = k * T
        p = ModelParams(1.0, g, T, omega_c=wc)
        q = q_diag(t, p, 0.0)
        # limit of the closed form; its imaginary part is negative
        ref = (1j * g / (2 * math.pi)) * math.log(4 * math.sin(math.pi * T / wc) ** 2)
        worst_closed = max(worst_closed, abs(q - ref) / abs(ref))
        lead = -(1j * g / math.pi) * math.log(wc / (2 * math.pi * T))
        worst_log = max(worst_log, abs(q - lead) / abs(lead))
        vals.append(q)
    decade = -(1j * g / math.pi) * math.log(10.0)
    worst_shift = max(abs((vals[i + 1] - vals[i]) - decade) / abs(decade) for i in range(2))
    ok = worst_closed <= 1e-8 and worst_log <= 1e-2 and worst_shift <= 1e-2
    record("5", "q_diag asymptote and log(omega_c) scaling", ok,
           f"closed form {worst_closed:.1e}, log law {worst_log:.1e}, "
           f"decade shift {worst_shift:.1e}")
    assert ok


# -- 6. classical limit ------------------------------------------------------

def test_criterion_6_classical_limit():
    p0 = ModelParams(1.0, 0.1, 1.0)
    T = 100 * omega_gamma(p0)
    p = p0.replace(temperature=T)
    tests = [lambda t: math.cos(0.3 * t) * math.exp(-((t - 1.0) / 4.0) ** 2),
             lambda t: 1.0 + 0.5 * math.sin(0.2 * t),
             lambda t: math.exp(-0.1 * t * t)]
    worst = 0.0
    for f in tests:
        for t1 in (0.0, 1.5, 3.0):
            val = finite_part_convolution(f, t1, p)
            ref = -2j * p.gamma * T * f(t1)
            worst = max(worst, abs(val - ref) / abs(ref))
    ok = worst <= 2e-2
    record("6", "white-noise action at T = 100 omega_gamma", ok, f"worst rel {worst:.2e}")
    assert ok


# -- 7. non-Markovian decay --------------------------------------------------

@pytest.mark.slow
def test_criterion_7_algebraic_decay():
    p = ModelParams(1.0, 1.0, 0.001, omega_c=1e5)
    d = decay_series(p, t_ref=20.0)
    window = (2.0 / p.gamma, 1 / (2 * math.pi * p.temperature))
    expo, _ = fit_power_law(d.lag, d.kbe, window)
    r2_pow = fit_power_law(d.lag, d.lindblad, window)[1]
    r2_exp = fit_exponential(d.lag, d.lindblad, window)[1]
    ok = abs(expo + 2.0) <= 0.2 and r2_exp > r2_pow
    record("7", "KBE t^-2 tail, Lindblad exponential", ok,
           f"KBE exponent {expo:.3f}; Lindblad r2 exp {r2_exp:.3f} vs power {r2_pow:.3f}")
    assert ok


# -- 8. coarse graining ------------------------------------------------------

STENCILS = (FD2, FD4, SINC)


def _estimates(params, dt):
    grid, centre = equilibrium_grid(params, dt, 64)
    return np.array([extract_momentum_variance(grid, centre, s) for s in STENCILS])


def test_criterion_8_plateau():
    base = ModelParams(1.0, 0.5, 1.0)
    dt = 0.01
    ref = _estimates(base.replace(omega_c=1e4 / dt), dt)
    worst = {}
    for k in (10.0, 100.0):
        est = _estimates(base.replace(omega_c=k / dt), dt)
        worst[k] = float(np.max(np.abs(est / ref - 1)))
    ok = max(worst.values()) <= 1e-2
    record("8", "stencil estimates independent of omega_c for omega_c dt >= 10", ok,
           ", ".join(f"omega_c dt={k:g}: {v:.2%}" for k, v in worst.items())
           + " (vs omega_c dt = 1e4)")
    assert ok


def test_criterion_8_fine_grid():
    worst = 0.0
    for wc, dt in ((100.0, 1e-3), (100.0, 5e-4)):
        p = ModelParams(1.0, 0.5, 1.0, omega_c=wc)
        exact = momentum_variance(p)
        est = _estimates(p, dt)
        worst = max(worst, float(np.max(np.abs(est / exact - 1))))
    ok = worst <= 2e-2
    record("8", "stencil estimates match exact value for omega_c dt <= 0.1", ok,
           f"worst {worst:.2%}")
    assert ok


def test_criterion_8_log_slope():
    p = ModelParams(1.0, 0.5, 1.0)
    lo = momentum_variance(p.replace(omega_c=1e4))
    hi = momentum_variance(p.replace(omega_c=1e6))
    slope = (hi - lo) / math.log(100.0)
    rel = abs(slope / (p.gamma / math.pi) - 1)
    ok = rel <= 5e-2
    record("8", "exact value slope vs ln omega_c equals gamma/pi", ok, f"rel {rel:.2%}")
    assert ok


# -- 9. invariant suite ------------------------------------------------------

INV = ModelParams(1.0, 0.3, 0.5, omega_c=1e5)


@pytest.fixture(scope="module")
def invariant_run():
    dt = default_dt(INV)
    st = initialize(INV, GridSpec(dt, 600, 400), 0.5 / math.tanh(1.0))
    tr = evolve(st)
    return st, tr


def test_criterion_9_symmetry_and_reality(invariant_run):
    st, _ = invariant_run
    n = st.current_step
    exact = True
    worst_re = 0.0
    for a in range(n - 60, n + 1):
        for b in range(max(a - 400, 0), a + 1):
            exact &= st.gS[b, a] == st.gS[a, b] and st.gA[b, a] == -st.gA[a, b]
            worst_re = max(worst_re, abs(np.real(st.gS[a, b])), abs(np.imag(st.gA[a, b])))
    record("9", "symmetry exactness", bool(exact))
    record("9", "reality", worst_re <= 1e-10, f"max {worst_re:.1e}")
    assert exact and worst_re <= 1e-10


def test_criterion_9_ccr_and_cauchy_schwarz(invariant_run):
    st, tr = invariant_run
    ccr = float(np.max(tr.ccr_residual))
    cs = max(float(np.max(tr.cs_violation)), cauchy_schwarz_violation(st))
    record("9", "CCR residual", ccr <= 5e-3, f"max {ccr:.1e}")
    record("9", "Cauchy-Schwarz", cs <= 1e-8, f"max violation {cs:.1e}")
    assert ccr <= 5e-3 and cs <= 1e-8


def test_criterion_9_partition_of_unity():
    worst = 0.0
    for params in (ModelParams(1.0, 0.5, 1.0, omega_c=1e3), ModelParams(1.0, 0.5, 1.0)):
        co = stepper_coeffs(params, default_dt(params))
        tab = FilonTables(params, co)
        for c in (-1, 0, 1):
            for n in (3, 40):
                ws = tab.weights(n, n - c)
                worst = max(worst, abs(ws.wp.sum() - kernel_integral(params, co, n, n - c,
                                                                      p_kernel)))
                if not (params.wide_band and c == 0):
                    worst = max(worst, abs(ws.wq.sum() - kernel_integral(params, co, n, n - c,
                                                                          q_kernel)))
    ok = worst <= 1e-12
    record("9", "Filon partition of unity", ok, f"max {worst:.1e}")
    assert ok


def test_criterion_9_translation_invariance():
    params = ModelParams(1.0, 0.5, 1.0, omega_c=1e3)
    co = stepper_coeffs(params, default_dt(params))
    tab = FilonTables(params, co)
    n0 = tab.n_ti
    worst = 0.0
    for c in (-1, 0, 1):
        cached = tab.weights(n0 + 1, n0 + 1 - c)
        assert cached.key == TranslationInvariant(c)
        for n in (n0 + 1, n0 + 200):
            worst = max(worst,
                        abs(cached.wq.sum() - kernel_integral(params, co, n, n - c, q_kernel)),
                        abs(cached.wp.sum() - kernel_integral(params, co, n, n - c, p_kernel)))
    ok = worst <= 1e-10
    record("9", "weight translation invariance", ok, f"max {worst:.1e}")
    assert ok


def test_criterion_9_weight_cutoff_convergence():
    base = ModelParams(1.0, 0.5, 1.0)
    wg = omega_gamma(base)
    co = stepper_coeffs(base, default_dt(base))
    lo = FilonTables(base.replace(omega_c=1e4 * wg), co)
    hi = FilonTables(base.replace(omega_c=1e5 * wg), co)
    worst = 0.0
    for c in (-1, 0, 1):
        a, b = lo.weights(60, 60 - c), hi.weights(60, 60 - c)
        for x, y in ((a.wp, b.wp), (a.wq, b.wq)):
            worst = max(worst, float(np.max(np.abs(x - y)) / np.max(np.abs(y))))
    ok = worst <= 1e-6
    record("9", "weight omega_c-convergence (1e4 vs 1e5 omega_gamma)", ok,
           f"max rel change {worst:.1e}")
    assert ok


def test_criterion_9_determinism():
    p = ModelParams(1.0, 0.5, 0.7, omega_c=1e4)

    def once():
        st = initialize(p, GridSpec(default_dt(p), 300, 200), 0.6)
        tr = evolve(st)
        return tr.variance, st.gS.values.copy()

    (va, ga), (vb, gb) = once(), once()
    ok = np.array_equal(va, vb) and np.array_equal(ga, gb)
    record("9", "bit-identical reruns", ok)
    assert ok
