import math

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy import integrate

from ohmic_kbe.equilibrium import g_A_equilibrium
from ohmic_kbe.kbe.stepper import (
    ETD,
    VERLET,
    ccr_residual,
    derivative_profile,
    hat_basis,
    homogeneous_profile,
    interpolation_weights,
    quadratic_basis,
    stepper_coeffs,
    verlet_linear,
)
from ohmic_kbe.model import ModelParams, RegimeError


def test_coefficients_limits():
    p = ModelParams(1.3, 0.0, 1.0)
    co = stepper_coeffs(p, 0.05, ETD)
    assert co.a == pytest.approx(2 * math.cos(1.3 * 0.05), rel=1e-15)
    assert co.b == 1.0
    v = stepper_coeffs(ModelParams(1.0, 0.7, 1.0), 0.05, VERLET)
    assert (v.a, v.b) == (2.0, 1.0)
    assert v.h(0.02) == pytest.approx(0.03)
    with pytest.raises(RegimeError):
        stepper_coeffs(ModelParams(1.0, 3.0, 1.0), 0.05, ETD)
    with pytest.raises(ValueError):
        stepper_coeffs(p, 0.0)


def test_h_vanishes_at_ends():
    co = stepper_coeffs(ModelParams(1.0, 0.6, 1.0), 0.1)
    assert abs(co.h(0.1)) < 1e-17 and abs(co.h(-0.1)) < 1e-17


@pytest.mark.parametrize("g", [0.0, 0.5, 1.5])
def test_homogeneous_exactness(g):
    p = ModelParams(1.0, g, 1.0)
    dt = 2 * math.pi / 100
    prof = homogeneous_profile(stepper_coeffs(p, dt), 1.0, 1001)
    ref = g_A_equilibrium(dt * np.arange(1001), p)
    assert np.max(np.abs(prof - ref)) <= 1e-10


def test_damped_cosine_from_two_point_seed():
    p = ModelParams(1.0, 0.3, 1.0)
    co = stepper_coeffs(p, 0.05)
    wg = math.sqrt(1 - 0.0225)
    y = lambda t: np.exp(-0.15 * t) * (np.cos(wg * t) + 0.15 / wg * np.sin(wg * t))
    out = [y(0.0), y(0.05)]
    for _ in range(1000):
        out.append(co.a * out[-1] - co.b * out[-2])
    assert_allclose(out, y(0.05 * np.arange(1002)), atol=1e-10)


def test_forced_step_is_exact():
    # y'' = -w0^2 y - g y' + cos(1.7 t): the update is exact given the exact force integral
    p = ModelParams(1.0, 0.4, 1.0)
    dt = 0.1
    co = stepper_coeffs(p, dt)
    f = lambda t: math.cos(1.7 * t)
    sol = integrate.solve_ivp(lambda t, z: [z[1], -z[0] - 0.4 * z[1] + f(t)], (0, 5.0), [0.3, -0.2],
                              t_eval=dt * np.arange(51), rtol=1e-13, atol=1e-14, method="DOP853")
    ys = sol.y[0]
    for n in range(1, 50):
        force = integrate.quad(lambda tau: co.h(tau) * f(n * dt + tau), -dt, dt, epsabs=1e-15)[0]
        assert abs(co.a * ys[n] - co.b * ys[n - 1] + force - ys[n + 1]) < 1e-11


def test_verlet_second_order():
    p = ModelParams(1.0, 0.2, 1.0)
    errs = []
    for dt in (0.02, 0.01):
        co = stepper_coeffs(p, dt, VERLET)
        n = int(round(5.0 / dt)) + 1
        prof = homogeneous_profile(co, 1.0, n)
        errs.append(abs(prof[-1] - g_A_equilibrium(5.0, p)))
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.1)
    a, b, s = verlet_linear(stepper_coeffs(p, 0.1, VERLET), 1.0)
    assert s == pytest.approx(1 / 1.01)


def test_interpolation_weights():
    co = stepper_coeffs(ModelParams(1.0, 0.5, 1.0), 0.1)
    dt = 0.1
    for basis in (quadratic_basis, hat_basis):
        u = interpolation_weights(co, basis)
        ref = [integrate.quad(lambda x: co.h(x) * basis(x, dt)[j], -dt, dt, points=[0.0],
                              epsabs=1e-16)[0] for j in range(3)]
        assert_allclose(u, ref, rtol=1e-13)
    x = np.linspace(-0.1, 0.1, 7)
    assert_allclose(quadratic_basis(x, dt).sum(axis=0), 1.0, rtol=1e-15)
    assert_allclose(hat_basis(x, dt).sum(axis=0), 1.0, rtol=1e-15)


def test_derivative_profile_and_ccr():
    p = ModelParams(1.0, 0.5, 1.0)
    dt = 0.02
    co = stepper_coeffs(p, dt)
    prof = homogeneous_profile(co, 1.0, 200)
    d = derivative_profile(co, prof)
    wg = math.sqrt(1 - 0.0625)
    t = dt * np.arange(len(d))
    ref = -np.exp(-0.25 * t) * (np.cos(wg * t) - 0.25 / wg * np.sin(wg * t))
    assert_allclose(d, ref, atol=1e-12)
    r = ccr_residual(prof, dt)
    assert r <= 5e-3
    # the one-sided stencil is second order
    r2 = ccr_residual(homogeneous_profile(stepper_coeffs(p, dt / 2), 1.0, 4), dt / 2)
    assert r / r2 == pytest.approx(4.0, rel=0.05)
