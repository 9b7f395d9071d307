import math

import numpy as np
import pytest

from ohmic_kbe.kbe.filon import FilonTables, TranslationInvariant, bootstrap_weights
from ohmic_kbe.kbe.stepper import stepper_coeffs
from ohmic_kbe.model import ModelParams, default_dt
from ohmic_kbe.selfenergy import p_kernel, q_kernel

from oracles import kernel_integral

FIN = ModelParams(1.0, 0.5, 1.0, omega_c=1e3)
WB = ModelParams(1.0, 0.5, 1.0)
DT = default_dt(FIN)


@pytest.fixture(scope="module")
def tables():
    co = stepper_coeffs(FIN, DT)
    return FilonTables(FIN, co), co


@pytest.mark.parametrize("params", [FIN, WB], ids=["finite", "wide_band"])
@pytest.mark.parametrize("c", [-1, 0, 1])
def test_partition_of_unity(params, c):
    co = stepper_coeffs(params, DT)
    tab = FilonTables(params, co)
    for n in (3, 40):
        m = n - c
        ws = tab.weights(n, m)
        if not (params.wide_band and c == 0):
            assert abs(ws.wq.sum() - kernel_integral(params, co, n, m, q_kernel)) <= 1e-12
        assert abs(ws.wp.sum() - kernel_integral(params, co, n, m, p_kernel)) <= 1e-12


@pytest.mark.parametrize("c", [-1, 1])
def test_quadratic_exactness(tables, c):
    tab, co = tables
    n = 10
    m = n - c
    g = lambda x: 0.3 - 2.0 * x / DT + 1.5 * (x / DT) ** 2
    nodes = np.array([g(-DT), g(0.0), g(DT)])
    ws = tab.weights(n, m)
    assert abs(nodes @ ws.wq - kernel_integral(FIN, co, n, m, q_kernel, g)) <= 1e-8
    assert abs(nodes @ ws.wp - kernel_integral(FIN, co, n, m, p_kernel, g)) <= 1e-8


def test_piecewise_linear_exactness_on_diagonal_line(tables):
    tab, co = tables
    n = 10
    g = lambda x: 1.0 - 0.7 * abs(x) / DT if x < 0 else 1.0 + 0.4 * x / DT
    nodes = np.array([g(-DT), g(0.0), g(DT)])
    ws = tab.weights(n, n)
    assert abs(nodes @ ws.wq - kernel_integral(FIN, co, n, n, q_kernel, g)) <= 1e-8


def test_translation_invariance(tables):
    tab, co = tables
    n0 = tab.n_ti
    assert n0 * DT >= 8 / (2 * math.pi * FIN.temperature)
    for c in (-1, 0, 1):
        a = tab.weights(n0 + 1, n0 + 1 - c)
        assert a.key == TranslationInvariant(c)
        # direct evaluation far from t0 against the cached limit
        for n in (n0 + 1, n0 + 200):
            wq = kernel_integral(FIN, co, n, n - c, q_kernel)
            wp = kernel_integral(FIN, co, n, n - c, p_kernel)
            assert abs(a.wq.sum() - wq) <= 1e-10
            assert abs(a.wp.sum() - wp) <= 1e-10
    assert tab.weights(5, 4).key == (5, 4)


def test_invalid_lines(tables):
    tab, _ = tables
    with pytest.raises(ValueError):
        tab.weights(10, 7)
    z = tab.weights(1, 0)
    assert not np.any(z.wq) and not np.any(z.wp)


def test_weights_converge_with_cutoff():
    # differences shrink by about the cutoff ratio: first-order convergence in 1/omega_c
    wg = math.sqrt(1 - 0.0625)
    base = ModelParams(1.0, 0.5, 1.0)
    co = stepper_coeffs(base, DT)
    tabs = [FilonTables(base.replace(omega_c=k * wg), co) for k in (1e4, 1e5, 1e6)]
    for c in (-1, 0, 1):
        ws = [t.weights(60, 60 - c) for t in tabs]
        d1 = np.abs(ws[0].wp - ws[1].wp).max()
        d2 = np.abs(ws[1].wp - ws[2].wp).max()
        assert d1 / d2 == pytest.approx(10.0, rel=0.1)
    ws = [t.weights(60, 60) for t in tabs]
    d1 = np.abs(ws[0].wq - ws[1].wq).max()
    d2 = np.abs(ws[1].wq - ws[2].wq).max()
    assert d1 / d2 == pytest.approx(10.0, rel=0.1)


def test_bootstrap_weights_finite():
    co = stepper_coeffs(WB, DT)
    wp, wq = bootstrap_weights(WB, co)
    assert np.all(np.isfinite(wp)) and np.all(np.isfinite(wq))
    assert np.all(wp.real == 0) and np.all(wq.real == 0)
