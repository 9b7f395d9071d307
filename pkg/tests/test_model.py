import math
import pickle

import pytest
from hypothesis import given, strategies as st

from ohmic_kbe.model import (
    ConfigError,
    GridSpec,
    ModelParams,
    RegimeError,
    UNBOUNDED,
    WIDE_BAND,
    WideBandValidityWarning,
    default_dt,
    omega_gamma,
)


def test_default_dt_examples():
    assert default_dt(ModelParams(1.0, 0.1, 0.01), 1 / 100) == pytest.approx(2 * math.pi / 100, rel=1e-15)
    assert default_dt(ModelParams(1.0, 5.0, 0.5), 1 / 100) == pytest.approx(2 * math.pi / 500, rel=1e-15)
    # thermal scale 2 pi T dominates
    assert default_dt(ModelParams(1.0, 0.1, 10.0), 1 / 100) == pytest.approx(1e-3, rel=1e-14)


@pytest.mark.parametrize("fraction", [0.0, -0.1, 1.5])
def test_default_dt_rejects_bad_fraction(fraction):
    with pytest.raises(ConfigError):
        default_dt(ModelParams(1.0, 0.1, 1.0), fraction)


def test_omega_gamma_examples():
    assert omega_gamma(ModelParams(1.0, 0.0, 1.0)) == 1.0
    assert omega_gamma(ModelParams(1.0, 1.0, 1.0)) == pytest.approx(math.sqrt(3) / 2, rel=1e-15)
    with pytest.raises(RegimeError):
        omega_gamma(ModelParams(1.0, 2.0, 1.0))


def test_omega_gamma_matches_pole_of_spectral_function():
    # poles of 1/(w0^2 - w^2 - i g w) sit at w = +-w_g - i g/2
    p = ModelParams(1.0, 1.0, 1.0)
    w = omega_gamma(p) - 0.5j * p.gamma
    assert abs(p.omega0 ** 2 - w * w - 1j * p.gamma * w) < 1e-14


@given(st.floats(0.1, 10), st.floats(0, 0.999))
def test_omega_gamma_identity(w0, ratio):
    p = ModelParams(w0, 2 * w0 * ratio, 1.0)
    wg = omega_gamma(p)
    assert wg * wg + p.gamma ** 2 / 4 == pytest.approx(w0 * w0, rel=1e-12, abs=1e-14)


@given(st.floats(0.1, 10), st.floats(0, 5), st.floats(0.01, 10), st.floats(1.01, 3))
def test_default_dt_monotone(w0, g, T, k):
    base = ModelParams(w0, g, T)
    dt = default_dt(base)
    for field in ("omega0", "gamma", "temperature"):
        v = getattr(base, field)
        bigger = base.replace(**{field: v * k if v > 0 else 1.0})
        assert default_dt(bigger) <= dt * (1 + 1e-15)


def test_default_dt_resolves_fastest_scale():
    p = ModelParams(1.0, 0.5, 2.0)
    assert default_dt(p, 1 / 30) <= (2 * math.pi / 30) / max(1.0, 0.5, 2 * math.pi * 2.0) * (1 + 1e-15)


@pytest.mark.parametrize("kw", [
    dict(omega0=0.0, gamma=0.1, temperature=1.0),
    dict(omega0=1.0, gamma=-0.1, temperature=1.0),
    dict(omega0=1.0, gamma=0.1, temperature=0.0),
    dict(omega0=1.0, gamma=0.1, temperature=1.0, omega_c=-5.0),
    dict(omega0=float("nan"), gamma=0.1, temperature=1.0),
])
def test_params_validation(kw):
    with pytest.raises(ConfigError):
        ModelParams(**kw)


def test_wide_band_validity_warning_flag():
    with pytest.warns(WideBandValidityWarning):
        p = ModelParams(1.0, 0.1, 1.0, omega_c=50.0)
    assert p.wide_band_warning
    q = ModelParams(1.0, 0.1, 1.0, omega_c=1e3)
    assert not q.wide_band_warning
    assert ModelParams(1.0, 0.1, 1.0).wide_band


def test_sentinels_survive_pickling():
    assert pickle.loads(pickle.dumps(WIDE_BAND)) is WIDE_BAND
    assert pickle.loads(pickle.dumps(UNBOUNDED)) is UNBOUNDED


def test_grid_spec_validation_and_truncation_flag():
    with pytest.raises(ConfigError):
        GridSpec(0.0, 10)
    with pytest.raises(ConfigError):
        GridSpec(0.1, -1)
    with pytest.raises(ConfigError):
        GridSpec(0.1, 10, 1)
    p = ModelParams(1.0, 0.5, 1.0)
    assert GridSpec(0.01, 100, 100).truncation_flagged(p)
    assert not GridSpec(0.01, 100, 1000).truncation_flagged(p)
    assert not GridSpec(0.01, 100).truncation_flagged(p)
    assert GridSpec(0.01, 100).depth() == 101
    assert GridSpec(0.01, 100, 40).memory_time() == pytest.approx(0.4)
