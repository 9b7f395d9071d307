"""Post-processing of two-time grids and runs.

Second derivatives on the time diagonal give the grid-scale momentum
variance, since d^2/dt1^2 Im G^S(t1, t2) at t1 = t2 equals <pi^2> in a steady
state.  Three stencils are offered: second- and fourth-order central
differences and the second derivative of the Whittaker-Shannon (sinc)
interpolant.  The module also fits decay laws and scans the long-time error
of the solver over a (T, gamma) grid.
"""

from __future__ import annotations

import enum
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .equilibrium import field_variance, g_S_equilibrium, g_S_frequency_integral
from .kbe.grid import SYMMETRIC, TwoTimeGrid
from .kbe.solver import Observers, default_memory_depth, evolve, initialize
from .lindblad import LindbladModel, symmetric_correlator
from .model import (
    ConfigError,
    GridSpec,
    ModelParams,
    OhmicKBEError,
    UNBOUNDED,
    WIDE_BAND,
    default_dt,
)

__all__ = [
    "Stencil",
    "DerivativeEstimate",
    "diag_second_derivative",
    "extract_momentum_variance",
    "equilibrium_grid",
    "fit_power_law",
    "fit_exponential",
    "ScanCell",
    "ScanResult",
    "run_cell",
    "thermalization_scan",
    "DecaySeries",
    "decay_series",
]

SINC_WINDOW = 64


class Stencil(enum.Enum):
    FD2 = "fd2"
    FD4 = "fd4"
    SINC = "sinc"


FD2, FD4, SINC = Stencil.FD2, Stencil.FD4, Stencil.SINC


@dataclass(frozen=True)
class DerivativeEstimate:
    """Second derivative d^2/dt1^2 G^S at a diagonal point.

    Attributes
    ----------
    value : complex
        The estimate; purely imaginary for a symmetric correlator.
    stencil : Stencil
        Stencil used.
    dt : float
        Grid spacing.
    error_bound : float
        Truncation estimate of the sinc sum (the last retained term); zero for
        the finite-difference stencils.
    """

    value: complex
    stencil: Stencil
    dt: float
    error_bound: float = 0.0


def _sinc_weights(window: int) -> np.ndarray:
    """Off-centre weights k = 1..W of the sinc second derivative, times dt^2.

    The centre weight is replaced by minus the sum of the others, so the
    truncated stencil annihilates constants; the last weight is halved, which
    averages the truncations at W - 1 and W of the alternating series.
    """
    k = np.arange(1, window + 1, dtype=float)
    w = 2.0 * (-1.0) ** (k + 1) / (k * k)
    w[-1] *= 0.5
    return w


def diag_second_derivative(grid: TwoTimeGrid, n: int, stencil: Stencil = FD2,
                           window: int = SINC_WINDOW) -> DerivativeEstimate:
    """d^2/dt1^2 G(t1, t_n) at t1 = t_n from grid values on the line t2 = t_n.

    Parameters
    ----------
    grid : TwoTimeGrid
        Correlator grid; rows n - K .. n + K must be retained, with K = 1, 2
        or ``window`` for FD2, FD4 and SINC.
    n : int
        Diagonal index.
    stencil : Stencil
        FD2, FD4 or SINC.
    window : int
        Half-width of the sinc stencil.

    Returns
    -------
    DerivativeEstimate
    """
    stencil = Stencil(stencil)
    K = {FD2: 1, FD4: 2, SINC: int(window)}[stencil]
    if K < 1:
        raise ValueError("window must be positive")
    if n - K < 0 or n + K > grid.last_row or K > grid.depth:
        raise IndexError(f"stencil {stencil.value} needs rows {n - K}..{n + K} within lag {grid.depth}")
    try:
        f = np.array([grid[n + k, n] for k in range(-K, K + 1)])
    except IndexError as exc:
        raise IndexError(f"stencil {stencil.value} needs rows {n - K}..{n + K}") from exc
    dt = grid.dt
    c = f[K]
    pair = f[K + 1:] + f[K - 1::-1] - 2 * c  # f(k) + f(-k) - 2 f(0), k = 1..K
    bound = 0.0
    if stencil is FD2:
        val = pair[0] / dt ** 2
    elif stencil is FD4:
        val = (16 * pair[0] - pair[1]) / (12 * dt ** 2)
    else:
        w = _sinc_weights(K)
        val = np.dot(w, pair) / dt ** 2
        bound = float(abs(w[-1] * pair[-1]) / dt ** 2)
    return DerivativeEstimate(complex(val), stencil, dt, bound)


def extract_momentum_variance(grid: TwoTimeGrid, n: int, stencil: Stencil = FD2,
                              window: int = SINC_WINDOW) -> float:
    """Grid-scale <pi^2> = -i d^2 G^S/dt1^2 on the diagonal (steady state)."""
    est = diag_second_derivative(grid, n, stencil, window)
    return float((-1j * est.value).real)


def equilibrium_grid(params: ModelParams, dt: float, half_width: int,
                     exact_cutoff: bool | None = None) -> tuple[TwoTimeGrid, int]:
    """Grid filled with the equilibrium G^S(t1 - t2), for testing estimators.

    Parameters
    ----------
    params : ModelParams
        Model; a finite omega_c gives the cut-off correlator.
    dt : float
        Grid spacing.
    half_width : int
        Rows 0 .. 2 half_width and lags 0 .. half_width are filled.
    exact_cutoff : bool, optional
        Use the frequency integral with the finite-cutoff spectral function
        (default when omega_c is finite) rather than the wide-band pole and
        Matsubara form.

    Returns
    -------
    grid : TwoTimeGrid
    centre : int
        Diagonal index with the full stencil window available.
    """
    K = int(half_width)
    if exact_cutoff is None:
        exact_cutoff = params.omega_c is not WIDE_BAND
    lags = np.arange(K + 1) * dt
    if exact_cutoff:
        vals = np.array([g_S_frequency_integral(t, params).imag for t in lags])
    else:
        vals = np.imag(g_S_equilibrium(lags, params))
    grid = TwoTimeGrid(K, SYMMETRIC, dt, 2 * K + 1, imaginary=True)
    for r in range(2 * K + 1):
        row = grid.new_row(r)
        top = min(r, K)
        row[:top + 1] = vals[:top + 1]
    return grid, K


def _fit_window(t, values, window):
    t = np.asarray(t, dtype=float)
    v = np.abs(np.asarray(values))
    lo, hi = window
    sel = (t >= lo) & (t <= hi)
    if not hi > lo or sel.sum() < 3:
        raise ValueError("fit window must contain at least three samples")
    if np.any(v[sel] == 0) or np.any(t[sel] <= 0):
        raise ValueError("values and times must be nonzero in the window")
    return t[sel], np.log(v[sel])


def _linear_fit(x, y):
    slope, icpt = np.polyfit(x, y, 1)
    res = y - (slope * x + icpt)
    ss = np.sum((y - y.mean()) ** 2)
    r2 = 1.0 - np.sum(res ** 2) / ss if ss > 0 else 1.0
    return float(slope), float(r2)


def fit_power_law(t, values, window) -> tuple[float, float]:
    """Slope of log|value| against log t on the window, with its r^2."""
    ts, ly = _fit_window(t, values, window)
    return _linear_fit(np.log(ts), ly)


def fit_exponential(t, values, window) -> tuple[float, float]:
    """Slope of log|value| against t on the window (minus the rate), with r^2."""
    ts, ly = _fit_window(t, values, window)
    return _linear_fit(ts, ly)


# ---------------------------------------------------------------- scans
@dataclass
class ScanCell:
    """One (gamma, T) cell of a thermalization scan."""

    gamma: float
    temperature: float
    final_variance: float = math.nan
    exact: float = math.nan
    rel_error: float = math.nan
    converged: bool = False
    steps: int = 0
    error: str = ""


@dataclass
class ScanResult:
    cells: list = field(default_factory=list)

    def table(self) -> np.ndarray:
        """Array of (gamma, T, rel_error) rows."""
        return np.array([(c.gamma, c.temperature, c.rel_error) for c in self.cells])

    def max_error(self) -> float:
        errs = [c.rel_error for c in self.cells if math.isfinite(c.rel_error)]
        return max(errs) if errs else math.nan


def run_cell(params: ModelParams, dt_fraction: float = 1 / 100, horizon: float = 14.0,
             memory_multiples: float = 25.0, max_time: float = 1e3,
             steady_tol: float = 1e-4, initial_variance: float | None = None) -> ScanCell:
    """Evolve one configuration to its long-time diagonal and compare with the oracle.

    The run lasts ``horizon / gamma`` (capped at ``max_time``).  It counts as
    converged when i G^S(t, t) changes by less than ``steady_tol`` relative
    over the last 1/gamma.
    """
    cell = ScanCell(params.gamma, params.temperature)
    try:
        dt = default_dt(params, dt_fraction)
        g = params.gamma
        t_end = min(horizon / g, max_time) if g > 0 else max_time
        n = max(2, int(math.ceil(t_end / dt)))
        M = min(n + 1, default_memory_depth(params, dt, memory_multiples))
        v0 = initial_variance
        if v0 is None:
            v0 = 0.5 / params.omega0 / math.tanh(0.5 * params.omega0 / params.temperature)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            st = initialize(params, GridSpec(dt, n, M), v0)
            tr = evolve(st, Observers(cauchy_schwarz=False))
            exact = field_variance(params)
        cell.steps = n
        cell.final_variance = tr.final_variance
        cell.exact = exact
        cell.rel_error = abs(tr.final_variance - exact) / exact
        back = int(round(1 / (g * dt))) if g > 0 else n
        if back < len(tr.variance):
            ref = tr.variance[-1 - back]
            cell.converged = abs(tr.final_variance - ref) <= steady_tol * abs(ref)
    except (OhmicKBEError, ValueError, ArithmeticError) as exc:
        cell.error = f"{type(exc).__name__}: {exc}"
    return cell


def _cell_job(args):
    params, kw = args
    return run_cell(params, **kw)


def thermalization_scan(T_values, gamma_values, base: ModelParams, jobs: int = 1,
                        **cell_options) -> ScanResult:
    """Relative long-time error over the (T, gamma) grid.

    Parameters
    ----------
    T_values, gamma_values : sequences of float
        Temperatures and damping rates.
    base : ModelParams
        Supplies omega0, omega_c and t0.
    jobs : int
        Worker processes; cells are independent.
    **cell_options
        Passed to :func:`run_cell`.

    Returns
    -------
    ScanResult
        Cells in gamma-major order.  Failed cells carry the error message
        and NaN errors; the scan continues past them.
    """
    tasks = []
    for g in gamma_values:
        for T in T_values:
            try:
                p = base.replace(gamma=float(g), temperature=float(T))
            except (ConfigError, ValueError) as exc:
                tasks.append(ScanCell(float(g), float(T), error=f"{type(exc).__name__}: {exc}"))
                continue
            tasks.append((p, cell_options))
    todo = [t for t in tasks if not isinstance(t, ScanCell)]
    if jobs > 1 and len(todo) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            done = list(pool.map(_cell_job, todo))
    else:
        done = [_cell_job(t) for t in todo]
    it = iter(done)
    cells = [t if isinstance(t, ScanCell) else next(it) for t in tasks]
    return ScanResult(cells)


# ---------------------------------------------------------------- decay
@dataclass(frozen=True)
class DecaySeries:
    """KBE and Lindblad correlators against the lag t - t_ref."""

    lag: np.ndarray
    kbe: np.ndarray
    lindblad: np.ndarray
    t_ref: float
    params: ModelParams


def decay_series(params: ModelParams, t_ref: float = 20.0, span: float | None = None,
                 dt: float | None = None, memory_depth=UNBOUNDED) -> DecaySeries:
    """Run the KBE and record <{phi(t), phi(t_ref)}>/2 for t >= t_ref.

    ``span`` defaults to 1/(2 pi T) plus one unit of time.  The Lindblad
    series uses the quantum regression theorem on the same lags.
    """
    dt = default_dt(params) if dt is None else float(dt)
    if span is None:
        span = 1 / (2 * math.pi * params.temperature) + 1.0
    m = int(round(t_ref / dt))
    n = m + int(math.ceil(span / dt))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        st = initialize(params, GridSpec(dt, n, memory_depth),
                        0.5 / params.omega0 / math.tanh(0.5 * params.omega0 / params.temperature))
        tr = evolve(st, Observers(slices=(m,), cauchy_schwarz=False))
    ts, vals = tr.slices[m]
    lag = ts - ts[0]
    kbe = -np.imag(vals)
    lind = symmetric_correlator(LindbladModel(params), lag)
    return DecaySeries(lag, kbe, np.asarray(lind, dtype=float), m * dt, params)
