"""Save and restore a solver state.

A checkpoint is an ``.npz`` archive holding the grid buffers and a JSON
header with the parameters, the step counter and a format version.  Tables
and weights are deterministic functions of the parameters and are rebuilt on
load, so a resumed run is bit-identical to an uninterrupted one.
"""

from __future__ import annotations

import json
import os

import numpy as np

from ..model import ConfigError, GridSpec, ModelParams, UNBOUNDED, WIDE_BAND
from .solver import SolverState
from .stepper import Integrator

FORMAT = "ohmic-kbe-checkpoint"
VERSION = 1


def _header(st: SolverState) -> dict:
    p, g = st.params, st.grid
    return {
        "format": FORMAT,
        "version": VERSION,
        "params": {
            "omega0": p.omega0,
            "gamma": p.gamma,
            "temperature": p.temperature,
            "omega_c": "wide_band" if p.omega_c is WIDE_BAND else p.omega_c,
            "t0": p.t0,
        },
        "grid": {
            "dt": g.dt,
            "n_steps": g.n_steps,
            "memory_depth": "unbounded" if g.memory_depth is UNBOUNDED else g.memory_depth,
        },
        "integrator": st.integrator.value,
        "initial_variance": st.v0,
        "initial_momentum_variance": st.p0,
        "current_step": st.current_step,
        "gS_last_row": st.gS.last_row,
        "gA_last_row": st.gA.last_row,
    }


def save_checkpoint(state: SolverState, path) -> None:
    """Write ``state`` to ``path`` (an .npz file), atomically."""
    head = json.dumps(_header(state), sort_keys=True)
    tmp = f"{os.fspath(path)}.tmp"
    with open(tmp, "wb") as fh:
        np.savez(fh, header=np.array(head), gS=state.gS.values, gA=state.gA.values,
                 diag=state.diag)
    os.replace(tmp, path)


def read_header(path) -> dict:
    with np.load(path, allow_pickle=False) as data:
        return json.loads(str(data["header"]))


def _restore(grid, saved: np.ndarray, last_row: int) -> None:
    """Copy the retained rows of a circular buffer into ``grid``."""
    kept = min(saved.shape[0], last_row + 1)
    if saved.shape[1] != grid.values.shape[1] or grid.rows < kept:
        raise ConfigError("checkpoint buffers do not match the requested grid")
    for r in range(last_row - kept + 1, last_row + 1):
        grid.values[r % grid.rows] = saved[r % saved.shape[0]]
    grid.last_row = last_row


def load_checkpoint(path, n_steps: int | None = None) -> SolverState:
    """Rebuild a solver state from ``path``.

    Parameters
    ----------
    path : path-like
        Checkpoint written by :func:`save_checkpoint`.
    n_steps : int, optional
        Override the configured number of steps.  The memory depth must not
        change and the run must not shrink below the rows already kept.
    """
    with np.load(path, allow_pickle=False) as data:
        head = json.loads(str(data["header"]))
        if head.get("format") != FORMAT:
            raise ConfigError(f"{path} is not a solver checkpoint")
        if head.get("version") != VERSION:
            raise ConfigError(f"unsupported checkpoint version {head.get('version')}")
        gS, gA, diag = data["gS"], data["gA"], data["diag"]
    pp = dict(head["params"])
    if pp["omega_c"] == "wide_band":
        pp["omega_c"] = WIDE_BAND
    params = ModelParams(**pp)
    gg = dict(head["grid"])
    if gg["memory_depth"] == "unbounded":
        gg["memory_depth"] = UNBOUNDED
    if n_steps is not None:
        gg["n_steps"] = int(n_steps)
    grid = GridSpec(**gg)
    if int(head["current_step"]) > grid.n_steps:
        raise ConfigError("checkpoint is past the requested number of steps")
    st = SolverState(params, grid, head["initial_variance"], Integrator(head["integrator"]),
                     head["initial_momentum_variance"])
    _restore(st.gS, gS, int(head["gS_last_row"]))
    _restore(st.gA, gA, int(head["gA_last_row"]))
    k = min(len(diag), len(st.diag))
    st.diag[:k] = diag[:k]
    st.current_step = int(head["current_step"])
    return st
