"""Command-line interface.

    ohmic-kbe [--config PATH] [--out DIR] [--jobs N] [--seedless]
              [--checkpoint PATH] {equilibrium,evolve,scan,decay,renorm}

The configuration is an INI file with sections [model], [grid] and [run];
unknown sections or keys are errors.  Frequencies, rates and temperatures are
in units of omega0 = 1 unless [model] omega0 is set.  Every command writes
CSV tables whose first line is a '#' comment with the digest of the
configuration, a JSON summary, a manifest with timestamps and output digests,
and a plotting-script stub for each table.

Exit codes: 0 success, 2 configuration error, 3 regime rejection, 4 invariant
violation (or total failure of a scan), 5 tolerance failure.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import hashlib
import io
import json
import math
import sys
import time
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (
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
from .equilibrium import (
    SPECTRAL_REGULATOR,
    field_variance,
    momentum_variance,
    tabulate,
)
from .kbe.checkpoint import load_checkpoint, save_checkpoint
from .kbe.solver import Observers, default_memory_depth, evolve, initialize
from .kbe.stepper import Integrator
from .model import (
    ConfigError,
    GridSpec,
    InvariantError,
    ModelParams,
    RegimeError,
    ToleranceError,
    UNBOUNDED,
    WIDE_BAND,
    default_dt,
)

EXIT_OK, EXIT_CONFIG, EXIT_REGIME, EXIT_INVARIANT, EXIT_TOLERANCE = 0, 2, 3, 4, 5


def _float(s):
    return float(s)


def _floats(s):
    return [float(x) for x in s.replace(";", ",").split(",") if x.strip()]


def _cutoff(s):
    s = s.strip().lower()
    return WIDE_BAND if s in ("wide_band", "inf", "infinity") else float(s)


def _depth(s):
    s = s.strip().lower()
    if s in ("auto", "unbounded"):
        return s
    return int(s)


SCHEMA = {
    "model": {
        "omega0": _float,
        "gamma": _float,
        "temperature": _float,
        "omega_c": _cutoff,
        "t0": _float,
    },
    "grid": {
        "dt": _float,
        "dt_fraction": _float,
        "n_steps": int,
        "t_end": _float,
        "memory_depth": _depth,
        "integrator": lambda s: Integrator(s.strip().lower()),
    },
    "run": {
        "initial_variance": _float,
        "initial_momentum_variance": _float,
        "t_max": _float,
        "n_times": int,
        "stop_after": int,
        "checkpoint_every": int,
        "gammas": _floats,
        "temperatures": _floats,
        "horizon": _float,
        "t_ref": _float,
        "span": _float,
        "fit_lo": _float,
        "fit_hi": _float,
        "omega_c_values": _floats,
        "dt_values": _floats,
        "window": int,
    },
}


def load_config(text: str) -> dict:
    """Parse and validate configuration text into {section: {key: value}}."""
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse configuration: {exc}") from exc
    out = {s: {} for s in SCHEMA}
    for sec in cp.sections():
        if sec not in SCHEMA:
            raise ConfigError(f"unknown section [{sec}]")
        for key, raw in cp.items(sec):
            if key not in SCHEMA[sec]:
                raise ConfigError(f"unknown key {key!r} in [{sec}]")
            try:
                out[sec][key] = SCHEMA[sec][key](raw)
            except ValueError as exc:
                raise ConfigError(f"bad value for {sec}.{key}: {raw!r}") from exc
    return out


def _snapshot(cfg: dict) -> dict:
    def enc(v):
        if v is WIDE_BAND:
            return "wide_band"
        if isinstance(v, Integrator):
            return v.value
        return v
    return {s: {k: enc(v) for k, v in sorted(d.items())} for s, d in cfg.items()}


def config_digest(cfg: dict) -> str:
    blob = json.dumps(_snapshot(cfg), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()


def model_params(cfg: dict) -> ModelParams:
    m = cfg["model"]
    for key in ("gamma", "temperature"):
        if key not in m:
            raise ConfigError(f"[model] {key} is required")
    return ModelParams(
        omega0=m.get("omega0", 1.0),
        gamma=m["gamma"],
        temperature=m["temperature"],
        omega_c=m.get("omega_c", WIDE_BAND),
        t0=m.get("t0", 0.0),
    )


def grid_spec(cfg: dict, params: ModelParams) -> GridSpec:
    g = cfg["grid"]
    if "dt" in g and "dt_fraction" in g:
        raise ConfigError("give either [grid] dt or dt_fraction")
    dt = g["dt"] if "dt" in g else default_dt(params, g.get("dt_fraction", 1 / 100))
    if "n_steps" in g and "t_end" in g:
        raise ConfigError("give either [grid] n_steps or t_end")
    if "n_steps" in g:
        n = g["n_steps"]
    else:
        t_end = g.get("t_end", 14.0 / params.gamma if params.gamma > 0 else 100.0)
        n = int(math.ceil(t_end / dt))
    md = g.get("memory_depth", "auto")
    if md == "auto":
        md = min(n + 1, default_memory_depth(params, dt)) if n >= 1 else 2
        md = max(md, 2)
    elif md == "unbounded":
        md = UNBOUNDED
    return GridSpec(dt, n, md)


def _thermal_variance(params: ModelParams) -> float:
    return 0.5 / params.omega0 / math.tanh(0.5 * params.omega0 / params.temperature)


# ------------------------------------------------------------------ output
class Writer:
    """Writes deterministic tables and summaries into one directory."""

    def __init__(self, out: Path, digest: str, cfg: dict, args):
        self.out = out
        self.digest = digest
        self.cfg = cfg
        self.args = args
        self.files = {}
        self.started = time.time()
        out.mkdir(parents=True, exist_ok=True)

    def _put(self, name: str, text: str):
        path = self.out / name
        path.write_text(text)
        self.files[name] = hashlib.sha256(text.encode()).hexdigest()

    def csv(self, name: str, header, rows):
        buf = io.StringIO()
        buf.write(f"# manifest sha256={self.digest} version={__version__}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(x) for x in r])
        self._put(name, buf.getvalue())
        self._plot_stub(name, header)

    def json(self, name: str, obj):
        self._put(name, json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")

    def _plot_stub(self, name: str, header):
        stem = Path(name).stem
        x, ys = header[0], list(header[1:])
        text = (
            '"""Plot {name}; generated stub, edit freely."""\n'
            "import csv\n"
            "import matplotlib.pyplot as plt\n\n"
            "with open({name!r}) as fh:\n"
            "    rows = [r for r in csv.DictReader(l for l in fh if not l.startswith('#'))]\n"
            "x = [float(r[{x!r}]) for r in rows]\n"
            "for col in {ys!r}:\n"
            "    try:\n"
            "        plt.plot(x, [float(r[col]) for r in rows], label=col)\n"
            "    except ValueError:\n"
            "        pass\n"
            "plt.xlabel({x!r})\n"
            "plt.legend()\n"
            "plt.savefig({png!r})\n"
        ).format(name=name, x=x, ys=ys, png=stem + ".png")
        (self.out / f"plot_{stem}.py").write_text(text)

    def manifest(self, command: str, status: int):
        obj = {
            "command": command,
            "config": _snapshot(self.cfg),
            "config_sha256": self.digest,
            "version": __version__,
            "seedless": bool(self.args.seedless),
            "started": self.started,
            "finished": time.time(),
            "exit_code": status,
            "outputs": dict(sorted(self.files.items())),
        }
        (self.out / "manifest.json").write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return x


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(f"cannot serialize {type(o).__name__}")


def _finite(x):
    return float(x) if math.isfinite(x) else None


# ---------------------------------------------------------------- commands
def cmd_equilibrium(cfg, args, w: Writer) -> int:
    p = model_params(cfg)
    r = cfg["run"]
    t_max = r.get("t_max", 20.0 / p.omega0)
    n = r.get("n_times", 201)
    if n < 1 or t_max < 0:
        raise ConfigError("[run] n_times must be >= 1 and t_max >= 0")
    notes = []
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        times = np.linspace(0.0, t_max, n)
        curve = tabulate(times, p)
        phi2 = field_variance(p)
        out = {"phi2": phi2, "phi2_tail_bound": curve.tail_bound}
        if p.omega_c is WIDE_BAND:
            out.update(pi2=None, pi2_tail_bound=None)
            notes.append("<pi^2> diverges in wide-band mode")
        else:
            pi2, b = momentum_variance(p, return_bound=True)
            out.update(pi2=pi2, pi2_tail_bound=b)
    notes += [str(c.message) for c in caught]
    out["warnings"] = notes
    w.csv("equilibrium.csv", ["t", "re_gA", "im_gS"],
          zip(times, curve.gA, np.imag(curve.gS)))
    w.json("variances.json", out)
    return EXIT_OK


def cmd_evolve(cfg, args, w: Writer) -> int:
    p = model_params(cfg)
    grid = grid_spec(cfg, p)
    r = cfg["run"]
    g = cfg["grid"]
    integ = g.get("integrator", Integrator.ETD)
    ck = Path(args.checkpoint) if args.checkpoint else None
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        if ck is not None and ck.exists():
            st = load_checkpoint(ck)
            if st.params != p or st.grid != grid or st.integrator is not integ:
                raise ConfigError(f"checkpoint {ck} was written for a different configuration")
        else:
            st = initialize(p, grid, r.get("initial_variance", _thermal_variance(p)), integ,
                            r.get("initial_momentum_variance"))
        every = r.get("checkpoint_every", 0)

        def periodic_save(s):
            if s.current_step % every == 0:
                save_checkpoint(s, ck)

        cb = periodic_save if ck is not None and every > 0 else None
        stop = r.get("stop_after")
        todo = None if stop is None else max(0, stop - st.current_step)
        try:
            tr = evolve(st, Observers(), n_steps=todo, callback=cb)
        finally:
            if ck is not None:
                save_checkpoint(st, ck)
        exact = field_variance(p)
    w.csv("trajectory.csv", ["t", "variance", "ccr_residual", "cs_violation"],
          zip(tr.times, tr.variance, tr.ccr_residual, tr.cs_violation))
    w.json("summary.json", {
        "steps": st.current_step,
        "final_time": st.time,
        "final_variance": tr.final_variance,
        "oracle_variance": exact,
        "relative_error": abs(tr.final_variance - exact) / exact,
        "ccr_max_residual": float(np.max(tr.ccr_residual)),
        "cauchy_schwarz_max": float(np.max(tr.cs_violation)),
        "dt": grid.dt,
        "memory_depth": st.M,
        "warnings": sorted({str(c.message) for c in caught}),
    })
    return EXIT_OK


def cmd_scan(cfg, args, w: Writer) -> int:
    p = model_params(cfg)
    r = cfg["run"]
    gammas = r.get("gammas", [p.gamma])
    temps = r.get("temperatures", [p.temperature])
    kw = {"horizon": r.get("horizon", 14.0)}
    if "dt_fraction" in cfg["grid"]:
        kw["dt_fraction"] = cfg["grid"]["dt_fraction"]
    res = thermalization_scan(temps, gammas, p, jobs=max(1, args.jobs), **kw)
    w.csv("scan.csv",
          ["gamma", "temperature", "final_variance", "oracle_variance", "rel_error",
           "converged", "steps", "error"],
          [(c.gamma, c.temperature, c.final_variance, c.exact, c.rel_error, c.converged,
            c.steps, c.error) for c in res.cells])
    fails = [c for c in res.cells if c.error]
    w.json("scan_summary.json", {
        "cells": len(res.cells),
        "failed": len(fails),
        "max_rel_error": _finite(res.max_error()),
        "non_converged": sum(1 for c in res.cells if not c.error and not c.converged),
    })
    return EXIT_INVARIANT if len(fails) == len(res.cells) else EXIT_OK


def cmd_decay(cfg, args, w: Writer) -> int:
    p = model_params(cfg)
    r = cfg["run"]
    g = cfg["grid"]
    dt = g["dt"] if "dt" in g else default_dt(p, g.get("dt_fraction", 1 / 100))
    md = g.get("memory_depth", "unbounded")
    md = UNBOUNDED if md in ("auto", "unbounded") else md
    ds = decay_series(p, r.get("t_ref", 20.0), r.get("span"), dt, md)
    lo = r.get("fit_lo", 2.0 / p.gamma)
    hi = r.get("fit_hi", 1.0 / (2 * math.pi * p.temperature))
    expo, r2 = fit_power_law(ds.lag, ds.kbe, (lo, hi))
    lexp, lr2p = fit_power_law(ds.lag, ds.lindblad, (lo, hi))
    rate, lr2e = fit_exponential(ds.lag, ds.lindblad, (lo, hi))
    w.csv("decay.csv", ["lag", "kbe", "lindblad"], zip(ds.lag, ds.kbe, ds.lindblad))
    w.json("decay_fit.json", {
        "window": [lo, hi],
        "t_ref": ds.t_ref,
        "kbe_exponent": expo,
        "kbe_r2": r2,
        "lindblad_power_exponent": lexp,
        "lindblad_power_r2": lr2p,
        "lindblad_exponential_rate": -rate,
        "lindblad_exponential_r2": lr2e,
    })
    return EXIT_OK


def cmd_renorm(cfg, args, w: Writer) -> int:
    p = model_params(cfg)
    r = cfg["run"]
    wcs = r.get("omega_c_values", [1e2, 1e3, 1e4, 1e5, 1e6])
    dts = r.get("dt_values", [default_dt(p)])
    W = r.get("window", 64)
    rows = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for dt in dts:
            for wc in wcs:
                q = p.replace(omega_c=wc)
                grid, c = equilibrium_grid(q, dt, W)
                est = [extract_momentum_variance(grid, c, s, W) for s in (FD2, FD4, SINC)]
                rows.append((wc, dt, *est, momentum_variance(q),
                             momentum_variance(q, regulator=SPECTRAL_REGULATOR)))
    w.csv("renorm.csv", ["omega_c", "dt", "fd2", "fd4", "sinc", "exact", "exact_spectral"], rows)
    lw = np.log([x[0] for x in rows[:len(wcs)]])
    slope = float(np.polyfit(lw, [x[5] for x in rows[:len(wcs)]], 1)[0]) if len(wcs) > 1 else None
    w.json("renorm_summary.json", {"exact_slope_vs_log_omega_c": slope,
                                   "gamma_over_pi": p.gamma / math.pi})
    return EXIT_OK


COMMANDS = {
    "equilibrium": cmd_equilibrium,
    "evolve": cmd_evolve,
    "scan": cmd_scan,
    "decay": cmd_decay,
    "renorm": cmd_renorm,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ohmic-kbe", description=__doc__.split("\n\n")[0])
    ap.add_argument("--config", metavar="PATH", help="INI file with [model], [grid], [run]")
    ap.add_argument("--out", metavar="DIR", default=".", help="output directory")
    ap.add_argument("--jobs", metavar="N", type=int, default=1, help="parallel scan cells")
    ap.add_argument("--seedless", action="store_true",
                    help="assert a deterministic run (no random numbers are used anywhere)")
    ap.add_argument("--checkpoint", metavar="PATH",
                    help="evolve: resume from PATH if it exists and save the final state to it")
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("command", choices=sorted(COMMANDS))
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    w = None
    try:
        text = Path(args.config).read_text() if args.config else ""
        cfg = load_config(text)
        w = Writer(Path(args.out), config_digest(cfg), cfg, args)
        status = COMMANDS[args.command](cfg, args, w)
    except (ConfigError, OSError) as exc:
        print(f"ohmic-kbe: configuration error: {exc}", file=sys.stderr)
        status = EXIT_CONFIG
    except RegimeError as exc:
        print(f"ohmic-kbe: unsupported regime: {exc}", file=sys.stderr)
        status = EXIT_REGIME
    except InvariantError as exc:
        print(f"ohmic-kbe: invariant violated at step {exc.step}: {exc}", file=sys.stderr)
        status = EXIT_INVARIANT
    except ToleranceError as exc:
        print(f"ohmic-kbe: tolerance not reached ({exc.achieved:.3g}): {exc}", file=sys.stderr)
        status = EXIT_TOLERANCE
    if w is not None:
        w.manifest(args.command, status)
    return status


if __name__ == "__main__":
    sys.exit(main())
