"""Experiment orchestration: validated configs, the experiment runners, and
deterministic artifact emission.

Every experiment writes, into its output directory, one or more time-series
CSV files (gnuplot-friendly, ``t`` first), a ``summary.json`` holding the
echoed configuration and a list of named pass/fail assertions, and a
``timings.json`` with wall-clock measurements.  The summary is byte-stable:
identical configuration and seed produce identical bytes, so wall-clock times
live in the separate file and the summary's ``timings`` block holds
deterministic work counters instead.
"""

from __future__ import annotations

import copy
import json
import time
from multiprocessing import Pool
from pathlib import Path

import numpy as np

from .analysis import (
    SolitonSpec,
    build_soliton,
    complex_q_d2,
    find_fixed_point,
    miura_condition,
    miura_crosscheck,
    shift_minimized_error,
)
from .grid import Field, Grid, l2_norm
from .hydro import almost_hamiltonian, extract_series, limit_error, observables
from .kdv import LimitModel, blowup_monitor, conserved_quantities, evolve_kdv
from .micro import dt_max, evolve_micro, mass, well_prepared_init
from .models import chart_radius, limit_equation, preset

__all__ = [
    "EXPERIMENT_KINDS",
    "ConfigError",
    "ExperimentConfig",
    "default_config",
    "emit_series",
    "run_experiment",
]

EXPERIMENT_KINDS = ("kdv", "micro", "converge", "soliton", "miura", "hyperbolic")

_PRESET_NAMES = {
    "gp_scalar": "GP_SCALAR",
    "gp_coupled": "GP_COUPLED",
    "ll_easy_plane": "LL_EASY_PLANE",
    "ll_easy_cone": "LL_EASY_CONE",
    "af_chain": "AF_CHAIN",
}

_SHAPES = ("bump", "mode", "sine", "soliton")


class ConfigError(ValueError):
    """Invalid experiment configuration; the message names the field."""


_COMMON = {
    "params": {},
    "output_dir": "results",
    "seed": 0,
    "workers": 1,
    "initial": {"shape": "bump", "amplitude": 0.3, "width": 2.0, "mode": 1},
}

_DEFAULTS = {
    "kdv": {
        "preset": "ll_easy_plane",
        "grid": {"n": 128, "length": 2 * np.pi},
        "time": {"t_final": 1.0, "dt": 1e-3, "snapshots": 11},
        "initial": {"shape": "mode", "amplitude": 0.1, "width": 2.0, "mode": 1},
    },
    "micro": {
        "preset": "gp_scalar",
        "grid": {"n": 256, "length": 8 * np.pi},
        "time": {"t_final": 0.5, "dt": 1e-3, "snapshots": 11},
        "eps": 0.2,
    },
    "converge": {
        "preset": "gp_scalar",
        "grid": {"n": 256, "length": 8 * np.pi},
        "time": {"t_final": 0.5, "dt": 1e-3, "snapshots": 11},
        "eps_list": [0.2, 0.1, 0.05],
    },
    "soliton": {
        "preset": "gp_scalar",
        "grid": {"n": 512, "length": 16 * np.pi},
        "time": {"t_final": 2.0, "dt": 1e-3, "snapshots": 11},
        "speed": 4.0,
    },
    "miura": {
        "preset": "gp_scalar",
        "grid": {"n": 512, "length": 2 * np.pi},
        "time": {"t_final": 0.5, "dt": 1e-3, "snapshots": 11},
        "initial": {"shape": "sine", "amplitude": 0.5, "width": 2.0, "mode": 1},
        "d2_alpha": 1.0,
        "d2_beta": 1.0,
    },
    "hyperbolic": {
        "preset": "gp_scalar",
        "grid": {"n": 512, "length": 2 * np.pi},
        "time": {"t_final": 1.0, "dt": 2e-4, "snapshots": 11},
        "initial": {"shape": "sine", "amplitude": 1.0, "width": 2.0, "mode": 1},
        "delta": 0.0,
        "speed": 4.0,
    },
}


def default_config(experiment: str) -> dict:
    """Baseline configuration dictionary for one experiment kind."""
    if experiment not in EXPERIMENT_KINDS:
        raise ConfigError(
            f"experiment: must be one of {EXPERIMENT_KINDS}, got {experiment!r}"
        )
    cfg = copy.deepcopy(_COMMON)
    cfg.update(copy.deepcopy(_DEFAULTS[experiment]))
    cfg["experiment"] = experiment
    cfg["output_dir"] = f"results/{experiment}"
    return cfg


def _require(cond: bool, field: str, message: str):
    if not cond:
        raise ConfigError(f"{field}: {message}")


def _positive_number(value, field: str) -> float:
    _require(isinstance(value, (int, float)) and not isinstance(value, bool),
             field, f"must be a number, got {value!r}")
    _require(value > 0, field, f"must be positive, got {value!r}")
    return float(value)


def _as_complex(value, field: str) -> complex:
    if isinstance(value, (list, tuple)):
        _require(len(value) == 2, field, f"expects a number or [re, im], got {value!r}")
        return complex(float(value[0]), float(value[1]))
    _require(isinstance(value, (int, float)) and not isinstance(value, bool),
             field, f"must be a number or [re, im], got {value!r}")
    return complex(float(value))


class ExperimentConfig:
    """Validated parameters of one experiment run.

    Build with :meth:`from_dict`; the accepted schema is the one produced by
    :func:`default_config` (unknown keys are rejected, every numeric field
    must be positive, ``eps_list`` strictly decreasing, grid size a power of
    two).
    """

    _KNOWN_KEYS = {
        "experiment", "preset", "params", "grid", "time", "initial",
        "eps", "eps_list", "output_dir", "seed", "workers",
        "speed", "delta", "d2_alpha", "d2_beta",
    }

    def __init__(self, **fields):
        for name, value in fields.items():
            setattr(self, name, value)

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        unknown = set(raw) - cls._KNOWN_KEYS
        _require(not unknown, sorted(unknown)[0] if unknown else "",
                 "unknown configuration field")

        experiment = raw.get("experiment")
        _require(experiment in EXPERIMENT_KINDS, "experiment",
                 f"must be one of {EXPERIMENT_KINDS}, got {experiment!r}")

        preset_name = raw.get("preset")
        _require(preset_name in _PRESET_NAMES, "preset",
                 f"must be one of {sorted(_PRESET_NAMES)}, got {preset_name!r}")
        params = raw.get("params", {})
        _require(isinstance(params, dict), "params", "must be a mapping")

        grid = raw.get("grid", {})
        n = grid.get("n")
        _require(isinstance(n, int) and not isinstance(n, bool), "grid.n",
                 f"must be an integer, got {n!r}")
        _require(n >= 8 and (n & (n - 1)) == 0, "grid.n",
                 f"must be a power of two >= 8, got {n}")
        length = _positive_number(grid.get("length"), "grid.length")

        tblock = raw.get("time", {})
        t_final = _positive_number(tblock.get("t_final"), "time.t_final")
        dt = _positive_number(tblock.get("dt"), "time.dt")
        snapshots = tblock.get("snapshots")
        _require(isinstance(snapshots, int) and snapshots >= 2, "time.snapshots",
                 f"must be an integer >= 2, got {snapshots!r}")

        initial = dict(_COMMON["initial"])
        given = raw.get("initial", {})
        bad = set(given) - set(initial)
        _require(not bad, f"initial.{sorted(bad)[0] if bad else ''}",
                 "unknown initial-data field")
        initial.update(given)
        _require(initial["shape"] in _SHAPES, "initial.shape",
                 f"must be one of {_SHAPES}, got {initial['shape']!r}")
        initial["amplitude"] = _positive_number(initial["amplitude"], "initial.amplitude")
        initial["width"] = _positive_number(initial["width"], "initial.width")
        _require(isinstance(initial["mode"], int) and initial["mode"] >= 1,
                 "initial.mode", f"must be an integer >= 1, got {initial['mode']!r}")

        eps = raw.get("eps")
        if experiment == "micro":
            eps = _positive_number(eps, "eps")
            _require(eps < 1.0, "eps", f"must be below 1, got {eps}")

        eps_list = raw.get("eps_list")
        if experiment == "converge":
            _require(isinstance(eps_list, (list, tuple)) and len(eps_list) >= 2,
                     "eps_list", f"must list at least two values, got {eps_list!r}")
            eps_list = [_positive_number(e, "eps_list") for e in eps_list]
            _require(all(e < 1.0 for e in eps_list), "eps_list", "entries must be below 1")
            _require(all(b < a for a, b in zip(eps_list, eps_list[1:])),
                     "eps_list", f"must be strictly decreasing, got {eps_list}")
            steps = int(round(t_final / dt))
            _require(steps % (snapshots - 1) == 0, "time.dt",
                     f"t_final/dt = {steps} steps must be a multiple of "
                     f"snapshots-1 = {snapshots - 1} so snapshot times match "
                     "between the limit run and the microscopic runs")

        output_dir = raw.get("output_dir")
        _require(isinstance(output_dir, str) and output_dir, "output_dir",
                 f"must be a non-empty path, got {output_dir!r}")
        seed = raw.get("seed", 0)
        _require(isinstance(seed, int) and not isinstance(seed, bool) and seed >= 0,
                 "seed", f"must be a non-negative integer, got {seed!r}")
        workers = raw.get("workers", 1)
        _require(isinstance(workers, int) and workers >= 1, "workers",
                 f"must be an integer >= 1, got {workers!r}")

        speed = _positive_number(raw.get("speed", 4.0), "speed")
        delta = raw.get("delta", 0.0)
        _require(delta in (0, 1, 0.0, 1.0), "delta",
                 f"dispersion switch must be 0 or 1, got {delta!r}")
        d2_alpha = _as_complex(raw.get("d2_alpha", 1.0), "d2_alpha")
        d2_beta = _as_complex(raw.get("d2_beta", 1.0), "d2_beta")

        return cls(
            experiment=experiment,
            preset_name=preset_name,
            kind=_PRESET_NAMES[preset_name],
            params={k: float(v) for k, v in params.items()},
            n=n,
            length=length,
            t_final=t_final,
            dt=dt,
            snapshots=snapshots,
            initial=initial,
            eps=eps,
            eps_list=list(eps_list) if eps_list else None,
            output_dir=output_dir,
            seed=seed,
            workers=workers,
            speed=speed,
            delta=float(delta),
            d2_alpha=d2_alpha,
            d2_beta=d2_beta,
        )

    def echo(self) -> dict:
        """The result-determining configuration, for the JSON summary.

        Execution mechanics (worker count, output directory) do not influence
        the computed numbers and are left out so that serial and parallel runs
        of the same experiment emit byte-identical summaries.
        """
        out = {
            "experiment": self.experiment,
            "preset": self.preset_name,
            "params": self.params,
            "grid": {"n": self.n, "length": self.length},
            "time": {"t_final": self.t_final, "dt": self.dt, "snapshots": self.snapshots},
            "initial": self.initial,
            "seed": self.seed,
        }
        if self.experiment == "micro":
            out["eps"] = self.eps
        if self.experiment == "converge":
            out["eps_list"] = self.eps_list
        if self.experiment == "soliton":
            out["speed"] = self.speed
        if self.experiment == "miura":
            out["d2_alpha"] = [self.d2_alpha.real, self.d2_alpha.imag]
            out["d2_beta"] = [self.d2_beta.real, self.d2_beta.imag]
        if self.experiment == "hyperbolic":
            out["delta"] = self.delta
            out["speed"] = self.speed
        return out

    def make_grid(self) -> Grid:
        return Grid(self.n, self.length)


# ---------------------------------------------------------------------------
# artifact emission
# ---------------------------------------------------------------------------


def emit_series(path, columns, rows) -> None:
    """Write a CSV time series: header ``t,name1,...``, 17-significant-digit
    values, LF line endings.  Empty ``rows`` produces a header-only file."""
    columns = list(columns)
    rows = [list(r) for r in rows]
    for i, row in enumerate(rows):
        if len(row) != len(columns):
            raise ValueError(
                f"row {i} has {len(row)} entries, header has {len(columns)}"
            )
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(format(float(v), ".17g") for v in row) + "\n")


def _write_json(path, payload) -> None:
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _assertion(name: str, value: float, threshold: float, ok: bool) -> dict:
    return {
        "name": name,
        "value": float(value),
        "threshold": float(threshold),
        "pass": bool(ok),
    }


def _at_most(name: str, value: float, threshold: float) -> dict:
    return _assertion(name, value, threshold, value <= threshold)


def _initial_field(cfg: ExperimentConfig, grid: Grid, dim: int) -> Field:
    """Initial profile per the config's ``initial`` block, one weighted copy
    per component (weights 1, -1/2, 1/4, ... keep the components distinct)."""
    shape = cfg.initial["shape"]
    amp = cfg.initial["amplitude"]
    if shape == "bump":
        base = amp / np.cosh((grid.x - 0.5 * grid.length) / cfg.initial["width"]) ** 2
        base = base - base.mean()
    elif shape == "mode":
        base = amp * np.cos(cfg.initial["mode"] * 2.0 * np.pi * grid.x / grid.length)
    elif shape == "sine":
        base = amp * np.sin(cfg.initial["mode"] * 2.0 * np.pi * grid.x / grid.length)
    else:
        raise ConfigError(
            f"initial.shape: {shape!r} is only meaningful for the hyperbolic "
            "soliton control run"
        )
    weights = [(-0.5) ** i for i in range(dim)]
    return Field(grid, np.stack([w * base for w in weights]))


def _micro_steps(spec, eps: float, grid: Grid, t_final: float, snapshots: int) -> int:
    """Step count at a quarter of the stability ceiling, rounded so snapshot
    times land exactly on multiples of t_final/(snapshots-1)."""
    segments = max(1, snapshots - 1)
    cap = dt_max(spec, eps, grid)
    per_segment = int(np.ceil(t_final / segments / (0.25 * cap)))
    return per_segment * segments


# ---------------------------------------------------------------------------
# runners
# ---------------------------------------------------------------------------


def _run_kdv(cfg: ExperimentConfig, outdir: Path):
    geom, _ = preset(cfg.kind, cfg.params or None)
    model = limit_equation(geom)
    grid = cfg.make_grid()
    u0 = _initial_field(cfg, grid, geom.dim)
    traj = evolve_kdv(model, u0, cfg.t_final, cfg.dt, n_snapshots=cfg.snapshots)

    columns = ["t"]
    linear = model.has_canonical and model.canonical_q.is_zero
    if linear:
        columns.append("dispersion_error")
        k3 = grid.wavenumbers**3
        if grid.n_points % 2 == 0:
            k3[grid.n_points // 2] = 0.0
        u0_hat = np.fft.fft(u0.components, axis=-1)
    if model.has_canonical:
        columns += ["h_drift_rel", "m_drift_rel", "p_drift_abs"]
        canonical = model.as_canonical()
        h0, m0, p0 = conserved_quantities(canonical, model.raw_to_canonical_state(u0))

    rows, disp_errors, drifts = [], [0.0], ([0.0], [0.0], [0.0])
    for t, state in zip(traj.times, traj.states):
        row = [t]
        if linear:
            exact = np.fft.ifft(
                np.exp(model.dispersion * (-1j) * k3 * t) * u0_hat, axis=-1
            ).real
            err = l2_norm(state.components - exact, grid)
            disp_errors.append(err)
            row.append(err)
        if model.has_canonical:
            h, m, p = conserved_quantities(canonical, model.raw_to_canonical_state(state))
            dh = abs(h - h0) / max(abs(h0), 1e-300)
            dm = abs(m - m0) / max(m0, 1e-300)
            dp = float(np.max(np.abs(p - p0)))
            drifts[0].append(dh)
            drifts[1].append(dm)
            drifts[2].append(dp)
            row += [dh, dm, dp]
        rows.append(row)
    emit_series(outdir / "kdv_series.csv", columns, rows)

    assertions = [
        _assertion("run_completed", traj.times[-1] / cfg.t_final, 1.0, not traj.aborted)
    ]
    if linear:
        assertions.append(_at_most("dispersion_phase_error", max(disp_errors), 1e-10))
    if model.has_canonical:
        assertions.append(_at_most("hamiltonian_drift_rel", max(drifts[0]), 1e-8))
        assertions.append(_at_most("mass_drift_rel", max(drifts[1]), 1e-8))
        assertions.append(_at_most("momentum_drift_abs", max(drifts[2]), 1e-10))
    counters = {"kdv_steps": traj.meta["steps"], "snapshots": len(traj)}
    return assertions, counters


def _unit_norm_deviation(state) -> float:
    """Worst pointwise deviation of the spin blocks from unit length."""
    dev = 0.0
    for start in range(0, state.values.shape[0], 3):
        norms = np.linalg.norm(state.values[start:start + 3], axis=0)
        dev = max(dev, float(np.max(np.abs(norms - 1.0))))
    return dev


def _run_micro(cfg: ExperimentConfig, outdir: Path):
    geom, spec = preset(cfg.kind, cfg.params or None)
    grid = cfg.make_grid()
    A0 = _initial_field(cfg, grid, geom.dim)
    s0 = well_prepared_init(spec, geom, A0, cfg.eps)
    steps = _micro_steps(spec, cfg.eps, grid, cfg.t_final, cfg.snapshots)
    traj = evolve_micro(
        spec, s0, cfg.t_final, dt=cfg.t_final / steps, n_snapshots=cfg.snapshots
    )

    series = extract_series(spec, traj)
    energies = [almost_hamiltonian(spec, h)[0] for h in series]
    spin_model = not np.iscomplexobj(s0.values)
    columns = ["t", "w_norm", "eps_phi_inf", "energy", "structure_dev"]
    rows, w_norms, devs = [], [], []
    in_chart = True
    mass0 = None if spin_model else mass(spec, s0)
    for t, state, h, energy in zip(traj.times, traj.states, series, energies):
        w = l2_norm(observables(spec, h).W.components, grid)
        if spin_model:
            dev = _unit_norm_deviation(state)
        else:
            dev = abs(mass(spec, state) - mass0) / mass0
        w_norms.append(w)
        devs.append(dev)
        in_chart = in_chart and h.valid
        rows.append([t, w, float(np.max(np.abs(cfg.eps * h.phi.components))), energy, dev])
    emit_series(outdir / "micro_series.csv", columns, rows)

    structure_name = "unit_norm_deviation" if spin_model else "mass_drift_rel"
    assertions = [
        _assertion("run_completed", traj.times[-1] / cfg.t_final, 1.0, not traj.aborted),
        _at_most(structure_name, max(devs), 1e-10),
        _assertion("stayed_in_chart", 1.0 if in_chart else 0.0, 1.0, in_chart),
    ]
    counters = {
        "micro_steps": traj.meta["steps"],
        "rhs_evaluations": traj.meta.get("rhs_evals", 0),
        "snapshots": len(traj),
    }
    return assertions, counters


def _converge_task(payload):
    """One ε-run of the convergence experiment (worker-pool entry point).

    Isolated by construction: rebuilds its own limit reference and writes only
    its own CSV file, so no state crosses between ε-runs.
    """
    raw, eps = payload
    cfg = ExperimentConfig.from_dict(raw)
    geom, spec = preset(cfg.kind, cfg.params or None)
    grid = cfg.make_grid()
    A0 = _initial_field(cfg, grid, geom.dim)
    model = limit_equation(geom)
    kdv_traj = evolve_kdv(model, A0, cfg.t_final, cfg.dt, n_snapshots=cfg.snapshots)

    s0 = well_prepared_init(spec, geom, A0, eps)
    steps = _micro_steps(spec, eps, grid, cfg.t_final, cfg.snapshots)
    traj = evolve_micro(spec, s0, cfg.t_final, dt=cfg.t_final / steps,
                        n_snapshots=cfg.snapshots)
    out = {
        "eps": eps,
        "aborted": traj.aborted,
        "abort_reason": traj.abort_reason,
        "micro_steps": traj.meta["steps"],
        "kdv_steps": kdv_traj.meta["steps"],
    }
    path = Path(cfg.output_dir) / f"converge_eps_{eps!r}.csv"
    if traj.aborted:
        # partial artifact: the chart series of whatever was reached
        series = extract_series(spec, traj)
        rows = [
            [t, l2_norm(observables(spec, h).W.components, grid)]
            for t, h in zip(traj.times, series)
        ]
        emit_series(path, ["t", "w_norm"], rows)
        return out
    err = limit_error(spec, traj, kdv_traj)
    emit_series(
        path,
        ["t", "err_amplitude", "err_gradient", "w_norm", "eps_phi_inf", "energy_proxy"],
        [
            [t, a, g, w, p, pr]
            for t, a, g, w, p, pr in zip(
                err["times"], err["err_amplitude"], err["err_gradient"],
                err["w_norms"], err["eps_phi_inf"], err["energy_proxy"],
            )
        ],
    )
    out.update(
        sup_err_amplitude=err["sup_err_amplitude"],
        sup_err_gradient=err["sup_err_gradient"],
        sup_w=err["sup_w"],
        max_eps_phi=err["max_eps_phi"],
        chart_radius=err["chart_radius"],
        in_chart=bool(err["in_chart"].all()),
    )
    return out


def _run_converge(cfg: ExperimentConfig, outdir: Path):
    raw = dict(cfg.echo())
    raw["output_dir"] = str(outdir)
    raw["workers"] = cfg.workers
    payloads = [(raw, eps) for eps in cfg.eps_list]
    if cfg.workers > 1:
        with Pool(processes=min(cfg.workers, len(payloads))) as pool:
            results = pool.map(_converge_task, payloads)
    else:
        results = [_converge_task(p) for p in payloads]

    completed = [r for r in results if not r["aborted"]]
    all_done = len(completed) == len(results)
    assertions = [
        _assertion("all_runs_completed", float(len(completed)), float(len(results)),
                   all_done)
    ]
    if all_done:
        def ratios(key):
            vals = [r[key] for r in results]
            return max(b / a for a, b in zip(vals, vals[1:]))

        assertions += [
            _assertion("amplitude_error_strictly_decreasing",
                       ratios("sup_err_amplitude"), 1.0,
                       ratios("sup_err_amplitude") < 1.0),
            _assertion("gradient_error_strictly_decreasing",
                       ratios("sup_err_gradient"), 1.0,
                       ratios("sup_err_gradient") < 1.0),
            _assertion("w_norm_decreasing", ratios("sup_w"), 1.0,
                       ratios("sup_w") < 1.0),
            _assertion("phase_within_chart",
                       max(r["max_eps_phi"] for r in results),
                       results[0]["chart_radius"],
                       all(r["in_chart"] for r in results)
                       and max(r["max_eps_phi"] for r in results)
                       < results[0]["chart_radius"]),
        ]
    counters = {
        "kdv_steps": results[0]["kdv_steps"],
        "micro_steps": {f"{r['eps']!r}": r["micro_steps"] for r in results},
    }
    return assertions, counters


def _run_soliton(cfg: ExperimentConfig, outdir: Path):
    geom, _ = preset(cfg.kind, cfg.params or None)
    model = limit_equation(geom)
    if not model.has_canonical or model.canonical_q.is_zero:
        raise ConfigError(
            "preset: the soliton experiment needs a preset with a nonzero "
            f"conservative nonlinearity; {cfg.preset_name!r} has none"
        )
    canonical = model.as_canonical()
    Q = canonical.canonical_q
    z = find_fixed_point(Q, seed=cfg.seed)[0]
    grid = cfg.make_grid()
    u0 = build_soliton(SolitonSpec(speed=cfg.speed, direction=z, q_tensor=Q), grid)
    traj = evolve_kdv(canonical, u0, cfg.t_final, cfg.dt, n_snapshots=cfg.snapshots)

    h0, m0, p0 = conserved_quantities(canonical, u0)
    rows, dh, dm, dp, shapes = [], [0.0], [0.0], [0.0], [0.0]
    for t, state in zip(traj.times, traj.states):
        h, m, p = conserved_quantities(canonical, state)
        shape, _ = shift_minimized_error(state, u0)
        dh.append(abs(h - h0) / abs(h0))
        dm.append(abs(m - m0) / m0)
        dp.append(float(np.max(np.abs(p - p0))))
        shapes.append(shape)
        rows.append([t, dh[-1], dm[-1], dp[-1], shape])
    emit_series(outdir / "soliton_series.csv",
                ["t", "h_drift_rel", "m_drift_rel", "p_drift_abs", "shape_error"], rows)

    assertions = [
        _assertion("run_completed", traj.times[-1] / cfg.t_final, 1.0, not traj.aborted),
        _at_most("hamiltonian_drift_rel", max(dh), 1e-8),
        _at_most("mass_drift_rel", max(dm), 1e-8),
        _at_most("momentum_drift_abs", max(dp), 1e-10),
        _at_most("shape_error", max(shapes), 1e-4),
    ]
    counters = {"kdv_steps": traj.meta["steps"], "snapshots": len(traj)}
    return assertions, counters


def _run_miura(cfg: ExperimentConfig, outdir: Path):
    geom, _ = preset(cfg.kind, cfg.params or None)
    model = limit_equation(geom)
    if not model.has_canonical or model.dim != 1:
        raise ConfigError(
            "preset: the scalar Miura crosscheck needs a one-component preset "
            "with a conservative nonlinearity"
        )
    Q = model.as_canonical().canonical_q
    grid = cfg.make_grid()
    v0 = _initial_field(cfg, grid, 1)
    discrepancy = miura_crosscheck(Q, v0, cfg.t_final, cfg.dt,
                                   n_snapshots=cfg.snapshots)
    defect = miura_condition(complex_q_d2(cfg.d2_alpha, cfg.d2_beta))
    emit_series(outdir / "miura_series.csv",
                ["t", "crosscheck_discrepancy", "d2_condition_defect"],
                [[cfg.t_final, discrepancy, defect]])
    assertions = [
        _at_most("scalar_crosscheck", discrepancy, 1e-6),
        _at_most("d2_condition", defect, 1e-12),
    ]
    steps = int(round(cfg.t_final / cfg.dt))
    counters = {"kdv_steps": steps, "mkdv_steps": steps}
    return assertions, counters


def _run_hyperbolic(cfg: ExperimentConfig, outdir: Path):
    geom, _ = preset(cfg.kind, cfg.params or None)
    model = limit_equation(geom)
    if not model.has_canonical or model.dim != 1:
        raise ConfigError(
            "preset: the hyperbolic diagnostics need a one-component preset "
            "with a conservative nonlinearity"
        )
    Q = model.as_canonical().canonical_q
    grid = cfg.make_grid()
    run_model = LimitModel(1, dispersion=cfg.delta, canonical_q=Q, form="canonical")
    if cfg.initial["shape"] == "soliton":
        z = find_fixed_point(Q, seed=cfg.seed)[0]
        u0 = build_soliton(SolitonSpec(speed=cfg.speed, direction=z, q_tensor=Q), grid)
    else:
        u0 = _initial_field(cfg, grid, 1)
    traj = evolve_kdv(run_model, u0, cfg.t_final, cfg.dt, n_snapshots=cfg.snapshots)
    report = blowup_monitor(traj)

    grad_t, grad_v = traj.meta["grad_history"]
    emit_series(outdir / "hyperbolic_series.csv", ["t", "max_gradient"],
                [[t, g] for t, g in zip(grad_t, grad_v)])

    # characteristics: the scalar flux speed is 2 q u, so the first crossing
    # time from smooth data u0 is 1 / max(-d/dx (2 q u0))
    q = float(Q.coeffs[0, 0, 0])
    slope = np.fft.ifft(1j * grid.wavenumbers * np.fft.fft(2.0 * q * u0.components[0])).real
    steepening = float(np.max(-slope))
    oracle = 1.0 / steepening if steepening > 0 else None

    if cfg.delta == 0.0 and oracle is not None:
        detected = bool(report["breakdown"])
        rel_gap = (abs(report["time"] - oracle) / oracle) if detected else np.inf
        assertions = [
            _assertion("breakdown_detected", 1.0 if detected else 0.0, 1.0, detected),
            _assertion("breakdown_time_near_characteristics",
                       rel_gap if np.isfinite(rel_gap) else 1e30, 0.2,
                       detected and rel_gap <= 0.2),
        ]
    else:
        assertions = [
            _assertion("no_breakdown", 1.0 if report["breakdown"] else 0.0, 0.0,
                       not report["breakdown"]),
        ]
    counters = {"kdv_steps": traj.meta["steps"], "gradient_checks": len(grad_t)}
    return assertions, counters


_RUNNERS = {
    "kdv": _run_kdv,
    "micro": _run_micro,
    "converge": _run_converge,
    "soliton": _run_soliton,
    "miura": _run_miura,
    "hyperbolic": _run_hyperbolic,
}


def run_experiment(cfg: ExperimentConfig) -> int:
    """Run one experiment, write its artifacts, return a process exit status.

    Artifacts land in ``cfg.output_dir``: the experiment's CSV series,
    ``summary.json`` (configuration echo + assertions + work counters, byte
    deterministic) and ``timings.json`` (wall clock).  The status is 0 exactly
    when every assertion passed.
    """
    outdir = Path(cfg.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    started = time.perf_counter()
    assertions, counters = _RUNNERS[cfg.experiment](cfg, outdir)
    elapsed = time.perf_counter() - started
    summary = {
        "experiment": cfg.experiment,
        "config_echo": cfg.echo(),
        "assertions": assertions,
        "timings": counters,
    }
    _write_json(outdir / "summary.json", summary)
    _write_json(outdir / "timings.json", {"wall_seconds": elapsed})
    return 0 if all(a["pass"] for a in assertions) else 1
