"""Command-line front end: simulate, fieldmap, validate and sweep.

Configs are flat ``key = value`` files with dotted keys, for example::

    field.model = bessel
    field.m_z = 1
    spin.mode = both
    initial.rho = 0.3141592653589793
    t_end = 2000

Exit codes: 0 success, 1 failed validation, 2 config or usage error,
3 integration failure (partial output is still written).
"""
from __future__ import annotations

import argparse
import configparser
import csv
import json
import math
import os
import re
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from . import dynamics as dyn
from .fields import BesselBeam, BesselBeamParams, FieldModel, NoField, PlaneWave, StaticMagnet
from .invariants import eigenvalues, field_invariants

EXIT_OK, EXIT_FAILED, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2, 3
OUTPUT_ENV = "SEMIDIRAC_OUTPUT_DIR"
TRAJECTORY_SCHEMA = "# semidirac-trajectory v1"
FIELDMAP_SCHEMA = "# semidirac-fieldmap v1"
SUMMARY_SCHEMA = "semidirac-summary v1"
TRAJECTORY_COLUMNS = ["t", "x", "y", "z", "rho", "phi", "vx", "vy", "vz", "gamma", "mass_ratio",
                      "lambda2_re", "lambda2_im", "L", "P", "s_real", "s_imag"]
FIELDMAP_COLUMNS = ["x", "y", "rho", "phi", "delta2", "d_krho_delta2", "d_theta_delta2",
                    "energy_density", "poynting_x", "poynting_y", "poynting_z"]
_ROOT = "__root__"


class ConfigError(ValueError):
    """Malformed or invalid configuration; carries the offending key and line."""

    def __init__(self, message: str, key: Optional[str] = None, line: Optional[int] = None,
                 path: Optional[str] = None):
        self.key, self.line, self.path = key, line, path
        super().__init__(message)

    def __str__(self):
        what = f"key '{self.key}': " if self.key else ""
        if self.path is None and self.line is None:
            return what + self.args[0]
        where = (self.path or "<config>") + (f":{self.line}" if self.line is not None else "")
        return f"{where}: {what}{self.args[0]}"


# ---------------------------------------------------------------------------
# config schema and parsing
# ---------------------------------------------------------------------------

def _choice(*options):
    def parse(text):
        if text not in options:
            raise ValueError(f"expected one of {', '.join(options)}, got '{text}'")
        return text
    return parse


def _boolean(text):
    states = configparser.ConfigParser.BOOLEAN_STATES
    if text.lower() not in states:
        raise ValueError(f"expected a boolean, got '{text}'")
    return states[text.lower()]


def _integer(text):
    return int(text)


def _real(text):
    value = float(text)
    if not math.isfinite(value):
        raise ValueError(f"expected a finite number, got '{text}'")
    return value


# key -> (parser, default); None defaults are optional keys
SCHEMA = {
    "field.model": (_choice("bessel", "static", "plane", "none"), "bessel"),
    "field.m_z": (_integer, 1),
    "field.kperp": (_real, 0.04),
    "field.amp_te": (_real, 0.005),
    "field.amp_tm": (_real, 0.0),
    "field.phase_te": (_real, 0.0),
    "field.phase_tm": (_real, 0.0),
    "field.b0": (_real, 0.0),
    "field.gradient": (_real, 0.0),
    "field.amp": (_real, 0.0),
    "chi": (_real, None),
    "wavelength_nm": (_real, 0.1),
    "spin.mode": (_choice("off", "plus", "minus", "both"), "both"),
    "spin.convention": (_choice("FIG2", "STRICT"), "FIG2"),
    "initial.rho": (_real, 0.1 * math.pi),
    "initial.phi": (_real, 0.0),
    "initial.z": (_real, 0.0),
    "initial.drho": (_real, 0.0),
    "initial.dphi": (_real, -0.01),
    "initial.dz": (_real, 3e-5),
    "t_end": (_real, 2000.0),
    "sample_interval": (_real, 1.0),
    "integrator.rtol": (_real, 1e-10),
    "integrator.atol": (_real, 1e-12),
    "integrator.max_step": (_real, None),
    "selfconsistent.enabled": (_boolean, False),
    "selfconsistent.max_iters": (_integer, 1),
    "selfconsistent.threshold": (_real, 1e-6),
    "output.dir": (str, "semidirac_out"),
    "output.prefix": (str, "run"),
    "output.plots": (_boolean, True),
    "fieldmap.extent": (_real, 150.0),
    "fieldmap.n": (_integer, 201),
}


@dataclass
class RunConfig:
    """Typed, validated configuration; ``values`` maps every schema key to its value."""

    values: dict
    lines: dict = field(default_factory=dict)
    path: Optional[str] = None

    def __getitem__(self, key):
        return self.values[key]

    def error(self, key: str, message: str) -> ConfigError:
        return ConfigError(message, key, self.lines.get(key), self.path)

    @property
    def chi(self) -> float:
        if self.values["chi"] is not None:
            return self.values["chi"]
        return dyn.chi_from_wavelength(self.values["wavelength_nm"])

    @property
    def output_dir(self) -> Path:
        return Path(os.environ.get(OUTPUT_ENV) or self.values["output.dir"])

    def model(self) -> FieldModel:
        v = self.values
        kind = v["field.model"]
        if kind == "bessel":
            try:
                return BesselBeam(BesselBeamParams(v["field.m_z"], v["field.kperp"], v["field.amp_te"],
                                                   v["field.amp_tm"], v["field.phase_te"], v["field.phase_tm"]))
            except ValueError as exc:
                raise self.error("field.kperp", str(exc)) from None
        if kind == "static":
            return StaticMagnet(v["field.b0"], v["field.gradient"])
        if kind == "plane":
            return PlaneWave(v["field.amp"])
        return NoField()

    def initial(self) -> dyn.TrajectoryState:
        v = self.values
        return dyn.TrajectoryState.cylindrical(v["initial.rho"], v["initial.phi"], v["initial.z"],
                                               v["initial.drho"], v["initial.dphi"], v["initial.dz"])

    def simulation(self, spin: str) -> dyn.SimulationConfig:
        """Integrator config for branch ``spin`` in {off, plus, minus}."""
        v = self.values
        rule = dyn.SpinRule.OFF if spin == "off" else dyn.SpinRule(v["spin.convention"])
        max_step = v["integrator.max_step"] if v["integrator.max_step"] is not None else np.inf
        return dyn.SimulationConfig(self.model(), self.chi, rule, -1 if spin == "minus" else 1,
                                    rtol=v["integrator.rtol"], atol=v["integrator.atol"], max_step=max_step)

    def with_value(self, key: str, value) -> "RunConfig":
        values = dict(self.values)
        values[key] = value
        out = replace(self, values=values)
        validate(out)
        return out


def _line_numbers(text: str) -> dict:
    lines = {}
    for n, line in enumerate(text.splitlines(), 1):
        m = re.match(r"\s*([^#;=\s][^=]*?)\s*=", line)
        if m:
            lines.setdefault(m.group(1), n)
    return lines


def parse_config(text: str, path: Optional[str] = None) -> RunConfig:
    """Parse flat dotted ``key = value`` text into a validated :class:`RunConfig`."""
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"),
                                       delimiters=("=",), empty_lines_in_values=False, strict=True)
    parser.optionxform = str
    try:
        # an implicit section keeps the file flat; reported line numbers shift by one
        parser.read_string(f"[{_ROOT}]\n" + text)
    except configparser.DuplicateOptionError as exc:
        raise ConfigError("duplicate key", exc.option, exc.lineno - 1, path) from None
    except configparser.DuplicateSectionError as exc:
        raise ConfigError("sections are not supported; use dotted keys", None, exc.lineno - 1, path) from None
    except configparser.ParsingError as exc:
        lineno = exc.errors[0][0] - 1
        line = text.splitlines()[lineno - 1].strip()
        raise ConfigError(f"cannot parse '{line}' (expected key = value)", None, lineno, path) from None
    extra = [s for s in parser.sections() if s != _ROOT]
    if extra:
        lines = {n for n, l in enumerate(text.splitlines(), 1) if l.strip() == f"[{extra[0]}]"}
        raise ConfigError("sections are not supported; use dotted keys", None, min(lines, default=None), path)
    lines = _line_numbers(text)
    values = {k: default for k, (_, default) in SCHEMA.items()}
    for key, raw in parser.items(_ROOT):
        if key not in SCHEMA:
            raise ConfigError("unknown key", key, lines.get(key), path)
        if raw is None or raw == "":
            raise ConfigError("missing value", key, lines.get(key), path)
        try:
            values[key] = SCHEMA[key][0](raw.strip())
        except ValueError as exc:
            raise ConfigError(str(exc), key, lines.get(key), path) from None
    if "chi" in dict(parser.items(_ROOT)) and "wavelength_nm" in dict(parser.items(_ROOT)):
        raise ConfigError("give either chi or wavelength_nm, not both", "chi", lines.get("chi"), path)
    cfg = RunConfig(values, lines, path)
    validate(cfg)
    return cfg


def validate(cfg: RunConfig) -> None:
    """Range checks that need more than one key or a physical constraint."""
    v = cfg.values
    for key in ("integrator.rtol", "integrator.atol", "sample_interval", "wavelength_nm"):
        if v[key] <= 0:
            raise cfg.error(key, "must be positive")
    if v["integrator.max_step"] is not None and v["integrator.max_step"] <= 0:
        raise cfg.error("integrator.max_step", "must be positive")
    if v["chi"] is not None and v["chi"] < 0:
        raise cfg.error("chi", "must be non-negative")
    if v["t_end"] <= 0:
        raise cfg.error("t_end", "must be positive")
    if v["initial.rho"] < 0:
        raise cfg.error("initial.rho", "must be non-negative")
    speed = math.sqrt(v["initial.drho"] ** 2 + (v["initial.rho"] * v["initial.dphi"]) ** 2 + v["initial.dz"] ** 2)
    if speed >= 1.0:
        key = max(("initial.drho", "initial.dphi", "initial.dz"),
                  key=lambda k: abs(v[k]) * (v["initial.rho"] if k == "initial.dphi" else 1.0))
        raise cfg.error(key, f"initial speed {speed:.6g} must be below c")
    if v["selfconsistent.max_iters"] < 1:
        raise cfg.error("selfconsistent.max_iters", "must be at least 1")
    if v["selfconsistent.threshold"] <= 0:
        raise cfg.error("selfconsistent.threshold", "must be positive")
    if v["fieldmap.n"] < 2:
        raise cfg.error("fieldmap.n", "must be at least 2")
    if v["fieldmap.extent"] <= 0:
        raise cfg.error("fieldmap.extent", "must be positive")
    if v["field.model"] == "bessel" and not 0.0 < v["field.kperp"] < 1.0:
        raise cfg.error("field.kperp", "must lie in (0, 1)")


def load_config(path: str) -> RunConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", path=path) from None
    return parse_config(text, path)


# ---------------------------------------------------------------------------
# simulation
# ---------------------------------------------------------------------------

BRANCHES = {"off": ["off"], "plus": ["plus"], "minus": ["minus"], "both": ["plus", "minus", "off"]}
BRANCH_NAMES = {"plus": "plus", "minus": "minus", "off": "spinless"}


def _sample_times(cfg: RunConfig) -> np.ndarray:
    times = np.arange(0.0, cfg["t_end"], cfg["sample_interval"])
    return np.append(times, cfg["t_end"])


def trajectory_table(traj: dyn.Trajectory) -> np.ndarray:
    """Rows of :data:`TRAJECTORY_COLUMNS` for every sample of ``traj``."""
    model = traj.config.model
    f = model.sample(traj.t, traj.x)
    lam2 = eigenvalues(f)[..., 0] ** 2
    if isinstance(model, BesselBeam):
        big_l, big_p = dyn.conserved_along(traj)
    else:
        big_l = big_p = np.full(len(traj.t), np.nan)
    return np.column_stack([traj.t, traj.x, traj.rho, traj.phi, traj.v, traj.gamma, traj.mass,
                            lam2.real, lam2.imag, big_l, big_p, traj.s_real, traj.s_imag])


def write_table(path: Path, schema: str, columns, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(schema + "\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([repr(float(x)) for x in row])


def _relative_drift(values: np.ndarray) -> Optional[float]:
    if not np.all(np.isfinite(values)) or len(values) == 0:
        return None
    ref = abs(values[0])
    return float(np.max(np.abs(values - values[0])) / ref) if ref > 0 else float(np.max(np.abs(values)))


def _run_branch(task):
    """Worker: integrate one branch and return its table and summary (picklable)."""
    cfg, spin = task
    sim = cfg.simulation(spin)
    initial = cfg.initial()
    times = _sample_times(cfg)
    start = time.perf_counter()
    deviations = None
    if cfg["selfconsistent.enabled"] and spin != "off" and sim.spin_on:
        from . import selfconsistent as sc
        report = sc.iterate(dyn.with_spin(sim, sign=1), initial, cfg["t_end"], j=1 if spin == "plus" else 2,
                            max_iters=cfg["selfconsistent.max_iters"],
                            threshold=cfg["selfconsistent.threshold"])
        sim = dyn.with_spin(sim, correction=report.corrections[-1])
        deviations = report.deviations
    traj = dyn.integrate(sim, initial, cfg["t_end"], sample_times=times)
    table = trajectory_table(traj)
    final = traj.state(len(traj.t) - 1)
    try:
        ratio = dyn.debroglie_check(final, sim, warn_above=np.inf)
    except ZeroDivisionError:
        ratio = None
    summary = {
        "status": traj.status,
        "message": traj.message,
        "samples": len(traj.t),
        "final_state": {"t": final.t, "x": final.x.tolist(), "v": final.v.tolist(), "gamma": final.gamma,
                        "mass_ratio": float(traj.mass[-1]), "s_real": final.s_real, "s_imag": final.s_imag},
        "drift": {"L": _relative_drift(table[:, 13]), "P": _relative_drift(table[:, 14]),
                  "gamma_step": traj.max_gamma_error, "gamma_accumulated": traj.gamma_drift},
        "debroglie_ratio": ratio,
        "near_null_steps": traj.near_null_steps,
        "forced_steps": traj.forced_steps,
        "selfconsistent_deviations": deviations,
        "wall_time_s": time.perf_counter() - start,
    }
    return table, summary


def _map(fn, tasks, jobs: int):
    if jobs <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=min(jobs, len(tasks))) as pool:
        return list(pool.map(fn, tasks))


def _plot_lines(path: Path, series, xlabel: str, ylabel: str, equal: bool = False) -> None:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    plt.rcParams["svg.hashsalt"] = "semidirac"
    fig, ax = plt.subplots(figsize=(6, 4.5))
    for label, xs, ys in series:
        ax.plot(xs, ys, lw=0.8, label=label)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if equal:
        ax.set_aspect("equal", adjustable="datalim")
    if len(series) > 1:
        ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def _write_plots(out: Path, prefix: str, tables: dict) -> list:
    paths = []
    specs = [("xy", 1, 2, "x [c/omega]", "y [c/omega]", True),
             ("z", 0, 3, "t [1/omega]", "z [c/omega]", False),
             ("rho", 0, 4, "t [1/omega]", "rho [c/omega]", False)]
    for tag, i, j, xl, yl, equal in specs:
        path = out / f"{prefix}_{tag}.svg"
        _plot_lines(path, [(name, tab[:, i], tab[:, j]) for name, tab in tables.items()], xl, yl, equal)
        paths.append(path)
    return paths


def simulate(cfg: RunConfig, jobs: int = 0, spins=None, prefix: Optional[str] = None,
             plots: Optional[bool] = None) -> tuple:
    """Run every requested branch, write CSV, summary JSON and plots; return (exit code, summary)."""
    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    prefix = prefix or cfg["output.prefix"]
    spins = spins or BRANCHES[cfg["spin.mode"]]
    jobs = jobs or os.cpu_count() or 1
    start = time.perf_counter()
    results = _map(_run_branch, [(cfg, s) for s in spins], jobs)
    tables, branches = {}, {}
    for spin, (table, summary) in zip(spins, results):
        name = BRANCH_NAMES[spin]
        path = out / f"{prefix}_{name}.csv"
        write_table(path, TRAJECTORY_SCHEMA, TRAJECTORY_COLUMNS, table)
        summary["csv"] = path.name
        tables[name], branches[name] = table, summary
    plot_files = _write_plots(out, prefix, tables) if (cfg["output.plots"] if plots is None else plots) else []
    failed = [n for n, s in branches.items() if s["status"] != "ok"]
    summary = {"schema": SUMMARY_SCHEMA, "config": cfg.path, "chi": cfg.chi, "branches": branches,
               "plots": [p.name for p in plot_files], "failed": failed,
               "wall_time_s": time.perf_counter() - start}
    with open(out / f"{prefix}_summary.json", "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2)
    return (EXIT_RUNTIME if failed else EXIT_OK), summary


# ---------------------------------------------------------------------------
# field map
# ---------------------------------------------------------------------------

def fieldmap_table(params: BesselBeamParams, extent: float, n: int) -> np.ndarray:
    """Transverse-plane map at t = 0, z = 0 (so k_z z - t = 0), all values over amp^2."""
    g = np.linspace(-extent, extent, n)
    xx, yy = np.meshgrid(g, g)
    r = np.column_stack([xx.ravel(), yy.ravel(), np.zeros(xx.size)])
    f = BesselBeam(params).sample(np.zeros(len(r)), r)
    amp2 = params.amp ** 2
    delta2 = field_invariants(f)[0]
    # d(B.B - E.E) = 2 (B.dB - E.dE) over (t, x, y, z)
    d_delta2 = 2.0 * (np.einsum("ni,nim->nm", f.b_vec, f.d_b) - np.einsum("ni,nim->nm", f.e_vec, f.d_e))
    rho = np.hypot(r[:, 0], r[:, 1])
    with np.errstate(invalid="ignore", divide="ignore"):
        d_rho = np.where(rho > 0, (r[:, 0] * d_delta2[:, 1] + r[:, 1] * d_delta2[:, 2]) / rho, 0.0)
    energy = np.sum(f.e_vec ** 2, axis=1) + np.sum(f.b_vec ** 2, axis=1)
    poynting = np.cross(f.e_vec, f.b_vec)
    return np.column_stack([r[:, 0], r[:, 1], rho, np.arctan2(r[:, 1], r[:, 0]), delta2 / amp2,
                            d_rho / params.kperp / amp2, -d_delta2[:, 0] / amp2, energy / amp2, poynting / amp2])


def _plot_heatmap(path: Path, table: np.ndarray, n: int, column: int, label: str) -> None:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    plt.rcParams["svg.hashsalt"] = "semidirac"
    fig, ax = plt.subplots(figsize=(5.5, 4.5))
    grid = table[:, column].reshape(n, n)
    extent = [table[:, 0].min(), table[:, 0].max(), table[:, 1].min(), table[:, 1].max()]
    im = ax.imshow(grid, origin="lower", extent=extent, cmap="RdBu_r")
    fig.colorbar(im, ax=ax, label=label)
    ax.set_xlabel("x [c/omega]")
    ax.set_ylabel("y [c/omega]")
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def fieldmap(cfg: RunConfig) -> tuple:
    if cfg["field.model"] != "bessel":
        raise cfg.error("field.model", "fieldmap needs a Bessel beam")
    model = cfg.model()
    if model.amp == 0:
        raise cfg.error("field.amp_te", "fieldmap needs a nonzero beam amplitude")
    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    n = cfg["fieldmap.n"]
    table = fieldmap_table(model.params, cfg["fieldmap.extent"], n)
    prefix = cfg["output.prefix"]
    write_table(out / f"{prefix}_fieldmap.csv", FIELDMAP_SCHEMA, FIELDMAP_COLUMNS, table)
    files = [f"{prefix}_fieldmap.csv"]
    if cfg["output.plots"]:
        for col, tag, label in ((4, "delta2", "Delta^2 / amp^2"), (5, "d_krho_delta2", "d Delta^2 / d(k_perp rho)"),
                                (6, "d_theta_delta2", "d Delta^2 / d Theta")):
            _plot_heatmap(out / f"{prefix}_{tag}.svg", table, n, col, label)
            files.append(f"{prefix}_{tag}.svg")
    return EXIT_OK, {"files": files}


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------

def parse_vary(text: str, cfg: RunConfig):
    m = re.fullmatch(r"\s*([\w.]+)\s*=\s*([^:]+):([^:]+):(\d+)\s*", text)
    if not m:
        raise ConfigError(f"--vary expects key=start:stop:n, got '{text}'")
    key = m.group(1)
    if key not in SCHEMA:
        raise ConfigError("unknown key", key)
    parse = SCHEMA[key][0]
    if parse not in (_real, _integer):
        raise ConfigError("only numeric keys can be swept", key)
    try:
        start, stop = float(m.group(2)), float(m.group(3))
    except ValueError:
        raise ConfigError(f"bad range '{m.group(2)}:{m.group(3)}'", key) from None
    count = int(m.group(4))
    if count < 1:
        raise ConfigError("n must be at least 1", key)
    values = np.linspace(start, stop, count)
    if parse is _integer:
        values = np.unique(np.round(values).astype(int))
    return key, [v.item() for v in values]


def sweep(cfg: RunConfig, vary: str, jobs: int = 0) -> tuple:
    key, values = parse_vary(vary, cfg)
    configs = []
    for i, value in enumerate(values):
        try:
            configs.append(cfg.with_value(key, value))
        except ConfigError as exc:
            raise ConfigError(f"{exc.args[0]} (sweep value {value!r})", exc.key, exc.line, exc.path) from None
    spins = BRANCHES[cfg["spin.mode"]]
    index = [(i, s) for i in range(len(configs)) for s in spins]
    tasks = [(configs[i], s) for i, s in index]
    results = _map(_run_branch, tasks, jobs or os.cpu_count() or 1)
    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    prefix = cfg["output.prefix"]
    rows, failed = [], False
    for (i, spin), (table, summary) in zip(index, results):
        name = f"{prefix}_{key.replace('.', '_')}_{i:03d}_{BRANCH_NAMES[spin]}.csv"
        write_table(out / name, TRAJECTORY_SCHEMA, TRAJECTORY_COLUMNS, table)
        failed |= summary["status"] != "ok"
        final = table[-1]
        rows.append([values[i], BRANCH_NAMES[spin], summary["status"], final[0], final[3], final[4],
                     summary["drift"]["L"], summary["drift"]["P"], name])
    with open(out / f"{prefix}_sweep.csv", "w", newline="", encoding="utf-8") as fh:
        fh.write("# semidirac-sweep v1\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([key, "branch", "status", "t_final", "z_final", "rho_final", "drift_L", "drift_P", "csv"])
        writer.writerows(rows)
    return (EXIT_RUNTIME if failed else EXIT_OK), {"key": key, "values": values, "runs": len(rows)}


# ---------------------------------------------------------------------------
# validate and entry point
# ---------------------------------------------------------------------------

def validate_suite(name: str) -> tuple:
    from . import acceptance
    if name != "all" and name not in acceptance.CHECKS:
        raise ConfigError(f"unknown suite '{name}'; choose from all, {', '.join(acceptance.CHECKS)}")
    results = acceptance.run_suite(name)
    report = {"suite": name, "passed": all(r.passed for r in results),
              "checks": [r.as_dict() for r in results]}
    return (EXIT_OK if report["passed"] else EXIT_FAILED), report


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="semidirac", description="Spin-dependent trajectories in vortex beams.")
    sub = ap.add_subparsers(dest="command", required=True)
    p = sub.add_parser("simulate", help="integrate the configured spin branches")
    p.add_argument("config")
    p.add_argument("--jobs", type=int, default=0, help="worker processes (default: CPU count)")
    p = sub.add_parser("fieldmap", help="write the transverse field-invariant map")
    p.add_argument("config")
    p = sub.add_parser("validate", help="run an acceptance suite and print a JSON report")
    p.add_argument("suite")
    p = sub.add_parser("sweep", help="repeat a simulation over a range of one key")
    p.add_argument("config")
    p.add_argument("--vary", required=True, metavar="KEY=START:STOP:N")
    p.add_argument("--jobs", type=int, default=0)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "validate":
            code, report = validate_suite(args.suite)
            print(json.dumps(report, indent=2))
            return code
        cfg = load_config(args.config)
        if args.command == "simulate":
            code, summary = simulate(cfg, jobs=args.jobs)
            for name in summary["failed"]:
                print(f"integration failed for {name}: {summary['branches'][name]['message']}", file=sys.stderr)
        elif args.command == "fieldmap":
            code, summary = fieldmap(cfg)
        else:
            code, summary = sweep(cfg, args.vary, jobs=args.jobs)
        print(json.dumps(summary, indent=2, default=str))
        return code
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except dyn.StateError as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
