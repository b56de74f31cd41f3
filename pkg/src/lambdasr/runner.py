"""Execution of configured runs and persistence of their artifacts.

Every simulation run writes ``trajectory.csv`` (the columns of
:data:`lambdasr.observables.COLUMNS`, 17 significant digits),
``manifest.json`` and, unless disabled, ``populations.svg`` and
``intensities.svg`` into its output directory.
"""
from __future__ import annotations

import hashlib
import io
import json
import os
import platform
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import __version__
from .analysis import DressedDecomposition, interference_fraction, pulse_metrics, single_atom_solution
from .config import RunConfig, emit_config, parse_config
from .errors import ComparisonFailure, ConfigError
from .integrator import Trajectory
from .meanfield import CorrelatorState, _output_grid
from .model import nondimensionalize
from .observables import COLUMNS, build_trajectory, time_axes

__all__ = [
    "RunResult", "run", "simulate", "write_csv", "read_csv", "load_run",
    "write_manifest", "manifest_config", "write_svgs", "compare", "CompareReport",
]


@dataclass
class RunResult:
    status: int
    out_dir: Path
    artifacts: List[Path] = field(default_factory=list)
    trajectory: Optional[Trajectory] = None
    report: Optional[dict] = None


def _single_atom(cfg: RunConfig) -> Trajectory:
    p = cfg.params
    grid = _output_grid(cfg.t_end, cfg.n_points, cfg.spacing)
    t_phys = grid * time_axes(p)[cfg.unit] / p.collective_rate1
    p1, p2, p3, c = single_atom_solution(t_phys, p.gamma1, p.gamma2, p.rabi)
    s0 = p.initial_excited
    if s0 != 1 and p.rabi != 0:
        # the drive also rotates the part of the atom left in |1>
        raise ConfigError("single-atom mode with a drive needs initial_excited = 1")
    states = [CorrelatorState(a * s0 + (1 - s0), b * s0, e * s0, z * s0)
              for a, b, e, z in zip(p1, p2, p3, c)]
    meta = {"engine": "single-atom", "params": asdict(p), "scaled": asdict(nondimensionalize(p))}
    return build_trajectory(grid, cfg.unit, states, p, meta)


def simulate(cfg: RunConfig) -> Trajectory:
    """Trajectory of one simulation-mode configuration."""
    if cfg.mode == "meanfield":
        from .meanfield import simulate as mf
        return mf(cfg.params, cfg.t_end, tol=cfg.tol, unit=cfg.unit, n_points=cfg.n_points,
                  spacing=cfg.spacing, seed=cfg.seed, method=cfg.method)
    if cfg.mode == "exact":
        from .exact import simulate_exact
        return simulate_exact(cfg.params, cfg.t_end, unit=cfg.unit, n_points=cfg.n_points,
                              spacing=cfg.spacing, geometry=cfg.geometry, dicke=cfg.dicke,
                              tol=cfg.tol)
    if cfg.mode == "single-atom":
        return _single_atom(cfg)
    raise ConfigError(f"mode {cfg.mode!r} does not produce a single trajectory")


def write_csv(traj: Trajectory, path) -> Path:
    data = np.column_stack([np.asarray(traj[c], dtype=float) for c in COLUMNS])
    buf = io.StringIO()
    np.savetxt(buf, data, fmt="%.17g", delimiter=",", header=",".join(COLUMNS), comments="")
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(buf.getvalue())
    return path


def read_csv(path, unit: str = "fast") -> Trajectory:
    """Load a trajectory CSV; the time axis is ``t_scaled_fast`` (or ``slow``)."""
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
    if list(header) != list(COLUMNS):
        raise ConfigError(f"{path}: unexpected CSV header")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    cols = {name: data[:, i] for i, name in enumerate(COLUMNS)}
    times = cols["t_scaled_slow" if unit == "slow" else "t_scaled_fast"]
    return Trajectory(times, unit, cols)


def load_run(path) -> Trajectory:
    """Trajectory from a run directory or CSV, with the manifest's parameters if present."""
    path = Path(path)
    csv = path / "trajectory.csv" if path.is_dir() else path
    if not csv.exists():
        raise ConfigError(f"no trajectory found at {path}")
    traj = read_csv(csv)
    manifest = csv.parent / "manifest.json"
    if manifest.exists():
        data = json.loads(manifest.read_text(encoding="utf-8"))
        traj.metadata.update(params=data.get("params"), manifest=data)
    return traj


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        v = float(x)
        return v if np.isfinite(v) else str(v)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, (np.bool_,)):
        return bool(x)
    return x


def write_manifest(cfg: RunConfig, out_dir: Path, artifacts: Sequence[Path], traj: Optional[Trajectory],
                   started: str, extra: Optional[dict] = None) -> Path:
    meta = traj.metadata if traj is not None else {}
    manifest = {
        "engine_version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "mode": cfg.mode,
        "config": emit_config(cfg),
        "params": asdict(cfg.params) if cfg.params is not None else None,
        "scaled": asdict(nondimensionalize(cfg.params)) if cfg.params is not None else None,
        "solver": meta.get("solver"),
        "artifacts": {p.name: _sha256(p) for p in artifacts},
        "started": started,
        "finished": datetime.now(timezone.utc).isoformat(),
    }
    if extra:
        manifest.update(extra)
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(_jsonable(manifest), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def manifest_config(manifest) -> RunConfig:
    """The configuration recorded in a manifest (a dict, a path or a run directory)."""
    if not isinstance(manifest, dict):
        p = Path(manifest)
        if p.is_dir():
            p = p / "manifest.json"
        manifest = json.loads(p.read_text(encoding="utf-8"))
    return parse_config(manifest["config"])


def write_svgs(traj: Trajectory, out_dir: Path, log_time: bool = False) -> List[Path]:
    """Populations and intensities panels as static SVG line charts."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    t = traj.times
    mask = t > 0 if log_time else np.ones_like(t, dtype=bool)
    label = {"fast": r"$\mu_1 N \gamma_1 t$", "slow": r"$\mu_2 N \gamma_2 t$", "physical": "t"}[traj.unit]
    panels = {
        "populations.svg": [("p1_over_N", r"$\langle S_{11}\rangle/N$"),
                            ("p2_over_N", r"$\langle S_{22}\rangle/N$"),
                            ("p3_over_N", r"$\langle S_{33}\rangle/N$")],
        "intensities.svg": [("I1", r"$I_1$"), ("I2", r"$I_2$")],
    }
    paths = []
    with matplotlib.rc_context({"svg.hashsalt": "lambdasr", "svg.fonttype": "path"}):
        for name, series in panels.items():
            fig, ax = plt.subplots(figsize=(6, 4))
            for col, lab in series:
                ax.plot(t[mask], traj[col][mask], label=lab)
            if log_time:
                ax.set_xscale("log")
            ax.set_xlabel(label)
            ax.legend()
            fig.tight_layout()
            path = out_dir / name
            fig.savefig(path, format="svg", metadata={"Date": None})
            plt.close(fig)
            paths.append(path)
    return paths


def _prepare_dir(path) -> Path:
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {out}: {exc}") from None
    if not os.access(out, os.W_OK):
        raise ConfigError(f"output directory {out} is not writable")
    return out


def _run_single(cfg: RunConfig) -> RunResult:
    started = datetime.now(timezone.utc).isoformat()
    out = _prepare_dir(cfg.out_dir)
    traj = simulate(cfg)
    artifacts = [write_csv(traj, out / "trajectory.csv")]
    if cfg.svg:
        artifacts += write_svgs(traj, out, cfg.log_time)
    artifacts.append(write_manifest(cfg, out, artifacts, traj, started))
    return RunResult(0, out, artifacts, traj)


def _sweep_point(cfg: RunConfig):
    res = _run_single(cfg)
    m = pulse_metrics(res.trajectory)
    return m.as_row()


def _run_sweep(cfg: RunConfig) -> RunResult:
    started = datetime.now(timezone.utc).isoformat()
    out = _prepare_dir(cfg.out_dir)
    points = []
    for i, w in enumerate(cfg.sweep_omega_bar):
        p = cfg.params
        params = p.replace(rabi=w * p.collective_rate1)
        sub = out / f"point_{i:03d}"
        points.append(_replace_cfg(cfg, mode="meanfield", params=params, out_dir=str(sub),
                                   sweep_omega_bar=(), workers=1))
    if cfg.workers > 1 and len(points) > 1:
        with ProcessPoolExecutor(max_workers=min(cfg.workers, len(points))) as pool:
            rows = list(pool.map(_sweep_point, points))
    else:
        rows = [_sweep_point(c) for c in points]
    summary = out / "summary.csv"
    keys = list(rows[0]) if rows else []
    with open(summary, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(["point", "omega_bar"] + keys) + "\n")
        for i, (w, row) in enumerate(zip(cfg.sweep_omega_bar, rows)):
            vals = [_cell(row[k]) for k in keys]
            fh.write(",".join([str(i), "%.17g" % w] + vals) + "\n")
    artifacts = [summary]
    artifacts.append(write_manifest(cfg, out, artifacts, None, started,
                                    {"points": [c.out_dir for c in points]}))
    return RunResult(0, out, artifacts, report={"rows": rows})


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return "%.17g" % float(v)


def _replace_cfg(cfg: RunConfig, **changes) -> RunConfig:
    d = {k: getattr(cfg, k) for k in cfg.__dataclass_fields__}
    d.update(changes)
    return RunConfig(**d)


def analyze(path, floor: float = 0.05) -> dict:
    """Pulse metrics and interference signs of a stored run."""
    traj = load_run(path)
    m = pulse_metrics(traj, floor=floor)
    k = int(np.argmax(traj["I2"]))
    dd = DressedDecomposition(traj["d_mm"][k], traj["d_pp"][k],
                              complex(traj["re_cross"][k], traj["im_cross"][k]))
    report = m.as_row()
    report["interference_ch1_at_i2_peak"] = interference_fraction(dd, 1)
    report["interference_ch2_at_i2_peak"] = interference_fraction(dd, 2)
    return report


def _run_analyze(cfg: RunConfig) -> RunResult:
    out = _prepare_dir(cfg.out_dir)
    report = analyze(cfg.analyze_input)
    path = out / "metrics.json"
    path.write_text(json.dumps(_jsonable(report), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return RunResult(0, out, [path], report=report)


@dataclass
class CompareReport:
    columns: Dict[str, Dict[str, float]]
    tolerance: float
    overlap: tuple
    n_samples: int

    @property
    def passed(self) -> bool:
        return all(v["max"] <= self.tolerance for v in self.columns.values())

    def as_dict(self):
        return {"columns": self.columns, "tolerance": self.tolerance, "overlap": list(self.overlap),
                "n_samples": self.n_samples, "passed": self.passed}


def compare(run_a, run_b, columns: Sequence[str] = (), tolerance: float = 1e-8,
            time_column: str = "t_scaled_fast") -> CompareReport:
    """Per-column max and rms deviation of ``run_b`` resampled onto ``run_a``.

    Runs may be trajectories, CSV paths or run directories. Only samples of
    ``run_a`` inside the time range of ``run_b`` are compared; disjoint
    ranges are an error.
    """
    a = run_a if isinstance(run_a, Trajectory) else load_run(run_a)
    b = run_b if isinstance(run_b, Trajectory) else load_run(run_b)
    cols = list(columns) or [c for c in COLUMNS if c not in ("t_scaled_slow", "t_scaled_fast")]
    for c in cols + [time_column]:
        for name, t in (("run_a", a), ("run_b", b)):
            if c not in t.columns:
                raise ConfigError(f"{name} has no column {c!r}")
    ta, tb = np.asarray(a[time_column], float), np.asarray(b[time_column], float)
    lo, hi = max(ta.min(), tb.min()), min(ta.max(), tb.max())
    if not hi >= lo or (hi == lo and ta.size > 1 and tb.size > 1):
        raise ConfigError(f"time grids do not overlap on {time_column}")
    sel = (ta >= lo) & (ta <= hi)
    out = {}
    for c in cols:
        d = np.asarray(a[c], float)[sel] - np.interp(ta[sel], tb, np.asarray(b[c], float))
        out[c] = {"max": float(np.max(np.abs(d))), "rms": float(np.sqrt(np.mean(d * d)))}
    return CompareReport(out, tolerance, (float(lo), float(hi)), int(sel.sum()))


def _run_compare(cfg: RunConfig) -> RunResult:
    out = _prepare_dir(cfg.out_dir)
    rep = compare(cfg.compare_a, cfg.compare_b, cfg.compare_columns, cfg.compare_tolerance,
                  cfg.compare_time_column)
    path = out / "compare.json"
    path.write_text(json.dumps(_jsonable(rep.as_dict()), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    res = RunResult(0 if rep.passed else ComparisonFailure.exit_code, out, [path], report=rep.as_dict())
    return res


def run(cfg: RunConfig) -> RunResult:
    """Execute ``cfg`` and write its artifacts. Engine errors propagate."""
    if cfg.mode == "sweep":
        return _run_sweep(cfg)
    if cfg.mode == "analyze":
        return _run_analyze(cfg)
    if cfg.mode == "compare":
        return _run_compare(cfg)
    return _run_single(cfg)
