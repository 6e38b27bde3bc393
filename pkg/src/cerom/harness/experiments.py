"""DNS -> POD -> CE / closure / ROM pipelines over parameter grids."""

from __future__ import annotations

import csv
import io
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple


from .. import __version__
from ..closure import assemble_model, correction_targets, fit_ansatz, grom_operators
from ..exceptions import ConfigError, NumericalError, RomInstabilityError
from ..fe1d import BurgersConvection, build_mesh, dns_solve, initial_condition
from ..filters import FilterSpec, avg_ce_norm, ce_trajectory
from ..pod import POD, ReducedTrajectory, compute_pod, reduce_trajectory
from ..rom_sim import integrate, rom_error
from ..snapshots import SnapshotSet, load_snapshots
from .config import ExperimentConfig

UNSTABLE = "unstable"


def fmt_float(value: float) -> str:
    # shortest string that round-trips to the same double
    return repr(float(value))


def fmt_delta(spec: FilterSpec) -> str:
    return "" if spec.kind == "projection" else fmt_float(spec.delta)


@dataclass
class TableReport:
    """Rows ``(r, delta, metric, value)`` plus provenance of the run.

    ``value`` is ``None`` for a cell whose ROM blew up; it is written as
    ``unstable``.
    """

    table: str
    rows: List[Tuple[int, str, str, Optional[float]]]
    config: ExperimentConfig
    extra: Dict = field(default_factory=dict)

    @property
    def config_hash(self) -> str:
        return self.config.config_hash()

    def value(self, r: int, metric: str, delta: Optional[str] = None) -> Optional[float]:
        for row in self.rows:
            if row[0] == r and row[2] == metric and (delta is None or row[1] == delta):
                return row[3]
        raise KeyError((r, metric, delta))

    def csv_text(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["r", "delta", "metric", "value"])
        for r, delta, metric, value in self.rows:
            writer.writerow([r, delta, metric, UNSTABLE if value is None else fmt_float(value)])
        return buf.getvalue()

    def manifest(self) -> dict:
        return {
            "table": self.table,
            "code_version": __version__,
            "config_hash": self.config_hash,
            "config": self.config.raw,
            "n_rows": len(self.rows),
            "unstable_cells": [
                {"r": r, "delta": d, "metric": m} for r, d, m, v in self.rows if v is None
            ],
            **self.extra,
        }

    def write(self, out_dir) -> Tuple[Path, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        csv_path = out / f"{self.table}.csv"
        man_path = out / f"{self.table}.json"
        csv_path.write_text(self.csv_text())
        man_path.write_text(json.dumps(self.manifest(), indent=2, sort_keys=True) + "\n")
        return csv_path, man_path


@dataclass
class Pipeline:
    """Shared state for every grid point of one experiment."""

    config: ExperimentConfig
    snapshots: SnapshotSet
    basis: POD
    traj: ReducedTrajectory
    convection: Optional[BurgersConvection]

    @property
    def horizon(self) -> float:
        T = self.config.raw["ce"]["horizon"]
        if T is not None:
            return float(T)
        return self.snapshots.dt * (self.snapshots.n_snapshots - 1)


def build_snapshots(config: ExperimentConfig) -> SnapshotSet:
    if config.problem == "external":
        return load_snapshots(config.snapshot_file)
    mesh = build_mesh(config.n_cells)
    kind = "smooth" if config.problem == "burgers_smooth" else "step"
    ic = initial_condition(kind, config.nu, mesh)
    return dns_solve(mesh, config.nu, config.dt, config.t_end, ic)


def build_pipeline(config: ExperimentConfig, snapshots: Optional[SnapshotSet] = None) -> Pipeline:
    snaps = build_snapshots(config) if snapshots is None else snapshots
    basis = compute_pod(snaps, rank_tol=config.pod["rank_tol"], n_modes=config.n_modes)
    bad = [r for r in config.r if r > basis.n_modes_]
    if bad:
        raise ConfigError(f"r values {bad} exceed the POD rank d={basis.n_modes_}")
    conv = None
    if config.convection == "burgers1d":
        conv = BurgersConvection(build_mesh(snaps.n_dof + 1))
    return Pipeline(config, snaps, basis, reduce_trajectory(snaps, basis), conv)


def ce_cell(pipe: Pipeline, r: int, spec: FilterSpec) -> float:
    cfg = pipe.config.raw["ce"]
    blocks = pipe.basis.reduced_blocks(r)
    coeffs = pipe.traj.coeffs if cfg["include_initial"] else pipe.traj.coeffs[1:]
    b, c = ce_trajectory(coeffs, r, spec, blocks, laplacian_filter=cfg["laplacian_filter"])
    return avg_ce_norm(b - c, blocks.M_r, pipe.traj.dt, pipe.horizon)


def rom_cell(pipe: Pipeline, r: int, spec: FilterSpec) -> Dict[str, Optional[float]]:
    """ROM error of every configured variant at one ``(r, filter)`` point."""
    cfg = pipe.config.raw
    ccfg = cfg["closure"]
    if pipe.convection is None:
        raise ConfigError("ROM runs need 'convection: burgers1d'")
    nu = cfg["nu"]
    dt = pipe.traj.dt
    ops = grom_operators(pipe.basis, r, nu, pipe.convection)
    targets = correction_targets(
        pipe.traj, pipe.basis, r, spec, nu, pipe.convection,
        state=ccfg["state"], laplacian_filter=cfg["ce"]["laplacian_filter"],
    )
    skip = ccfg["fit_skip_initial"]
    fit_kw = dict(rcond=ccfg["rcond"], scale_columns=ccfg["scale_columns"])
    a_fit = targets.a_r[skip:]

    def fit(y):
        return fit_ansatz(y[skip:], a_fit, **fit_kw)

    variants = cfg["variants"]
    fitted = {}
    if "ddc" in variants or "ice_ddc" in variants:
        fitted["ddc"] = fit(targets.tau)
    if "ice_ddc" in variants:
        if ccfg["ice_targets"] == "tau":
            fitted["ice_ddc"] = fitted["ddc"]
        else:
            fitted["ice_ddc"] = fit(targets.tau - targets.e_ce)
    if "ce_ddc" in variants:
        fitted["ce_ddc"] = fit(targets.tau + targets.e_ce)

    blocks = pipe.basis.reduced_blocks(r)
    t_end = pipe.traj.t0 + dt * (pipe.traj.n_samples - 1)
    out: Dict[str, Optional[float]] = {}
    for variant in variants:
        if variant == "ice_ddc":
            model = assemble_model(variant, ops, fitted[variant], targets.e_ce, dt, pipe.traj.t0)
        else:
            model = assemble_model(variant, ops, fitted.get(variant))
        try:
            rom = integrate(model, targets.a_r[0], dt, t_end,
                            method=cfg["rom"]["method"], t0=pipe.traj.t0)
        except RomInstabilityError:
            out[variant] = None
            continue
        out[variant] = rom_error(rom, targets.a_r, blocks.M_r, dt, pipe.horizon)
    return out


# worker-process state for the grid pool
_WORKER_PIPE: Optional[Pipeline] = None


def _init_worker(pipe: Pipeline):
    global _WORKER_PIPE
    _WORKER_PIPE = pipe


def _run_cell(task):
    kind, r, kind_f, delta = task
    spec = FilterSpec(kind_f, delta)
    try:
        if kind == "ce":
            return ce_cell(_WORKER_PIPE, r, spec)
        return rom_cell(_WORKER_PIPE, r, spec)
    except NumericalError as exc:
        raise NumericalError(f"grid point r={r}, {spec.label}: {exc}") from exc


def _map_cells(pipe: Pipeline, tasks: Sequence, jobs: int):
    if jobs <= 1 or len(tasks) <= 1:
        _init_worker(pipe)
        return [_run_cell(t) for t in tasks]
    with ProcessPoolExecutor(
        max_workers=min(jobs, len(tasks)), initializer=_init_worker, initargs=(pipe,)
    ) as pool:
        return list(pool.map(_run_cell, tasks))


def _tasks(kind: str, config: ExperimentConfig):
    return [
        (kind, r, spec.kind, spec.delta)
        for r in config.r
        for spec in config.filters
    ]


def _basis_info(pipe: Pipeline) -> dict:
    return {
        "n_modes": pipe.basis.n_modes_,
        "eigenvalues": [fmt_float(v) for v in pipe.basis.eigenvalues_],
        "horizon": fmt_float(pipe.horizon),
    }


def run_ce_table(config: ExperimentConfig, *, jobs: int = 1, pipeline: Optional[Pipeline] = None) -> TableReport:
    """Average commutation error for every ``(r, filter)`` grid point."""
    pipe = build_pipeline(config) if pipeline is None else pipeline
    tasks = _tasks("ce", config)
    values = _map_cells(pipe, tasks, jobs)
    rows = []
    for (_, r, kind, delta), value in zip(tasks, values):
        rows.append((r, fmt_delta(FilterSpec(kind, delta)), "avg_ce_norm", value))
    return TableReport("ce_table", rows, config, extra=_basis_info(pipe))


def run_rom_table(config: ExperimentConfig, *, jobs: int = 1, pipeline: Optional[Pipeline] = None) -> TableReport:
    """ROM error per variant for every grid point.

    With ``rom.delta_mode = best`` each ``(r, variant)`` reports the smallest
    error over the configured filters and records the winning radius in the
    ``delta`` column.
    """
    pipe = build_pipeline(config) if pipeline is None else pipeline
    tasks = _tasks("rom", config)
    cells = _map_cells(pipe, tasks, jobs)
    variants = config.variants
    rows = []
    if config.rom["delta_mode"] == "fixed":
        for (_, r, kind, delta), errs in zip(tasks, cells):
            d = fmt_delta(FilterSpec(kind, delta))
            rows.extend((r, d, f"error_{v}", errs[v]) for v in variants)
    else:
        by_r: Dict[int, list] = {}
        for (_, r, kind, delta), errs in zip(tasks, cells):
            by_r.setdefault(r, []).append((FilterSpec(kind, delta), errs))
        for r in config.r:
            for v in variants:
                finite = [(errs[v], spec) for spec, errs in by_r[r] if errs[v] is not None]
                if not finite:
                    rows.append((r, "", f"error_{v}", None))
                    continue
                # first minimum in configured order keeps ties deterministic
                best_err, best_spec = min(finite, key=lambda item: item[0])
                rows.append((r, fmt_delta(best_spec), f"error_{v}", best_err))
    return TableReport("rom_table", rows, config, extra=_basis_info(pipe))


def default_jobs() -> int:
    return max(1, (os.cpu_count() or 1))


def pod_report(pipe: Pipeline) -> dict:
    b = pipe.basis
    lam = b.all_eigenvalues_
    return {
        "code_version": __version__,
        "config_hash": pipe.config.config_hash(),
        "n_dof": int(b.n_features_in_),
        "n_snapshots": int(pipe.snapshots.n_snapshots),
        "n_modes": int(b.n_modes_),
        "eigenvalues": [fmt_float(v) for v in b.eigenvalues_],
        "eigenvalue_ratios": [fmt_float(v / lam[0]) for v in lam[: b.n_modes_ + 3]],
        "orthonormality_defect": fmt_float(b.orthonormality_defect()),
    }
