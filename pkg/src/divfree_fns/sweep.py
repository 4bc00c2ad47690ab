"""Convergence sweeps over the neuron count, with CSV and JSON reporting."""
from __future__ import annotations

import csv
import dataclasses
import json
import logging
import math
import platform
import time
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np
import numba
import scipy

from . import __version__
from .assembly import solve_system
from .config import ExperimentConfig
from .errors import (AssemblyError, DegenerateConfigurationError, DivisionGuardError,
                     InvalidArgumentError, ResourceBudgetError, SolverError)
from .features import DivFreeBasis, field_values
from .io import read_reference_field, write_coefficients, write_nodes, write_params
from .metrics import (FittedField, boundary_residual, divergence_audit, empirical_rate,
                      error_norms, theoretical_rate)
from .problems import build_problem
from .quadrature import build_boundary_rule, build_volume_rule
from .sphere import (ParamSet, active_fraction, active_mask, filter_active_neurons,
                     refine_quasi_uniform, sample_gaussian_sphere)

log = logging.getLogger(__name__)

CSV_COLUMNS = ("d", "k", "n", "P", "rel_l2", "rate_l2", "rel_h1", "rate_h1", "bdy_residual",
               "cond", "solver", "seed", "n_requested", "n_active", "abs_l2", "abs_h1",
               "inner_rel_l2", "inner_rel_h1", "div_audit", "status")
ROW_FAILURES = (SolverError, AssemblyError, ResourceBudgetError, DegenerateConfigurationError,
                DivisionGuardError, np.linalg.LinAlgError, MemoryError)


@lru_cache(maxsize=128)
def refined_params(n_requested: int, d: int, seed: int, refine_iters: int) -> ParamSet:
    """Gaussian sample refined by Riesz-energy descent; cached per process."""
    ps = sample_gaussian_sphere(n_requested, d, seed)
    return refine_quasi_uniform(ps, max_iters=refine_iters)


@lru_cache(maxsize=None)
def _fraction(d: int) -> float:
    return active_fraction(d)


def generate_params(n: int, d: int, seed: int, refine_iters: int = 500,
                    n_mode: str = "active") -> tuple[ParamSet, int]:
    """Active neurons for a schedule entry, plus the number requested.

    In ``requested`` mode ``n`` points are drawn and the inactive ones dropped.
    In ``active`` mode enough points are drawn that exactly ``n`` survive the
    filter; the first ``n`` survivors are kept.
    """
    if n_mode == "requested":
        return filter_active_neurons(refined_params(n, d, seed, refine_iters)), n
    if n_mode != "active":
        raise InvalidArgumentError(f"unknown n_mode {n_mode!r}")
    n_req = math.ceil(n / _fraction(d) * 1.02) + 2
    for _ in range(20):
        ps = refined_params(n_req, d, seed, refine_iters)
        keep = np.flatnonzero(active_mask(ps))
        if keep.size >= n:
            return ParamSet(d, ps.points[keep[:n]], seed), n_req
        n_req = math.ceil(n_req * 1.05) + 1
    raise DegenerateConfigurationError(f"could not obtain {n} active neurons in d={d}")


@dataclass
class RowResult:
    d: int
    k: int
    n: int
    seed: int
    solver: str
    n_requested: int | None = None
    P: int | None = None
    rel_l2: float | None = None
    rate_l2: float | None = None
    rel_h1: float | None = None
    rate_h1: float | None = None
    bdy_residual: float | None = None
    cond: float | None = None
    abs_l2: float | None = None
    abs_h1: float | None = None
    inner_rel_l2: float | None = None
    inner_rel_h1: float | None = None
    div_audit: float | None = None
    status: str = "ok"
    seconds: float = 0.0
    basis: DivFreeBasis | None = field(default=None, repr=False)
    coeffs: np.ndarray | None = field(default=None, repr=False)

    @property
    def n_active(self) -> int | None:
        return self.basis.n if self.basis is not None else None

    @property
    def ok(self) -> bool:
        return self.status in ("ok", "reference")

    def csv_row(self) -> dict:
        out = {}
        for col in CSV_COLUMNS:
            v = getattr(self, col)
            if v is None:
                out[col] = ""
            elif isinstance(v, float):
                out[col] = "%.17g" % v
            else:
                out[col] = str(v)
        return out


@dataclass
class ExperimentReport:
    config: ExperimentConfig
    rows: list[RowResult]
    csv_path: Path | None = None
    manifest_path: Path | None = None

    @property
    def n_failed(self) -> int:
        return sum(not r.ok for r in self.rows)

    def column(self, name: str, seed: int | None = None) -> list:
        return [getattr(r, name) for r in self.rows if seed is None or r.seed == seed]

    def series(self, err: str = "rel_l2", seed: int | None = None) -> tuple[list, list]:
        """(n, error) over successful rows that carry the error column."""
        pts = [(r.n, getattr(r, err)) for r in self.rows
               if (seed is None or r.seed == seed) and getattr(r, err) is not None]
        return [p[0] for p in pts], [p[1] for p in pts]


def _fill_rates(rows: list[RowResult]) -> None:
    for name in ("l2", "h1"):
        prev = None
        for r in rows:
            err = getattr(r, f"rel_{name}")
            if err is None or err <= 0:
                prev = None
                continue
            if prev is not None and r.n > prev.n:
                setattr(r, f"rate_{name}",
                        empirical_rate([prev.n, r.n], [getattr(prev, f"rel_{name}"), err])[0])
            prev = r


def _rules(cfg: ExperimentConfig):
    nx, order = cfg.resolved_nx, cfg.resolved_order
    vol = build_volume_rule(cfg.d, nx, order, cfg.memory_budget, lazy=True)
    bdy = build_boundary_rule(cfg.d, nx, order, cfg.memory_budget, lazy=True)
    return vol, bdy


def _solve_row(cfg: ExperimentConfig, problem, vol, bdy, n: int, seed: int) -> RowResult:
    solver = cfg.resolved_solver
    row = RowResult(d=cfg.d, k=cfg.k, n=n, seed=seed, solver=solver)
    t0 = time.perf_counter()
    try:
        ps, row.n_requested = generate_params(n, cfg.d, seed, cfg.refine_iters, cfg.n_mode)
        basis = DivFreeBasis(ps, cfg.k)
        row.n, row.P, row.basis = basis.n, basis.P, basis
        rules = [vol if blk.rule_kind == "volume" else bdy for blk in problem.blocks]
        rep = solve_system(basis, problem.blocks, rules, solver, cfg.rcond, cfg.chunk,
                           cfg.memory_budget)
        row.coeffs = rep.coefficients
        row.cond = rep.cond_tall if rep.cond_tall is not None else rep.cond_normal
        pts = np.random.default_rng([seed, n]).uniform(-1.0, 1.0, (cfg.audit_points, cfg.d))
        row.div_audit = divergence_audit(rep.coefficients, basis, pts)
        if problem.target is not None:
            boundary = None if problem.kind == "l2-projection" else problem.boundary
            rec = error_norms(rep.coefficients, basis, problem.target, vol, bdy, cfg.trim,
                              boundary=boundary, chunk=cfg.chunk)
            _store_errors(row, rec)
        else:
            row.bdy_residual = boundary_residual(rep.coefficients, basis, bdy,
                                                 problem.boundary, cfg.chunk)
    except ROW_FAILURES as exc:
        row.status = f"failed: {type(exc).__name__}: {exc}".replace("\n", " ")
        log.warning("n=%d seed=%d failed: %s", n, seed, exc)
    row.seconds = time.perf_counter() - t0
    return row


def _store_errors(row: RowResult, rec) -> None:
    row.rel_l2, row.abs_l2 = rec.rel_l2, rec.abs_l2
    row.rel_h1, row.abs_h1 = rec.rel_h1, rec.abs_h1
    row.bdy_residual = rec.boundary_residual
    row.inner_rel_l2, row.inner_rel_h1 = rec.inner_rel_l2, rec.inner_rel_h1


def _cavity_errors(cfg: ExperimentConfig, rows: list[RowResult], vol) -> None:
    """Errors against an imported reference, or else the finest successful row."""
    good = [r for r in rows if r.ok and r.coeffs is not None]
    if cfg.reference is not None:
        ref = read_reference_field(cfg.reference)
        targets = good
    else:
        if len(good) < 2:
            return
        finest = max(good, key=lambda r: r.n)
        finest.status = "reference"
        ref = FittedField(finest.basis, finest.coeffs)
        targets = [r for r in good if r is not finest]
    for r in targets:
        try:
            rec = error_norms(r.coeffs, r.basis, ref, vol, None, cfg.trim, chunk=cfg.chunk)
        except ROW_FAILURES as exc:
            r.status = f"failed: {type(exc).__name__}: {exc}"
            continue
        bres = r.bdy_residual
        _store_errors(r, rec)
        r.bdy_residual = bres


def run_sweep(cfg: ExperimentConfig, write: bool = True) -> ExperimentReport:
    """Solve the configured driver for every (seed, n) and report errors and rates.

    A failure at one n marks that row failed and the sweep continues.
    """
    problem = build_problem(cfg.driver, cfg.d, cfg.omega, cfg.nu, cfg.resolved_eps,
                            cfg.profile)
    vol, bdy = _rules(cfg)
    rows: list[RowResult] = []
    for seed in cfg.seeds:
        group = []
        for n in cfg.ns:
            row = _solve_row(cfg, problem, vol, bdy, n, seed)
            log.info("%s d=%d k=%d n=%d seed=%d rel_l2=%s (%.1fs) %s", cfg.driver, cfg.d,
                     cfg.k, row.n, seed, row.rel_l2, row.seconds, row.status)
            group.append(row)
        if problem.kind == "lid-cavity":
            _cavity_errors(cfg, group, vol)
        _fill_rates(group)
        rows.extend(group)
    report = ExperimentReport(cfg, rows)
    if write:
        write_report(report)
    if cfg.save_coeffs:
        for r in rows:
            if r.coeffs is None:
                continue
            stem = Path(cfg.save_coeffs) / f"{cfg.driver}_d{cfg.d}_k{cfg.k}_n{r.n}_s{r.seed}"
            write_params(r.basis.params, f"{stem}_params.txt")
            write_coefficients(r.basis, r.coeffs, f"{stem}_coeffs.txt")
    return report


def write_report(report: ExperimentReport) -> None:
    cfg = report.config
    csv_path = Path(cfg.out)
    csv_path.parent.mkdir(parents=True, exist_ok=True)
    with open(csv_path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for r in report.rows:
            writer.writerow(r.csv_row())
    manifest = {
        "config": dataclasses.asdict(cfg),
        "resolved": {"nx": cfg.resolved_nx, "order": cfg.resolved_order, "solver": cfg.resolved_solver,
                     "eps": cfg.resolved_eps},
        "theoretical_rate": {"l2": theoretical_rate(cfg.k, cfg.d, 0),
                             "h1": theoretical_rate(cfg.k, cfg.d, 1)},
        "rows": [{"n": r.n, "seed": r.seed, "seconds": round(r.seconds, 3),
                  "status": r.status} for r in report.rows],
        "failed_rows": report.n_failed,
        "versions": {"package": __version__, "python": platform.python_version(),
                     "numpy": np.__version__, "scipy": scipy.__version__,
                     "numba": numba.__version__},
        "csv": str(csv_path),
    }
    manifest_path = csv_path.with_suffix(".json")
    manifest_path.write_text(json.dumps(manifest, indent=2) + "\n")
    report.csv_path, report.manifest_path = csv_path, manifest_path


def uniform_grid(d: int, resolution: int) -> np.ndarray:
    if resolution < 1:
        raise InvalidArgumentError(f"grid resolution must be >= 1, got {resolution}")
    axis = np.linspace(-1.0, 1.0, resolution)
    mesh = np.meshgrid(*([axis] * d), indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def field_dump(coeffs, basis: DivFreeBasis, resolution: int, target=None,
               path=None) -> np.ndarray:
    """Grid rows ``x.. u.. [target.. err]`` with err = |u_n - u_target|_2."""
    x = uniform_grid(basis.d, resolution)
    u = field_values(basis, coeffs, x)
    cols = [x, u]
    names = [f"x{i + 1}" for i in range(basis.d)] + [f"u{i + 1}" for i in range(basis.d)]
    if target is not None:
        t = target.evaluate(x)
        cols += [t, np.linalg.norm(u - t, axis=1)[:, None]]
        names += [f"t{i + 1}" for i in range(basis.d)] + ["err"]
    table = np.hstack(cols)
    if path is not None:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        np.savetxt(path, table, fmt="%.17g", header=" ".join(names))
    return table


def export_quadrature_nodes(cfg: ExperimentConfig, prefix) -> tuple[Path, Path]:
    """Write ``<prefix>_volume.txt`` and ``<prefix>_boundary.txt``."""
    vol, bdy = _rules(cfg)
    prefix = Path(prefix)
    paths = (Path(f"{prefix}_volume.txt"), Path(f"{prefix}_boundary.txt"))
    write_nodes(vol, paths[0], cfg.chunk)
    write_nodes(bdy, paths[1], cfg.chunk)
    return paths
