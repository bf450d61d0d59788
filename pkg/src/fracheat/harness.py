"""Convergence sweeps against the spectral oracle and least-squares rate fits."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from typing import Sequence, TextIO

import numpy as np

from fracheat.caputo import TimeGrid, diagonal_run, riemann_liouville_integral, stability_functional
from fracheat.config import ExperimentConfig
from fracheat.fem import (
    GradedTensorMesh,
    assemble_stiffness,
    harmonic_energy_error,
    project_harmonic,
    trace_hs_error,
    trace_l2_error,
)
from fracheat.solver import DiscreteProblem, run
from fracheat.spectral import (
    FractionalParams,
    SpectralData,
    effective_rate,
    mode_solution,
    mode_solution_u,
    oracle_evaluate,
)

logger = logging.getLogger(__name__)


class DegenerateDataError(ValueError):
    """Rate fit requested on data with nonpositive errors or too few points."""


def fit_rate(
    knobs: Sequence[float], errors: Sequence[float], transform: str = "loglog", last: int = 3
) -> float:
    """Least-squares slope over the last ``min(last, len)`` points.

    ``loglog`` fits ``log e`` against ``log knob``; ``loglinear`` fits
    ``log e`` against ``knob``.
    """
    x = np.asarray(knobs, dtype=np.float64)
    e = np.asarray(errors, dtype=np.float64)
    if x.size != e.size:
        raise ValueError("knobs and errors differ in length")
    if x.size < 2:
        raise DegenerateDataError("need at least two points to fit a rate")
    x, e = x[-last:], e[-last:]
    if np.any(~np.isfinite(e)) or np.any(e <= 0.0):
        raise DegenerateDataError("errors must be positive and finite")
    if transform == "loglog":
        if np.any(x <= 0.0):
            raise DegenerateDataError("log-log fit needs positive knobs")
        x = np.log(x)
    elif transform != "loglinear":
        raise ValueError(f"unknown transform {transform!r}")
    slope, _ = np.polyfit(x, np.log(e), 1)
    return float(slope)


@dataclass
class RateReport:
    """Error table of a sweep with fitted and reference slopes."""

    kind: str
    columns: list[str]
    knob_columns: int
    """Leading columns describing the discretization; the rest are errors."""
    rows: list[list[float]] = field(default_factory=list)
    slopes: dict[str, float] = field(default_factory=dict)
    references: dict[str, float] = field(default_factory=dict)
    violations: list[str] = field(default_factory=list)

    @property
    def error_columns(self) -> list[str]:
        return self.columns[self.knob_columns :]

    def column(self, name: str) -> np.ndarray:
        j = self.columns.index(name)
        return np.array([r[j] for r in self.rows])

    def fit(self, knob: str, transform: str = "loglog") -> None:
        x = self.column(knob)
        for name in self.error_columns:
            try:
                self.slopes[name] = fit_rate(x, self.column(name), transform)
            except DegenerateDataError:
                self.slopes[name] = math.nan

    def write_csv(self, out: TextIO) -> None:
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(self.columns)
        for row in self.rows:
            writer.writerow([_fmt(v) for v in row])
        if self.slopes:
            pad = [""] * (self.knob_columns - 1)
            writer.writerow(["slope", *pad, *(_fmt(self.slopes.get(c, math.nan)) for c in self.error_columns)])
            writer.writerow(
                ["reference", *pad, *(_fmt(self.references[c]) if c in self.references else "" for c in self.error_columns)]
            )


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(value)
    return f"{float(value):.12g}"


# {{{ oracle helpers


class OracleCache:
    """Exact time coefficients keyed by time, reused across sweep points."""

    def __init__(self, data: SpectralData, Y: float | None):
        self.data = data
        self.Y = Y
        self.solutions = [mode_solution(data, m.k, Y) for m in data.modes]
        self.rates = np.array([sol.effective_rate for sol in self.solutions])
        self._cache: dict[float, np.ndarray] = {}

    def __call__(self, t: float) -> np.ndarray:
        key = round(float(t), 14)
        hit = self._cache.get(key)
        if hit is None:
            hit = np.array([mode_solution_u(sol, float(t)) for sol in self.solutions])
            self._cache[key] = hit
        return hit

    def on_grid(self, grid: TimeGrid) -> np.ndarray:
        return np.array([self(t) for t in grid.nodes])


def fractional_norm(gamma: float, grid: TimeGrid, errors: np.ndarray) -> float:
    """``[I^{1-gamma} e^2 (T)]^{1/2}``; for ``gamma = 1`` the maximum over the grid."""
    errors = np.asarray(errors, dtype=np.float64)
    if gamma == 1.0:
        return float(np.max(np.abs(errors)))
    return math.sqrt(max(riemann_liouville_integral(1.0 - gamma, grid, errors**2, grid.K), 0.0))


def l2_in_time(grid: TimeGrid, errors: np.ndarray) -> float:
    """``(sum_{k>=1} tau e_k^2)^{1/2}``."""
    errors = np.asarray(errors, dtype=np.float64)
    return math.sqrt(grid.tau * float(np.sum(errors[1:] ** 2)))


def _fem_errors(cfg: ExperimentConfig, M: int, K: int, oracle: OracleCache):
    data = cfg.data
    pb = DiscreteProblem.build(data, M, K, cfg.T, cfg.Y, mu=cfg.mu)
    traj = run(pb)
    exact = oracle.on_grid(pb.grid)
    trace_err = np.array(
        [trace_l2_error(pb.mesh, V, data, u) for V, u in zip(traj.states, exact)]
    )
    energy_err = np.array(
        [
            harmonic_energy_error(pb.mesh, data, u, oracle.rates, V, pb.stiffness)
            for V, u in zip(traj.states, exact)
        ]
    )
    hs_final = trace_hs_error(pb.mesh, traj.states[-1], data, exact[-1], data.params.s)
    violations = []
    if not traj.stability.holds(1e-10):
        violations.append(f"stability functional violated at M={M}, K={K}")
    return pb, trace_err, energy_err, hs_final, violations


# }}}


# {{{ sweeps


def run_time_sweep(cfg: ExperimentConfig) -> RateReport:
    """Errors against the (truncated) oracle as ``K`` grows; slopes are fitted against ``tau``."""
    data = cfg.data
    gamma = cfg.params.gamma
    oracle = OracleCache(data, cfg.Y)
    report = RateReport("time", ["K", "tau", "err_IL2", "err_energy"], knob_columns=2)
    for K in (int(v) for v in cfg.sweep_values):
        grid = TimeGrid(cfg.T, K)
        if cfg.stepper == "diagonal":
            U = diagonal_run(gamma, grid, oracle.rates, data.initial_coefficients(), data.forcing_coefficients)
            diff = oracle.on_grid(grid) - U
            trace_err = np.sqrt(np.sum(diff**2, axis=1))
            energy_err = np.sqrt(np.sum(oracle.rates * diff**2, axis=1))
            stab = stability_functional(
                gamma, grid, np.sqrt(np.sum(U**2, axis=1)), np.sqrt(np.sum(oracle.rates * U**2, axis=1)),
                np.sqrt(np.sum(np.array([data.forcing_coefficients(t) for t in grid.nodes]) ** 2 / oracle.rates, axis=1)),
            )
            if not stab.holds(1e-10):
                report.violations.append(f"stability functional violated at K={K}")
        else:
            _, trace_err, energy_err, _, violations = _fem_errors(cfg, cfg.M, K, oracle)
            report.violations.extend(violations)
        report.rows.append([K, grid.tau, fractional_norm(gamma, grid, trace_err), l2_in_time(grid, energy_err)])
        logger.info("time sweep K=%d: %s", K, report.rows[-1][2:])
    report.fit("tau")
    report.references["err_IL2"] = 1.0 if gamma == 1.0 else 0.5
    return report


def run_space_sweep(cfg: ExperimentConfig) -> RateReport:
    """Fully discrete errors against the truncated oracle (same ``Y``) as ``M`` grows."""
    if cfg.Y is None:
        raise ValueError("space sweeps need a finite Y")
    data = cfg.data
    oracle = OracleCache(data, cfg.Y)
    s = cfg.params.s
    report = RateReport(
        "space", ["M", "N", "err_energy", "err_IL2", "err_trace_l2", "err_trace_hs"], knob_columns=2
    )
    for M in (int(v) for v in cfg.sweep_values):
        pb, trace_err, energy_err, hs_final, violations = _fem_errors(cfg, M, cfg.K, oracle)
        report.violations.extend(violations)
        report.rows.append(
            [
                M,
                pb.mesh.n_free,
                l2_in_time(pb.grid, energy_err),
                fractional_norm(cfg.params.gamma, pb.grid, trace_err),
                float(trace_err[-1]),
                hs_final,
            ]
        )
        logger.info("space sweep M=%d: %s", M, report.rows[-1][2:])
    report.fit("N")
    report.references.update(err_energy=-0.5, err_trace_l2=-(1.0 + s) / 2.0, err_trace_hs=-0.5)
    return report


def run_projector_sweep(cfg: ExperimentConfig) -> RateReport:
    """Elliptic projection of the initial datum's exact extension as ``M`` grows."""
    if cfg.Y is None:
        raise ValueError("projector sweeps need a finite Y")
    data = cfg.data
    params = cfg.params
    rates = np.array([effective_rate(params, m.lambda_k, cfg.Y) for m in data.modes])
    coeffs = data.initial_coefficients()
    report = RateReport("projector", ["M", "N", "err_energy", "err_trace_l2", "err_trace_hs"], knob_columns=2)
    for M in (int(v) for v in cfg.sweep_values):
        mesh = GradedTensorMesh.for_params(M, cfg.Y, params, mu=cfg.mu)
        A = assemble_stiffness(mesh, params)
        V = project_harmonic(mesh, data, coeffs, rates, A)
        report.rows.append(
            [
                M,
                mesh.n_free,
                harmonic_energy_error(mesh, data, coeffs, rates, V, A),
                trace_l2_error(mesh, V, data, coeffs),
                trace_hs_error(mesh, V, data, coeffs, params.s),
            ]
        )
    report.fit("N")
    report.references.update(
        err_energy=-0.5, err_trace_l2=-(1.0 + params.s) / 2.0, err_trace_hs=-0.5
    )
    return report


def run_truncation_sweep(cfg: ExperimentConfig) -> RateReport:
    """Truncated against untruncated oracle traces as ``Y`` grows.

    The fitted slope is log-linear, so the decay constant is ``-slope``; the
    reference is ``sqrt(lambda_1) / 2``.
    """
    data = cfg.data
    grid = TimeGrid(cfg.T, cfg.K)
    full = OracleCache(data, None).on_grid(grid)
    gamma = cfg.params.gamma
    report = RateReport("truncation", ["Y", "err_max", "err_IL2", "err_final"], knob_columns=1)
    for Y in cfg.sweep_values:
        diff = OracleCache(data, Y).on_grid(grid) - full
        err = np.sqrt(np.sum(diff**2, axis=1))
        report.rows.append([Y, float(np.max(err)), fractional_norm(gamma, grid, err), float(err[-1])])
    report.fit("Y", transform="loglinear")
    lam1 = float(data.lambdas.min())
    reference = -math.sqrt(lam1) / 2.0
    for name in report.error_columns:
        report.references[name] = reference
    return report


def run_stability_suite(cfg: ExperimentConfig) -> RateReport:
    """Randomized unforced runs; each row records both sides of the stability functional.

    Orders, step counts and meshes are drawn from the sets
    ``gamma in {0.3, 0.5, 0.7, 1}``, ``s in {0.3, 0.5, 0.7}``,
    ``K in {8, 64}``, ``M in {8, 16}``; initial data uses modes 1 to 3 with
    standard normal coefficients.
    """
    rng = np.random.default_rng(cfg.seed)
    report = RateReport(
        "stability", ["case", "gamma", "s", "K", "M", "lhs", "rhs", "ok"], knob_columns=5
    )
    Y = cfg.Y if cfg.Y is not None else 1.5
    for case in range(cfg.samples):
        gamma = float(rng.choice([0.3, 0.5, 0.7, 1.0]))
        s = float(rng.choice([0.3, 0.5, 0.7]))
        K = int(rng.choice([8, 64]))
        M = int(rng.choice([8, 16]))
        u0 = rng.standard_normal(3)
        params = FractionalParams(s, gamma, cfg.params.c_coeff, cfg.params.domain_length)
        data = SpectralData.from_modes(params, [(k + 1, float(u0[k])) for k in range(3)])
        pb = DiscreteProblem.build(data, M, K, cfg.T, Y, mu=cfg.mu)
        traj = run(pb, keep_states=False)
        ok = traj.stability.holds(1e-10)
        lhs, rhs = traj.stability.final
        report.rows.append([case, gamma, s, K, M, lhs, rhs, ok])
        if not ok:
            report.violations.append(
                f"case {case}: gamma={gamma} s={s} K={K} M={M}: lhs={lhs:.12g} > rhs={rhs:.12g}"
            )
    return report


SWEEPS = {
    "time": run_time_sweep,
    "space": run_space_sweep,
    "projector": run_projector_sweep,
    "truncation": run_truncation_sweep,
    "stability": run_stability_suite,
}


def run_sweep(cfg: ExperimentConfig) -> RateReport:
    if cfg.sweep_kind not in SWEEPS:
        raise ValueError(f"config has no runnable sweep: kind={cfg.sweep_kind!r}")
    return SWEEPS[cfg.sweep_kind](cfg)


def check_report(cfg: ExperimentConfig, report: RateReport) -> list[str]:
    """Invariant violations plus slope-band failures for the configured column."""
    problems = list(report.violations)
    bands = cfg.check
    if bands.column is not None:
        slope = report.slopes.get(bands.column, math.nan)
        if not bands.contains(slope):
            problems.append(
                f"{cfg.name}: slope of {bands.column} = {slope:.4g} outside [{bands.slope_min:g}, {bands.slope_max:g}]"
            )
    return problems


# }}}


def oracle_table(cfg: ExperimentConfig, out: TextIO) -> None:
    """Exact extended solution on a tensor grid of ``(x, y)`` at the configured times."""
    data = cfg.data
    nx, ny = cfg.oracle_points
    length = cfg.params.domain_length
    xs = np.linspace(0.0, length, nx + 2)[1:-1]
    ymax = cfg.Y if cfg.Y is not None else 1.0
    ys = np.linspace(0.0, ymax, ny + 1)[:-1] if ny > 1 else np.array([0.0])
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["t", "x", "y", "v", "v_x", "v_y"])
    for t in cfg.oracle_times:
        for x in xs:
            for y in ys:
                v, (vx, vy) = oracle_evaluate(data, float(x), float(y), float(t), cfg.Y)
                writer.writerow([_fmt(t), _fmt(x), _fmt(y), _fmt(v), _fmt(vx), _fmt(vy)])
