"""Fully discrete scheme: L1 (or backward Euler) in time, extension FEM in space.

Each step solves ``(c_gamma M_tr + A_Y) V^{n+1} = c_gamma M_tr H^n + L^{n+1}``
where ``H^n`` is the L1 history of the trace and ``L^{n+1}`` the trace load.
The system matrix is the same for every step and is factorized once.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import TextIO

import numpy as np
import scipy.sparse as sp

from fracheat.caputo import L1Weights, StabilityReport, TimeGrid, history_term, l1_weights, stability_functional
from fracheat.fem import (
    GradedTensorMesh,
    SparseOperator,
    assemble_stiffness,
    harmonic_extension_solve,
    sine_hat_integrals,
    trace_embedding,
    trace_mass_1d,
)
from fracheat.spectral import SpectralData

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class DiscreteProblem:
    data: SpectralData
    mesh: GradedTensorMesh
    grid: TimeGrid
    stiffness: SparseOperator
    trace_mass: sp.csr_matrix = field(repr=False)
    """1D mass matrix on the trace nodes."""
    weights: L1Weights | None

    @classmethod
    def build(
        cls,
        data: SpectralData,
        M: int,
        K: int,
        T: float,
        Y: float,
        *,
        mu: float | None = None,
        Mx: int | None = None,
    ) -> DiscreteProblem:
        params = data.params
        mesh = GradedTensorMesh.for_params(M, Y, params, mu=mu, Mx=Mx)
        grid = TimeGrid(T, K)
        weights = None if params.gamma == 1.0 else l1_weights(params.gamma, K, grid.tau)
        return cls(data, mesh, grid, assemble_stiffness(mesh, params), trace_mass_1d(mesh), weights)

    @property
    def params(self):
        return self.data.params

    @property
    def c_gamma(self) -> float:
        """``1 / (Gamma(2-gamma) tau^gamma)``, or ``1 / tau`` for ``gamma = 1``."""
        if self.weights is None:
            return 1.0 / self.grid.tau
        return 1.0 / self.weights.kappa

    def system_matrix(self) -> sp.csc_matrix:
        E = trace_embedding(self.mesh)
        return (self.c_gamma * (E @ self.trace_mass @ E.T) + self.stiffness.matrix).tocsc()

    @property
    def sine_moments(self) -> np.ndarray:
        """``(phi_k, hat_i)`` for data modes and trace nodes."""
        return sine_hat_integrals(self.mesh, self.data.frequencies)

    def trace_load(self, t: float) -> np.ndarray:
        """``(f(t), hat_i)`` on the trace nodes, exact for the sine expansion."""
        return self.data.forcing_coefficients(t) @ self.sine_moments

    def initial_trace(self) -> np.ndarray:
        """Nodal interpolant of ``u_0`` on the trace nodes."""
        return self.data.initial_coefficients() @ self.data.phi(self.mesh.trace_nodes)


@dataclass
class Trajectory:
    states: list[np.ndarray] = field(default_factory=list, repr=False)
    trace_history: list[np.ndarray] = field(default_factory=list, repr=False)
    trace_l2: list[float] = field(default_factory=list)
    energy: list[float] = field(default_factory=list)
    load_dual: list[float] = field(default_factory=list)
    """Discrete dual norm ``(L^T A^{-1} L)^{1/2}`` of the trace load."""
    stability: StabilityReport | None = None

    @property
    def n_steps(self) -> int:
        return len(self.trace_history) - 1

    def trace_array(self) -> np.ndarray:
        return np.asarray(self.trace_history)

    def write_csv(self, out: TextIO, grid: TimeGrid) -> None:
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(["step", "t", "trace_l2", "energy", "stability_lhs", "stability_rhs"])
        lhs = self.stability.lhs if self.stability is not None else [math.nan] * len(self.trace_l2)
        rhs = self.stability.rhs if self.stability is not None else [math.nan] * len(self.trace_l2)
        for n, t in enumerate(grid.nodes[: len(self.trace_l2)]):
            writer.writerow(
                [n] + [_fmt(v) for v in (t, self.trace_l2[n], self.energy[n], lhs[n], rhs[n])]
            )


def _fmt(value: float) -> str:
    return f"{value:.12g}"


class Stepper:
    """Owns the factorized step matrix and advances a :class:`Trajectory`."""

    def __init__(self, problem: DiscreteProblem, *, refactorize: bool = False):
        self.problem = problem
        self.refactorize = refactorize
        self._system = SparseOperator(problem.system_matrix())
        self._embed = trace_embedding(problem.mesh)

    @property
    def system(self) -> SparseOperator:
        return self._system

    def initialize(self, trajectory: Trajectory | None = None, *, keep_states: bool = True) -> Trajectory:
        pb = self.problem
        V0 = harmonic_extension_solve(pb.mesh, pb.params, pb.initial_trace(), pb.stiffness)
        traj = trajectory or Trajectory()
        self._record(traj, V0, np.zeros(pb.mesh.n_trace), keep_states)
        return traj

    def step(self, trajectory: Trajectory, n: int, *, keep_states: bool = True) -> np.ndarray:
        """Compute ``V^{n+1}`` from the trace history ``tr V^0..tr V^n``."""
        pb = self.problem
        if trajectory.n_steps != n:
            raise ValueError(f"trajectory holds {trajectory.n_steps + 1} states, cannot take step {n}")
        hist = np.asarray(trajectory.trace_history)
        if pb.weights is None:
            H = hist[-1]
        else:
            H = history_term(pb.weights, hist)
        load = pb.trace_load(pb.grid.nodes[n + 1])
        rhs = self._embed @ (pb.c_gamma * (pb.trace_mass @ H) + load)
        system = SparseOperator(pb.system_matrix()) if self.refactorize else self._system
        V = system.solve(rhs)
        self._record(trajectory, V, load, keep_states)
        return V

    def _record(self, traj: Trajectory, V: np.ndarray, load: np.ndarray, keep_states: bool) -> None:
        pb = self.problem
        tr = V[: pb.mesh.n_trace].copy()
        traj.trace_history.append(tr)
        if keep_states:
            traj.states.append(V)
        traj.trace_l2.append(math.sqrt(max(float(tr @ (pb.trace_mass @ tr)), 0.0)))
        traj.energy.append(math.sqrt(max(pb.stiffness.quadratic(V), 0.0)))
        if np.any(load):
            full = self._embed @ load
            traj.load_dual.append(math.sqrt(max(float(full @ pb.stiffness.solve(full)), 0.0)))
        else:
            traj.load_dual.append(0.0)


def run(problem: DiscreteProblem, *, keep_states: bool = True, refactorize: bool = False) -> Trajectory:
    """March all ``K`` steps and attach the stability functional."""
    stepper = Stepper(problem, refactorize=refactorize)
    traj = stepper.initialize(keep_states=keep_states)
    for n in range(problem.grid.K):
        stepper.step(traj, n, keep_states=keep_states)
    traj.stability = stability_functional(
        problem.params.gamma, problem.grid, traj.trace_l2, traj.energy, traj.load_dual
    )
    logger.info(
        "run finished: K=%d N=%d stability lhs=%.6g rhs=%.6g",
        problem.grid.K,
        problem.mesh.n_free,
        *traj.stability.final,
    )
    return traj


def write_trajectory(path: str | Path, problem: DiscreteProblem, trajectory: Trajectory) -> None:
    with open(path, "w", newline="") as fh:
        trajectory.write_csv(fh, problem.grid)
