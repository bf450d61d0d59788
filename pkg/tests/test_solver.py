import csv
import io
import math
import warnings

import numpy as np
import pytest

from fracheat.fem import GradingWarning, harmonic_energy_error, trace_l2_error
from fracheat.harness import OracleCache
from fracheat.solver import DiscreteProblem, Stepper, Trajectory, run, write_trajectory
from fracheat.spectral import FractionalParams, SpectralData, TimeProfile

from oracles import dense_step


def build(s=0.4, gamma=0.6, modes=((1, 1.0),), M=4, K=6, T=0.5, Y=1.2, Mx=4, c=0.0):
    p = FractionalParams(s, gamma, c_coeff=c)
    data = SpectralData.from_modes(p, list(modes))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", GradingWarning)
        return DiscreteProblem.build(data, M, K, T, Y, Mx=Mx)


def l1_history(gamma, traces):
    # H = sum_{j=1}^{n} (a_{j-1} - a_j) U^{n+1-j} + a_n U^0
    n = len(traces) - 1
    a = [(j + 1) ** (1 - gamma) - j ** (1 - gamma) for j in range(n + 1)]
    H = a[n] * traces[0]
    for j in range(1, n + 1):
        H = H + (a[j - 1] - a[j]) * traces[n + 1 - j]
    return H


def test_zero_data_gives_zero_trajectory():
    pb = build(modes=((1, 0.0),))
    traj = run(pb)
    assert traj.n_steps == pb.grid.K
    assert all(not np.any(V) for V in traj.states)
    assert traj.stability.final == (0.0, 0.0)


@pytest.mark.parametrize("gamma", [0.3, 1.0])
def test_steps_match_dense_oracle(gamma):
    pb = build(
        gamma=gamma,
        modes=((1, 1.0), (2, -0.3, TimeProfile.power(1.5, 0.5))),
        c=0.7,
        M=4,
        Mx=5,
    )
    assert pb.mesh.n_free <= 20
    A = pb.stiffness.matrix.toarray()
    Mtr = pb.trace_mass.toarray()
    traj = run(pb)
    nt = pb.mesh.n_trace
    for n in range(pb.grid.K):
        traces = [V[:nt] for V in traj.states[: n + 1]]
        H = traces[-1] if gamma == 1.0 else l1_history(gamma, traces)
        t = pb.grid.nodes[n + 1]
        load = pb.data.forcing_coefficients(t) @ pb.sine_moments
        ref = dense_step(A, Mtr, pb.c_gamma, H, load, nt)
        assert np.max(np.abs(traj.states[n + 1] - ref)) <= 1e-12 * max(1.0, np.max(np.abs(ref)))


def test_c_gamma():
    assert build(gamma=1.0, K=5, T=0.5).c_gamma == pytest.approx(10.0)
    pb = build(gamma=0.5, K=4, T=0.4)
    assert pb.c_gamma == pytest.approx(1 / (math.gamma(1.5) * 0.1**0.5), rel=1e-14)


def test_factorization_reuse_is_bitwise():
    pb = build(modes=((1, 1.0), (3, 0.2, TimeProfile.constant(1.0))), K=8)
    once = run(pb)
    again = run(pb, refactorize=True)
    for a, b in zip(once.states, again.states):
        assert np.array_equal(a, b)


def test_system_differs_from_stiffness_only_on_trace_block():
    pb = build()
    diff = (pb.system_matrix() - pb.stiffness.matrix).tocoo()
    nt = pb.mesh.n_trace
    assert diff.nnz > 0
    assert np.all(diff.row[diff.data != 0] < nt) and np.all(diff.col[diff.data != 0] < nt)


def test_initial_trace_is_nodal_interpolant():
    pb = build(modes=((1, 1.0),), Mx=6)
    x = pb.mesh.trace_nodes
    assert np.allclose(pb.initial_trace(), math.sqrt(2) * np.sin(math.pi * x), rtol=1e-15)
    traj = Stepper(pb).initialize()
    assert np.array_equal(traj.trace_history[0], pb.initial_trace())


def test_step_order_is_enforced():
    pb = build()
    stepper = Stepper(pb)
    traj = stepper.initialize()
    with pytest.raises(ValueError):
        stepper.step(traj, 3)


def test_gamma_one_trace_norm_nonincreasing():
    pb = build(gamma=1.0, modes=((1, 1.0), (2, 0.5)), K=20, M=6, Mx=8)
    traj = run(pb)
    norms = np.array(traj.trace_l2)
    assert np.all(np.diff(norms) <= 1e-14)


@pytest.mark.parametrize("gamma", [0.3, 0.7, 1.0])
def test_stability_functional_holds(gamma):
    pb = build(
        gamma=gamma,
        modes=((1, 1.0), (2, -0.5, TimeProfile.exponential_decay(2.0, 1.0))),
        K=16,
        M=6,
        Mx=8,
        c=0.3,
    )
    traj = run(pb)
    assert traj.stability.holds(1e-12)
    assert len(traj.load_dual) == pb.grid.K + 1 and traj.load_dual[0] == 0.0


def test_csv_columns():
    pb = build(K=3)
    traj = run(pb, keep_states=False)
    assert traj.states == []
    out = io.StringIO()
    traj.write_csv(out, pb.grid)
    rows = list(csv.reader(io.StringIO(out.getvalue())))
    assert rows[0] == ["step", "t", "trace_l2", "energy", "stability_lhs", "stability_rhs"]
    assert len(rows) == 5
    assert [r[0] for r in rows[1:]] == ["0", "1", "2", "3"]
    assert float(rows[-1][1]) == pytest.approx(0.5)
    empty = Trajectory()
    out = io.StringIO()
    empty.write_csv(out, pb.grid)
    assert out.getvalue().count("\n") == 1


def test_write_trajectory(tmp_path):
    pb = build(K=2)
    traj = run(pb)
    path = tmp_path / "traj.csv"
    write_trajectory(path, pb, traj)
    assert path.read_text().splitlines()[0].startswith("step,t,")


def test_errors_decrease_under_refinement():
    errs = []
    for M, K in ((6, 8), (12, 32), (24, 128)):
        pb = build(s=0.5, gamma=0.8, M=M, K=K, T=0.5, Y=1.5, Mx=None)
        oracle = OracleCache(pb.data, 1.5)
        traj = run(pb)
        u = oracle(pb.grid.T)
        errs.append(
            (
                trace_l2_error(pb.mesh, traj.states[-1], pb.data, u),
                harmonic_energy_error(pb.mesh, pb.data, u, oracle.rates, traj.states[-1], pb.stiffness),
            )
        )
    errs = np.array(errs)
    assert np.all(np.diff(errs, axis=0) < 0)
