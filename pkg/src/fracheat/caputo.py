"""L1 discretization of the Caputo derivative and related time-fractional tools.

Everything here is space-agnostic: a "state" is either a scalar per mode or
a norm sequence supplied by the caller.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from fracheat.quadrature import graded_singular_integral


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid ``t_k = k tau``, ``k = 0, ..., K`` on ``[0, T]``."""

    T: float
    K: int

    def __post_init__(self) -> None:
        if not self.T > 0.0:
            raise ValueError(f"horizon must be positive: got {self.T}")
        if self.K < 1:
            raise ValueError(f"step count must be positive: got {self.K}")

    @property
    def tau(self) -> float:
        return self.T / self.K

    @property
    def nodes(self) -> np.ndarray:
        nodes = self.tau * np.arange(self.K + 1, dtype=np.float64)
        nodes[-1] = self.T
        return nodes


@dataclass(frozen=True)
class L1Weights:
    """Weights ``a_j = (j+1)^{1-gamma} - j^{1-gamma}`` and ``kappa = Gamma(2-gamma) tau^gamma``."""

    gamma: float
    tau: float
    a: np.ndarray = field(repr=False)

    @property
    def K(self) -> int:
        return self.a.size

    @property
    def kappa(self) -> float:
        return math.gamma(2.0 - self.gamma) * self.tau**self.gamma

    @property
    def differences(self) -> np.ndarray:
        """``a_j - a_{j+1}`` for ``j = 0, ..., K-2``."""
        return self.a[:-1] - self.a[1:]


def l1_weights(gamma: float, K: int, tau: float = 1.0) -> L1Weights:
    if not 0.0 < gamma < 1.0:
        raise ValueError(f"L1 weights need gamma in (0, 1): got {gamma}")
    if K < 1:
        raise ValueError(f"K must be positive: got {K}")

    j = np.arange(K + 1, dtype=np.float64)
    powers = j ** (1.0 - gamma)
    a = np.diff(powers)
    a.setflags(write=False)
    return L1Weights(gamma=gamma, tau=tau, a=a)


def discrete_caputo(weights: L1Weights, history: Sequence[float], new_value: float) -> float:
    r"""L1 approximation :math:`\delta^\gamma \phi^{k+1}` from ``phi^0..phi^k`` and ``phi^{k+1}``."""
    hist = np.asarray(history, dtype=np.float64)
    k = hist.size - 1
    if k < 0:
        raise ValueError("history must contain at least phi^0")
    if k >= weights.K:
        raise ValueError(f"history of length {k + 1} exceeds the {weights.K} weights")

    return (new_value - _history_term(weights, hist)) / weights.kappa


def _history_term(weights: L1Weights, hist: np.ndarray) -> np.ndarray | float:
    r"""``sum_{j<k} (a_j - a_{j+1}) phi^{k-j} + a_k phi^0`` for ``hist = phi^0..phi^k``.

    ``hist`` may carry trailing dimensions (one column per mode or DOF).
    """
    k = hist.shape[0] - 1
    a = weights.a
    out = a[k] * hist[0]
    if k > 0:
        # phi^k, phi^{k-1}, ..., phi^1 paired with a_0 - a_1, ..., a_{k-1} - a_k
        diffs = a[:k] - a[1 : k + 1]
        out = out + np.tensordot(diffs, hist[k:0:-1], axes=(0, 0))
    return out


def history_term(weights: L1Weights, hist: np.ndarray) -> np.ndarray | float:
    return _history_term(weights, np.asarray(hist, dtype=np.float64))


def riemann_liouville_integral(
    sigma: float, grid: TimeGrid, samples: Sequence[float], n: int
) -> float:
    r"""Exact :math:`I^\sigma g(t_n)` for the piecewise-linear interpolant of ``samples``.

    Each panel contributes closed-form moments of the kernel
    :math:`(t_n - r)^{\sigma-1} / \Gamma(\sigma)` against a linear function.
    """
    if sigma <= 0.0:
        raise ValueError(f"integral order must be positive: got {sigma}")
    if not 1 <= n <= grid.K:
        raise ValueError(f"evaluation node must lie in 1..{grid.K}: got {n}")
    g = np.asarray(samples, dtype=np.float64)
    if g.shape[0] != grid.K + 1:
        raise ValueError(f"expected {grid.K + 1} samples, got {g.shape[0]}")

    tn = grid.nodes[n]
    t = grid.nodes[: n + 1]
    # distances to t_n at the panel ends: A = t_n - t_{j+1} <= B = t_n - t_j
    B = tn - t[:-1]
    A = np.maximum(tn - t[1:], 0.0)
    h = B - A
    m0 = (B**sigma - A**sigma) / sigma
    m1 = (B ** (sigma + 1.0) - A ** (sigma + 1.0)) / (sigma + 1.0)
    # linear on the panel: g_{j+1} at u = A, g_j at u = B
    gl, gr = g[:n], g[1 : n + 1]
    slope = (gl - gr) / h
    total = np.sum(gr * m0 + slope * (m1 - A * m0))
    return float(total / math.gamma(sigma))


def riemann_liouville_constant(
    sigma: float, grid: TimeGrid, samples: Sequence[float], n: int | None = None
) -> float:
    r""":math:`I^\sigma` at ``t_n`` of the piecewise-constant function equal to ``samples[k]`` on ``(t_{k-1}, t_k]``."""
    n = grid.K if n is None else n
    g = np.asarray(samples, dtype=np.float64)
    tn = grid.nodes[n]
    t = grid.nodes[: n + 1]
    w = ((tn - t[:-1]) ** sigma - np.maximum(tn - t[1:], 0.0) ** sigma) / math.gamma(sigma + 1.0)
    return float(np.sum(w * g[1 : n + 1]))


def caputo_quadrature(
    dg: Callable[[np.ndarray], np.ndarray],
    gamma: float,
    t: float,
    refinement: int = 40,
    *,
    tol: float = 1e-10,
    origin_exponent: float = 0.0,
) -> float:
    r"""Caputo derivative :math:`\frac{1}{\Gamma(1-\gamma)}\int_0^t (t-r)^{-\gamma} g'(r)\,dr`.

    ``dg`` is the (vectorized) derivative of ``g``. The kernel singularity at
    ``r = t`` is absorbed by a Gauss-Jacobi end panel. When ``g'`` itself
    behaves like ``r^origin_exponent`` near zero, pass that exponent so the
    first panel uses the matching Jacobi weight; ``dg`` is then divided by it
    internally. Panels are halved at both ends up to ``refinement`` times.
    """
    if not 0.0 < gamma < 1.0:
        raise ValueError(f"gamma must lie in (0, 1): got {gamma}")
    if t <= 0.0:
        return 0.0

    if origin_exponent != 0.0:
        def smooth(r):
            return dg(r) / r**origin_exponent
    else:
        smooth = dg

    value = graded_singular_integral(
        smooth,
        t,
        left_exp=origin_exponent,
        right_exp=-gamma,
        n=24,
        tol=tol,
        max_levels=refinement,
    )
    return value / math.gamma(1.0 - gamma)


def diagonal_step(
    weights: L1Weights | None,
    tau: float,
    rates: np.ndarray,
    histories: np.ndarray,
    load: np.ndarray,
) -> np.ndarray:
    r"""One implicit step of :math:`\delta^\gamma U^{n+1} + \mu U^{n+1} = f^{n+1}` per mode.

    ``weights=None`` selects backward Euler (``gamma = 1``). ``histories``
    has shape ``(n+1, nmodes)`` holding ``U^0..U^n``.
    """
    hist = np.asarray(histories, dtype=np.float64)
    rates = np.asarray(rates, dtype=np.float64)
    load = np.asarray(load, dtype=np.float64)
    if weights is None:
        return (hist[-1] + tau * load) / (1.0 + tau * rates)
    kappa = weights.kappa
    return (_history_term(weights, hist) + kappa * load) / (1.0 + kappa * rates)


def diagonal_run(
    gamma: float,
    grid: TimeGrid,
    rates: np.ndarray,
    u0: np.ndarray,
    load: Callable[[float], np.ndarray] | None = None,
) -> np.ndarray:
    """Full semi-discrete trajectory, shape ``(K+1, nmodes)``."""
    rates = np.atleast_1d(np.asarray(rates, dtype=np.float64))
    U = np.empty((grid.K + 1, rates.size))
    U[0] = u0
    weights = None if gamma == 1.0 else l1_weights(gamma, grid.K, grid.tau)
    nodes = grid.nodes
    zero = np.zeros_like(rates)
    for n in range(grid.K):
        f = zero if load is None else np.asarray(load(nodes[n + 1]), dtype=np.float64)
        U[n + 1] = diagonal_step(weights, grid.tau, rates, U[: n + 1], f)
    return U


@dataclass(frozen=True)
class StabilityReport:
    lhs: np.ndarray
    """Left-hand side of the stability functional at every ``t_n``."""
    rhs: np.ndarray

    @property
    def final(self) -> tuple[float, float]:
        return float(self.lhs[-1]), float(self.rhs[-1])

    def holds(self, rtol: float = 1e-10) -> bool:
        return bool(np.all(self.lhs <= self.rhs * (1.0 + rtol) + 1e-300))


def stability_functional(
    gamma: float,
    grid: TimeGrid,
    h_norms: Sequence[float],
    v_norms: Sequence[float],
    f_norms: Sequence[float] | None = None,
) -> StabilityReport:
    r"""Both sides of the discrete energy estimate at every ``t_n``, ``n = 0..K``.

    For ``gamma < 1``::

        lhs_n = tau^{1-gamma}/Gamma(2-gamma) sum_{j<n} a_j |U^{n-j}|_H^2 + sum_{k<=n} tau |U^k|_V^2
        rhs_n = t_n^{1-gamma} |U^0|_H^2 / Gamma(2-gamma) + sum_{k<=n} tau |f^k|_{V'}^2

    For ``gamma = 1`` the fractional integral of order zero is the identity,
    so the first term of ``lhs_n`` is ``|U^n|_H^2`` and ``rhs_n`` starts from
    ``|U^0|_H^2``. Norm sequences are indexed ``0..K``; entry ``0`` of
    ``v_norms`` and ``f_norms`` is ignored.
    """
    H2 = np.asarray(h_norms, dtype=np.float64) ** 2
    V2 = np.asarray(v_norms, dtype=np.float64) ** 2
    K, tau = grid.K, grid.tau
    if H2.size != K + 1 or V2.size != K + 1:
        raise ValueError(f"norm sequences must have length K+1={K + 1}")
    F2 = np.zeros(K + 1) if f_norms is None else np.asarray(f_norms, dtype=np.float64) ** 2

    energy = np.concatenate([[0.0], np.cumsum(tau * V2[1:])])
    forcing = np.concatenate([[0.0], np.cumsum(tau * F2[1:])])

    if gamma == 1.0:
        return StabilityReport(lhs=H2 + energy, rhs=H2[0] + forcing)

    a = l1_weights(gamma, K, tau).a
    scale = tau ** (1.0 - gamma) / math.gamma(2.0 - gamma)
    memory = np.zeros(K + 1)
    for n in range(1, K + 1):
        # sum_{j=0}^{n-1} a_j |U^{n-j}|^2
        memory[n] = np.dot(a[:n], H2[n:0:-1])
    initial = grid.nodes ** (1.0 - gamma) * H2[0] / math.gamma(2.0 - gamma)
    return StabilityReport(lhs=scale * memory + energy, rhs=initial + forcing)
