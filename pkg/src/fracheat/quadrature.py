"""Gauss rules and graded-panel integration for algebraic endpoint singularities."""

from __future__ import annotations

from functools import lru_cache
from typing import Callable

import numpy as np
from scipy.special import roots_jacobi


class ConvergenceError(RuntimeError):
    """Raised when a refinement loop fails to reach its tolerance."""


@lru_cache(maxsize=128)
def _jacobi_reference(n: int, right_exp: float, left_exp: float) -> tuple[np.ndarray, np.ndarray]:
    x, w = roots_jacobi(n, right_exp, left_exp)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gauss_jacobi(
    n: int, a: float, b: float, left_exp: float = 0.0, right_exp: float = 0.0
) -> tuple[np.ndarray, np.ndarray]:
    r"""Nodes and weights for :math:`\int_a^b (x-a)^p (b-x)^q g(x)\,dx`.

    The rule is exact for polynomials ``g`` of degree ``2n - 1``. With both
    exponents zero this is the Gauss-Legendre rule on ``[a, b]``.
    """
    if left_exp <= -1 or right_exp <= -1:
        raise ValueError(f"exponents must be > -1: got {left_exp}, {right_exp}")

    x, w = _jacobi_reference(n, float(right_exp), float(left_exp))
    half = 0.5 * (b - a)
    nodes = a + half * (1.0 + x)
    weights = w * half ** (left_exp + right_exp + 1.0)
    return nodes, weights


def graded_singular_integral(
    func: Callable[[np.ndarray], np.ndarray],
    t: float,
    left_exp: float = 0.0,
    right_exp: float = 0.0,
    *,
    n: int = 32,
    tol: float = 1e-10,
    max_levels: int = 60,
) -> float:
    r"""Compute :math:`\int_0^t r^p (t - r)^q h(r)\,dr` for a vectorized ``h``.

    The interval is split dyadically towards both endpoints. The two
    innermost panels carry the algebraic weights through Gauss-Jacobi rules
    and all remaining panels use Gauss-Legendre. Each level halves the two
    end panels; iteration stops once successive levels agree to ``tol``
    (relative to ``max(1, |I|)``).
    """
    if t <= 0.0:
        return 0.0

    def left_weight(r: np.ndarray) -> np.ndarray:
        return r**left_exp if left_exp != 0.0 else np.ones_like(r)

    def right_weight(r: np.ndarray) -> np.ndarray:
        return (t - r) ** right_exp if right_exp != 0.0 else np.ones_like(r)

    def plain(a: float, b: float) -> float:
        x, w = gauss_jacobi(n, a, b)
        return float(np.sum(w * left_weight(x) * right_weight(x) * func(x)))

    def left_end(h: float) -> float:
        x, w = gauss_jacobi(n, 0.0, h, left_exp=left_exp)
        return float(np.sum(w * right_weight(x) * func(x)))

    def right_end(h: float) -> float:
        x, w = gauss_jacobi(n, t - h, t, right_exp=right_exp)
        return float(np.sum(w * left_weight(x) * func(x)))

    # level 1: [0, t/2] and [t/2, t] are both end panels
    h = 0.5 * t
    interior = 0.0
    previous = left_end(h) + right_end(h)
    for _ in range(max_levels):
        interior += plain(0.5 * h, h) + plain(t - h, t - 0.5 * h)
        h *= 0.5
        current = interior + left_end(h) + right_end(h)
        if abs(current - previous) <= tol * max(1.0, abs(current)):
            return current
        previous = current

    raise ConvergenceError(
        f"graded quadrature did not reach tol={tol:g} after {max_levels} levels"
    )


def tensor_gauss(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on the reference interval ``[0, 1]``."""
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w
