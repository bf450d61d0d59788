"""Scalar special functions: Gamma, Mittag-Leffler and real-order Bessel functions.

All functions here are pure, deterministic and act on Python floats.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from fracheat.quadrature import ConvergenceError, graded_singular_integral

__all__ = [
    "ConvergenceError",
    "MLEvalConfig",
    "bessel_i",
    "bessel_k",
    "gamma_fn",
    "mittag_leffler",
    "normalization_constant",
]

_EPS = 2.220446049250313e-16


# {{{ gamma


def gamma_fn(x: float) -> float:
    """Gamma function; raises :class:`ValueError` at the poles ``0, -1, -2, ...``."""
    x = float(x)
    if x <= 0.0 and x == math.floor(x):
        raise ValueError(f"Gamma has a pole at nonpositive integer x={x:g}")
    return math.gamma(x)


def _rgamma(x: float) -> float:
    """Reciprocal Gamma, zero at the poles."""
    if x <= 0.0 and x == math.floor(x):
        return 0.0
    if x > 171.0:
        return 0.0
    return 1.0 / math.gamma(x)


def normalization_constant(s: float) -> float:
    r"""Extension constant :math:`d_s = 2^{1-2s} \Gamma(1-s) / \Gamma(s)`."""
    if not 0.0 < s < 1.0:
        raise ValueError(f"s must lie in (0, 1): got {s}")
    return 2.0 ** (1.0 - 2.0 * s) * gamma_fn(1.0 - s) / gamma_fn(s)


# }}}


# {{{ Mittag-Leffler


@dataclass(frozen=True)
class MLEvalConfig:
    """Regime switch-overs for :func:`mittag_leffler` on the negative real axis."""

    series_radius: float = 5.0
    asymptotic_radius: float = 15.0
    quadrature_points: int = 200
    """Maximum number of adaptive subintervals in the integral regime."""
    tolerance: float = 1e-10

    def __post_init__(self) -> None:
        if not 0.0 < self.series_radius <= self.asymptotic_radius:
            raise ValueError(
                "need 0 < series_radius <= asymptotic_radius: "
                f"got {self.series_radius}, {self.asymptotic_radius}"
            )
        if self.tolerance <= 0.0:
            raise ValueError(f"tolerance must be positive: got {self.tolerance}")
        if self.quadrature_points < 1:
            raise ValueError("quadrature_points must be positive")


DEFAULT_ML_CONFIG = MLEvalConfig()


def _ml_series(a: float, b: float, z: float, tol: float) -> float | None:
    """Taylor series; ``None`` when cancellation would exceed ``tol``."""
    logz = math.log(abs(z))
    total = 0.0
    largest = 0.0
    for k in range(10_000):
        arg = a * k + b
        if arg <= 0.0 and arg == math.floor(arg):
            term = 0.0
        else:
            mag = k * logz - math.lgamma(arg)
            if mag > 700.0:
                return None
            sign = math.copysign(1.0, math.gamma(arg)) if arg < 0.0 else 1.0
            if z < 0.0 and k % 2 == 1:
                sign = -sign
            term = sign * math.exp(mag)
        total += term
        largest = max(largest, abs(term))
        if largest * 100.0 * _EPS > tol:
            return None

        # stop on a small term once the term ratio has dropped below one
        nxt = arg + a
        if arg > 0.0 and nxt > 0.0:
            ratio = math.exp(logz + math.lgamma(arg) - math.lgamma(nxt))
            if ratio < 0.5 and abs(term) <= 0.1 * _EPS * max(abs(total), tol):
                return total
    return None


def _ml_asymptotic(a: float, b: float, z: float, tol: float) -> float | None:
    """Algebraic asymptotic expansion for large negative ``z``; ``None`` if inaccurate."""
    x = -z
    logx = math.log(x)
    total = 0.0
    smallest = math.inf
    for k in range(1, 400):
        # smooth bound on |1/Gamma(w)| so exact zeros at the poles do not stop the sum
        w = b - a * k
        if w >= 0.5:
            log_env = -k * logx - math.lgamma(w)
        else:
            log_env = -k * logx + math.lgamma(1.0 - w) - math.log(math.pi)
        envelope = math.exp(log_env) if log_env < 700.0 else math.inf
        if envelope > smallest:
            break
        total += -((-x) ** (-k)) * _rgamma(w)
        smallest = envelope
        if envelope <= 0.1 * _EPS * max(abs(total), tol):
            break
    else:
        return None

    if 1.0 < a < 2.0:
        total += _ml_pole_contribution(a, b, x)
    else:
        # the pole off the principal sheet leaves a remainder of this size
        remainder = 2.0 / a * math.exp(
            x ** (1.0 / a) * math.cos(math.pi / a) + (1.0 - b) / a * math.log(x)
        )
        if remainder > 0.1 * tol:
            return None

    if smallest > 0.1 * tol:
        return None
    return total


def _ml_pole_contribution(a: float, b: float, x: float) -> float:
    # residues of e^s s^(a-b)/(s^a + x) at s = x^(1/a) exp(+-i pi/a)
    root = x ** (1.0 / a) * cmath.exp(1j * math.pi / a)
    return 2.0 / a * (cmath.exp(root) * root ** (1.0 - b)).real


def _ml_integral(a: float, b: float, x: float, cfg: MLEvalConfig) -> float:
    r"""Inverse Laplace transform with the Bromwich contour folded onto the branch cut.

    For ``z = -x < 0`` and ``0 < a < 2``, ``a != 1``, ``b < 1 + a``::

        E_{a,b}(-x) = 1/pi int_0^oo e^{-r} r^{a-b}
                      (r^a sin(pi b) + x sin(pi (b - a)))
                      / (r^{2a} + 2 x r^a cos(pi a) + x^2) dr  + poles
    """
    sa, ca = math.sin(math.pi * b), math.sin(math.pi * (b - a))
    cos_pa = math.cos(math.pi * a)

    def integrand(r: float) -> float:
        if r == 0.0:
            return 0.0 if a - b > 0.0 else integrand(1e-300)
        ra = r**a
        den = ra * ra + 2.0 * x * ra * cos_pa + x * x
        return math.exp(-r) * r ** (a - b) * (ra * sa + x * ca) / den

    peak = x ** (1.0 / a)
    upper = max(2.0 * peak, 50.0) + 800.0
    points = [p for p in (0.5 * peak, peak, 2.0 * peak) if 0.0 < p < upper]

    # r^(a - b) is integrable at the origin since b < 1 + a
    value, err = integrate.quad(
        integrand,
        0.0,
        upper,
        points=points,
        epsabs=0.1 * cfg.tolerance,
        epsrel=1e-13,
        limit=cfg.quadrature_points,
    )
    if not err <= cfg.tolerance:
        raise ConvergenceError(
            f"Mittag-Leffler quadrature error {err:.3e} exceeds tol={cfg.tolerance:g}"
        )

    value /= math.pi
    if a > 1.0:
        value += _ml_pole_contribution(a, b, x)
    return value


def _ml_exponential(b: float, z: float, cfg: MLEvalConfig) -> float:
    """``E_{1,b}(z)`` for ``z <= 0``."""
    if b == 1.0:
        return math.exp(z)
    if b > 1.0:
        # E_{1,b}(z) = 1/Gamma(b-1) int_0^1 e^{z u} (1-u)^{b-2} du
        value = graded_singular_integral(
            lambda u: np.exp(z * u),
            1.0,
            right_exp=b - 2.0,
            tol=cfg.tolerance,
        )
        return value * _rgamma(b - 1.0)
    # lift b above one with E_{1,b}(z) = 1/Gamma(b) + z E_{1,b+1}(z)
    return _rgamma(b) + z * _ml_exponential(b + 1.0, z, cfg)


def mittag_leffler(
    gamma: float, mu: float, z: float, cfg: MLEvalConfig | None = None
) -> float:
    r"""Two-parameter Mittag-Leffler function :math:`E_{\gamma,\mu}(z)` for real ``z <= 0``.

    Three regimes are used: the Taylor series for ``|z| <= cfg.series_radius``,
    the algebraic asymptotic expansion for ``|z| >= cfg.asymptotic_radius`` and
    a real integral representation in between. The series and asymptotic
    regimes fall back to the integral whenever their own error estimate
    (cancellation for the series, smallest retained term for the expansion)
    exceeds ``cfg.tolerance``.

    :arg gamma: order in ``(0, 2)``.
    :arg mu: second parameter; the integral regime requires ``mu < 1 + gamma``.
    """
    cfg = DEFAULT_ML_CONFIG if cfg is None else cfg
    a, b, z = float(gamma), float(mu), float(z)
    if not 0.0 < a < 2.0:
        raise ValueError(f"gamma must lie in (0, 2): got {a}")
    if z > 0.0:
        raise ValueError(f"only z <= 0 is supported: got {z}")

    if z == 0.0:
        return _rgamma(b)

    if a == 1.0:
        return _ml_exponential(b, z, cfg)

    r = -z
    if r <= cfg.series_radius:
        value = _ml_series(a, b, z, cfg.tolerance)
        if value is not None:
            return value
    if r >= cfg.asymptotic_radius:
        value = _ml_asymptotic(a, b, z, cfg.tolerance)
        if value is not None:
            return value

    if b >= 1.0 + a:
        # shift the second parameter down: E_{a,b}(z) = (E_{a,b-a}(z) - 1/Gamma(b-a)) / z
        return (mittag_leffler(a, b - a, z, cfg) - _rgamma(b - a)) / z
    return _ml_integral(a, b, r, cfg)


# }}}


# {{{ modified Bessel functions

_HALF_ORDER_EPS = 1e-6
_SERIES_MAX_Z = 20.0
_REFLECTION_MAX_Z = 2.0


def _ive_series(nu: float, z: float) -> float:
    """``exp(-z) I_nu(z)`` from the ascending series; any real ``nu > -1``."""
    half = 0.5 * z
    q = half * half
    term = 1.0
    total = 1.0
    k = 0
    while True:
        k += 1
        term *= q / (k * (k + nu))
        total += term
        if term < _EPS * 0.1 * total:
            break
    log_lead = nu * math.log(half) - z - math.lgamma(nu + 1.0)
    return total * math.exp(log_lead) if nu + 1.0 > 0.0 else math.nan


def _ive_asymptotic(nu: float, z: float) -> float:
    """``exp(-z) I_nu(z)`` from the large-argument expansion (``z >= 20``)."""
    mu = 4.0 * nu * nu
    term = 1.0
    total = 1.0
    for k in range(1, 80):
        term *= -(mu - (2 * k - 1) ** 2) / (8.0 * k * z)
        total += term
        if abs(term) < _EPS * 0.1 * abs(total):
            break
    return total / math.sqrt(2.0 * math.pi * z)


def _ive(nu: float, z: float) -> float:
    """Exponentially scaled ``I_nu`` for ``nu`` in ``(-1, 1)`` and ``z > 0``."""
    if z <= _SERIES_MAX_Z:
        return _ive_series(nu, z)
    return _ive_asymptotic(nu, z)


def _kve_steed(mu: float, z: float) -> tuple[float, float]:
    """``exp(z) K_mu(z)`` and ``exp(z) K_{mu+1}(z)`` for ``|mu| <= 1/2``.

    Steed's continued fraction (CF2) with Temme's normalization, valid for
    ``z >= 2``.
    """
    b = 2.0 * (1.0 + z)
    d = 1.0 / b
    h = delh = d
    q1, q2 = 0.0, 1.0
    a1 = 0.25 - mu * mu
    q = c = a1
    a = -a1
    s = 1.0 + q * delh
    for i in range(2, 100_000):
        a -= 2 * (i - 1)
        c = -a * c / i
        qnew = (q1 - b * q2) / a
        q1, q2 = q2, qnew
        q += c * qnew
        b += 2.0
        d = 1.0 / (b + a * d)
        delh = (b * d - 1.0) * delh
        h += delh
        dels = q * delh
        s += dels
        if abs(dels / s) < _EPS:
            break
    else:
        raise ConvergenceError(f"continued fraction for K_{mu}({z}) did not converge")

    kmu = math.sqrt(math.pi / (2.0 * z)) / s
    kmu1 = kmu * (mu + z + 0.5 - a1 * h) / z
    return kmu, kmu1


def _kve(nu: float, z: float) -> float:
    """Exponentially scaled ``K_nu`` for ``|nu| < 1`` and ``z > 0``."""
    nu = abs(nu)
    if abs(nu - 0.5) < _HALF_ORDER_EPS:
        return math.sqrt(math.pi / (2.0 * z))
    if z <= _REFLECTION_MAX_Z:
        diff = _ive(-nu, z) - _ive(nu, z)
        return 0.5 * math.pi * diff / math.sin(nu * math.pi) * math.exp(2.0 * z)

    if nu <= 0.5:
        return _kve_steed(nu, z)[0]
    return _kve_steed(nu - 1.0, z)[1]


def _check_bessel_args(nu: float, z: float) -> None:
    if not 0.0 < nu < 1.0:
        raise ValueError(f"order must lie in (0, 1): got {nu}")
    if not z > 0.0:
        raise ValueError(f"argument must be positive: got {z}")


def bessel_i(nu: float, z: float) -> float:
    """Modified Bessel function of the first kind ``I_nu(z)``, ``nu`` in ``(0, 1)``."""
    _check_bessel_args(nu, z)
    if abs(nu - 0.5) < _HALF_ORDER_EPS:
        return math.sqrt(2.0 / (math.pi * z)) * math.sinh(z)
    return _ive(nu, z) * math.exp(z)


def bessel_k(nu: float, z: float) -> float:
    """Modified Bessel function of the second kind ``K_nu(z)``, ``nu`` in ``(0, 1)``.

    Uses the reflection formula through ``I_{-nu}`` and ``I_nu`` for small
    ``z`` and Steed's continued fraction above ``z = 2``, where the reflection
    formula loses all significant digits to cancellation.
    """
    _check_bessel_args(nu, z)
    return _kve(nu, z) * math.exp(-z)


# }}}
