"""Exact spectral solutions of the space-time fractional heat equation on an interval.

The spatial operator is ``L = -d^2/dx^2 + c`` on ``(0, l)`` with homogeneous
Dirichlet conditions. Solutions are finite sine expansions whose time
coefficients solve scalar fractional ODEs, and whose extensions to the
half-line (or to the truncated interval ``(0, Y)``) in the extra variable
``y`` are given by Bessel profiles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy import integrate

from fracheat.quadrature import graded_singular_integral
from fracheat.specfun import (
    MLEvalConfig,
    _ive,
    _kve,
    gamma_fn,
    mittag_leffler,
    normalization_constant,
)

#: beyond this value of sqrt(lambda) * y the profiles underflow
PSI_CUTOFF = 700.0
#: beyond this value of sqrt(lambda) * Y truncation is invisible in double precision
TRUNCATION_CUTOFF = 350.0


# {{{ parameters


@dataclass(frozen=True)
class FractionalParams:
    """Orders and coefficients of the problem; the single source for all exponents."""

    s: float
    """Spatial order in ``(0, 1)``."""
    gamma: float
    """Temporal order in ``(0, 1]``."""
    c_coeff: float = 0.0
    domain_length: float = 1.0

    alpha: float = field(init=False)
    d_s: float = field(init=False)

    def __post_init__(self) -> None:
        if not 0.0 < self.s < 1.0:
            raise ValueError(f"s must lie in (0, 1): got {self.s}")
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError(f"gamma must lie in (0, 1]: got {self.gamma}")
        if self.c_coeff < 0.0:
            raise ValueError(f"reaction coefficient must be nonnegative: got {self.c_coeff}")
        if self.domain_length <= 0.0:
            raise ValueError(f"domain length must be positive: got {self.domain_length}")

        object.__setattr__(self, "alpha", 1.0 - 2.0 * self.s)
        object.__setattr__(self, "d_s", normalization_constant(self.s))

    @property
    def c_s(self) -> float:
        """Normalization of the Bessel profile, ``2^{1-s} / Gamma(s)``."""
        return 2.0 ** (1.0 - self.s) / gamma_fn(self.s)

    @property
    def is_half(self) -> bool:
        return abs(self.s - 0.5) < 1e-6


# }}}


# {{{ time profiles


@dataclass(frozen=True)
class TimeProfile:
    """Closed-form time dependence of one forcing coefficient ``f_k(t)``.

    ``kind`` is one of

    * ``"zero"``: ``0``,
    * ``"constant"``: ``c``,
    * ``"power"``: ``c t^p`` with ``p >= 0``,
    * ``"exponential_decay"``: ``c exp(-a t)``,
    * ``"mittag_leffler_mode"``: ``c E_{q,1}(-a t^q)`` with order ``q`` in ``(0, 1]``.
    """

    kind: str = "zero"
    c: float = 0.0
    p: float = 0.0
    a: float = 0.0
    q: float = 1.0

    KINDS = ("zero", "constant", "power", "exponential_decay", "mittag_leffler_mode")

    def __post_init__(self) -> None:
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown time profile kind: {self.kind!r}")
        if self.kind == "power" and self.p < 0.0:
            raise ValueError(f"power exponent must be nonnegative: got {self.p}")
        if self.kind == "mittag_leffler_mode" and not 0.0 < self.q <= 1.0:
            raise ValueError(f"Mittag-Leffler order must lie in (0, 1]: got {self.q}")

    @classmethod
    def zero(cls) -> TimeProfile:
        return cls("zero")

    @classmethod
    def constant(cls, c: float) -> TimeProfile:
        return cls("constant", c=c)

    @classmethod
    def power(cls, c: float, p: float) -> TimeProfile:
        return cls("power", c=c, p=p)

    @classmethod
    def exponential_decay(cls, c: float, a: float) -> TimeProfile:
        return cls("exponential_decay", c=c, a=a)

    @classmethod
    def mittag_leffler_mode(cls, c: float, a: float, q: float) -> TimeProfile:
        return cls("mittag_leffler_mode", c=c, a=a, q=q)

    @property
    def is_zero(self) -> bool:
        return self.kind == "zero" or self.c == 0.0

    @property
    def origin_exponent(self) -> float:
        """Exponent of the algebraic leading behavior at ``t = 0``."""
        return self.p if self.kind == "power" else 0.0

    def __call__(self, t):
        t_arr = np.asarray(t, dtype=np.float64)
        if self.kind == "zero":
            out = np.zeros_like(t_arr)
        elif self.kind == "constant":
            out = np.full_like(t_arr, self.c)
        elif self.kind == "power":
            out = self.c * t_arr**self.p
        elif self.kind == "exponential_decay":
            out = self.c * np.exp(-self.a * t_arr)
        else:
            ml = np.vectorize(lambda r: mittag_leffler(self.q, 1.0, -self.a * r**self.q))
            out = self.c * ml(t_arr) if t_arr.size else np.zeros_like(t_arr)
        return float(out) if out.ndim == 0 else out


# }}}


# {{{ spectral data


def eigenpair(k: int, params: FractionalParams) -> tuple[float, Callable]:
    """Dirichlet eigenpair ``(lambda_k, phi_k)`` of ``-d^2/dx^2 + c`` on ``(0, l)``."""
    if k < 1:
        raise ValueError(f"mode index must be positive: got {k}")
    ell = params.domain_length
    omega = k * math.pi / ell
    scale = math.sqrt(2.0 / ell)

    def phi(x):
        return scale * np.sin(omega * np.asarray(x, dtype=np.float64))

    return omega * omega + params.c_coeff, phi


@dataclass(frozen=True)
class Mode:
    k: int
    lambda_k: float
    u0_k: float
    f_k: TimeProfile
    frequency: float
    """``k pi / l``; the derivative of ``phi_k`` carries this factor."""


@dataclass(frozen=True)
class SpectralData:
    """A finite sine expansion of initial datum and forcing."""

    params: FractionalParams
    modes: tuple[Mode, ...]

    def __post_init__(self) -> None:
        ks = [m.k for m in self.modes]
        if any(b <= a for a, b in zip(ks, ks[1:])):
            raise ValueError(f"mode indices must be strictly increasing: got {ks}")

    @classmethod
    def from_modes(
        cls,
        params: FractionalParams,
        modes: Iterable[tuple[int, float] | tuple[int, float, TimeProfile]],
    ) -> SpectralData:
        built = []
        for entry in modes:
            k, u0 = int(entry[0]), float(entry[1])
            f = entry[2] if len(entry) > 2 else TimeProfile.zero()
            lam, _ = eigenpair(k, params)
            built.append(Mode(k, lam, u0, f, k * math.pi / params.domain_length))
        return cls(params, tuple(sorted(built, key=lambda m: m.k)))

    def mode(self, k: int) -> Mode:
        for m in self.modes:
            if m.k == k:
                return m
        raise KeyError(f"mode {k} not present")

    @property
    def lambdas(self) -> np.ndarray:
        return np.array([m.lambda_k for m in self.modes])

    @property
    def frequencies(self) -> np.ndarray:
        return np.array([m.frequency for m in self.modes])

    @property
    def has_forcing(self) -> bool:
        return any(not m.f_k.is_zero for m in self.modes)

    def phi(self, x) -> np.ndarray:
        """Eigenfunctions at ``x``; shape ``(nmodes, *x.shape)``."""
        x = np.asarray(x, dtype=np.float64)
        scale = math.sqrt(2.0 / self.params.domain_length)
        return scale * np.sin(np.multiply.outer(self.frequencies, x))

    def dphi(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        scale = math.sqrt(2.0 / self.params.domain_length)
        w = self.frequencies
        return scale * w.reshape((-1,) + (1,) * x.ndim) * np.cos(np.multiply.outer(w, x))

    def forcing_coefficients(self, t: float) -> np.ndarray:
        return np.array([m.f_k(t) for m in self.modes])

    def initial_coefficients(self) -> np.ndarray:
        return np.array([m.u0_k for m in self.modes])


# }}}


# {{{ extension profiles


def _profile_scaled(s: float, z: float) -> tuple[float, float]:
    """``e^z z^s K_s(z)`` and ``e^z z^s K_{1-s}(z)``."""
    zs = z**s
    return zs * _kve(s, z), zs * _kve(1.0 - s, z)


def psi_profile(params: FractionalParams, lam: float, y: float) -> tuple[float, float]:
    r"""Decaying extension profile :math:`\psi` with :math:`\psi(0) = 1` and its derivative.

    At ``y = 0`` the derivative is the one-sided limit: ``-inf`` for
    ``s < 1/2``, ``-sqrt(lam)`` for ``s = 1/2`` and ``0`` for ``s > 1/2``.
    """
    if lam <= 0.0:
        raise ValueError(f"eigenvalue must be positive: got {lam}")
    if y < 0.0:
        raise ValueError(f"y must be nonnegative: got {y}")

    root = math.sqrt(lam)
    z = root * y
    if y == 0.0:
        return 1.0, _derivative_at_origin(params, root, 1.0)
    if z > PSI_CUTOFF:
        return 0.0, 0.0

    if params.is_half:
        e = math.exp(-z)
        return e, -root * e

    k_s, k_1s = _profile_scaled(params.s, z)
    decay = math.exp(-z)
    cs = params.c_s
    return cs * k_s * decay, -cs * root * k_1s * decay


def _derivative_at_origin(params: FractionalParams, root: float, coth: float) -> float:
    if params.is_half:
        return -root * coth
    return -math.inf if params.s < 0.5 else 0.0


def truncation_shift(params: FractionalParams, lam: float, Y: float) -> float:
    r"""Coefficient :math:`e_{k,s} = 2^{1-s} b_{k,s} / \Gamma(s)` of the truncated profile.

    It is negative and decays like ``exp(-2 sqrt(lam) Y)``; zero once
    ``sqrt(lam) Y`` exceeds :data:`TRUNCATION_CUTOFF`.
    """
    Z = math.sqrt(lam) * Y
    if Z > TRUNCATION_CUTOFF:
        return 0.0
    if params.is_half:
        return -2.0 / math.expm1(2.0 * Z)
    s = params.s
    cs = params.c_s
    return -cs * cs * _kve(s, Z) / _ive(s, Z) * math.exp(-2.0 * Z)


def chi_profile(
    params: FractionalParams, lam: float, Y: float, y: float
) -> tuple[float, float, float]:
    r"""Truncated extension profile :math:`\chi` on ``[0, Y]`` with ``chi(0) = 1``, ``chi(Y) = 0``.

    Returns ``(value, derivative, e_ks)``; see :func:`truncation_shift` for the
    last entry.
    """
    if lam <= 0.0:
        raise ValueError(f"eigenvalue must be positive: got {lam}")
    if Y < 1.0:
        raise ValueError(f"truncation height must be at least 1: got {Y}")
    if not 0.0 <= y <= Y:
        raise ValueError(f"y must lie in [0, {Y}]: got {y}")

    root = math.sqrt(lam)
    Z = root * Y
    if Z > TRUNCATION_CUTOFF:
        value, deriv = psi_profile(params, lam, y)
        return value, deriv, 0.0

    e_ks = truncation_shift(params, lam, Y)
    if y == 0.0:
        coth = 1.0 / math.tanh(Z)
        return 1.0, _derivative_at_origin(params, root, coth), e_ks
    z = root * y

    if params.is_half:
        # sinh(Z - z) / sinh(Z) and its derivative, written without overflow
        denom = -math.expm1(-2.0 * Z)
        value = (math.exp(-z) - math.exp(z - 2.0 * Z)) / denom
        deriv = -root * (math.exp(-z) + math.exp(z - 2.0 * Z)) / denom
        if y == Y:
            value = 0.0
        return value, deriv, e_ks

    s = params.s
    cs = params.c_s
    zs = z**s
    ratio = _kve(s, Z) / _ive(s, Z)
    growth = math.exp(z - 2.0 * Z)
    k_s, k_1s = _profile_scaled(s, z)
    decay = math.exp(-z)

    value = cs * (k_s * decay - ratio * zs * _ive(s, z) * growth)
    # (z^s I_s)' = z^s I_{s-1}, (z^s K_s)' = -z^s K_{1-s}
    deriv = cs * root * (-k_1s * decay - ratio * zs * _ive(s - 1.0, z) * growth)
    if y == Y:
        value = 0.0
    return value, deriv, e_ks


def profile_arrays(
    params: FractionalParams, lam: float, ys: Sequence[float], Y: float | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Profile values and derivatives at many points (``psi`` or ``chi``)."""
    vals = np.empty(len(ys))
    ders = np.empty(len(ys))
    for i, y in enumerate(ys):
        if Y is None:
            vals[i], ders[i] = psi_profile(params, lam, float(y))
        else:
            vals[i], ders[i], _ = chi_profile(params, lam, Y, float(y))
    return vals, ders


# }}}


# {{{ time coefficients


@dataclass(frozen=True)
class ModeSolution:
    """Scalar fractional ODE ``d^gamma u + rate u = f`` for one mode."""

    mode: Mode
    effective_rate: float
    gamma: float

    def __post_init__(self) -> None:
        if not self.effective_rate > 0.0:
            raise ValueError(f"effective rate must be positive: got {self.effective_rate}")


def effective_rate(params: FractionalParams, lam: float, Y: float | None = None) -> float:
    r"""Decay rate of one mode: :math:`\lambda^s` or its truncated counterpart.

    On the truncated cylinder the conormal derivative of the profile is
    :math:`\lambda^s (d_s - e_{k,s})`, so the rate is
    :math:`\lambda^s (1 - e_{k,s} / d_s) > \lambda^s` (``e_{k,s} < 0``).
    """
    rate = lam**params.s
    if Y is None:
        return rate
    return rate * (1.0 - truncation_shift(params, lam, Y) / params.d_s)


def mode_solution(data: SpectralData, k: int, Y: float | None = None) -> ModeSolution:
    m = data.mode(k)
    return ModeSolution(m, effective_rate(data.params, m.lambda_k, Y), data.params.gamma)


def _relaxation(gamma: float, rate: float, t: float, cfg: MLEvalConfig | None) -> float:
    if gamma == 1.0:
        return math.exp(-rate * t)
    return mittag_leffler(gamma, 1.0, -rate * t**gamma, cfg)


def mode_solution_u(
    sol: ModeSolution, t: float, cfg: MLEvalConfig | None = None, *, tol: float = 1e-10
) -> float:
    """Exact time coefficient ``u_k(t)``: relaxation of ``u_{0,k}`` plus a Duhamel convolution.

    The convolution kernel ``r^{gamma-1} E_{gamma,gamma}(-rate r^gamma)`` is
    integrated by :func:`~fracheat.quadrature.graded_singular_integral` with
    Gauss-Jacobi end panels (32 points each) and panel halving to ``tol``.
    """
    if t < 0.0:
        raise ValueError(f"t must be nonnegative: got {t}")
    g, rate, m = sol.gamma, sol.effective_rate, sol.mode
    value = m.u0_k * _relaxation(g, rate, t, cfg) if m.u0_k != 0.0 else 0.0
    if t == 0.0 or m.f_k.is_zero:
        return value

    f = m.f_k
    p = f.origin_exponent

    if g == 1.0:
        def kernel(r):
            return np.exp(-rate * r)
    else:
        ml = np.vectorize(lambda r: mittag_leffler(g, g, -rate * r**g, cfg))

        def kernel(r):
            return ml(r)

    def smooth(r):
        # f(t - r) / (t - r)^p; the algebraic factor is carried by the Jacobi weight
        tr = t - r
        if p == 0.0:
            return kernel(r) * f(tr)
        return kernel(r) * f.c * np.ones_like(tr)

    conv = graded_singular_integral(smooth, t, left_exp=g - 1.0, right_exp=p, n=32, tol=tol)
    return value + conv


def mode_solution_closed_form(sol: ModeSolution, t: float, cfg: MLEvalConfig | None = None) -> float:
    """Exact ``u_k(t)`` for constant or power forcing, via three-parameter identities.

    ``int_0^t r^{g-1} E_{g,g}(-a r^g) (t-r)^p dr = Gamma(p+1) t^{g+p} E_{g,g+p+1}(-a t^g)``.
    Independent of the quadrature route of :func:`mode_solution_u`.
    """
    g, rate, m = sol.gamma, sol.effective_rate, sol.mode
    value = m.u0_k * _relaxation(g, rate, t, cfg)
    f = m.f_k
    if f.is_zero or t == 0.0:
        return value
    if f.kind == "constant":
        p = 0.0
    elif f.kind == "power":
        p = f.p
    else:
        raise ValueError(f"no closed form for forcing kind {f.kind!r}")
    ml = mittag_leffler(g, g + p + 1.0, -rate * t**g, cfg)
    return value + f.c * math.gamma(p + 1.0) * t ** (g + p) * ml


def time_coefficients(
    data: SpectralData, t: float, Y: float | None = None, cfg: MLEvalConfig | None = None
) -> np.ndarray:
    """``u_k(t)`` for every mode of ``data`` (truncated rates when ``Y`` is given)."""
    return np.array(
        [mode_solution_u(mode_solution(data, m.k, Y), t, cfg) for m in data.modes]
    )


# }}}


# {{{ evaluation and norms


def oracle_evaluate(
    data: SpectralData,
    x: float,
    y: float,
    t: float,
    truncated: float | None = None,
    cfg: MLEvalConfig | None = None,
) -> tuple[float, tuple[float, float]]:
    """Exact extended solution and its gradient ``(v_x, v_y)`` at ``(x, y, t)``.

    For ``s < 1/2`` the ``y``-derivative is unbounded at ``y = 0``; there
    ``v_y`` is an infinity carrying the sign of ``-sum_k u_k phi_k lambda_k^s``.
    """
    params = data.params
    coeffs = time_coefficients(data, t, truncated, cfg)
    phi = data.phi(x)
    dphi = data.dphi(x)

    if y == 0.0 and params.s < 0.5:
        flux = float(np.sum(coeffs * phi * data.lambdas**params.s))
        v = float(np.sum(coeffs * phi))
        vx = float(np.sum(coeffs * dphi))
        return v, (vx, -math.copysign(math.inf, flux) if flux != 0.0 else 0.0)

    v = vx = vy = 0.0
    for i, m in enumerate(data.modes):
        if truncated is None:
            prof, dprof = psi_profile(params, m.lambda_k, y)
        else:
            prof, dprof, _ = chi_profile(params, m.lambda_k, truncated, y)
        v += coeffs[i] * phi[i] * prof
        vx += coeffs[i] * dphi[i] * prof
        vy += coeffs[i] * phi[i] * dprof
    return float(v), (float(vx), float(vy))


def hs_norm(
    coeffs: Iterable[tuple[int, float]] | dict[int, float],
    s_signed: float,
    data: SpectralData,
) -> float:
    """``(sum_k lambda_k^{s} w_k^2)^{1/2}``; negative ``s`` gives the dual norm."""
    if not -1.0 <= s_signed <= 1.0:
        raise ValueError(f"norm index must lie in [-1, 1]: got {s_signed}")
    items = coeffs.items() if isinstance(coeffs, dict) else coeffs
    total = 0.0
    for k, w in items:
        lam = data.mode(k).lambda_k
        total += lam**s_signed * w * w
    return math.sqrt(total)


def hs_norm_from_lambdas(lambdas: np.ndarray, w: np.ndarray, s_signed: float) -> float:
    return float(np.sqrt(np.sum(np.asarray(lambdas) ** s_signed * np.asarray(w) ** 2)))


def energy_identity_residual(params: FractionalParams, lam: float, a: float, b: float) -> float:
    r"""Defect of :math:`\int_a^b y^\alpha(\lambda\psi^2 + \psi'^2) = [y^\alpha \psi\psi']_a^b`."""
    if a == b:
        return 0.0
    if not 0.0 < a < b:
        raise ValueError(f"need 0 < a < b: got {a}, {b}")
    alpha = params.alpha

    def integrand(y: float) -> float:
        v, d = psi_profile(params, lam, y)
        return y**alpha * (lam * v * v + d * d)

    def boundary(y: float) -> float:
        v, d = psi_profile(params, lam, y)
        return y**alpha * v * d

    value, _ = integrate.quad(integrand, a, b, epsabs=1e-14, epsrel=1e-13, limit=200)
    return abs(value - (boundary(b) - boundary(a)))


def extension_energy(params: FractionalParams, lam: float, Y: float | None = None) -> float:
    r"""Quadrature value of :math:`\int_0^{Y} y^\alpha(\lambda\rho^2 + \rho'^2)\,dy`.

    ``rho`` is ``psi`` (``Y=None``, integrated to infinity) or ``chi``. With a
    normalized eigenfunction this is the weighted Dirichlet energy of
    ``phi_k rho`` including the reaction term.
    """
    alpha = params.alpha
    root = math.sqrt(lam)

    def profile(y: float) -> tuple[float, float]:
        if Y is None:
            return psi_profile(params, lam, y)
        v, d, _ = chi_profile(params, lam, Y, y)
        return v, d

    def value_sq(y: float) -> float:
        return lam * profile(y)[0] ** 2 if y > 0.0 else lam

    def flux_sq(y: float) -> float:
        # y^alpha rho' tends to the conormal limit -d_s lam^s (truncated: shifted)
        if y == 0.0:
            y = 1e-300 ** (1.0 / max(abs(alpha), 1.0))
        return (y**alpha * profile(y)[1]) ** 2

    head = min(1.0 / root, Y if Y is not None else math.inf)
    opts = dict(epsabs=1e-14, epsrel=1e-12, limit=200)
    near = integrate.quad(value_sq, 0.0, head, weight="alg", wvar=(alpha, 0.0), **opts)[0]
    near += integrate.quad(flux_sq, 0.0, head, weight="alg", wvar=(-alpha, 0.0), **opts)[0]

    def integrand(y: float) -> float:
        v, d = profile(y)
        return y**alpha * (lam * v * v + d * d)

    upper = Y if Y is not None else min(PSI_CUTOFF, 60.0) / root
    if head >= upper:
        return near
    far, _ = integrate.quad(integrand, head, upper, epsabs=1e-15, epsrel=1e-12, limit=400)
    return near + far


# }}}
