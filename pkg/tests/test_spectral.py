import math

import numpy as np
import pytest

from fracheat.specfun import MLEvalConfig, mittag_leffler, normalization_constant
from fracheat.spectral import (
    FractionalParams,
    SpectralData,
    TimeProfile,
    chi_profile,
    effective_rate,
    eigenpair,
    energy_identity_residual,
    extension_energy,
    hs_norm,
    mode_solution,
    mode_solution_closed_form,
    mode_solution_u,
    oracle_evaluate,
    psi_profile,
    truncation_shift,
)

PI2 = math.pi**2


def test_params_validation():
    p = FractionalParams(0.3, 0.5)
    assert p.alpha == pytest.approx(0.4)
    assert p.d_s == pytest.approx(normalization_constant(0.3))
    for bad in [dict(s=0.0, gamma=0.5), dict(s=0.5, gamma=0.0), dict(s=0.5, gamma=1.2)]:
        with pytest.raises(ValueError):
            FractionalParams(**bad)
    with pytest.raises(ValueError):
        FractionalParams(0.5, 0.5, c_coeff=-1.0)


def test_eigenpair_normalized():
    p = FractionalParams(0.5, 1.0, c_coeff=2.0, domain_length=2.0)
    lam, phi = eigenpair(3, p)
    assert lam == pytest.approx((3 * math.pi / 2) ** 2 + 2.0)
    x = np.linspace(0, 2, 20001)
    vals = phi(x) ** 2
    assert np.trapezoid(vals, x) == pytest.approx(1.0, rel=1e-7)


def test_spectral_data_ordering():
    p = FractionalParams(0.5, 1.0)
    data = SpectralData.from_modes(p, [(3, 1.0), (1, 2.0)])
    assert [m.k for m in data.modes] == [1, 3]
    with pytest.raises(KeyError):
        data.mode(2)


def test_time_profiles():
    assert TimeProfile.power(2.0, 0.5)(4.0) == pytest.approx(4.0)
    assert TimeProfile.exponential_decay(3.0, 1.0)(0.0) == pytest.approx(3.0)
    ml = TimeProfile.mittag_leffler_mode(1.0, 1.0, 0.5)
    assert ml(1.0) == pytest.approx(0.427583576155807, abs=1e-12)
    with pytest.raises(ValueError):
        TimeProfile.power(1.0, -0.5)


def test_psi_profile_values():
    p = FractionalParams(0.3, 1.0)
    cs = 2**0.7 / math.gamma(0.3)
    # K_{0.3}(1) from mpmath
    assert psi_profile(p, 1.0, 1.0)[0] == pytest.approx(cs * 0.43507602420880202, rel=1e-12)
    assert psi_profile(p, 4.0, 0.0)[0] == 1.0
    half = FractionalParams(0.5, 1.0)
    assert psi_profile(half, PI2, 0.7)[0] == pytest.approx(math.exp(-0.7 * math.pi), rel=1e-14)


@pytest.mark.parametrize("s", [0.2, 0.5, 0.8])
def test_profile_derivatives_match_differences(s):
    p = FractionalParams(s, 1.0)
    lam, Y, h = 5.0, 1.7, 1e-5
    for y in (0.1, 0.6, 1.3):
        d = (psi_profile(p, lam, y + h)[0] - psi_profile(p, lam, y - h)[0]) / (2 * h)
        assert psi_profile(p, lam, y)[1] == pytest.approx(d, rel=1e-7)
        d = (chi_profile(p, lam, Y, y + h)[0] - chi_profile(p, lam, Y, y - h)[0]) / (2 * h)
        assert chi_profile(p, lam, Y, y)[1] == pytest.approx(d, rel=1e-7)


def test_chi_half_closed_form():
    p = FractionalParams(0.5, 1.0)
    value, _, shift = chi_profile(p, PI2, 2.0, 1.0)
    assert value == pytest.approx(0.04313336916702721, rel=1e-13)
    assert chi_profile(p, PI2, 2.0, 2.0)[0] == 0.0
    assert shift == pytest.approx(-2.0 / math.expm1(4 * math.pi), rel=1e-14)


@pytest.mark.parametrize("s", [0.3, 0.7])
def test_chi_boundary_values(s):
    p = FractionalParams(s, 1.0)
    assert chi_profile(p, 3.0, 1.5, 0.0)[0] == 1.0
    assert abs(chi_profile(p, 3.0, 1.5, 1.5 - 1e-12)[0]) < 1e-10
    with pytest.raises(ValueError):
        chi_profile(p, 3.0, 0.5, 0.1)


def test_truncation_shift_sign_and_decay():
    p = FractionalParams(0.4, 1.0)
    shifts = [truncation_shift(p, PI2, Y) for Y in (1.0, 2.0, 3.0)]
    assert all(e < 0 for e in shifts)
    # decays like exp(-2 sqrt(lambda) Y)
    ratio = math.log(shifts[1] / shifts[2])
    assert ratio == pytest.approx(2 * math.pi, rel=1e-2)
    assert truncation_shift(p, 1e6, 1.0) == 0.0


@pytest.mark.parametrize("s", [0.1, 0.3, 0.5, 0.7, 0.9])
def test_conormal_limit(s):
    p = FractionalParams(s, 1.0)
    lam = 7.0
    # the next term of the expansion is O(y^(2-2s))
    y = 10.0 ** (-8.0 / (2.0 - 2.0 * s))
    flux = -(y ** p.alpha) * psi_profile(p, lam, y)[1]
    assert flux == pytest.approx(p.d_s * lam**s, rel=1e-6)


@pytest.mark.parametrize("s", [0.2, 0.5, 0.8])
def test_bessel_energy_identity(s):
    p = FractionalParams(s, 1.0)
    assert energy_identity_residual(p, PI2, 0.05, 2.0) < 1e-10


@pytest.mark.parametrize("s", [0.3, 0.5, 0.7])
@pytest.mark.parametrize("Y", [None, 1.5])
def test_energy_equals_rate(s, Y):
    p = FractionalParams(s, 1.0)
    for lam in (PI2, 4 * PI2 + 1.0):
        energy = extension_energy(p, lam, Y)
        assert energy / (p.d_s * effective_rate(p, lam, Y)) == pytest.approx(1.0, rel=1e-9)


def test_truncated_rate_exceeds_untruncated():
    p = FractionalParams(0.5, 1.0)
    assert effective_rate(p, PI2, 1.0) > effective_rate(p, PI2)
    assert effective_rate(p, PI2, 1.0) == pytest.approx(math.pi / math.tanh(math.pi), rel=1e-14)


def test_relaxation_only():
    p = FractionalParams(0.5, 0.5)
    data = SpectralData.from_modes(p, [(1, 2.0)])
    sol = mode_solution(data, 1)
    t = 0.3
    expected = 2.0 * mittag_leffler(0.5, 1.0, -math.pi * t**0.5)
    assert mode_solution_u(sol, t) == pytest.approx(expected, rel=1e-14)


@pytest.mark.parametrize("gamma", [0.4, 0.8, 1.0])
@pytest.mark.parametrize("forcing", [TimeProfile.constant(2.0), TimeProfile.power(-1.5, 0.5), TimeProfile.power(1.0, 2.0)])
def test_duhamel_quadrature_matches_closed_form(gamma, forcing):
    p = FractionalParams(0.4, gamma, c_coeff=0.5)
    data = SpectralData.from_modes(p, [(2, 0.7, forcing)])
    sol = mode_solution(data, 2, Y=1.2)
    for t in (0.05, 0.5, 2.0):
        assert mode_solution_u(sol, t) == pytest.approx(mode_solution_closed_form(sol, t), abs=1e-9)


def test_exponential_forcing_gamma_one():
    p = FractionalParams(0.5, 1.0)
    data = SpectralData.from_modes(p, [(1, 0.0, TimeProfile.exponential_decay(1.0, 2.0))])
    sol = mode_solution(data, 1)
    mu, t = math.pi, 0.8
    expected = (math.exp(-2 * t) - math.exp(-mu * t)) / (mu - 2)
    assert mode_solution_u(sol, t) == pytest.approx(expected, rel=1e-10)


def test_closed_form_rejects_other_kinds():
    p = FractionalParams(0.5, 0.5)
    data = SpectralData.from_modes(p, [(1, 1.0, TimeProfile.exponential_decay(1.0, 1.0))])
    with pytest.raises(ValueError):
        mode_solution_closed_form(mode_solution(data, 1), 1.0)


def test_ml_config_is_threaded_through():
    p = FractionalParams(0.5, 0.5)
    data = SpectralData.from_modes(p, [(1, 1.0)])
    cfg = MLEvalConfig(series_radius=1.0, asymptotic_radius=1.0)
    sol = mode_solution(data, 1)
    assert mode_solution_u(sol, 0.5, cfg) == pytest.approx(mode_solution_u(sol, 0.5), abs=1e-10)


def test_oracle_trace_and_decay():
    p = FractionalParams(0.5, 1.0)
    data = SpectralData.from_modes(p, [(1, 1.0), (2, -0.5)])
    t, x = 0.2, 0.3
    v, (vx, vy) = oracle_evaluate(data, x, 0.0, t)
    u1, u2 = math.exp(-math.pi * t), -0.5 * math.exp(-2 * math.pi * t)
    s2 = math.sqrt(2)
    assert v == pytest.approx(s2 * (u1 * math.sin(math.pi * x) + u2 * math.sin(2 * math.pi * x)), rel=1e-13)
    assert vy == pytest.approx(-s2 * (math.pi * u1 * math.sin(math.pi * x) + 2 * math.pi * u2 * math.sin(2 * math.pi * x)), rel=1e-12)
    v_deep, _ = oracle_evaluate(data, x, 3.0, t)
    assert abs(v_deep) < 1e-3


def test_oracle_singular_flux_sign():
    p = FractionalParams(0.3, 1.0)
    data = SpectralData.from_modes(p, [(1, 1.0)])
    _, (_, vy) = oracle_evaluate(data, 0.5, 0.0, 0.0)
    assert vy == -math.inf


def test_hs_norm_one_term():
    p = FractionalParams(0.5, 1.0)
    data = SpectralData.from_modes(p, [(1, 1.0)])
    assert hs_norm({1: 0.3}, 0.5, data) == pytest.approx(PI2**0.25 * 0.3)
    assert hs_norm([(1, -0.3)], 0.0, data) == pytest.approx(0.3)
    with pytest.raises(ValueError):
        hs_norm({1: 1.0}, 1.5, data)
