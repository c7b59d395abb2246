import math
import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from tlsnoise import units
from tlsnoise.ensemble import (EnsembleSpec, box_quadrature, make_rng, mean_gamma1,
                               normalization_integral, sample_tls, sample_tls_arrays,
                               semianalytic_mean_gamma1, spawn_rngs, tls_from_uniforms,
                               total_rate_stats, var_gamma1_ens)

from oracles import box_average, qubit_gamma1

# <Gamma_1> and <Gamma_1^2> per TLS at 5.7 GHz, 20 mK, default box; frozen from
# the nested scipy.quad oracle in oracles.py (agreement ~1e-12)
FROZEN = {
    (0, 1): 0.0008321822803938452,
    (0, 2): 0.008080575728101117,
    (1, 1): 6.014992501462088e-05,
    (1, 2): 0.00042007890600170405,
}


def test_inverse_normalization_arithmetic(box1, box0):
    em, eM, dm, dM = box1.eps_min, box1.eps_max, box1.delta_min, box1.delta_max
    assert box1.inverse_normalization == pytest.approx(
        (eM + em) / 2 * (eM - em) * math.log(dM / dm), rel=1e-15)
    assert box0.inverse_normalization == pytest.approx((eM - em) * math.log(dM / dm), rel=1e-15)


@pytest.mark.parametrize("alpha", [0, 1])
def test_density_integrates_to_one(alpha):
    spec = EnsembleSpec.from_lab(alpha=alpha)
    value, err = normalization_integral(spec)
    assert value == pytest.approx(1.0, rel=1e-9)
    assert err < 1e-8


@pytest.mark.parametrize("alpha", [0, 1])
def test_box_quadrature_normalization(alpha):
    spec = EnsembleSpec.from_lab(alpha=alpha)
    vals, _ = box_quadrature(spec, lambda om, s, c, ctx: np.ones_like(om), epsrel=1e-8)
    assert vals[0] == pytest.approx(1.0, rel=1e-7)


def test_rejects_alpha_two():
    with pytest.raises(ValueError, match="alpha must be 0 or 1"):
        EnsembleSpec.from_lab(alpha=2)


@pytest.mark.parametrize("alpha,power", sorted(FROZEN))
def test_moments_match_frozen_oracle(alpha, power, bath, omega_q):
    spec = EnsembleSpec.from_lab(alpha=alpha)
    if power == 1:
        got = mean_gamma1(spec, bath, omega_q).mean_gamma1
    else:
        got = var_gamma1_ens(spec, bath, omega_q).var_gamma1_ens
    assert got == pytest.approx(FROZEN[alpha, power], rel=1e-8)


def test_mean_matches_live_scipy_oracle(bath, box1):
    wq = units.ghz_to_radns(4.3)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        ref = box_average(box1, bath, lambda e, d: qubit_gamma1(e, d, bath, wq), wq, epsrel=1e-7)
    got = mean_gamma1(box1, bath, wq).mean_gamma1
    assert got == pytest.approx(ref, rel=1e-6)


def test_closed_forms(bath, box1, box0, omega_q):
    n1, n0 = box1.normalization, box0.normalization
    assert mean_gamma1(box1, bath, omega_q, method="closed_form").mean_gamma1 == pytest.approx(
        math.pi * n1 * omega_q)
    assert mean_gamma1(box0, bath, omega_q, method="closed_form").mean_gamma1 == pytest.approx(
        2 * math.pi * n0)
    g = bath.gamma_phi_const
    assert var_gamma1_ens(box1, bath, omega_q, method="closed_form").var_gamma1_ens == (
        pytest.approx(math.pi * n1 * omega_q / (2 * g)))
    assert var_gamma1_ens(box0, bath, omega_q, method="closed_form").var_gamma1_ens == (
        pytest.approx(4 * math.pi * n0 / (3 * g)))


@pytest.mark.parametrize("f", [4.0, 6.0, 8.0])
def test_semianalytic_equals_quadrature(f, bath, box1):
    wq = units.ghz_to_radns(f)
    semi = semianalytic_mean_gamma1(box1, bath, wq)
    quad2 = mean_gamma1(box1, bath, wq, epsrel=1e-9).mean_gamma1
    assert semi == pytest.approx(quad2, rel=1e-8)


def test_semianalytic_requires_alpha_one(bath, box0, omega_q):
    with pytest.raises(ValueError):
        semianalytic_mean_gamma1(box0, bath, omega_q)


def test_self_convergence(bath, box1, omega_q):
    a = mean_gamma1(box1, bath, omega_q, epsrel=1e-5).mean_gamma1
    b = mean_gamma1(box1, bath, omega_q, epsrel=5e-6).mean_gamma1
    assert abs(a / b - 1) < 1e-3


@given(kappa=st.floats(1e-3, 10.0))
def test_mean_scales_as_kappa_squared(kappa):
    from tlsnoise.physcore import BathSpec
    spec, bath = EnsembleSpec.from_lab(), BathSpec.from_lab()
    wq = units.ghz_to_radns(5.7)
    base = FROZEN[1, 1]
    got = mean_gamma1(spec, bath, wq, kappa, epsrel=1e-8).mean_gamma1
    assert got == pytest.approx(kappa**2 * base, rel=1e-7)


def test_omega_q_outside_band_rejected(bath, box1):
    with pytest.raises(ValueError):
        mean_gamma1(box1, bath, 1e4)


def test_unknown_method(bath, box1, omega_q):
    with pytest.raises(ValueError):
        mean_gamma1(box1, bath, omega_q, method="bogus")


def test_closed_form_variance_needs_dephasing(box1, omega_q, bath):
    with pytest.raises(ZeroDivisionError):
        var_gamma1_ens(box1, bath.replace(gamma_phi_const=0.0), omega_q, method="closed_form")


# -- sampling ----------------------------------------------------------------


def test_rng_reproducible():
    a = make_rng(123).random(5)
    b = make_rng(123).random(5)
    assert np.array_equal(a, b)
    s1, s2 = spawn_rngs(9, 2)
    assert not np.array_equal(s1.random(3), s2.random(3))


@given(u=st.floats(0, 1), v=st.floats(0, 1))
def test_inverse_cdf_stays_in_box(u, v):
    spec = EnsembleSpec.from_lab()
    e, d = tls_from_uniforms(spec, u, v)
    assert spec.eps_min <= e <= spec.eps_max * (1 + 1e-12)
    assert spec.delta_min * (1 - 1e-12) <= d <= spec.delta_max * (1 + 1e-12)


def test_sample_tls_scalar(box1):
    tls = sample_tls(box1, make_rng(1))
    assert box1.delta_min <= tls.delta <= box1.delta_max


@pytest.mark.parametrize("alpha", [0, 1])
def test_sampler_marginals_ks(alpha):
    spec = EnsembleSpec.from_lab(alpha=alpha)
    eps, delta = sample_tls_arrays(spec, make_rng(2024), 200_000)
    em, eM = spec.eps_min, spec.eps_max
    if alpha == 0:
        cdf_e = lambda x: (x - em) / (eM - em)
    else:
        cdf_e = lambda x: (x**2 - em**2) / (eM**2 - em**2)
    cdf_d = lambda x: np.log(x / spec.delta_min) / np.log(spec.delta_max / spec.delta_min)
    assert stats.kstest(eps, cdf_e).pvalue > 0.002
    assert stats.kstest(delta, cdf_d).pvalue > 0.002


def test_monte_carlo_agrees_with_quadrature(bath, box0, omega_q):
    mc = mean_gamma1(box0, bath, omega_q, method="monte_carlo", n_samples=200_000, seed=5)
    assert abs(mc.mean_gamma1 - FROZEN[0, 1]) < 4 * mc.error
    again = mean_gamma1(box0, bath, omega_q, method="monte_carlo", n_samples=200_000, seed=5)
    assert again.mean_gamma1 == mc.mean_gamma1


def test_total_rate_stats():
    from tlsnoise.ensemble import EnsembleStats
    st_ = EnsembleStats(mean_gamma1=2.0, var_gamma1_ens=3.0)
    mean, var, t1, var_t1 = total_rate_stats(st_, 10)
    assert (mean, var, t1) == (20.0, 30.0, 1 / 20.0)
    assert var_t1 == pytest.approx(30.0 / 20.0**4)
    with pytest.raises(ValueError):
        total_rate_stats(st_, 0)
