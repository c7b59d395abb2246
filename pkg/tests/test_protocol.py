import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from tlsnoise import units
from tlsnoise.errors import ConvergenceError
from tlsnoise.physcore import TlsParams, tls_rates
from tlsnoise.protocol import (AppliedNoise, DipoleCoupling, _weighted_median, added_rates,
                               cutoff_schedule, modified_gamma2, modified_polarization,
                               stabilization_point, stabilization_sweep, tlf_heating_factor)

freqs = st.floats(1e-3, 100.0)


def test_white_noise_symmetrized_and_cutoff():
    n = AppliedNoise("white", 0.3, cutoff=2.0)
    assert n.symmetrized(1.0) == 0.3
    assert n.symmetrized(-1.9) == 0.3
    assert n.symmetrized(2.5) == 0.0


def test_ohmic_is_linear():
    n = AppliedNoise("ohmic", 0.5, cutoff=10.0, character="quantum", t_eff=1.0)
    assert n.symmetrized(4.0) == pytest.approx(2.0)
    assert n.symmetrized(-4.0) == pytest.approx(2.0)


@given(w=freqs, t=st.floats(0.05, 10.0))
def test_quantum_detailed_balance(w, t):
    n = AppliedNoise("ohmic", 1.0, cutoff=math.inf, character="quantum", t_eff=t)
    up, down = float(n.spectral_density(-w)), float(n.spectral_density(w))
    assert up == pytest.approx(down * math.exp(-w / t), rel=1e-9, abs=1e-300)
    assert 0.5 * (up + down) == pytest.approx(w, rel=1e-12)


@given(w=freqs)
def test_classical_noise_is_symmetric(w):
    n = AppliedNoise("white", 0.7)
    assert n.spectral_density(w) == n.spectral_density(-w) == pytest.approx(0.7)


@pytest.mark.parametrize("kwargs", [dict(shape="pink"), dict(character="quantum"),
                                    dict(amplitude=-1.0), dict(cutoff=-1.0)])
def test_noise_validation(kwargs):
    with pytest.raises(ValueError):
        AppliedNoise(**kwargs)


def test_dipole_coupling_units():
    assert DipoleCoupling.strain(1.0).magnitude == pytest.approx(units.ev_to_radns(1.0))
    assert DipoleCoupling().cos2_alpha == 0.5
    assert DipoleCoupling(1.0, 0.0).cos2_alpha == 1.0
    with pytest.raises(ValueError):
        DipoleCoupling(1.0, 2.0)


def test_added_rates_split_and_geometry():
    tls = TlsParams(3.0, 4.0)
    noise = AppliedNoise("white", 0.2)
    r = added_rates(tls, DipoleCoupling(2.0, 0.0), noise)
    assert r.d_gamma_1 == pytest.approx(4.0 * 0.64 * 2 * 0.2)
    assert r.d_gamma_phi == pytest.approx(2 * 4.0 * 0.36 * 0.2)
    assert r.d_gamma_down == pytest.approx(r.d_gamma_up)
    # perpendicular dipole does not couple
    assert added_rates(tls, DipoleCoupling(2.0, math.pi / 2), noise).d_gamma_1 == (
        pytest.approx(0.0, abs=1e-30))


def test_strong_classical_noise_saturates_tls(bath):
    tls = TlsParams(0.0, 20.0)
    rates = tls_rates(tls, bath)
    added = added_rates(tls, DipoleCoupling(1.0, 0.0), AppliedNoise("white", 1e6))
    assert abs(modified_polarization(rates, added)) < 1e-6
    assert modified_gamma2(rates, added) == pytest.approx(rates.gamma_2 + 0.5 * added.d_gamma_1)


@given(eps=st.floats(0.1, 50.0), delta=st.floats(0.1, 50.0), eta=st.floats(1e-6, 1e3))
def test_quantum_noise_at_bath_temperature_keeps_polarization(eps, delta, eta):
    from tlsnoise.physcore import BathSpec
    bath = BathSpec.from_lab()
    tls = TlsParams(eps, delta)
    rates = tls_rates(tls, bath)
    noise = AppliedNoise("ohmic", eta, character="quantum", t_eff=bath.temperature)
    added = added_rates(tls, DipoleCoupling(1.0, 0.0), noise)
    assert modified_polarization(rates, added) == pytest.approx(rates.sz_eq, rel=1e-9)


@given(st.lists(st.floats(-100, 100), min_size=1, max_size=50))
def test_weighted_median_equal_weights_bracket(values):
    v = np.array(values)
    m = _weighted_median(v, np.ones_like(v))
    assert v.min() <= m <= v.max()
    assert np.sum(v < m) <= len(v) / 2 + 1e-9
    assert np.sum(v > m) <= len(v) / 2 + 1e-9


def test_weighted_median_follows_weights():
    assert _weighted_median(np.array([1.0, 2.0, 3.0]), np.array([0.0, 0.0, 1.0])) == 3.0


def test_cutoff_schedule_grows_with_amplitude(bath, box1, omega_q):
    amps = units.ghz_to_radns(np.array([1e-3, 1e-2, 1e-1, 1.0]))
    cuts = [cutoff_schedule(box1, bath, a, omega_q) for a in amps]
    assert all(b > a for a, b in zip(cuts, cuts[1:]))
    # strong noise: omega_c approaches the added dephasing scale
    assert cuts[-1] > amps[-1] * 0.1


def test_cutoff_schedule_noise_free_is_intrinsic_linewidth(bath, box1, omega_q):
    wc = cutoff_schedule(box1, bath, 0.0, omega_q)
    assert bath.gamma_phi_const <= wc < 10 * bath.gamma_phi_const


def test_cutoff_schedule_convergence_error(bath, box1, omega_q):
    with pytest.raises(ConvergenceError) as info:
        cutoff_schedule(box1, bath, 1.0, omega_q, max_iter=1)
    assert info.value.last > 0


def test_heating_factor_limits(bath, box1):
    assert tlf_heating_factor(box1, bath, AppliedNoise("white", 0.0)) == 1.0
    classical = tlf_heating_factor(box1, bath, AppliedNoise("white", 1.0, cutoff=10.0))
    assert classical > 1.0
    quantum = tlf_heating_factor(
        box1, bath, AppliedNoise("ohmic", 1.0, cutoff=10.0, character="quantum",
                                 t_eff=bath.temperature))
    assert quantum == pytest.approx(1.0, rel=1e-6)


def test_heating_factor_monotone_in_amplitude(bath, box1):
    vals = [tlf_heating_factor(box1, bath, AppliedNoise("white", a, cutoff=5.0), epsrel=1e-4)
            for a in (0.01, 0.1, 1.0)]
    assert vals[0] < vals[1] < vals[2]


def test_zero_amplitude_point_is_identity(bath, box1, omega_q):
    p = stabilization_point(box1, bath, omega_q, 0.0)
    assert (p.mean_ratio, p.var_ens_ratio, p.var_spd_ratio, p.g2_factor) == (1, 1, 1, 1)


def test_sweep_empty_and_negative(bath, box1, omega_q):
    assert stabilization_sweep(box1, bath, omega_q, amplitudes=[]) == []
    with pytest.raises(ValueError):
        stabilization_sweep(box1, bath, omega_q, amplitudes=[-1.0])


@pytest.fixture(scope="module")
def short_sweep(bath, box1, omega_q):
    amps = units.ghz_to_radns(np.array([0.01, 0.3]))
    return amps, stabilization_sweep(box1, bath, omega_q, amplitudes=amps, epsrel=1e-4)


def test_sweep_threads_preserve_order_and_values(short_sweep, bath, box1, omega_q):
    amps, serial = short_sweep
    threaded = stabilization_sweep(box1, bath, omega_q, amplitudes=amps, epsrel=1e-4, threads=2)
    assert threaded == serial
    assert [p.amplitude for p in serial] == list(amps)


def test_sweep_ratios_independent_of_qubit_coupling(short_sweep, bath, box1, omega_q):
    amps, base = short_sweep
    scaled = stabilization_sweep(box1, bath, omega_q, amplitudes=amps, epsrel=1e-4,
                                 kappa_m1=0.37)
    for a, b in zip(base, scaled):
        assert b.mean_ratio == pytest.approx(a.mean_ratio, rel=1e-9)
        assert b.var_ens_ratio == pytest.approx(a.var_ens_ratio, rel=1e-9)
        assert b.var_spd_ratio == pytest.approx(a.var_spd_ratio, rel=1e-9)


def test_sweep_noise_raises_mean_and_stabilizes(short_sweep):
    _, pts = short_sweep
    for p in pts:
        assert p.mean_ratio >= 1.0
        assert p.var_ens_ratio > 1.0
        assert p.g2_factor >= 1.0
