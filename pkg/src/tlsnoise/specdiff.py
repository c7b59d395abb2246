"""Spectral diffusion: temporal variance of Gamma_1 from TLS-TLF coupling."""

from dataclasses import dataclass, field
import math

import numpy as np

from . import units
from .ensemble import DEFAULT_EPSREL, _check_omega_q, gamma2_array, resonance_quadrature

__all__ = [
    "TlfEnsemble",
    "SpectralDiffusionSpec",
    "gamma1_coeffs",
    "var_spd_single",
    "var_spd_ensemble",
    "DEFAULT_G",
]

#: default sqrt(G^2) = 2 pi x 1 MHz, in rad/ns
DEFAULT_G = units.mhz_to_radns(1.0)


@dataclass(frozen=True)
class TlfEnsemble:
    """Microscopic fluctuators: couplings g_i and energies omega_t,i (rad/ns)."""

    couplings: tuple
    energies: tuple

    def __post_init__(self):
        if len(self.couplings) != len(self.energies):
            raise ValueError("couplings and energies must have equal length")

    def g_squared(self, temperature):
        g = np.asarray(self.couplings, float)
        w = np.asarray(self.energies, float)
        return float(np.sum(g**2 * (1 - np.tanh(0.5 * w / temperature) ** 2)))


@dataclass(frozen=True)
class SpectralDiffusionSpec:
    g_squared: float = DEFAULT_G**2
    tlfs: TlfEnsemble = field(default=None, compare=False)

    def __post_init__(self):
        if not self.g_squared >= 0:
            raise ValueError("g_squared must be >= 0")

    @classmethod
    def from_tlfs(cls, tlfs, temperature):
        return cls(g_squared=tlfs.g_squared(temperature), tlfs=tlfs)

    def scaled(self, factor):
        return SpectralDiffusionSpec(g_squared=self.g_squared * factor, tlfs=self.tlfs)


def _coeffs(sin_t, gamma2, detuning, kappa_m1):
    lor = gamma2**2 + detuning**2
    pref = kappa_m1**2 * sin_t**2
    return pref * 2 * gamma2 / lor, pref * 4 * gamma2 * detuning / lor**2


def gamma1_coeffs(tls, rates, omega_q, kappa_m1=1.0):
    """(Gamma_1^(0), Gamma_1^(1)): Gamma_1 and its slope -dGamma_1/d(detuning)."""
    g0, g1 = _coeffs(tls.sin_theta, rates.gamma_2, omega_q - tls.omega_t, kappa_m1)
    return float(g0), float(g1)


def var_spd_single(tls, rates, omega_q, kappa_m1, sd):
    """Var_spd(Gamma_1) = (Gamma_1^(1))^2 G^2 for one TLS."""
    _, g1 = gamma1_coeffs(tls, rates, omega_q, kappa_m1)
    return g1**2 * sd.g_squared


def _closed_form(spec, bath, omega_q, kappa_m1, sd):
    gphi = bath.gamma_phi_const
    if gphi <= 0:
        raise ZeroDivisionError("closed-form spectral-diffusion variance needs gamma_phi > 0")
    k = kappa_m1**4 * sd.g_squared * spec.normalization * math.pi / gphi**3
    return k * omega_q / 4 if spec.alpha == 1 else 2 * k / 3


def var_spd_ensemble(spec, bath, omega_q, kappa_m1=1.0, sd=None, method="quadrature", *,
                     epsrel=DEFAULT_EPSREL):
    """Ensemble average <Var_spd(Gamma_1)>_ens with a common G^2 for all TLSs."""
    sd = SpectralDiffusionSpec() if sd is None else sd
    _check_omega_q(spec, omega_q)
    if method == "closed_form":
        return _closed_form(spec, bath, omega_q, kappa_m1, sd)
    if method != "quadrature":
        raise ValueError(f"unknown method {method!r}")

    def fn(om, s, c, _k):
        _, g1 = _coeffs(s, gamma2_array(om, s, bath), omega_q - om, kappa_m1)
        return g1**2

    def width(s, c, _k):
        return gamma2_array(omega_q, s, bath)

    vals, _ = resonance_quadrature(spec, fn, omega_q, width, epsrel=epsrel,
                                   where="<Var_spd> quadrature")
    return float(vals[0]) * sd.g_squared
