"""Single-TLS physics: eigenstructure, phonon-bath rates, spectral densities.

All functions accept numpy arrays where that makes sense so that the ensemble
integrators can evaluate them on whole node batches.
"""

from dataclasses import dataclass
import math

import numpy as np

from . import units
from .errors import FrozenTlsError

__all__ = [
    "TlsParams",
    "BathSpec",
    "TlsRates",
    "phonon_spectral_density",
    "bose_occupation",
    "depolarization_rate",
    "tls_rates",
    "polarization_decay",
    "s_xx",
    "s_zz",
    "qubit_rates_single_tls",
]


@dataclass(frozen=True)
class TlsParams:
    """One two-level system.

    Parameters
    ----------
    epsilon:
        bias energy, rad/ns (>= 0)
    delta:
        tunneling amplitude, rad/ns (> 0)
    """

    epsilon: float
    delta: float

    def __post_init__(self):
        if not self.epsilon >= 0:
            raise ValueError(f"epsilon must be >= 0, got {self.epsilon}")
        if not self.delta > 0:
            raise ValueError(f"delta must be > 0, got {self.delta}")

    @property
    def omega_t(self):
        return math.hypot(self.epsilon, self.delta)

    @property
    def theta(self):
        # tan(theta) = delta / epsilon; epsilon = 0 gives pi/2
        return math.atan2(self.delta, self.epsilon)

    @property
    def sin_theta(self):
        return self.delta / self.omega_t

    @property
    def cos_theta(self):
        return self.epsilon / self.omega_t


@dataclass(frozen=True)
class BathSpec:
    """Phonon bath with Debye cutoff, temperature and intrinsic pure dephasing.

    All fields are in internal units: ``j0`` in ns^2, the rest in rad/ns.
    Use :meth:`from_lab` to build from laboratory units.
    """

    j0: float
    omega_d: float
    temperature: float
    gamma_phi_const: float = 0.0

    def __post_init__(self):
        for name in ("j0", "omega_d", "temperature"):
            value = getattr(self, name)
            if not value > 0:
                raise ValueError(f"{name} must be > 0, got {value}")
        if not self.gamma_phi_const >= 0:
            raise ValueError("gamma_phi_const must be >= 0")

    @classmethod
    def from_lab(cls, j0_ps2=0.047, temperature_mk=20.0, omega_d_ghz=1000.0,
                 gamma_phi_mhz=10.0):
        """Build from J0 in ps^2, T in mK, f_D in GHz and gamma_phi/2pi in MHz."""
        return cls(
            j0=units.ps2_to_ns2(j0_ps2),
            omega_d=units.ghz_to_radns(omega_d_ghz),
            temperature=units.mk_to_radns(temperature_mk),
            gamma_phi_const=units.mhz_to_radns(gamma_phi_mhz),
        )

    @property
    def beta(self):
        return 1.0 / self.temperature

    def replace(self, **changes):
        fields = dict(j0=self.j0, omega_d=self.omega_d,
                      temperature=self.temperature,
                      gamma_phi_const=self.gamma_phi_const)
        fields.update(changes)
        return BathSpec(**fields)


@dataclass(frozen=True)
class TlsRates:
    """Bath-induced rates of one TLS (rad/ns) and its equilibrium polarization."""

    gamma_down: float
    gamma_up: float
    gamma_phi: float

    @property
    def gamma_1(self):
        return self.gamma_down + self.gamma_up

    @property
    def gamma_2(self):
        return 0.5 * self.gamma_1 + self.gamma_phi

    @property
    def sz_eq(self):
        return (self.gamma_up - self.gamma_down) / (self.gamma_up + self.gamma_down)


def phonon_spectral_density(omega, bath):
    """J(omega) = J0 omega^3 exp(-omega^2 / 2 omega_D^2)."""
    omega = np.asarray(omega, dtype=float)
    if np.any(omega < 0):
        raise ValueError("phonon spectral density is defined for omega >= 0")
    out = bath.j0 * omega**3 * np.exp(-0.5 * (omega / bath.omega_d) ** 2)
    return out[()] if out.ndim == 0 else out


def bose_occupation(omega, temperature):
    omega = np.asarray(omega, dtype=float)
    with np.errstate(over="ignore"):
        out = 1.0 / np.expm1(omega / temperature)
    return out[()] if out.ndim == 0 else out


def _coth(x):
    return 1.0 / np.tanh(x)


def depolarization_rate(omega_t, delta, bath):
    """gamma_1 = gamma_down + gamma_up, vectorized over omega_t and delta.

    Written as 2 pi (delta/omega_t)^2 J(omega_t) coth(beta omega_t / 2), which
    equals the sum of the two golden-rule rates without forming n_B + 1.
    """
    omega_t = np.asarray(omega_t, dtype=float)
    delta = np.asarray(delta, dtype=float)
    cutoff = np.exp(-0.5 * (omega_t / bath.omega_d) ** 2)
    return (2.0 * math.pi * bath.j0 * delta**2 * omega_t * cutoff
            * _coth(0.5 * omega_t / bath.temperature))


def equilibrium_polarization(omega_t, temperature):
    """<sigma_z>_eq = -tanh(beta omega_t / 2)."""
    return -np.tanh(0.5 * np.asarray(omega_t, dtype=float) / temperature)


def tls_rates(tls, bath):
    """Golden-rule relaxation/excitation rates from the phonon bath."""
    w = tls.omega_t
    prefactor = 2.0 * math.pi * (tls.delta / w) ** 2 * float(phonon_spectral_density(w, bath))
    n_b = float(bose_occupation(w, bath.temperature))
    return TlsRates(gamma_down=prefactor * (n_b + 1.0), gamma_up=prefactor * n_b,
                    gamma_phi=bath.gamma_phi_const)


def polarization_decay(sz0, t, rates):
    """Closed-form solution of d<sz>/dt = -gamma_1 (<sz> - sz_eq)."""
    if abs(sz0) > 1:
        raise ValueError("|sz0| must be <= 1")
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("t must be >= 0")
    sz_eq = rates.sz_eq
    out = sz_eq + (sz0 - sz_eq) * np.exp(-rates.gamma_1 * t)
    return out[()] if out.ndim == 0 else out


def s_xx(omega, tls, rates):
    """Transverse spectral density: Lorentzians at +/- omega_t, half-width gamma_2."""
    omega = np.asarray(omega, dtype=float)
    w, g2, sz = tls.omega_t, rates.gamma_2, rates.sz_eq
    out = (0.5 * (1 - sz) * 2 * g2 / ((omega - w) ** 2 + g2**2)
           + 0.5 * (1 + sz) * 2 * g2 / ((omega + w) ** 2 + g2**2))
    return out[()] if out.ndim == 0 else out


def s_zz(omega, tls, rates):
    """Longitudinal spectral density, a zero-centred Lorentzian of width gamma_1."""
    omega = np.asarray(omega, dtype=float)
    g1, sz = rates.gamma_1, rates.sz_eq
    out = (1 - sz**2) * 2 * g1 / (omega**2 + g1**2)
    return out[()] if out.ndim == 0 else out


def qubit_rates_single_tls(omega_q, kappa_m1, kappa_mphi, tls, rates):
    """Qubit (Gamma_1, Gamma_phi) induced by a single TLS.

    ``kappa_m1`` and ``kappa_mphi`` are the products of the coupling strength
    with the qubit charge matrix elements |<0|n|1>| and |<0|n|0> - <1|n|1>|.
    """
    if not omega_q > 0:
        raise ValueError("omega_q must be > 0")
    detuning = omega_q - tls.omega_t
    g2 = rates.gamma_2
    gamma1 = kappa_m1**2 * tls.sin_theta**2 * 2 * g2 / (detuning**2 + g2**2)
    if rates.gamma_1 == 0:
        raise FrozenTlsError(
            "frozen TLS: gamma_1 = 0, so Gamma_phi = ... / gamma_1 is undefined")
    gamma_phi = kappa_mphi**2 * tls.cos_theta**2 * (1 - rates.sz_eq**2) / rates.gamma_1
    return gamma1, gamma_phi
