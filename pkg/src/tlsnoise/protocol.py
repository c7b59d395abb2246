"""Applied-noise engine: extra TLS rates, modified polarization and linewidth,
the cutoff schedule, and the T1-stabilization sweep.

Conventions
-----------
``AppliedNoise.amplitude`` sets the *symmetrized* spectrum
``[S(w) + S(-w)] / 2``: a constant S_add (ns) for white noise and ``eta |w|``
(eta in ns^2) for Ohmic noise, both vanishing beyond the cutoff.  The noise
character only decides how that total is split between emission and
absorption: equally for classical noise, by detailed balance at ``t_eff`` for
quantum noise.  With a unit ``DipoleCoupling`` the amplitude of white noise
is therefore the quoted noise strength d^2 S_add in rad/ns.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace as _dc_replace
import math

import numpy as np
from scipy.special import expit

from . import units
from .ensemble import (DEFAULT_EPSREL, _check_omega_q, _gamma1_qubit, _x_bounds_at,
                       box_quadrature, gamma2_array, resonance_quadrature)
from .errors import ConvergenceError
from .integrate import integrate_batched
from .physcore import depolarization_rate
from .specdiff import SpectralDiffusionSpec, _coeffs

__all__ = [
    "AppliedNoise",
    "DipoleCoupling",
    "AddedRates",
    "added_rates",
    "modified_polarization",
    "modified_gamma2",
    "cutoff_schedule",
    "tlf_heating_factor",
    "StabilizationPoint",
    "stabilization_point",
    "stabilization_sweep",
]

SHAPES = ("white", "ohmic")
CHARACTERS = ("classical", "quantum")


@dataclass(frozen=True)
class AppliedNoise:
    """Engineered noise acting on the TLS dipoles.

    Parameters
    ----------
    shape : {"white", "ohmic"}
    amplitude : float
        S_add in ns (white) or eta in ns^2 (ohmic); see the module notes.
    cutoff : float
        omega_c in rad/ns; the spectrum vanishes for |omega| > cutoff.
    character : {"classical", "quantum"}
    t_eff : float, optional
        effective noise temperature (rad/ns), required for quantum noise.
    """

    shape: str = "white"
    amplitude: float = 0.0
    cutoff: float = math.inf
    character: str = "classical"
    t_eff: float = None

    def __post_init__(self):
        if self.shape not in SHAPES:
            raise ValueError(f"shape must be one of {SHAPES}, got {self.shape!r}")
        if self.character not in CHARACTERS:
            raise ValueError(f"character must be one of {CHARACTERS}, got {self.character!r}")
        if not self.amplitude >= 0:
            raise ValueError("amplitude must be >= 0")
        if not self.cutoff >= 0:
            raise ValueError("cutoff must be >= 0")
        if self.character == "quantum" and not (self.t_eff is not None and self.t_eff > 0):
            raise ValueError("quantum noise needs an effective temperature t_eff > 0")

    def replace(self, **changes):
        return _dc_replace(self, **changes)

    def symmetrized(self, omega):
        """[S(w) + S(-w)] / 2, in ns."""
        w = np.abs(np.asarray(omega, float))
        base = self.amplitude * (w if self.shape == "ohmic" else np.ones_like(w))
        return np.where(w <= self.cutoff, base, 0.0)

    def down_fraction(self, omega):
        """Share of the total rate S(w) + S(-w) carried by emission S(w)."""
        w = np.asarray(omega, float)
        if self.character == "classical":
            return np.full_like(w, 0.5)
        # logistic form of (1 + tanh(w / 2T)) / 2, accurate deep in the tails
        return expit(w / self.t_eff)

    def spectral_density(self, omega):
        """Signed spectrum S(w); S(-w) = S(w) exp(-w / t_eff) for quantum noise."""
        w = np.asarray(omega, float)
        out = 2.0 * self.symmetrized(w) * self.down_fraction(w)
        return out[()] if out.ndim == 0 else out


@dataclass(frozen=True)
class DipoleCoupling:
    """Coupling |d| (rad/ns per unit field) and angle between dipole and field.

    ``angle=None`` means the angle is averaged uniformly over [0, pi/2].
    """

    magnitude: float = 1.0
    angle: float = None

    def __post_init__(self):
        if not self.magnitude >= 0:
            raise ValueError("magnitude must be >= 0")
        if self.angle is not None and not 0 <= self.angle <= math.pi / 2:
            raise ValueError("angle must lie in [0, pi/2]")

    @classmethod
    def strain(cls, d_s_ev=1.0, angle=None):
        """Deformation-potential coupling, |d_s| in eV per unit strain."""
        return cls(units.ev_to_radns(d_s_ev), angle)

    @classmethod
    def electric(cls, d_e_debye=1.0, angle=None):
        """Electric-dipole coupling, |d_e| in debye; field in V/m."""
        return cls(d_e_debye * units.DEBYE / units.HBAR * 1e-9, angle)

    @property
    def cos2_alpha(self):
        """cos^2 of the angle, or its uniform average 1/2."""
        return 0.5 if self.angle is None else math.cos(self.angle) ** 2


@dataclass(frozen=True)
class AddedRates:
    """Noise-induced TLS rates, all in rad/ns."""

    d_gamma_1: float
    d_gamma_phi: float
    d_gamma_down: float
    d_gamma_up: float


def _added_arrays(omega_t, sin_t, cos_t, d2cos2, noise):
    """(dgamma_1, dgamma_phi, down share) for arrays; d2cos2 = (d cos alpha)^2."""
    dg1 = d2cos2 * sin_t**2 * 2.0 * noise.symmetrized(omega_t)
    dgphi = 2.0 * d2cos2 * cos_t**2 * noise.symmetrized(0.0)
    return dg1, dgphi, noise.down_fraction(omega_t)


def added_rates(tls, coupling, noise):
    """Extra depolarization and dephasing of one TLS from the applied noise."""
    d2 = coupling.magnitude**2 * coupling.cos2_alpha
    dg1, dgphi, down = _added_arrays(tls.omega_t, tls.sin_theta, tls.cos_theta, d2, noise)
    dg1, dgphi, down = float(dg1), float(dgphi), float(down)
    return AddedRates(dg1, dgphi, dg1 * down, dg1 - dg1 * down)


def modified_polarization(rates, added):
    """Equilibrium <sigma_z> with the noise-induced transitions included."""
    up = rates.gamma_up + added.d_gamma_up
    down = rates.gamma_down + added.d_gamma_down
    if up + down == 0:
        raise ZeroDivisionError("total TLS transition rate is zero")
    return (up - down) / (up + down)


def modified_gamma2(rates, added):
    """gamma_2' = gamma_2 + dgamma_1 / 2 + dgamma_phi."""
    return rates.gamma_2 + 0.5 * added.d_gamma_1 + added.d_gamma_phi


def _polarization_arrays(omega_t, gamma1, dg1, down, temperature):
    g_down = gamma1 * 0.5 * (1.0 + np.tanh(0.5 * omega_t / temperature))
    up = gamma1 - g_down + dg1 * (1.0 - down)
    dn = g_down + dg1 * down
    return (up - dn) / (up + dn)


# ---------------------------------------------------------------- cutoff


def _weighted_median(values, weights):
    order = np.argsort(values)
    v = values[order]
    cw = np.cumsum(weights[order])
    if cw[-1] <= 0:
        raise ValueError("empty near-resonant population")
    mid = cw - 0.5 * weights[order]
    return float(np.interp(0.5 * cw[-1], mid, v))


def _angle_grid(dipole_average, n):
    if not dipole_average:
        return np.ones(1), np.ones(1)
    a = (np.arange(n) + 0.5) * (0.5 * math.pi / n)
    return np.cos(a) ** 2, np.full(n, 1.0 / n)


def cutoff_schedule(spec, bath, noise_amplitude, omega_q, *, factor=1.0,
                    dipole_average=True, rtol=0.01, max_iter=100, n_x=400, n_angle=256):
    """Self-consistent white-noise cutoff omega_c = factor * median gamma_2'.

    The median runs over near-resonant TLSs, |omega_t - omega_q| < 10 gamma_2',
    and over the dipole angle when ``dipole_average``.  The resonance band is
    thin on the scale of the distribution, so each (theta, angle) class is
    weighted by P(omega_q, theta) times the band width 20 gamma_2' evaluated
    at omega_t = omega_q.

    Parameters
    ----------
    noise_amplitude : float
        d^2 S_add in rad/ns.

    Raises
    ------
    ConvergenceError
        if successive iterates still differ by more than ``rtol`` after
        ``max_iter`` iterations.
    """
    if not noise_amplitude >= 0:
        raise ValueError("noise amplitude must be >= 0")
    _check_omega_q(spec, omega_q)
    lo, hi = _x_bounds_at(spec, omega_q)
    x = lo + (np.arange(n_x) + 0.5) * (hi - lo) / n_x
    sin_t, cos_t = 1.0 / np.cosh(x), -np.tanh(x)
    base_w = (omega_q * cos_t) ** spec.alpha
    cos2, w_a = _angle_grid(dipole_average, n_angle)
    s2 = (sin_t**2)[:, None]
    c2 = (cos_t**2)[:, None]
    g2 = gamma2_array(omega_q, sin_t, bath)[:, None]
    dphi = 2.0 * noise_amplitude * cos2[None, :] * c2
    weight0 = base_w[:, None] * w_a[None, :]

    omega_c = 0.0
    for _ in range(max_iter):
        dg1 = 2.0 * noise_amplitude * cos2[None, :] * s2 if omega_q <= omega_c else 0.0
        g2p = g2 + 0.5 * dg1 + dphi
        new = factor * _weighted_median(g2p.ravel(), (weight0 * g2p).ravel())
        if omega_c > 0 and abs(new - omega_c) <= rtol * omega_c:
            return new
        omega_c = new
    raise ConvergenceError(
        f"cutoff schedule did not converge in {max_iter} iterations", last=omega_c)


# ------------------------------------------------------------ heating


def _angle_average(evaluate, amplitude, gamma_ref, epsrel, where):
    """(2/pi) * int_0^{pi/2} evaluate(cos^2 a) da with breakpoints where the
    added dephasing 2 * amplitude * cos^2 a crosses gamma_ref."""
    half = 0.5 * math.pi
    pts = [0.0, half]
    if amplitude > 0:
        for k in (0.1, 1.0, 10.0, 100.0):
            r = k * gamma_ref / (2.0 * amplitude)
            if r < 1:
                pts.append(math.acos(math.sqrt(r)))
    edges = np.unique(np.asarray(pts))[None, :]

    def f(idx, a):
        return evaluate(np.cos(a.ravel()) ** 2).reshape(a.shape)

    vals, _ = integrate_batched(f, edges, epsrel=epsrel, where=where)
    return float(vals[0]) / half


def tlf_heating_factor(spec, bath, noise, coupling=None, *, window=3.0,
                       epsrel=1e-5):
    """Factor by which the applied noise raises G^2.

    Fluctuators are the ensemble members with omega_t < window * k_B T.  Each
    contributes G^2 in proportion to 1 - <sigma_z>^2; the factor is the mean
    of (1 - <sigma_z>'^2) / (1 - <sigma_z>_eq^2) over that sub-ensemble,
    including the dipole-angle average when ``coupling.angle`` is None.
    """
    coupling = DipoleCoupling() if coupling is None else coupling
    temp = bath.temperature
    d2 = coupling.magnitude**2
    w_range = (0.0, window * temp)
    breaks = (noise.cutoff,) if math.isfinite(noise.cutoff) else ()

    def ratio(om, s, c, cos2):
        g1 = depolarization_rate(om, om * s, bath)
        dg1, _, down = _added_arrays(om, s, c, d2 * cos2, noise)
        sz = -np.tanh(0.5 * om / temp)
        szp = _polarization_arrays(om, g1, dg1, down, temp)
        return (1.0 - szp**2) / (1.0 - sz**2)

    def averaged(cos2):
        vals, _ = box_quadrature(spec, ratio, breaks, contexts=cos2, omega_range=w_range,
                                 epsrel=epsrel, where="TLF heating factor")
        return vals

    norm, _ = box_quadrature(spec, lambda om, s, c, k: np.ones_like(om), (),
                             omega_range=w_range, epsrel=epsrel, where="TLF sub-ensemble")
    if noise.amplitude == 0 or d2 == 0:
        return 1.0
    if coupling.angle is None:
        amp = d2 * float(noise.symmetrized(min(temp, noise.cutoff)))
        g_ref = float(depolarization_rate(temp, temp, bath))
        value = _angle_average(averaged, amp, g_ref, epsrel, "TLF heating factor")
    else:
        value = float(averaged(np.array([coupling.cos2_alpha]))[0])
    return value / float(norm[0])


# ------------------------------------------------------------- sweep


@dataclass(frozen=True)
class StabilizationPoint:
    """One row of the stabilization sweep; amplitude and omega_c in rad/ns."""

    amplitude: float
    omega_c: float
    mean_ratio: float
    var_ens_ratio: float
    var_spd_ratio: float
    g2_factor: float


def _protocol_moments(spec, bath, omega_q, kappa_m1, amplitude, omega_c, dipole_average,
                      epsrel):
    """(<Gamma_1>, <Gamma_1^2>, <(Gamma_1^(1))^2>) under classical white noise."""
    noise = AppliedNoise("white", amplitude, omega_c, "classical")
    breaks = (omega_c,) if 0 < omega_c < math.inf else ()

    def g2prime(om, s, c, cos2):
        dg1, dgphi, _ = _added_arrays(om, s, c, cos2, noise)
        return gamma2_array(om, s, bath) + 0.5 * dg1 + dgphi

    def fn_for(kind):
        def fn(om, s, c, cos2):
            g2 = g2prime(om, s, c, cos2)
            if kind == 2:
                _, g1 = _coeffs(s, g2, omega_q - om, kappa_m1)
                return g1**2
            return _gamma1_qubit(om, s, g2, omega_q, kappa_m1) ** (kind + 1)
        return fn

    def width(s, c, cos2):
        return g2prime(omega_q, s, c, cos2)

    out = []
    for kind in range(3):
        fn = fn_for(kind)

        def evaluate(cos2, fn=fn):
            vals, _ = resonance_quadrature(spec, fn, omega_q, width, cos2, omega_breaks=breaks,
                                           epsrel=epsrel, where="stabilization quadrature")
            return vals

        if dipole_average and amplitude > 0:
            out.append(_angle_average(evaluate, amplitude, bath.gamma_phi_const + 1e-300,
                                      epsrel, "stabilization angle average"))
        else:
            out.append(float(evaluate(np.array([1.0]))[0]))
    return out


def stabilization_point(spec, bath, omega_q, amplitude, *, sd=None, kappa_m1=1.0,
                        dipole_average=True, cutoff_factor=1.0, tlf_window=3.0,
                        epsrel=1e-5, reference=None):
    """Evaluate the protocol at one noise strength d^2 S_add (rad/ns).

    ``reference`` may carry the noise-free moments to avoid recomputing them.
    """
    sd = SpectralDiffusionSpec() if sd is None else sd
    if reference is None:
        reference = _protocol_moments(spec, bath, omega_q, kappa_m1, 0.0, 0.0, False, epsrel)
    omega_c = cutoff_schedule(spec, bath, amplitude, omega_q, factor=cutoff_factor,
                              dipole_average=dipole_average)
    if amplitude == 0:
        return StabilizationPoint(0.0, omega_c, 1.0, 1.0, 1.0, 1.0)
    on = _protocol_moments(spec, bath, omega_q, kappa_m1, amplitude, omega_c, dipole_average,
                           epsrel)
    noise = AppliedNoise("white", amplitude, omega_c, "classical")
    coupling = DipoleCoupling(1.0, None if dipole_average else 0.0)
    heat = tlf_heating_factor(spec, bath, noise, coupling, window=tlf_window, epsrel=epsrel)
    mean0, sq0, spd0 = reference
    mean1, sq1, spd1 = on
    return StabilizationPoint(
        amplitude=amplitude,
        omega_c=omega_c,
        mean_ratio=mean1 / mean0,
        var_ens_ratio=sq0 / sq1,
        var_spd_ratio=spd0 / (spd1 * heat),
        g2_factor=heat,
    )


def stabilization_sweep(spec, bath, omega_q, sd=None, amplitudes=(), *, kappa_m1=1.0,
                        dipole_average=True, cutoff_factor=1.0, tlf_window=3.0,
                        epsrel=1e-5, threads=1):
    """Protocol-off / protocol-on ratios over a list of noise strengths (rad/ns).

    Rows come back in input order whatever ``threads`` is.
    """
    amps = [float(a) for a in amplitudes]
    if any(not a >= 0 for a in amps):
        raise ValueError("amplitudes must be >= 0")
    _check_omega_q(spec, omega_q)
    if not amps:
        return []
    reference = _protocol_moments(spec, bath, omega_q, kappa_m1, 0.0, 0.0, False, epsrel)

    def one(a):
        return stabilization_point(spec, bath, omega_q, a, sd=sd, kappa_m1=kappa_m1,
                                   dipole_average=dipole_average, cutoff_factor=cutoff_factor,
                                   tlf_window=tlf_window, epsrel=epsrel, reference=reference)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(one, amps))
    return [one(a) for a in amps]
