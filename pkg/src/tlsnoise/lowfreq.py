"""Low-frequency TLS-ensemble noise S_low(w), its modification by transverse
applied noise, and the free-induction (Ramsey) decay it produces."""

from dataclasses import dataclass
import math

import numpy as np

from .ensemble import DEFAULT_EPSREL, box_quadrature
from .integrate import integrate, integrate_batched
from .protocol import DipoleCoupling

__all__ = [
    "gamma1_lowfreq",
    "omega_ir",
    "one_over_f_upper",
    "white_level",
    "one_over_f_level",
    "s_low",
    "s_low_modified",
    "s_white_modified_closed_form",
    "calibrate_n_tls",
    "LowFreqSpectrum",
    "low_freq_spectrum",
    "DephasingCurve",
    "dephasing_envelope",
    "fit_decay_exponent",
    "DEFAULT_T_TOTAL",
]

#: total experiment duration setting the infrared cutoff, 1 s in ns
DEFAULT_T_TOTAL = 1e9
#: integral of u sech^2(u) sqrt(tanh u) over (0, inf)
_WHITE_COEFF = 0.5787


def _coth(x):
    return 1.0 / np.tanh(x)


def _f_rate(omega_t, bath):
    """gamma_1 / Delta^2 = 2 pi J0 omega_t coth(omega_t / 2T)."""
    return 2.0 * math.pi * bath.j0 * omega_t * _coth(0.5 * omega_t / bath.temperature)


def gamma1_lowfreq(tls, bath):
    """TLS depolarization rate 2 pi J0 Delta^2 omega_t coth(omega_t / 2 k_B T)."""
    return float(tls.delta**2 * _f_rate(tls.omega_t, bath))


def omega_ir(spec, bath):
    """Infrared end of the 1/f band, 4 pi^2 log(2) J0 k_B T Delta_m^2."""
    return 4.0 * math.pi**2 * math.log(2.0) * bath.j0 * bath.temperature * spec.delta_min**2


def one_over_f_upper(bath):
    """gamma_1,M at omega_t = k_B T: fastest switching rate of thermal TLSs."""
    t = bath.temperature
    return float(t**2 * _f_rate(t, bath))


def white_level(spec, bath, n_tls=1.0):
    """Plateau N N_TLS k_B T / (2 pi J0 Delta_m^2), in ns."""
    return n_tls * spec.normalization * bath.temperature / (
        2.0 * math.pi * bath.j0 * spec.delta_min**2)


def one_over_f_level(omega, spec, bath, n_tls=1.0):
    """2 log(2) pi N N_TLS (k_B T)^2 / omega, in ns."""
    return 2.0 * math.log(2.0) * math.pi * n_tls * spec.normalization * bath.temperature**2 / (
        np.asarray(omega, float))


def s_white_modified_closed_form(spec, bath, d2_eta, n_tls=1.0):
    """Suppressed white level under strong quantum Ohmic noise (angle-averaged).

    Valid when the noise dominates gamma_1 of the slowest TLSs and the cutoff
    lies well above k_B T.
    """
    if not d2_eta > 0:
        raise ValueError("d2_eta must be > 0")
    return (_WHITE_COEFF * n_tls * spec.normalization * (2.0 * bath.temperature) ** 2
            / (spec.delta_min**2 * math.sqrt(4.0 * math.pi * bath.j0 * d2_eta)))


def calibrate_n_tls(target_a, spec, bath, dipole_length_factor=1.0):
    """TLS count giving S_ng = (d_e / e L)^2 S_1/f = 2 pi A^2 / omega.

    ``dipole_length_factor`` is (d_e / e L)^2.
    """
    if not target_a > 0:
        raise ValueError("target_a must be > 0")
    if not dipole_length_factor > 0:
        raise ValueError("dipole_length_factor must be > 0")
    return target_a**2 / (math.log(2.0) * spec.normalization * bath.temperature**2
                          * dipole_length_factor)


# ------------------------------------------------------------ quadrature


def _check_spec(spec):
    if spec.alpha != 1:
        raise ValueError("the low-frequency spectrum is modelled for alpha = 1")


def _rate_scale(omega_t, cos2, d2, noise, bath):
    """G(omega_t) such that gamma_1' = sin^2(theta) G; also the extra part."""
    g0 = _f_rate(omega_t, bath) * omega_t**2
    if noise is None:
        return g0, np.zeros_like(g0)
    extra = 2.0 * d2 * cos2 * noise.symmetrized(omega_t)
    return g0 + extra, extra


def _szz_weight(omega, omega_t, sin_t, cos_t, cos2, d2, noise, bath):
    """cos^2(theta) s_zz(omega) with the (possibly) modified rates."""
    g_tot, extra = _rate_scale(omega_t, cos2, d2, noise, bath)
    gamma1 = sin_t**2 * g_tot
    temp = bath.temperature
    sz = -np.tanh(0.5 * omega_t / temp)
    if noise is not None:
        # split the extra rate by the noise's own detailed balance
        down = noise.down_fraction(omega_t)
        g0 = g_tot - extra
        g_down = g0 * 0.5 * (1.0 - sz) + extra * down
        g_up = g0 * 0.5 * (1.0 + sz) + extra * (1.0 - down)
        sz = (g_up - g_down) / (g_up + g_down)
    return cos_t**2 * (1.0 - sz**2) * 2.0 * gamma1 / (omega**2 + gamma1**2)


def _x_peak(omega, g_tot):
    """x where gamma_1' = omega, i.e. sin^2(theta) = omega / G, NaN if none."""
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = omega / g_tot
        x = -np.arccosh(1.0 / np.sqrt(ratio))
    return np.where(ratio < 1.0, x, np.nan)


def _omega_breaks(bath, noise):
    t = bath.temperature
    pts = [t * k for k in (0.01, 0.1, 0.3, 1.0, 3.0, 10.0, 30.0, 60.0)]
    if noise is not None and math.isfinite(noise.cutoff):
        pts.append(noise.cutoff)
    return tuple(pts)


def _spectrum_quadrature(omega, spec, bath, n_tls, noise, d2, cos2_fixed, epsrel):
    """2D quadrature for each omega; cos2_fixed None means angle average."""
    omega = np.atleast_1d(np.asarray(omega, float))
    w_max = 80.0 * bath.temperature
    if noise is not None and math.isfinite(noise.cutoff):
        w_max = max(w_max, 1.5 * noise.cutoff)
    breaks = _omega_breaks(bath, noise)

    def for_contexts(om_arr, c2_arr):
        def fn(om_t, s, c, k):
            idx = k.astype(int)
            return _szz_weight(om_arr[idx], om_t, s, c, c2_arr[idx], d2, noise, bath)

        def x_breaks(om_t, k):
            idx = k.astype(int)
            g_tot, _ = _rate_scale(om_t, c2_arr[idx], d2, noise, bath)
            xp = _x_peak(om_arr[idx], g_tot)
            return np.stack([xp - 1.5, xp, xp + 1.5], axis=1)

        vals, _ = box_quadrature(spec, fn, breaks, x_breaks, np.arange(om_arr.size),
                                 omega_range=(0.0, w_max), epsrel=epsrel,
                                 where="S_low quadrature")
        return vals

    if noise is None or cos2_fixed is not None:
        c2 = np.full(omega.size, 1.0 if cos2_fixed is None else cos2_fixed)
        return n_tls * for_contexts(omega, c2)

    half = 0.5 * math.pi
    # the modified rate varies on the scale where 2 d^2 cos^2(a) S matches gamma_1
    edges = np.array([0.0, half - 1e-1, half - 1e-2, half - 1e-3, half])
    edges = np.broadcast_to(edges, (omega.size, edges.size))

    def outer(idx, a):
        c2 = np.cos(a) ** 2
        om = np.repeat(omega[idx], a.shape[1])
        return for_contexts(om, c2.ravel()).reshape(a.shape)

    vals, _ = integrate_batched(outer, edges, epsrel=epsrel, where="S_low angle average")
    return n_tls * vals / half


def _spectrum_semianalytic(omega, spec, bath, n_tls, epsrel):
    """1D omega_t integral of the arctan/log form, exact box Delta limits."""
    omega = np.atleast_1d(np.asarray(omega, float))
    temp = bath.temperature
    w_lo = spec.delta_min
    w_hi = min(spec.omega_max, 80.0 * temp)
    edges = np.array([w_lo, *[temp * k for k in (0.01, 0.1, 0.3, 1, 3, 10, 30)], w_hi])
    edges = np.unique(np.clip(edges, w_lo, w_hi))
    edges = np.broadcast_to(edges, (omega.size, edges.size))

    def f(idx, om_t):
        w = omega[idx][:, None]
        rate = _f_rate(om_t, bath)
        d_lo = np.maximum(spec.delta_min, np.sqrt(np.maximum(om_t**2 - spec.eps_max**2, 0.0)))
        d_hi = np.minimum(om_t, spec.delta_max)
        g_lo, g_hi, g_full = d_lo**2 * rate, d_hi**2 * rate, om_t**2 * rate
        arct = (np.arctan(g_hi / w) - np.arctan(g_lo / w)) / w
        logt = np.log1p((g_hi**2 - g_lo**2) / (g_lo**2 + w**2)) / (2.0 * g_full)
        pol = 1.0 - np.tanh(0.5 * om_t / temp) ** 2
        return om_t * (arct - logt) * pol

    vals, _ = integrate_batched(f, edges, epsrel=epsrel, where="S_low semi-analytic")
    return n_tls * spec.normalization * vals


def s_low(omega, spec, bath, n_tls=1.0, method="quadrature", *, epsrel=DEFAULT_EPSREL):
    """Ensemble low-frequency spectrum N_TLS <cos^2(theta) s_zz(omega)>, in ns.

    Parameters
    ----------
    omega : float or array
        angular frequency, rad/ns, > 0.
    method : {"quadrature", "semianalytic", "closed_form"}
        ``closed_form`` is the piecewise white / 1/f law joined at omega_ir.
    """
    _check_spec(spec)
    w = np.asarray(omega, float)
    if np.any(~(w > 0)):
        raise ValueError("omega must be > 0")
    if method == "quadrature":
        out = _spectrum_quadrature(w, spec, bath, n_tls, None, 0.0, None, epsrel)
    elif method == "semianalytic":
        out = _spectrum_semianalytic(w, spec, bath, n_tls, epsrel)
    elif method == "closed_form":
        out = np.minimum(white_level(spec, bath, n_tls), one_over_f_level(w, spec, bath, n_tls))
    else:
        raise ValueError(f"unknown method {method!r}")
    out = np.reshape(out, w.shape)
    return out[()] if out.ndim == 0 else out


def s_low_modified(omega, spec, bath, n_tls, noise, coupling=None, *, epsrel=DEFAULT_EPSREL):
    """S_low with the applied noise adding dgamma_1 (and, for classical noise,
    reshaping <sigma_z>) for TLSs below the cutoff.

    The dipole angle is averaged uniformly unless ``coupling.angle`` is set.
    """
    _check_spec(spec)
    coupling = DipoleCoupling() if coupling is None else coupling
    w = np.asarray(omega, float)
    if np.any(~(w > 0)):
        raise ValueError("omega must be > 0")
    d2 = coupling.magnitude**2
    cos2 = None if coupling.angle is None else coupling.cos2_alpha
    if noise.amplitude == 0 or d2 == 0:
        noise_eff, cos2 = None, None
    else:
        noise_eff = noise
    out = _spectrum_quadrature(w, spec, bath, n_tls, noise_eff, d2, cos2, epsrel)
    out = np.reshape(out, w.shape)
    return out[()] if out.ndim == 0 else out


# -------------------------------------------------------------- spectrum


@dataclass(frozen=True)
class LowFreqSpectrum:
    """Sampled S_low on a log-spaced grid.

    Attributes
    ----------
    omega, values : ndarray
        rad/ns and ns.
    regimes : tuple of str
        "white", "crossover" or "one_over_f" per grid point, judged against
        the unmodified omega_ir.
    n_tls : float
    charge_factor : float
        (d_e / e L)^2; ``s_ng`` is the offset-charge spectrum.
    """

    omega: np.ndarray
    values: np.ndarray
    regimes: tuple
    n_tls: float
    charge_factor: float = 1.0

    def __post_init__(self):
        w = np.asarray(self.omega, float)
        if w.ndim != 1 or w.size < 2 or np.any(np.diff(w) <= 0):
            raise ValueError("omega grid must be 1D and strictly increasing")
        if np.any(~(np.asarray(self.values) > 0)):
            raise ValueError("spectrum values must be positive")

    @property
    def s_ng(self):
        return self.charge_factor * np.asarray(self.values)

    def __call__(self, omega):
        """Offset-charge spectrum at ``omega``, log-log interpolated."""
        lw = np.log(self.omega)
        return np.exp(np.interp(np.log(omega), lw, np.log(self.s_ng)))

    def knee(self):
        """Frequency where the spectrum has fallen to half its first grid value."""
        s = np.log(self.values)
        target = s[0] - math.log(2.0)
        below = np.nonzero(s <= target)[0]
        if below.size == 0:
            return math.nan
        i = below[0]
        if i == 0:
            return float(self.omega[0])
        lw = np.log(self.omega)
        frac = (s[i - 1] - target) / (s[i - 1] - s[i])
        return float(np.exp(lw[i - 1] + frac * (lw[i] - lw[i - 1])))


def _regimes(omega, w_ir):
    out = []
    for w in omega:
        if w <= 0.1 * w_ir:
            out.append("white")
        elif w >= 10.0 * w_ir:
            out.append("one_over_f")
        else:
            out.append("crossover")
    return tuple(out)


def low_freq_spectrum(omega, spec, bath, n_tls=1.0, noise=None, coupling=None, *,
                      charge_factor=1.0, method="quadrature", epsrel=DEFAULT_EPSREL):
    """Evaluate S_low (modified when ``noise`` is given) on a grid."""
    w = np.asarray(omega, float)
    if noise is None:
        vals = s_low(w, spec, bath, n_tls, method, epsrel=epsrel)
    else:
        vals = s_low_modified(w, spec, bath, n_tls, noise, coupling, epsrel=epsrel)
    return LowFreqSpectrum(w, np.asarray(vals, float), _regimes(w, omega_ir(spec, bath)),
                           n_tls, charge_factor)


# -------------------------------------------------------------- dephasing


@dataclass(frozen=True)
class DephasingCurve:
    """Free-induction envelope <exp(i dphi(t))>, times in ns; t_phi is the
    1/e time (NaN if the envelope never reaches 1/e on the given times)."""

    times: np.ndarray
    envelope: np.ndarray
    t_phi: float


def _phase_variance(spectrum, t, w_lo, tail_periods=200.0):
    """2 * int_{w_lo}^{w_max} dw/2pi S(w) sinc^2(w t / 2)."""
    w_max = float(spectrum.omega[-1])
    w_knee = min(2.0 * math.pi / t, w_max)
    w_tail = min(2.0 * math.pi * tail_periods / t, w_max)

    def low(u):
        w = np.exp(u)
        x = 0.5 * w * t
        return w * spectrum(w) * np.sinc(x / math.pi) ** 2

    total = 0.0
    if w_knee > w_lo:
        u_edges = np.unique(np.concatenate(
            [[math.log(w_lo)], np.log(spectrum.omega[(spectrum.omega > w_lo)
                                                     & (spectrum.omega < w_knee)]),
             [math.log(w_knee)]]))
        total += integrate(low, u_edges, epsrel=1e-8, where="dephasing integral")[0]
    if w_tail > w_knee:
        # oscillatory band: one breakpoint per filter period
        n = max(1, int(math.ceil((w_tail - w_knee) * t / (2.0 * math.pi))))
        edges = np.linspace(max(w_knee, w_lo), w_tail, n + 1)
        total += integrate(lambda w: spectrum(w) * np.sinc(0.5 * w * t / math.pi) ** 2,
                           edges, epsrel=1e-8, where="dephasing integral")[0]
    if w_max > w_tail:
        # beyond many periods sinc^2 averages to 2 / (w t)^2
        u_edges = np.linspace(math.log(max(w_tail, w_lo)), math.log(w_max), 16)
        total += integrate(lambda u: np.exp(u) * spectrum(np.exp(u)) * 2.0
                           / (np.exp(u) * t) ** 2, u_edges, epsrel=1e-8,
                           where="dephasing tail")[0]
    return 2.0 * total / (2.0 * math.pi)


def dephasing_envelope(spectrum, matrix_element, times, *, t_total=DEFAULT_T_TOTAL,
                       omega_hi_factor=1e3):
    """Gaussian free-induction decay exp[-t^2 M^2 / 2 * phase integral].

    The integral runs from 2 pi / t_total to the top of the spectrum grid,
    which must reach ``omega_hi_factor / t`` for every t.

    Raises
    ------
    ValueError
        if the spectrum grid does not cover [2 pi / t_total, omega_hi_factor / t].
    """
    t = np.asarray(times, float)
    if t.ndim != 1 or np.any(~(t > 0)) or np.any(np.diff(t) < 0):
        raise ValueError("times must be positive and sorted")
    w_lo = 2.0 * math.pi / t_total
    if spectrum.omega[0] > w_lo:
        raise ValueError(
            f"spectrum grid starts at {spectrum.omega[0]:.3g} rad/ns, above the infrared "
            f"cutoff {w_lo:.3g} rad/ns; gap [{w_lo:.3g}, {spectrum.omega[0]:.3g}]")
    need = omega_hi_factor / t[0] if t.size else 0.0
    if t.size and spectrum.omega[-1] < need:
        raise ValueError(
            f"spectrum grid ends at {spectrum.omega[-1]:.3g} rad/ns but t = {t[0]:.3g} ns needs "
            f"{need:.3g} rad/ns; gap [{spectrum.omega[-1]:.3g}, {need:.3g}]")
    m2 = float(matrix_element) ** 2
    env = np.array([math.exp(-0.5 * ti**2 * m2 * _phase_variance(spectrum, ti, w_lo))
                    for ti in t])
    return DephasingCurve(t, env, _one_over_e_time(t, env))


def _one_over_e_time(t, env):
    below = np.nonzero(env <= math.exp(-1.0))[0]
    if below.size == 0:
        return math.nan
    i = below[0]
    if i == 0:
        return float(t[0])
    # interpolate ln(-ln E) linearly in ln t
    y0, y1 = math.log(-math.log(env[i - 1])), math.log(-math.log(env[i]))
    x0, x1 = math.log(t[i - 1]), math.log(t[i])
    return float(math.exp(x0 + (0.0 - y0) * (x1 - x0) / (y1 - y0)))


def fit_decay_exponent(curve, lo=0.1, hi=1.0):
    """Least-squares slope of ln(-ln E) against ln t over [lo, hi] * t_phi."""
    if not math.isfinite(curve.t_phi):
        raise ValueError("curve has no 1/e time")
    t, e = np.asarray(curve.times), np.asarray(curve.envelope)
    mask = (t >= lo * curve.t_phi) & (t <= hi * curve.t_phi) & (e < 1.0)
    if mask.sum() < 3:
        raise ValueError("fewer than three samples in the fit window")
    slope, _ = np.polyfit(np.log(t[mask]), np.log(-np.log(e[mask])), 1)
    return float(slope)
