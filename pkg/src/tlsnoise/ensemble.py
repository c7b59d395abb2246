"""TLS ensemble statistics of the qubit depolarization rate.

Three independent routes are provided for each statistic:

* ``quadrature`` -- nested adaptive integration of P(eps, Delta) * Gamma_1^k
  over the parameter box, in polar coordinates (omega_t, theta),
* ``closed_form`` -- the delta-function approximations,
* ``monte_carlo`` -- sample means over TLSs drawn from P(eps, Delta).

A fourth, ``semianalytic_mean_gamma1``, integrates the one-dimensional
log-ratio form obtained after the inner Lorentzian integral.
"""

from dataclasses import dataclass
import math

import numpy as np

from . import units
from .integrate import integrate, integrate_batched
from .physcore import TlsParams, depolarization_rate

__all__ = [
    "EnsembleSpec",
    "EnsembleStats",
    "make_rng",
    "spawn_rngs",
    "tls_from_uniforms",
    "sample_tls",
    "sample_tls_arrays",
    "resonance_quadrature",
    "normalization_integral",
    "box_quadrature",
    "gamma2_array",
    "mean_gamma1",
    "var_gamma1_ens",
    "semianalytic_mean_gamma1",
    "total_rate_stats",
]

METHODS = ("quadrature", "closed_form", "monte_carlo")
DEFAULT_EPSREL = 1e-6


@dataclass(frozen=True)
class EnsembleSpec:
    """Joint distribution P(eps, Delta) = N eps^alpha / Delta on a box (rad/ns)."""

    alpha: int
    eps_min: float
    eps_max: float
    delta_min: float
    delta_max: float

    def __post_init__(self):
        if self.alpha not in (0, 1):
            raise ValueError("alpha must be 0 or 1")
        if not 0 <= self.eps_min < self.eps_max:
            raise ValueError("need 0 <= eps_min < eps_max")
        if not 0 < self.delta_min < self.delta_max:
            raise ValueError("need 0 < delta_min < delta_max")

    @classmethod
    def from_lab(cls, alpha=1, eps_min_k=0.0, eps_max_k=4.0, delta_min_k=2e-6,
                 delta_max_k=4.0):
        """Box edges given as energies over k_B, in kelvin."""
        return cls(alpha=alpha,
                   eps_min=units.kelvin_to_radns(eps_min_k),
                   eps_max=units.kelvin_to_radns(eps_max_k),
                   delta_min=units.kelvin_to_radns(delta_min_k),
                   delta_max=units.kelvin_to_radns(delta_max_k))

    def replace(self, **changes):
        fields = dict(alpha=self.alpha, eps_min=self.eps_min, eps_max=self.eps_max,
                      delta_min=self.delta_min, delta_max=self.delta_max)
        fields.update(changes)
        return EnsembleSpec(**fields)

    @property
    def inverse_normalization(self):
        return (((self.eps_max + self.eps_min) / 2) ** self.alpha
                * (self.eps_max - self.eps_min)
                * math.log(self.delta_max / self.delta_min))

    @property
    def normalization(self):
        return 1.0 / self.inverse_normalization

    @property
    def omega_max(self):
        return math.hypot(self.eps_max, self.delta_max)

    @property
    def omega_min(self):
        return math.hypot(self.eps_min, self.delta_min)

    def density(self, epsilon, delta):
        epsilon = np.asarray(epsilon, float)
        delta = np.asarray(delta, float)
        inside = ((epsilon >= self.eps_min) & (epsilon <= self.eps_max)
                  & (delta >= self.delta_min) & (delta <= self.delta_max))
        return np.where(inside, self.normalization * epsilon**self.alpha / delta, 0.0)


@dataclass(frozen=True)
class EnsembleStats:
    """Per-TLS ensemble statistics of Gamma_1.

    ``var_gamma1_ens`` is the second moment <Gamma_1^2>, which equals the
    variance up to <Gamma_1>^2 (smaller by ~ N gamma_phi / omega_q).
    Either statistic may be ``None`` if it was not requested.
    """

    mean_gamma1: float = None
    var_gamma1_ens: float = None
    method: str = "quadrature"
    error: float = 0.0

    def __post_init__(self):
        if self.var_gamma1_ens is not None and self.var_gamma1_ens < 0:
            raise ValueError("var_gamma1_ens must be >= 0")


# -- random sampling ---------------------------------------------------------

def make_rng(seed):
    """Counter-based (Philox) generator; identical seeds give identical streams."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


def spawn_rngs(seed, n):
    """``n`` independent Philox substreams derived deterministically from ``seed``."""
    return [np.random.Generator(np.random.Philox(s))
            for s in np.random.SeedSequence(seed).spawn(n)]


def tls_from_uniforms(spec, u_eps, u_delta):
    """Inverse-CDF map from two uniforms in [0, 1] to (epsilon, delta)."""
    u_eps = np.asarray(u_eps, float)
    u_delta = np.asarray(u_delta, float)
    delta = spec.delta_min * (spec.delta_max / spec.delta_min) ** u_delta
    if spec.alpha == 0:
        eps = spec.eps_min + u_eps * (spec.eps_max - spec.eps_min)
    else:
        eps = np.sqrt(spec.eps_min**2 + u_eps * (spec.eps_max**2 - spec.eps_min**2))
    return eps, delta


def sample_tls_arrays(spec, rng, size):
    u = rng.random((2, size))
    return tls_from_uniforms(spec, u[0], u[1])


def sample_tls(spec, rng):
    eps, delta = sample_tls_arrays(spec, rng, 1)
    return TlsParams(float(eps[0]), float(delta[0]))


# -- quadrature machinery ----------------------------------------------------

def _x_of_theta(theta):
    return np.log(np.tan(0.5 * theta))


def _omega_bounds(spec, sin_t, cos_t):
    """omega_t range of the box along the ray of fixed theta."""
    with np.errstate(divide="ignore"):
        lo = np.maximum(spec.delta_min / sin_t,
                        np.where(cos_t > 0, spec.eps_min / cos_t, np.where(spec.eps_min > 0, np.inf, 0.0)))
        hi = np.minimum(spec.delta_max / sin_t, np.where(cos_t > 0, spec.eps_max / cos_t, np.inf))
    return lo, hi


def _x_edges(spec, omega_q):
    """Breakpoints in x = log tan(theta/2) where the box edges change or cross omega_q."""
    theta_min = math.atan2(spec.delta_min, spec.eps_max)
    theta_max = math.atan2(spec.delta_max, spec.eps_min)
    thetas = [theta_min, theta_max, math.atan2(spec.delta_max, spec.eps_max)]
    if spec.eps_min > 0:
        thetas.append(math.atan2(spec.delta_min, spec.eps_min))
    if omega_q is not None:
        for ratio in (spec.delta_min / omega_q, spec.delta_max / omega_q):
            if ratio < 1:
                thetas.append(math.asin(ratio))
        for ratio in (spec.eps_min / omega_q, spec.eps_max / omega_q):
            if ratio < 1:
                thetas.append(math.acos(ratio))
    thetas = [t for t in thetas if theta_min <= t <= theta_max]
    return np.unique(_x_of_theta(np.array(thetas)))


_WIDTH_STEPS = np.array([-30.0, -10.0, -3.0, -1.0, 0.0, 1.0, 3.0, 10.0, 30.0])


def resonance_quadrature(spec, fn, omega_q, width, contexts=None, *, omega_breaks=(),
                         epsrel=DEFAULT_EPSREL, where="ensemble quadrature"):
    """Integrate P(eps, Delta) * fn over the box, for a batch of contexts.

    The box is parametrized by omega_t and x = log tan(theta/2), where
    eps = omega_t cos(theta), Delta = omega_t sin(theta), so that
    P d(eps) d(Delta) = N omega_t^alpha cos(theta)^alpha d(omega_t) dx.
    The outer integral runs over x, the inner one over omega_t with extra
    breakpoints at omega_q + k * width for k in (+-1, 3, 10, 30).

    Parameters
    ----------
    fn:
        ``fn(omega_t, sin_t, cos_t, ctx)`` evaluated on equal-shape arrays.
    width:
        ``width(sin_t, cos_t, ctx)`` -- resonance linewidth used only to place
        breakpoints.
    contexts:
        1D array of extra per-problem parameters (e.g. a dipole angle);
        ``None`` means a single problem with ``ctx = 0``.
    omega_breaks:
        fixed omega_t breakpoints added to every inner integral, e.g. the
        cutoff of an applied noise spectrum.

    Returns
    -------
    values, errors : ndarray, shape (len(contexts),)
    """
    ctx = np.zeros(1) if contexts is None else np.atleast_1d(np.asarray(contexts, float))
    norm = spec.normalization
    alpha = spec.alpha
    x_edges = _x_edges(spec, omega_q)
    outer_edges = np.broadcast_to(x_edges, (ctx.size, x_edges.size))

    def outer(idx_o, xs):
        x = xs.ravel()
        c_o = np.repeat(ctx[idx_o], xs.shape[1])
        sin_t = 1.0 / np.cosh(x)
        cos_t = -np.tanh(x)
        lo, hi = _omega_bounds(spec, sin_t, cos_t)
        if omega_q is None:
            edges = np.stack([lo, hi], axis=1)
        else:
            w = np.abs(width(sin_t, cos_t, c_o))
            pts = omega_q + w[:, None] * _WIDTH_STEPS[None, :]
            pts = np.clip(pts, lo[:, None], hi[:, None])
            edges = np.concatenate([lo[:, None], pts, hi[:, None]], axis=1)
        if len(omega_breaks):
            extra = np.broadcast_to(np.asarray(omega_breaks, float), (lo.size, len(omega_breaks)))
            extra = np.clip(extra, lo[:, None], hi[:, None])
            edges = np.sort(np.concatenate([edges, extra], axis=1), axis=1)
        edges = np.where(hi[:, None] > lo[:, None], edges, np.nan)

        def inner(idx_i, om):
            s = sin_t[idx_i][:, None]
            c = cos_t[idx_i][:, None]
            k = c_o[idx_i][:, None]
            weight = norm * (om * c) ** alpha if alpha else norm
            return weight * fn(om, s, c, k)

        vals = _chunked_inner(inner, edges, epsrel * 0.1, where)
        return vals.reshape(xs.shape)

    return integrate_batched(outer, outer_edges, epsrel=epsrel, where=where)


#: inner problems integrated together; bounds peak memory of nested quadrature
_INNER_CHUNK = 4096


def _chunked_inner(inner, edges, epsrel, where):
    """Run ``integrate_batched`` over row blocks of ``edges``; ``inner`` sees
    global row indices."""
    n = edges.shape[0]
    if n <= _INNER_CHUNK:
        return integrate_batched(inner, edges, epsrel=epsrel, where=where)[0]
    out = np.empty(n)
    for start in range(0, n, _INNER_CHUNK):
        stop = min(n, start + _INNER_CHUNK)
        out[start:stop] = integrate_batched(
            lambda idx, t, s=start: inner(idx + s, t), edges[start:stop],
            epsrel=epsrel, where=where)[0]
    return out


def _x_bounds_at(spec, omega_t):
    """x-interval of the box along the circle of fixed omega_t (NaN when empty)."""
    om = np.asarray(omega_t, float)
    with np.errstate(divide="ignore", invalid="ignore"):
        th_lo = np.maximum(np.arcsin(np.minimum(1.0, spec.delta_min / om)),
                           np.arccos(np.minimum(1.0, spec.eps_max / om)))
        th_hi = np.minimum(np.arcsin(np.minimum(1.0, spec.delta_max / om)),
                           np.arccos(np.minimum(1.0, spec.eps_min / om)))
        lo = _x_of_theta(th_lo)
        hi = _x_of_theta(th_hi)
    empty = ~(th_hi > th_lo)
    return np.where(empty, np.nan, lo), np.where(empty, np.nan, hi)


def box_quadrature(spec, fn, omega_breaks=(), x_breaks=None, contexts=None, *,
                   omega_range=None, epsrel=DEFAULT_EPSREL, where="box quadrature"):
    """Integrate P * fn with omega_t outermost and x = log tan(theta/2) inside.

    Parameters
    ----------
    fn:
        ``fn(omega_t, sin_t, cos_t, ctx)`` on equal-shape arrays.
    omega_breaks:
        extra outer breakpoints (e.g. a noise cutoff); the box corners are
        always included.
    x_breaks:
        optional ``x_breaks(omega_t, ctx) -> (n, k)`` array of inner
        breakpoints, NaN where unused.
    omega_range:
        optional (lo, hi) restricting omega_t, e.g. a thermal sub-ensemble.
    contexts:
        1D batch of extra parameters; ``None`` means one problem.
    """
    ctx = np.zeros(1) if contexts is None else np.atleast_1d(np.asarray(contexts, float))
    norm = spec.normalization
    alpha = spec.alpha
    w_lo, w_hi = spec.omega_min, spec.omega_max
    if omega_range is not None:
        w_lo, w_hi = max(w_lo, omega_range[0]), min(w_hi, omega_range[1])
    pts = [w_lo, w_hi, spec.eps_max, spec.delta_max, spec.eps_min, spec.delta_min,
           min(spec.eps_max, spec.delta_max), *omega_breaks]
    pts = np.unique(np.clip(np.asarray(pts, float), w_lo, w_hi))
    outer_edges = np.broadcast_to(pts, (ctx.size, pts.size))

    def outer(idx_o, ws):
        om = ws.ravel()
        c_o = np.repeat(ctx[idx_o], ws.shape[1])
        lo, hi = _x_bounds_at(spec, om)
        if x_breaks is None:
            edges = np.stack([lo, hi], axis=1)
        else:
            mid = np.asarray(x_breaks(om, c_o), float)
            mid = np.where(np.isnan(mid), lo[:, None], mid)
            mid = np.sort(np.clip(mid, lo[:, None], hi[:, None]), axis=1)
            edges = np.concatenate([lo[:, None], mid, hi[:, None]], axis=1)

        def inner(idx_i, xs):
            s = 1.0 / np.cosh(xs)
            c = -np.tanh(xs)
            w = om[idx_i][:, None]
            k = c_o[idx_i][:, None]
            weight = norm * (w * c) ** alpha if alpha else norm
            return weight * fn(np.broadcast_to(w, xs.shape), s, c, np.broadcast_to(k, xs.shape))

        vals = _chunked_inner(inner, edges, epsrel * 0.1, where)
        return vals.reshape(ws.shape)

    return integrate_batched(outer, outer_edges, epsrel=epsrel, where=where)


def normalization_integral(spec, epsrel=1e-10):
    """Integral of P over the box by the same quadrature; should be 1."""
    vals, errs = resonance_quadrature(spec, lambda om, s, c, k: np.ones_like(om), None,
                                      None, epsrel=epsrel, where="normalization")
    return float(vals[0]), float(errs[0])


def gamma2_array(omega_t, sin_t, bath):
    """Intrinsic TLS dephasing gamma_2 = gamma_1/2 + gamma_phi on arrays."""
    return 0.5 * depolarization_rate(omega_t, omega_t * sin_t, bath) + bath.gamma_phi_const


def _gamma1_qubit(omega_t, sin_t, gamma2, omega_q, kappa_m1):
    det = omega_q - omega_t
    return kappa_m1**2 * sin_t**2 * 2 * gamma2 / (det**2 + gamma2**2)


def _check_omega_q(spec, omega_q):
    if not spec.eps_min < omega_q < spec.omega_max:
        raise ValueError(
            f"omega_q = {omega_q:g} rad/ns lies outside ({spec.eps_min:g}, {spec.omega_max:g})")


def _moment_quadrature(spec, bath, omega_q, kappa_m1, power, epsrel):
    def fn(om, s, c, _k):
        g2 = gamma2_array(om, s, bath)
        return _gamma1_qubit(om, s, g2, omega_q, kappa_m1) ** power

    def width(s, c, _k):
        return gamma2_array(omega_q, s, bath)

    vals, errs = resonance_quadrature(spec, fn, omega_q, width, epsrel=epsrel,
                                      where=f"<Gamma_1^{power}> quadrature")
    return float(vals[0]), float(errs[0])


def _moment_monte_carlo(spec, bath, omega_q, kappa_m1, power, n_samples, seed, n_streams=8):
    sums = []
    for k, rng in enumerate(spawn_rngs(seed, n_streams)):
        n = n_samples // n_streams + (1 if k < n_samples % n_streams else 0)
        eps, delta = sample_tls_arrays(spec, rng, n)
        om = np.hypot(eps, delta)
        s = delta / om
        g = _gamma1_qubit(om, s, gamma2_array(om, s, bath), omega_q, kappa_m1) ** power
        sums.append((g.sum(), (g * g).sum(), n))
    total = sum(a for a, _, _ in sums)
    total_sq = sum(b for _, b, _ in sums)
    n = sum(c for _, _, c in sums)
    mean = total / n
    var = max(total_sq / n - mean**2, 0.0)
    return mean, math.sqrt(var / n)


def _closed_mean(spec, omega_q, kappa_m1):
    k2 = kappa_m1**2 * spec.normalization * math.pi
    return k2 * omega_q if spec.alpha == 1 else 2 * k2


def _closed_second_moment(spec, bath, omega_q, kappa_m1):
    k4 = kappa_m1**4 * spec.normalization * math.pi / bath.gamma_phi_const
    return k4 * omega_q / 2 if spec.alpha == 1 else 4 * k4 / 3


def mean_gamma1(spec, bath, omega_q, kappa_m1=1.0, method="quadrature", *,
                epsrel=DEFAULT_EPSREL, n_samples=1_000_000, seed=0):
    """Ensemble average <Gamma_1>_ens of the qubit depolarization rate per TLS."""
    _check_omega_q(spec, omega_q)
    if method == "quadrature":
        value, err = _moment_quadrature(spec, bath, omega_q, kappa_m1, 1, epsrel)
    elif method == "closed_form":
        value, err = _closed_mean(spec, omega_q, kappa_m1), 0.0
    elif method == "monte_carlo":
        value, err = _moment_monte_carlo(spec, bath, omega_q, kappa_m1, 1, n_samples, seed)
    else:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    return EnsembleStats(mean_gamma1=value, method=method, error=err)


def var_gamma1_ens(spec, bath, omega_q, kappa_m1=1.0, method="quadrature", *,
                   epsrel=DEFAULT_EPSREL, n_samples=1_000_000, seed=0):
    """Ensemble variance of Gamma_1 per TLS, approximated by <Gamma_1^2>_ens."""
    _check_omega_q(spec, omega_q)
    if method == "quadrature":
        value, err = _moment_quadrature(spec, bath, omega_q, kappa_m1, 2, epsrel)
    elif method == "closed_form":
        if bath.gamma_phi_const <= 0:
            raise ZeroDivisionError("closed-form variance needs gamma_phi > 0")
        value, err = _closed_second_moment(spec, bath, omega_q, kappa_m1), 0.0
    elif method == "monte_carlo":
        value, err = _moment_monte_carlo(spec, bath, omega_q, kappa_m1, 2, n_samples, seed)
    else:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    return EnsembleStats(var_gamma1_ens=value, method=method, error=err)


def semianalytic_mean_gamma1(spec, bath, omega_q, kappa_m1=1.0, *, epsrel=1e-8):
    """<Gamma_1>_ens for alpha = 1 from the 1D log-ratio integral over omega_t.

    The gamma_2 integral is done analytically, leaving
    N/(2 omega_t f) log[(g_hi^2 + w_d^2) / (g_lo^2 + w_d^2)] with
    gamma_2 - gamma_phi = Delta^2 f(omega_t).  The Delta limits at each omega_t
    are the exact box edges, max(Delta_m, sqrt(omega_t^2 - eps_M^2)) and
    min(omega_t, Delta_M); approximating them by (Delta_m, omega_t) up to
    sqrt(2) Delta_M overcounts strongly broadened TLSs in the corner
    omega_t > eps_M by several percent.
    """
    if spec.alpha != 1:
        raise ValueError("the semi-analytic form is derived for alpha = 1")
    if spec.eps_min != 0:
        raise ValueError("the semi-analytic form assumes eps_min = 0")
    _check_omega_q(spec, omega_q)
    gphi = bath.gamma_phi_const
    w_lo = spec.delta_min
    w_hi = spec.omega_max

    def integrand(om):
        f = 0.5 * depolarization_rate(om, 1.0, bath)
        d_lo = np.maximum(spec.delta_min, np.sqrt(np.maximum(om**2 - spec.eps_max**2, 0.0)))
        d_hi = np.minimum(om, spec.delta_max)
        g_lo = d_lo**2 * f + gphi
        g_hi = d_hi**2 * f + gphi
        det2 = (omega_q - om) ** 2
        return np.log1p((g_hi**2 - g_lo**2) / (g_lo**2 + det2)) / (2 * om * f)

    width = gphi + 0.5 * float(depolarization_rate(omega_q, omega_q, bath))
    pts = np.clip(omega_q + width * _WIDTH_STEPS, w_lo, w_hi)
    kinks = [min(spec.eps_max, spec.delta_max), max(spec.eps_max, spec.delta_max)]
    edges = np.sort(np.concatenate([[w_lo], pts, kinks, [w_hi]]))
    value, _ = integrate(integrand, edges, epsrel=epsrel, where="semi-analytic <Gamma_1>")
    return kappa_m1**2 * spec.normalization * value


def total_rate_stats(stats, n_tls):
    """Statistics of Gamma_1,tot summed over n_tls i.i.d. TLSs, and of T_1 = 1/Gamma.

    Returns (mean_total, var_total, mean_t1, var_t1).
    """
    if n_tls < 1:
        raise ValueError("n_tls must be >= 1")
    mean_tot = n_tls * stats.mean_gamma1
    var_tot = n_tls * stats.var_gamma1_ens
    if mean_tot == 0:
        raise ZeroDivisionError("zero mean rate: T_1 statistics undefined")
    return mean_tot, var_tot, 1.0 / mean_tot, var_tot / mean_tot**4
