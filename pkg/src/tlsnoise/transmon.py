"""Charge-basis transmon and bounds on decoherence from spurious strain
couplings (dephasing limit, saturated leakage, electric-dipole scale)."""

from dataclasses import dataclass
import math

import numpy as np
from scipy.linalg import eigh_tridiagonal
from scipy.optimize import minimize_scalar

from . import units
from .errors import ConvergenceError
from .integrate import integrate

__all__ = [
    "TransmonSpec",
    "TransmonSolution",
    "diagonalize",
    "charge_dispersion_slope",
    "SpuriousChannel",
    "STRAIN_CHANNELS",
    "strain_derivative_operator",
    "matrix_element_difference",
    "dephasing_limit",
    "saturated_depolarization_function",
    "depolarization_function",
    "depolarization_saturation",
    "ElectricDipoleComparison",
    "electric_dipole_comparison",
    "strain_std_to_s_add",
]

CONVERGENCE_RTOL = 1e-10


@dataclass(frozen=True)
class TransmonSpec:
    """H = 4 E_C (n - n_g)^2 - E_J cos(phi); energies in rad/ns."""

    ec: float
    ej: float
    ng: float = 0.0
    n_cut: int = 15

    def __post_init__(self):
        if not self.ec > 0:
            raise ValueError("ec must be > 0")
        if not self.ej >= 0:
            raise ValueError("ej must be >= 0")
        if not 0 <= self.ng < 1:
            raise ValueError("ng must lie in [0, 1)")
        if int(self.n_cut) != self.n_cut or self.n_cut < 5:
            raise ValueError("n_cut must be an integer >= 5")

    @classmethod
    def from_ghz(cls, ec_ghz=0.3, ej_ghz=15.0, ng=0.0, n_cut=15):
        """Build from E_C/h and E_J/h in GHz."""
        return cls(units.ghz_to_radns(ec_ghz), units.ghz_to_radns(ej_ghz), ng, n_cut)

    def with_ng(self, ng):
        return TransmonSpec(self.ec, self.ej, ng % 1.0, self.n_cut)


@dataclass(frozen=True)
class TransmonSolution:
    energies: np.ndarray  # ascending, rad/ns
    vectors: np.ndarray   # columns are eigenvectors in the charge basis
    charges: np.ndarray   # charge-basis labels n

    @property
    def omega01(self):
        return float(self.energies[1] - self.energies[0])

    def expect(self, op, i, j):
        """<i|op|j> for a charge-basis matrix ``op``."""
        return float(self.vectors[:, i] @ op @ self.vectors[:, j])

    def n_matrix(self):
        v = self.vectors
        return v.T @ (self.charges[:, None] * v)

    def cos_matrix(self):
        v = self.vectors
        return v.T @ _cos_phi(self.charges.size) @ v


def _cos_phi(size):
    off = np.full(size - 1, 0.5)
    return np.diag(off, 1) + np.diag(off, -1)


def _solve(spec, n_cut):
    n = np.arange(-n_cut, n_cut + 1, dtype=float)
    diag = 4.0 * spec.ec * (n - spec.ng) ** 2
    off = np.full(n.size - 1, -0.5 * spec.ej)
    try:
        w, v = eigh_tridiagonal(diag, off)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise ConvergenceError(f"transmon eigen-solver failed: {exc}") from exc
    return n, w, v


def diagonalize(spec):
    """Exact diagonalization in the charge basis |n| <= n_cut.

    Raises
    ------
    ConvergenceError
        if raising n_cut by 5 moves omega_01 by more than 1e-10 relative.
    """
    n, w, v = _solve(spec, spec.n_cut)
    _, w2, _ = _solve(spec, spec.n_cut + 5)
    w01, w01b = w[1] - w[0], w2[1] - w2[0]
    if abs(w01b - w01) > CONVERGENCE_RTOL * abs(w01b):
        raise ConvergenceError(
            f"omega_01 not converged at n_cut={spec.n_cut}: relative change "
            f"{abs(w01b - w01) / abs(w01b):.2e} with n_cut+5", last=float(w01))
    return TransmonSolution(w, v, n)


def _maximize_over_ng(spec, value, n_grid=51):
    """max of value(solution) over n_g in [0, 1/2]: grid plus one bounded refinement."""
    grid = np.linspace(0.0, 0.5, n_grid)
    def at(g):
        s = spec.with_ng(g)
        return value(diagonalize(s), s)

    vals = np.array([at(g) for g in grid])
    k = int(np.argmax(vals))
    h = grid[1] - grid[0]
    lo, hi = max(0.0, grid[k] - h), min(0.5, grid[k] + h)
    res = minimize_scalar(lambda g: -at(g),
                          bounds=(lo, hi), method="bounded", options={"xatol": 1e-6})
    if -res.fun > vals[k]:
        return float(-res.fun), float(res.x)
    return float(vals[k]), float(grid[k])


def charge_dispersion_slope(spec, n_grid=51):
    """M = max over n_g of |d omega_01 / d n_g| (rad/ns per unit charge).

    The derivative uses Hellmann-Feynman: dE_k/dn_g = -8 E_C <k|n - n_g|k>.
    """
    def slope(sol, _s):
        n = np.diag(sol.charges)
        return abs(8.0 * spec.ec * (sol.expect(n, 1, 1) - sol.expect(n, 0, 0)))
    return _maximize_over_ng(spec, slope, n_grid)[0]


# ------------------------------------------------------------ channels


KINDS = ("capacitive", "junction", "phonon_induced", "electric_dipole")
STRAIN_CHANNELS = ("capacitive", "junction", "phonon_induced")


@dataclass(frozen=True)
class SpuriousChannel:
    """A direct coupling of the applied field to the qubit; SI geometry.

    Defaults: barrier width l = 2 nm, decay length l_c = 0.069 nm,
    interface piezo coefficient g_I = 0.06 C/m^2, interface thickness
    t_I = 2.17 angstrom, junction area 100 nm x 100 nm, qubit size 10 um.
    """

    kind: str
    l: float = 2e-9
    l_c: float = 0.069e-9
    g_i: float = 0.06
    t_i: float = 2.17e-10
    area: float = 1e-14
    l_q: float = 10e-6

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        for name in ("l", "l_c", "g_i", "t_i", "area", "l_q"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")

    @property
    def junction_factor(self):
        """l / l_c."""
        return self.l / self.l_c

    @property
    def phonon_factor(self):
        """g_I t_I A / (e l), dimensionless."""
        return self.g_i * self.t_i * self.area / (units.ELEMENTARY_CHARGE * self.l)

    @property
    def qubit_dipole(self):
        """d_q = 2 e L_q in C m."""
        return 2.0 * units.ELEMENTARY_CHARGE * self.l_q


def strain_derivative_operator(channel, spec):
    """d(delta H)/dS in the charge basis (rad/ns per unit strain).

    For the electric-dipole channel the derivative is per unit field (V/m).
    """
    n = np.arange(-spec.n_cut, spec.n_cut + 1, dtype=float)
    if channel.kind == "capacitive":
        return np.diag(4.0 * spec.ec * (n - spec.ng) ** 2)
    if channel.kind == "junction":
        return channel.junction_factor * spec.ej * _cos_phi(n.size)
    if channel.kind == "phonon_induced":
        return np.diag(4.0 * spec.ec * channel.phonon_factor * n)
    return np.diag(channel.qubit_dipole / units.HBAR * 1e-9 * n)


def matrix_element_difference(channel, spec):
    """|<0|dH|0> - <1|dH|1>| at the transmon's own n_g."""
    sol = diagonalize(spec)
    op = strain_derivative_operator(channel, spec)
    return abs(sol.expect(op, 0, 0) - sol.expect(op, 1, 1))


def dephasing_limit(channel, spec, s_add, n_grid=51):
    """T_phi limit 1 / Gamma_phi with Gamma_phi = |<0|dH|0> - <1|dH|1>|^2 S_add / 2,
    maximized over n_g in [0, 1/2].  ``s_add`` is in ns; returns ns, or
    ``math.inf`` when the channel cannot dephase the qubit."""
    if not s_add >= 0:
        raise ValueError("s_add must be >= 0")
    if s_add == 0:
        return math.inf

    def rate(sol, s):
        op = strain_derivative_operator(channel, s)
        return 0.5 * (sol.expect(op, 0, 0) - sol.expect(op, 1, 1)) ** 2 * s_add

    gamma, _ = _maximize_over_ng(spec, rate, n_grid)
    return math.inf if gamma == 0 else 1.0 / gamma


def saturated_depolarization_function(omega_q, omega_c):
    """D_inf = (1 / 2 pi) 8 omega_c / (omega_q^2 - omega_c^2), in ns."""
    if not 0 <= omega_c < omega_q:
        raise ValueError(
            "omega_c must lie below omega_q: D_inf = 8 omega_c / 2pi(omega_q^2 - omega_c^2) "
            "has a pole at omega_c = omega_q")
    return 8.0 * omega_c / (2.0 * math.pi * (omega_q**2 - omega_c**2))


def depolarization_function(t, omega_q, omega_c):
    """D(t) = 2 t^2 int_{-w_c}^{w_c} dw/2pi sinc^2((w - w_q) t / 2), by quadrature."""
    if not t > 0:
        return 0.0
    n = max(8, int(math.ceil(2.0 * omega_c * t / (2.0 * math.pi))) * 2)
    edges = np.linspace(-omega_c, omega_c, n + 1)
    val, _ = integrate(lambda w: np.sinc((w - omega_q) * t / (2.0 * math.pi)) ** 2, edges,
                       epsrel=1e-10, where="depolarization function")
    return 2.0 * t**2 * val / (2.0 * math.pi)


def depolarization_saturation(channel, spec, s_add, omega_c, n_grid=51):
    """Ground-state population 1 - exp(-S_add |<0|dH|1>|^2 D_inf) after the
    qubit starts excited, maximized over n_g in [0, 1/2]."""
    if not s_add >= 0:
        raise ValueError("s_add must be >= 0")
    saturated_depolarization_function(diagonalize(spec).omega01, omega_c)
    if s_add == 0:
        return 0.0

    def rho(sol, s):
        op = strain_derivative_operator(channel, s)
        d_inf = saturated_depolarization_function(sol.omega01, omega_c)
        return -math.expm1(-s_add * sol.expect(op, 0, 1) ** 2 * d_inf)

    return _maximize_over_ng(spec, rho, n_grid)[0]


def strain_std_to_s_add(strain_std, bandwidth):
    """White-noise level S_add (ns) whose standard deviation sqrt(S_add w_c / pi)
    over a band ``bandwidth`` (rad/ns) equals ``strain_std``."""
    return math.pi * strain_std**2 / bandwidth


@dataclass(frozen=True)
class ElectricDipoleComparison:
    qubit_dipole_debye: float
    tls_dipole_debye: float
    ratio: float
    coupling: float  # d_q E / hbar in rad/ns


def electric_dipole_comparison(field_amplitude, l_q=10e-6, tls_dipole_debye=1.0):
    """Qubit dipole 2 e L_q against a TLS dipole, and the qubit coupling
    d_q E / hbar (rad/ns) to a field of amplitude ``field_amplitude`` (V/m)."""
    if not field_amplitude >= 0:
        raise ValueError("field_amplitude must be >= 0")
    ch = SpuriousChannel("electric_dipole", l_q=l_q)
    dq = ch.qubit_dipole / units.DEBYE
    coupling = ch.qubit_dipole * field_amplitude / units.HBAR * 1e-9
    return ElectricDipoleComparison(dq, tls_dipole_debye, dq / tls_dipole_debye, coupling)
