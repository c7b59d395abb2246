"""Unit conventions.

Every quantity inside the package is an angular frequency in rad/ns (or its
inverse), with hbar = k_B = 1.  Constructors take laboratory units and
convert once through the helpers below.
"""

import math

from scipy import constants as _c

#: k_B / hbar in rad ns^-1 mK^-1
KB_OVER_HBAR_PER_MK = _c.k / _c.hbar * 1e-3 * 1e-9
#: eV / hbar in rad/ns
EV_OVER_HBAR = _c.e / _c.hbar * 1e-9
#: one Debye in C m
DEBYE = 1e-21 / _c.c
HBAR = _c.hbar
ELEMENTARY_CHARGE = _c.e
TWO_PI = 2.0 * math.pi


def mk_to_radns(temperature_mk):
    """Temperature in mK to an energy in rad/ns."""
    return temperature_mk * KB_OVER_HBAR_PER_MK


def radns_to_mk(energy):
    return energy / KB_OVER_HBAR_PER_MK


def kelvin_to_radns(temperature_k):
    return mk_to_radns(temperature_k * 1e3)


def ghz_to_radns(f_ghz):
    """Ordinary frequency in GHz to angular frequency in rad/ns (2*pi*f)."""
    return TWO_PI * f_ghz


def radns_to_ghz(omega):
    return omega / TWO_PI


def mhz_to_radns(f_mhz):
    return TWO_PI * f_mhz * 1e-3


def hz_to_radns(f_hz):
    return TWO_PI * f_hz * 1e-9


def radns_to_hz(omega):
    return omega / TWO_PI * 1e9


def ps2_to_ns2(j0_ps2):
    """Phonon coupling constant J0 from ps^2 to ns^2."""
    return j0_ps2 * 1e-6


def ev_to_radns(energy_ev):
    return energy_ev * EV_OVER_HBAR
