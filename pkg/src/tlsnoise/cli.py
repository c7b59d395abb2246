"""Command-line experiment runner: one subcommand per dataset.

Every run writes a CSV whose '#' header echoes the resolved configuration,
unit conventions, seed, package version and a hash of the configuration.
Rows are deterministic for a given configuration and seed.
"""

import argparse
import csv
import hashlib
import io
import json
import math
import os
import sys
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import __version__, units
from .ensemble import (EnsembleSpec, make_rng, mean_gamma1, sample_tls_arrays,
                       var_gamma1_ens)
from .errors import ConvergenceError, QuadratureError
from .lowfreq import (calibrate_n_tls, dephasing_envelope, low_freq_spectrum, omega_ir,
                      one_over_f_upper, s_low, white_level)
from .physcore import BathSpec
from .protocol import AppliedNoise, stabilization_sweep
from .specdiff import SpectralDiffusionSpec, var_spd_ensemble
from .transmon import (STRAIN_CHANNELS, SpuriousChannel, TransmonSpec, charge_dispersion_slope,
                       dephasing_limit, depolarization_saturation, diagonalize,
                       strain_std_to_s_add)

EXPERIMENTS = ("deviation", "stabilization", "spectra", "coherence", "spurious", "spectrum",
               "sample")
EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3
THREADS_ENV = "TLSNOISE_THREADS"

# key -> (kind, default); kinds: float, int, bool, str, floats, ints, strs
SCHEMA = {
    "physics.temperature_mk": ("float", 20.0),
    "physics.j0_ps2": ("float", 0.047),
    "physics.omega_d_ghz": ("float", 1000.0),
    "physics.gamma_phi_mhz": ("float", 10.0),
    "ensemble.alpha": ("int", 1),
    "ensemble.eps_min_k": ("float", 0.0),
    "ensemble.eps_max_k": ("float", 4.0),
    "ensemble.delta_min_k": ("float", 2e-6),
    "ensemble.delta_max_k": ("float", 4.0),
    "qubit.omega_q_ghz": ("float", 5.7),
    "qubit.kappa_m1": ("float", 1.0),
    "specdiff.g_mhz": ("float", 1.0),
    "numerics.epsrel": ("float", 1e-6),
    "numerics.sweep_epsrel": ("float", 1e-5),
    "deviation.f_min_ghz": ("float", 4.0),
    "deviation.f_max_ghz": ("float", 8.0),
    "deviation.points": ("int", 9),
    "deviation.alphas": ("ints", [0, 1]),
    "stabilization.amplitudes_ghz": ("floats", [float(x) for x in np.logspace(-3, 0, 13)]),
    "stabilization.alphas": ("ints", [1]),
    "stabilization.dipole_average": ("bool", True),
    "stabilization.cutoff_factor": ("float", 1.0),
    "stabilization.tlf_window": ("float", 3.0),
    "lowfreq.target_a": ("float", 1e-3),
    "lowfreq.charge_factor": ("float", 1.0),
    "lowfreq.d2_eta": ("float", 1.0),
    "spectra.f_min_hz": ("float", 1e-12),
    "spectra.f_max_hz": ("float", 1e6),
    "spectra.points_per_decade": ("int", 4),
    "spectra.cutoffs_ghz": ("floats", [1.0, 5.0]),
    "spectra.characters": ("strs", ["quantum", "classical"]),
    "coherence.omega_min_radns": ("float", 1e-10),
    "coherence.omega_max_radns": ("float", 1e3),
    "coherence.points_per_decade": ("int", 8),
    "coherence.t_min_us": ("float", 1.0),
    "coherence.t_max_us": ("float", 1e5),
    "coherence.points": ("int", 101),
    "coherence.t_total_s": ("float", 1.0),
    "coherence.quantum_cutoffs_ghz": ("floats", [5.0]),
    "coherence.classical_cutoffs_ghz": ("floats", [0.3, 1.0, 5.0]),
    "transmon.ec_ghz": ("float", 0.3),
    "transmon.ej_ghz": ("float", 15.0),
    "transmon.n_cut": ("int", 15),
    "spurious.strain_std_min": ("float", 1e-9),
    "spurious.strain_std_max": ("float", 1e-6),
    "spurious.points": ("int", 7),
    "spurious.bandwidth_ghz": ("float", 1.0),
    "spurious.cutoffs_ghz": ("floats", [1.0, 5.0]),
    "spectrum.f_min_hz": ("float", 1e-9),
    "spectrum.f_max_hz": ("float", 1e6),
    "spectrum.points_per_decade": ("int", 4),
    "spectrum.method": ("str", "quadrature"),
    "sample.n": ("int", 10000),
    "run.seed": ("int", 0),
    "run.threads": ("int", 1),
}

UNITS = ("angular frequencies and rates in rad/ns; spectra in ns; hbar = k_B = 1; "
         "*_ghz / *_hz columns are f = omega / 2pi; k_B/hbar = "
         f"{units.KB_OVER_HBAR_PER_MK:.6f} rad/ns/mK")
CONVENTIONS = ("applied-noise amplitude is the symmetrized spectrum [S(w) + S(-w)] / 2 "
               "seen by a unit coupling d; d^2 S_add in GHz means 2pi rad/ns; "
               "d^2 eta is dimensionless (unit coupling, eta in ns^2)")

COLUMNS = {
    "deviation": ["omega_q_ghz", "alpha", "quantity", "numeric", "analytic", "rel_dev"],
    "stabilization": ["alpha", "d2sadd_ghz", "omega_c_ghz", "mean_ratio", "var_ens_ratio",
                      "var_spd_ratio", "g2_factor"],
    "spectra": ["case", "cutoff_ghz", "freq_hz", "omega", "s_ng", "regime"],
    "coherence": ["case", "cutoff_ghz", "time_us", "envelope", "t_phi_us"],
    "spurious": ["channel", "strain_std", "s_add", "cutoff_ghz", "t_phi_limit_ms", "rho_g"],
    "spectrum": ["freq_hz", "omega", "s_low", "method"],
    "sample": ["index", "epsilon", "delta", "omega_t", "theta"],
}


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending key."""


@dataclass
class RunConfig:
    experiment: str
    values: dict = field(default_factory=dict)
    out: Path = None
    threads: int = 1
    figure: bool = True

    def __getitem__(self, key):
        return self.values[key]

    @property
    def seed(self):
        return self.values["run.seed"]

    def resolved(self):
        """Canonical, hashable view of everything that can change the output."""
        return {"experiment": self.experiment,
                **{k: v for k, v in self.values.items() if k != "run.threads"}}

    def config_hash(self):
        blob = json.dumps(self.resolved(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


# ------------------------------------------------------------------ config


def _flatten(tree, prefix=""):
    flat = {}
    for k, v in tree.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            flat.update(_flatten(v, key + "."))
        else:
            flat[key] = v
    return flat


def _coerce(key, kind, value):
    def num(v, integer):
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ConfigError(f"{key}: expected a number, got {v!r}")
        if integer:
            if isinstance(v, float) and not v.is_integer():
                raise ConfigError(f"{key}: expected an integer, got {v!r}")
            return int(v)
        return float(v)

    if kind in ("float", "int"):
        return num(value, kind == "int")
    if kind == "bool":
        if not isinstance(value, bool):
            raise ConfigError(f"{key}: expected true or false, got {value!r}")
        return value
    if kind == "str":
        if not isinstance(value, str):
            raise ConfigError(f"{key}: expected a string, got {value!r}")
        return value
    if not isinstance(value, list):
        raise ConfigError(f"{key}: expected a list, got {value!r}")
    if kind == "strs":
        return [_coerce(key, "str", v) for v in value]
    return [num(v, kind == "ints") for v in value]


def load_config(path=None, overrides=None):
    """Defaults, then the TOML file at ``path``, then ``overrides`` (flat keys)."""
    values = {k: d for k, (_, d) in SCHEMA.items()}
    given = {}
    if path is not None:
        try:
            with open(path, "rb") as fh:
                given = _flatten(tomllib.load(fh))
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"config {path} is not valid TOML: {exc}") from exc
    given.update(overrides or {})
    for key, value in given.items():
        if key not in SCHEMA:
            raise ConfigError(f"{key}: unknown configuration key")
        values[key] = _coerce(key, SCHEMA[key][0], value)
    return values


def _require(ok, key, msg):
    if not ok:
        raise ConfigError(f"{key}: {msg}")


def check_values(v):
    """Range checks that the model constructors would otherwise report less clearly."""
    _require(v["ensemble.alpha"] in (0, 1), "ensemble.alpha", "alpha must be 0 or 1")
    for a in v["deviation.alphas"] + v["stabilization.alphas"]:
        _require(a in (0, 1), "alphas", "alpha must be 0 or 1")
    _require(v["physics.temperature_mk"] > 0, "physics.temperature_mk",
             "temperature must be > 0 (thermal factors need a finite beta)")
    for key in ("physics.j0_ps2", "physics.omega_d_ghz", "qubit.omega_q_ghz",
                "transmon.ec_ghz", "lowfreq.target_a", "lowfreq.charge_factor",
                "lowfreq.d2_eta", "numerics.epsrel", "numerics.sweep_epsrel",
                "spurious.bandwidth_ghz", "coherence.t_total_s", "sample.n"):
        _require(v[key] > 0, key, "must be > 0")
    _require(v["physics.gamma_phi_mhz"] >= 0, "physics.gamma_phi_mhz", "must be >= 0")
    _require(v["deviation.points"] >= 0, "deviation.points", "must be >= 0")
    _require(all(a >= 0 for a in v["stabilization.amplitudes_ghz"]),
             "stabilization.amplitudes_ghz", "amplitudes must be >= 0")
    for c in v["spectra.characters"]:
        _require(c in ("quantum", "classical"), "spectra.characters",
                 f"unknown noise character {c!r}")
    _require(v["spectrum.method"] in ("quadrature", "semianalytic", "closed_form"),
             "spectrum.method", "must be quadrature, semianalytic or closed_form")
    _require(0 <= v["run.seed"] < 2**64, "run.seed", "seed must be an unsigned 64-bit integer")
    _require(v["run.threads"] >= 1, "run.threads", "must be >= 1")
    for lo, hi in (("spectra.f_min_hz", "spectra.f_max_hz"),
                   ("spectrum.f_min_hz", "spectrum.f_max_hz"),
                   ("coherence.t_min_us", "coherence.t_max_us"),
                   ("coherence.omega_min_radns", "coherence.omega_max_radns"),
                   ("spurious.strain_std_min", "spurious.strain_std_max")):
        _require(0 < v[lo] < v[hi], lo, f"need 0 < {lo} < {hi}")


def bath_of(v):
    return BathSpec.from_lab(v["physics.j0_ps2"], v["physics.temperature_mk"],
                             v["physics.omega_d_ghz"], v["physics.gamma_phi_mhz"])


def ensemble_of(v, alpha=None):
    try:
        return EnsembleSpec.from_lab(v["ensemble.alpha"] if alpha is None else alpha,
                                     v["ensemble.eps_min_k"], v["ensemble.eps_max_k"],
                                     v["ensemble.delta_min_k"], v["ensemble.delta_max_k"])
    except ValueError as exc:
        raise ConfigError(f"ensemble: {exc}") from exc


def transmon_of(v):
    try:
        return TransmonSpec.from_ghz(v["transmon.ec_ghz"], v["transmon.ej_ghz"],
                                     n_cut=v["transmon.n_cut"])
    except ValueError as exc:
        raise ConfigError(f"transmon: {exc}") from exc


# ------------------------------------------------------------- experiments


def _log_grid(lo, hi, per_decade):
    n = max(2, int(round(per_decade * math.log10(hi / lo))) + 1)
    return np.logspace(math.log10(lo), math.log10(hi), n)


def run_deviation(cfg):
    v = cfg.values
    bath = bath_of(v)
    kappa, eps = v["qubit.kappa_m1"], v["numerics.epsrel"]
    sd = SpectralDiffusionSpec(g_squared=units.mhz_to_radns(v["specdiff.g_mhz"]) ** 2)
    n = v["deviation.points"]
    freqs = np.linspace(v["deviation.f_min_ghz"], v["deviation.f_max_ghz"], n) if n else []
    rows = []
    for alpha in v["deviation.alphas"]:
        spec = ensemble_of(v, alpha)
        for f in freqs:
            wq = units.ghz_to_radns(f)
            pairs = [
                ("mean_gamma1",
                 mean_gamma1(spec, bath, wq, kappa, epsrel=eps).mean_gamma1,
                 mean_gamma1(spec, bath, wq, kappa, "closed_form").mean_gamma1),
                ("var_ens",
                 var_gamma1_ens(spec, bath, wq, kappa, epsrel=eps).var_gamma1_ens,
                 var_gamma1_ens(spec, bath, wq, kappa, "closed_form").var_gamma1_ens),
                ("var_spd",
                 var_spd_ensemble(spec, bath, wq, kappa, sd, epsrel=eps),
                 var_spd_ensemble(spec, bath, wq, kappa, sd, "closed_form")),
            ]
            for qty, num, ana in pairs:
                rows.append(dict(omega_q_ghz=float(f), alpha=alpha, quantity=qty,
                                 numeric=num, analytic=ana, rel_dev=(num - ana) / ana))
    return rows


def run_stabilization(cfg):
    v = cfg.values
    bath = bath_of(v)
    wq = units.ghz_to_radns(v["qubit.omega_q_ghz"])
    sd = SpectralDiffusionSpec(g_squared=units.mhz_to_radns(v["specdiff.g_mhz"]) ** 2)
    amps = v["stabilization.amplitudes_ghz"]
    rows = []
    for alpha in v["stabilization.alphas"]:
        points = stabilization_sweep(
            ensemble_of(v, alpha), bath, wq, sd, [units.ghz_to_radns(a) for a in amps],
            kappa_m1=v["qubit.kappa_m1"],
            dipole_average=v["stabilization.dipole_average"],
            cutoff_factor=v["stabilization.cutoff_factor"],
            tlf_window=v["stabilization.tlf_window"],
            epsrel=v["numerics.sweep_epsrel"], threads=cfg.threads)
        for a, p in zip(amps, points):
            rows.append(dict(alpha=alpha, d2sadd_ghz=a, omega_c_ghz=units.radns_to_ghz(p.omega_c),
                             mean_ratio=p.mean_ratio, var_ens_ratio=p.var_ens_ratio,
                             var_spd_ratio=p.var_spd_ratio, g2_factor=p.g2_factor))
    return rows


def _lowfreq_setup(v):
    spec, bath = ensemble_of(v, 1), bath_of(v)
    n_tls = calibrate_n_tls(v["lowfreq.target_a"], spec, bath, v["lowfreq.charge_factor"])
    return spec, bath, n_tls


def _noise_cases(v, bath, quantum, classical):
    cases = [("none", 0.0, None)]
    for character, cutoffs in (("quantum", quantum), ("classical", classical)):
        for wc in cutoffs:
            cases.append((character, wc, AppliedNoise(
                "ohmic", v["lowfreq.d2_eta"], units.ghz_to_radns(wc), character,
                bath.temperature if character == "quantum" else None)))
    return cases


def run_spectra(cfg):
    v = cfg.values
    spec, bath, n_tls = _lowfreq_setup(v)
    freqs = _log_grid(v["spectra.f_min_hz"], v["spectra.f_max_hz"],
                      v["spectra.points_per_decade"])
    omega = units.hz_to_radns(freqs)
    chars = v["spectra.characters"]
    cuts = v["spectra.cutoffs_ghz"]
    rows = []
    for case, wc, noise in _noise_cases(v, bath, cuts if "quantum" in chars else [],
                                        cuts if "classical" in chars else []):
        sp = low_freq_spectrum(omega, spec, bath, n_tls, noise,
                               charge_factor=v["lowfreq.charge_factor"],
                               epsrel=v["numerics.sweep_epsrel"])
        for f, w, s, reg in zip(freqs, omega, sp.s_ng, sp.regimes):
            rows.append(dict(case=case, cutoff_ghz=wc, freq_hz=float(f), omega=float(w),
                             s_ng=float(s), regime=reg))
    return rows


def run_coherence(cfg):
    v = cfg.values
    spec, bath, n_tls = _lowfreq_setup(v)
    m = charge_dispersion_slope(transmon_of(v))
    grid = _log_grid(v["coherence.omega_min_radns"], v["coherence.omega_max_radns"],
                     v["coherence.points_per_decade"])
    times = np.logspace(math.log10(v["coherence.t_min_us"] * 1e3),
                        math.log10(v["coherence.t_max_us"] * 1e3), v["coherence.points"])
    rows = []
    for case, wc, noise in _noise_cases(v, bath, v["coherence.quantum_cutoffs_ghz"],
                                        v["coherence.classical_cutoffs_ghz"]):
        sp = low_freq_spectrum(grid, spec, bath, n_tls, noise,
                               charge_factor=v["lowfreq.charge_factor"],
                               epsrel=v["numerics.sweep_epsrel"])
        try:
            curve = dephasing_envelope(sp, m, times, t_total=v["coherence.t_total_s"] * 1e9)
        except ValueError as exc:
            raise ConfigError(f"coherence: {exc}") from exc
        for t, e in zip(curve.times, curve.envelope):
            rows.append(dict(case=case, cutoff_ghz=wc, time_us=float(t) * 1e-3,
                             envelope=float(e), t_phi_us=curve.t_phi * 1e-3))
    return rows


def run_spurious(cfg):
    v = cfg.values
    tr = transmon_of(v)
    bandwidth = units.ghz_to_radns(v["spurious.bandwidth_ghz"])
    stds = np.logspace(math.log10(v["spurious.strain_std_min"]),
                       math.log10(v["spurious.strain_std_max"]), v["spurious.points"])
    w01 = diagonalize(tr).omega01
    for wc in v["spurious.cutoffs_ghz"]:
        _require(0 < units.ghz_to_radns(wc) < w01, "spurious.cutoffs_ghz",
                 f"cutoff {wc} GHz must lie below the qubit frequency "
                 f"{units.radns_to_ghz(w01):.4g} GHz")
    rows = []
    for kind in STRAIN_CHANNELS:
        ch = SpuriousChannel(kind)
        for sigma in stds:
            s_add = strain_std_to_s_add(float(sigma), bandwidth)
            t_phi = dephasing_limit(ch, tr, s_add) * 1e-6
            for wc in v["spurious.cutoffs_ghz"]:
                rho = depolarization_saturation(ch, tr, s_add, units.ghz_to_radns(wc))
                rows.append(dict(channel=kind, strain_std=float(sigma), s_add=s_add,
                                 cutoff_ghz=wc, t_phi_limit_ms=t_phi, rho_g=rho))
    return rows


def run_spectrum(cfg):
    v = cfg.values
    spec, bath, n_tls = _lowfreq_setup(v)
    freqs = _log_grid(v["spectrum.f_min_hz"], v["spectrum.f_max_hz"],
                      v["spectrum.points_per_decade"])
    omega = units.hz_to_radns(freqs)
    method = v["spectrum.method"]
    vals = np.atleast_1d(s_low(omega, spec, bath, n_tls, method, epsrel=v["numerics.epsrel"]))
    return [dict(freq_hz=float(f), omega=float(w), s_low=float(s), method=method)
            for f, w, s in zip(freqs, omega, vals)]


def run_sample(cfg):
    v = cfg.values
    spec = ensemble_of(v)
    eps, delta = sample_tls_arrays(spec, make_rng(cfg.seed), v["sample.n"])
    om = np.hypot(eps, delta)
    th = np.arctan2(delta, eps)
    return [dict(index=i, epsilon=float(e), delta=float(d), omega_t=float(w), theta=float(t))
            for i, (e, d, w, t) in enumerate(zip(eps, delta, om, th))]


RUNNERS = {
    "deviation": run_deviation,
    "stabilization": run_stabilization,
    "spectra": run_spectra,
    "coherence": run_coherence,
    "spurious": run_spurious,
    "spectrum": run_spectrum,
    "sample": run_sample,
}


# ------------------------------------------------------------------ output


def _fmt(x):
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def render_csv(cfg, rows):
    """CSV text with the provenance header; LF line endings, fixed column order."""
    buf = io.StringIO(newline="")
    header = [
        f"tlsnoise {__version__}",
        f"experiment: {cfg.experiment}",
        f"seed: {cfg.seed}",
        f"config_sha256: {cfg.config_hash()}",
        "config: " + json.dumps(cfg.resolved(), sort_keys=True),
        f"units: {UNITS}",
        f"conventions: {CONVENTIONS}",
    ]
    for line in header:
        buf.write(f"# {line}\n")
    writer = csv.writer(buf, lineterminator="\n")
    cols = COLUMNS[cfg.experiment]
    writer.writerow(cols)
    for r in rows:
        writer.writerow([_fmt(r[c]) for c in cols])
    return buf.getvalue()


def write_atomic(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def run(cfg):
    """Run one experiment, write its CSV (and PNG), return the rows."""
    check_values(cfg.values)
    rows = RUNNERS[cfg.experiment](cfg)
    out = Path(cfg.out or f"{cfg.experiment}.csv")
    write_atomic(out, render_csv(cfg, rows))
    if cfg.figure and rows:
        from .plotting import PLOTTERS
        PLOTTERS[cfg.experiment](rows, out.with_suffix(".png"))
    return rows


# -------------------------------------------------------------- validate


_TESTED_RANGES = {
    "physics.temperature_mk": (10.0, 50.0),
    "qubit.omega_q_ghz": (4.0, 8.0),
    "physics.j0_ps2": (0.047, 0.047),
    "physics.gamma_phi_mhz": (10.0, 10.0),
    "ensemble.eps_max_k": (4.0, 4.0),
    "ensemble.delta_min_k": (2e-6, 2e-6),
    "ensemble.delta_max_k": (4.0, 4.0),
    "transmon.ec_ghz": (0.3, 0.3),
    "transmon.ej_ghz": (15.0, 15.0),
}


def validate_report(values):
    """Human-readable report of conversions and derived quantities."""
    check_values(values)
    v = values
    bath = bath_of(v)
    spec = ensemble_of(v)
    lines = ["unit conversions:"]
    lines.append(f"  k_B T = {bath.temperature:.6g} rad/ns  (T = {v['physics.temperature_mk']} mK)")
    lines.append(f"  J0 = {bath.j0:.6g} ns^2")
    lines.append(f"  omega_D = {bath.omega_d:.6g} rad/ns")
    lines.append(f"  gamma_phi = {bath.gamma_phi_const:.6g} rad/ns")
    lines.append(f"  omega_q = {units.ghz_to_radns(v['qubit.omega_q_ghz']):.6g} rad/ns")
    lines.append(f"  box: eps in [{spec.eps_min:.6g}, {spec.eps_max:.6g}], "
                 f"Delta in [{spec.delta_min:.6g}, {spec.delta_max:.6g}] rad/ns")
    lines.append("derived quantities:")
    lines.append(f"  alpha = {spec.alpha}")
    lines.append(f"  1/N = {spec.inverse_normalization:.6g} (rad/ns)^{spec.alpha + 1}")
    lines.append(f"  N = {spec.normalization:.6g}")
    if spec.alpha == 1:
        n_tls = calibrate_n_tls(v["lowfreq.target_a"], spec, bath, v["lowfreq.charge_factor"])
        lines.append(f"  omega_ir = {omega_ir(spec, bath):.6g} rad/ns")
        lines.append(f"  gamma_1,M = {one_over_f_upper(bath):.6g} rad/ns")
        lines.append(f"  N_TLS (A = {v['lowfreq.target_a']:g}) = {n_tls:.6g}")
        lines.append(f"  white level = {white_level(spec, bath, n_tls):.6g} ns")
    else:
        lines.append("  omega_ir, N_TLS: not defined for alpha = 0")
    warn = []
    for key, (lo, hi) in _TESTED_RANGES.items():
        if not lo * (1 - 1e-12) <= v[key] <= hi * (1 + 1e-12):
            rng = f"{lo:g}" if lo == hi else f"[{lo:g}, {hi:g}]"
            warn.append(f"  {key} = {v[key]:g} is outside the tested value {rng}")
    lines.append("outside tested ranges:" if warn else "outside tested ranges: none")
    lines.extend(warn)
    return "\n".join(lines) + "\n"


# ------------------------------------------------------------------- main


def _resolve_threads(arg, config_value):
    if arg is not None:
        return arg
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ConfigError(f"{THREADS_ENV}: expected an integer, got {env!r}") from None
        if n < 1:
            raise ConfigError(f"{THREADS_ENV}: must be >= 1")
        return n
    return config_value


def build_parser():
    p = argparse.ArgumentParser(prog="tlsnoise",
                                description="TLS-ensemble noise experiments written as CSV.")
    sub = p.add_subparsers(dest="command", required=True)
    for name in EXPERIMENTS + ("validate",):
        sp = sub.add_parser(name)
        sp.add_argument("--config", type=Path, help="TOML file with flat dotted keys")
        sp.add_argument("--out", type=Path, help="output CSV path (default <experiment>.csv)")
        sp.add_argument("--seed", type=int, help="RNG seed, unsigned 64-bit")
        sp.add_argument("--threads", type=int, help=f"worker threads (overrides {THREADS_ENV})")
        sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override one config key; VALUE is parsed as TOML")
        if name != "validate":
            sp.add_argument("--no-figure", action="store_true", help="skip the PNG figure")
    return p


def _parse_sets(items):
    out = {}
    for item in items:
        key, sep, raw = item.partition("=")
        if not sep:
            raise ConfigError(f"--set {item!r}: expected KEY=VALUE")
        try:
            out[key.strip()] = tomllib.loads(f"v = {raw}")["v"]
        except tomllib.TOMLDecodeError:
            out[key.strip()] = raw
    return out


def _origin(exc):
    """Deepest package module on the traceback, skipping the shared integrator."""
    name = "tlsnoise"
    tb = exc.__traceback__
    while tb is not None:
        mod = tb.tb_frame.f_globals.get("__name__", "")
        if mod.startswith("tlsnoise.") and mod not in ("tlsnoise.integrate", "tlsnoise.cli"):
            name = mod
        tb = tb.tb_next
    return name


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        overrides = _parse_sets(args.set)
        if args.seed is not None:
            overrides["run.seed"] = args.seed
        values = load_config(args.config, overrides)
        if args.threads is not None and args.threads < 1:
            raise ConfigError("--threads: must be >= 1")
        if args.command == "validate":
            report = validate_report(values)
            if args.out:
                write_atomic(args.out, report)
            sys.stdout.write(report)
            return EXIT_OK
        cfg = RunConfig(args.command, values, args.out,
                        _resolve_threads(args.threads, values["run.threads"]),
                        not args.no_figure)
        rows = run(cfg)
    except ValueError as exc:  # ConfigError, or a model constructor rejecting a value
        print(f"tlsnoise: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (QuadratureError, ConvergenceError, FloatingPointError, ZeroDivisionError) as exc:
        print(f"tlsnoise: numerical failure in {_origin(exc)} ({type(exc).__name__}): {exc}",
              file=sys.stderr)
        return EXIT_NUMERICAL
    print(f"wrote {len(rows)} rows to {cfg.out or cfg.experiment + '.csv'}", file=sys.stderr)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
