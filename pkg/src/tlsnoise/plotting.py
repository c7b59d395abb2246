"""Figures rendered next to the CLI's CSV output (the CSV stays the contract)."""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def _groups(rows, *keys):
    out = {}
    for r in rows:
        out.setdefault(tuple(r[k] for k in keys), []).append(r)
    return out


def plot_deviation(rows, path):
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for (alpha, qty), grp in sorted(_groups(rows, "alpha", "quantity").items()):
        ls = "-" if alpha == 1 else "--"
        ax.plot([r["omega_q_ghz"] for r in grp], [100 * r["rel_dev"] for r in grp], ls,
                label=f"{qty}, alpha={alpha}")
    ax.axhline(0, color="0.6", lw=0.8)
    ax.set_xlabel("qubit frequency (GHz)")
    ax.set_ylabel("numeric vs closed form (%)")
    ax.legend(fontsize=7)
    _save(fig, path)


def plot_stabilization(rows, path):
    fig, ax = plt.subplots(figsize=(5, 3.5))
    colors = {"mean_ratio": "C0", "var_ens_ratio": "C1", "var_spd_ratio": "C2"}
    for (alpha,), grp in sorted(_groups(rows, "alpha").items()):
        ls = "-" if alpha == 1 else "--"
        x = [r["d2sadd_ghz"] for r in grp]
        for key, c in colors.items():
            ax.plot(x, [r[key] for r in grp], ls, color=c,
                    label=key if alpha == 1 else None)
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("noise strength d^2 S_add (GHz)")
    ax.set_ylabel("off / on")
    ax.legend(fontsize=7)
    _save(fig, path)


def plot_spectra(rows, path):
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for (case, wc), grp in _groups(rows, "case", "cutoff_ghz").items():
        ls = "--" if case == "classical" else "-"
        label = case if case == "none" else f"{case}, {wc:g} GHz"
        ax.loglog([r["freq_hz"] for r in grp], [r["s_ng"] for r in grp], ls, label=label)
    ax.set_xlabel("frequency (Hz)")
    ax.set_ylabel("S_ng (ns)")
    ax.legend(fontsize=7)
    _save(fig, path)


def plot_coherence(rows, path):
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for (case, wc), grp in _groups(rows, "case", "cutoff_ghz").items():
        ls = "--" if case == "classical" else "-"
        label = case if case == "none" else f"{case}, {wc:g} GHz"
        ax.semilogx([r["time_us"] for r in grp], [r["envelope"] for r in grp], ls, label=label)
    ax.set_xlabel("time (us)")
    ax.set_ylabel("coherence")
    ax.legend(fontsize=7)
    _save(fig, path)


def plot_spurious(rows, path):
    fig, (a1, a2) = plt.subplots(1, 2, figsize=(8, 3.5))
    for (ch, wc), grp in _groups(rows, "channel", "cutoff_ghz").items():
        x = [r["strain_std"] for r in grp]
        ls = "-" if wc >= 5 else "--"
        a2.loglog(x, [max(r["rho_g"], 1e-300) for r in grp], ls, label=f"{ch}, {wc:g} GHz")
        if wc == min(r2["cutoff_ghz"] for r2 in rows):
            a1.loglog(x, [r["t_phi_limit_ms"] for r in grp], label=ch)
    a1.set_xlabel("strain standard deviation")
    a1.set_ylabel("T_phi limit (ms)")
    a2.set_xlabel("strain standard deviation")
    a2.set_ylabel("ground-state population")
    a1.legend(fontsize=7)
    a2.legend(fontsize=6)
    _save(fig, path)


def plot_spectrum(rows, path):
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.loglog([r["freq_hz"] for r in rows], [r["s_low"] for r in rows])
    ax.set_xlabel("frequency (Hz)")
    ax.set_ylabel("S_low (ns)")
    _save(fig, path)


def plot_sample(rows, path):
    fig, ax = plt.subplots(figsize=(4.5, 4))
    ax.loglog([r["epsilon"] for r in rows], [r["delta"] for r in rows], ".", ms=2)
    ax.set_xlabel("epsilon (rad/ns)")
    ax.set_ylabel("Delta (rad/ns)")
    _save(fig, path)


PLOTTERS = {
    "deviation": plot_deviation,
    "stabilization": plot_stabilization,
    "spectra": plot_spectra,
    "coherence": plot_coherence,
    "spurious": plot_spurious,
    "spectrum": plot_spectrum,
    "sample": plot_sample,
}
