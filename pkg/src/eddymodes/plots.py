"""Figure rendering for the CLI report paths.

Every function writes a PNG next to the delimited output it illustrates.
matplotlib runs on the Agg backend so the CLI works headless.
"""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def save_drive_waveform(path, signal, t_end: float = 1.0, rate: float = 30000.0):
    from .network import eval_drive

    t = np.arange(0.0, t_end, 1.0 / rate)
    y = eval_drive(signal, t)
    fig, ax = plt.subplots(figsize=(8, 3))
    ax.plot(t, y, lw=0.4)
    ax.set_xlabel("t (s)")
    ax.set_ylabel("i (A)")
    ax.set_title(f"drive waveform, peak {y.max():.1f} A / {y.min():.1f} A")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_mode_spectrum(path, basis):
    fig, ax = plt.subplots(figsize=(6, 4))
    n = np.arange(1, basis.n_modes + 1)
    ax.semilogy(n, basis.tau, ".", ms=3)
    ax.set_xlabel("mode index")
    ax.set_ylabel("time constant (s)")
    ax.set_title("modal time constants")
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_signature_loci(path, signature, tones=None):
    """Normalized complex-plane loci, one panel per selected tone."""
    norm = signature.normalized()
    freqs = list(tones) if tones else list(norm.frequencies)
    if len(freqs) > 4:
        freqs = [freqs[0], freqs[-1]]
    fig, axes = plt.subplots(1, len(freqs), figsize=(4.2 * len(freqs), 4),
                             squeeze=False)
    for ax, f in zip(axes[0], freqs):
        pts = np.array([norm.entries[(a, f)] for a in norm.probe_angles])
        ax.plot(pts.real, pts.imag, ".-", ms=4, lw=0.8)
        ax.set_title(f"{f:g} Hz")
        ax.set_xlabel("Re")
        ax.set_ylabel("Im")
        ax.axhline(0, color="k", lw=0.3)
        ax.axvline(0, color="k", lw=0.3)
        ax.set_aspect("equal", "datalim")
    fig.suptitle("normalized signature loci")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_signature_magnitude(path, signature):
    fig, ax = plt.subplots(figsize=(6, 4))
    angles = np.array(signature.probe_angles)
    for f in (signature.frequencies[0], signature.frequencies[-1]):
        ax.plot(angles, signature.magnitude_by_angle(f), ".-", label=f"{f:g} Hz")
    ax.set_xlabel("probe angle (rad)")
    ax.set_ylabel("|dB| (T)")
    ax.legend()
    ax.set_title("signature magnitude over the probe arc")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_probe_trace(path, result, probe: int = 0):
    fig, ax = plt.subplots(figsize=(8, 3))
    b = result.probe_fields[:, probe, :]
    for c, lbl in enumerate("xyz"):
        ax.plot(result.times, b[:, c], lw=0.5, label=f"B{lbl}")
    ax.set_xlabel("t (s)")
    ax.set_ylabel("B (T)")
    ax.legend()
    ax.set_title(f"probe {probe} field trace ({result.method})")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_bench_scaling(path, rows, fits):
    """rows: (n0, method, setup_s, stepping_s, steps, per_step_s) tuples;
    fits: method -> (slope, intercept) of log per-step cost vs log n0."""
    fig, ax = plt.subplots(figsize=(6, 4))
    methods = sorted({r[1] for r in rows})
    for m in methods:
        pts = sorted((r[0], r[5]) for r in rows if r[1] == m)
        n = np.array([p[0] for p in pts], dtype=float)
        c = np.array([p[1] for p in pts])
        slope, intercept = fits[m]
        ax.loglog(n, c, "o", label=f"{m} (slope {slope:.2f})")
        ax.loglog(n, np.exp(intercept) * n ** slope, "--", lw=0.8)
    ax.set_xlabel("internal unknowns")
    ax.set_ylabel("per-step cost (s)")
    ax.legend()
    ax.grid(True, which="both", alpha=0.3)
    ax.set_title("per-step cost scaling")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
