"""Matplotlib figure rendering for experiment reports.

Figures are written next to the report files; they visualize per-trial
fidelities, the spectra of the estimated versus ideal reduced operators,
and the measurement budget relative to full tomography.
"""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def render_experiment_figures(report, out_dir):
    """Write the standard experiment figures; returns the file paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    paths.append(_fidelity_figure(report, out_dir / "fidelity.png"))
    paths.append(_residual_figure(report, out_dir / "residuals.png"))
    paths.append(_spectra_figure(report, out_dir / "rdm_spectra.png"))
    paths.append(_budget_figure(report, out_dir / "measurement_budget.png"))
    return [p for p in paths if p is not None]


def _fidelity_figure(report, path):
    trials = report["trials"]
    fids = [t["fidelity_vs_truth"] for t in trials]
    if any(f is None for f in fids):
        return None
    fig, ax = plt.subplots(figsize=(6, 3.5))
    xs = np.arange(1, len(fids) + 1)
    ax.bar(xs, 1.0 - np.asarray(fids), color="#33557f")
    ax.set_yscale("log")
    ax.set_xlabel("trial")
    ax.set_ylabel("infidelity")
    ax.set_title(f"N={report['config']['qudits']}, d={report['config']['qudit_dim']}, "
                 f"shots={report['config']['shots']}")
    ax.set_xticks(xs)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def _residual_figure(report, path):
    trials = report["trials"]
    res = [t["rdm_residual"] for t in trials]
    fig, ax = plt.subplots(figsize=(6, 3.5))
    xs = np.arange(1, len(res) + 1)
    ax.plot(xs, res, "o-", color="#7f3355")
    ax.set_yscale("log")
    ax.set_xlabel("trial")
    ax.set_ylabel("reduced-operator residual")
    ax.set_title("reconstruction residual per trial")
    ax.set_xticks(xs)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def _spectra_figure(report, path):
    spectra = report.get("last_trial_spectra")
    if not spectra:
        return None
    fig, axes = plt.subplots(1, 2, figsize=(8, 3.5), sharey=True)
    for ax, key, title in ((axes[0], "ab", "parties (A,B)"), (axes[1], "ac", "parties (A,C)")):
        est = spectra[f"estimated_{key}"]
        ideal = spectra[f"ideal_{key}"]
        xs = np.arange(1, len(est) + 1)
        ax.plot(xs, ideal, "s--", label="ideal", color="#444444")
        ax.plot(xs, est, "o-", label="estimated", color="#33557f")
        ax.set_title(title)
        ax.set_xlabel("eigenvalue index")
    axes[0].set_ylabel("eigenvalue")
    axes[0].legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def _budget_figure(report, path):
    counts = report["measurements"]
    labels = ["two-RDM scheme", "deduplicated", "full tomography"]
    values = [counts["count"], counts["deduplicated"], counts["full_tomography"]]
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.bar(labels, values, color=["#33557f", "#557f33", "#7f3355"])
    ax.set_yscale("log")
    ax.set_ylabel("product observables")
    ax.set_title("measurement budget")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
