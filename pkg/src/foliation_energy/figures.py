"""Matplotlib rendering of the report and figure-data outputs.

Every CLI path that emits delimited data also renders the matching figure as
a PNG next to it. Rendering is headless (Agg) and deterministic: the PNG
metadata is pinned so identical inputs give identical bytes.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_PNG_META = {"Software": "foliation-energy"}


def _save(fig, path) -> None:
    fig.savefig(path, dpi=150, metadata=_PNG_META)
    plt.close(fig)


def render_arc_profile(thetas: np.ndarray, values: np.ndarray, lambdas, path) -> None:
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    for k, lam in enumerate(lambdas):
        ax.plot(thetas, values[:, k], label=f"aspect {lam:g}")
    ax.set_xlabel("theta")
    ax.set_ylabel("normalized arc length")
    ax.set_xlim(float(thetas[0]), float(thetas[-1]))
    ax.set_ylim(0.0, 1.0)
    ax.grid(alpha=0.3)
    ax.legend(loc="lower right")
    fig.tight_layout()
    _save(fig, path)


def render_energy_curve(lams: np.ndarray, energies: np.ndarray, path) -> None:
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    ax.plot(lams, energies, color="tab:blue")
    ax.set_xlabel("aspect")
    ax.set_ylabel("1-energy")
    ax.grid(alpha=0.3)
    fig.tight_layout()
    _save(fig, path)


def render_report(report, isometry_gap: float, path) -> None:
    labels = [item.label for item in report.per_label]
    estimates = [item.derivative for item in report.per_label]
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    ax.plot(labels, estimates, marker="o", ms=3, lw=1, color="tab:blue", label="derivative")
    ax.axhline(1.0, color="black", lw=0.8)
    ax.axhline(1.0 + report.tolerance, color="tab:red", lw=0.8, ls="--", label="tolerance")
    ax.set_xlabel("label")
    ax.set_ylabel(f"|grad f|_{report.p:g}")
    ax.set_title(
        f"energy {report.energy:.6f}, verdict {report.verdict}, isometry gap {isometry_gap:.2e}"
    )
    ax.grid(alpha=0.3)
    ax.legend(loc="best")
    fig.tight_layout()
    _save(fig, path)
