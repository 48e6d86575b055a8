"""Static figures for sweep reports."""
from __future__ import annotations

import csv
import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

RATE_PANELS = [
    ("max_grad_neck", r"$\max_{\Omega_R}|\nabla u|$", -0.5),
    ("pressure_osc", r"pressure oscillation", -1.0),
    ("max_stress", r"$\max_{\Omega_R}|\sigma|$", -0.5),
    ("second_derivative_proxy", r"$|\nabla^2 u|$ proxy", -1.5),
]


def read_sweep_csv(path) -> dict:
    with open(path) as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ValueError(f"{path} has no data rows")
    return {k: np.array([float(r[k]) for r in rows]) for k in rows[0]}


def _reference_line(ax, eps, values, slope):
    e0, v0 = eps[0], values[0]
    ax.loglog(eps, v0 * (eps / e0) ** slope, "k--", lw=0.8, label=f"slope {slope:g}")


def rate_figure(data: dict, path) -> str:
    eps = data["epsilon"]
    fig, axes = plt.subplots(2, 2, figsize=(8, 6.5))
    for ax, (key, label, slope) in zip(axes.ravel(), RATE_PANELS):
        if key not in data:
            ax.set_visible(False)
            continue
        vals = data[key]
        ax.loglog(eps, vals, "o-", label=label)
        if np.all(vals > 0):
            _reference_line(ax, eps, vals, slope)
        ax.set_xlabel(r"$\varepsilon$")
        ax.legend(fontsize=8)
        ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return str(path)


def interaction_figure(data: dict, path) -> str:
    eps = data["epsilon"]
    fig, ax = plt.subplots(figsize=(5.5, 4))
    ax.semilogx(eps, data["a11_11"] * np.sqrt(eps), "o-", label=r"$a_{11}^{11}\sqrt{\varepsilon}$")
    ax.semilogx(eps, data["a11_22"] * eps**1.5, "s-", label=r"$a_{11}^{22}\varepsilon^{3/2}$")
    ax.semilogx(eps, data["a11_33"] * np.sqrt(eps), "^-", label=r"$a_{11}^{33}\sqrt{\varepsilon}$")
    ax.set_xlabel(r"$\varepsilon$")
    ax.set_ylabel("normalized entry")
    ax.legend(fontsize=8)
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return str(path)


def floor_figure(data: dict, path) -> str:
    eps = data["epsilon"]
    fig, ax = plt.subplots(figsize=(5.5, 4))
    ax.semilogx(eps, data["grad_floor"], "o-", label=r"$\min \sqrt{\varepsilon}|\nabla u(0,x_2)|$")
    ax.semilogx(eps, data["stress_floor"], "s-", label=r"$\min \sqrt{\varepsilon}|\sigma(0,x_2)|$")
    ax.set_ylim(bottom=0)
    ax.set_xlabel(r"$\varepsilon$")
    ax.legend(fontsize=8)
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return str(path)


def render_report(directory) -> list[str]:
    """Render all figures for a sweep directory; returns the written paths."""
    data = read_sweep_csv(os.path.join(directory, "sweep.csv"))
    return [
        rate_figure(data, os.path.join(directory, "rates.png")),
        interaction_figure(data, os.path.join(directory, "interaction.png")),
        floor_figure(data, os.path.join(directory, "lower_bound.png")),
    ]
