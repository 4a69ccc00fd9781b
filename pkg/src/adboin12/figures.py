"""Operating-characteristics figures rendered alongside the delimited output.

Four panels per figure, one per evaluation criterion: percentage of
correct selections, mean trial duration, patients at the correct dose,
and patients at overly toxic doses.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .simulate import DesignComparison, OperatingChars

PANELS = [
    ("pct_correct_obd", "Correct selection (%)"),
    ("mean_duration_months", "Trial duration (months)"),
    ("mean_n_at_correct_obd", "Patients at correct dose"),
    ("mean_n_at_toxic_doses", "Patients at toxic doses"),
]


def _short(name: str) -> str:
    return name.split("_")[0]


def save_comparison_figure(
    comparisons: list[DesignComparison], path: str, title: str = ""
) -> str:
    """Grouped-bar figure contrasting the adaptive and fixed designs."""
    labels = [_short(c.scenario) for c in comparisons]
    x = np.arange(len(labels))
    width = 0.38
    fig, axes = plt.subplots(2, 2, figsize=(12, 7), sharex=True)
    for ax, (field, ylabel) in zip(axes.flat, PANELS):
        ad_vals = [getattr(c.adaptive, field) for c in comparisons]
        base_vals = [getattr(c.base, field) for c in comparisons]
        ax.bar(x - width / 2, ad_vals, width, label="adaptive", color="#1f77b4")
        ax.bar(x + width / 2, base_vals, width, label="fixed", color="#bbbbbb")
        ax.set_ylabel(ylabel)
        ax.set_xticks(x)
        ax.set_xticklabels(labels, rotation=60, fontsize=7)
    axes[0, 0].legend(loc="upper right", fontsize=8)
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def save_simulation_figure(
    results: list[tuple[str, OperatingChars]], path: str, title: str = ""
) -> str:
    """Single-design bar figure over a list of (scenario name, OC) pairs."""
    labels = [_short(name) for name, _ in results]
    x = np.arange(len(labels))
    fig, axes = plt.subplots(2, 2, figsize=(12, 7), sharex=True)
    for ax, (field, ylabel) in zip(axes.flat, PANELS):
        ax.bar(x, [getattr(oc, field) for _, oc in results], 0.6, color="#1f77b4")
        ax.set_ylabel(ylabel)
        ax.set_xticks(x)
        ax.set_xticklabels(labels, rotation=60, fontsize=7)
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
