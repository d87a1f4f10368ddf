"""Figures for cost reports (headless, Agg backend)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .complexity import CostReport  # noqa: E402


def plot_costs(report: CostReport, path) -> None:
    """Side-by-side bars of parameters (K) and MACs (G) per module."""
    names = [r.module for r in report.rows]
    params = [r.params / 1e3 for r in report.rows]
    macs = [r.macs / 1e9 for r in report.rows]
    fig, (ax_p, ax_m) = plt.subplots(1, 2, figsize=(10, 4), constrained_layout=True)
    ax_p.bar(names, params, color="tab:blue")
    ax_p.set_ylabel("parameters (K)")
    ax_p.set_title(f"parameters: {report.total_params / 1e3:.1f} K total")
    ax_m.bar(names, macs, color="tab:orange")
    ax_m.set_ylabel("MACs (G)")
    seconds = report.num_samples / report.sample_rate
    ax_m.set_title(f"MACs for {seconds:g} s: {report.total_macs / 1e9:.2f} G total")
    for ax in (ax_p, ax_m):
        ax.tick_params(axis="x", rotation=30)
        ax.grid(axis="y", alpha=0.3)
    fig.savefig(path, dpi=100)
    plt.close(fig)
