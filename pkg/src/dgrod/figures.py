"""Convergence figures rendered alongside the delimited reports."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .analysis import EXACT_THRESHOLD, ConvergenceReport  # noqa: E402


def render_convergence_figure(report: ConvergenceReport, path: Path) -> None:
    """Log-log error-vs-h plot with reference slopes for the run's degree."""
    levels = [lv for lv in report.sorted_levels() if lv.E2 >= EXACT_THRESHOLD]
    if not levels:
        return
    h = [lv.h for lv in levels]
    e2 = [lv.E2 for lv in levels]

    fig, ax = plt.subplots(figsize=(5.0, 3.8))
    ax.loglog(h, e2, "o-", color="tab:blue", label="$E_2$")
    if any(lv.dg_norm is not None for lv in levels):
        dg = [lv.dg_norm for lv in levels]
        ax.loglog(h, dg, "s--", color="tab:orange", label="mesh norm")

    # Slope guides anchored at the finest level.
    degree = int(report.metadata.get("degree", 2))
    for p, style in ((2, ":"), (degree + 1, "--")):
        ref = [e2[-1] * (hh / h[-1]) ** p for hh in h]
        ax.loglog(h, ref, style, color="0.6", lw=1.0,
                  label=f"slope {p}")
    ax.set_xlabel("$h$")
    ax.set_ylabel("error")
    ax.invert_xaxis()
    title = (f"{report.metadata.get('run_name', '')}: "
             f"{report.metadata.get('method', '')}, "
             f"N={degree}")
    ax.set_title(title, fontsize=10)
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
