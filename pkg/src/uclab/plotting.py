"""Static figures written next to the CSV/JSON artifacts.

Rendering uses the non-interactive Agg canvas and strips PNG metadata so the
same data always produces the same bytes.
"""

from __future__ import annotations

import numpy as np
from matplotlib.figure import Figure
from matplotlib.backends.backend_agg import FigureCanvasAgg

STYLE = {"marker": "o", "markersize": 4, "linewidth": 1.2, "capsize": 3}


def _figure(width=4.8, height=3.4):
    fig = Figure(figsize=(width, height), dpi=120)
    FigureCanvasAgg(fig)
    return fig, fig.add_subplot(111)


def _save(fig, path) -> None:
    fig.tight_layout()
    fig.savefig(path, format="png", metadata={"Software": None})


def plot_curve(curve, fit, path) -> None:
    """Log-log curve with 2-sigma bars, the fitted line and a reference slope."""
    fig, ax = _figure()
    n, m, se = curve.n, curve.means, curve.std_errors
    ax.errorbar(n, m, yerr=2 * se, label="mean net sup", **STYLE)
    grid = np.geomspace(n[0], n[-1], 50)
    if fit is not None:
        ax.plot(grid, np.exp(fit.intercept) * grid ** fit.slope, "--", linewidth=1,
                label=f"fit, slope {fit.slope:.3f}")
    ref = -0.5 if curve.kind == "ncsc" else -0.25
    ax.plot(grid, m[0] * (grid / n[0]) ** ref, ":", color="gray", linewidth=1,
            label=f"slope {ref:g}")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("sample size n")
    ax.set_ylabel("deviation")
    ax.legend(frameon=False, fontsize=8)
    _save(fig, path)


def plot_ratio_bars(labels, ratios, slack, path, ylabel="observed / bound") -> None:
    """One bar per check, with the pass threshold drawn in."""
    fig, ax = _figure()
    x = np.arange(len(labels))
    ax.bar(x, ratios, color="#4878a8")
    ax.axhline(slack, color="#b03a2e", linewidth=1, linestyle="--", label=f"slack {slack:g}")
    ax.set_xticks(x)
    ax.set_xticklabels(labels, fontsize=8)
    ax.set_ylabel(ylabel)
    ax.legend(frameon=False, fontsize=8)
    _save(fig, path)


def plot_decomposition(rows, path) -> None:
    fig, ax = _figure()
    n = np.array([r["n"] for r in rows])
    for key, label in (("population_mean", "||grad Phi||"),
                       ("empirical_mean", "||grad Phi_S||"),
                       ("generalization_mean", "generalization"),
                       ("net_sup_mean", "net sup")):
        ax.plot(n, [r[key] for r in rows], marker="o", markersize=4, linewidth=1.2, label=label)
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("sample size n")
    ax.legend(frameon=False, fontsize=8)
    _save(fig, path)


def plot_tails(levels, path) -> None:
    fig, ax = _figure()
    k = [lv["t_over_sigma"] for lv in levels]
    ax.plot(k, [lv["frequency"] for lv in levels], marker="o", label="empirical")
    ax.plot(k, [lv["theory"] for lv in levels], marker="s", label="2 exp(-t^2/2 sigma^2)")
    ax.plot(k, [lv["allowed"] for lv in levels], linestyle="--", label="allowed")
    ax.set_xlabel("t / sigma")
    ax.set_ylabel("P(|D - mean| >= t)")
    ax.legend(frameon=False, fontsize=8)
    _save(fig, path)
