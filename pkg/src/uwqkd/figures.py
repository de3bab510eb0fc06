"""Matplotlib renderings saved next to the delimited report output."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .gate_optimizer import GateSweepResult
from .link_analysis import EmpiricalCdf

_FIG_KW = dict(figsize=(5.2, 3.6), dpi=150)


def save_cdf_figure(cdf: EmpiricalCdf, path, xlabel: str, title: str,
                    x_scale: float = 1.0) -> None:
    """CDF polyline; ``x_scale`` converts the value axis (e.g. s -> ns)."""
    fig, ax = plt.subplots(**_FIG_KW)
    ax.plot(cdf.values * x_scale, cdf.cum_weights / cdf.total_weight, lw=1.2)
    ax.set_xlabel(xlabel)
    ax.set_ylabel("CDF of arrived weight")
    ax.set_title(title)
    ax.set_ylim(0, 1.02)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def save_sweep_figure(result: GateSweepResult, path, title: str) -> None:
    """QBER versus gate time with the minimizer marked."""
    fig, ax = plt.subplots(**_FIG_KW)
    ax.plot(result.gates * 1e12, result.qber, lw=1.2)
    ax.plot(
        result.optimal_gate * 1e12,
        result.optimal_qber,
        "o",
        ms=5,
        label=f"min: {result.optimal_gate * 1e12:.0f} ps, "
        f"QBER {result.optimal_qber:.2e}",
    )
    ax.set_xlabel("gate time (ps)")
    ax.set_ylabel("QBER")
    ax.set_yscale("log")
    ax.set_title(title)
    ax.grid(alpha=0.3, which="both")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def save_table_figure(rows: list[dict], path) -> None:
    """Sweep curves of every finished design-table row on one axis."""
    fig, ax = plt.subplots(figsize=(6.4, 4.2), dpi=150)
    for row in rows:
        sweep: GateSweepResult = row["sweep"]
        label = (
            f"r0={row['beam_radius_cm']:g} cm, "
            f"div={row['max_divergence_deg']:g}\N{DEGREE SIGN}, "
            f"L={row['link_distance_m']:g} m"
        )
        ax.plot(sweep.gates * 1e12, sweep.qber, lw=1.0, label=label)
        ax.plot(sweep.optimal_gate * 1e12, sweep.optimal_qber, "k.", ms=4)
    ax.set_xlabel("gate time (ps)")
    ax.set_ylabel("QBER")
    ax.set_yscale("log")
    ax.grid(alpha=0.3, which="both")
    if len(rows) <= 12:
        ax.legend(fontsize=6)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
