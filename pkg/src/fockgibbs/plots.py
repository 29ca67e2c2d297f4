"""Figure rendering for campaign reports.

Every campaign writes PNG files next to its CSV/JSON output; the functions
return the written paths so callers can log them.  The Agg backend is forced
so rendering works in headless environments.
"""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

__all__ = ["render_report"]


def _finish(fig, path: str) -> str:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, dpi=144)
    plt.close(fig)
    return path


def _plot_partition(report, out_dir: str) -> list:
    t = report.column("T")
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.5))
    ax1.plot(t, report.column("ratio"), "o-", label=r"$Z_\lambda/Z_0$")
    zr = report.shared["z_r"]
    sig = report.shared["z_r_stderr"]
    ax1.axhline(zr, color="k", lw=0.8, label=r"$z_r$ (MC)")
    ax1.axhspan(zr - 3 * sig, zr + 3 * sig, color="k", alpha=0.15)
    ax1.plot(t, report.column("sandwich_lower"), "s--", color="gray",
             label="lower sandwich")
    ax1.set_xscale("log", base=2)
    ax1.set_xlabel("T")
    ax1.set_ylabel("partition ratio")
    ax1.legend(fontsize=8)
    ax2.loglog(t, [max(g, 1e-18) for g in report.column("abs_gap")],
               "o-", base=2)
    ax2.set_xlabel("T")
    ax2.set_ylabel(r"$|Z_\lambda/Z_0 - z_r|$")
    path = os.path.join(out_dir, "partition.png")
    return [_finish(fig, path)]


def _plot_dm(report, out_dir: str) -> list:
    t = report.column("T")
    orders = report.config.get("dm_orders") or [1]
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for k in orders:
        ax.loglog(t, report.column(f"dm{k}_distance"), "o-", base=2,
                  label=f"k = {k}")
    p = report.config.get("schatten_p", 1.0)
    ax.set_xlabel("T")
    ax.set_ylabel(f"Schatten-{p:g} distance to classical limit")
    ax.legend(fontsize=8)
    path = os.path.join(out_dir, "dm.png")
    return [_finish(fig, path)]


def _plot_husimi(report, out_dir: str) -> list:
    t = report.column("T")
    names = [key[len("gap_"):] for key in report.rows[0]
             if key.startswith("gap_")]
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for name in names:
        gaps = report.column(f"gap_{name}")
        if max(gaps) <= 0:
            continue
        ax.loglog(t, [max(g, 1e-18) for g in gaps], "o-", base=2, label=name)
    ax.set_xlabel("T")
    ax.set_ylabel("|anti-Wick - classical mean|")
    ax.legend(fontsize=8)
    path = os.path.join(out_dir, "husimi.png")
    return [_finish(fig, path)]


def _plot_proofsteps(report, out_dir: str) -> list:
    t = report.column("T")
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.5))
    ax1.plot(t, report.column("pb_margin"), "o-",
             label="coherent lower-bound margin")
    ax1.axhline(0.0, color="k", lw=0.8)
    ax1.set_xscale("log", base=2)
    ax1.set_xlabel("T")
    ax1.set_ylabel("log-partition margin")
    ax1.legend(fontsize=8)
    ax2.loglog(t, [abs(v - 1.0) for v in report.column("semiclassics_value")],
               "o-", base=2, label="|free semiclassics - 1|")
    ax2.loglog(t, report.column("semiclassics_bound"), "s--", base=2,
               color="gray", label="bound")
    ax2.loglog(t, report.column("decomp_residual"), "^-", base=2,
               label="entropy-decomposition residual")
    ax2.set_xlabel("T")
    ax2.legend(fontsize=8)
    path = os.path.join(out_dir, "proofsteps.png")
    return [_finish(fig, path)]


_RENDERERS = {
    "partition": _plot_partition,
    "dm": _plot_dm,
    "husimi": _plot_husimi,
    "proofsteps": _plot_proofsteps,
}


def render_report(report, out_dir: str) -> list:
    """Write the campaign's figures into ``out_dir``; returns the paths."""
    renderer = _RENDERERS.get(report.campaign)
    if renderer is None or not report.rows:
        return []
    return renderer(report, out_dir)
