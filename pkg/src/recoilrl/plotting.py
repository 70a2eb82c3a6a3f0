"""Figures written next to the CSV reports (position error, actions, returns)."""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .reports import AGENT_LABELS  # noqa: E402

COLORS = {"nominal": "tab:red", "i": "tab:blue", "it": "tab:green"}

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "lines.linewidth": 1.2,
}


def _mark_event(ax, trace):
    if not math.isnan(trace.t_trigger_start):
        T_end = trace.t_trigger_start + (trace.o_t.sum() * (trace.t[1] - trace.t[0]) if len(trace) > 1 else 0)
        ax.axvspan(trace.t_trigger_start, T_end, color="0.85", zorder=0)
    if not math.isnan(trace.t_impulse):
        ax.axvline(trace.t_impulse, color="k", ls="--", lw=0.8)


def _stacked(traces_by_agent, episode, series, labels, ylabel_unit, path, title):
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(len(labels), 1, sharex=True, figsize=(6.0, 1.6 * len(labels) + 0.6))
        first = None
        for agent, traces in traces_by_agent.items():
            tr = traces[episode]
            if first is None:
                first = tr
            y = series(tr)
            for j, ax in enumerate(axes):
                ax.plot(tr.t, y[:, j], color=COLORS.get(agent), label=AGENT_LABELS.get(agent, agent))
        for ax, lab in zip(axes, labels):
            ax.set_ylabel(f"{lab} {ylabel_unit}".strip())
            if first is not None:
                _mark_event(ax, first)
        axes[-1].set_xlabel("t [s]")
        axes[0].legend(loc="upper right", ncol=3)
        axes[0].set_title(title)
        fig.tight_layout()
        fig.savefig(path, dpi=150)
        plt.close(fig)


def plot_error_comparison(traces_by_agent: dict, path, episode: int = 0) -> None:
    _stacked(traces_by_agent, episode, lambda tr: tr.e_p, ["e_x", "e_y", "e_z"], "[m]", path,
             "Position error (shaded: trigger active, dashed: impulse)")


def plot_action_comparison(traces_by_agent: dict, path, episode: int = 0) -> None:
    _stacked(traces_by_agent, episode, lambda tr: tr.u, ["f_a", "w_r,x", "w_r,y"], "(norm.)", path,
             "Policy actions (shaded: trigger active, dashed: impulse)")


def plot_training_curves(curves: dict[str, list[dict]], path) -> None:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(6.0, 3.0))
        for agent, curve in curves.items():
            epochs = np.array([r["epoch"] for r in curve])
            ret = np.array([r["mean_return"] for r in curve], dtype=float)
            ax.plot(epochs, ret, color=COLORS.get(agent), label=AGENT_LABELS.get(agent, agent))
        ax.set_xlabel("epoch")
        ax.set_ylabel("mean episode return")
        ax.legend()
        fig.tight_layout()
        fig.savefig(path, dpi=150)
        plt.close(fig)
