"""On-disk formats: training curves, metrics documents, trace stores and CSV exports."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .evaluation import EpisodeMetrics, SweepCell, Trace

TRAJECTORY_COLUMNS = [
    "t", "p_x", "p_y", "p_z", "e_x", "e_y", "e_z", "v_x", "v_y", "v_z",
    "w_x", "w_y", "w_z", "u_thrust", "u_wx", "u_wy", "o_t", "fd_x", "reward", "episode_id",
]
COMPARISON_COLUMNS = ["agent", "p_x", "p_y", "p_z", "p_norm", "sigma_u", "failures"]
SWEEP_COLUMNS = ["H", "T_t", "stable", "p_norm", "sigma_u", "final_episode_len", "error"]
AGENT_LABELS = {"nominal": "Nominal", "i": "I-Policy", "it": "IT-Policy"}


def write_csv(path, columns: list[str], rows: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=columns, extrasaction="ignore")
        w.writeheader()
        for row in rows:
            w.writerow(row)


def read_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def write_metrics(path, agent: str, metrics: EpisodeMetrics, seed: int, config_echo: dict) -> None:
    doc = {"agent": agent, **metrics.as_dict(), "seed": seed, "config": config_echo}
    Path(path).write_text(json.dumps(doc, indent=2))


def comparison_rows(results: dict) -> list[dict]:
    return [{"agent": AGENT_LABELS.get(name, name), **res.metrics.as_dict()} for name, res in results.items()]


def format_comparison(results: dict) -> str:
    lines = [f"{'':10s} {'p_x':>7s} {'p_y':>7s} {'p_z':>7s} {'|p|':>7s} {'Sigma_u':>8s} {'fail':>5s}"]
    for row in comparison_rows(results):
        lines.append(
            f"{row['agent']:10s} {row['p_x']:7.3f} {row['p_y']:7.3f} {row['p_z']:7.3f} "
            f"{row['p_norm']:7.3f} {row['sigma_u']:8.1f} {row['failures']:5d}"
        )
    return "\n".join(lines)


def write_sweep(path, cells: list[SweepCell]) -> None:
    write_csv(path, SWEEP_COLUMNS, [c.as_dict() for c in cells])


def format_sweep(cells: list[SweepCell]) -> str:
    lines = ["    H    T_t  stable    |p|  Sigma_u"]
    for c in cells:
        if c.stable:
            lines.append(f"{c.H:5d} {c.T_t:6.2f} {'yes':>7s} {c.p_norm:6.3f} {c.sigma_u:8.1f}")
        else:
            lines.append(f"{c.H:5d} {c.T_t:6.2f} {'x':>7s} {'x':>6s} {'x':>8s}")
    return "\n".join(lines)


def save_traces(path, traces: list[Trace]) -> None:
    """Store episodes concatenated, tagged with ``episode_id``."""
    arrays = {}
    for key in ("t", "p", "e_p", "v", "w", "u", "o_t", "f_d", "reward"):
        arrays[key] = np.concatenate([getattr(tr, key) for tr in traces])
    arrays["episode_id"] = np.concatenate([np.full(len(tr), k) for k, tr in enumerate(traces)])
    arrays["terminated"] = np.array([tr.terminated for tr in traces])
    arrays["t_trigger_start"] = np.array([tr.t_trigger_start for tr in traces])
    arrays["t_impulse"] = np.array([tr.t_impulse for tr in traces])
    np.savez_compressed(path, **arrays)


def load_traces(path) -> list[Trace]:
    with np.load(path) as z:
        ep = z["episode_id"]
        out = []
        for k in range(len(z["terminated"])):
            m = ep == k
            out.append(
                Trace(
                    **{key: z[key][m] for key in ("t", "p", "e_p", "v", "w", "u", "o_t", "f_d", "reward")},
                    terminated=bool(z["terminated"][k]),
                    t_trigger_start=float(z["t_trigger_start"][k]),
                    t_impulse=float(z["t_impulse"][k]),
                )
            )
    return out


def trajectory_rows(traces: list[Trace]) -> list[dict]:
    rows = []
    for k, tr in enumerate(traces):
        for i in range(len(tr)):
            rows.append(
                {
                    "t": tr.t[i],
                    "p_x": tr.p[i, 0], "p_y": tr.p[i, 1], "p_z": tr.p[i, 2],
                    "e_x": tr.e_p[i, 0], "e_y": tr.e_p[i, 1], "e_z": tr.e_p[i, 2],
                    "v_x": tr.v[i, 0], "v_y": tr.v[i, 1], "v_z": tr.v[i, 2],
                    "w_x": tr.w[i, 0], "w_y": tr.w[i, 1], "w_z": tr.w[i, 2],
                    "u_thrust": tr.u[i, 0], "u_wx": tr.u[i, 1], "u_wy": tr.u[i, 2],
                    "o_t": int(tr.o_t[i]),
                    "fd_x": tr.f_d[i, 0],
                    "reward": tr.reward[i],
                    "episode_id": k,
                }
            )
    return rows


def export_trajectory_csv(traces: list[Trace], path) -> int:
    rows = trajectory_rows(traces)
    write_csv(path, TRAJECTORY_COLUMNS, rows)
    return len(rows)


def write_curve(path, curve: list[dict], columns: list[str]) -> None:
    write_csv(path, columns, curve)


def read_curve(path) -> list[dict]:
    out = []
    for row in read_csv(path):
        out.append({k: (float(v) if v not in ("", "nan") else math.nan) for k, v in row.items()})
    return out
