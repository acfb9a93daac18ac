"""Report emission: KPI JSON, trajectory and reward-curve CSVs, and static SVG plots."""
from __future__ import annotations

import csv
from pathlib import Path
from typing import Mapping, Optional, Sequence

import matplotlib
import numpy as np
from matplotlib.figure import Figure

from .domain import ComfortBand
from .env import Trajectory
from .evaluation import KpiReport
from .storage import _fmt, save_trajectory, write_json
from .training import moving_mean

# fixed salt and no timestamp so repeated runs write identical SVG bytes
_RC = {
    "svg.hashsalt": "flexheat",
    "svg.fonttype": "path",
    "font.size": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
}
_SAVE = dict(format="svg", metadata={"Date": None})
CASE_COLORS = {"RB": "#7f7f7f", "DRL_NOFLEX": "#1f77b4", "DRL_FLEX": "#ff7f0e", "DRL_FLEX_RASF": "#2ca02c"}


def _shade_windows(ax, traj: Trajectory, hours: np.ndarray):
    for w in traj.windows:
        if w.t_start >= len(hours):
            continue
        end = hours[min(w.t_end, len(hours)) - 1] + traj.dt
        color = "#d62728" if w.phi < 1 else "#9467bd"
        ax.axvspan(hours[w.t_start], end, color=color, alpha=0.12, lw=0)


def plot_trajectory(traj: Trajectory, band: ComfortBand, path) -> Path:
    """Temperature, valve action and price over time with flexibility windows shaded."""
    with matplotlib.rc_context(_RC):
        fig = Figure(figsize=(8, 6))
        axes = fig.subplots(3, 1, sharex=True)
        hours = np.arange(len(traj)) * traj.dt
        ax = axes[0]
        ax.plot(hours, traj.column("t_room_next"), lw=0.9, color="k", label="room")
        ax.axhspan(band.t_min, band.t_max, color="#2ca02c", alpha=0.1, lw=0)
        ax.set_ylabel("T room [°C]")
        ax.set_title(traj.case)
        ax = axes[1]
        ax.step(hours, traj.column("u_proposed"), where="post", lw=0.7, color="#1f77b4", alpha=0.6, label="proposed")
        ax.step(hours, traj.column("u_safe"), where="post", lw=0.9, color="#ff7f0e", label="applied")
        ax.set_ylim(-0.05, 1.05)
        ax.set_ylabel("valve u")
        ax.legend(loc="upper right", fontsize=7)
        ax = axes[2]
        ax.step(hours, traj.column("price"), where="post", lw=0.8, color="#8c564b")
        ax.set_ylabel("price [CHF/kWh]")
        ax.set_xlabel("time [h]")
        for ax in axes:
            _shade_windows(ax, traj, hours)
        fig.tight_layout()
        fig.savefig(path, **_SAVE)
    return Path(path)


def plot_kpis(reports: Mapping[str, KpiReport], path) -> Path:
    """Bar comparison of energy, cost and comfort violation across cases."""
    cases = list(reports)
    metrics = (("energy", "energy [kWh]"), ("cost", "cost [CHF]"), ("comfort_violation", "violation [Kh]"))
    with matplotlib.rc_context(_RC):
        fig = Figure(figsize=(9, 3.2))
        axes = fig.subplots(1, 3)
        x = np.arange(len(cases))
        for ax, (key, label) in zip(axes, metrics):
            vals = [getattr(reports[c], key) for c in cases]
            ax.bar(x, vals, color=[CASE_COLORS.get(c, "#333333") for c in cases])
            ax.set_xticks(x)
            ax.set_xticklabels(cases, rotation=30, ha="right", fontsize=7)
            ax.set_ylabel(label)
        fig.tight_layout()
        fig.savefig(path, **_SAVE)
    return Path(path)


def plot_reward_curve(curve: Sequence[tuple], path, window: int = 50) -> Path:
    ep = np.array([c[0] for c in curve])
    agent = np.array([c[1] for c in curve], dtype=float)
    with matplotlib.rc_context(_RC):
        fig = Figure(figsize=(6, 3.2))
        ax = fig.subplots()
        ax.plot(ep, agent, lw=0.5, alpha=0.3, color="#1f77b4")
        ax.plot(ep, moving_mean(agent, window), lw=1.2, color="#1f77b4", label="DDPG")
        if len(curve[0]) > 2:
            rb = np.array([c[2] for c in curve], dtype=float)
            ax.plot(ep, moving_mean(rb, window), lw=1.2, color="#7f7f7f", label="RB")
        ax.set_xlabel("episode")
        ax.set_ylabel("episode reward")
        ax.legend(fontsize=7)
        fig.tight_layout()
        fig.savefig(path, **_SAVE)
    return Path(path)


def write_reward_curve(episode_rewards, rb_rewards, path, window: int = 50) -> list[tuple]:
    """CSV with raw and moving-mean rewards per episode; returns the rows."""
    agent = np.asarray(episode_rewards, dtype=float)
    mm = moving_mean(agent, window)
    has_rb = len(rb_rewards) == len(agent) and len(agent) > 0
    rb = np.asarray(rb_rewards, dtype=float) if has_rb else None
    rb_mm = moving_mean(rb, window) if has_rb else None
    rows = []
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        header = ["episode", "reward", "reward_mean"] + (["rb_reward", "rb_reward_mean"] if has_rb else [])
        w.writerow(header)
        for i in range(len(agent)):
            row = [i, _fmt(agent[i]), _fmt(mm[i])]
            if has_rb:
                row += [_fmt(rb[i]), _fmt(rb_mm[i])]
            w.writerow(row)
            rows.append((i, agent[i]) + ((rb[i],) if has_rb else ()))
    return rows


def kpi_document(reports: Mapping[str, KpiReport], meta: Optional[dict] = None) -> dict:
    doc = {"cases": {c: r.to_dict() for c, r in reports.items()}}
    if meta:
        doc["meta"] = meta
    return doc


def emit_report(
    reports: Mapping[str, KpiReport],
    trajectories: Mapping[str, Trajectory],
    out_dir,
    band: ComfortBand = ComfortBand(),
    episode_rewards: Sequence[float] = (),
    rb_rewards: Sequence[float] = (),
    meta: Optional[dict] = None,
    plots: bool = True,
) -> list[Path]:
    """Write the KPI report, per-case trajectories, reward curve and SVG plots."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = [write_json(kpi_document(reports, meta), out / "kpi_report.json")]
    for case, traj in trajectories.items():
        written.append(save_trajectory(traj, out / f"trajectory_{case}.csv"))
    curve = write_reward_curve(episode_rewards, rb_rewards, out / "reward_curve.csv")
    written.append(out / "reward_curve.csv")
    if plots:
        for case, traj in trajectories.items():
            if len(traj):
                written.append(plot_trajectory(traj, band, out / f"trajectory_{case}.svg"))
        if reports and any(len(t) for t in trajectories.values()):
            written.append(plot_kpis(reports, out / "kpi_comparison.svg"))
        if curve:
            written.append(plot_reward_curve(curve, out / "reward_curve.svg"))
    return written
