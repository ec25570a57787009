"""Render run traces and batch results to figures and delimited files.

``write_run_report`` turns one trace into a trajectory figure plus a
per-cycle CSV; ``write_batch_report`` turns batch rows into a per-seed CSV,
an aggregate CSV and a cycles histogram.  Figures go through the Agg backend
so reports work headless.
"""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
from matplotlib.patches import Circle

from .harness import cycle_records, terminal_record

CYCLE_FIELDS = ["cycle", "d", "x", "y", "obj", "found", "bearing", "command",
                "direction", "chosen_direction", "ticks", "pose_x", "pose_y",
                "heading", "stop_reason"]

BATCH_FIELDS = ["seed", "reached", "cycles", "path_length_m", "recoveries",
                "reason", "recovery_followed_initial"]


def cycle_rows(trace: list[dict]) -> list[dict]:
    rows = []
    for rec in cycle_records(trace):
        look = rec["look"] or {}
        pose = rec["pose"]
        rows.append({
            "cycle": rec["cycle"],
            "d": rec["perception"]["d"],
            "x": rec["perception"]["x"],
            "y": rec["perception"]["y"],
            "obj": rec["perception"]["obj"],
            "found": look.get("found", ""),
            "bearing": look.get("bearing", ""),
            "command": rec["command"]["kind"],
            "direction": rec["command"]["direction"],
            "chosen_direction": rec["chosen_direction"],
            "ticks": rec["ticks"],
            "pose_x": pose["x"],
            "pose_y": pose["y"],
            "heading": pose["heading"],
            "stop_reason": rec["stop_reason"] or "",
        })
    return rows


def _write_csv(path: Path, fieldnames: list[str], rows: list[dict]) -> None:
    with open(path, "w", newline="", encoding="ascii") as fh:
        writer = csv.DictWriter(fh, fieldnames=fieldnames)
        writer.writeheader()
        writer.writerows(rows)


def trajectory_figure(trace: list[dict]):
    """Robot path over the world: obstacles, target disk, start marker, and
    per-cycle poses, with event-inserted obstacles dashed."""
    header = trace[0]
    cycles = cycle_records(trace)
    term = terminal_record(trace)

    fig, ax = plt.subplots(figsize=(7, 5))
    for ob in header["obstacles"]:
        ax.add_patch(Circle((ob["x"], ob["y"]), ob["radius"],
                            facecolor="dimgray" if ob["tall"] else "lightgray",
                            edgecolor="black"))
    for rec in trace:
        if rec.get("type") == "event" and rec.get("accepted"):
            ev = rec["event"]
            ax.add_patch(Circle((ev["x"], ev["y"]), ev["radius"], fill=False,
                                edgecolor="dimgray" if ev["tall"] else "gray",
                                linestyle="--"))
    target = header["target"]
    ax.add_patch(Circle((target["x"], target["y"]), header["reach_radius"],
                        facecolor="palegreen", edgecolor="green", alpha=0.6))
    ax.plot(target["x"], target["y"], "g*", markersize=12)

    xs = [header["start"]["x"]] + [rec["pose"]["x"] for rec in cycles]
    ys = [header["start"]["y"]] + [rec["pose"]["y"] for rec in cycles]
    ax.plot(xs, ys, "o-", color="tab:blue", markersize=3, linewidth=1)
    ax.plot(xs[0], ys[0], "bs", markersize=8)
    for rec in cycles:
        if rec["look"] is not None and rec["look"]["found"]:
            ax.plot(rec["pose"]["x"], rec["pose"]["y"], "o", color="orange",
                    markersize=5)

    status = "reached" if term["reached"] else f"failed ({term['reason']})"
    ax.set_title(f"{header['scenario']} seed {header['seed']}: {status} "
                 f"in {term['cycles_used']} cycles, "
                 f"{term['path_length_m']:.2f} m")
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    ax.set_aspect("equal")
    ax.grid(True, alpha=0.3)
    return fig


def write_run_report(trace: list[dict], out_dir: str | Path) -> list[Path]:
    """Write trajectory.png and cycles.csv for one trace; returns the paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    fig_path = out / "trajectory.png"
    csv_path = out / "cycles.csv"
    fig = trajectory_figure(trace)
    fig.savefig(fig_path, dpi=120, bbox_inches="tight")
    plt.close(fig)
    _write_csv(csv_path, CYCLE_FIELDS, cycle_rows(trace))
    return [fig_path, csv_path]


def batch_figure(aggregate: dict):
    """Histogram of cycles used, successes and failures stacked."""
    rows = aggregate["rows"]
    ok = [r["cycles"] for r in rows if r["reached"]]
    bad = [r["cycles"] for r in rows if not r["reached"]]
    fig, ax = plt.subplots(figsize=(7, 4))
    bins = range(0, max(r["cycles"] for r in rows) + 2)
    ax.hist([ok, bad], bins=bins, stacked=True, color=["tab:green", "tab:red"],
            label=["reached", "failed"])
    ax.set_title(f"{aggregate['scenario']}: {aggregate['successes']}/"
                 f"{aggregate['runs']} reached "
                 f"(rate {aggregate['success_rate']:.2f})")
    ax.set_xlabel("cycles used")
    ax.set_ylabel("runs")
    ax.legend()
    return fig


def write_batch_report(aggregate: dict, out_dir: str | Path) -> list[Path]:
    """Write seeds.csv, summary.csv and cycles_hist.png for a batch."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    seeds_path = out / "seeds.csv"
    summary_path = out / "summary.csv"
    fig_path = out / "cycles_hist.png"
    _write_csv(seeds_path, BATCH_FIELDS, aggregate["rows"])
    summary = {k: aggregate[k] for k in
               ("scenario", "runs", "successes", "success_rate",
                "mean_cycles", "mean_path_length_m")}
    _write_csv(summary_path, list(summary), [summary])
    fig = batch_figure(aggregate)
    fig.savefig(fig_path, dpi=120, bbox_inches="tight")
    plt.close(fig)
    return [seeds_path, summary_path, fig_path]
