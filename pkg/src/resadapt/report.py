"""Report emission: tidy CSV per figure family, plus rendered figures.

Each family mirrors one figure of the study write-up as plot-ready data:

  fig3   final-resolution distributions by activity (per study)
  fig4   time of each resolution switch by activity (per study)
  fig9   final resolution vs video SI per dominant personality trait
  fig10  final resolution vs video SI by gender
  fig11  final resolution vs video SI by gender within each activity

The CSV is the primary artifact; a matplotlib rendering of the same rows is
written next to it unless figure output is disabled.
"""

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .errors import ValidationError
from .serialize import format_float

FAMILIES = ("fig3", "fig4", "fig9", "fig10", "fig11")

_ACTIVITY_ORDER = ("still", "walking", "running", "in_vehicle")


def _fmt(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format_float(value)
    return str(value)


def fig3_rows(dataset, study):
    rows = dataset.analysis_rows(study=study)
    if not rows:
        raise ValidationError(f"dataset has no study-{study} sessions")
    header = ["study", "activity", "participant_id", "video_id", "final_resolution"]
    out = [[r.study, r.activity, r.participant_id, r.video_id, r.final_resolution]
           for r in rows]
    out.sort(key=lambda r: (_ACTIVITY_ORDER.index(r[1]), r[2], r[3]))
    return header, out


def fig4_rows(dataset, study):
    sessions = dataset.sessions_for(study)
    if not sessions:
        raise ValidationError(f"dataset has no study-{study} sessions")
    header = ["study", "activity", "participant_id", "video_id", "t_s", "new_resolution"]
    out = []
    for s in sessions:
        for e in s.events:
            out.append([s.study, s.activity, s.participant_id, s.video_id,
                        e.t_ms / 1000.0, e.new_resolution])
    out.sort(key=lambda r: (_ACTIVITY_ORDER.index(r[1]), r[2], r[3], r[4]))
    return header, out


def _personality_rows(dataset, study):
    rows = dataset.analysis_rows(study=study)
    if not rows:
        raise ValidationError(f"dataset has no study-{study} sessions")
    missing = [r for r in rows if r.dominant_trait is None]
    if missing:
        raise ValidationError("personality report needs BFI data for every participant")
    return rows


def fig9_rows(dataset, study=2):
    rows = _personality_rows(dataset, study)
    header = ["dominant_trait", "si", "final_resolution"]
    out = [[r.dominant_trait, r.si, r.final_resolution] for r in rows]
    out.sort(key=lambda r: (r[0], r[1], r[2]))
    return header, out


def fig10_rows(dataset, study=2):
    rows = dataset.analysis_rows(study=study)
    if not rows:
        raise ValidationError(f"dataset has no study-{study} sessions")
    header = ["gender", "si", "final_resolution"]
    out = [[r.gender, r.si, r.final_resolution] for r in rows]
    out.sort(key=lambda r: (r[0], r[1], r[2]))
    return header, out


def fig11_rows(dataset, study=2):
    rows = dataset.analysis_rows(study=study)
    if not rows:
        raise ValidationError(f"dataset has no study-{study} sessions")
    header = ["activity", "gender", "si", "final_resolution"]
    out = [[r.activity, r.gender, r.si, r.final_resolution] for r in rows]
    out.sort(key=lambda r: (_ACTIVITY_ORDER.index(r[0]), r[1], r[2], r[3]))
    return header, out


_BUILDERS = {
    "fig3": fig3_rows,
    "fig4": fig4_rows,
    "fig9": fig9_rows,
    "fig10": fig10_rows,
    "fig11": fig11_rows,
}


def write_csv(header, rows, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _boxplot_by(ax, rows, key_idx, value_idx, order=None):
    groups = {}
    for row in rows:
        groups.setdefault(row[key_idx], []).append(row[value_idx])
    labels = [k for k in (order or sorted(groups)) if k in groups]
    ax.boxplot([groups[k] for k in labels], tick_labels=labels)
    ax.set_ylabel("final resolution (lines)")


def _scatter_with_fits(ax, rows, group_idx, x_idx, y_idx, xlabel):
    groups = {}
    for row in rows:
        groups.setdefault(row[group_idx], []).append((row[x_idx], row[y_idx]))
    for label in sorted(groups):
        pts = np.array(groups[label], dtype=float)
        ax.scatter(pts[:, 0], pts[:, 1], s=12, alpha=0.6, label=label)
        if len(pts) >= 2 and np.ptp(pts[:, 0]) > 0:
            slope, intercept = np.polyfit(pts[:, 0], pts[:, 1], 1)
            xs = np.linspace(pts[:, 0].min(), pts[:, 0].max(), 2)
            ax.plot(xs, slope * xs + intercept, linewidth=1.2)
    ax.set_xlabel(xlabel)
    ax.set_ylabel("final resolution (lines)")
    ax.legend(fontsize=8)


def render_figure(family, header, rows, path):
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    if family == "fig3":
        _boxplot_by(ax, rows, 1, 4, order=_ACTIVITY_ORDER)
        ax.set_xlabel("activity")
        ax.set_title("Final resolution by activity")
    elif family == "fig4":
        groups = {}
        for row in rows:
            groups.setdefault(row[1], []).append((row[4], row[5]))
        for label in [a for a in _ACTIVITY_ORDER if a in groups]:
            pts = np.array(groups[label], dtype=float)
            ax.scatter(pts[:, 0], pts[:, 1], s=14, alpha=0.6,
                       label=f"{label} ({len(pts)})")
        ax.set_xlabel("time before switch (s)")
        ax.set_ylabel("new resolution (lines)")
        ax.set_title("Resolution switches over time")
        ax.legend(fontsize=8)
    elif family == "fig9":
        _scatter_with_fits(ax, rows, 0, 1, 2, "video SI")
        ax.set_title("Resolution vs SI per dominant trait")
    elif family == "fig10":
        _scatter_with_fits(ax, rows, 0, 1, 2, "video SI")
        ax.set_title("Resolution vs SI by gender")
    elif family == "fig11":
        plt.close(fig)
        activities = [a for a in _ACTIVITY_ORDER if any(r[0] == a for r in rows)]
        fig, axes = plt.subplots(1, len(activities),
                                 figsize=(3.2 * len(activities), 3.6),
                                 sharey=True)
        if len(activities) == 1:
            axes = [axes]
        for ax_a, activity in zip(axes, activities):
            subset = [r[1:] for r in rows if r[0] == activity]
            _scatter_with_fits(ax_a, subset, 0, 1, 2, "video SI")
            ax_a.set_title(activity)
        fig.suptitle("Resolution vs SI by gender and activity")
    else:
        plt.close(fig)
        raise ValidationError(f"unknown figure family {family!r}")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def generate(dataset, family, out_dir, study=None, figure=True):
    """Write <family>.csv (and <family>.png) under *out_dir*; returns the paths."""
    if family not in _BUILDERS:
        raise ValidationError(f"unknown report family {family!r} (have {FAMILIES})")
    builder = _BUILDERS[family]
    if family in ("fig9", "fig10", "fig11"):
        header, rows = builder(dataset, study=study if study is not None else 2)
    else:
        if study is None:
            raise ValidationError(f"{family} needs an explicit --study")
        header, rows = builder(dataset, study)

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / f"{family}.csv"
    write_csv(header, rows, csv_path)
    paths = [csv_path]
    if figure:
        png_path = out_dir / f"{family}.png"
        render_figure(family, header, rows, png_path)
        paths.append(png_path)
    return paths
