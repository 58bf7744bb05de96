"""CSV readers and writers for every file the toolkit emits.

All files carry a header row, use '.' as the decimal separator and end with
a newline. Floats are written with repr (shortest round-trip form), so a
given array always serializes to the same bytes. Writes are whole-file
atomic via the checkpoint helper.
"""

from __future__ import annotations

import csv
import io

import numpy as np

from .checkpoint import atomic_write_text
from .data import KinematicSeries
from .errors import ConfigError


def _fmt(x) -> str:
    return repr(float(x))


def _render_csv(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow(row)
    return buf.getvalue()


def write_kinematics_csv(path, series_list):
    rows = []
    for s in series_list:
        for i in range(len(s)):
            rows.append((_fmt(s.time[i]), _fmt(s.q[i]), _fmt(s.qdot[i]),
                         _fmt(s.qddot[i]), int(s.trajectory_id)))
    atomic_write_text(path, _render_csv(
        ("time_s", "q_rad", "qdot", "qddot", "trajectory_id"), rows))


def read_kinematics_csv(path) -> list:
    by_traj: dict = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["time_s", "q_rad", "qdot", "qddot", "trajectory_id"]:
            raise ConfigError(f"{path}: unexpected kinematics header {header}")
        for row in reader:
            by_traj.setdefault(int(row[4]), []).append(
                (float(row[0]), float(row[1]), float(row[2]), float(row[3])))
    series = []
    for tid in sorted(by_traj):
        arr = np.array(by_traj[tid])
        dt = np.diff(arr[:, 0])
        if dt.size == 0:
            raise ConfigError(f"{path}: trajectory {tid} has a single sample")
        rate = 1.0 / float(np.median(dt))
        series.append(KinematicSeries(time=arr[:, 0], q=arr[:, 1], qdot=arr[:, 2],
                                      qddot=arr[:, 3], trajectory_id=tid,
                                      rate_hz=round(rate, 9)))
    return series


def write_labels_csv(path, muscle_names, labels_by_traj: dict):
    """labels_by_traj maps trajectory id -> TrajectoryLabels."""
    header = (["time_s"] + [f"a_{n}" for n in muscle_names]
              + [f"F_{n}_N" for n in muscle_names] + ["trajectory_id"])
    rows = []
    for tid in sorted(labels_by_traj):
        lab = labels_by_traj[tid]
        for i in range(lab.time.size):
            rows.append([_fmt(lab.time[i])]
                        + [_fmt(v) for v in lab.activations[i]]
                        + [_fmt(v) for v in lab.forces[i]] + [int(tid)])
    atomic_write_text(path, _render_csv(header, rows))


def read_labels_csv(path):
    """Returns (muscle_names, {traj id: (time, activations, forces)})."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[0] != "time_s" or header[-1] != "trajectory_id":
            raise ConfigError(f"{path}: unexpected label header")
        body = header[1:-1]
        n = len(body) // 2
        names = [c[2:] for c in body[:n]]
        expected = [f"a_{m}" for m in names] + [f"F_{m}_N" for m in names]
        if body != expected:
            raise ConfigError(f"{path}: label columns do not pair up: {body}")
        by_traj: dict = {}
        for row in reader:
            by_traj.setdefault(int(row[-1]), []).append([float(v) for v in row[:-1]])
    out = {}
    for tid, rows in by_traj.items():
        arr = np.array(rows)
        out[tid] = (arr[:, 0], arr[:, 1:1 + n], arr[:, 1 + n:1 + 2 * n])
    return names, out


def write_loss_trace_csv(path, header, rows):
    rendered = [(int(r[0]),) + tuple(_fmt(v) for v in r[1:]) for r in rows]
    atomic_write_text(path, _render_csv(header, rendered))


def write_metrics_csv(path, report):
    rows = [(name, _fmt(ra), _fmt(rf), _fmt(r2a), _fmt(r2f))
            for name, ra, rf, r2a, r2f in report.rows()]
    atomic_write_text(path, _render_csv(
        ("muscle", "rmse_a", "rmse_F_N", "r2_a", "r2_F"), rows))


def write_latency_csv(path, report):
    atomic_write_text(path, _render_csv(
        ("latency_median_s", "latency_p95_s", "n_windows"),
        [(_fmt(report.latency_median_s), _fmt(report.latency_p95_s),
          int(report.latency_windows))]))


def write_ablation_csv(path, rows):
    rendered = [(r["losses"], _fmt(r["r2_a"]), _fmt(r["r2_f"])) for r in rows]
    atomic_write_text(path, _render_csv(("enabled_losses", "r2_a", "r2_F"), rendered))


def write_sweep_csv(path, rows):
    rendered = [(_fmt(r["omega"]), _fmt(r["r2_a"]), _fmt(r["r2_f"]),
                 _fmt(r["rmse_a"]), _fmt(r["rmse_f"]), r["error"]) for r in rows]
    atomic_write_text(path, _render_csv(
        ("omega", "r2_a", "r2_F", "rmse_a", "rmse_F_N", "error"), rendered))
