"""Regression metrics and test-set evaluation.

Overlapping windows are reconstructed into one prediction per absolute time
index (plain average over every window covering the index) before any metric
is computed, so the scores describe the assembled trajectory estimate rather
than individual windows. Inference latency is measured separately over
repeated single-window forwards and reported as median and p95.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import network as net
from .errors import DimensionError, EvaluationError


def rmse(y, yhat) -> float:
    y = np.asarray(y, dtype=np.float64)
    yhat = np.asarray(yhat, dtype=np.float64)
    if y.shape != yhat.shape:
        raise DimensionError(f"shapes {y.shape} and {yhat.shape} differ")
    return float(np.sqrt(np.mean((y - yhat) ** 2)))


def r_squared(y, yhat) -> float:
    """Coefficient of determination; negative when errors exceed the variance."""
    y = np.asarray(y, dtype=np.float64)
    yhat = np.asarray(yhat, dtype=np.float64)
    if y.shape != yhat.shape:
        raise DimensionError(f"shapes {y.shape} and {yhat.shape} differ")
    if y.size < 2:
        raise EvaluationError("r_squared needs at least two samples")
    sse = float(np.sum((y - yhat) ** 2))
    sst = float(np.sum((y - y.mean()) ** 2))
    if sst == 0.0:
        if sse == 0.0:
            return 1.0
        raise EvaluationError("r_squared undefined: reference is constant "
                              "but residuals are nonzero")
    return 1.0 - sse / sst


@dataclass
class Reconstruction:
    """Per-index averaged predictions, keyed by trajectory id."""

    activations: dict
    forces: dict
    indices: dict     # traj id -> covered absolute indices (sorted)
    order: list       # trajectory ids in deterministic order


def reconstruct_predictions(params: dict, cfg: net.NetworkConfig, stats,
                            windows, batch_size: int = 256) -> Reconstruction:
    """Average overlapping window predictions per absolute time index."""
    n = cfg.n_muscles
    window = windows.window
    sums_a, sums_f, counts = {}, {}, {}
    order = []
    for tid in windows.traj_ids:
        if tid not in counts:
            order.append(int(tid))
            length = int(windows.starts[windows.traj_ids == tid].max()) + window
            sums_a[tid] = np.zeros((length, n))
            sums_f[tid] = np.zeros((length, n))
            counts[tid] = np.zeros(length, dtype=int)
    total = len(windows)
    for lo in range(0, total, batch_size):
        sel = slice(lo, min(lo + batch_size, total))
        a, f = net.predict(params, stats.apply(windows.inputs[sel]), cfg)
        for j, wi in enumerate(range(sel.start, sel.stop)):
            tid = windows.traj_ids[wi]
            s = windows.starts[wi]
            sums_a[tid][s:s + window] += a[j]
            sums_f[tid][s:s + window] += f[j]
            counts[tid][s:s + window] += 1
    activations, forces, indices = {}, {}, {}
    for tid in order:
        covered = np.flatnonzero(counts[tid])
        indices[tid] = covered
        activations[tid] = sums_a[tid][covered] / counts[tid][covered, None]
        forces[tid] = sums_f[tid][covered] / counts[tid][covered, None]
    return Reconstruction(activations=activations, forces=forces,
                          indices=indices, order=order)


@dataclass
class MetricsReport:
    muscle_names: list
    rmse_activation: list
    rmse_force: list
    r2_activation: list
    r2_force: list
    mean_rmse_activation: float
    mean_rmse_force: float
    mean_r2_activation: float
    mean_r2_force: float
    latency_median_s: float = float("nan")
    latency_p95_s: float = float("nan")
    latency_windows: int = 0

    def rows(self):
        """Per-muscle rows plus the averaged row, for the CSV and the table."""
        out = []
        for i, name in enumerate(self.muscle_names):
            out.append((name, self.rmse_activation[i], self.rmse_force[i],
                        self.r2_activation[i], self.r2_force[i]))
        out.append(("average", self.mean_rmse_activation, self.mean_rmse_force,
                    self.mean_r2_activation, self.mean_r2_force))
        return out


def evaluate(params: dict, cfg: net.NetworkConfig, stats, windows,
             labels_a: dict, labels_f: dict, muscle_names,
             latency_windows: int = 1000) -> MetricsReport:
    """Score reconstructed predictions against oracle labels per muscle.

    Labels are aligned by absolute time index within each trajectory; a
    trajectory in the window set without matching labels is an alignment
    failure.
    """
    recon = reconstruct_predictions(params, cfg, stats, windows)
    missing = [tid for tid in recon.order if tid not in labels_a or tid not in labels_f]
    if missing:
        raise EvaluationError(f"no labels for trajectory ids {missing}")
    for tid in recon.order:
        if labels_a[tid].shape[0] < recon.indices[tid].max() + 1:
            raise EvaluationError(f"labels for trajectory {tid} are shorter "
                                  f"than the predicted range")
    n = cfg.n_muscles
    rmse_a, rmse_f, r2_a, r2_f = [], [], [], []
    for j in range(n):
        y_a = np.concatenate([labels_a[tid][recon.indices[tid], j] for tid in recon.order])
        y_f = np.concatenate([labels_f[tid][recon.indices[tid], j] for tid in recon.order])
        p_a = np.concatenate([recon.activations[tid][:, j] for tid in recon.order])
        p_f = np.concatenate([recon.forces[tid][:, j] for tid in recon.order])
        rmse_a.append(rmse(y_a, p_a))
        rmse_f.append(rmse(y_f, p_f))
        r2_a.append(r_squared(y_a, p_a))
        r2_f.append(r_squared(y_f, p_f))
    report = MetricsReport(
        muscle_names=list(muscle_names),
        rmse_activation=rmse_a, rmse_force=rmse_f,
        r2_activation=r2_a, r2_force=r2_f,
        mean_rmse_activation=float(np.mean(rmse_a)),
        mean_rmse_force=float(np.mean(rmse_f)),
        mean_r2_activation=float(np.mean(r2_a)),
        mean_r2_force=float(np.mean(r2_f)))
    if latency_windows > 0 and len(windows) > 0:
        med, p95 = measure_latency(params, cfg, stats, windows, latency_windows)
        report.latency_median_s = med
        report.latency_p95_s = p95
        report.latency_windows = latency_windows
    return report


def measure_latency(params: dict, cfg: net.NetworkConfig, stats, windows,
                    reps: int = 1000):
    """Median and p95 wall time of single-window forwards, cycling the set."""
    times = np.empty(reps)
    count = len(windows)
    for k in range(reps):
        x = stats.apply(windows.inputs[k % count:k % count + 1])
        t0 = time.perf_counter()
        net.predict(params, x, cfg)
        times[k] = time.perf_counter() - t0
    return float(np.median(times)), float(np.percentile(times, 95))
