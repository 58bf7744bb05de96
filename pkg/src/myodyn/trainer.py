"""Window segmentation, Adam optimization and the training loop.

Windows never cross trajectory boundaries. The train/test split is
contiguous in time per trajectory: windows lying fully before the split
index train, windows fully after it test, and windows straddling it are
dropped from both sides, so no time index is shared between the splits even
though neighboring windows overlap heavily.

Training is a pure function of (config, dataset, seed): parameter updates,
batch order and dropout draws all derive from one seeded generator, and
reductions run in fixed order.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace

import numpy as np

from . import autodiff as ad
from . import losses as losses_mod
from . import network as net
from .config import ModelConfig, TrainConfig
from .data import KinematicSeries
from .errors import ConfigError, TrainingError
from .mechanics import StepConstants, series_constants
from .metrics import r_squared, reconstruct_predictions

log = logging.getLogger(__name__)

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass(frozen=True)
class WindowSet:
    """Stacked raw kinematic windows plus their provenance."""

    inputs: np.ndarray      # (W, window, 3), raw (q, qdot, qddot)
    traj_ids: np.ndarray    # (W,)
    starts: np.ndarray      # (W,)
    window: int
    stride: int

    def __len__(self):
        return self.inputs.shape[0]

    def take(self, idx) -> "WindowSet":
        return WindowSet(self.inputs[idx], self.traj_ids[idx], self.starts[idx],
                         self.window, self.stride)


def segment_windows(series: KinematicSeries, window: int = 25, stride: int = 2) -> WindowSet:
    """Sliding windows over one trajectory; count = floor((L-window)/stride)+1."""
    n = len(series)
    if n < window:
        log.warning("series %s has %d samples, shorter than window %d; no windows",
                    series.trajectory_id, n, window)
        starts = np.empty(0, dtype=int)
    else:
        starts = np.arange(0, n - window + 1, stride)
    inputs = np.empty((starts.size, window, 3))
    for i, s in enumerate(starts):
        inputs[i, :, 0] = series.q[s:s + window]
        inputs[i, :, 1] = series.qdot[s:s + window]
        inputs[i, :, 2] = series.qddot[s:s + window]
    return WindowSet(inputs=inputs, traj_ids=np.full(starts.size, series.trajectory_id),
                     starts=starts, window=window, stride=stride)


def merge_windows(sets) -> WindowSet:
    sets = list(sets)
    first = sets[0]
    return WindowSet(inputs=np.concatenate([s.inputs for s in sets]),
                     traj_ids=np.concatenate([s.traj_ids for s in sets]),
                     starts=np.concatenate([s.starts for s in sets]),
                     window=first.window, stride=first.stride)


def split_train_test(windows: WindowSet, lengths: dict, split: float = 0.8,
                     seed=None):
    """Contiguous-in-time split per trajectory; straddling windows dropped.

    lengths maps trajectory id to its sample count. The boundary index is
    floor(split * length); a window belongs to train only if it ends before
    the boundary and to test only if it starts at or after it, which keeps
    the two sides free of shared time indices. seed is accepted for
    interface symmetry but unused: the split is deterministic.
    """
    if not 0.0 < split < 1.0:
        raise ConfigError(f"split must be in (0, 1), got {split}")
    ends = windows.starts + windows.window  # exclusive
    bounds = np.array([math.floor(split * lengths[tid]) for tid in windows.traj_ids])
    train_mask = ends <= bounds
    test_mask = windows.starts >= bounds
    return windows.take(train_mask), windows.take(test_mask)


@dataclass
class AdamState:
    """First/second moment accumulators mirroring the parameter dict."""

    m: dict
    v: dict
    t: int = 0
    beta1: float = ADAM_BETA1
    beta2: float = ADAM_BETA2
    eps: float = ADAM_EPS

    @classmethod
    def for_params(cls, params: dict) -> "AdamState":
        return cls(m={k: np.zeros_like(p) for k, p in params.items()},
                   v={k: np.zeros_like(p) for k, p in params.items()})


def adam_step(params: dict, grads: dict, state: AdamState, lr: float) -> dict:
    """One bias-corrected Adam update; returns the new parameter dict."""
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    out = {}
    for name in sorted(params):
        g = grads[name]
        if not np.isfinite(g).all():
            raise TrainingError(f"non-finite gradient for parameter '{name}'")
        state.m[name] = b1 * state.m[name] + (1.0 - b1) * g
        state.v[name] = b2 * state.v[name] + (1.0 - b2) * (g * g)
        m_hat = state.m[name] / (1.0 - b1 ** state.t)
        v_hat = state.v[name] / (1.0 - b2 ** state.t)
        out[name] = params[name] - lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return out


@dataclass(frozen=True)
class Dataset:
    """Kinematics plus per-index mechanical constants and oracle labels."""

    series: list
    constants: dict                  # traj id -> StepConstants
    labels_a: dict                   # traj id -> (L, N)
    labels_f: dict                   # traj id -> (L, N)

    @property
    def lengths(self) -> dict:
        return {s.trajectory_id: len(s) for s in self.series}


def build_dataset(series, model: ModelConfig, labels=None) -> Dataset:
    """Resolve the mechanics for every series; attach labels when given."""
    constants, labels_a, labels_f = {}, {}, {}
    for s, lab in zip(series, labels if labels is not None else [None] * len(series)):
        constants[s.trajectory_id] = series_constants(model.muscles, model.joint,
                                                      s.q, s.qdot, s.qddot)
        if lab is not None:
            labels_a[s.trajectory_id] = lab.activations
            labels_f[s.trajectory_id] = lab.forces
    return Dataset(series=list(series), constants=constants,
                   labels_a=labels_a, labels_f=labels_f)


@dataclass
class NormStats:
    mean: np.ndarray   # (3,)
    std: np.ndarray    # (3,)

    def apply(self, inputs: np.ndarray) -> np.ndarray:
        return (inputs - self.mean) / self.std

    @classmethod
    def from_windows(cls, windows: WindowSet) -> "NormStats":
        flat = windows.inputs.reshape(-1, windows.inputs.shape[-1])
        std = flat.std(axis=0)
        std[std == 0.0] = 1.0  # constant channel: leave it centered only
        return cls(mean=flat.mean(axis=0), std=std)


@dataclass
class TrainResult:
    params: dict                 # best-on-test parameters
    final_params: dict
    stats: NormStats
    trace: list                  # per-iteration loss rows
    trace_header: tuple
    best_iter: int
    best_r2_force: float
    diverged: bool = False
    message: str = ""


def _gather_step_constants(dataset: Dataset, windows: WindowSet, idx) -> StepConstants:
    """Constants for a batch, flattened step-major to match network output rows."""
    window = windows.window
    batch = len(idx)
    n = next(iter(dataset.constants.values())).coef_active.shape[1]
    tau = np.empty((window, batch))
    c = np.empty((window, batch, n))
    d = np.empty((window, batch, n))
    r = np.empty((window, batch, n))
    for j, wi in enumerate(idx):
        sc = dataset.constants[windows.traj_ids[wi]]
        s = windows.starts[wi]
        tau[:, j] = sc.tau_req[s:s + window]
        c[:, j] = sc.coef_active[s:s + window]
        d[:, j] = sc.coef_passive[s:s + window]
        r[:, j] = sc.arms[s:s + window]
    return StepConstants(tau_req=tau.reshape(-1), coef_active=c.reshape(-1, n),
                         coef_passive=d.reshape(-1, n), arms=r.reshape(-1, n))


def _gather_labels(dataset: Dataset, windows: WindowSet, idx):
    window = windows.window
    rows_a, rows_f = [], []
    for wi in idx:
        tid = windows.traj_ids[wi]
        s = windows.starts[wi]
        rows_a.append(dataset.labels_a[tid][s:s + window])
        rows_f.append(dataset.labels_f[tid][s:s + window])
    a = np.stack(rows_a, axis=1)  # (window, batch, N)
    f = np.stack(rows_f, axis=1)
    return a.reshape(-1, a.shape[-1]), f.reshape(-1, f.shape[-1])


def test_r2_force(params: dict, cfg: net.NetworkConfig, stats: NormStats,
                  dataset: Dataset, windows: WindowSet, batch_size: int = 256) -> float:
    """Muscle-averaged R^2 of forces on a window set, via per-index averaging."""
    recon = reconstruct_predictions(params, cfg, stats, windows, batch_size=batch_size)
    scores = []
    for j in range(cfg.n_muscles):
        y = np.concatenate([dataset.labels_f[tid][recon.indices[tid], j]
                            for tid in recon.order])
        yhat = np.concatenate([recon.forces[tid][:, j] for tid in recon.order])
        scores.append(r_squared(y, yhat))
    return float(np.mean(scores))


def train(config: TrainConfig, dataset: Dataset, model: ModelConfig) -> TrainResult:
    """Train per config.loss_mode; checkpoints the best test-set force R^2.

    Oracle labels are used as the optimization target only in supervised
    mode; the physics mode touches them solely for checkpoint selection on
    the held-out split.
    """
    windows = merge_windows([segment_windows(s, config.window, config.stride)
                             for s in dataset.series])
    train_w, test_w = split_train_test(windows, dataset.lengths, config.split)
    if len(train_w) == 0:
        raise ConfigError("no training windows after segmentation and split")
    stats = NormStats.from_windows(train_w)

    cfg = net.NetworkConfig(n_muscles=len(model.muscles),
                            hidden_size=config.hidden_size, fc_size=config.fc_size,
                            dropout=config.dropout,
                            force_scale=tuple(model.f_max))
    rng = np.random.default_rng(config.seed)
    params = net.init_params(config.seed, cfg)
    state = AdamState.for_params(params)

    supervised = config.loss_mode == "supervised"
    header = (("iteration", "mse_a", "mse_f", "total") if supervised
              else ("iteration", "l_m", "l_f", "l_p", "l_b", "total"))
    trace: list = []
    best = {"iter": 0, "r2": -np.inf, "params": {k: p.copy() for k, p in params.items()}}
    order = np.empty(0, dtype=int)
    cursor = 0
    diverged = False
    message = ""

    for it in range(1, config.max_iters + 1):
        if cursor + config.batch_size > order.size:
            order = rng.permutation(len(train_w))
            cursor = 0
        idx = order[cursor:cursor + config.batch_size]
        cursor += config.batch_size

        tape = ad.Tape()
        pvars = {k: tape.leaf(v) for k, v in params.items()}
        inputs = stats.apply(train_w.inputs[idx])
        a_hat, f_hat = net.network_forward(pvars, inputs, cfg, mode="train", rng=rng)

        if supervised:
            lab_a, lab_f = _gather_labels(dataset, train_w, idx)
            mse_a, mse_f = losses_mod.loss_supervised_mse(a_hat, f_hat, lab_a, lab_f)
            total = ad.add(mse_a, mse_f)
            row = (it, float(mse_a.value), float(mse_f.value), float(total.value))
        else:
            constants = _gather_step_constants(dataset, train_w, idx)
            total, br = losses_mod.loss_total(a_hat, f_hat, constants,
                                              omega=config.omega, beta=config.beta,
                                              enabled=config.enabled_losses)
            row = (it, br.l_m, br.l_f, br.l_p, br.l_b, br.total)
        trace.append(row)

        if not np.isfinite(total.value):
            diverged = True
            message = f"loss became non-finite at iteration {it}"
            log.warning("%s; returning best checkpoint from iteration %d",
                        message, best["iter"])
            break
        grads_map = ad.backward(total)
        grads = {k: grads_map.wrt(v) for k, v in pvars.items()}
        try:
            params = adam_step(params, grads, state, config.lr)
        except TrainingError as exc:
            diverged = True
            message = f"{exc} at iteration {it}"
            log.warning("%s; returning best checkpoint from iteration %d",
                        message, best["iter"])
            break

        if it % config.eval_every == 0 or it == config.max_iters:
            if len(test_w) and dataset.labels_f:
                r2 = test_r2_force(params, cfg, stats, dataset, test_w)
            else:
                r2 = -np.inf
            if r2 > best["r2"] or (not np.isfinite(best["r2"]) and it == config.max_iters):
                best = {"iter": it, "r2": r2,
                        "params": {k: p.copy() for k, p in params.items()}}

    return TrainResult(params=best["params"], final_params=params, stats=stats,
                       trace=trace, trace_header=header, best_iter=best["iter"],
                       best_r2_force=float(best["r2"]), diverged=diverged,
                       message=message)


def network_config_for(config: TrainConfig, model: ModelConfig) -> net.NetworkConfig:
    return net.NetworkConfig(n_muscles=len(model.muscles),
                             hidden_size=config.hidden_size, fc_size=config.fc_size,
                             dropout=config.dropout, force_scale=tuple(model.f_max))


def test_windows_for(config: TrainConfig, dataset: Dataset) -> WindowSet:
    windows = merge_windows([segment_windows(s, config.window, config.stride)
                             for s in dataset.series])
    return split_train_test(windows, dataset.lengths, config.split)[1]


def evaluate_result(result: TrainResult, config: TrainConfig, dataset: Dataset,
                    model: ModelConfig, latency_windows: int = 0):
    """Metrics of a finished run on its own test split."""
    from .metrics import evaluate
    return evaluate(result.params, network_config_for(config, model), result.stats,
                    test_windows_for(config, dataset), dataset.labels_a,
                    dataset.labels_f, model.muscle_names,
                    latency_windows=latency_windows)


def sweep_omega(config: TrainConfig, dataset: Dataset, model: ModelConfig, grid):
    """One full training per omega; returns rows of aggregated test metrics.

    Per-cell failures are recorded and the sweep continues.
    """
    grid = list(grid)
    if not grid:
        raise ConfigError("omega grid is empty")
    rows = []
    for omega in grid:
        cell_cfg = replace(config, omega=float(omega))
        try:
            result = train(cell_cfg, dataset, model)
            report = evaluate_result(result, cell_cfg, dataset, model)
            rows.append({"omega": float(omega),
                         "r2_a": report.mean_r2_activation,
                         "r2_f": report.mean_r2_force,
                         "rmse_a": report.mean_rmse_activation,
                         "rmse_f": report.mean_rmse_force,
                         "error": ""})
        except Exception as exc:  # keep sweeping, report the failed cell
            log.warning("omega=%s failed: %s", omega, exc)
            rows.append({"omega": float(omega), "r2_a": float("nan"),
                         "r2_f": float("nan"), "rmse_a": float("nan"),
                         "rmse_f": float("nan"), "error": str(exc)})
    return rows
