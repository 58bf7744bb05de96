"""Command-line entry point.

Subcommands: gen-data, oracle, train, eval, ablate, sweep-omega, gradcheck.
Every run is fully determined by its flags, config files and seed; the
MYODYN_SEED environment variable overrides a config-file seed, and an
explicit --seed flag overrides both. Exit codes: 0 success, 1 validation
failure (bad usage, missing file, failed audit), 2 runtime failure.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import fileio
from .audit import run_gradcheck
from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .config import (TrainConfig, config_digest, load_model_config,
                     load_train_config)
from .data import generate_trajectory
from .errors import ConfigError, MyodynError
from .metrics import evaluate
from .network import NetworkConfig
from .static_opt import solve_trajectory
from .trainer import (Dataset, NormStats, build_dataset, merge_windows,
                      segment_windows, split_train_test, sweep_omega, train)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2

ABLATION_VARIANTS = ("mfp", "mfb", "mpb", "fpb", "mfpb")


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors; this tool reserves 2 for
    # runtime failures, so remap to 1
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="myodyn", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, config=False, model=False, kinematics=False, labels=False):
        p.add_argument("--seed", type=int, default=None,
                       help="override the config seed")
        p.add_argument("--out", type=Path, default=Path("."),
                       help="output directory")
        if config:
            p.add_argument("--config", type=Path, required=False,
                           help="training config file (YAML); defaults apply if omitted")
        if model:
            p.add_argument("--model", default=None,
                           help="model config path or bundled name (knee|elbow)")
        if kinematics:
            p.add_argument("--kinematics", type=Path, required=True,
                           help="kinematics CSV")
        if labels:
            p.add_argument("--labels", type=Path, required=True,
                           help="oracle label CSV")

    p = sub.add_parser("gen-data", help="generate a synthetic kinematics CSV")
    p.add_argument("--protocol", choices=("knee", "elbow"), required=True)
    p.add_argument("--trials", type=int, default=4)
    p.add_argument("--duration", type=float, default=12.0)
    p.add_argument("--rate", type=float, default=250.0)
    p.add_argument("--noise-rms-deg", type=float, default=0.3)
    common(p)

    p = sub.add_parser("oracle", help="solve per-step load sharing into a label CSV")
    common(p, model=True, kinematics=True)

    p = sub.add_parser("train", help="train a model and write checkpoint + loss trace")
    common(p, config=True, model=True, kinematics=True, labels=True)

    p = sub.add_parser("eval", help="score a checkpoint on its test split")
    p.add_argument("--checkpoint", type=Path, required=True)
    common(p, model=True, kinematics=True, labels=True)
    p.add_argument("--latency-windows", type=int, default=1000)

    p = sub.add_parser("ablate", help="train every loss-term subset of the objective")
    common(p, config=True, model=True, kinematics=True, labels=True)

    p = sub.add_parser("sweep-omega", help="train once per omega grid value")
    p.add_argument("--grid", default="1,10,100,1000",
                   help="comma-separated omega values")
    common(p, config=True, model=True, kinematics=True, labels=True)

    p = sub.add_parser("gradcheck", help="finite-difference audit of all gradients")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--points-per-op", type=int, default=100)
    return parser


def _resolve_seed(flag_seed, config_seed: int) -> int:
    if flag_seed is not None:
        return int(flag_seed)
    env = os.environ.get("MYODYN_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise ConfigError(f"MYODYN_SEED must be an integer, got '{env}'") from None
    return config_seed


def _require_file(path: Path, what: str):
    if not Path(path).is_file():
        raise ConfigError(f"{what} not found: {path}")


def _load_run_inputs(args):
    train_cfg = load_train_config(args.config) if args.config else TrainConfig()
    train_cfg.seed = _resolve_seed(args.seed, train_cfg.seed)
    _require_file(args.kinematics, "kinematics CSV")
    _require_file(args.labels, "label CSV")
    model = load_model_config(args.model or "knee")
    series = fileio.read_kinematics_csv(args.kinematics)
    names, labels = fileio.read_labels_csv(args.labels)
    if names != model.muscle_names:
        raise ConfigError(f"label muscles {names} do not match model "
                          f"{model.muscle_names}")
    dataset = _dataset_with_labels(series, model, labels)
    return train_cfg, model, dataset


def _dataset_with_labels(series, model, labels) -> Dataset:
    dataset = build_dataset(series, model)
    for s in series:
        if s.trajectory_id not in labels:
            raise ConfigError(f"labels missing trajectory {s.trajectory_id}")
        _, acts, forces = labels[s.trajectory_id]
        if acts.shape[0] != len(s):
            raise ConfigError(f"labels for trajectory {s.trajectory_id} have "
                              f"{acts.shape[0]} rows for {len(s)} samples")
        dataset.labels_a[s.trajectory_id] = acts
        dataset.labels_f[s.trajectory_id] = forces
    return dataset


def _save_run(out: Path, result, train_cfg: TrainConfig, model) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    meta = {
        "model": model.name,
        "muscles": model.muscle_names,
        "force_scale": [float(v) for v in model.f_max],
        "train_config": {k: getattr(train_cfg, k) for k in vars(train_cfg)},
        "best_iter": result.best_iter,
        "diverged": result.diverged,
    }
    ckpt = Checkpoint(params=result.params, norm_mean=result.stats.mean,
                      norm_std=result.stats.std,
                      config_hash=config_digest(train_cfg, model), meta=meta)
    ckpt_path = out / "checkpoint.ckpt"
    save_checkpoint(ckpt_path, ckpt)
    fileio.write_loss_trace_csv(out / "loss_trace.csv", result.trace_header,
                                result.trace)
    return ckpt_path


def _cmd_gen_data(args) -> int:
    seed = _resolve_seed(args.seed, 0)
    series = generate_trajectory(args.protocol, trials=args.trials,
                                 duration_s=args.duration, rate_hz=args.rate,
                                 seed=seed, noise_rms_deg=args.noise_rms_deg)
    args.out.mkdir(parents=True, exist_ok=True)
    path = args.out / "kinematics.csv"
    fileio.write_kinematics_csv(path, series)
    print(f"wrote {path} ({sum(len(s) for s in series)} samples, "
          f"{len(series)} trajectories)")
    return EXIT_OK


def _cmd_oracle(args) -> int:
    _require_file(args.kinematics, "kinematics CSV")
    model = load_model_config(args.model or "knee")
    series = fileio.read_kinematics_csv(args.kinematics)
    labels = {}
    infeasible = 0
    for s in series:
        lab = solve_trajectory(model.muscles, model.joint, s)
        labels[s.trajectory_id] = lab
        infeasible += lab.n_infeasible
    args.out.mkdir(parents=True, exist_ok=True)
    path = args.out / "labels.csv"
    fileio.write_labels_csv(path, model.muscle_names, labels)
    total = sum(len(s) for s in series)
    print(f"wrote {path} ({total} steps, {infeasible} infeasible)")
    return EXIT_OK


def _cmd_train(args) -> int:
    train_cfg, model, dataset = _load_run_inputs(args)
    t0 = time.perf_counter()
    result = train(train_cfg, dataset, model)
    ckpt_path = _save_run(args.out, result, train_cfg, model)
    status = "diverged; kept best checkpoint" if result.diverged else "done"
    print(f"{status} in {time.perf_counter() - t0:.1f}s: best test force R2 "
          f"{result.best_r2_force:.4f} at iteration {result.best_iter}")
    print(f"wrote {ckpt_path} and loss_trace.csv")
    return EXIT_OK


def _cmd_eval(args) -> int:
    _require_file(args.checkpoint, "checkpoint")
    ckpt = load_checkpoint(args.checkpoint)
    model = load_model_config(args.model or ckpt.meta.get("model", "knee"))
    tc = ckpt.meta["train_config"]
    _require_file(args.kinematics, "kinematics CSV")
    _require_file(args.labels, "label CSV")
    series = fileio.read_kinematics_csv(args.kinematics)
    names, labels = fileio.read_labels_csv(args.labels)
    dataset = _dataset_with_labels(series, model, labels)
    windows = merge_windows([segment_windows(s, tc["window"], tc["stride"])
                             for s in dataset.series])
    _, test_w = split_train_test(windows, dataset.lengths, tc["split"])
    cfg = NetworkConfig(n_muscles=len(model.muscles), hidden_size=tc["hidden_size"],
                        fc_size=tc["fc_size"], dropout=tc["dropout"],
                        force_scale=tuple(ckpt.meta["force_scale"]))
    stats = NormStats(mean=ckpt.norm_mean, std=ckpt.norm_std)
    report = evaluate(ckpt.params, cfg, stats, test_w, dataset.labels_a,
                      dataset.labels_f, model.muscle_names,
                      latency_windows=args.latency_windows)
    args.out.mkdir(parents=True, exist_ok=True)
    fileio.write_metrics_csv(args.out / "metrics.csv", report)
    if args.latency_windows > 0:
        fileio.write_latency_csv(args.out / "latency.csv", report)
    _print_report(report)
    return EXIT_OK


def _print_report(report):
    print(f"{'muscle':>10} {'rmse_a':>10} {'rmse_F_N':>10} {'r2_a':>8} {'r2_F':>8}")
    for name, ra, rf, r2a, r2f in report.rows():
        print(f"{name:>10} {ra:>10.4f} {rf:>10.3f} {r2a:>8.4f} {r2f:>8.4f}")
    if report.latency_windows:
        print(f"latency per window: median {report.latency_median_s * 1e3:.2f} ms, "
              f"p95 {report.latency_p95_s * 1e3:.2f} ms "
              f"({report.latency_windows} windows)")


def _cmd_ablate(args) -> int:
    train_cfg, model, dataset = _load_run_inputs(args)
    rows = []
    for enabled in ABLATION_VARIANTS:
        cfg = replace(train_cfg, enabled_losses=enabled, loss_mode="knowledge")
        result = train(cfg, dataset, model)
        from .trainer import evaluate_result
        report = evaluate_result(result, cfg, dataset, model)
        rows.append({"losses": enabled, "r2_a": report.mean_r2_activation,
                     "r2_f": report.mean_r2_force})
        print(f"losses={enabled:<5} r2_a={report.mean_r2_activation:.4f} "
              f"r2_F={report.mean_r2_force:.4f}")
    args.out.mkdir(parents=True, exist_ok=True)
    fileio.write_ablation_csv(args.out / "ablation.csv", rows)
    print(f"wrote {args.out / 'ablation.csv'}")
    return EXIT_OK


def _cmd_sweep_omega(args) -> int:
    train_cfg, model, dataset = _load_run_inputs(args)
    try:
        grid = [float(v) for v in args.grid.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"bad omega grid '{args.grid}'") from None
    rows = sweep_omega(train_cfg, dataset, model, grid)
    args.out.mkdir(parents=True, exist_ok=True)
    fileio.write_sweep_csv(args.out / "omega_sweep.csv", rows)
    for r in rows:
        print(f"omega={r['omega']:<8g} r2_a={r['r2_a']:.4f} r2_F={r['r2_f']:.4f}"
              + (f"  ({r['error']})" if r["error"] else ""))
    print(f"wrote {args.out / 'omega_sweep.csv'}")
    return EXIT_OK


def _cmd_gradcheck(args) -> int:
    seed = _resolve_seed(args.seed, 7)
    report = run_gradcheck(seed=seed, points_per_op=args.points_per_op)
    for s in report.sections:
        flag = "ok" if s.ok else "FAIL"
        print(f"[{flag}] {s.name}: max rel err {s.max_rel_err:.3e} "
              f"(tol {report.tolerance:.0e}) {s.detail}")
    if not report.ok:
        print("gradient audit failed")
        return EXIT_USAGE
    print("gradient audit passed")
    return EXIT_OK


_COMMANDS = {
    "gen-data": _cmd_gen_data,
    "oracle": _cmd_oracle,
    "train": _cmd_train,
    "eval": _cmd_eval,
    "ablate": _cmd_ablate,
    "sweep-omega": _cmd_sweep_omega,
    "gradcheck": _cmd_gradcheck,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse raises for --help (code 0) and usage errors
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        return _COMMANDS[args.command](args)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"myodyn {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except MyodynError as exc:
        print(f"myodyn {args.command}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"myodyn {args.command}: unexpected failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
