"""Finite-difference audit of the whole differentiable stack.

Three sections: every elementary tape op at randomized points, a toy
bidirectional GRU network, and the full physics objective composed end to
end on a two-muscle toy problem. Each section reports its worst relative
error against central differences; the audit passes when every section is
within tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from . import losses as losses_mod
from . import network as net
from .data import differentiate
from .mechanics import (JointModel, MuscleParams, MusclePath, StepConstants,
                        series_constants)

TOLERANCE = 1e-4
FD_STEP = 1e-6


@dataclass
class AuditSection:
    name: str
    max_rel_err: float
    ok: bool
    detail: str = ""


@dataclass
class AuditReport:
    sections: list
    tolerance: float = TOLERANCE

    @property
    def ok(self) -> bool:
        return all(s.ok for s in self.sections)


def _away_from(rng, shape, kink, margin=5e-3, lo=-1.5, hi=1.5):
    x = rng.uniform(lo, hi, size=shape)
    while np.any(np.abs(x - kink) < margin):
        x = np.where(np.abs(x - kink) < margin, rng.uniform(lo, hi, size=shape), x)
    return x


def _weighted_sum(out, weights):
    return ad.sum_(ad.mul(out, out.tape.constant(weights)))


def _op_cases(rng):
    """(name, build(tape, leaves) -> scalar Var, point arrays) generators."""
    shape = (2, 3)

    def u(lo=-1.5, hi=1.5, s=shape):
        return rng.uniform(lo, hi, size=s)

    w = rng.uniform(0.5, 1.5, size=shape)
    w_mm = rng.uniform(0.5, 1.5, size=(2, 2))
    w_cat = rng.uniform(0.5, 1.5, size=(4, 3))
    cases = {
        "add": (lambda t, l: _weighted_sum(ad.add(l[0], l[1]), w), lambda: [u(), u()]),
        "sub": (lambda t, l: _weighted_sum(ad.sub(l[0], l[1]), w), lambda: [u(), u()]),
        "mul": (lambda t, l: _weighted_sum(ad.mul(l[0], l[1]), w), lambda: [u(), u()]),
        "div": (lambda t, l: _weighted_sum(ad.div(l[0], l[1]), w),
                lambda: [u(), np.sign(u()) * rng.uniform(0.4, 1.4, size=shape)]),
        "matmul": (lambda t, l: _weighted_sum(ad.matmul(l[0], l[1]), w_mm),
                   lambda: [u(s=(2, 3)), u(s=(3, 2))]),
        "sum": (lambda t, l: ad.sum_(ad.mul(l[0], t.constant(w))), lambda: [u()]),
        "mean": (lambda t, l: ad.mean(ad.mul(l[0], t.constant(w))), lambda: [u()]),
        "square": (lambda t, l: _weighted_sum(ad.square(l[0]), w), lambda: [u()]),
        "exp": (lambda t, l: _weighted_sum(ad.exp(l[0]), w), lambda: [u(-2, 2)]),
        "sqrt": (lambda t, l: _weighted_sum(ad.sqrt(l[0]), w), lambda: [u(0.1, 2.0)]),
        "sin": (lambda t, l: _weighted_sum(ad.sin(l[0]), w), lambda: [u(-3, 3)]),
        "cos": (lambda t, l: _weighted_sum(ad.cos(l[0]), w), lambda: [u(-3, 3)]),
        "asin": (lambda t, l: _weighted_sum(ad.asin(l[0]), w), lambda: [u(-0.9, 0.9)]),
        "tanh": (lambda t, l: _weighted_sum(ad.tanh(l[0]), w), lambda: [u(-2, 2)]),
        "sigmoid": (lambda t, l: _weighted_sum(ad.sigmoid(l[0]), w), lambda: [u(-3, 3)]),
        "relu": (lambda t, l: _weighted_sum(ad.relu(l[0]), w),
                 lambda: [_away_from(rng, shape, 0.0)]),
        "max_with_const": (lambda t, l: _weighted_sum(ad.max_with_const(l[0], 0.25), w),
                           lambda: [_away_from(rng, shape, 0.25)]),
        "concat": (lambda t, l: _weighted_sum(ad.concat([l[0], l[1]], axis=0), w_cat),
                   lambda: [u(), u()]),
        "slice": (lambda t, l: _weighted_sum(ad.slice_axis(l[0], 1, 0, 2), w[:, :2]),
                  lambda: [u()]),
    }
    return cases


def audit_elementary_ops(seed: int, points_per_op: int = 100) -> AuditSection:
    rng = np.random.default_rng(seed)
    worst, worst_name = 0.0, ""
    for name, (build, sample) in _op_cases(rng).items():
        for _ in range(points_per_op):
            report = ad.grad_check(build, sample(), h=FD_STEP, tol=TOLERANCE)
            if not np.isfinite(report.max_rel_err):
                return AuditSection("elementary ops", np.inf, False,
                                    f"{name}: {report.message}")
            if report.max_rel_err > worst:
                worst, worst_name = report.max_rel_err, name
    return AuditSection("elementary ops", worst, worst <= TOLERANCE,
                        f"worst op: {worst_name}")


def toy_network_config(n_muscles: int = 2) -> net.NetworkConfig:
    return net.NetworkConfig(n_muscles=n_muscles, hidden_size=4, fc_size=8,
                             dropout=0.0, force_scale=(100.0,) * n_muscles)


def audit_toy_bigru(seed: int) -> AuditSection:
    cfg = toy_network_config()
    params = net.init_params(seed, cfg)
    names = sorted(params)
    rng = np.random.default_rng(seed + 1)
    inputs = rng.standard_normal((2, 5, 3))

    def build(tape, leaves):
        pvars = dict(zip(names, leaves))
        a_hat, f_hat = net.network_forward(pvars, inputs, cfg, mode="eval")
        return ad.add(ad.mean(ad.square(a_hat)), ad.mean(ad.square(f_hat)))

    report = ad.grad_check(build, [params[n] for n in names], h=FD_STEP, tol=TOLERANCE)
    return AuditSection("toy bigru network", report.max_rel_err, report.ok,
                        report.message or f"worst param: {names[report.worst_leaf]}")


def toy_problem(seed: int):
    """Two toy muscles on a light joint plus a short kinematic stretch."""
    path_a = MusclePath(coeffs=(0.32, -0.030, 0.002), q_min=-0.2, q_max=1.8)
    path_b = MusclePath(coeffs=(0.26, -0.018, 0.001), q_min=-0.2, q_max=1.8)
    muscles = (
        MuscleParams(name="toyA", f_max=400.0, l_opt=0.10, phi_opt=0.15,
                     l_slack=0.22, v_max=10.0, path=path_a),
        MuscleParams(name="toyB", f_max=250.0, l_opt=0.09, phi_opt=0.05,
                     l_slack=0.17, v_max=10.0, path=path_b),
    )
    joint = JointModel(inertia=0.2, mass=2.0, com_dist=0.2, gravity_sign=1.0)
    rate = 100.0
    t = np.arange(40) / rate
    q = 0.6 * (1.0 - np.cos(2.0 * np.pi * 1.0 * t))
    qdot, qddot = differentiate(q, rate)
    return muscles, joint, (q, qdot, qddot)


def audit_full_loss(seed: int) -> AuditSection:
    muscles, joint, (q, qdot, qddot) = toy_problem(seed)
    sc = series_constants(muscles, joint, q, qdot, qddot)
    window, batch = 5, 2
    starts = (3, 11)
    rows = np.concatenate([np.arange(s, s + window) for s in starts])
    # step-major layout: row (t, b) -> t * batch + b
    order = np.arange(window * batch).reshape(batch, window).T.reshape(-1)
    constants = StepConstants(tau_req=rows_sel(sc.tau_req, rows)[order],
                              coef_active=rows_sel(sc.coef_active, rows)[order],
                              coef_passive=rows_sel(sc.coef_passive, rows)[order],
                              arms=rows_sel(sc.arms, rows)[order])
    inputs = np.stack([np.stack([q[s:s + window], qdot[s:s + window],
                                 qddot[s:s + window]], axis=1) for s in starts])
    mean = inputs.reshape(-1, 3).mean(axis=0)
    std = inputs.reshape(-1, 3).std(axis=0)
    std[std == 0] = 1.0
    inputs = (inputs - mean) / std

    cfg = toy_network_config()
    params = net.init_params(seed, cfg)
    names = sorted(params)

    def build(tape, leaves):
        pvars = dict(zip(names, leaves))
        a_hat, f_hat = net.network_forward(pvars, inputs, cfg, mode="eval")
        total, _ = losses_mod.loss_total(a_hat, f_hat, constants, omega=100.0, beta=2)
        return total

    report = ad.grad_check(build, [params[n] for n in names], h=FD_STEP, tol=TOLERANCE)
    return AuditSection("full objective composition", report.max_rel_err, report.ok,
                        report.message or f"worst param: {names[report.worst_leaf]}")


def rows_sel(arr, rows):
    return arr[rows]


def run_gradcheck(seed: int = 7, points_per_op: int = 100) -> AuditReport:
    return AuditReport(sections=[
        audit_elementary_ops(seed, points_per_op),
        audit_toy_bigru(seed),
        audit_full_loss(seed),
    ])
