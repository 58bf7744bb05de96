"""Static optimization: per-timestep minimum-activation-squared load sharing.

Each timestep is the box-constrained QP

    min sum(a_n^2)   s.t.  sum((c_n a_n + d_n) r_n) = tau_req,
                           ACTIVATION_LOW <= a_n <= ACTIVATION_HIGH.

Because the Hill force is affine in activation, stationarity gives
a_n = lam * w_n / 2 with w_n = c_n r_n, clipped to the box. The constraint
residual is monotone in lam, so the optimum is found exactly by sweeping the
2N clip breakpoints and solving the matching linear segment in closed form.
Unreachable torque targets return the least-residual saturated solution
flagged infeasible instead of raising.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractError
from .mechanics import (ACTIVATION_HIGH, ACTIVATION_LOW, JointModel,
                        series_constants)

_BOUND_TOL = 1e-9  # activations within this of a bound count as clamped


@dataclass(frozen=True)
class SoProblem:
    """One timestep of the load-sharing QP.

    coef_active (c), coef_passive (d) in newtons, arms (r) in meters,
    tau_req in N m. coef_active must be nonnegative.
    """

    coef_active: np.ndarray
    coef_passive: np.ndarray
    arms: np.ndarray
    tau_req: float
    lower: float = ACTIVATION_LOW
    upper: float = ACTIVATION_HIGH

    def __post_init__(self):
        c = np.asarray(self.coef_active, dtype=np.float64)
        d = np.asarray(self.coef_passive, dtype=np.float64)
        r = np.asarray(self.arms, dtype=np.float64)
        if not (c.shape == d.shape == r.shape) or c.ndim != 1:
            raise ContractError(f"coefficient shapes differ: {c.shape}, {d.shape}, {r.shape}")
        if np.any(c < 0.0):
            raise ContractError("active force gains must be nonnegative")
        if not self.lower < self.upper:
            raise ContractError(f"bounds [{self.lower}, {self.upper}] are empty")
        object.__setattr__(self, "coef_active", c)
        object.__setattr__(self, "coef_passive", d)
        object.__setattr__(self, "arms", r)


@dataclass(frozen=True)
class SoSolution:
    activations: np.ndarray
    forces: np.ndarray           # c*a + d, newtons
    torque_residual: float       # achieved torque minus tau_req, N m
    kkt_residual: float          # max |2 a_n - lam w_n| over interior coordinates
    status: str                  # optimal | clamped | infeasible


def build_problem(muscles, joint: JointModel, q: float, qdot: float, qddot: float) -> SoProblem:
    """Assemble the QP for one kinematic sample."""
    sc = series_constants(muscles, joint, np.atleast_1d(q), np.atleast_1d(qdot),
                          np.atleast_1d(qddot))
    return SoProblem(coef_active=sc.coef_active[0], coef_passive=sc.coef_passive[0],
                     arms=sc.arms[0], tau_req=float(np.atleast_1d(sc.tau_req)[0]))


def _clip_solution(w, lam, lower, upper):
    return np.clip(lam * w / 2.0, lower, upper)


def solve_timestep(problem: SoProblem) -> SoSolution:
    """Solve one timestep exactly; never raises, degeneracy lands in status."""
    w = problem.coef_active * problem.arms
    lo, hi = problem.lower, problem.upper
    tau_target = problem.tau_req - float(np.dot(problem.coef_passive, problem.arms))

    # achievable range of sum(w_n a_n) over the box; w = 0 coordinates sit at
    # the lower bound (their stationary value clip(0) = lo)
    a_min = np.where(w > 0, lo, np.where(w < 0, hi, lo))
    a_max = np.where(w > 0, hi, np.where(w < 0, lo, lo))
    t_min = float(np.dot(w, a_min))
    t_max = float(np.dot(w, a_max))

    if tau_target < t_min:
        return _finish(problem, w, a_min, lam=None, status="infeasible")
    if tau_target > t_max:
        return _finish(problem, w, a_max, lam=None, status="infeasible")

    nz = w[w != 0.0]
    if nz.size == 0:
        # no muscle moves the joint; feasibility above implies target == 0
        return _finish(problem, w, a_min, lam=None, status="clamped")

    # breakpoints where lam*w_n/2 crosses a bound; between consecutive
    # breakpoints the torque g(lam) = sum(w * clip(lam*w/2)) is linear and
    # nondecreasing, so the matching segment solves in closed form
    points = np.unique(np.concatenate([2.0 * lo / nz, 2.0 * hi / nz]))
    gvals = np.array([float(np.dot(w, _clip_solution(w, p, lo, hi))) for p in points])
    k = int(np.searchsorted(gvals, tau_target, side="left"))
    if k == 0:
        lam = float(points[0])  # g is flat at t_min below the first breakpoint
    elif k >= points.size:
        lam = float(points[-1])  # g(last) == t_max up to rounding
    else:
        lam_lo, lam_hi = float(points[k - 1]), float(points[k])
        raw_mid = 0.5 * (lam_lo + lam_hi) * w / 2.0
        interior = (raw_mid > lo) & (raw_mid < hi)
        denom = float(np.dot(w[interior], w[interior]))
        if denom == 0.0:
            lam = lam_lo  # flat segment: already at the target
        else:
            fixed = float(np.dot(w[~interior], np.clip(raw_mid[~interior], lo, hi)))
            lam = 2.0 * (tau_target - fixed) / denom
            lam = min(max(lam, lam_lo), lam_hi)
    a = _clip_solution(w, lam, lo, hi)
    return _finish(problem, w, a, lam=lam, status=None)


def _finish(problem: SoProblem, w, a, lam, status) -> SoSolution:
    forces = problem.coef_active * a + problem.coef_passive
    residual = float(np.dot(forces, problem.arms)) - problem.tau_req
    interior = (a > problem.lower + _BOUND_TOL) & (a < problem.upper - _BOUND_TOL)
    if lam is not None and np.any(interior):
        kkt = float(np.max(np.abs(2.0 * a[interior] - lam * w[interior])))
    else:
        kkt = 0.0
    if status is None:
        status = "optimal" if bool(np.all(interior)) else "clamped"
    return SoSolution(activations=a, forces=forces, torque_residual=residual,
                      kkt_residual=kkt, status=status)


@dataclass(frozen=True)
class TrajectoryLabels:
    """Per-step oracle output over one kinematic series."""

    time: np.ndarray
    activations: np.ndarray    # (L, N)
    forces: np.ndarray         # (L, N), newtons
    statuses: list
    torque_residuals: np.ndarray

    @property
    def n_infeasible(self) -> int:
        return sum(1 for s in self.statuses if s == "infeasible")


def solve_trajectory(muscles, joint: JointModel, series) -> TrajectoryLabels:
    """Independent per-step solves over a series; infeasible steps are recorded."""
    sc = series_constants(muscles, joint, series.q, series.qdot, series.qddot)
    n_steps = series.q.size
    n = len(muscles)
    acts = np.empty((n_steps, n))
    forces = np.empty((n_steps, n))
    residuals = np.empty(n_steps)
    statuses = []
    for t in range(n_steps):
        sol = solve_timestep(SoProblem(coef_active=sc.coef_active[t],
                                       coef_passive=sc.coef_passive[t],
                                       arms=sc.arms[t],
                                       tau_req=float(sc.tau_req[t])))
        acts[t] = sol.activations
        forces[t] = sol.forces
        residuals[t] = sol.torque_residual
        statuses.append(sol.status)
    return TrajectoryLabels(time=series.time, activations=acts, forces=forces,
                            statuses=statuses, torque_residuals=residuals)
