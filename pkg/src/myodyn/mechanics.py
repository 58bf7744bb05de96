"""Hill-type musculotendon mechanics and single-joint rigid-body dynamics.

The tendon is rigid (fixed at slack length), so fiber length and pennation
follow in closed form from the musculotendon path length: the fiber height
l_opt*sin(phi_opt) is constant, giving

    l_m  = sqrt((l_mt - l_slack)^2 + (l_opt*sin(phi_opt))^2)
    phi  = asin(l_opt*sin(phi_opt) / l_m)

Units are SI throughout (N, m, rad, s, kg). Every function is pure and
broadcasts elementwise over numpy arrays, so a whole kinematic series can be
resolved in one call.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError, DimensionError, GeometryError, RangeError

GRAVITY = 9.81

# practical activation range; shared by the optimization oracle and the
# boundary penalty
ACTIVATION_LOW = 0.01
ACTIVATION_HIGH = 1.0

# normalized fiber velocity is clipped here to keep the force-velocity
# curve bounded under noisy differentiated kinematics
V_NORM_LIMIT = 1.5

_ACTIVE_WIDTH = 0.45      # width of the active force-length bell
_PASSIVE_STRAIN = 0.6     # strain at max passive force
_FV_CONC_CURV = 0.25      # concentric curvature of the force-velocity hyperbola
_FV_ECC_PLATEAU = 1.4     # eccentric force plateau
_FV_ECC_CURV = 0.0375


@dataclass(frozen=True)
class MusclePath:
    """Polynomial musculotendon length l_mt(q), valid on [q_min, q_max].

    coeffs are meters per rad^k, lowest order first, degree <= 5. The moment
    arm is always the analytic derivative r(q) = -d l_mt/dq; the two are
    never stored independently.
    """

    coeffs: tuple
    q_min: float
    q_max: float

    def __post_init__(self):
        if not 1 <= len(self.coeffs) <= 6:
            raise ConfigError(f"path polynomial degree must be <= 5, got {len(self.coeffs) - 1}")
        if not self.q_min < self.q_max:
            raise ConfigError(f"empty angle range [{self.q_min}, {self.q_max}]")
        object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs))


@dataclass(frozen=True)
class MuscleParams:
    """Physiological constants of one muscle-tendon unit."""

    name: str
    f_max: float        # max isometric force, N
    l_opt: float        # optimal fiber length, m
    phi_opt: float      # pennation angle at optimal fiber length, rad
    l_slack: float      # tendon slack length, m
    v_max: float        # max contraction velocity, fiber lengths / s
    path: MusclePath

    def __post_init__(self):
        if self.f_max <= 0:
            raise ConfigError(f"{self.name}: f_max must be positive, got {self.f_max}")
        if self.l_opt <= 0:
            raise ConfigError(f"{self.name}: l_opt must be positive, got {self.l_opt}")
        if not 0.0 <= self.phi_opt < np.pi / 2:
            raise ConfigError(f"{self.name}: phi_opt must be in [0, pi/2), got {self.phi_opt}")
        if self.l_slack < 0:
            raise ConfigError(f"{self.name}: l_slack must be nonnegative, got {self.l_slack}")
        if self.v_max <= 0:
            raise ConfigError(f"{self.name}: v_max must be positive, got {self.v_max}")


@dataclass(frozen=True)
class JointModel:
    """One-DOF joint: constant inertia, gravity moment, optional damping.

    With constant inertia there is no centrifugal/Coriolis term; what remains
    of the velocity-dependent dynamics is the linear damping coefficient.
    """

    inertia: float       # kg m^2
    mass: float          # kg, moving segment
    com_dist: float      # m, pivot to segment center of mass
    gravity_sign: float  # +-1, selects the sign of the gravity moment
    damping: float = 0.0  # N m s / rad

    def __post_init__(self):
        if self.inertia <= 0:
            raise ConfigError(f"inertia must be positive, got {self.inertia}")
        if self.mass < 0 or self.com_dist < 0:
            raise ConfigError("mass and com_dist must be nonnegative")
        if self.gravity_sign not in (-1.0, 1.0, -1, 1):
            raise ConfigError(f"gravity_sign must be +-1, got {self.gravity_sign}")


@dataclass(frozen=True)
class MuscleState:
    """Resolved fiber geometry at one instant (arrays broadcast elementwise)."""

    l_mt: np.ndarray     # musculotendon length, m
    l_m: np.ndarray      # fiber length, m
    phi: np.ndarray      # pennation, rad
    l_norm: np.ndarray   # l_m / l_opt
    v_norm: np.ndarray = 0.0  # fiber velocity / (v_max * l_opt), in [-1.5, 1.5]


def musculotendon_length(path: MusclePath, q):
    """Evaluate l_mt(q) in meters (Horner); q must lie in the declared range."""
    q = np.asarray(q, dtype=np.float64)
    if np.any(q < path.q_min) or np.any(q > path.q_max):
        bad = q[(q < path.q_min) | (q > path.q_max)].flat[0]
        raise RangeError(f"q={bad} outside path range [{path.q_min}, {path.q_max}]")
    out = np.zeros_like(q)
    for c in reversed(path.coeffs):
        out = out * q + c
    return out


def moment_arm(path: MusclePath, q):
    """r(q) = -d l_mt/dq; positive r produces positive joint torque."""
    q = np.asarray(q, dtype=np.float64)
    if np.any(q < path.q_min) or np.any(q > path.q_max):
        bad = q[(q < path.q_min) | (q > path.q_max)].flat[0]
        raise RangeError(f"q={bad} outside path range [{path.q_min}, {path.q_max}]")
    out = np.zeros_like(q)
    for k in range(len(path.coeffs) - 1, 0, -1):
        out = out * q + k * path.coeffs[k]
    return -out


def resolve_fiber(params: MuscleParams, l_mt) -> MuscleState:
    """Fiber length, pennation and normalized length from the path length."""
    l_mt = np.asarray(l_mt, dtype=np.float64)
    along = l_mt - params.l_slack
    if np.any(along <= 0.0):
        bad = l_mt[along <= 0.0].flat[0]
        raise GeometryError(
            f"{params.name}: l_mt={bad} does not exceed tendon slack length {params.l_slack}")
    height = params.l_opt * np.sin(params.phi_opt)
    l_m = np.sqrt(along * along + height * height)
    phi = np.arcsin(height / l_m)
    return MuscleState(l_mt=l_mt, l_m=l_m, phi=phi, l_norm=l_m / params.l_opt)


def fiber_velocity(params: MuscleParams, state: MuscleState, q, qdot):
    """Normalized fiber velocity from joint motion, clipped to +-V_NORM_LIMIT.

    d l_mt/dt = -r(q) qdot; differentiating the constant-height identity gives
    d l_m/dt = (l_mt - l_slack) (d l_mt/dt) / l_m.
    """
    dlmt_dt = -moment_arm(params.path, q) * np.asarray(qdot, dtype=np.float64)
    v_m = (state.l_mt - params.l_slack) * dlmt_dt / state.l_m
    v_norm = v_m / (params.v_max * params.l_opt)
    return np.clip(v_norm, -V_NORM_LIMIT, V_NORM_LIMIT)


def active_force_length(l_norm):
    """Gaussian bell around the optimal fiber length."""
    l_norm = np.asarray(l_norm, dtype=np.float64)
    d = l_norm - 1.0
    return np.exp(-d * d / _ACTIVE_WIDTH)


def force_velocity(v_norm):
    """Hill hyperbola for shortening, saturating plateau for lengthening.

    Continuous at v=0 with a slope discontinuity; zero at and beyond the max
    shortening velocity v = -1.
    """
    v = np.asarray(v_norm, dtype=np.float64)
    v_neg = np.minimum(v, 0.0)
    v_pos = np.maximum(v, 0.0)
    conc = (1.0 + v_neg) / (1.0 - v_neg / _FV_CONC_CURV)
    ecc = (_FV_ECC_PLATEAU * v_pos + _FV_ECC_CURV) / (v_pos + _FV_ECC_CURV)
    return np.where(v >= 0.0, ecc, np.where(v >= -1.0, conc, 0.0))


def passive_force_length(l_norm):
    """Exponential passive stretch response, zero at and below optimal length."""
    l_norm = np.asarray(l_norm, dtype=np.float64)
    stretched = np.maximum(l_norm - 1.0, 0.0)
    return np.expm1(5.0 * stretched / _PASSIVE_STRAIN) / np.expm1(5.0)


def force_coefficients(params: MuscleParams, state: MuscleState):
    """Decompose the tendon force as F = c*a + d (affine in activation).

    c = f_max * fv(v) * fa(l) * cos(phi) is the active gain, d the passive
    offset; both in newtons.
    """
    cos_phi = np.cos(state.phi)
    c = params.f_max * force_velocity(state.v_norm) * active_force_length(state.l_norm) * cos_phi
    d = params.f_max * passive_force_length(state.l_norm) * cos_phi
    return c, d


def tendon_force(params: MuscleParams, state: MuscleState, a):
    """Hill tendon force F = f_max*(a*fv*fa + fp)*cos(phi), newtons.

    Affine in activation; a may transiently leave [0, 1] during training.
    """
    c, d = force_coefficients(params, state)
    return c * np.asarray(a, dtype=np.float64) + d


def joint_torque(forces, arms):
    """Net joint torque sum(F_n * r_n), N m."""
    forces = np.asarray(forces, dtype=np.float64)
    arms = np.asarray(arms, dtype=np.float64)
    if forces.shape != arms.shape:
        raise DimensionError(f"forces {forces.shape} vs arms {arms.shape}")
    return np.sum(forces * arms, axis=-1)


def gravity_torque(joint: JointModel, q):
    return joint.mass * GRAVITY * joint.com_dist * np.sin(np.asarray(q, dtype=np.float64)) \
        * joint.gravity_sign


def inverse_dynamics_torque(joint: JointModel, q, qdot, qddot):
    """Torque required to realize the motion: I*qdd + damping*qd + G(q)."""
    return (joint.inertia * np.asarray(qddot, dtype=np.float64)
            + joint.damping * np.asarray(qdot, dtype=np.float64)
            + gravity_torque(joint, q))


@dataclass(frozen=True)
class StepConstants:
    """Per-sample quantities the losses and the oracle share.

    For L samples and N muscles: tau_req (L,), and (L, N) arrays of active
    gains, passive offsets and moment arms. Hill force per muscle is
    coef_active*a + coef_passive.
    """

    tau_req: np.ndarray
    coef_active: np.ndarray
    coef_passive: np.ndarray
    arms: np.ndarray


def series_constants(muscles, joint: JointModel, q, qdot, qddot) -> StepConstants:
    """Resolve every muscle over a kinematic series in one vectorized pass."""
    q = np.asarray(q, dtype=np.float64)
    qdot = np.asarray(qdot, dtype=np.float64)
    qddot = np.asarray(qddot, dtype=np.float64)
    n = len(muscles)
    tau = inverse_dynamics_torque(joint, q, qdot, qddot)
    coef_active = np.empty((q.size, n))
    coef_passive = np.empty((q.size, n))
    arms = np.empty((q.size, n))
    for j, m in enumerate(muscles):
        state = resolve_fiber(m, musculotendon_length(m.path, q))
        state = replace(state, v_norm=fiber_velocity(m, state, q, qdot))
        c, d = force_coefficients(m, state)
        coef_active[:, j] = c
        coef_passive[:, j] = d
        arms[:, j] = moment_arm(m.path, q)
    return StepConstants(tau_req=tau, coef_active=coef_active,
                         coef_passive=coef_passive, arms=arms)
