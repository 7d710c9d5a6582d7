"""Leg geometry, forward/inverse kinematics and jump trajectory planning.

Joint convention (used everywhere in the package):

* ``q[0]`` hip abduction, rotation about the base x-axis;
* ``q[1]`` hip pitch and ``q[2]`` knee pitch, both in the sagittal plane.
  A positive pitch swings the distal link forward (+x);
* ``q = 0`` is the leg hanging straight down, foot at ``(0, l1, -(l2 + l3))``.

The knee works on the negative branch (``q[2] <= 0``), which the default
joint limits enforce and which makes IK single-valued.
"""
from __future__ import annotations

import functools
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from .errors import InvalidCycle, Unreachable

GRAVITY = 9.81
IK_DAMPING = 1e-3

# Push-off speed relative to the ballistic take-off speed; absorbs PD lag.
_PUSH_GAIN = 0.8


def _vec3(x):
    return tuple(float(v) for v in np.broadcast_to(np.asarray(x, dtype=float), (3,)))


@dataclass(frozen=True)
class LegModel:
    """Geometric and inertial description of the 3-DOF leg on its guide.

    Masses are point masses: ``m_base`` at the hip, the link masses at the
    link midpoints. ``imu_offset`` is expressed in the shank frame, measured
    from the foot centre.
    """

    l1: float = 0.08
    l2: float = 0.213
    l3: float = 0.213
    m_base: float = 2.0
    m1: float = 0.6
    m2: float = 0.5
    m3: float = 0.2
    joint_limits: tuple = ((-0.8, 0.8), (-1.2, 2.0), (-2.7, 0.0))
    foot_radius: float = 0.02
    kp: tuple = (30.0, 40.0, 40.0)
    kd: tuple = (0.3, 0.3, 0.3)
    imu_offset: tuple = (0.0, 0.0, 0.03)

    def __post_init__(self):
        for name in ("l1", "l2", "l3", "m_base", "m1", "m2", "m3", "foot_radius"):
            object.__setattr__(self, name, float(getattr(self, name)))
            if not getattr(self, name) > 0:
                raise ValueError(f"LegModel.{name} must be > 0, got {getattr(self, name)}")
        limits = tuple((float(lo), float(hi)) for lo, hi in self.joint_limits)
        if len(limits) != 3 or any(not lo < hi for lo, hi in limits):
            raise ValueError(f"invalid joint limits {self.joint_limits}")
        object.__setattr__(self, "joint_limits", limits)
        for name in ("kp", "kd", "imu_offset"):
            object.__setattr__(self, name, _vec3(getattr(self, name)))
        if min(self.kp) < 0 or min(self.kd) < 0:
            raise ValueError("kp and kd must be component-wise >= 0")

    @property
    def total_mass(self):
        return self.m_base + self.m1 + self.m2 + self.m3

    @property
    def lower(self):
        return np.array([lo for lo, _ in self.joint_limits])

    @property
    def upper(self):
        return np.array([hi for _, hi in self.joint_limits])

    def clamp(self, q):
        return np.clip(q, self.lower, self.upper)

    def replace(self, **changes):
        return type(self)(**{**self.__dict__, **changes})


@dataclass(frozen=True)
class JumpCycle:
    """One hop: slow crouch, fast push-off, retraction in flight, rest.

    ``stand_height`` is the hip-to-foot-centre height of the resting pose
    and ``foot_x`` the constant fore-aft foot target, both in the base frame.
    """

    period: float = 1.0
    apex_height: float = 0.02
    stance_fraction: float = 0.5
    stance_depth: float = 0.04
    stand_height: float = 0.34
    foot_x: float = 0.0

    def __post_init__(self):
        for name in ("period", "apex_height", "stance_fraction", "stance_depth",
                     "stand_height", "foot_x"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if not self.period > 0:
            raise InvalidCycle(f"period must be > 0, got {self.period}")
        if not self.apex_height > 0:
            raise InvalidCycle(f"apex_height must be > 0, got {self.apex_height}")
        if not 0 < self.stance_fraction < 1:
            raise InvalidCycle(f"stance_fraction must be in (0, 1), got {self.stance_fraction}")
        if not self.stance_depth >= 0:
            raise InvalidCycle(f"stance_depth must be >= 0, got {self.stance_depth}")
        if not 0.8 <= self.period <= 2.0:
            warnings.warn(f"jump period {self.period} s outside the usual 0.8-2.0 s range",
                          stacklevel=3)

    def replace(self, **changes):
        return type(self)(**{**self.__dict__, **changes})


# --- closed-form kinematics -------------------------------------------------

def _rot_x(a):
    c, s = math.cos(a), math.sin(a)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def _pitch(a):
    # rotation about -y: positive angle swings (0, 0, -1) towards +x
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, 0.0, -s], [0.0, 1.0, 0.0], [s, 0.0, c]])


def shank_rotation(q):
    """Orientation of the shank (and IMU) frame in the base frame."""
    return _rot_x(q[0]) @ _pitch(q[1] + q[2])


def forward_kinematics(model, q):
    """Foot-centre position in the base frame."""
    q1, q2, q3 = (float(v) for v in q)
    x = model.l2 * math.sin(q2) + model.l3 * math.sin(q2 + q3)
    zs = -model.l2 * math.cos(q2) - model.l3 * math.cos(q2 + q3)
    c, s = math.cos(q1), math.sin(q1)
    return np.array([x, c * model.l1 - s * zs, s * model.l1 + c * zs])


def jacobian(model, q):
    """Analytic 3x3 Jacobian of :func:`forward_kinematics`."""
    q1, q2, q3 = (float(v) for v in q)
    l1, l2, l3 = model.l1, model.l2, model.l3
    phi = q2 + q3
    x = l2 * math.sin(q2) + l3 * math.sin(phi)
    zs = -l2 * math.cos(q2) - l3 * math.cos(phi)
    dx2 = l2 * math.cos(q2) + l3 * math.cos(phi)
    dz2 = l2 * math.sin(q2) + l3 * math.sin(phi)
    dx3 = l3 * math.cos(phi)
    dz3 = l3 * math.sin(phi)
    c, s = math.cos(q1), math.sin(q1)
    return np.array([
        [0.0, dx2, dx3],
        [-s * l1 - c * zs, -s * dz2, -s * dz3],
        [c * l1 - s * zs, c * dz2, c * dz3],
    ])


def condition_number(model, q):
    """2-norm condition number of the Jacobian; ``inf`` at exact singularity."""
    sv = np.linalg.svd(jacobian(model, q), compute_uv=False)
    return math.inf if sv[-1] == 0 else float(sv[0] / sv[-1])


def check_reachable(model, target):
    """Raise :class:`Unreachable` if ``target`` is outside the workspace."""
    x, y, z = (float(v) for v in target)
    r2 = y * y + z * z - model.l1 ** 2
    if r2 < 0:
        raise Unreachable(f"target {tuple(target)} is inside the abduction offset cylinder")
    reach = math.sqrt(x * x + r2)
    if reach > model.l2 + model.l3 + 1e-12:
        raise Unreachable(
            f"target {tuple(target)} is {reach:.4f} m from the hip, beyond the "
            f"{model.l2 + model.l3:.4f} m leg length")


def inverse_kinematics(model, target, q_init=None, tol=1e-10, max_iter=200,
                       damping=IK_DAMPING, polish=1e-5):
    """Damped least-squares IK with joint-limit clamping at every iterate.

    Each iteration takes the fixed-damping direction
    ``(J^T J + damping I)^-1 J^T e`` and scales it by the best power of two
    (doubling while the residual keeps falling, halving if a unit step does
    not reduce it). Once the residual is below ``polish`` the damping is
    dropped and plain Gauss-Newton steps finish the job: near the
    straight-knee and hip-level singularities the smallest singular value
    squared is far below ``damping`` and damped steps would crawl.

    If ``max_iter`` steps from ``q_init`` do not reach ``tol`` (a joint limit
    can hold the iterate in a boundary minimum), the solve is repeated once
    from the closed-form knee-back pose. Raises :class:`Unreachable` when the target
    is outside the workspace or neither attempt reaches ``tol``.
    """
    if not tol > 0:
        raise ValueError("tol must be > 0")
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    target = np.asarray(target, dtype=float)
    check_reachable(model, target)
    if q_init is None:
        q_init = default_stance(model)
    seeds = [model.clamp(np.asarray(q_init, dtype=float))]
    # a joint limit can trap the clamped iteration in a boundary minimum;
    # retry from the closed-form knee-back pose before giving up
    seeds.append(model.clamp(_closed_form(model, target)))
    eye = damping * np.eye(3)
    for q in seeds:
        q, err = _solve(model, target, q, tol, max_iter, eye, polish)
        if err <= tol:
            return q
    raise Unreachable(f"IK did not converge in {max_iter} iterations (residual {err:.3e} m)")


def _solve(model, target, q, tol, max_iter, eye, polish):
    err = _residual(model, target, q)
    for _ in range(max_iter):
        if err <= tol:
            break
        e = target - forward_kinematics(model, q)
        J = jacobian(model, q)
        step = _step(J, e, eye, err > polish)
        # joints pinned at a limit and pushed outward drop out of the solve
        pinned = ((q <= model.lower) & (step < 0)) | ((q >= model.upper) & (step > 0))
        if pinned.any() and not pinned.all():
            free = ~pinned
            step = np.zeros(3)
            step[free] = _step(J[:, free], e, eye[np.ix_(free, free)], err > polish)
        q, err = _scaled_step(model, target, q, step, err)
    return q, err


def _closed_form(model, target):
    """Knee-back solution closest to the joint box (limits ignored)."""
    x, y, z = (float(v) for v in target)
    l1, l2, l3 = model.l1, model.l2, model.l3
    best, best_out = None, math.inf
    # the foot may sit below or above the hip in the abducted frame
    for zs in (-1.0, 1.0):
        zs *= math.sqrt(max(y * y + z * z - l1 ** 2, 0.0))
        q1 = math.remainder(math.atan2(z, y) - math.atan2(zs, l1), 2 * math.pi)
        cos3 = (x * x + zs * zs - l2 * l2 - l3 * l3) / (2 * l2 * l3)
        q3 = -math.acos(min(1.0, max(-1.0, cos3)))
        q2 = math.atan2(x, -zs) - math.atan2(l3 * math.sin(q3), l2 + l3 * math.cos(q3))
        q = np.array([q1, q2, q3])
        out = float(np.sum(np.abs(q - model.clamp(q))))
        if out < best_out:
            best, best_out = q, out
    return best


def _closed_form_rows(model, P):
    """Vectorised :func:`_closed_form` for rows of targets, foot below the hip."""
    x, y, z = P[:, 0], P[:, 1], P[:, 2]
    l1, l2, l3 = model.l1, model.l2, model.l3
    zs = -np.sqrt(np.maximum(y * y + z * z - l1 ** 2, 0.0))
    q1 = np.arctan2(z, y) - np.arctan2(zs, l1)
    q1 = np.remainder(q1 + np.pi, 2 * np.pi) - np.pi
    cos3 = (x * x + zs * zs - l2 * l2 - l3 * l3) / (2 * l2 * l3)
    q3 = -np.arccos(np.clip(cos3, -1.0, 1.0))
    q2 = np.arctan2(x, -zs) - np.arctan2(l3 * np.sin(q3), l2 + l3 * np.cos(q3))
    return np.column_stack((q1, q2, q3))


def _fk_rows(model, Q):
    q1, q2, phi = Q[:, 0], Q[:, 1], Q[:, 1] + Q[:, 2]
    x = model.l2 * np.sin(q2) + model.l3 * np.sin(phi)
    zs = -model.l2 * np.cos(q2) - model.l3 * np.cos(phi)
    c, s = np.cos(q1), np.sin(q1)
    return np.column_stack((x, c * model.l1 - s * zs, s * model.l1 + c * zs))


def _jacobian_rows(model, Q):
    """Stack of :func:`jacobian` matrices, shape (n, 3, 3)."""
    l1, l2, l3 = model.l1, model.l2, model.l3
    q1, q2, phi = Q[:, 0], Q[:, 1], Q[:, 1] + Q[:, 2]
    zs = -l2 * np.cos(q2) - l3 * np.cos(phi)
    dx2 = l2 * np.cos(q2) + l3 * np.cos(phi)
    dz2 = l2 * np.sin(q2) + l3 * np.sin(phi)
    dx3, dz3 = l3 * np.cos(phi), l3 * np.sin(phi)
    c, s = np.cos(q1), np.sin(q1)
    J = np.zeros((len(Q), 3, 3))
    J[:, 0, 1], J[:, 0, 2] = dx2, dx3
    J[:, 1, 0], J[:, 1, 1], J[:, 1, 2] = -s * l1 - c * zs, -s * dz2, -s * dz3
    J[:, 2, 0], J[:, 2, 1], J[:, 2, 2] = c * l1 - s * zs, c * dz2, c * dz3
    return J


def _step(J, e, eye, damped):
    if damped:
        return np.linalg.solve(J.T @ J + eye, J.T @ e)
    return np.linalg.lstsq(J, e, rcond=None)[0]


def _residual(model, target, q):
    return float(np.linalg.norm(target - forward_kinematics(model, q)))


def _scaled_step(model, target, q, step, err):
    alpha = 1.0
    best_q = model.clamp(q + step)
    best = _residual(model, target, best_q)
    if best < err:
        while alpha < 1e8:
            trial_q = model.clamp(q + 2.0 * alpha * step)
            trial = _residual(model, target, trial_q)
            if trial >= best:
                break
            alpha, best, best_q = 2.0 * alpha, trial, trial_q
        return best_q, best
    while alpha > 1e-6:
        alpha *= 0.5
        trial_q = model.clamp(q + alpha * step)
        trial = _residual(model, target, trial_q)
        if trial < err:
            return trial_q, trial
    # no descent along the damped direction; keep the unit step and let the
    # iteration budget decide
    return best_q, best


def default_stance(model, height=0.34):
    """Closed-form knee-back pose with the foot ``height`` below the hip."""
    half = min(height / (model.l2 + model.l3), 1.0)
    # only exact for l2 == l3; good enough as an IK seed otherwise
    q2 = math.acos(half)
    return model.clamp(np.array([0.0, q2, -2.0 * q2]))


# --- trajectory --------------------------------------------------------------

@dataclass(frozen=True)
class JumpTrajectory:
    t: np.ndarray
    position: np.ndarray
    velocity: np.ndarray
    knots: tuple = field(default=())

    def __len__(self):
        return len(self.t)


def _min_leg_length(model):
    q3 = model.joint_limits[2][0]
    return math.sqrt(model.l2 ** 2 + model.l3 ** 2 + 2 * model.l2 * model.l3 * math.cos(q3))


def _profile(model, cycle):
    """Knot times and vertical offsets (positive = foot raised) of one hop."""
    T = cycle.period
    v_to = math.sqrt(2.0 * GRAVITY * cycle.apex_height)
    ext = cycle.apex_height
    max_compression = cycle.stand_height - _min_leg_length(model)
    if cycle.stance_depth >= max_compression:
        raise InvalidCycle(
            f"stance_depth {cycle.stance_depth} m exceeds the available compression "
            f"{max_compression:.4f} m")
    if math.hypot(cycle.foot_x, cycle.stand_height + ext) >= model.l2 + model.l3:
        raise InvalidCycle("push-off extension would straighten the leg completely")
    t_crouch = cycle.stance_fraction * T
    t_push = 1.5 * (cycle.stance_depth + ext) / (_PUSH_GAIN * v_to)
    t_retract = max(2.0 * v_to / GRAVITY, 0.06)
    t_end = t_crouch + t_push + t_retract
    if t_end >= T:
        raise InvalidCycle(
            f"hop needs {t_end:.3f} s but the period is {T} s; lower stance_fraction")
    times = np.array([0.0, t_crouch, t_crouch + t_push, t_end, T])
    heights = np.array([0.0, cycle.stance_depth, -ext, 0.0, 0.0])
    return times, heights


def plan_jump_trajectory(model, cycle, dt):
    """Sample one period of the foot target and its velocity every ``dt``.

    The vertical offset is a C1 Hermite spline with zero slope at every knot
    (crouch, push-off, retraction), followed by a rest segment, so the first
    and last samples coincide and the profile repeats seamlessly.
    """
    if not dt > 0:
        raise ValueError("dt must be > 0")
    if not dt < cycle.period / 20:
        raise ValueError(f"dt={dt} must be below period/20={cycle.period / 20}")
    times, heights = _profile(model, cycle)
    spline = CubicHermiteSpline(times, heights, np.zeros_like(heights))
    n = int(round(cycle.period / dt))
    t = np.arange(n) * dt
    dz = spline(t)
    vz = spline(t, 1)
    pos = np.empty((n, 3))
    pos[:, 0] = cycle.foot_x
    pos[:, 1] = model.l1
    pos[:, 2] = -cycle.stand_height + dz
    vel = np.zeros((n, 3))
    vel[:, 2] = vz
    return JumpTrajectory(t=t, position=pos, velocity=vel, knots=tuple(times))


@functools.lru_cache(maxsize=32)
def joint_commands(model, cycle, dt):
    """Joint targets and rates for one period, via IK on the foot trajectory.

    Cached because calibration replays the same cycle many times. Samples
    are solved in closed form in one vectorised pass; any sample that lands
    outside the joint box or misses the target falls back to the iterative
    solver warm-started from its predecessor.
    """
    traj = plan_jump_trajectory(model, cycle, dt)
    q_des = _closed_form_rows(model, traj.position)
    bad = ~np.all((q_des >= model.lower) & (q_des <= model.upper), axis=1)
    bad |= np.linalg.norm(_fk_rows(model, q_des) - traj.position, axis=1) > 1e-11
    q = default_stance(model, cycle.stand_height)
    for i in range(len(traj)):
        if bad[i]:
            q_des[i] = inverse_kinematics(model, traj.position[i], q, tol=1e-11)
        q = q_des[i]
    dq_des = np.linalg.solve(_jacobian_rows(model, q_des), traj.velocity[:, :, None])[:, :, 0]
    q_des.flags.writeable = False
    dq_des.flags.writeable = False
    return q_des, dq_des
